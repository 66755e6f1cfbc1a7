//! Declarative run configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{parse_timestamp, Timestamp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Observations, hourly or monthly (`timestamp,station_id,value`).
    pub data: PathBuf,
    /// Station metadata (`station_id,kind,capacity_mw,is_evidence`).
    pub metadata: PathBuf,
    /// Optional monthly inflow series merged into the monthly panel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow_data: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub max_parents: usize,
    pub restarts: usize,
    pub kde_grid_size: usize,
    pub pca_variance_threshold: f64,
    pub ar_order: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            max_parents: 6,
            restarts: 5,
            kde_grid_size: crate::marginal::DEFAULT_GRID_SIZE,
            pca_variance_threshold: crate::disagg::DEFAULT_VARIANCE_THRESHOLD,
            ar_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationOptions {
    pub n_scenarios: usize,
    /// First simulated month (`YYYY-MM`); defaults to the month after the
    /// end of the history.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_start: Option<String>,
    pub horizon_months: usize,
    pub seed: u64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            n_scenarios: 100,
            horizon_start: None,
            horizon_months: 12,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationOptions {
    pub alpha: f64,
    pub band_level: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            alpha: crate::validate::DEFAULT_ALPHA,
            band_level: crate::validate::DEFAULT_BAND_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub simulation: SimulationOptions,
    #[serde(default)]
    pub validation: ValidationOptions,
}

/// A parsed configuration plus the hash of the file it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Hex SHA-256 of the raw configuration bytes.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(LoadedConfig {
            config,
            hash: sha256_hex(&bytes),
        })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.data);
        fix(&mut self.paths.metadata);
        fix(&mut self.paths.output_dir);
        if let Some(p) = self.paths.inflow_data.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let m = &self.model;
        if m.max_parents > 64 {
            return bad(format!("model.max_parents {} outside [0, 64]", m.max_parents));
        }
        if !(1..=1000).contains(&m.restarts) {
            return bad(format!("model.restarts {} outside [1, 1000]", m.restarts));
        }
        if !(1024..=1 << 20).contains(&m.kde_grid_size) {
            return bad(format!("model.kde_grid_size {} outside [1024, 1048576]", m.kde_grid_size));
        }
        if !(m.pca_variance_threshold > 0.0 && m.pca_variance_threshold <= 1.0) {
            return bad(format!(
                "model.pca_variance_threshold {} outside (0, 1]",
                m.pca_variance_threshold
            ));
        }
        if m.ar_order > 12 {
            return bad(format!("model.ar_order {} outside [0, 12]", m.ar_order));
        }
        let s = &self.simulation;
        if !(1..=1_000_000).contains(&s.n_scenarios) {
            return bad(format!("simulation.n_scenarios {} outside [1, 1000000]", s.n_scenarios));
        }
        if !(1..=1200).contains(&s.horizon_months) {
            return bad(format!("simulation.horizon_months {} outside [1, 1200]", s.horizon_months));
        }
        self.horizon_start()?;
        let v = &self.validation;
        if !(0.0..=1.0).contains(&v.alpha) {
            return bad(format!("validation.alpha {} outside [0, 1]", v.alpha));
        }
        if !(v.band_level > 0.0 && v.band_level < 1.0) {
            return bad(format!("validation.band_level {} outside (0, 1)", v.band_level));
        }
        Ok(())
    }

    pub fn horizon_start(&self) -> Result<Option<Timestamp>> {
        match &self.simulation.horizon_start {
            None => Ok(None),
            Some(s) => {
                let t = parse_timestamp(s).map_err(|e| Error::Config(format!("simulation.horizon_start: {e}")))?;
                if !crate::data::is_month_start(&t) {
                    return Err(Error::Config(format!("simulation.horizon_start {s} is not a month start")));
                }
                Ok(Some(t))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("run.json");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"paths": {"data": "d.csv", "metadata": "m.csv", "output_dir": "out"}}"#,
        );
        let c = RunConfig::load(&p).unwrap();
        assert_eq!(c.config.model, ModelOptions::default());
        assert_eq!(c.config.simulation.n_scenarios, 100);
        assert_eq!(c.config.validation.alpha, 0.10);
        assert_eq!(c.config.paths.data, dir.path().join("d.csv"));
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"paths": {"data": "d", "metadata": "m", "output_dir": "o"}, "model": {"max_parent": 3}}"#,
        );
        assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
    }

    #[test]
    fn ranges_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        for body in [
            r#"{"paths": {"data": "d", "metadata": "m", "output_dir": "o"}, "model": {"restarts": 0}}"#,
            r#"{"paths": {"data": "d", "metadata": "m", "output_dir": "o"}, "validation": {"alpha": 1.5}}"#,
            r#"{"paths": {"data": "d", "metadata": "m", "output_dir": "o"}, "simulation": {"horizon_start": "2030-01-15"}}"#,
            r#"{"paths": {"data": "d", "metadata": "m", "output_dir": "o"}, "model": {"pca_variance_threshold": 0}}"#,
        ] {
            let p = write(dir.path(), body);
            assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))), "{body}");
        }
    }
}
