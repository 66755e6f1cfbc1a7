//! Comparison of generated scenarios with history: Fisher's z tests on
//! pairwise correlations, two-sample KS distances and monthly bands.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HistoricalPanel, StationMeta, Units};
use crate::error::{Error, Result};
use crate::marginal::quantile_sorted;
use crate::simulate::ScenarioSet;

/// Fewest overlapping observations for a testable correlation.
pub const MIN_OVERLAP: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.10;
pub const DEFAULT_BAND_LEVEL: f64 = 0.90;
pub const HISTOGRAM_BIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherZ {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sided test of `ρ1 = ρ2` for correlations from independent samples.
pub fn fisher_z_pair(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<FisherZ> {
    for r in [r1, r2] {
        if !(r.abs() < 1.0) {
            return Err(Error::Argument(format!("correlation {r} outside (-1, 1)")));
        }
    }
    if n1 < MIN_OVERLAP || n2 < MIN_OVERLAP {
        return Err(Error::Argument(format!(
            "sample sizes {n1}, {n2} below {MIN_OVERLAP}"
        )));
    }
    let se = (1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64).sqrt();
    let statistic = (r1.atanh() - r2.atanh()) / se;
    let p_value = libm::erfc(statistic.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(FisherZ { statistic, p_value })
}

/// Symmetric correlation matrix with per-pair overlap counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub n: usize,
    /// Row-major; NaN where a pair has no defined correlation.
    pub r: Vec<f64>,
    pub overlap: Vec<usize>,
}

impl CorrMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.n + j]
    }

    pub fn overlap(&self, i: usize, j: usize) -> usize {
        self.overlap[i * self.n + j]
    }

    /// Defined, not ±1, and with enough overlap for a Fisher test.
    pub fn testable(&self, i: usize, j: usize) -> bool {
        let r = self.get(i, j);
        r.abs() < 1.0 && self.overlap(i, j) >= MIN_OVERLAP
    }
}

/// Pearson correlations on pairwise-complete observations (NaN = missing).
/// The diagonal is exactly 1.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> CorrMatrix {
    let n = columns.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let stats: Vec<(f64, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| pearson(&columns[i], &columns[j]))
        .collect();
    let mut r = vec![f64::NAN; n * n];
    let mut overlap = vec![0; n * n];
    for i in 0..n {
        r[i * n + i] = 1.0;
        overlap[i * n + i] = columns[i].iter().filter(|v| !v.is_nan()).count();
    }
    for (&(i, j), &(c, m)) in pairs.iter().zip(&stats) {
        r[i * n + j] = c;
        r[j * n + i] = c;
        overlap[i * n + j] = m;
        overlap[j * n + i] = m;
    }
    CorrMatrix { n, r, overlap }
}

/// One-pass (Welford) Pearson correlation over rows where both are present.
fn pearson(x: &[f64], y: &[f64]) -> (f64, usize) {
    let (mut n, mut mx, mut my, mut sxx, mut syy, mut sxy) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        if a.is_nan() || b.is_nan() {
            continue;
        }
        n += 1;
        let dx = a - mx;
        mx += dx / n as f64;
        let dy = b - my;
        my += dy / n as f64;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    let r = if n >= 2 && sxx > 0.0 && syy > 0.0 {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    } else {
        f64::NAN
    };
    (r, n)
}

pub fn panel_columns(panel: &HistoricalPanel) -> Vec<Vec<f64>> {
    (0..panel.n_stations()).map(|j| panel.column(j)).collect()
}

/// Columns pooled over scenarios and months.
pub fn scenario_columns(set: &ScenarioSet) -> Vec<Vec<f64>> {
    (0..set.n_stations()).map(|j| set.pooled(j)).collect()
}

/// Two-sample Kolmogorov-Smirnov distance, ignoring NaN.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let sorted = |v: &[f64]| {
        let mut s: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
        s.sort_by(f64::total_cmp);
        s
    };
    let (a, b) = (sorted(a), sorted(b));
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCategory {
    VreVre,
    HydroVre,
    HydroHydro,
}

impl PairCategory {
    fn of(a: &StationMeta, b: &StationMeta) -> Self {
        match (a.units(), b.units()) {
            (Units::Volume, Units::Volume) => PairCategory::HydroHydro,
            (Units::CapacityFactor, Units::CapacityFactor) => PairCategory::VreVre,
            _ => PairCategory::HydroVre,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub station_a: String,
    pub station_b: String,
    pub category: PairCategory,
    pub r_hist: Option<f64>,
    pub r_synth: Option<f64>,
    pub n_hist: usize,
    pub n_synth: usize,
    pub z_statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// `None` when the pair is untestable.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub station: String,
    pub month: u32,
    pub hist_mean: f64,
    pub hist_lo: f64,
    pub hist_hi: f64,
    pub synth_mean: f64,
    pub synth_lo: f64,
    pub synth_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub alpha: f64,
    pub band_level: f64,
    pub stations: Vec<String>,
    pub pair_tests: Vec<PairTest>,
    /// Passing share of the testable VRE-VRE and hydro-VRE pairs.
    pub pass_fraction: f64,
    pub tested_pairs: usize,
    pub passed_pairs: usize,
    /// Hydro-hydro pairs, reported apart from `pass_fraction`.
    pub hydro_hydro_pass_fraction: Option<f64>,
    /// Mean `|r_synth - r_hist|` over the pairs counted in `pass_fraction`.
    pub mean_abs_corr_diff: f64,
    pub pdf_distances: BTreeMap<String, f64>,
    pub confidence_bands: Vec<Band>,
}

/// Builds the full report on the stations shared by both inputs.
pub fn build_report(
    historical: &HistoricalPanel,
    synthetic: &ScenarioSet,
    alpha: f64,
    band_level: f64,
) -> Result<ValidationReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("alpha {alpha} outside [0, 1]")));
    }
    if !(band_level > 0.0 && band_level < 1.0) {
        return Err(Error::Argument(format!("band level {band_level} outside (0, 1)")));
    }
    let shared: Vec<&str> = historical
        .stations()
        .iter()
        .map(|s| s.id.as_str())
        .filter(|id| synthetic.station_index(id).is_some())
        .collect();
    if shared.is_empty() {
        return Err(Error::Argument("historical and synthetic station sets are disjoint".into()));
    }
    let hist = historical.select(&shared)?;
    let synth = synthetic.select(&shared)?;
    let meta = hist.stations();
    let hist_cols = panel_columns(&hist);
    let synth_cols = scenario_columns(&synth);
    let rh = correlation_matrix(&hist_cols);
    let rs = correlation_matrix(&synth_cols);

    let defined = |v: f64| (!v.is_nan()).then_some(v);
    let mut pair_tests = Vec::new();
    for i in 0..shared.len() {
        for j in i + 1..shared.len() {
            let category = PairCategory::of(&meta[i], &meta[j]);
            let test = if rh.testable(i, j) && rs.testable(i, j) {
                Some(fisher_z_pair(rh.get(i, j), rh.overlap(i, j), rs.get(i, j), rs.overlap(i, j))?)
            } else {
                None
            };
            pair_tests.push(PairTest {
                station_a: shared[i].to_string(),
                station_b: shared[j].to_string(),
                category,
                r_hist: defined(rh.get(i, j)),
                r_synth: defined(rs.get(i, j)),
                n_hist: rh.overlap(i, j),
                n_synth: rs.overlap(i, j),
                z_statistic: test.map(|t| t.statistic),
                p_value: test.map(|t| t.p_value),
                pass: test.map(|t| t.p_value > alpha),
            });
        }
    }

    let counted = |p: &&PairTest| p.category != PairCategory::HydroHydro && p.pass.is_some();
    let tested_pairs = pair_tests.iter().filter(counted).count();
    let passed_pairs = pair_tests.iter().filter(counted).filter(|p| p.pass == Some(true)).count();
    let pass_fraction = if tested_pairs > 0 {
        passed_pairs as f64 / tested_pairs as f64
    } else {
        0.0
    };
    let mean_abs_corr_diff = if tested_pairs > 0 {
        pair_tests
            .iter()
            .filter(counted)
            .map(|p| (p.r_synth.unwrap_or(0.0) - p.r_hist.unwrap_or(0.0)).abs())
            .sum::<f64>()
            / tested_pairs as f64
    } else {
        0.0
    };
    let hh: Vec<&PairTest> = pair_tests
        .iter()
        .filter(|p| p.category == PairCategory::HydroHydro && p.pass.is_some())
        .collect();
    let hydro_hydro_pass_fraction =
        (!hh.is_empty()).then(|| hh.iter().filter(|p| p.pass == Some(true)).count() as f64 / hh.len() as f64);

    let pdf_distances = shared
        .iter()
        .enumerate()
        .map(|(j, id)| (id.to_string(), ks_distance(&hist_cols[j], &synth_cols[j])))
        .collect();

    let confidence_bands = bands(&hist, &synth, band_level);

    Ok(ValidationReport {
        alpha,
        band_level,
        stations: shared.iter().map(|s| s.to_string()).collect(),
        pair_tests,
        pass_fraction,
        tested_pairs,
        passed_pairs,
        hydro_hydro_pass_fraction,
        mean_abs_corr_diff,
        pdf_distances,
        confidence_bands,
    })
}

fn summary(mut v: Vec<f64>, level: f64) -> Option<(f64, f64, f64)> {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Some((mean, quantile_sorted(&v, tail), quantile_sorted(&v, 1.0 - tail)))
}

/// Per station and calendar month present in both inputs.
fn bands(hist: &HistoricalPanel, synth: &ScenarioSet, level: f64) -> Vec<Band> {
    let mut out = Vec::new();
    for (j, st) in hist.stations().iter().enumerate() {
        for month in 1..=12u32 {
            let h: Vec<f64> = (0..hist.n_times())
                .filter(|&t| hist.index()[t].month() == month)
                .map(|t| hist.get(t, j))
                .collect();
            let times: Vec<usize> = (0..synth.n_times()).filter(|&t| synth.index[t].month() == month).collect();
            let s: Vec<f64> = (0..synth.scenario_count)
                .flat_map(|s| times.iter().map(move |&t| (s, t)))
                .map(|(s, t)| synth.get(s, t, j))
                .collect();
            if let (Some(h), Some(s)) = (summary(h, level), summary(s, level)) {
                out.push(Band {
                    station: st.id.clone(),
                    month,
                    hist_mean: h.0,
                    hist_lo: h.1,
                    hist_hi: h.2,
                    synth_mean: s.0,
                    synth_lo: s.1,
                    synth_hi: s.2,
                });
            }
        }
    }
    out
}

impl ValidationReport {
    /// `(bin_lo, bin_hi, count)` of the z statistics in bins of `width`.
    pub fn fisher_histogram(&self, width: f64) -> Vec<(f64, f64, usize)> {
        let zs: Vec<f64> = self.pair_tests.iter().filter_map(|p| p.z_statistic).collect();
        if zs.is_empty() {
            return Vec::new();
        }
        let lo = (zs.iter().copied().fold(f64::INFINITY, f64::min) / width).floor() as i64;
        let hi = (zs.iter().copied().fold(f64::NEG_INFINITY, f64::max) / width).floor() as i64;
        let mut counts = vec![0usize; (hi - lo + 1) as usize];
        for z in zs {
            counts[((z / width).floor() as i64 - lo) as usize] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let b = lo + k as i64;
                (b as f64 * width, (b + 1) as f64 * width, c)
            })
            .collect()
    }

    /// Writes `report.json`, `fisher_hist.csv`, `corr_scatter.csv` and
    /// `bands.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        let p = dir.join("report.json");
        std::fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;

        write_csv(&dir.join("fisher_hist.csv"), "bin_lo,bin_hi,count", |w| {
            for (a, b, c) in self.fisher_histogram(HISTOGRAM_BIN) {
                writeln!(w, "{a},{b},{c}")?;
            }
            Ok(())
        })?;
        write_csv(&dir.join("corr_scatter.csv"), "station_a,station_b,r_hist,r_synth", |w| {
            for p in &self.pair_tests {
                if let (Some(a), Some(b)) = (p.r_hist, p.r_synth) {
                    writeln!(w, "{},{},{a},{b}", p.station_a, p.station_b)?;
                }
            }
            Ok(())
        })?;
        write_csv(
            &dir.join("bands.csv"),
            "station,month,hist_mean,hist_lo,hist_hi,synth_mean,synth_lo,synth_hi",
            |w| {
                for b in &self.confidence_bands {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        b.station, b.month, b.hist_mean, b.hist_lo, b.hist_hi, b.synth_mean, b.synth_lo, b.synth_hi
                    )?;
                }
                Ok(())
            },
        )
    }
}

fn write_csv(
    path: &Path,
    header: &str,
    body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let run = || -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{header}")?;
        body(&mut w)?;
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}
