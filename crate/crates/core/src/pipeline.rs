//! End-to-end commands: fit, simulate, validate and fixture generation.
//!
//! Each command writes a `manifest-<command>.json` next to its outputs with
//! the configuration hash, seed, versions and the SHA-256 of every input and
//! output file. Manifests hold file names only, so two runs with the same
//! inputs produce identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::archive::{ModelArchive, CRATE_VERSION, SCHEMA_VERSION};
use crate::bnet::{fit_regression, learn_structure, Dag};
use crate::config::{sha256_hex, LoadedConfig, RunConfig};
use crate::data::{
    add_months, aggregate_to_monthly, load_metadata, load_panel_with_meta, month_range, HistoricalPanel, Resolution,
    StationMeta, Timestamp, Units,
};
use crate::disagg::{disaggregate, fit_disagg, Disaggregated, ProfileLibrary};
use crate::error::{Error, Result, StageExt};
use crate::fixture::{write_fixture, Fixture, FixtureOptions};
use crate::marginal::{fit_kde_with, KdeOptions, Support};
use crate::simulate::{fit_inflow_ar, generate_inflows_driven, sample_network, to_original, ScenarioSet};
use crate::transform::{forward, Marginals};
use crate::validate::{build_report, ValidationReport};

pub const MODEL_FILE: &str = "model.json";
pub const MONTHLY_FILE: &str = "scenarios_monthly.csv";
pub const HOURLY_FILE: &str = "scenarios_hourly.csv";
pub const PROVENANCE_FILE: &str = "provenance.csv";
pub const CLIPPING_FILE: &str = "clipping.csv";
pub const VALIDATION_DIR: &str = "validation";

/// Seed offset for the unclamped network pass that drives inflow innovations.
const DRIVER_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub schema_version: u32,
    pub crate_version: String,
    /// File name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &str, cfg: &LoadedConfig) -> Self {
        Self {
            command: command.into(),
            config_sha256: cfg.hash.clone(),
            seed: cfg.config.simulation.seed,
            schema_version: SCHEMA_VERSION,
            crate_version: CRATE_VERSION.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn add(map: &mut BTreeMap<String, String>, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        map.insert(name, sha256_hex(&bytes));
        Ok(())
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        Self::add(&mut self.inputs, path)
    }

    fn output(&mut self, path: &Path) -> Result<()> {
        Self::add(&mut self.outputs, path)
    }

    fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.command));
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Historical inputs named by a configuration.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub stations: Vec<StationMeta>,
    /// Monthly panel over every observed station, inflows included.
    pub monthly: HistoricalPanel,
    /// Present when the data file is hourly.
    pub hourly: Option<HistoricalPanel>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let paths = &cfg.paths;
    let stations = load_metadata(&paths.metadata)?;
    let data = load_panel_with_meta(&paths.data, &stations)?;
    let (mut monthly, hourly) = match data.resolution() {
        Resolution::Hourly => (aggregate_to_monthly(&data)?, Some(data)),
        Resolution::Monthly => (data, None),
    };
    if let Some(p) = &paths.inflow_data {
        let inflow = load_panel_with_meta(p, &stations)?;
        if inflow.resolution() != Resolution::Monthly {
            return Err(Error::Data(format!("{}: inflow data must be monthly", p.display())));
        }
        monthly = monthly.merge(&inflow)?;
    }
    Ok(Inputs {
        stations,
        monthly,
        hourly,
    })
}

fn support_for(units: Units) -> Support {
    match units {
        Units::CapacityFactor => Support::interval(0.0, 1.0),
        Units::Volume => Support::lower(0.0),
    }
}

/// Fits the full model on already loaded inputs.
pub fn fit_model(inputs: &Inputs, cfg: &RunConfig) -> Result<ModelArchive> {
    let opts = &cfg.model;
    let seed = cfg.simulation.seed;
    let monthly = &inputs.monthly;

    let mut constants = BTreeMap::new();
    let mut marginals = Marginals::new();
    let kde = KdeOptions {
        grid_size: opts.kde_grid_size,
        bandwidth: None,
    };
    for (j, st) in monthly.stations().iter().enumerate() {
        let x = monthly.observed(j);
        if !x.is_empty() && x.iter().all(|&v| v == x[0]) {
            info!("station {} is constant at {}", st.id, x[0]);
            constants.insert(st.id.clone(), x[0]);
            continue;
        }
        let m = fit_kde_with(&x, support_for(st.units()), kde)
            .map_err(|e| e.for_station(&st.id))
            .stage("marginal")?;
        marginals.insert(st.id.clone(), m);
    }
    let modelled: Vec<&str> = monthly
        .stations()
        .iter()
        .map(|s| s.id.as_str())
        .filter(|id| marginals.contains_key(*id))
        .collect();
    if modelled.is_empty() {
        return Err(Error::Data("no station has a non-constant history".into()));
    }
    let panel = monthly.select(&modelled)?;
    let z = forward(&panel, &marginals).stage("transform")?;
    info!("fitted {} marginals, {} constant stations", marginals.len(), constants.len());

    let dag = if opts.max_parents == 0 {
        let ids = panel.stations().iter().map(|s| s.id.clone()).collect();
        let ev = panel.stations().iter().map(|s| s.is_evidence).collect();
        Dag::empty(ids, ev, 0)
    } else {
        learn_structure(&z, opts.max_parents, opts.restarts, seed).stage("bnet")?
    };
    let network = fit_regression(&dag, &z).stage("bnet")?.with_marginals(marginals);
    info!("network: {} nodes, {} edges", dag.len(), dag.edge_count());

    let volumes: Vec<&str> = panel
        .stations()
        .iter()
        .filter(|s| s.units() == Units::Volume)
        .map(|s| s.id.as_str())
        .collect();
    let inflow = if volumes.is_empty() {
        None
    } else {
        Some(fit_inflow_ar(&monthly.select(&volumes)?, opts.ar_order).stage("simulate")?)
    };

    let disagg = match &inputs.hourly {
        Some(h) => {
            let ids: Vec<&str> = h
                .stations()
                .iter()
                .filter(|s| s.units() == Units::CapacityFactor && modelled.contains(&s.id.as_str()))
                .map(|s| s.id.as_str())
                .collect();
            if ids.is_empty() {
                None
            } else {
                Some(fit_disagg(&h.select(&ids)?, opts.pca_variance_threshold).stage("disagg")?)
            }
        }
        None => None,
    };

    let stations = monthly.stations().to_vec();
    let history_end = *monthly
        .index()
        .last()
        .ok_or_else(|| Error::Data("empty monthly panel".into()))?;
    Ok(ModelArchive {
        schema_version: SCHEMA_VERSION,
        crate_version: CRATE_VERSION.into(),
        stations,
        network,
        constants,
        inflow,
        disagg,
        history_end,
        options: opts.clone(),
        seed,
    })
}

pub struct FitOutput {
    pub archive: ModelArchive,
    pub archive_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Loads the configured data, fits the model and writes the archive
/// (default `<output_dir>/model.json`).
pub fn cmd_fit(cfg: &LoadedConfig, out: Option<&Path>) -> Result<FitOutput> {
    let c = &cfg.config;
    let inputs = load_inputs(c).stage("data")?;
    let archive = fit_model(&inputs, c)?;
    std::fs::create_dir_all(&c.paths.output_dir).map_err(|e| Error::io(&c.paths.output_dir, e))?;
    let archive_path = out.map_or_else(|| c.paths.output_dir.join(MODEL_FILE), Path::to_path_buf);
    archive.save(&archive_path)?;

    let mut manifest = Manifest::new("fit", cfg);
    input_files(&mut manifest, c)?;
    manifest.output(&archive_path)?;
    let manifest_path = manifest.write(&c.paths.output_dir)?;
    info!("wrote {}", archive_path.display());
    Ok(FitOutput {
        archive,
        archive_path,
        manifest_path,
    })
}

fn input_files(manifest: &mut Manifest, c: &RunConfig) -> Result<()> {
    manifest.input(&c.paths.data)?;
    manifest.input(&c.paths.metadata)?;
    if let Some(p) = &c.paths.inflow_data {
        manifest.input(p)?;
    }
    Ok(())
}

/// Simulation horizon: configured start or the month after the history.
pub fn horizon(cfg: &RunConfig, archive: &ModelArchive) -> Result<Vec<Timestamp>> {
    let start = cfg.horizon_start()?.unwrap_or_else(|| add_months(archive.history_end, 1));
    Ok(month_range(start, cfg.simulation.horizon_months))
}

/// Monthly scenarios for every archived station, in archive order.
pub fn simulate_monthly(
    archive: &ModelArchive,
    n_scenarios: usize,
    horizon: &[Timestamp],
    evidence: Option<&ScenarioSet>,
    seed: u64,
) -> Result<ScenarioSet> {
    let net = &archive.network;
    let generated;
    let evidence = match (evidence, &archive.inflow) {
        (Some(ev), _) => Some(ev),
        (None, Some(model)) => {
            let drivers = sample_network(net, n_scenarios, horizon, None, seed ^ DRIVER_SEED_MIX).stage("simulate")?;
            generated = generate_inflows_driven(model, horizon, &drivers, seed).stage("simulate")?;
            Some(&generated)
        }
        (None, None) => None,
    };
    let z = sample_network(net, n_scenarios, horizon, evidence, seed).stage("simulate")?;
    let mut set = to_original(&z, net, evidence).stage("transform")?;
    if !archive.constants.is_empty() {
        let consts: Vec<StationMeta> = archive
            .stations
            .iter()
            .filter(|s| archive.constants.contains_key(&s.id))
            .cloned()
            .collect();
        let mut c = ScenarioSet::zeros(consts, n_scenarios, horizon.to_vec(), Resolution::Monthly, seed);
        for j in 0..c.n_stations() {
            let v = archive.constants[&c.stations[j].id];
            for s in 0..n_scenarios {
                for t in 0..horizon.len() {
                    c.set(s, t, j, v);
                }
            }
        }
        set = set.join(&c)?;
    }
    let order: Vec<&str> = archive.stations.iter().map(|s| s.id.as_str()).collect();
    let mut set = set.select(&order)?;
    set.seed = seed;
    Ok(set)
}

pub struct SimulateOutput {
    pub monthly: ScenarioSet,
    pub hourly: Option<Disaggregated>,
    pub files: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

/// Generates scenarios from an archive and writes them under `output_dir`.
/// With `evidence`, evidence stations are clamped to the file's values;
/// otherwise inflows are generated by the archived AR model.
pub fn cmd_simulate(cfg: &LoadedConfig, archive_path: &Path, evidence: Option<&Path>) -> Result<SimulateOutput> {
    let c = &cfg.config;
    let archive = ModelArchive::load(archive_path)?;
    let horizon = horizon(c, &archive)?;
    let n = c.simulation.n_scenarios;
    let seed = c.simulation.seed;

    let ev = match evidence {
        Some(p) => {
            let all = ScenarioSet::read_csv(p, &archive.stations, Resolution::Monthly).stage("data")?;
            let ids: Vec<&str> = all
                .stations
                .iter()
                .filter(|s| s.is_evidence)
                .map(|s| s.id.as_str())
                .collect();
            Some(all.select(&ids)?)
        }
        None => None,
    };
    let monthly = simulate_monthly(&archive, n, &horizon, ev.as_ref(), seed)?;

    let out = &c.paths.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = vec![out.join(MONTHLY_FILE)];
    monthly.write_csv(&files[0])?;

    let hourly = match &archive.disagg {
        Some(model) => {
            let inputs = load_inputs(c).stage("data")?;
            match &inputs.hourly {
                Some(h) => {
                    let library = ProfileLibrary::from_panel(h, &model.station_ids()).stage("disagg")?;
                    let d = disaggregate(&monthly, model, &library).stage("disagg")?;
                    let (hp, pp, cp) = (out.join(HOURLY_FILE), out.join(PROVENANCE_FILE), out.join(CLIPPING_FILE));
                    d.hourly.write_csv(&hp)?;
                    d.write_provenance(&pp)?;
                    d.write_clipping(&cp)?;
                    files.extend([hp, pp, cp]);
                    Some(d)
                }
                None => None,
            }
        }
        None => None,
    };

    let mut manifest = Manifest::new("simulate", cfg);
    manifest.input(archive_path)?;
    if let Some(p) = evidence {
        manifest.input(p)?;
    }
    if hourly.is_some() {
        input_files(&mut manifest, c)?;
    }
    for f in &files {
        manifest.output(f)?;
    }
    let manifest_path = manifest.write(out)?;
    info!("wrote {} scenarios × {} months", n, horizon.len());
    Ok(SimulateOutput {
        monthly,
        hourly,
        files,
        manifest_path,
    })
}

pub struct ValidateOutput {
    pub report: ValidationReport,
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
}

/// Compares monthly scenarios (a file, or a directory holding
/// `scenarios_monthly.csv`) with the configured history. Results go to
/// `<output_dir>/validation`.
pub fn cmd_validate(cfg: &LoadedConfig, archive_path: &Path, scenarios: &Path) -> Result<ValidateOutput> {
    let c = &cfg.config;
    let archive = ModelArchive::load(archive_path)?;
    let file = if scenarios.is_dir() {
        scenarios.join(MONTHLY_FILE)
    } else {
        scenarios.to_path_buf()
    };
    let synth = ScenarioSet::read_csv(&file, &archive.stations, Resolution::Monthly).stage("data")?;
    let inputs = load_inputs(c).stage("data")?;
    let v = &c.validation;
    let report = build_report(&inputs.monthly, &synth, v.alpha, v.band_level).stage("validate")?;

    let dir = c.paths.output_dir.join(VALIDATION_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    report.write(&dir)?;

    let mut manifest = Manifest::new("validate", cfg);
    manifest.input(archive_path)?;
    manifest.input(&file)?;
    input_files(&mut manifest, c)?;
    let mut written: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    written.sort();
    for f in &written {
        manifest.output(f)?;
    }
    let manifest_path = manifest.write(&dir)?;
    info!(
        "pass fraction {:.3} over {} pairs",
        report.pass_fraction, report.tested_pairs
    );
    Ok(ValidateOutput {
        report,
        dir,
        manifest_path,
    })
}

/// Writes the synthetic fixture dataset to `dir`.
pub fn make_fixture(dir: &Path, opts: &FixtureOptions) -> Result<Fixture> {
    let fx = write_fixture(dir, opts).stage("fixture")?;
    info!("wrote fixture with {} stations to {}", fx.stations.len(), dir.display());
    Ok(fx)
}
