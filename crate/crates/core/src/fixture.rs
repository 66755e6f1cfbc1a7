//! Synthetic dataset with known ground truth.
//!
//! Monthly values come from a Gaussian copula with a random factor-model
//! correlation: Beta capacity factors for renewables and lognormal inflows
//! for hydro stations. Hourly renewable series are built by shaping each
//! monthly value with a diurnal profile, and the monthly files hold the
//! hourly means.

use std::path::Path;

use chrono::{Datelike, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::config::{ModelOptions, Paths, RunConfig, SimulationOptions, ValidationOptions};
use crate::data::{
    aggregate_to_monthly, month_range, month_start, write_metadata, write_observations, HistoricalPanel, Resolution,
    StationKind, StationMeta, Timestamp,
};
use crate::error::{Error, Result};
use crate::normal;

const FACTORS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub n_stations: usize,
    pub years: usize,
    pub start_year: i32,
    /// Generate hourly renewable series (monthly values are their means).
    pub hourly: bool,
    pub seed: u64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            n_stations: 8,
            years: 30,
            start_year: 1990,
            hourly: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrueMarginal {
    Beta { alpha: f64, beta: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub stations: Vec<String>,
    /// Copula correlation, row-major.
    pub correlation: Vec<Vec<f64>>,
    pub marginals: Vec<TrueMarginal>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub stations: Vec<StationMeta>,
    /// All stations, monthly.
    pub monthly: HistoricalPanel,
    /// Renewable stations, hourly.
    pub hourly: Option<HistoricalPanel>,
    pub truth: Truth,
}

impl Fixture {
    pub fn hydro_ids(&self) -> Vec<&str> {
        self.stations.iter().filter(|s| s.kind == StationKind::Hydro).map(|s| s.id.as_str()).collect()
    }

    pub fn vre_ids(&self) -> Vec<&str> {
        self.stations.iter().filter(|s| s.kind != StationKind::Hydro).map(|s| s.id.as_str()).collect()
    }
}

pub fn hydro_count(n_stations: usize) -> usize {
    (3 * n_stations + 4) / 8
}

pub fn generate(opts: &FixtureOptions) -> Result<Fixture> {
    if opts.n_stations < 2 {
        return Err(Error::Argument("fixture needs at least 2 stations".into()));
    }
    if opts.years < 3 {
        return Err(Error::Argument("fixture needs at least 3 years".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.n_stations;
    let n_hydro = hydro_count(n);
    let vre_kinds = [StationKind::Wind, StationKind::Csp, StationKind::Dgsp];
    let stations: Vec<StationMeta> = (0..n)
        .map(|j| {
            if j < n_hydro {
                StationMeta::new(format!("H{:02}", j + 1), StationKind::Hydro, 0.0, true)
            } else {
                let k = vre_kinds[(j - n_hydro) % 3];
                let prefix = match k {
                    StationKind::Wind => "W",
                    StationKind::Csp => "C",
                    _ => "D",
                };
                let cap = (50.0 + 250.0 * rng.random::<f64>()).round();
                StationMeta::new(format!("{prefix}{:02}", j + 1), k, cap, false)
            }
        })
        .collect();

    let loadings: Vec<[f64; FACTORS]> = (0..n)
        .map(|_| {
            let mut l = [0.0; FACTORS];
            l.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
            let target = 0.5 + 0.4 * rng.random::<f64>();
            l.iter_mut().for_each(|v| *v *= target / norm);
            l
        })
        .collect();
    let uniq: Vec<f64> = loadings.iter().map(|l| (1.0 - l.iter().map(|v| v * v).sum::<f64>()).sqrt()).collect();
    let correlation: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        loadings[i].iter().zip(&loadings[j]).map(|(a, b)| a * b).sum()
                    }
                })
                .collect()
        })
        .collect();

    let marginals: Vec<TrueMarginal> = stations
        .iter()
        .map(|s| match s.kind {
            StationKind::Hydro => TrueMarginal::Lognormal {
                mu: (100.0 + 1900.0 * rng.random::<f64>()).ln(),
                sigma: 0.3 + 0.3 * rng.random::<f64>(),
            },
            StationKind::Wind => TrueMarginal::Beta {
                alpha: 4.0 + 2.0 * rng.random::<f64>(),
                beta: 8.0 + 4.0 * rng.random::<f64>(),
            },
            _ => TrueMarginal::Beta {
                alpha: 12.0 + 4.0 * rng.random::<f64>(),
                beta: 40.0 + 10.0 * rng.random::<f64>(),
            },
        })
        .collect();
    let betas: Vec<Option<Beta>> = marginals
        .iter()
        .map(|m| match m {
            TrueMarginal::Beta { alpha, beta } => Beta::new(*alpha, *beta).ok(),
            TrueMarginal::Lognormal { .. } => None,
        })
        .collect();

    let n_months = opts.years * 12;
    let index = month_range(month_start(opts.start_year, 1), n_months);
    let mut monthly_values = Vec::with_capacity(n_months * n);
    for _ in 0..n_months {
        let f: [f64; FACTORS] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        for j in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            let z = loadings[j].iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() + uniq[j] * e;
            let v = match (&marginals[j], &betas[j]) {
                (TrueMarginal::Lognormal { mu, sigma }, _) => (mu + sigma * z).exp(),
                (_, Some(b)) => b.inverse_cdf(normal::cdf(z).clamp(1e-12, 1.0 - 1e-12)),
                _ => unreachable!("beta marginal has a distribution"),
            };
            monthly_values.push(v);
        }
    }
    let draws = HistoricalPanel::new(stations.clone(), index.clone(), monthly_values, Resolution::Monthly)?;

    let (monthly, hourly) = if opts.hourly {
        let vre: Vec<&str> = stations[n_hydro..].iter().map(|s| s.id.as_str()).collect();
        let hourly = shape_hourly(&draws.select(&vre)?, &mut rng)?;
        let vre_monthly = aggregate_to_monthly(&hourly)?;
        let hydro: Vec<&str> = stations[..n_hydro].iter().map(|s| s.id.as_str()).collect();
        let merged = draws.select(&hydro)?.merge(&vre_monthly)?;
        let ids: Vec<&str> = stations.iter().map(|s| s.id.as_str()).collect();
        (merged.select(&ids)?, Some(hourly))
    } else {
        (draws, None)
    };

    Ok(Fixture {
        truth: Truth {
            seed: opts.seed,
            stations: stations.iter().map(|s| s.id.clone()).collect(),
            correlation,
            marginals,
        },
        stations,
        monthly,
        hourly,
    })
}

/// Hourly series whose shape depends on the station kind, scaled to each
/// month's value and clipped to [0, 1].
fn shape_hourly(monthly: &HistoricalPanel, rng: &mut ChaCha8Rng) -> Result<HistoricalPanel> {
    let n = monthly.n_stations();
    let first = monthly.index()[0];
    let end = crate::data::add_months(*monthly.index().last().expect("non-empty"), 1);
    let hours = (end - first).num_hours() as usize;
    let index: Vec<Timestamp> = (0..hours as i64).map(|h| first + chrono::Duration::hours(h)).collect();
    let mut values = vec![0.0; hours * n];
    let mut start = 0;
    for (t, m) in monthly.index().iter().enumerate() {
        let len = crate::data::hours_in_month(m.year(), m.month());
        for (j, st) in monthly.stations().iter().enumerate() {
            let mut noise = 0.0f64;
            let shape: Vec<f64> = (0..len)
                .map(|h| {
                    let hod = index[start + h].hour() as f64;
                    let e: f64 = StandardNormal.sample(rng);
                    noise = 0.9 * noise + 0.1 * e;
                    let s = match st.kind {
                        StationKind::Wind => 1.0 + 0.3 * ((hod - 3.0) / 24.0 * std::f64::consts::TAU).sin(),
                        _ => ((hod - 6.0) / 12.0 * std::f64::consts::PI).sin().max(0.0),
                    };
                    (s * (1.0 + noise)).max(0.0)
                })
                .collect();
            let mean = shape.iter().sum::<f64>() / len as f64;
            let target = monthly.get(t, j);
            for (h, s) in shape.iter().enumerate() {
                values[(start + h) * n + j] = (target * s / mean).clamp(0.0, 1.0);
            }
        }
        start += len;
    }
    HistoricalPanel::new(monthly.stations().to_vec(), index, values, Resolution::Hourly)
}

/// Generates the fixture and writes `stations.csv`, `monthly.csv`,
/// `inflows.csv`, `hourly.csv` (when hourly), `run.json` and `truth.json`.
pub fn write_fixture(dir: &Path, opts: &FixtureOptions) -> Result<Fixture> {
    let fx = generate(opts)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_metadata(&fx.stations, &dir.join("stations.csv"))?;
    write_observations(&fx.monthly, &dir.join("monthly.csv"))?;
    write_observations(&fx.monthly.select(&fx.hydro_ids())?, &dir.join("inflows.csv"))?;
    if let Some(h) = &fx.hourly {
        write_observations(h, &dir.join("hourly.csv"))?;
    }
    let config = RunConfig {
        paths: Paths {
            data: if fx.hourly.is_some() { "hourly.csv" } else { "monthly.csv" }.into(),
            metadata: "stations.csv".into(),
            inflow_data: fx.hourly.is_some().then(|| "inflows.csv".into()),
            output_dir: "out".into(),
        },
        model: ModelOptions::default(),
        simulation: SimulationOptions {
            seed: opts.seed,
            ..SimulationOptions::default()
        },
        validation: ValidationOptions::default(),
    };
    write_json(&dir.join("run.json"), &config)?;
    write_json(&dir.join("truth.json"), &fx.truth)?;
    Ok(fx)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
