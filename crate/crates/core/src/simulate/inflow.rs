use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::scenario_rng;
use super::ScenarioSet;
use crate::data::{HistoricalPanel, Resolution, StationMeta, Timestamp, Units};
use crate::error::{Error, Result};
use crate::transform::NormalPanel;

use chrono::Datelike;

const MIN_MONTH_OBS: usize = 2;
const MAX_PHI_SUM: f64 = 0.99;
const BURN_IN: usize = 120;
/// Stream offset keeping inflow burn-in draws apart from network draws.
const INFLOW_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationInflow {
    pub station: StationMeta,
    /// Mean of `ln q` per calendar month, January first.
    pub log_mean: [f64; 12],
    /// Standard deviation of `ln q` per calendar month.
    pub log_std: [f64; 12],
    /// AR coefficients on the month-standardized log series.
    pub phi: Vec<f64>,
    pub innovation_std: f64,
    /// Value substituted for zero observations.
    pub zero_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflowModel {
    pub order: usize,
    pub stations: Vec<StationInflow>,
}

impl InflowModel {
    pub fn station_ids(&self) -> Vec<&str> {
        self.stations.iter().map(|s| s.station.id.as_str()).collect()
    }
}

fn month0(t: &Timestamp) -> usize {
    t.month0() as usize
}

/// Fits a periodic log-normal AR(`order`) model to every station of a
/// monthly volume panel.
pub fn fit_inflow_ar(panel: &HistoricalPanel, order: usize) -> Result<InflowModel> {
    if panel.resolution() != Resolution::Monthly {
        return Err(Error::Argument("inflow model needs a monthly panel".into()));
    }
    let stations = (0..panel.n_stations())
        .map(|j| {
            let meta = &panel.stations()[j];
            if meta.units() != Units::Volume {
                return Err(Error::Argument(format!("station {} is not a volume series", meta.id)));
            }
            fit_station(panel, j, order).map_err(|e| e.for_station(&meta.id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InflowModel { order, stations })
}

fn fit_station(panel: &HistoricalPanel, j: usize, order: usize) -> Result<StationInflow> {
    let meta = panel.stations()[j].clone();
    let col = panel.column(j);
    let min_pos = col
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Err(Error::Data(format!("station {} has no positive inflow", meta.id)));
    }
    let zero_floor = 0.5 * min_pos;
    let logs: Vec<f64> = col
        .iter()
        .map(|&v| {
            if v.is_nan() {
                f64::NAN
            } else if v == 0.0 {
                zero_floor.ln()
            } else {
                v.ln()
            }
        })
        .collect();
    if logs.iter().any(|v| !v.is_nan() && !v.is_finite()) {
        return Err(Error::Data(format!("station {} has non-positive inflow", meta.id)));
    }

    let mut log_mean = [0.0; 12];
    let mut log_std = [0.0; 12];
    for m in 0..12 {
        let xs: Vec<f64> = logs
            .iter()
            .zip(panel.index())
            .filter(|(v, t)| !v.is_nan() && month0(t) == m)
            .map(|(v, _)| *v)
            .collect();
        if xs.len() < MIN_MONTH_OBS {
            return Err(Error::InsufficientData {
                what: "observations per calendar month",
                needed: MIN_MONTH_OBS,
                got: xs.len(),
                station: Some(meta.id.clone()),
            });
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        log_mean[m] = mean;
        log_std[m] = var.sqrt().max(1e-12);
    }

    let u: Vec<f64> = logs
        .iter()
        .zip(panel.index())
        .map(|(v, t)| (v - log_mean[month0(t)]) / log_std[month0(t)])
        .collect();
    let rows: Vec<usize> = (order..u.len())
        .filter(|&t| (t - order..=t).all(|k| !u[k].is_nan()))
        .collect();
    let needed = order + 2;
    if rows.len() < needed {
        return Err(Error::InsufficientData {
            what: "consecutive observations for the AR fit",
            needed,
            got: rows.len(),
            station: Some(meta.id.clone()),
        });
    }

    let mut phi = if order == 0 {
        Vec::new()
    } else {
        let x = DMatrix::from_fn(rows.len(), order, |r, k| u[rows[r] - k - 1]);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&t| u[t]));
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * y;
        let sol = xtx
            .cholesky()
            .ok_or_else(|| Error::Data(format!("station {}: singular AR design", meta.id)))?
            .solve(&xty);
        sol.iter().copied().collect()
    };
    let abs_sum: f64 = phi.iter().map(|p: &f64| p.abs()).sum();
    if abs_sum >= MAX_PHI_SUM {
        let scale = MAX_PHI_SUM / abs_sum;
        phi.iter_mut().for_each(|p| *p *= scale);
    }
    let rss: f64 = rows
        .iter()
        .map(|&t| {
            let fit: f64 = phi.iter().enumerate().map(|(k, p)| p * u[t - k - 1]).sum();
            (u[t] - fit).powi(2)
        })
        .sum();
    let innovation_std = (rss / rows.len() as f64).sqrt().max(1e-12);
    Ok(StationInflow {
        station: meta,
        log_mean,
        log_std,
        phi,
        innovation_std,
        zero_floor,
    })
}

/// Iid Gaussian innovations.
pub fn generate_inflows(model: &InflowModel, n: usize, horizon: &[Timestamp], seed: u64) -> Result<ScenarioSet> {
    run(model, n, horizon, seed, |_, _, _, rng| StandardNormal.sample(rng))
}

/// Innovations taken from the normal scores of `drivers` (one panel per
/// scenario, matched by station id), so cross-station dependence of the
/// innovations carries over to the inflows.
pub fn generate_inflows_driven(
    model: &InflowModel,
    horizon: &[Timestamp],
    drivers: &[NormalPanel],
    seed: u64,
) -> Result<ScenarioSet> {
    let cols = model
        .stations
        .iter()
        .map(|st| {
            let id = &st.station.id;
            drivers
                .first()
                .and_then(|d| d.station_index(id))
                .ok_or_else(|| Error::EvidenceCoverage(format!("driver scores for station {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if drivers.iter().any(|d| d.index != horizon || d.stations != drivers[0].stations) {
        return Err(Error::Argument("driver panels do not match the horizon".into()));
    }
    run(model, drivers.len(), horizon, seed, |s, t, j, _| drivers[s].get(t, cols[j]))
}

fn run<F>(model: &InflowModel, n: usize, horizon: &[Timestamp], seed: u64, innovation: F) -> Result<ScenarioSet>
where
    F: Fn(usize, usize, usize, &mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    if horizon.is_empty() {
        return Err(Error::Argument("empty horizon".into()));
    }
    if n == 0 {
        return Err(Error::Argument("n_scenarios must be at least 1".into()));
    }
    let ns = model.stations.len();
    let nt = horizon.len();
    let blocks: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut rng = scenario_rng(seed, INFLOW_STREAM + s as u64);
            let mut block = vec![0.0; nt * ns];
            for (j, st) in model.stations.iter().enumerate() {
                let p = st.phi.len();
                let mut hist = vec![0.0; p];
                let step = |e: f64, hist: &mut Vec<f64>| {
                    let mean: f64 = st.phi.iter().zip(hist.iter()).map(|(a, b)| a * b).sum();
                    let u = mean + st.innovation_std * e;
                    if p > 0 {
                        hist.rotate_right(1);
                        hist[0] = u;
                    }
                    u
                };
                for _ in 0..BURN_IN * usize::from(p > 0) {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    step(e, &mut hist);
                }
                for (t, ts) in horizon.iter().enumerate() {
                    let e = innovation(s, t, j, &mut rng);
                    let u = step(e, &mut hist);
                    let m = month0(ts);
                    block[t * ns + j] = (st.log_mean[m] + st.log_std[m] * u).exp();
                }
            }
            block
        })
        .collect();
    let mut out = ScenarioSet::zeros(
        model.stations.iter().map(|s| s.station.clone()).collect(),
        n,
        horizon.to_vec(),
        Resolution::Monthly,
        seed,
    );
    for (s, block) in blocks.into_iter().enumerate() {
        let len = block.len();
        out.values[s * len..(s + 1) * len].copy_from_slice(&block);
    }
    Ok(out)
}
