//! Marginal-to-normal mapping: `z = Φ⁻¹(F(x))` and back, `x = F⁻¹(Φ(z))`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::{HistoricalPanel, Resolution, StationMeta, Timestamp};
use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::normal;

/// Per-station marginals keyed by station id.
pub type Marginals = BTreeMap<String, MarginalModel>;

/// Normal scores of a panel, same shape and missing-value layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalPanel {
    pub stations: Vec<StationMeta>,
    pub index: Vec<Timestamp>,
    pub resolution: Resolution,
    /// Row-major `time × station`; NaN where the source was unobserved.
    pub z_values: Vec<f64>,
}

impl NormalPanel {
    pub fn new(
        stations: Vec<StationMeta>,
        index: Vec<Timestamp>,
        resolution: Resolution,
        z_values: Vec<f64>,
    ) -> Result<Self> {
        if z_values.len() != stations.len() * index.len() {
            return Err(Error::Argument(format!(
                "normal panel has {} cells, expected {} × {}",
                z_values.len(),
                index.len(),
                stations.len()
            )));
        }
        Ok(Self {
            stations,
            index,
            resolution,
            z_values,
        })
    }

    pub fn n_times(&self) -> usize {
        self.index.len()
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.z_values[t * self.stations.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_times()).map(|t| self.get(t, j)).collect()
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }
}

fn lookup<'a>(marginals: &'a Marginals, id: &str) -> Result<&'a MarginalModel> {
    marginals
        .get(id)
        .ok_or_else(|| Error::Config(format!("no marginal model for station {id}")))
}

/// `Φ⁻¹` of the clamped marginal CDF; finite for every input.
pub fn to_normal(model: &MarginalModel, x: f64) -> f64 {
    normal::quantile(model.cdf(x))
}

pub fn from_normal(model: &MarginalModel, z: f64) -> f64 {
    model.quantile(normal::cdf(z))
}

pub fn forward(panel: &HistoricalPanel, marginals: &Marginals) -> Result<NormalPanel> {
    let models = panel
        .stations()
        .iter()
        .map(|s| lookup(marginals, &s.id))
        .collect::<Result<Vec<_>>>()?;
    let n = panel.n_stations();
    let z_values = panel
        .values()
        .par_iter()
        .enumerate()
        .map(|(k, &x)| if x.is_nan() { f64::NAN } else { to_normal(models[k % n], x) })
        .collect();
    NormalPanel::new(
        panel.stations().to_vec(),
        panel.index().to_vec(),
        panel.resolution(),
        z_values,
    )
}

pub fn inverse(z_panel: &NormalPanel, marginals: &Marginals) -> Result<HistoricalPanel> {
    let models = z_panel
        .stations
        .iter()
        .map(|s| lookup(marginals, &s.id))
        .collect::<Result<Vec<_>>>()?;
    let n = z_panel.n_stations();
    let values = z_panel
        .z_values
        .par_iter()
        .enumerate()
        .map(|(k, &z)| if z.is_nan() { f64::NAN } else { from_normal(models[k % n], z) })
        .collect();
    HistoricalPanel::new(
        z_panel.stations.clone(),
        z_panel.index.clone(),
        values,
        z_panel.resolution,
    )
}
