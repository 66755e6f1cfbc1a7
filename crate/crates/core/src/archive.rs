//! Single-file JSON container for a fitted model.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bnet::BayesNet;
use crate::config::ModelOptions;
use crate::data::{StationMeta, Timestamp};
use crate::disagg::DisaggModel;
use crate::error::{Error, Result};
use crate::simulate::InflowModel;

pub const SCHEMA_VERSION: u32 = 1;
pub const CRATE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArchive {
    pub schema_version: u32,
    pub crate_version: String,
    /// Every modelled station, in data order.
    pub stations: Vec<StationMeta>,
    pub network: BayesNet,
    /// Stations with a constant history, emitted unchanged.
    pub constants: BTreeMap<String, f64>,
    pub inflow: Option<InflowModel>,
    pub disagg: Option<DisaggModel>,
    /// Last month of the fitting history.
    pub history_end: Timestamp,
    pub options: ModelOptions,
    pub seed: u64,
}

impl ModelArchive {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Archive(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: u32,
        }
        let v: Version = serde_json::from_str(s).map_err(|e| Error::Archive(format!("not a model archive: {e}")))?;
        if v.schema_version != SCHEMA_VERSION {
            return Err(Error::Archive(format!(
                "schema version {} not supported (expected {SCHEMA_VERSION})",
                v.schema_version
            )));
        }
        let a: ModelArchive = serde_json::from_str(s).map_err(|e| Error::Archive(e.to_string()))?;
        a.check()?;
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = self.to_json()?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    fn check(&self) -> Result<()> {
        self.network.validate()?;
        for st in &self.network.stations {
            if !self.network.marginals.contains_key(&st.id) {
                return Err(Error::Archive(format!("no marginal for station {}", st.id)));
            }
        }
        let known = |id: &str| self.stations.iter().any(|s| s.id == id);
        let modelled = self
            .network
            .stations
            .iter()
            .map(|s| s.id.as_str())
            .chain(self.constants.keys().map(String::as_str));
        for id in modelled {
            if !known(id) {
                return Err(Error::Archive(format!("station {id} missing from the station list")));
            }
        }
        if self.network.stations.len() + self.constants.len() != self.stations.len() {
            return Err(Error::Archive("station list does not match network and constants".into()));
        }
        Ok(())
    }
}
