//! Scenario generation: network sampling, back-transformation, inflow AR.

mod inflow;
mod network;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

pub use inflow::{fit_inflow_ar, generate_inflows, generate_inflows_driven, InflowModel, StationInflow};
pub use network::{sample_network, scenario_rng, to_original};

use crate::data::{format_timestamp, parse_timestamp, Resolution, StationMeta, Timestamp, Units};
use crate::error::{Error, Result};

/// Scenario cube `scenario × time × station` in original units
/// (capacity factors for generation, volumes otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub stations: Vec<StationMeta>,
    pub scenario_count: usize,
    pub index: Vec<Timestamp>,
    pub resolution: Resolution,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn zeros(
        stations: Vec<StationMeta>,
        scenario_count: usize,
        index: Vec<Timestamp>,
        resolution: Resolution,
        seed: u64,
    ) -> Self {
        let values = vec![0.0; scenario_count * index.len() * stations.len()];
        Self {
            stations,
            scenario_count,
            index,
            resolution,
            values,
            seed,
        }
    }

    pub fn n_times(&self) -> usize {
        self.index.len()
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    fn offset(&self, s: usize, t: usize, j: usize) -> usize {
        (s * self.index.len() + t) * self.stations.len() + j
    }

    pub fn get(&self, s: usize, t: usize, j: usize) -> f64 {
        self.values[self.offset(s, t, j)]
    }

    pub fn set(&mut self, s: usize, t: usize, j: usize, v: f64) {
        let k = self.offset(s, t, j);
        self.values[k] = v;
    }

    /// Values of one scenario, row-major `time × station`.
    pub fn scenario(&self, s: usize) -> &[f64] {
        let len = self.index.len() * self.stations.len();
        &self.values[s * len..(s + 1) * len]
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    /// All values of one station pooled over scenarios and times.
    pub fn pooled(&self, j: usize) -> Vec<f64> {
        (0..self.scenario_count)
            .flat_map(|s| (0..self.index.len()).map(move |t| (s, t)))
            .map(|(s, t)| self.get(s, t, j))
            .collect()
    }

    /// Stations restricted to `ids`, in the given order.
    pub fn select(&self, ids: &[&str]) -> Result<ScenarioSet> {
        let cols = ids
            .iter()
            .map(|id| {
                self.station_index(id)
                    .ok_or_else(|| Error::Argument(format!("station {id} not in scenario set")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ScenarioSet::zeros(
            cols.iter().map(|&j| self.stations[j].clone()).collect(),
            self.scenario_count,
            self.index.clone(),
            self.resolution,
            self.seed,
        );
        for s in 0..self.scenario_count {
            for t in 0..self.index.len() {
                for (k, &j) in cols.iter().enumerate() {
                    out.set(s, t, k, self.get(s, t, j));
                }
            }
        }
        Ok(out)
    }

    /// Concatenates the station sets of two cubes with identical index and
    /// scenario count.
    pub fn join(&self, other: &ScenarioSet) -> Result<ScenarioSet> {
        if self.index != other.index || self.scenario_count != other.scenario_count {
            return Err(Error::Argument("scenario sets are not aligned".into()));
        }
        let mut stations = self.stations.clone();
        stations.extend(other.stations.iter().cloned());
        let mut out = ScenarioSet::zeros(stations, self.scenario_count, self.index.clone(), self.resolution, self.seed);
        let n = self.n_stations();
        for s in 0..self.scenario_count {
            for t in 0..self.index.len() {
                for j in 0..n {
                    out.set(s, t, j, self.get(s, t, j));
                }
                for j in 0..other.n_stations() {
                    out.set(s, t, n + j, other.get(s, t, j));
                }
            }
        }
        Ok(out)
    }

    /// Long CSV `scenario,timestamp,station_id,value`, scenarios numbered from 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::with_capacity(1 << 20, file);
        self.write_rows(&mut w, true).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub(crate) fn write_rows<W: Write>(&self, w: &mut W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "scenario,timestamp,station_id,value")?;
        }
        let stamps: Vec<String> = self.index.iter().map(format_timestamp).collect();
        for s in 0..self.scenario_count {
            for (t, stamp) in stamps.iter().enumerate() {
                for (j, st) in self.stations.iter().enumerate() {
                    writeln!(w, "{},{},{},{}", s + 1, stamp, st.id, self.get(s, t, j))?;
                }
            }
        }
        Ok(())
    }

    /// Reads a scenario CSV. Stations are matched against `meta`; every
    /// `(scenario, timestamp, station)` cell present must be unique and the
    /// cube must be complete.
    pub fn read_csv(path: &Path, meta: &[StationMeta], resolution: Resolution) -> Result<ScenarioSet> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let parse = |line: u64, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| parse(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["scenario", "timestamp", "station_id", "value"] {
            return Err(parse(1, "expected header `scenario,timestamp,station_id,value`".into()));
        }
        let meta_pos: HashMap<&str, usize> = meta.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        let mut cells = Vec::new();
        let mut used = vec![false; meta.len()];
        let mut max_scenario = 0usize;
        let mut rec = csv::StringRecord::new();
        while rdr
            .read_record(&mut rec)
            .map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?
        {
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 4 {
                return Err(parse(line, format!("expected 4 fields, got {}", rec.len())));
            }
            let s: usize = rec[0]
                .parse()
                .ok()
                .filter(|&s| s >= 1)
                .ok_or_else(|| parse(line, format!("invalid scenario `{}`", &rec[0])))?;
            let ts = parse_timestamp(&rec[1]).map_err(|m| parse(line, m))?;
            let j = *meta_pos
                .get(&rec[2])
                .ok_or_else(|| parse(line, format!("unknown station `{}`", &rec[2])))?;
            let v: f64 = rec[3]
                .parse()
                .map_err(|e| parse(line, format!("value `{}`: {e}", &rec[3])))?;
            used[j] = true;
            max_scenario = max_scenario.max(s);
            cells.push((s - 1, ts, j, v));
        }
        if cells.is_empty() {
            return Err(Error::Data(format!("{}: no scenario rows", path.display())));
        }
        let stations: Vec<StationMeta> = meta.iter().zip(&used).filter(|(_, &u)| u).map(|(m, _)| m.clone()).collect();
        let col: HashMap<usize, usize> = used
            .iter()
            .enumerate()
            .filter(|(_, &u)| u)
            .enumerate()
            .map(|(k, (j, _))| (j, k))
            .collect();
        let mut index: Vec<Timestamp> = cells.iter().map(|c| c.1).collect();
        index.sort_unstable();
        index.dedup();
        let tpos: HashMap<Timestamp, usize> = index.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut out = ScenarioSet::zeros(stations, max_scenario, index, resolution, 0);
        out.values.fill(f64::NAN);
        for (s, ts, j, v) in cells {
            let k = out.offset(s, tpos[&ts], col[&j]);
            if !out.values[k].is_nan() {
                return Err(Error::Duplicate {
                    station: meta[j].id.clone(),
                    timestamp: format!("{} (scenario {})", format_timestamp(&ts), s + 1),
                });
            }
            out.values[k] = v;
        }
        if out.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Data(format!(
                "{}: scenario cube is incomplete",
                path.display()
            )));
        }
        for (j, st) in out.stations.iter().enumerate() {
            for s in 0..out.scenario_count {
                for t in 0..out.index.len() {
                    let v = out.get(s, t, j);
                    let ok = match st.units() {
                        Units::CapacityFactor => (0.0..=1.0).contains(&v),
                        Units::Volume => v >= 0.0 && v.is_finite(),
                    };
                    if !ok {
                        return Err(Error::Range {
                            station: st.id.clone(),
                            timestamp: format_timestamp(&out.index[t]),
                            value: v,
                            reason: "scenario value outside the station's range",
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}
