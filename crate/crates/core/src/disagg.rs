//! Monthly-to-hourly disaggregation with PCA-matched historical profiles.
//!
//! For each calendar month the station-wise monthly capacity factors of the
//! historical years are centred and decomposed. A generated month is projected
//! the same way, the nearest historical year in component space is picked,
//! and that year's hourly profiles are rescaled to the generated monthly
//! capacity factors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::Datelike;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    aggregate_to_monthly, format_month, hours_in_month, month_start, HistoricalPanel, Resolution, StationMeta,
    Timestamp, Units,
};
use crate::error::{Error, Result};
use crate::simulate::ScenarioSet;

pub const MIN_YEARS: usize = 3;
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;
/// Below this historical capacity factor a flat profile is emitted.
pub const FLAT_PROFILE_CF: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthDecomposition {
    /// Calendar month, 1-12.
    pub month: u32,
    /// Column means removed before projection, one per station.
    pub mean: Vec<f64>,
    /// Retained loadings, one orthonormal vector over stations per component.
    pub loadings: Vec<Vec<f64>>,
    /// Eigenvalues of the retained components, descending.
    pub explained: Vec<f64>,
    pub total_variance: f64,
    /// Historical years with complete data for this month, ascending.
    pub years: Vec<i32>,
    /// Projection of each year, aligned with `years`.
    pub projections: Vec<Vec<f64>>,
    /// Monthly capacity factor per year and station.
    pub monthly_cf: Vec<Vec<f64>>,
}

impl MonthDecomposition {
    pub fn components(&self) -> usize {
        self.loadings.len()
    }

    pub fn explained_fraction(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.explained.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.loadings
            .iter()
            .map(|w| w.iter().zip(x).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect()
    }

    /// Index into `years` of the nearest projection; earliest year on ties.
    pub fn nearest(&self, projected: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (k, p) in self.projections.iter().enumerate() {
            let d: f64 = p.iter().zip(projected).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisaggModel {
    pub stations: Vec<StationMeta>,
    pub variance_threshold: f64,
    /// January to December.
    pub months: Vec<MonthDecomposition>,
}

impl DisaggModel {
    pub fn month(&self, month: u32) -> &MonthDecomposition {
        &self.months[month as usize - 1]
    }

    pub fn station_ids(&self) -> Vec<&str> {
        self.stations.iter().map(|s| s.id.as_str()).collect()
    }
}

/// Fits the decomposition from an hourly panel of capacity-factor stations.
pub fn fit_disagg(hourly: &HistoricalPanel, variance_threshold: f64) -> Result<DisaggModel> {
    if hourly.resolution() != Resolution::Hourly {
        return Err(Error::Argument("disaggregation needs an hourly panel".into()));
    }
    fit_disagg_monthly(&aggregate_to_monthly(hourly)?, variance_threshold)
}

/// Fits the decomposition from monthly capacity factors.
pub fn fit_disagg_monthly(monthly: &HistoricalPanel, variance_threshold: f64) -> Result<DisaggModel> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::Argument(format!(
            "variance threshold {variance_threshold} outside (0, 1]"
        )));
    }
    if let Some(s) = monthly.stations().iter().find(|s| s.units() != Units::CapacityFactor) {
        return Err(Error::Argument(format!("station {} is not a capacity-factor series", s.id)));
    }
    let n = monthly.n_stations();
    if n == 0 {
        return Err(Error::Argument("no stations to disaggregate".into()));
    }
    let months = (1..=12)
        .map(|m| {
            let rows: Vec<(i32, &[f64])> = monthly
                .index()
                .iter()
                .enumerate()
                .filter(|(_, t)| t.month() == m)
                .map(|(k, t)| (t.year(), monthly.row(k)))
                .filter(|(_, r)| r.iter().all(|v| !v.is_nan()))
                .collect();
            if rows.len() < MIN_YEARS {
                return Err(Error::InsufficientData {
                    what: "complete historical years per calendar month",
                    needed: MIN_YEARS,
                    got: rows.len(),
                    station: None,
                });
            }
            Ok(decompose(m, &rows, n, variance_threshold))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DisaggModel {
        stations: monthly.stations().to_vec(),
        variance_threshold,
        months,
    })
}

fn decompose(month: u32, rows: &[(i32, &[f64])], n: usize, threshold: f64) -> MonthDecomposition {
    let y = rows.len();
    let mean: Vec<f64> = (0..n)
        .map(|j| rows.iter().map(|(_, r)| r[j]).sum::<f64>() / y as f64)
        .collect();
    let x = DMatrix::from_fn(y, n, |i, j| rows[i].1[j] - mean[j]);
    let cov = (x.transpose() * &x) / (y - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = values.iter().sum();

    let keep = if total > 0.0 {
        let mut acc = 0.0;
        let mut k = 0;
        while k < n {
            acc += values[k];
            k += 1;
            if acc >= threshold * total * (1.0 - 1e-12) {
                break;
            }
        }
        k
    } else {
        1
    };
    let loadings: Vec<Vec<f64>> = order[..keep]
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, a)| if a.abs() > v[best].abs() { i } else { best });
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            v
        })
        .collect();
    let mut dec = MonthDecomposition {
        month,
        mean,
        loadings,
        explained: values[..keep].to_vec(),
        total_variance: total,
        years: rows.iter().map(|(yr, _)| *yr).collect(),
        projections: Vec::new(),
        monthly_cf: rows.iter().map(|(_, r)| r.to_vec()).collect(),
    };
    dec.projections = rows.iter().map(|(_, r)| dec.project(r)).collect();
    dec
}

/// Historical hourly profiles per `(year, month)`, row-major `hour × station`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileLibrary {
    pub stations: Vec<StationMeta>,
    profiles: BTreeMap<(i32, u32), Vec<f64>>,
}

impl ProfileLibrary {
    /// Collects every fully observed calendar month of `hourly` for the given
    /// stations.
    pub fn from_panel(hourly: &HistoricalPanel, stations: &[&str]) -> Result<Self> {
        if hourly.resolution() != Resolution::Hourly {
            return Err(Error::Argument("profile library needs an hourly panel".into()));
        }
        let panel = hourly.select(stations)?;
        let n = panel.n_stations();
        let mut starts: BTreeMap<(i32, u32), (usize, usize)> = BTreeMap::new();
        for (t, ts) in panel.index().iter().enumerate() {
            starts.entry((ts.year(), ts.month())).or_insert((t, 0)).1 += 1;
        }
        let mut profiles = BTreeMap::new();
        for ((y, m), (first, count)) in starts {
            if count != hours_in_month(y, m) {
                continue;
            }
            let block = &panel.values()[first * n..(first + count) * n];
            if block.iter().all(|v| !v.is_nan()) {
                profiles.insert((y, m), block.to_vec());
            }
        }
        Ok(Self {
            stations: panel.stations().to_vec(),
            profiles,
        })
    }

    pub fn get(&self, year: i32, month: u32) -> Option<&[f64]> {
        self.profiles.get(&(year, month)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    /// Zero-based scenario index.
    pub scenario: usize,
    pub month: Timestamp,
    pub selected_year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub scenario: usize,
    pub month: Timestamp,
    pub station: String,
    /// `(hourly mean - monthly value) / monthly value`; 0 without clipping.
    pub deviation: f64,
    pub clipped_hours: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disaggregated {
    pub hourly: ScenarioSet,
    pub provenance: Vec<Provenance>,
    pub clipping: Vec<ClipRecord>,
}

/// Length-matches a historical profile to `hours`: surplus hours are dropped,
/// missing ones repeat the profile's last day.
fn matched_profile(profile: &[f64], n: usize, hours: usize) -> Vec<f64> {
    let have = profile.len() / n;
    if have >= hours {
        return profile[..hours * n].to_vec();
    }
    let mut out = profile.to_vec();
    let day = 24.min(have);
    let last_day = &profile[(have - day) * n..];
    while out.len() < hours * n {
        let need = hours * n - out.len();
        out.extend_from_slice(&last_day[..need.min(last_day.len())]);
    }
    out
}

/// Disaggregates the model's stations of `monthly` to hourly resolution.
/// Stations of `monthly` not in the model are ignored.
pub fn disaggregate(monthly: &ScenarioSet, model: &DisaggModel, library: &ProfileLibrary) -> Result<Disaggregated> {
    let ids = model.station_ids();
    let sub = monthly.select(&ids)?;
    if library.stations.iter().map(|s| s.id.as_str()).ne(ids.iter().copied()) {
        return Err(Error::Argument("profile library stations differ from the model".into()));
    }
    let n = ids.len();
    let month_hours: Vec<usize> = sub
        .index
        .iter()
        .map(|t| hours_in_month(t.year(), t.month()))
        .collect();
    let offsets: Vec<usize> = month_hours
        .iter()
        .scan(0, |acc, h| {
            let o = *acc;
            *acc += h;
            Some(o)
        })
        .collect();
    let total_hours: usize = month_hours.iter().sum();
    let mut index = Vec::with_capacity(total_hours);
    for (t, m) in sub.index.iter().enumerate() {
        let start = month_start(m.year(), m.month());
        index.extend((0..month_hours[t] as i64).map(|h| start + chrono::Duration::hours(h)));
    }

    type Block = (Vec<f64>, Vec<Provenance>, Vec<ClipRecord>);
    let blocks = (0..sub.scenario_count)
        .into_par_iter()
        .map(|s| -> Result<Block> {
            let mut values = vec![0.0; total_hours * n];
            let mut prov = Vec::with_capacity(sub.n_times());
            let mut clips = Vec::with_capacity(sub.n_times() * n);
            for (t, ts) in sub.index.iter().enumerate() {
                let dec = model.month(ts.month());
                let x = &sub.scenario(s)[t * n..(t + 1) * n];
                let k = dec.nearest(&dec.project(x));
                let year = dec.years[k];
                let profile = library.get(year, ts.month()).ok_or_else(|| {
                    Error::Data(format!("no hourly profile for {year}-{:02}", ts.month()))
                })?;
                let hours = month_hours[t];
                let profile = matched_profile(profile, n, hours);
                prov.push(Provenance {
                    scenario: s,
                    month: *ts,
                    selected_year: year,
                });
                for (j, st) in ids.iter().enumerate() {
                    let target = x[j];
                    let hist = (0..hours).map(|h| profile[h * n + j]).sum::<f64>() / hours as f64;
                    let mut clipped = 0;
                    let mut sum = 0.0;
                    for h in 0..hours {
                        let v = if hist < FLAT_PROFILE_CF {
                            target
                        } else {
                            let raw = profile[h * n + j] * (target / hist);
                            if !(0.0..=1.0).contains(&raw) {
                                clipped += 1;
                            }
                            raw.clamp(0.0, 1.0)
                        };
                        sum += v;
                        values[(offsets[t] + h) * n + j] = v;
                    }
                    let deviation = if clipped == 0 {
                        0.0
                    } else if target > 0.0 {
                        (sum / hours as f64 - target) / target
                    } else {
                        sum / hours as f64
                    };
                    clips.push(ClipRecord {
                        scenario: s,
                        month: *ts,
                        station: (*st).to_string(),
                        deviation,
                        clipped_hours: clipped,
                    });
                }
            }
            Ok((values, prov, clips))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut hourly = ScenarioSet::zeros(model.stations.clone(), sub.scenario_count, index, Resolution::Hourly, monthly.seed);
    let mut provenance = Vec::new();
    let mut clipping = Vec::new();
    let len = total_hours * n;
    for (s, (values, prov, clips)) in blocks.into_iter().enumerate() {
        hourly.values[s * len..(s + 1) * len].copy_from_slice(&values);
        provenance.extend(prov);
        clipping.extend(clips);
    }
    Ok(Disaggregated {
        hourly,
        provenance,
        clipping,
    })
}

impl Disaggregated {
    /// `scenario,month,selected_year`, scenarios numbered from 1.
    pub fn write_provenance(&self, path: &Path) -> Result<()> {
        write_lines(path, "scenario,month,selected_year", self.provenance.iter().map(|p| {
            format!("{},{},{}", p.scenario + 1, format_month(&p.month), p.selected_year)
        }))
    }

    /// `scenario,month,station_id,clipped_hours,mean_deviation`.
    pub fn write_clipping(&self, path: &Path) -> Result<()> {
        write_lines(
            path,
            "scenario,month,station_id,clipped_hours,mean_deviation",
            self.clipping.iter().map(|c| {
                format!(
                    "{},{},{},{},{}",
                    c.scenario + 1,
                    format_month(&c.month),
                    c.station,
                    c.clipped_hours,
                    c.deviation
                )
            }),
        )
    }
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let go = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for l in lines {
            writeln!(w, "{l}")?;
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))
}
