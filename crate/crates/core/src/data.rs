//! Historical panels: station metadata, CSV ingestion and monthly aggregation.
//!
//! A panel is a dense `time × station` matrix over a uniform calendar index.
//! Stations may start and end at different times; unobserved cells are NaN,
//! and each station's observed cells must form one contiguous run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = NaiveDateTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationKind {
    Hydro,
    Wind,
    Csp,
    Dgsp,
    SmallHydro,
    Other,
}

impl StationKind {
    /// Generation kinds are normalized to capacity factors at ingestion.
    pub fn is_generation(self) -> bool {
        matches!(
            self,
            StationKind::Wind | StationKind::Csp | StationKind::Dgsp | StationKind::SmallHydro
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StationKind::Hydro => "hydro",
            StationKind::Wind => "wind",
            StationKind::Csp => "csp",
            StationKind::Dgsp => "dgsp",
            StationKind::SmallHydro => "small_hydro",
            StationKind::Other => "other",
        }
    }
}

impl FromStr for StationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "hydro" => StationKind::Hydro,
            "wind" => StationKind::Wind,
            "csp" => StationKind::Csp,
            "dgsp" => StationKind::Dgsp,
            "small_hydro" => StationKind::SmallHydro,
            "other" => StationKind::Other,
            other => return Err(format!("unknown station kind `{other}`")),
        })
    }
}

impl fmt::Display for StationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    CapacityFactor,
    Volume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Hourly,
    Monthly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub id: String,
    pub kind: StationKind,
    /// Installed capacity in MW; generation values are divided by it.
    pub capacity: f64,
    pub is_evidence: bool,
}

impl StationMeta {
    pub fn new(id: impl Into<String>, kind: StationKind, capacity: f64, is_evidence: bool) -> Self {
        Self {
            id: id.into(),
            kind,
            capacity,
            is_evidence,
        }
    }

    pub fn units(&self) -> Units {
        if self.kind.is_generation() {
            Units::CapacityFactor
        } else {
            Units::Volume
        }
    }

    fn check(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Data("empty station id".into()));
        }
        if self.kind.is_generation() && !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::Data(format!(
                "station {} is a generation kind and needs capacity_mw > 0",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalPanel {
    stations: Vec<StationMeta>,
    index: Vec<Timestamp>,
    /// Row-major `index.len() × stations.len()`; NaN marks "not observed".
    values: Vec<f64>,
    resolution: Resolution,
}

impl HistoricalPanel {
    /// Builds a panel from normalized values (capacity factors / volumes),
    /// checking every invariant.
    pub fn new(
        stations: Vec<StationMeta>,
        index: Vec<Timestamp>,
        values: Vec<f64>,
        resolution: Resolution,
    ) -> Result<Self> {
        if values.len() != index.len() * stations.len() {
            return Err(Error::Argument(format!(
                "value matrix has {} cells, expected {} × {}",
                values.len(),
                index.len(),
                stations.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &stations {
            s.check()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Duplicate {
                    station: s.id.clone(),
                    timestamp: "<metadata>".into(),
                });
            }
        }
        check_index(&index, resolution)?;
        let panel = Self {
            stations,
            index,
            values,
            resolution,
        };
        panel.check_values()?;
        Ok(panel)
    }

    fn check_values(&self) -> Result<()> {
        for (j, s) in self.stations.iter().enumerate() {
            let mut state = 0u8; // 0 before coverage, 1 inside, 2 after
            for (t, ts) in self.index.iter().enumerate() {
                let v = self.values[t * self.stations.len() + j];
                if v.is_nan() {
                    if state == 1 {
                        state = 2;
                    }
                    continue;
                }
                if state == 2 {
                    // observed again after a gap: report the first missing stamp
                    let gap = (0..t)
                        .rev()
                        .take_while(|&k| self.values[k * self.stations.len() + j].is_nan())
                        .last()
                        .unwrap_or(t);
                    return Err(Error::Gap {
                        station: s.id.clone(),
                        timestamp: format_timestamp(&self.index[gap]),
                    });
                }
                state = 1;
                check_range(s, ts, v)?;
            }
        }
        Ok(())
    }

    pub fn stations(&self) -> &[StationMeta] {
        &self.stations
    }

    pub fn index(&self) -> &[Timestamp] {
        &self.index
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn n_times(&self) -> usize {
        self.index.len()
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.values[t * self.stations.len() + j]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.stations.len();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Full column including NaN for unobserved rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.index.len()).map(|t| self.get(t, j)).collect()
    }

    /// Observed values of one station, in time order.
    pub fn observed(&self, j: usize) -> Vec<f64> {
        self.column(j).into_iter().filter(|v| !v.is_nan()).collect()
    }

    /// Panel restricted to the given station ids (in the given order).
    pub fn select(&self, ids: &[&str]) -> Result<HistoricalPanel> {
        let cols = ids
            .iter()
            .map(|id| {
                self.station_index(id)
                    .ok_or_else(|| Error::Argument(format!("station {id} not in panel")))
            })
            .collect::<Result<Vec<_>>>()?;
        let stations = cols.iter().map(|&j| self.stations[j].clone()).collect();
        let mut values = Vec::with_capacity(self.index.len() * cols.len());
        for t in 0..self.index.len() {
            values.extend(cols.iter().map(|&j| self.get(t, j)));
        }
        Ok(HistoricalPanel {
            stations,
            index: self.index.clone(),
            values,
            resolution: self.resolution,
        })
    }

    /// Joins two panels of the same resolution over the union of their
    /// calendar indices. Station ids must be disjoint.
    pub fn merge(&self, other: &HistoricalPanel) -> Result<HistoricalPanel> {
        if self.resolution != other.resolution {
            return Err(Error::Argument(
                "cannot merge panels of different resolution".into(),
            ));
        }
        let mut stations = self.stations.clone();
        stations.extend(other.stations.iter().cloned());
        let mut index: Vec<Timestamp> = self.index.iter().chain(&other.index).copied().collect();
        index.sort();
        index.dedup();
        let pos: HashMap<Timestamp, usize> =
            index.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let n = stations.len();
        let mut values = vec![f64::NAN; index.len() * n];
        for (src, offset) in [(self, 0), (other, self.stations.len())] {
            for (t, ts) in src.index.iter().enumerate() {
                let row = pos[ts];
                for j in 0..src.n_stations() {
                    values[row * n + offset + j] = src.get(t, j);
                }
            }
        }
        HistoricalPanel::new(stations, index, values, self.resolution)
    }
}

fn check_range(s: &StationMeta, ts: &Timestamp, v: f64) -> Result<()> {
    let bad = |reason| Error::Range {
        station: s.id.clone(),
        timestamp: format_timestamp(ts),
        value: v,
        reason,
    };
    if !v.is_finite() {
        return Err(bad("not finite"));
    }
    match s.units() {
        Units::CapacityFactor if !(0.0..=1.0).contains(&v) => {
            Err(bad("capacity factor outside [0, 1]"))
        }
        Units::Volume if v < 0.0 => Err(bad("negative volume")),
        _ => Ok(()),
    }
}

fn check_index(index: &[Timestamp], resolution: Resolution) -> Result<()> {
    for w in index.windows(2) {
        let expected = step(w[0], resolution);
        if w[1] != expected {
            return Err(Error::Index(format!(
                "{} follows {} (expected {})",
                format_timestamp(&w[1]),
                format_timestamp(&w[0]),
                format_timestamp(&expected)
            )));
        }
    }
    if resolution == Resolution::Monthly {
        if let Some(ts) = index.iter().find(|t| !is_month_start(t)) {
            return Err(Error::Index(format!(
                "monthly stamp {} is not the first hour of a month",
                format_timestamp(ts)
            )));
        }
    }
    Ok(())
}

/// Next stamp of the given resolution.
pub fn step(t: Timestamp, resolution: Resolution) -> Timestamp {
    match resolution {
        Resolution::Hourly => t + Duration::hours(1),
        Resolution::Monthly => add_months(t, 1),
    }
}

pub fn add_months(t: Timestamp, months: i32) -> Timestamp {
    let total = t.year() * 12 + t.month0() as i32 + months;
    let (y, m0) = (total.div_euclid(12), total.rem_euclid(12));
    NaiveDate::from_ymd_opt(y, m0 as u32 + 1, 1)
        .expect("valid month")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
}

pub fn month_start(year: i32, month: u32) -> Timestamp {
    NaiveDate::from_ymd_opt(year, month, 1)
        .expect("valid month")
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
}

pub fn is_month_start(t: &Timestamp) -> bool {
    t.day() == 1 && t.hour() == 0 && t.minute() == 0 && t.second() == 0
}

pub fn hours_in_month(year: i32, month: u32) -> usize {
    let start = month_start(year, month);
    let end = add_months(start, 1);
    (end - start).num_hours() as usize
}

/// `n` consecutive month stamps starting at `start`.
pub fn month_range(start: Timestamp, n: usize) -> Vec<Timestamp> {
    (0..n as i32).map(|k| add_months(start, k)).collect()
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn format_month(t: &Timestamp) -> String {
    t.format("%Y-%m").to_string()
}

/// Parses ISO-8601 stamps: RFC 3339 with offset (converted to UTC), naive
/// date-times with `T` or space, plain dates and `YYYY-MM`.
pub fn parse_timestamp(s: &str) -> std::result::Result<Timestamp, String> {
    let s = s.trim();
    if let Ok(t) = s.parse::<NaiveDateTime>() {
        return Ok(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.naive_utc());
    }
    if let Some(stripped) = s.strip_suffix('Z') {
        if let Ok(t) = stripped.parse::<NaiveDateTime>() {
            return Ok(t);
        }
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    if let Ok(d) = s.parse::<NaiveDate>() {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    if let Ok(d) = NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    Err(format!("invalid timestamp `{s}`"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("invalid boolean `{other}`")),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(rdr: &mut csv::Reader<std::fs::File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Reads the metadata CSV (`station_id,kind,capacity_mw,is_evidence`).
pub fn load_metadata(path: &Path) -> Result<Vec<StationMeta>> {
    let mut rdr = open_csv(path)?;
    check_header(&mut rdr, path, &["station_id", "kind", "capacity_mw", "is_evidence"])?;
    let mut out: Vec<StationMeta> = Vec::new();
    for rec in rdr.records() {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let kind = rec[1].parse::<StationKind>().map_err(|m| parse_err(line, m))?;
        let capacity = rec[2]
            .parse::<f64>()
            .map_err(|e| parse_err(line, format!("capacity_mw: {e}")))?;
        let is_evidence = parse_bool(&rec[3]).map_err(|m| parse_err(line, m))?;
        let meta = StationMeta::new(&rec[0], kind, capacity, is_evidence);
        if out.iter().any(|s| s.id == meta.id) {
            return Err(Error::Duplicate {
                station: meta.id,
                timestamp: "<metadata>".into(),
            });
        }
        meta.check()?;
        out.push(meta);
    }
    Ok(out)
}

/// Loads a long-format data CSV (`timestamp,station_id,value`) and its
/// metadata into a validated panel. Generation series are divided by
/// capacity; the resolution is inferred from the calendar index.
pub fn load_panel(path: &Path, meta_path: &Path) -> Result<HistoricalPanel> {
    let meta = load_metadata(meta_path)?;
    load_panel_with_meta(path, &meta)
}

pub fn load_panel_with_meta(path: &Path, meta: &[StationMeta]) -> Result<HistoricalPanel> {
    let meta_pos: HashMap<&str, usize> =
        meta.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut rdr = open_csv(path)?;
    check_header(&mut rdr, path, &["timestamp", "station_id", "value"])?;

    let mut cells: Vec<(Timestamp, usize, f64, u64)> = Vec::new();
    let mut used = vec![false; meta.len()];
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        if rec.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", rec.len())));
        }
        let ts = parse_timestamp(&rec[0]).map_err(parse_err)?;
        let j = *meta_pos
            .get(&rec[1])
            .ok_or_else(|| parse_err(format!("station `{}` not in metadata", &rec[1])))?;
        let raw = rec[2]
            .parse::<f64>()
            .map_err(|e| parse_err(format!("value `{}`: {e}", &rec[2])))?;
        if !raw.is_finite() {
            return Err(parse_err(format!("value `{}` is not finite", &rec[2])));
        }
        used[j] = true;
        cells.push((ts, j, raw, line));
    }
    if cells.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    // panel columns follow metadata order, restricted to stations with data
    let col_of: Vec<Option<usize>> = {
        let mut next = 0;
        used.iter()
            .map(|&u| {
                u.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let stations: Vec<StationMeta> = meta
        .iter()
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|(s, _)| s.clone())
        .collect();

    let mut index: Vec<Timestamp> = cells.iter().map(|c| c.0).collect();
    index.sort_unstable();
    index.dedup();
    let resolution = infer_resolution(&index)?;
    let pos: HashMap<Timestamp, usize> = index.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    let n = stations.len();
    let mut values = vec![f64::NAN; index.len() * n];
    for &(ts, j, raw, _line) in &cells {
        let col = col_of[j].expect("used station");
        let cell = &mut values[pos[&ts] * n + col];
        if !cell.is_nan() {
            return Err(Error::Duplicate {
                station: meta[j].id.clone(),
                timestamp: format_timestamp(&ts),
            });
        }
        *cell = match meta[j].units() {
            Units::CapacityFactor => raw / meta[j].capacity,
            Units::Volume => raw,
        };
    }
    HistoricalPanel::new(stations, index, values, resolution)
}

fn infer_resolution(index: &[Timestamp]) -> Result<Resolution> {
    if index.len() < 2 {
        return Err(Error::Index("need at least two distinct timestamps".into()));
    }
    if index[1] - index[0] == Duration::hours(1) {
        Ok(Resolution::Hourly)
    } else if is_month_start(&index[0]) && index[1] == add_months(index[0], 1) {
        Ok(Resolution::Monthly)
    } else {
        Err(Error::Index(format!(
            "cannot infer hourly or monthly step from {} → {}",
            format_timestamp(&index[0]),
            format_timestamp(&index[1])
        )))
    }
}

/// Writes the panel back in the long CSV format (generation restored to MW)
/// together with its metadata file.
pub fn write_panel(panel: &HistoricalPanel, path: &Path, meta_path: &Path) -> Result<()> {
    write_metadata(panel.stations(), meta_path)?;
    write_observations(panel, path)
}

/// Writes the observation CSV only, converting capacity factors back to MW.
pub fn write_observations(panel: &HistoricalPanel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "timestamp,station_id,value").map_err(io)?;
    for (t, ts) in panel.index().iter().enumerate() {
        let stamp = format_timestamp(ts);
        for (j, s) in panel.stations().iter().enumerate() {
            let v = panel.get(t, j);
            if v.is_nan() {
                continue;
            }
            let raw = match s.units() {
                Units::CapacityFactor => v * s.capacity,
                Units::Volume => v,
            };
            writeln!(w, "{stamp},{},{raw}", s.id).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_metadata(stations: &[StationMeta], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "station_id,kind,capacity_mw,is_evidence").map_err(io)?;
    for s in stations {
        writeln!(w, "{},{},{},{}", s.id, s.kind, s.capacity, s.is_evidence).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Calendar-month means of an hourly panel.
///
/// A station's month is kept only when every hour of the civil month is
/// present in the index and observed for that station; partially covered
/// months become NaN for that station.
pub fn aggregate_to_monthly(panel: &HistoricalPanel) -> Result<HistoricalPanel> {
    if panel.resolution() != Resolution::Hourly {
        return Err(Error::Aggregation("panel is not hourly".into()));
    }
    if panel.n_times() == 0 {
        return Err(Error::Aggregation("empty panel".into()));
    }
    let n = panel.n_stations();
    // (month start) -> (first row, row count)
    let mut months: BTreeMap<Timestamp, (usize, usize)> = BTreeMap::new();
    for (t, ts) in panel.index().iter().enumerate() {
        let key = month_start(ts.year(), ts.month());
        months.entry(key).or_insert((t, 0)).1 += 1;
    }

    let index: Vec<Timestamp> = months.keys().copied().collect();
    let mut values = vec![f64::NAN; index.len() * n];
    let mut any_complete = false;
    for (m, (start, (first, count))) in months.iter().enumerate() {
        if *count == 0 {
            return Err(Error::Aggregation(format!(
                "month {} has zero hours",
                format_month(start)
            )));
        }
        if *count != hours_in_month(start.year(), start.month()) {
            continue;
        }
        for j in 0..n {
            let mut sum = 0.0;
            let mut complete = true;
            for t in *first..*first + *count {
                let v = panel.get(t, j);
                if v.is_nan() {
                    complete = false;
                    break;
                }
                sum += v;
            }
            if complete {
                values[m * n + j] = sum / *count as f64;
                any_complete = true;
            }
        }
    }
    if !any_complete {
        return Err(Error::Aggregation(
            "no station has a complete calendar month".into(),
        ));
    }
    // drop leading/trailing months where no station is observed
    let observed = |m: usize| (0..n).any(|j| !values[m * n + j].is_nan());
    let lo = (0..index.len()).find(|&m| observed(m)).unwrap_or(0);
    let hi = (0..index.len()).rev().find(|&m| observed(m)).unwrap_or(0);
    let index = index[lo..=hi].to_vec();
    let values = values[lo * n..(hi + 1) * n].to_vec();
    HistoricalPanel::new(panel.stations().to_vec(), index, values, Resolution::Monthly)
}
