//! Hourly time series on disk (`timestamp,value` CSV) and in memory.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use crate::config::SystemSpec;
use crate::error::{Error, Result};

/// Named series sharing one time axis.
pub type Bundle = BTreeMap<String, Vec<f64>>;

const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok()).or_else(|| {
        chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0))
    })
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Six decimals, without a sign on values that round to zero.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub start: NaiveDateTime,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::hours(self.values.len() as i64)
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::hours(i as i64)
    }

    pub fn window(&self, start: NaiveDateTime, len: usize) -> Option<&[f64]> {
        let offset = (start - self.start).num_hours();
        if offset < 0 || start != self.start + Duration::hours(offset) {
            return None;
        }
        let offset = offset as usize;
        self.values.get(offset..offset + len)
    }

    pub fn read_csv(path: &Path) -> Result<TimeSeries> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|message| Error::Csv { path: path.to_path_buf(), message })
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> std::result::Result<TimeSeries, String> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut start = None;
        let mut prev: Option<NaiveDateTime> = None;
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
            if rec.len() < 2 {
                return Err(format!("line {line}: expected timestamp,value"));
            }
            let t = parse_timestamp(&rec[0]).ok_or_else(|| format!("line {line}: bad timestamp '{}'", &rec[0]))?;
            let v: f64 = rec[1].parse().map_err(|_| format!("line {line}: bad value '{}'", &rec[1]))?;
            if !v.is_finite() {
                return Err(format!("line {line}: non-finite value"));
            }
            if let Some(p) = prev {
                if t - p != Duration::hours(1) {
                    return Err(format!("line {line}: timestamps must be consecutive hours"));
                }
            }
            start.get_or_insert(t);
            prev = Some(t);
            values.push(v);
        }
        let start = start.ok_or("no data rows")?;
        Ok(TimeSeries { start, values })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_values(path, self.start, &self.values)
    }
}

pub fn write_values(path: &Path, start: NaiveDateTime, values: &[f64]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Csv { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["timestamp", "value"]).map_err(to_err)?;
    for (i, v) in values.iter().enumerate() {
        let t = start + Duration::hours(i as i64);
        w.write_record([format_timestamp(t), format!("{v}")]).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesStore {
    pub series: BTreeMap<String, TimeSeries>,
}

impl SeriesStore {
    /// Loads every series listed in the config's data section.
    pub fn load(spec: &SystemSpec) -> Result<SeriesStore> {
        let dir = spec.data_dir();
        let mut series = BTreeMap::new();
        for (name, file) in &spec.data.series {
            series.insert(name.clone(), TimeSeries::read_csv(&dir.join(file))?);
        }
        Ok(SeriesStore { series })
    }

    pub fn get(&self, name: &str) -> Result<&TimeSeries> {
        self.series.get(name).ok_or_else(|| Error::Data(format!("unknown series '{name}'")))
    }

    pub fn window(&self, name: &str, start: NaiveDateTime, len: usize) -> Result<Vec<f64>> {
        let s = self.get(name)?;
        s.window(start, len).map(<[f64]>::to_vec).ok_or_else(|| {
            Error::Data(format!(
                "series '{name}' does not cover {} hours from {}",
                len,
                format_timestamp(start)
            ))
        })
    }

    pub fn bundle<'a>(
        &self,
        names: impl IntoIterator<Item = &'a String>,
        start: NaiveDateTime,
        len: usize,
    ) -> Result<Bundle> {
        names.into_iter().map(|n| Ok((n.clone(), self.window(n, start, len)?))).collect()
    }

    /// Latest start such that every series covers the window.
    pub fn common_range(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        let start = self.series.values().map(|s| s.start).max()?;
        let end = self.series.values().map(TimeSeries::end).min()?;
        (start < end).then_some((start, end))
    }
}
