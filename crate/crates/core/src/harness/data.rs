// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ops::Range;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row timestamp: an integer index or an ISO-8601 date/time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Timestamp {
    Index(i64),
    DateTime(NaiveDateTime),
}

impl Timestamp {
    fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if let Ok(i) = raw.parse::<i64>() {
            return Some(Timestamp::Index(i));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
                return Some(Timestamp::DateTime(dt));
            }
        }
        if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
            return Some(Timestamp::DateTime(dt.naive_utc()));
        }
        NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .ok()
            .map(|d| Timestamp::DateTime(d.and_hms_opt(0, 0, 0).expect("midnight")))
    }
}

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::DateTime(dt) => write!(f, "{}", dt.format("%Y-%m-%d %H:%M:%S")),
        }
    }
}

/// A `T × C` multivariate series, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMatrix {
    names: Vec<String>,
    timestamps: Option<Vec<Timestamp>>,
    /// `C × T`
    data: Array2<f64>,
}

impl SeriesMatrix {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let channels = columns.len();
        if channels == 0 || names.len() != channels {
            return Err(Error::InvalidParams(format!(
                "need one name per channel ({} names, {channels} channels)",
                names.len()
            )));
        }
        let t = columns[0].len();
        if t == 0 {
            return Err(Error::EmptySeries);
        }
        if columns.iter().any(|c| c.len() != t) {
            return Err(Error::ShapeMismatch { expected: format!("{t} rows per channel"), got: "ragged columns".into() });
        }
        let flat: Vec<f64> = columns.into_iter().flatten().collect();
        let data = Array2::from_shape_vec((channels, t), flat).expect("validated shape");
        Ok(Self { names, timestamps: None, data })
    }

    /// From a row-major `T × C` matrix.
    pub fn from_rows(names: Vec<String>, values: ArrayView2<'_, f64>) -> Result<Self> {
        let columns = values.columns().into_iter().map(|c| c.to_vec()).collect();
        Self::from_columns(names, columns)
    }

    pub fn with_timestamps(mut self, timestamps: Vec<Timestamp>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} timestamps", self.len()),
                got: format!("{}", timestamps.len()),
            });
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn timestamps(&self) -> Option<&[Timestamp]> {
        self.timestamps.as_deref()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        self.data.row(c).to_slice().expect("channel-major storage")
    }

    /// `T × C` view.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.data.t()
    }

    /// Rows `range` as a new series.
    pub fn slice_rows(&self, range: Range<usize>) -> Self {
        Self {
            names: self.names.clone(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[range.clone()].to_vec()),
            data: self.data.slice(s![.., range]).to_owned(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = Vec::with_capacity(self.channels() + 1);
        if self.timestamps.is_some() {
            header.push("timestamp".to_string());
        }
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = Vec::with_capacity(header.len());
            if let Some(ts) = &self.timestamps {
                rec.push(ts[t].to_string());
            }
            rec.extend((0..self.channels()).map(|c| format!("{}", self.data[[c, t]])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

const TIMESTAMP_HEADERS: [&str; 6] = ["date", "time", "timestamp", "datetime", "index", "ds"];

/// Reads a CSV with a header row of channel names and an optional leading
/// timestamp column. Any non-numeric or non-finite value cell is an error.
pub fn load_csv(path: &Path) -> Result<SeriesMatrix> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() || headers.is_empty() {
        return Err(Error::EmptySeries);
    }

    let first = headers[0].to_ascii_lowercase();
    let has_timestamp = TIMESTAMP_HEADERS.contains(&first.as_str())
        || records[0].get(0).is_some_and(|v| v.parse::<f64>().is_err() && Timestamp::parse(v).is_some());
    let skip = usize::from(has_timestamp);
    let names: Vec<String> = headers[skip..].to_vec();
    if names.is_empty() {
        return Err(Error::EmptySeries);
    }

    let mut columns = vec![Vec::with_capacity(records.len()); names.len()];
    let mut timestamps = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        // 1-based file row, counting the header
        let row = r + 2;
        if rec.len() != headers.len() {
            return Err(Error::Parse { row, column: rec.len().min(headers.len()) + 1, message: format!("expected {} fields, found {}", headers.len(), rec.len()) });
        }
        if has_timestamp {
            let raw = &rec[0];
            timestamps.push(Timestamp::parse(raw).ok_or_else(|| Error::Parse {
                row,
                column: 1,
                message: format!("invalid timestamp `{raw}`"),
            })?);
        }
        for (c, col) in columns.iter_mut().enumerate() {
            let raw = &rec[c + skip];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => col.push(v),
                _ => {
                    return Err(Error::Parse { row, column: c + skip + 1, message: format!("non-numeric value `{raw}`") })
                }
            }
        }
    }
    let series = SeriesMatrix::from_columns(names, columns)?;
    if has_timestamp {
        series.with_timestamps(timestamps)
    } else {
        Ok(series)
    }
}

/// One (lookback, horizon) pair in the original scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    /// `L × C`
    pub lookback: Array2<f64>,
    /// `H × C`; absent at pure-inference time.
    pub target: Option<Array2<f64>>,
    pub dataset_id: String,
    pub window_index: usize,
}

impl Instance {
    pub fn new(lookback: Array2<f64>, target: Option<Array2<f64>>) -> Self {
        Self { lookback, target, dataset_id: String::new(), window_index: 0 }
    }

    pub fn horizon(&self) -> usize {
        self.target.as_ref().map_or(0, |t| t.nrows())
    }
}

/// Sliding windows with starts `0, stride, 2·stride, …`.
pub fn windowize(series: &SeriesMatrix, lookback: usize, horizon: usize, stride: usize) -> Result<Vec<Instance>> {
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Err(Error::InvalidParams("lookback, horizon and stride must be >= 1".into()));
    }
    let t = series.len();
    if t < lookback + horizon {
        return Err(Error::InputTooShort { needed: lookback + horizon, got: t });
    }
    let values = series.values();
    let count = (t - lookback - horizon) / stride + 1;
    Ok((0..count)
        .map(|w| {
            let s = w * stride;
            Instance {
                lookback: values.slice(s![s..s + lookback, ..]).to_owned(),
                target: Some(values.slice(s![s + lookback..s + lookback + horizon, ..]).to_owned()),
                dataset_id: String::new(),
                window_index: w,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.train <= 0.0 || self.test <= 0.0 {
            return Err(Error::Config(format!("split fractions must be in [0, 1] and sum to 1, got {self:?}")));
        }
        Ok(())
    }

    /// Disjoint chronological row ranges (train, val, test).
    pub fn ranges(&self, len: usize) -> (Range<usize>, Range<usize>, Range<usize>) {
        let train_end = (self.train * len as f64).floor() as usize;
        let val_end = (((self.train + self.val) * len as f64).floor() as usize).clamp(train_end, len);
        (0..train_end, train_end..val_end, val_end..len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_plain_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,b\n1,2\n3,4\n5,6.5\n");
        let s = load_csv(&p).unwrap();
        assert_eq!((s.len(), s.channels()), (3, 2));
        assert_eq!(s.names(), ["a", "b"]);
        assert_eq!(s.column(1), [2.0, 4.0, 6.5]);
        assert!(s.timestamps().is_none());
    }

    #[test]
    fn nan_cell_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,b\n1,2\n3,NaN\n");
        match load_csv(&p) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "b.csv", "a\n1\nabc\n");
        assert!(matches!(load_csv(&p), Err(Error::Parse { row: 3, column: 1, .. })));
    }

    #[test]
    fn timestamp_column_does_not_change_values() {
        let dir = tempfile::tempdir().unwrap();
        let plain = write(&dir, "p.csv", "x,y\n1.5,2\n3,4\n");
        let dated = write(&dir, "d.csv", "date,x,y\n2016-07-01 00:00:00,1.5,2\n2016-07-01 01:00:00,3,4\n");
        let indexed = write(&dir, "i.csv", "index,x,y\n0,1.5,2\n1,3,4\n");
        let a = load_csv(&plain).unwrap();
        let b = load_csv(&dated).unwrap();
        let c = load_csv(&indexed).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.values(), c.values());
        assert_eq!(b.names(), a.names());
        assert_eq!(b.timestamps().unwrap().len(), 2);
        assert_eq!(c.timestamps().unwrap()[1], Timestamp::Index(1));
    }

    #[test]
    fn missing_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_csv(&dir.path().join("none.csv")), Err(Error::FileNotFound(_))));
        let p = write(&dir, "e.csv", "a,b\n");
        assert!(matches!(load_csv(&p), Err(Error::EmptySeries)));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = SeriesMatrix::from_columns(vec!["u".into(), "v".into()], vec![vec![0.1, -2.0, 3e9], vec![1.0, 2.0, 1e-7]])
            .unwrap()
            .with_timestamps((0..3).map(Timestamp::Index).collect())
            .unwrap();
        let p = dir.path().join("s.csv");
        s.write_csv(&p).unwrap();
        assert_eq!(load_csv(&p).unwrap(), s);
    }

    fn ramp(t: usize) -> SeriesMatrix {
        SeriesMatrix::from_columns(vec!["x".into()], vec![(0..t).map(|i| i as f64).collect()]).unwrap()
    }

    #[test]
    fn windowize_counts() {
        assert_eq!(windowize(&ramp(6), 4, 2, 1).unwrap().len(), 1);
        let w = windowize(&ramp(10), 4, 2, 1).unwrap();
        assert_eq!(w.len(), 10 - 4 - 2 + 1);
        assert_eq!(w[2].lookback.column(0).to_vec(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w[2].target.as_ref().unwrap().column(0).to_vec(), vec![6.0, 7.0]);
        assert_eq!(windowize(&ramp(10), 4, 2, 10).unwrap().len(), 1);
        assert!(matches!(windowize(&ramp(5), 4, 2, 1), Err(Error::InputTooShort { .. })));
    }

    #[test]
    fn split_ranges_are_disjoint_and_ordered() {
        let f = SplitFractions::default();
        f.validate().unwrap();
        let (a, b, c) = f.ranges(6000);
        assert_eq!((a.end, b.end, c.end), (4200, 4800, 6000));
        assert!(a.end <= b.start && b.end <= c.start);
        assert!(SplitFractions { train: 0.5, val: 0.1, test: 0.2 }.validate().is_err());
    }
}
