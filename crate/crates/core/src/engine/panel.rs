use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Append-only N×T matrix of readings, stored one row per series.
///
/// Rows are contiguous so admitting a series costs O(T) and appending a time
/// point costs O(N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPanel {
    series_ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    timestamps: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl RawPanel {
    pub fn new(series_ids: Vec<String>, rows: Vec<Vec<f64>>, timestamps: Vec<f64>) -> Result<Self> {
        if series_ids.is_empty() || timestamps.is_empty() {
            return Err(Error::Config("panel needs at least one series and one time point".into()));
        }
        if series_ids.len() != rows.len() {
            return Err(Error::LengthMismatch { expected: series_ids.len(), actual: rows.len() });
        }
        check_increasing(&timestamps)?;
        let t = timestamps.len();
        for (n, row) in rows.iter().enumerate() {
            if row.len() != t {
                return Err(Error::LengthMismatch { expected: t, actual: row.len() });
            }
            if let Some(time) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { series: n, time });
            }
        }
        let mut index = HashMap::with_capacity(series_ids.len());
        for (i, id) in series_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateSeries(id.clone()));
            }
        }
        let panel = RawPanel { series_ids, rows, timestamps, index };
        if !panel.is_near_uniform() {
            log::warn!("timestamps are not evenly spaced; readings are weighted uniformly");
        }
        Ok(panel)
    }

    /// Panel indexed `0..T` with generated ids `s0, s1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let ts = (0..t).map(|i| i as f64).collect();
        Self::new(ids, rows, ts)
    }

    pub fn n_series(&self) -> usize {
        self.rows.len()
    }

    pub fn n_times(&self) -> usize {
        self.timestamps.len()
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn series(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|n| self.rows[n].as_slice())
    }

    /// Copy column `t` into `out`.
    pub fn column_into(&self, t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.rows.iter().map(|r| r[t]));
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_series());
        self.column_into(t, &mut out);
        out
    }

    /// Next timestamp when a caller does not supply one.
    pub fn next_timestamp(&self) -> f64 {
        match self.timestamps.as_slice() {
            [.., a, b] => b + (b - a),
            [b] => b + 1.0,
            [] => 0.0,
        }
    }

    pub(crate) fn validate_column(&self, values: &[f64], ts: Option<f64>) -> Result<f64> {
        if values.len() != self.n_series() {
            return Err(Error::LengthMismatch { expected: self.n_series(), actual: values.len() });
        }
        if let Some(series) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { series, time: self.n_times() });
        }
        let ts = ts.unwrap_or_else(|| self.next_timestamp());
        if let Some(&last) = self.timestamps.last() {
            if ts.partial_cmp(&last) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidOperation(format!(
                    "timestamp {ts} does not follow the last timestamp {last}"
                )));
            }
        }
        Ok(ts)
    }

    pub(crate) fn push_column(&mut self, ts: f64, values: &[f64]) {
        for (row, &v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
        self.timestamps.push(ts);
    }

    pub(crate) fn remove_column(&mut self, t: usize) {
        for row in &mut self.rows {
            row.remove(t);
        }
        self.timestamps.remove(t);
    }

    pub(crate) fn validate_series(&self, id: &str, values: &[f64]) -> Result<()> {
        if self.index.contains_key(id) {
            return Err(Error::DuplicateSeries(id.to_string()));
        }
        if values.len() != self.n_times() {
            return Err(Error::LengthMismatch { expected: self.n_times(), actual: values.len() });
        }
        if let Some(time) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { series: self.n_series(), time });
        }
        Ok(())
    }

    pub(crate) fn push_series(&mut self, id: String, values: Vec<f64>) {
        self.index.insert(id.clone(), self.rows.len());
        self.series_ids.push(id);
        self.rows.push(values);
    }

    pub(crate) fn remove_series_at(&mut self, n: usize) -> (String, Vec<f64>) {
        let id = self.series_ids.remove(n);
        let row = self.rows.remove(n);
        self.index.remove(&id);
        for (i, sid) in self.series_ids.iter().enumerate().skip(n) {
            self.index.insert(sid.clone(), i);
        }
        (id, row)
    }

    /// Restore the id lookup after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.series_ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
    }

    /// Spacing within 1% of the mean interval.
    pub fn is_near_uniform(&self) -> bool {
        let ts = &self.timestamps;
        if ts.len() < 3 {
            return true;
        }
        let mean = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        ts.windows(2).all(|w| ((w[1] - w[0]) - mean).abs() <= 0.01 * mean.abs())
    }

    /// Copy of the rows selected by `ids`, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&[f64]>> {
        let missing: Vec<String> = ids.iter().filter(|id| !self.index.contains_key(*id)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::UnknownSeries(missing));
        }
        Ok(ids.iter().map(|id| self.rows[self.index[id]].as_slice()).collect())
    }
}

fn check_increasing(ts: &[f64]) -> Result<()> {
    if let Some(i) = ts.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidOperation(format!("timestamp {i} is not finite")));
    }
    if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidOperation(format!(
            "timestamps must be strictly increasing (index {})",
            i + 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_ragged_and_duplicates() {
        let err = RawPanel::new(ids(&["a", "b"]), vec![vec![1.0, 2.0], vec![1.0]], vec![0.0, 1.0]);
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
        let err = RawPanel::new(ids(&["a", "a"]), vec![vec![1.0], vec![1.0]], vec![0.0]);
        assert_eq!(err.unwrap_err(), Error::DuplicateSeries("a".into()));
        let err = RawPanel::new(ids(&["a"]), vec![vec![1.0, 2.0]], vec![1.0, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn column_ops() {
        let mut p = RawPanel::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(p.column(1), vec![2.0, 4.0]);
        let ts = p.validate_column(&[5.0, 6.0], None).unwrap();
        assert_eq!(ts, 2.0);
        p.push_column(ts, &[5.0, 6.0]);
        assert_eq!(p.row(1), &[3.0, 4.0, 6.0]);
        p.remove_column(0);
        assert_eq!(p.timestamps(), &[1.0, 2.0]);
        assert!(p.validate_column(&[1.0], None).is_err());
        assert!(p.validate_column(&[1.0, 1.0], Some(2.0)).is_err());
    }

    #[test]
    fn series_ops_keep_index() {
        let mut p = RawPanel::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        p.remove_series_at(0);
        assert_eq!(p.position("s2"), Some(1));
        assert!(p.validate_series("s1", &[0.0]).is_err());
        p.push_series("x".into(), vec![9.0]);
        assert_eq!(p.series("x"), Some(&[9.0][..]));
        let sel = p.select(&ids(&["x", "nope"])).unwrap_err();
        assert_eq!(sel, Error::UnknownSeries(ids(&["nope"])));
    }
}
