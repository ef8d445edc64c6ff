//! Running MO/FO accumulators for every series.
//!
//! Each series keeps compensated sums of `O[t]` and `O[t]^2`. With constant
//! weights `1/T` the means follow the recurrences
//! `MO <- (T*MO + O)/(T+1)` and `FO <- (T*FO + O^2)/(T+1)`, and storing
//! the sums instead of the means keeps additions and removals exact up to
//! rounding. `VO = FO - MO^2`.

use serde::{Deserialize, Serialize};

use super::panel::RawPanel;
use super::stats::{cross_section_stats_with, directional_outlyingness, CompensatedSum, CrossSectionStats};
use crate::error::{Error, Result};

/// Tolerance below zero tolerated for `FO - MO^2` before it is reported.
pub const VO_NEGATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesAccumulator {
    sum_o: CompensatedSum,
    sum_o2: CompensatedSum,
    /// Computed against cached medians that did not include this series.
    pub approximate: bool,
}

impl SeriesAccumulator {
    #[inline]
    fn push(&mut self, o: f64) {
        self.sum_o.add(o);
        self.sum_o2.add(o * o);
    }

    #[inline]
    fn pop(&mut self, o: f64) {
        self.sum_o.sub(o);
        self.sum_o2.sub(o * o);
    }
}

/// Mean, variation and functional outlyingness of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outlyingness {
    pub mo: f64,
    pub fo: f64,
}

impl Outlyingness {
    /// `FO - MO^2` without clamping.
    pub fn vo_raw(&self) -> f64 {
        self.fo - self.mo * self.mo
    }

    /// `FO - MO^2` clamped at zero. Cancellation below `-VO_NEGATIVE_TOL`
    /// (relative to FO) is logged as a numeric fault.
    pub fn vo(&self) -> f64 {
        let raw = self.vo_raw();
        if raw < -VO_NEGATIVE_TOL * self.fo.abs().max(1.0) {
            log::warn!("negative variation outlyingness {raw:e} (fo = {:e})", self.fo);
        }
        raw.max(0.0)
    }

    /// Batch computation from a materialized outlyingness sequence.
    pub fn from_sequence(o: &[f64]) -> Self {
        let mut acc = SeriesAccumulator::default();
        for &v in o {
            acc.push(v);
        }
        let t = o.len() as f64;
        Outlyingness { mo: acc.sum_o.value() / t, fo: acc.sum_o2.value() / t }
    }
}

/// Outlyingness measures for every series of a panel plus the cached
/// per-column statistics they were computed with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutlyingnessState {
    series: Vec<SeriesAccumulator>,
    stats: Vec<CrossSectionStats>,
    degenerate_count: usize,
    pub epoch: u64,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl OutlyingnessState {
    /// Fit every series against medians recomputed from scratch.
    ///
    /// The returned state carries `epoch`; callers bump it on each full fit.
    pub fn batch_fit(panel: &RawPanel, epoch: u64) -> Result<Self> {
        let n = panel.n_series();
        let t = panel.n_times();
        if n == 0 || t == 0 {
            return Err(Error::Config("cannot fit an empty panel".into()));
        }
        let mut state = OutlyingnessState {
            series: vec![SeriesAccumulator::default(); n],
            stats: Vec::with_capacity(t),
            degenerate_count: 0,
            epoch,
            scratch: Vec::with_capacity(n),
        };
        let mut column = Vec::with_capacity(n);
        for ti in 0..t {
            panel.column_into(ti, &mut column);
            state.fold_column(&column, ti)?;
        }
        Ok(state)
    }

    fn fold_column(&mut self, column: &[f64], t_index: usize) -> Result<()> {
        let stats = cross_section_stats_with(column, t_index, &mut self.scratch)?;
        for (acc, &x) in self.series.iter_mut().zip(column) {
            acc.push(directional_outlyingness(x, &stats));
        }
        if stats.is_degenerate() {
            self.degenerate_count += 1;
        }
        self.stats.push(stats);
        Ok(())
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn t_count(&self) -> usize {
        self.stats.len()
    }

    pub fn stats(&self) -> &[CrossSectionStats] {
        &self.stats
    }

    /// Number of cached cross-sections whose MAD hit the denominator floor.
    pub fn degenerate_count(&self) -> usize {
        self.degenerate_count
    }

    pub fn is_approximate(&self, n: usize) -> bool {
        self.series[n].approximate
    }

    pub fn approximate_count(&self) -> usize {
        self.series.iter().filter(|s| s.approximate).count()
    }

    pub fn outlyingness(&self, n: usize) -> Outlyingness {
        let acc = &self.series[n];
        let t = self.t_count() as f64;
        Outlyingness { mo: acc.sum_o.value() / t, fo: acc.sum_o2.value() / t }
    }

    pub fn iter(&self) -> impl Iterator<Item = Outlyingness> + '_ {
        (0..self.n_series()).map(|n| self.outlyingness(n))
    }

    /// Fold in one new column. Cost is linear in N and independent of T.
    ///
    /// On error neither the state nor the panel is modified.
    pub fn add_time_point(&mut self, panel: &mut RawPanel, ts: Option<f64>, column: &[f64]) -> Result<()> {
        self.check_shape(panel)?;
        let ts = panel.validate_column(column, ts)?;
        self.fold_column(column, self.t_count())?;
        panel.push_column(ts, column);
        Ok(())
    }

    /// Remove column `t` by subtracting its cached contributions.
    ///
    /// Falls back to a batch fit when the cache does not match the panel.
    pub fn remove_time_point(&mut self, panel: &mut RawPanel, t: usize) -> Result<()> {
        if panel.n_times() <= 1 {
            return Err(Error::InvalidOperation("a panel must retain at least one time point".into()));
        }
        if t >= panel.n_times() {
            return Err(Error::InvalidOperation(format!(
                "time index {t} out of range (T = {})",
                panel.n_times()
            )));
        }
        if self.check_shape(panel).is_err() {
            log::warn!("cross-section cache does not match the panel; refitting");
            panel.remove_column(t);
            let epoch = self.epoch;
            *self = OutlyingnessState::batch_fit(panel, epoch)?;
            return Ok(());
        }
        let stats = self.stats.remove(t);
        for (acc, row) in self.series.iter_mut().zip(panel.rows()) {
            acc.pop(directional_outlyingness(row[t], &stats));
        }
        if stats.is_degenerate() {
            self.degenerate_count -= 1;
        }
        for (i, s) in self.stats.iter_mut().enumerate().skip(t) {
            s.t_index = i;
        }
        panel.remove_column(t);
        Ok(())
    }

    /// Outlyingness of a candidate series measured against the cached
    /// medians, without touching the state.
    pub fn approximate_outlyingness(&self, values: &[f64]) -> Result<Outlyingness> {
        if values.len() != self.t_count() {
            return Err(Error::LengthMismatch { expected: self.t_count(), actual: values.len() });
        }
        let mut acc = SeriesAccumulator::default();
        for (&x, s) in values.iter().zip(&self.stats) {
            acc.push(directional_outlyingness(x, s));
        }
        let t = self.t_count() as f64;
        Ok(Outlyingness { mo: acc.sum_o.value() / t, fo: acc.sum_o2.value() / t })
    }

    /// Admit a series under the assumption that the cached medians still hold.
    /// Costs O(T); existing series are untouched.
    pub fn add_series_approx(&mut self, panel: &mut RawPanel, id: String, values: Vec<f64>) -> Result<Outlyingness> {
        self.check_shape(panel)?;
        panel.validate_series(&id, &values)?;
        let mut acc = SeriesAccumulator { approximate: true, ..Default::default() };
        for (&x, s) in values.iter().zip(&self.stats) {
            acc.push(directional_outlyingness(x, s));
        }
        self.series.push(acc);
        panel.push_series(id, values);
        Ok(self.outlyingness(self.n_series() - 1))
    }

    /// Drop a series without refreshing the cached medians.
    pub fn remove_series(&mut self, panel: &mut RawPanel, id: &str) -> Result<Vec<f64>> {
        self.check_shape(panel)?;
        let n = panel.position(id).ok_or_else(|| Error::UnknownSeries(vec![id.to_string()]))?;
        if panel.n_series() == 1 {
            return Err(Error::InvalidOperation("a panel must retain at least one series".into()));
        }
        self.series.remove(n);
        Ok(panel.remove_series_at(n).1)
    }

    fn check_shape(&self, panel: &RawPanel) -> Result<()> {
        if self.series.len() != panel.n_series() || self.stats.len() != panel.n_times() {
            return Err(Error::InvalidOperation(format!(
                "state ({}×{}) does not match panel ({}×{})",
                self.series.len(),
                self.stats.len(),
                panel.n_series(),
                panel.n_times()
            )));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn invalidate_cache(&mut self) {
        self.stats.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Materializes every O[n][t] from sorted medians, then averages.
    fn oracle(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let n = rows.len();
        let t = rows[0].len();
        let med = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let k = v.len();
            if k % 2 == 1 {
                v[k / 2]
            } else {
                (v[k / 2 - 1] + v[k / 2]) / 2.0
            }
        };
        let mut o = vec![vec![0.0; t]; n];
        for ti in 0..t {
            let col: Vec<f64> = rows.iter().map(|r| r[ti]).collect();
            let z = med(col.clone());
            let mad = med(col.iter().map(|x| (x - z).abs()).collect());
            let denom = mad.max(1e-12 * z.abs().max(1.0));
            for ni in 0..n {
                o[ni][ti] = (rows[ni][ti] - z) / denom;
            }
        }
        o.iter()
            .map(|seq| {
                let mo = seq.iter().sum::<f64>() / t as f64;
                let fo = seq.iter().map(|v| v * v).sum::<f64>() / t as f64;
                (mo, fo - mo * mo)
            })
            .collect()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, t: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..t).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
    }

    #[test]
    fn constant_series() {
        let rows = vec![vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]];
        let p = RawPanel::from_rows(rows).unwrap();
        let s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        let got: Vec<(f64, f64, f64)> = s.iter().map(|o| (o.mo, o.vo(), o.fo)).collect();
        assert_eq!(got, vec![(-1.0, 0.0, 1.0), (0.0, 0.0, 0.0), (1.0, 0.0, 1.0)]);

        let single = RawPanel::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let s1 = OutlyingnessState::batch_fit(&single, 1).unwrap();
        let got1: Vec<(f64, f64, f64)> = s1.iter().map(|o| (o.mo, o.vo(), o.fo)).collect();
        assert_eq!(got, got1);
    }

    #[test]
    fn batch_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows = random_rows(&mut rng, 5, 20);
        let want = oracle(&rows);
        let p = RawPanel::from_rows(rows).unwrap();
        let s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        for (o, (mo, vo)) in s.iter().zip(want) {
            assert!(close(o.mo, mo, 1e-12), "{} vs {}", o.mo, mo);
            assert!(close(o.vo(), vo, 1e-12));
        }
    }

    #[test]
    fn empty_panel_rejected() {
        assert!(RawPanel::from_rows(vec![]).is_err());
    }

    #[test]
    fn add_time_point_recurrence() {
        // Series "a" has O = 1 for four columns, then O = 6 in the fifth.
        let rows = vec![vec![0.0; 4], vec![1.0; 4], vec![2.0; 4]];
        let mut p = RawPanel::from_rows(rows).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        assert_eq!(s.outlyingness(2), Outlyingness { mo: 1.0, fo: 1.0 });
        s.add_time_point(&mut p, None, &[0.0, 1.0, 7.0]).unwrap();
        let o = s.outlyingness(2);
        assert_eq!((o.mo, o.fo, o.vo()), (2.0, 8.0, 4.0));
    }

    #[test]
    fn series_at_median_shrinks() {
        let rows = vec![vec![0.0; 4], vec![1.0; 4], vec![2.0; 4]];
        let mut p = RawPanel::from_rows(rows).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        s.add_time_point(&mut p, None, &[0.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.outlyingness(2), Outlyingness { mo: 0.8, fo: 0.8 });
    }

    #[test]
    fn add_time_point_atomic_on_mismatch() {
        let mut p = RawPanel::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        let before = (p.clone(), s.clone());
        assert!(s.add_time_point(&mut p, None, &[1.0]).is_err());
        assert!(s.add_time_point(&mut p, None, &[1.0, f64::INFINITY]).is_err());
        assert_eq!(p, before.0);
        assert_eq!(s.t_count(), before.1.t_count());
        assert_eq!(s.outlyingness(0), before.1.outlyingness(0));
    }

    #[test]
    fn sequential_additions_match_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows = random_rows(&mut rng, 50, 101);
        let init: Vec<Vec<f64>> = rows.iter().map(|r| r[..1].to_vec()).collect();
        let mut p = RawPanel::from_rows(init).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        for t in 1..101 {
            let col: Vec<f64> = rows.iter().map(|r| r[t]).collect();
            s.add_time_point(&mut p, None, &col).unwrap();
        }
        let full = RawPanel::from_rows(rows).unwrap();
        let b = OutlyingnessState::batch_fit(&full, 1).unwrap();
        for n in 0..50 {
            assert!(close(s.outlyingness(n).mo, b.outlyingness(n).mo, 1e-9));
            assert!(close(s.outlyingness(n).fo, b.outlyingness(n).fo, 1e-9));
        }
    }

    #[test]
    fn remove_inverts_add() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = random_rows(&mut rng, 8, 12);
        let mut p = RawPanel::from_rows(rows).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        let before: Vec<Outlyingness> = s.iter().collect();
        let col: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
        s.add_time_point(&mut p, None, &col).unwrap();
        s.remove_time_point(&mut p, 12).unwrap();
        for (a, b) in s.iter().zip(before) {
            assert!(close(a.mo, b.mo, 1e-9) && close(a.fo, b.fo, 1e-9));
        }
    }

    #[test]
    fn remove_any_column_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = random_rows(&mut rng, 10, 30);
        for t in 0..30 {
            let mut p = RawPanel::from_rows(rows.clone()).unwrap();
            let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
            s.remove_time_point(&mut p, t).unwrap();
            let rest: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, v)| *v).collect())
                .collect();
            for (o, (mo, vo)) in s.iter().zip(oracle(&rest)) {
                assert!(close(o.mo, mo, 1e-9), "t={t}");
                assert!(close(o.vo(), vo, 1e-9), "t={t}");
            }
            assert_eq!(s.stats().iter().map(|c| c.t_index).collect::<Vec<_>>(), (0..29).collect::<Vec<_>>());
        }
    }

    #[test]
    fn remove_last_point_rejected() {
        let mut p = RawPanel::from_rows(vec![vec![1.0], vec![2.0]]).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        assert!(matches!(s.remove_time_point(&mut p, 0), Err(Error::InvalidOperation(_))));
    }

    #[test]
    fn missing_cache_falls_back_to_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows = random_rows(&mut rng, 6, 10);
        let mut p = RawPanel::from_rows(rows.clone()).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        s.invalidate_cache();
        s.remove_time_point(&mut p, 4).unwrap();
        let rest: Vec<Vec<f64>> = rows.iter().map(|r| [&r[..4], &r[5..]].concat()).collect();
        for (o, (mo, _)) in s.iter().zip(oracle(&rest)) {
            assert!(close(o.mo, mo, 1e-9));
        }
    }

    #[test]
    fn approx_series_duplicate_and_median_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows = random_rows(&mut rng, 9, 15);
        let mut p = RawPanel::from_rows(rows.clone()).unwrap();
        let mut s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        let exact = s.outlyingness(3);
        let dup = s.add_series_approx(&mut p, "dup".into(), rows[3].clone()).unwrap();
        assert_eq!(dup, exact);
        assert!(s.is_approximate(9));
        let z: Vec<f64> = s.stats().iter().map(|c| c.z).collect();
        let med = s.add_series_approx(&mut p, "median".into(), z).unwrap();
        assert_eq!((med.mo, med.vo()), (0.0, 0.0));
        assert!(s.add_series_approx(&mut p, "short".into(), vec![0.0]).is_err());
        assert!(s.add_series_approx(&mut p, "dup".into(), rows[0].clone()).is_err());
    }

    #[test]
    fn identity_fo_is_mo_squared_plus_vo() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = RawPanel::from_rows(random_rows(&mut rng, 30, 40)).unwrap();
        let s = OutlyingnessState::batch_fit(&p, 1).unwrap();
        for o in s.iter() {
            assert!(o.vo_raw() >= -VO_NEGATIVE_TOL);
            assert!(close(o.fo, o.mo * o.mo + o.vo(), 1e-12));
        }
    }
}
