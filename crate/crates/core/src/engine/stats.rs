//! Per-time-point cross-section statistics and directional outlyingness.
//!
//! For a univariate panel the Stahel-Donoho outlyingness of a reading reduces
//! to its distance from the cross-sectional median, scaled by the median
//! absolute deviation. Keeping the sign of that distance gives the directional
//! outlyingness `O = (x - z) / mad` that the MS plot integrates over time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative floor applied to the MAD denominator.
pub const MAD_EPS_REL: f64 = 1e-12;

/// Median and MAD of the N readings observed at one time index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionStats {
    pub z: f64,
    pub mad: f64,
    pub t_index: usize,
}

impl CrossSectionStats {
    /// Denominator floor `1e-12 * max(1, |z|)`.
    #[inline]
    pub fn mad_floor(&self) -> f64 {
        MAD_EPS_REL * self.z.abs().max(1.0)
    }

    /// The MAD is below its floor, so outlyingness uses the guarded denominator.
    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.mad < self.mad_floor()
    }

    #[inline]
    fn denominator(&self) -> f64 {
        self.mad.max(self.mad_floor())
    }
}

/// Median of a scratch buffer, reordering it in place.
///
/// Even lengths average the two middle order statistics.
pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower_max + upper) / 2.0
    }
}

/// Median and MAD of a column, using `scratch` to avoid reallocating.
pub(crate) fn cross_section_stats_with(
    column: &[f64],
    t_index: usize,
    scratch: &mut Vec<f64>,
) -> Result<CrossSectionStats> {
    if column.is_empty() {
        return Err(Error::Config("cross-section requires at least one reading".into()));
    }
    if let Some(series) = column.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { series, time: t_index });
    }
    scratch.clear();
    scratch.extend_from_slice(column);
    let z = median_in_place(scratch);
    for (dst, &x) in scratch.iter_mut().zip(column) {
        *dst = (x - z).abs();
    }
    let mad = median_in_place(scratch);
    Ok(CrossSectionStats { z, mad, t_index })
}

/// Median and MAD of the readings at one time point.
pub fn cross_section_stats(column: &[f64]) -> Result<CrossSectionStats> {
    cross_section_stats_with(column, 0, &mut Vec::with_capacity(column.len()))
}

/// Signed, MAD-scaled deviation of `x` from the cross-sectional median.
#[inline]
pub fn directional_outlyingness(x: f64, stats: &CrossSectionStats) -> f64 {
    (x - stats.z) / stats.denominator()
}

/// Compensated (Neumaier) running sum. Supports removal of earlier terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn sub(&mut self, x: f64) {
        self.add(-x);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_median(v: &[f64]) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    }

    #[test]
    fn odd_column() {
        let s = cross_section_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.z, s.mad), (2.0, 1.0));
    }

    #[test]
    fn constant_column() {
        let s = cross_section_stats(&[5.0; 4]).unwrap();
        assert_eq!((s.z, s.mad), (5.0, 0.0));
        assert!(s.is_degenerate());
    }

    #[test]
    fn degenerate_mad_from_majority() {
        let col = [0.0, 0.0, 0.0, 4.0];
        let s = cross_section_stats(&col).unwrap();
        let z = sorted_median(&col);
        let dev: Vec<f64> = col.iter().map(|x| (x - z).abs()).collect();
        assert_eq!(s.z, z);
        assert_eq!(s.mad, sorted_median(&dev));
        assert_eq!((s.z, s.mad), (0.0, 0.0));
    }

    #[test]
    fn even_median_is_midpoint() {
        let s = cross_section_stats(&[4.0, 1.0, 3.0, 10.0]).unwrap();
        assert_eq!(s.z, 3.5);
        // |x - 3.5| = 0.5, 2.5, 0.5, 6.5
        assert_eq!(s.mad, 1.5);
    }

    #[test]
    fn non_finite_names_series() {
        let err = cross_section_stats(&[1.0, f64::NAN, 2.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { series: 1, time: 0 });
    }

    #[test]
    fn outlyingness_values() {
        let s = CrossSectionStats { z: 2.0, mad: 1.0, t_index: 0 };
        assert_eq!(directional_outlyingness(3.0, &s), 1.0);
        assert_eq!(directional_outlyingness(2.0, &s), 0.0);
        assert!(directional_outlyingness(1.5, &s) < 0.0);
    }

    #[test]
    fn guard_fires_only_below_floor() {
        let s = CrossSectionStats { z: 0.0, mad: 0.0, t_index: 0 };
        assert!(s.is_degenerate());
        let o = directional_outlyingness(2.0, &s);
        assert!(o.is_finite());
        assert_eq!(o, 2.0 / 1e-12);

        let big = CrossSectionStats { z: 1e6, mad: 0.5e-6, t_index: 0 };
        assert!(big.is_degenerate(), "floor scales with |z|");
        let ok = CrossSectionStats { z: 1e6, mad: 2e-6, t_index: 0 };
        assert!(!ok.is_degenerate());
        assert!((directional_outlyingness(1e6 + 4e-6, &ok) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn compensated_sum_cancels() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
        s.sub(1.0);
        assert_eq!(s.value(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn permutation_invariant(mut v in prop::collection::vec(-1e3f64..1e3, 1..40), seed in any::<u64>()) {
                let a = cross_section_stats(&v).unwrap();
                // deterministic shuffle
                let n = v.len();
                let mut state = seed;
                for i in (1..n).rev() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let j = (state >> 33) as usize % (i + 1);
                    v.swap(i, j);
                }
                let b = cross_section_stats(&v).unwrap();
                prop_assert_eq!(a.z, b.z);
                prop_assert_eq!(a.mad, b.mad);
            }

            #[test]
            fn matches_sort_oracle(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
                let s = cross_section_stats(&v).unwrap();
                let z = sorted_median(&v);
                let dev: Vec<f64> = v.iter().map(|x| (x - z).abs()).collect();
                prop_assert_eq!(s.z, z);
                prop_assert_eq!(s.mad, sorted_median(&dev));
                prop_assert!(s.mad >= 0.0);
            }
        }
    }
}
