//! Functional principal components of smoothed curves.
//!
//! With centered coefficients `C` (one row per curve) and Gram matrix `W`, the
//! covariance operator in basis coordinates is `(1/(N-1)) W^½ CᵀC W^½`. Its
//! eigenvectors `u` map back to FPC coefficients `b = W^-½ u`, which are
//! orthonormal in L².

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use super::smooth::SmoothedCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FpcaModel {
    pub series_ids: Vec<String>,
    pub mean_coefficients: DVector<f64>,
    /// One coefficient vector per retained component.
    pub fpcs: Vec<DVector<f64>>,
    /// Descending, nonnegative.
    pub eigenvalues: Vec<f64>,
    /// Cumulative explained-variance fractions.
    pub explained_ratio: Vec<f64>,
    /// `scores[i][j]`: curve i, component j.
    pub scores: Vec<Vec<f64>>,
    pub gram: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeEntry {
    pub index: usize,
    pub ratio: f64,
    pub cumulative_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCurves {
    pub mean_curve: Vec<f64>,
    pub plus_curve: Vec<f64>,
    pub minus_curve: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfluenceMode {
    #[default]
    Top,
    Bottom,
}

fn sym_power(w: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(w.clone());
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::Config("basis Gram matrix is not positive definite".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.powf(power)));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Fit FPCA on smoothed curves sharing `basis`.
///
/// Retains `min(n_basis, N - 1)` components. Each FPC is oriented so its value
/// at the first sample time is nonnegative (first nonzero sample on ties).
pub fn fit_fpca(curves: &[SmoothedCurve], basis: &Basis) -> Result<FpcaModel> {
    let n = curves.len();
    if n < 2 {
        return Err(Error::InvalidOperation(format!("FPCA needs at least 2 curves, got {n}")));
    }
    let k = basis.n_basis();
    if let Some(bad) = curves.iter().find(|c| c.coefficients.len() != k) {
        return Err(Error::Config(format!(
            "curve '{}' has {} coefficients but the basis has {k}",
            bad.series_id,
            bad.coefficients.len()
        )));
    }
    let coef = DMatrix::from_fn(n, k, |i, j| curves[i].coefficients[j]);
    let mean = DVector::from_fn(k, |j, _| coef.column(j).mean());
    let mut centered = coef;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let w = &basis.gram;
    let w_half = sym_power(w, 0.5)?;
    let w_inv_half = sym_power(w, -0.5)?;
    let cov = &w_half * centered.transpose() * &centered * &w_half / (n - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let retained = k.min(n - 1);

    let first_rows = &basis.eval_matrix;
    let mut fpcs = Vec::with_capacity(retained);
    let mut eigenvalues = Vec::with_capacity(retained);
    for &idx in order.iter().take(retained) {
        let u = eig.eigenvectors.column(idx).into_owned();
        let mut b = &w_inv_half * u;
        let sampled = first_rows * &b;
        let scale = sampled.amax();
        let lead = sampled.iter().copied().find(|v| v.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE));
        if lead.is_some_and(|v| v < 0.0) {
            b = -b;
        }
        fpcs.push(b);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }

    let total: f64 = eigenvalues.iter().sum();
    let mut acc = 0.0;
    let explained_ratio = eigenvalues
        .iter()
        .map(|&v| {
            // zero total variance: the first component already "explains" everything
            if total > 0.0 {
                acc += v;
                (acc / total).min(1.0)
            } else {
                1.0
            }
        })
        .collect();

    let mut model = FpcaModel {
        series_ids: curves.iter().map(|c| c.series_id.clone()).collect(),
        mean_coefficients: mean,
        fpcs,
        eigenvalues,
        explained_ratio,
        scores: Vec::new(),
        gram: w.clone(),
    };
    model.scores = fpc_scores(&model, curves)?;
    Ok(model)
}

/// Projection `(c_i - mean)ᵀ W b_j` of each curve onto each FPC.
pub fn fpc_scores(model: &FpcaModel, curves: &[SmoothedCurve]) -> Result<Vec<Vec<f64>>> {
    let k = model.mean_coefficients.len();
    let projected: Vec<DVector<f64>> = model.fpcs.iter().map(|b| &model.gram * b).collect();
    curves
        .iter()
        .map(|c| {
            if c.coefficients.len() != k {
                return Err(Error::Config(format!(
                    "basis mismatch: curve '{}' has {} coefficients, model expects {k}",
                    c.series_id,
                    c.coefficients.len()
                )));
            }
            let centered = DVector::from_column_slice(&c.coefficients) - &model.mean_coefficients;
            Ok(projected.iter().map(|wb| centered.dot(wb)).collect())
        })
        .collect()
}

impl FpcaModel {
    pub fn n_components(&self) -> usize {
        self.fpcs.len()
    }

    fn component(&self, j: usize) -> Result<&DVector<f64>> {
        self.fpcs.get(j).ok_or_else(|| {
            Error::InvalidOperation(format!("component {j} does not exist ({} retained)", self.fpcs.len()))
        })
    }

    /// FPC `j` evaluated on the sample grid of `basis`.
    pub fn fpc_curve(&self, basis: &Basis, j: usize) -> Result<Vec<f64>> {
        Ok((&basis.eval_matrix * self.component(j)?).iter().copied().collect())
    }

    pub fn mean_curve(&self, basis: &Basis) -> Vec<f64> {
        (&basis.eval_matrix * &self.mean_coefficients).iter().copied().collect()
    }

    /// Scores of component `j` keyed by series id.
    pub fn component_scores(&self, j: usize) -> Result<Vec<(String, f64)>> {
        self.component(j)?;
        Ok(self.series_ids.iter().cloned().zip(self.scores.iter().map(|s| s[j])).collect())
    }
}

/// `mean ± sqrt(2 ξ_j) · FPC_j` on the sample grid.
pub fn perturbation_curves(model: &FpcaModel, basis: &Basis, j: usize) -> Result<PerturbationCurves> {
    let fpc = model.fpc_curve(basis, j)?;
    let mean = model.mean_curve(basis);
    let m = (2.0 * model.eigenvalues[j]).sqrt();
    Ok(PerturbationCurves {
        plus_curve: mean.iter().zip(&fpc).map(|(a, f)| a + m * f).collect(),
        minus_curve: mean.iter().zip(&fpc).map(|(a, f)| a - m * f).collect(),
        mean_curve: mean,
    })
}

/// Per-component and cumulative explained-variance ratios.
pub fn scree(model: &FpcaModel, max_components: usize) -> Vec<ScreeEntry> {
    let total: f64 = model.eigenvalues.iter().sum();
    model
        .eigenvalues
        .iter()
        .zip(&model.explained_ratio)
        .take(max_components)
        .enumerate()
        .map(|(index, (&v, &cum))| ScreeEntry {
            index,
            ratio: if total > 0.0 { v / total } else if index == 0 { 1.0 } else { 0.0 },
            cumulative_ratio: cum,
        })
        .collect()
}

/// Rank series by `|score|`: descending for `Top`, ascending for `Bottom`.
///
/// Ties break by id. `threshold` keeps `|score| >= threshold` in `Top` mode and
/// `|score| <= threshold` in `Bottom` mode.
pub fn top_k_series(scores: &[(String, f64)], k: usize, mode: InfluenceMode, threshold: Option<f64>) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut ranked: Vec<&(String, f64)> = scores
        .iter()
        .filter(|(_, s)| match (threshold, mode) {
            (None, _) => true,
            (Some(th), InfluenceMode::Top) => s.abs() >= th,
            (Some(th), InfluenceMode::Bottom) => s.abs() <= th,
        })
        .collect();
    ranked.sort_by(|a, b| {
        let by_score = match mode {
            InfluenceMode::Top => b.1.abs().total_cmp(&a.1.abs()),
            InfluenceMode::Bottom => a.1.abs().total_cmp(&b.1.abs()),
        };
        by_score.then_with(|| a.0.cmp(&b.0))
    });
    Ok(ranked.into_iter().take(k).map(|(id, _)| id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::basis::{build_basis, BasisSpec};
    use crate::fpca::smooth::smooth_curve;

    fn grid(t: usize) -> Vec<f64> {
        (0..t).map(|i| i as f64 / (t - 1) as f64).collect()
    }

    fn s(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(a, b)| (a.to_string(), *b)).collect()
    }

    #[test]
    fn top_k_ordering() {
        let sc = s(&[("A", 5.0), ("B", -7.0), ("C", 1.0)]);
        assert_eq!(top_k_series(&sc, 2, InfluenceMode::Top, None).unwrap(), vec!["B", "A"]);
        assert_eq!(top_k_series(&sc, 10, InfluenceMode::Top, None).unwrap(), vec!["B", "A", "C"]);
        assert_eq!(top_k_series(&sc, 1, InfluenceMode::Bottom, None).unwrap(), vec!["C"]);
        assert_eq!(top_k_series(&sc, 3, InfluenceMode::Top, Some(4.0)).unwrap(), vec!["B", "A"]);
        assert!(top_k_series(&sc, 0, InfluenceMode::Top, None).is_err());
        let tie = s(&[("b", 1.0), ("a", -1.0)]);
        assert_eq!(top_k_series(&tie, 2, InfluenceMode::Top, None).unwrap(), vec!["a", "b"]);
    }

    fn model_with(eigenvalues: Vec<f64>) -> FpcaModel {
        let mut acc = 0.0;
        let total: f64 = eigenvalues.iter().sum();
        let explained_ratio = eigenvalues.iter().map(|v| { acc += v; acc / total }).collect();
        FpcaModel {
            series_ids: vec![],
            mean_coefficients: DVector::zeros(1),
            fpcs: eigenvalues.iter().map(|_| DVector::zeros(1)).collect(),
            eigenvalues,
            explained_ratio,
            scores: vec![],
            gram: DMatrix::identity(1, 1),
        }
    }

    #[test]
    fn scree_values() {
        let sc = scree(&model_with(vec![9.0, 1.0]), 10);
        assert_eq!(sc.iter().map(|e| e.cumulative_ratio).collect::<Vec<_>>(), vec![0.9, 1.0]);
        assert_eq!(sc[0].ratio, 0.9);
        let one = scree(&model_with(vec![3.0]), 10);
        assert_eq!(one[0].cumulative_ratio, 1.0);
    }

    #[test]
    fn duplicate_curves_have_zero_variance() {
        let t = grid(30);
        let b = build_basis(&BasisSpec::default(), &t).unwrap();
        let y: Vec<f64> = t.iter().map(|x| x * x).collect();
        let c = smooth_curve("a", &y, &b, 1e-4).unwrap();
        let mut c2 = c.clone();
        c2.series_id = "b".into();
        let m = fit_fpca(&[c, c2], &b).unwrap();
        assert_eq!(m.n_components(), 1);
        assert!(m.eigenvalues.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(*m.explained_ratio.last().unwrap(), 1.0);
        let p = perturbation_curves(&m, &b, 0).unwrap();
        assert_eq!(p.plus_curve, p.mean_curve);
        assert_eq!(p.minus_curve, p.mean_curve);
    }

    #[test]
    fn needs_two_curves() {
        let t = grid(30);
        let b = build_basis(&BasisSpec::default(), &t).unwrap();
        let c = smooth_curve("a", &t, &b, 1e-4).unwrap();
        assert!(fit_fpca(&[c], &b).is_err());
    }

    #[test]
    fn basis_mismatch() {
        let t = grid(30);
        let b = build_basis(&BasisSpec::default(), &t).unwrap();
        let curves: Vec<SmoothedCurve> =
            (0..3).map(|i| smooth_curve(&format!("s{i}"), &t.iter().map(|x| x * i as f64).collect::<Vec<_>>(), &b, 1e-4).unwrap()).collect();
        let m = fit_fpca(&curves, &b).unwrap();
        let bad = SmoothedCurve { series_id: "x".into(), coefficients: vec![0.0; 5], lambda: 0.0 };
        assert!(fpc_scores(&m, &[bad]).is_err());
        assert!(perturbation_curves(&m, &b, 99).is_err());
    }
}
