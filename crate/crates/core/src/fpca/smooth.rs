//! Penalized least-squares smoothing and GCV selection of the smoothing parameter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCurve {
    pub series_id: String,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

/// Default GCV grid: 10^-6 .. 10^6, one point per decade.
pub fn default_lambda_grid() -> Vec<f64> {
    (-6..=6).map(|e| 10f64.powi(e)).collect()
}

/// Factorized system `(EᵀE + λP) c = Eᵀy` for one basis and λ.
pub struct Smoother<'a> {
    basis: &'a Basis,
    lambda: f64,
    chol: Cholesky<f64, Dyn>,
    et: DMatrix<f64>,
}

impl<'a> Smoother<'a> {
    pub fn new(basis: &'a Basis, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let e = &basis.eval_matrix;
        let et = e.transpose();
        let system = &et * e + &basis.penalty_matrix * lambda;
        let chol = system.cholesky().ok_or_else(|| {
            Error::Singular(format!("normal equations not positive definite at lambda = {lambda}"))
        })?;
        Ok(Smoother { basis, lambda, chol, et })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficients(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.basis.sample_times.len() {
            return Err(Error::LengthMismatch { expected: self.basis.sample_times.len(), actual: y.len() });
        }
        let rhs = &self.et * DVector::from_column_slice(y);
        Ok(self.chol.solve(&rhs))
    }

    pub fn fit(&self, series_id: &str, y: &[f64]) -> Result<SmoothedCurve> {
        let c = self.coefficients(y)?;
        Ok(SmoothedCurve { series_id: series_id.to_string(), coefficients: c.iter().copied().collect(), lambda: self.lambda })
    }

    /// Residual sum of squares of the fit to `y`.
    pub fn rss(&self, y: &[f64]) -> Result<f64> {
        let c = self.coefficients(y)?;
        let fitted = &self.basis.eval_matrix * c;
        Ok(y.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// Effective degrees of freedom: trace of the smoother matrix.
    pub fn df(&self) -> f64 {
        let ete = &self.et * &self.basis.eval_matrix;
        self.chol.solve(&ete).trace()
    }
}

/// Smooth one series with a fixed λ.
pub fn smooth_curve(series_id: &str, y: &[f64], basis: &Basis, lambda: f64) -> Result<SmoothedCurve> {
    Smoother::new(basis, lambda)?.fit(series_id, y)
}

/// Mean GCV score `(RSS/T) / (1 - df/T)^2` over a set of series.
pub fn gcv_score(series: &[&[f64]], basis: &Basis, lambda: f64) -> Result<f64> {
    let s = Smoother::new(basis, lambda)?;
    let t = basis.sample_times.len() as f64;
    let denom = (1.0 - s.df() / t).powi(2);
    if denom <= 0.0 || series.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut total = 0.0;
    for y in series {
        total += s.rss(y)? / t / denom;
    }
    Ok(total / series.len() as f64)
}

/// Grid λ with the smallest mean GCV; ties go to the smaller λ.
///
/// Grid points whose system is singular are skipped.
pub fn select_lambda_gcv(series: &[&[f64]], basis: &Basis, grid: &[f64]) -> Result<f64> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() == 1 {
        return Ok(sorted[0]);
    }
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &sorted {
        let score = match gcv_score(series, basis, lambda) {
            Ok(s) => s,
            Err(Error::Singular(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((lambda, score));
        }
    }
    best.map(|(l, _)| l)
        .ok_or_else(|| Error::Singular("no lambda in the grid gives a solvable system".into()))
}
