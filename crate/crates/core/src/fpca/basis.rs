//! B-spline and Fourier bases with quadrature Gram and roughness-penalty matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample-grid refinement used for the Gram and penalty quadrature.
pub const QUADRATURE_REFINEMENT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisKind {
    Bspline { order: usize },
    Fourier,
}

impl Default for BasisKind {
    fn default() -> Self {
        BasisKind::Bspline { order: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub n_basis: usize,
    /// Defaults to the first and last sample time.
    pub domain: Option<(f64, f64)>,
    pub penalty_order: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec { kind: BasisKind::default(), n_basis: 12, domain: None, penalty_order: 2 }
    }
}

impl BasisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_basis < self.penalty_order + 2 {
            return Err(Error::Config(format!(
                "n_basis ({}) must be at least penalty_order + 2 ({})",
                self.n_basis,
                self.penalty_order + 2
            )));
        }
        match self.kind {
            BasisKind::Fourier if self.n_basis % 2 == 0 => {
                Err(Error::Config(format!("a Fourier basis needs an odd n_basis, got {}", self.n_basis)))
            }
            BasisKind::Bspline { order } if order < 1 || self.n_basis < order => Err(Error::Config(format!(
                "B-spline of order {order} needs 1 <= order <= n_basis ({})",
                self.n_basis
            ))),
            _ => Ok(()),
        }
    }
}

/// A basis evaluated on a sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub spec: BasisSpec,
    pub domain: (f64, f64),
    pub sample_times: Vec<f64>,
    /// T × n_basis
    pub eval_matrix: DMatrix<f64>,
    /// ∫ D^m φ_i D^m φ_j with m = penalty_order
    pub penalty_matrix: DMatrix<f64>,
    /// ∫ φ_i φ_j
    pub gram: DMatrix<f64>,
    knots: Vec<f64>,
}

impl Basis {
    pub fn n_basis(&self) -> usize {
        self.spec.n_basis
    }

    /// Row of basis function derivatives of order `deriv` at `x`.
    pub fn values_at(&self, x: f64, deriv: usize) -> Vec<f64> {
        match self.spec.kind {
            BasisKind::Bspline { order } => bspline_values(&self.knots, order, x, deriv),
            BasisKind::Fourier => fourier_values(self.spec.n_basis, self.domain, x, deriv),
        }
    }

    /// Evaluation matrix at arbitrary times.
    pub fn eval_at(&self, times: &[f64], deriv: usize) -> DMatrix<f64> {
        let k = self.n_basis();
        let mut m = DMatrix::zeros(times.len(), k);
        for (r, &x) in times.iter().enumerate() {
            for (c, v) in self.values_at(x, deriv).into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Evaluate an expansion on the sample grid.
    pub fn evaluate(&self, coefficients: &[f64]) -> Vec<f64> {
        let c = nalgebra::DVector::from_column_slice(coefficients);
        (&self.eval_matrix * c).iter().copied().collect()
    }

    /// Refined grid and trapezoid weights used for the quadrature matrices.
    pub fn quadrature_grid(&self) -> (Vec<f64>, Vec<f64>) {
        quadrature_grid(self.domain, self.sample_times.len())
    }
}

/// Evaluate `spec` on `sample_times` and assemble its Gram and penalty matrices.
pub fn build_basis(spec: &BasisSpec, sample_times: &[f64]) -> Result<Basis> {
    spec.validate()?;
    let t = sample_times.len();
    if t < spec.n_basis {
        return Err(Error::Config(format!(
            "need at least n_basis ({}) sample times, got {t}",
            spec.n_basis
        )));
    }
    let domain = match spec.domain {
        Some(d) => d,
        None => (sample_times[0], sample_times[t - 1]),
    };
    if !(domain.1 > domain.0) {
        return Err(Error::Config(format!("empty basis domain [{}, {}]", domain.0, domain.1)));
    }
    let knots = match spec.kind {
        BasisKind::Bspline { order } => clamped_knots(domain, spec.n_basis, order),
        BasisKind::Fourier => Vec::new(),
    };
    let mut basis = Basis {
        spec: *spec,
        domain,
        sample_times: sample_times.to_vec(),
        eval_matrix: DMatrix::zeros(0, 0),
        penalty_matrix: DMatrix::zeros(0, 0),
        gram: DMatrix::zeros(0, 0),
        knots,
    };
    basis.eval_matrix = basis.eval_at(sample_times, 0);
    let (grid, weights) = basis.quadrature_grid();
    basis.gram = weighted_cross(&basis.eval_at(&grid, 0), &weights);
    basis.penalty_matrix = weighted_cross(&basis.eval_at(&grid, spec.penalty_order), &weights);
    Ok(basis)
}

fn weighted_cross(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = m.clone();
    for (r, &wr) in w.iter().enumerate() {
        scaled.row_mut(r).scale_mut(wr);
    }
    let out = m.transpose() * scaled;
    // symmetrize away rounding
    (&out + out.transpose()) * 0.5
}

/// Evenly spaced grid with `REFINEMENT × (T - 1) + 1` points and trapezoid weights.
pub fn quadrature_grid(domain: (f64, f64), n_samples: usize) -> (Vec<f64>, Vec<f64>) {
    let m = QUADRATURE_REFINEMENT * n_samples.saturating_sub(1).max(1) + 1;
    let h = (domain.1 - domain.0) / (m - 1) as f64;
    let grid = (0..m).map(|i| if i + 1 == m { domain.1 } else { domain.0 + i as f64 * h }).collect();
    let mut w = vec![h; m];
    w[0] = h / 2.0;
    w[m - 1] = h / 2.0;
    (grid, w)
}

fn clamped_knots(domain: (f64, f64), n_basis: usize, order: usize) -> Vec<f64> {
    let interior = n_basis - order;
    let (a, b) = domain;
    let mut knots = vec![a; order];
    for i in 1..=interior {
        knots.push(a + (b - a) * i as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(b, order));
    knots
}

/// Cox-de Boor evaluation of every B-spline of `order` (and its derivative).
fn bspline_values(knots: &[f64], order: usize, x: f64, deriv: usize) -> Vec<f64> {
    let m = knots.len();
    let n_basis = m - order;
    if deriv >= order {
        return vec![0.0; n_basis];
    }
    let last = knots[m - 1];
    let mut v: Vec<f64> = (0..m - 1)
        .map(|i| {
            let (lo, hi) = (knots[i], knots[i + 1]);
            let inside = lo <= x && x < hi;
            // close the final non-empty interval on the right
            let right_end = x == last && hi == last && lo < hi;
            if inside || right_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    for j in 2..=order - deriv {
        v = (0..m - j)
            .map(|i| {
                ratio(x - knots[i], knots[i + j - 1] - knots[i]) * v[i]
                    + ratio(knots[i + j] - x, knots[i + j] - knots[i + 1]) * v[i + 1]
            })
            .collect();
    }
    for j in (order - deriv + 1)..=order {
        let scale = (j - 1) as f64;
        v = (0..m - j)
            .map(|i| {
                scale * (ratio(v[i], knots[i + j - 1] - knots[i]) - ratio(v[i + 1], knots[i + j] - knots[i + 1]))
            })
            .collect();
    }
    v
}

/// Orthonormal Fourier system on the domain: constant, then sin/cos pairs.
fn fourier_values(n_basis: usize, domain: (f64, f64), x: f64, deriv: usize) -> Vec<f64> {
    let (a, b) = domain;
    let len = b - a;
    let mut out = Vec::with_capacity(n_basis);
    out.push(if deriv == 0 { 1.0 / len.sqrt() } else { 0.0 });
    let amp = (2.0 / len).sqrt();
    let phase = deriv as f64 * PI / 2.0;
    for k in 1..=(n_basis - 1) / 2 {
        let w = 2.0 * PI * k as f64 / len;
        let arg = w * (x - a) + phase;
        let s = amp * w.powi(deriv as i32);
        out.push(s * arg.sin());
        out.push(s * arg.cos());
    }
    out
}
