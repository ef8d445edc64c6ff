//! Smoothing and functional principal component analysis for a selection of series.

pub mod basis;
pub mod model;
pub mod smooth;

use serde::{Deserialize, Serialize};

pub use basis::{build_basis, Basis, BasisKind, BasisSpec};
pub use model::{fit_fpca, fpc_scores, perturbation_curves, scree, top_k_series, FpcaModel, InfluenceMode, PerturbationCurves, ScreeEntry};
pub use smooth::{default_lambda_grid, select_lambda_gcv, smooth_curve, SmoothedCurve, Smoother};

use crate::error::{Error, Result};

/// How the smoothing parameter is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum LambdaChoice {
    Fixed { lambda: f64 },
    Gcv {
        #[serde(default = "default_lambda_grid")]
        grid: Vec<f64>,
    },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Gcv { grid: default_lambda_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpcaConfig {
    pub basis: BasisSpec,
    pub lambda: LambdaChoice,
    /// Components surfaced to clients by default.
    pub shown_components: usize,
}

impl Default for FpcaConfig {
    fn default() -> Self {
        FpcaConfig { basis: BasisSpec::default(), lambda: LambdaChoice::default(), shown_components: 3 }
    }
}

impl FpcaConfig {
    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        match &self.lambda {
            LambdaChoice::Fixed { lambda } if !(*lambda >= 0.0) => {
                Err(Error::Config(format!("lambda must be >= 0, got {lambda}")))
            }
            LambdaChoice::Gcv { grid } if grid.is_empty() => Err(Error::Config("GCV grid is empty".into())),
            _ => Ok(()),
        }
    }
}

/// Everything the drill-down views need from one FPCA run.
#[derive(Debug, Clone)]
pub struct FpcaRun {
    pub basis: Basis,
    pub lambda: f64,
    pub curves: Vec<SmoothedCurve>,
    pub model: FpcaModel,
}

impl FpcaRun {
    pub fn perturbation(&self, j: usize) -> Result<PerturbationCurves> {
        perturbation_curves(&self.model, &self.basis, j)
    }

    pub fn top_k(&self, component: usize, k: usize, mode: InfluenceMode, threshold: Option<f64>) -> Result<Vec<String>> {
        top_k_series(&self.model.component_scores(component)?, k, mode, threshold)
    }
}

/// Smooth the selected rows and fit FPCA on the result.
pub fn run_fpca(ids: &[String], rows: &[&[f64]], sample_times: &[f64], config: &FpcaConfig) -> Result<FpcaRun> {
    config.validate()?;
    if ids.len() < 2 {
        return Err(Error::InvalidOperation(format!("FPCA needs at least 2 series, got {}", ids.len())));
    }
    let basis = build_basis(&config.basis, sample_times)?;
    let lambda = match &config.lambda {
        LambdaChoice::Fixed { lambda } => *lambda,
        LambdaChoice::Gcv { grid } => select_lambda_gcv(rows, &basis, grid)?,
    };
    let smoother = Smoother::new(&basis, lambda)?;
    let curves = ids.iter().zip(rows).map(|(id, y)| smoother.fit(id, y)).collect::<Result<Vec<_>>>()?;
    let model = fit_fpca(&curves, &basis)?;
    Ok(FpcaRun { basis, lambda, curves, model })
}
