//! Synthetic panels with central, magnitude-outlier and shape-outlier clusters.
//!
//! Every series is sampled on `t = 0, 1, ..., T-1` with phase `u = t / T`.
//!
//! * central: `sin(2πu) + ε`
//! * magnitude: `sin(2πu) ± c + ε`, signs alternating `+, -, +, ...`
//! * shape: `sin(2πu) + c·sin(4πu) + ε`, a doubled-frequency oscillation
//!   whose time average matches the base curve
//!
//! with `ε ~ N(0, noise_sd²)` and `c = 5 · noise_sd · √T`.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::RawPanel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_central: usize,
    pub n_magnitude_outliers: usize,
    pub n_shape_outliers: usize,
    pub t_points: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(n_central: usize, n_magnitude: usize, n_shape: usize, t_points: usize, noise_sd: f64, seed: u64) -> Self {
        ScenarioSpec {
            n_central,
            n_magnitude_outliers: n_magnitude,
            n_shape_outliers: n_shape,
            t_points,
            noise_sd,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.n_central + self.n_magnitude_outliers + self.n_shape_outliers
    }

    /// Offset (and shape amplitude) `5 · noise_sd · √T`.
    pub fn outlier_scale(&self) -> f64 {
        5.0 * self.noise_sd * (self.t_points as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Central,
    Magnitude,
    Shape,
}

impl Archetype {
    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Central => "central",
            Archetype::Magnitude => "magnitude",
            Archetype::Shape => "shape",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub panel: RawPanel,
    /// Ground truth, aligned with `panel.series_ids()`.
    pub labels: Vec<Archetype>,
}

impl Scenario {
    pub fn ids_of(&self, kind: Archetype) -> Vec<String> {
        self.panel
            .series_ids()
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == kind)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn write_labels<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "label"]).map_err(|e| Error::Io(e.to_string()))?;
        for (id, l) in self.panel.series_ids().iter().zip(&self.labels) {
            w.write_record([id.as_str(), l.as_str()]).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Base curve shared by all clusters.
pub fn base_curve(t_points: usize) -> Vec<f64> {
    (0..t_points).map(|t| (2.0 * PI * t as f64 / t_points as f64).sin()).collect()
}

/// One central-cluster series drawn from `rng`.
pub fn central_series<R: rand::Rng>(t_points: usize, noise_sd: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, noise_sd.max(0.0)).expect("valid sd");
    base_curve(t_points).into_iter().map(|b| b + noise.sample(rng)).collect()
}

pub fn generate_synthetic(spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.total() < 3 {
        return Err(Error::Config(format!("scenario needs at least 3 series, got {}", spec.total())));
    }
    if spec.t_points == 0 {
        return Err(Error::Config("scenario needs at least one time point".into()));
    }
    if !(spec.noise_sd >= 0.0) || !spec.noise_sd.is_finite() {
        return Err(Error::Config(format!("noise_sd must be finite and >= 0, got {}", spec.noise_sd)));
    }
    let t = spec.t_points;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.outlier_scale();
    let base = base_curve(t);
    let double: Vec<f64> = (0..t).map(|i| (4.0 * PI * i as f64 / t as f64).sin()).collect();

    let mut ids = Vec::with_capacity(spec.total());
    let mut rows = Vec::with_capacity(spec.total());
    let mut labels = Vec::with_capacity(spec.total());
    for i in 0..spec.n_central {
        ids.push(format!("c{i}"));
        rows.push(central_series(t, spec.noise_sd, &mut rng));
        labels.push(Archetype::Central);
    }
    for i in 0..spec.n_magnitude_outliers {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let row = central_series(t, spec.noise_sd, &mut rng).into_iter().map(|v| v + sign * c).collect();
        ids.push(format!("m{i}"));
        rows.push(row);
        labels.push(Archetype::Magnitude);
    }
    for i in 0..spec.n_shape_outliers {
        let noisy = central_series(t, spec.noise_sd, &mut rng);
        let row = noisy.iter().zip(&base).zip(&double).map(|((v, b), d)| b + c * d + (v - b)).collect();
        ids.push(format!("h{i}"));
        rows.push(row);
        labels.push(Archetype::Shape);
    }
    let ts = (0..t).map(|i| i as f64).collect();
    Ok(Scenario { panel: RawPanel::new(ids, rows, ts)?, labels })
}

/// Two-mode functional sample on `[0, 1]`:
/// `x_i(u) = a_i·√2·sin(2πu) + b_i·√2·cos(2πu) + ε` with `a_i ~ N(0, 2²)`,
/// `b_i ~ N(0, 1)` and `ε ~ N(0, noise_sd²)`, sampled at `u = t / (T - 1)`.
pub fn two_mode_panel(n_series: usize, t_points: usize, noise_sd: f64, seed: u64) -> Result<RawPanel> {
    if n_series < 2 || t_points < 2 {
        return Err(Error::Config("two-mode panel needs at least 2 series and 2 time points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Normal::new(0.0, 2.0).expect("valid sd");
    let b = Normal::new(0.0, 1.0).expect("valid sd");
    let noise = Normal::new(0.0, noise_sd.max(0.0)).expect("valid sd");
    let ts: Vec<f64> = (0..t_points).map(|t| t as f64 / (t_points - 1) as f64).collect();
    let rows = (0..n_series)
        .map(|_| {
            let (ai, bi) = (a.sample(&mut rng), b.sample(&mut rng));
            ts.iter()
                .map(|u| {
                    let w = 2.0 * PI * u;
                    ai * 2f64.sqrt() * w.sin() + bi * 2f64.sqrt() * w.cos() + noise.sample(&mut rng)
                })
                .collect()
        })
        .collect();
    RawPanel::new((0..n_series).map(|i| format!("s{i}")).collect(), rows, ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::OutlyingnessState;

    #[test]
    fn all_central() {
        let s = generate_synthetic(&ScenarioSpec::new(10, 0, 0, 100, 0.1, 42)).unwrap();
        assert_eq!(s.panel.n_series(), 10);
        assert!(s.labels.iter().all(|l| *l == Archetype::Central));
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = ScenarioSpec::new(5, 2, 2, 50, 0.2, 7);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.panel, b.panel);
        let c = generate_synthetic(&ScenarioSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.panel, c.panel);
    }

    #[test]
    fn too_small() {
        assert!(generate_synthetic(&ScenarioSpec::new(1, 1, 0, 10, 0.1, 0)).is_err());
    }

    fn top2<F: Fn(&crate::engine::Outlyingness) -> f64>(s: &Scenario, key: F) -> Vec<String> {
        let st = OutlyingnessState::batch_fit(&s.panel, 1).unwrap();
        let mut v: Vec<(String, f64)> = s.panel.series_ids().iter().cloned().zip(st.iter().map(|o| key(&o))).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut ids: Vec<String> = v.into_iter().take(2).map(|x| x.0).collect();
        ids.sort();
        ids
    }

    #[test]
    fn magnitude_outliers_lead_mo() {
        let s = generate_synthetic(&ScenarioSpec::new(20, 2, 0, 100, 0.1, 3)).unwrap();
        assert_eq!(top2(&s, |o| o.mo.abs()), s.ids_of(Archetype::Magnitude));
    }

    #[test]
    fn shape_outliers_lead_vo() {
        let s = generate_synthetic(&ScenarioSpec::new(20, 0, 2, 100, 0.1, 3)).unwrap();
        assert_eq!(top2(&s, |o| o.vo()), s.ids_of(Archetype::Shape));
    }

    #[test]
    fn two_mode_is_seeded() {
        let a = two_mode_panel(5, 20, 0.01, 1).unwrap();
        assert_eq!(a, two_mode_panel(5, 20, 0.01, 1).unwrap());
        assert_eq!(a.timestamps()[19], 1.0);
        assert!(two_mode_panel(1, 20, 0.01, 1).is_err());
    }

    #[test]
    fn shape_outliers_keep_mean() {
        let t = 64;
        let s = generate_synthetic(&ScenarioSpec::new(3, 0, 1, t, 0.0, 1)).unwrap();
        let row = s.panel.series("h0").unwrap();
        let mean: f64 = row.iter().sum::<f64>() / t as f64;
        assert!(mean.abs() < 1e-12);
    }
}
