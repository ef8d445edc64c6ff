use fdastream_core::fpca::{run_fpca, scree, FpcaConfig, FpcaRun, LambdaChoice};
use fdastream_core::ingestion::two_mode_panel;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn two_mode_run(n: usize, t: usize, sd: f64) -> FpcaRun {
    let panel = two_mode_panel(n, t, sd, 2024).unwrap();
    let rows: Vec<&[f64]> = panel.rows().iter().map(Vec::as_slice).collect();
    run_fpca(panel.series_ids(), &rows, panel.timestamps(), &FpcaConfig::default()).unwrap()
}

#[test]
fn two_modes_explain_nearly_everything() {
    let run = two_mode_run(40, 200, 0.01);
    assert!(run.model.explained_ratio[1] >= 0.99, "{:?}", run.model.explained_ratio);
    let s = scree(&run.model, 3);
    assert_eq!(s.len(), 3);
    assert!(s[0].ratio > s[1].ratio && s[1].ratio > s[2].ratio);
}

#[test]
fn components_are_orthonormal() {
    let run = two_mode_run(40, 200, 0.01);
    let w = &run.model.gram;
    for (i, bi) in run.model.fpcs.iter().enumerate() {
        for (j, bj) in run.model.fpcs.iter().enumerate() {
            let ip = (bi.transpose() * w * bj)[0];
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-8, "<{i},{j}> = {ip}");
        }
    }
}

#[test]
fn score_moments() {
    let run = two_mode_run(40, 200, 0.01);
    let n = run.model.scores.len() as f64;
    for (j, xi) in run.model.eigenvalues.iter().enumerate().take(4) {
        let col: Vec<f64> = run.model.scores.iter().map(|s| s[j]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-9 * xi.sqrt().max(1.0), "component {j} mean {mean}");
        assert!((var - xi).abs() <= 1e-6 * xi, "component {j}: {var} vs {xi}");
    }
}

#[test]
fn perturbation_is_mean_plus_minus_scaled_component() {
    let run = two_mode_run(20, 100, 0.01);
    for j in 0..3 {
        let p = run.perturbation(j).unwrap();
        let fpc = run.model.fpc_curve(&run.basis, j).unwrap();
        let m = (2.0 * run.model.eigenvalues[j]).sqrt();
        for t in 0..fpc.len() {
            assert_eq!(p.plus_curve[t], p.mean_curve[t] + m * fpc[t]);
            assert_eq!(p.minus_curve[t], p.mean_curve[t] - m * fpc[t]);
        }
    }
}

#[test]
fn rank_one_sample() {
    let t: Vec<f64> = (0..60).map(|i| i as f64 / 59.0).collect();
    let shape: Vec<f64> = t.iter().map(|u| (3.0 * u).exp() - 1.5).collect();
    let rows: Vec<Vec<f64>> = (0..8).map(|i| shape.iter().map(|v| (i as f64 - 3.5) * v).collect()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let ids: Vec<String> = (0..8).map(|i| format!("r{i}")).collect();
    let config = FpcaConfig { lambda: LambdaChoice::Fixed { lambda: 1e-8 }, ..Default::default() };
    let run = run_fpca(&ids, &refs, &t, &config).unwrap();
    assert!((run.model.explained_ratio[0] - 1.0).abs() < 1e-12);
    // ranking by |score| follows |i - 3.5|, ties broken by id
    let top = run.top_k(0, 8, fdastream_core::fpca::InfluenceMode::Top, None).unwrap();
    assert_eq!(top, ["r0", "r7", "r1", "r6", "r2", "r5", "r3", "r4"]);
}

/// Simpson weights on an odd-length uniform grid.
fn simpson(a: f64, b: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / (m - 1) as f64;
    let x = (0..m).map(|i| a + i as f64 * h).collect();
    let w = (0..m)
        .map(|i| {
            let c = if i == 0 || i == m - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            c * h / 3.0
        })
        .collect();
    (x, w)
}

#[test]
fn agrees_with_dense_grid_covariance() {
    let run = two_mode_run(25, 120, 0.05);
    let (x, w) = simpson(0.0, 1.0, 4001);
    let e = run.basis.eval_at(&x, 0);
    let n = run.curves.len();
    let curves: Vec<DVector<f64>> =
        run.curves.iter().map(|c| &e * DVector::from_column_slice(&c.coefficients)).collect();
    let mean = curves.iter().fold(DVector::zeros(x.len()), |acc, c| acc + c) / n as f64;
    let centered: Vec<DVector<f64>> = curves.iter().map(|c| c - &mean).collect();
    // dual covariance: K_ij = ∫ (x_i - m)(x_j - m) / (N - 1)
    let k = DMatrix::from_fn(n, n, |i, j| {
        centered[i].iter().zip(centered[j].iter()).zip(&w).map(|((a, b), w)| a * b * w).sum::<f64>() / (n - 1) as f64
    });
    let mut oracle: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().copied().collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    for j in 0..3 {
        let got = run.model.eigenvalues[j];
        assert!((got - oracle[j]).abs() <= 1e-4 * oracle[0], "xi_{j}: {got} vs {}", oracle[j]);
    }
}

#[test]
fn reconstruction_error_decreases_with_components() {
    let run = two_mode_run(30, 100, 0.1);
    let m = &run.model;
    let mut last = f64::INFINITY;
    for k in 0..=m.n_components() {
        // squared L2 norm of the residual function, via the Gram matrix
        let err: f64 = run
            .curves
            .iter()
            .zip(&m.scores)
            .map(|(c, s)| {
                let mut r = DVector::from_column_slice(&c.coefficients) - &m.mean_coefficients;
                for j in 0..k {
                    r -= &m.fpcs[j] * s[j];
                }
                (r.transpose() * &m.gram * &r)[0]
            })
            .sum();
        assert!(err <= last * (1.0 + 1e-9) + 1e-12, "k={k}: {err} > {last}");
        last = err;
    }
    assert!(last < 1e-10, "full reconstruction leaves {last}");
}
