//! Timing of the engine's update paths on synthetic panels.

use std::time::Instant;

use fdastream_core::engine::{OutlyingnessState, RawPanel};
use fdastream_core::ingestion::{generate_synthetic, ScenarioSpec};
use fdastream_core::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub t: usize,
    pub runs: usize,
    pub seed: u64,
}

/// Medians over `runs` repetitions, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: usize,
    pub t: usize,
    pub runs: usize,
    /// Batch fit of the N × T panel.
    pub initial_fit_s: f64,
    /// One exact time-point addition.
    pub partial_fit_s: f64,
    /// One series admitted against cached medians.
    pub approx_add_s: f64,
    /// Batch refit after the admissions.
    pub full_recompute_s: f64,
    /// `full_recompute_s / approx_add_s`.
    pub approx_speedup: f64,
}

pub fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn time<R>(f: impl FnOnce() -> R) -> (f64, R) {
    let start = Instant::now();
    let r = f();
    (start.elapsed().as_secs_f64(), r)
}

/// Gaussian-noise panel around a sine, `n` series by `t` points.
pub fn bench_panel(n: usize, t: usize, seed: u64) -> Result<RawPanel> {
    Ok(generate_synthetic(&ScenarioSpec::new(n.max(3), 0, 0, t, 1.0, seed))?.panel)
}

/// Median latency of `runs` exact time-point additions on an `n` × `t` state.
pub fn partial_fit_latencies(n: usize, t: usize, runs: usize, seed: u64) -> Result<Vec<f64>> {
    let mut panel = bench_panel(n, t, seed)?;
    let mut state = OutlyingnessState::batch_fit(&panel, 1)?;
    let extra = bench_panel(n, runs, seed ^ 0x9e37_79b9)?;
    (0..runs)
        .map(|r| {
            let column = extra.column(r);
            let (s, res) = time(|| state.add_time_point(&mut panel, None, &column));
            res.map(|_| s)
        })
        .collect()
}

/// Run every measurement on the calling thread.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let runs = config.runs.max(1);
    let panel = bench_panel(config.n, config.t, config.seed)?;

    let mut fit = Vec::with_capacity(runs);
    let mut state = None;
    for _ in 0..runs {
        let (s, st) = time(|| OutlyingnessState::batch_fit(&panel, 1));
        fit.push(s);
        state = Some(st?);
    }
    let mut state = state.expect("at least one run");
    let mut work = panel.clone();

    let mut partial = partial_fit_latencies(config.n, config.t, runs, config.seed)?;

    let donors = bench_panel(runs.max(3), config.t, config.seed.wrapping_add(1))?;
    let mut approx = Vec::with_capacity(runs);
    for r in 0..runs {
        let values = donors.row(r).to_vec();
        let id = format!("bench-new-{r}");
        let (s, res) = time(|| state.add_series_approx(&mut work, id, values));
        res?;
        approx.push(s);
    }

    let mut full = Vec::with_capacity(runs);
    for _ in 0..runs {
        let (s, res) = time(|| OutlyingnessState::batch_fit(&work, 2));
        res?;
        full.push(s);
    }

    let approx_add_s = median(&mut approx);
    let full_recompute_s = median(&mut full);
    Ok(BenchReport {
        n: config.n,
        t: config.t,
        runs,
        initial_fit_s: median(&mut fit),
        partial_fit_s: median(&mut partial),
        approx_add_s,
        full_recompute_s,
        approx_speedup: full_recompute_s / approx_add_s,
    })
}

/// Plain-text table of one or more reports.
pub fn format_table(reports: &[BenchReport]) -> String {
    let mut s = format!(
        "{:>8} {:>8} {:>5} {:>14} {:>14} {:>14} {:>14} {:>9}\n",
        "N", "T", "runs", "initial_fit_s", "partial_fit_s", "approx_add_s", "recompute_s", "speedup"
    );
    for r in reports {
        s.push_str(&format!(
            "{:>8} {:>8} {:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>9.1}\n",
            r.n, r.t, r.runs, r.initial_fit_s, r.partial_fit_s, r.approx_add_s, r.full_recompute_s, r.approx_speedup
        ));
    }
    s
}
