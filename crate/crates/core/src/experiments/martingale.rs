//! Residual of the martingale problem for `G(x) = exp(-x)`:
//! `E G(<Y_t, f>) - G(<Y_0, f>) - E int_0^t L G(<Y_s, f>) ds`, where for a
//! staircase measure with atoms `m_i` at levels `q_i`
//! `L G = exp(-<Y, f>) sum_i m_i [phi_0(f_i) - Psi(q_i, f)]`.

use serde::{Deserialize, Serialize};

use super::laplace::TestFunction;
use super::runner::run_replicas;
use super::stats::{z_score, Estimate};
use super::RunContext;
use crate::error::{Error, Result};
use crate::flowsim::{FlowEvent, FlowKernel, LevelGrid, Observer, SeedSpec, DEFAULT_EVENT_CAP};
use crate::mechanisms::{build_discrete_family, MechanismFamily};

/// Fewest replicas accepted for path-integral estimates.
pub const MIN_PATH_REPLICAS: usize = 10_000;

/// Normal quantile for two-sided 95% confidence intervals.
pub const CI_QUANTILE: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpec {
    pub k_list: Vec<u32>,
    pub levels: Vec<f64>,
    pub initial: Vec<f64>,
    pub t: f64,
    pub test: TestFunction,
    pub replicas: usize,
    /// `C` in the prelimit slack `C / k`.
    pub slack: f64,
    pub theta_cells: usize,
}

/// `phi_0(f_i) - Psi(q_i, f)` for the level test function `f`; the theta
/// integrals are exact because `f` is constant on each `(q_{j-1}, q_j]`.
pub fn generator_coefficients(target: &MechanismFamily, levels: &[f64], f: &TestFunction) -> Vec<f64> {
    let h = |x: f64| target.h_profile().integral(x);
    let g = |x: f64| target.gamma_profile().integral(x);
    let n = levels.len();
    // Suffix of the theta integral over (q_i, 1].
    let mut tail = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let (lo, hi) = (levels[i], levels[i + 1]);
        let y = f.heights[i + 1];
        tail[i] = tail[i + 1] + y * (h(hi) - h(lo)) + target.saturation(y) * (g(hi) - g(lo));
    }
    (0..n)
        .map(|i| {
            let y = f.heights[i];
            let psi = y * h(levels[i]) + target.saturation(y) * g(levels[i]) + tail[i];
            target.base().phi(y) - psi
        })
        .collect()
}

/// Accumulates `int_0^t L G ds` along a path.
struct GeneratorIntegral<'a> {
    heights: &'a [f64],
    coeffs: &'a [f64],
    k: f64,
    pairing: f64,
    rate: f64,
    last: f64,
    integral: f64,
    start: f64,
}

impl GeneratorIntegral<'_> {
    fn set(&mut self, counts: &[u64]) {
        let mut prev = 0u64;
        let (mut a, mut b) = (0.0, 0.0);
        for ((h, c), &x) in self.heights.iter().zip(self.coeffs).zip(counts) {
            let m = (x - prev) as f64 / self.k;
            a += h * m;
            b += c * m;
            prev = x;
        }
        self.pairing = a;
        self.rate = (-a).exp() * b;
    }

    fn advance(&mut self, to: f64) {
        self.integral += self.rate * (to - self.last);
        self.last = to;
    }
}

impl Observer for GeneratorIntegral<'_> {
    fn on_start(&mut self, counts: &[u64]) {
        self.set(counts);
        self.start = self.pairing;
    }
    fn on_event(&mut self, event: &FlowEvent, counts: &[u64]) {
        self.advance(event.time);
        self.set(counts);
    }
    fn on_finish(&mut self, horizon: f64, _counts: &[u64]) {
        self.advance(horizon);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub k: u32,
    pub sigma: f64,
    pub master_seed: u64,
    pub residual: f64,
    pub std_error: f64,
    pub ci_half_width: f64,
    pub replicas: usize,
    pub z_score: f64,
    /// `3 CI + C / k`.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub family: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub t: f64,
    pub test: String,
    pub slack: f64,
    pub coefficients: Vec<f64>,
    pub rows: Vec<MartingaleRow>,
    /// `|residual|` nonincreasing in `k` up to twice the pooled standard error.
    pub trend_nonincreasing: bool,
    pub pass: bool,
}

/// Per-replica residual samples for one `k`.
pub fn residual_samples(
    target: &MechanismFamily,
    k: u32,
    spec: &MartingaleSpec,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<(f64, Vec<f64>)> {
    let grid = LevelGrid::new(spec.levels.clone())?;
    if spec.test.heights.len() != spec.levels.len() || spec.initial.len() != spec.levels.len() {
        return Err(Error::GridMismatch {
            expected: spec.levels.len(),
            found: spec.test.heights.len().min(spec.initial.len()),
        });
    }
    let coeffs = generator_coefficients(target, &spec.levels, &spec.test);
    let (family, sigma) = build_discrete_family(target, k)?;
    let kernel = FlowKernel::new(&family, &grid, f64::from(k), spec.theta_cells)?;
    let x0: Vec<u64> = spec
        .initial
        .iter()
        .map(|y| (f64::from(k) * y * (1.0 + 1e-12)).floor() as u64)
        .collect();
    let samples = run_replicas(master_seed, spec.replicas, workers, |seed| {
        if spec.t == 0.0 || spec.test.is_zero() {
            return Ok(0.0);
        }
        let mut obs = GeneratorIntegral {
            heights: &spec.test.heights,
            coeffs: &coeffs,
            k: f64::from(k),
            pairing: 0.0,
            rate: 0.0,
            last: 0.0,
            integral: 0.0,
            start: 0.0,
        };
        kernel.run(&x0, spec.t, seed, DEFAULT_EVENT_CAP, &mut obs)?;
        Ok((-obs.pairing).exp() - (-obs.start).exp() - obs.integral)
    })?;
    Ok((sigma, samples))
}

/// Estimates the residual for every `k`.
pub fn martingale_residual(
    target: &MechanismFamily,
    label: &str,
    spec: &MartingaleSpec,
    ctx: &RunContext,
) -> Result<MartingaleReport> {
    if spec.replicas < MIN_PATH_REPLICAS {
        return Err(Error::InsufficientReplicas {
            got: spec.replicas,
            need: MIN_PATH_REPLICAS,
        });
    }
    if !(spec.t >= 0.0 && spec.t.is_finite()) {
        return Err(Error::Domain {
            what: "time",
            value: spec.t,
        });
    }
    let mut ks = spec.k_list.clone();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::input("k list must be nonempty and positive"));
    }
    let mut rows = Vec::new();
    for &k in &ks {
        let seed = SeedSpec::derive_master(ctx.master_seed, u64::from(k));
        let (sigma, samples) = residual_samples(target, k, spec, seed, ctx.workers)?;
        let e = Estimate::from_samples(&samples);
        let ci = CI_QUANTILE * e.std_error;
        let tolerance = 3.0 * ci + spec.slack / f64::from(k);
        rows.push(MartingaleRow {
            k,
            sigma,
            master_seed: seed,
            residual: e.mean,
            std_error: e.std_error,
            ci_half_width: ci,
            replicas: e.n,
            z_score: z_score(e.mean, e.std_error),
            tolerance,
            pass: e.mean.abs() <= tolerance,
        });
    }
    let trend_nonincreasing = rows.windows(2).all(|w| {
        let noise = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        w[1].residual.abs() <= w[0].residual.abs() + 2.0 * noise
    });
    let pass = trend_nonincreasing && rows.iter().all(|r| r.pass);
    Ok(MartingaleReport {
        family: label.to_string(),
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
        t: spec.t,
        test: spec.test.id.clone(),
        slack: spec.slack,
        coefficients: generator_coefficients(target, &spec.levels, &spec.test),
        rows,
        trend_nonincreasing,
        pass,
    })
}
