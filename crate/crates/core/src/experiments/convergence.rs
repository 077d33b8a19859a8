//! Convergence of rescaled flows to the superprocess, measured through joint
//! Laplace functionals of step test functions.

use serde::{Deserialize, Serialize};

use super::laplace::{LaplaceEstimate, TestFunction};
use super::runner::run_replicas;
use super::stats::{spearman, z_score};
use super::RunContext;
use crate::cumulant::{laplace_prediction, solve_nonlocal_cumulant, OdeConfig, UnitGrid};
use crate::error::{Error, Result};
use crate::flowsim::{FlowKernel, LevelGrid, SeedSpec, Snapshots, DEFAULT_EVENT_CAP};
use crate::mechanisms::{build_discrete_family, DiscreteFlowFamily, MechanismFamily};

/// Inputs of a convergence experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub k_list: Vec<u32>,
    /// Level grid; the top level must be 1.
    pub levels: Vec<f64>,
    /// Target initial staircase `Y_0(q_i)`.
    pub initial: Vec<f64>,
    /// Observation times, ascending.
    pub times: Vec<f64>,
    pub tests: Vec<TestFunction>,
    pub replicas: usize,
    /// `C` in the prelimit slack `C / k`.
    pub slack: f64,
    /// Intervals of the solver grid; every level must be a node.
    pub grid_intervals: usize,
    pub theta_cells: usize,
    pub ode: OdeConfig,
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<LevelGrid> {
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::input("k list must be nonempty and positive"));
        }
        let grid = LevelGrid::new(self.levels.clone())?;
        if !grid.reaches_one() {
            return Err(Error::input("the top level must be 1"));
        }
        if self.initial.len() != self.levels.len() {
            return Err(Error::GridMismatch {
                expected: self.levels.len(),
                found: self.initial.len(),
            });
        }
        if self.initial.iter().any(|y| !(*y >= 0.0)) || self.initial.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::input("initial staircase must be nonnegative and nondecreasing"));
        }
        if self.times.is_empty()
            || self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
            || self.times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::input("times must be finite, nonnegative and strictly increasing"));
        }
        for f in &self.tests {
            if f.heights.len() != self.levels.len() {
                return Err(Error::GridMismatch {
                    expected: self.levels.len(),
                    found: f.heights.len(),
                });
            }
        }
        if !(self.slack >= 0.0) {
            return Err(Error::Domain {
                what: "slack",
                value: self.slack,
            });
        }
        Ok(grid)
    }

    /// `floor(k Y_0(q_i))`, guarded against representation error just below
    /// an integer.
    pub fn initial_counts(&self, k: u32) -> Vec<u64> {
        self.initial
            .iter()
            .map(|y| (f64::from(k) * y * (1.0 + 1e-12)).floor() as u64)
            .collect()
    }

    fn initial_masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.initial
            .iter()
            .map(|&y| {
                let m = y - prev;
                prev = y;
                m
            })
            .collect()
    }
}

/// One `(k, t, f)` comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: u32,
    pub t: f64,
    pub test: String,
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub oracle: f64,
    pub gap: f64,
    pub z_score: f64,
    /// Allowed gap: `3 SE + C / k`, or the rounding bound at `t = 0`.
    pub tolerance: f64,
    pub pass: bool,
}

/// The k-trend of the gaps for one `(t, f)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendRow {
    pub t: f64,
    pub test: String,
    pub k: Vec<u32>,
    pub gaps: Vec<f64>,
    pub spearman: f64,
    /// Gaps nonincreasing in `k` up to twice the pooled standard error.
    pub nonincreasing: bool,
}

/// Per-k facts about the discretized family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelInfo {
    pub k: u32,
    pub sigma: f64,
    pub master_seed: u64,
    /// `sigma_k [g_k'(1) - 1 + b_k(0)]` with `g_k` the law at `theta = k`.
    pub tightness: f64,
    pub initial_counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub family: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub slack: f64,
    pub levels: Vec<LevelInfo>,
    pub rows: Vec<ConvergenceRow>,
    pub trends: Vec<TrendRow>,
    pub pass: bool,
}

/// Oracle `exp(-<Y_0, V_t f>)` for every `(t, f)`, indexed `[t][f]`.
pub fn convergence_oracles(target: &MechanismFamily, spec: &ConvergenceSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let grid = UnitGrid::new(spec.grid_intervals)?;
    let masses = spec.initial_masses();
    spec.times
        .iter()
        .map(|&t| {
            spec.tests
                .iter()
                .map(|f| {
                    let g = f.grid_function(grid, &spec.levels)?;
                    let v = solve_nonlocal_cumulant(target, &g, t, &spec.ode)?;
                    laplace_prediction(&spec.levels, &masses, &v)
                })
                .collect()
        })
        .collect()
}

/// Per-replica samples of `exp(-<Y_t, f>)` for one discretized family,
/// indexed `[t][f][replica]`.
pub fn laplace_samples(
    family: &DiscreteFlowFamily,
    k: u32,
    spec: &ConvergenceSpec,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let grid = spec.validate()?;
    let kernel = FlowKernel::new(family, &grid, f64::from(k), spec.theta_cells)?;
    let x0 = spec.initial_counts(k);
    let horizon = spec.times[spec.times.len() - 1];
    let kf = f64::from(k);
    let per_replica = run_replicas(master_seed, spec.replicas, workers, |seed: SeedSpec| {
        let counts = if horizon > 0.0 {
            let mut snaps = Snapshots::new(spec.times.clone());
            kernel.run(&x0, horizon, seed, DEFAULT_EVENT_CAP, &mut snaps)?;
            snaps.values
        } else {
            vec![x0.clone(); spec.times.len()]
        };
        Ok(counts
            .iter()
            .map(|c| spec.tests.iter().map(|f| (-f.pair_counts(c, kf)).exp()).collect::<Vec<f64>>())
            .collect::<Vec<_>>())
    })?;
    Ok((0..spec.times.len())
        .map(|ti| {
            (0..spec.tests.len())
                .map(|fi| per_replica.iter().map(|r| r[ti][fi]).collect())
                .collect()
        })
        .collect())
}

/// Builds the discrete family for every `k`, simulates, and compares the
/// Laplace functionals with the nonlocal cumulant oracle.
pub fn convergence_experiment(
    target: &MechanismFamily,
    label: &str,
    spec: &ConvergenceSpec,
    ctx: &RunContext,
) -> Result<ConvergenceReport> {
    spec.validate()?;
    let oracles = convergence_oracles(target, spec)?;
    let mut ks = spec.k_list.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    for &k in &ks {
        let (family, sigma) = build_discrete_family(target, k)?;
        let seed = SeedSpec::derive_master(ctx.master_seed, u64::from(k));
        let top = family.law_at(f64::from(k))?;
        let tightness = sigma * (top.mean() - 1.0 + family.death_probability(0.0)?);
        let x0 = spec.initial_counts(k);
        log::info!("convergence: k = {k}, sigma = {sigma}, x0 = {x0:?}");
        let samples = laplace_samples(&family, k, spec, seed, ctx.workers)?;
        for (ti, &t) in spec.times.iter().enumerate() {
            for (fi, f) in spec.tests.iter().enumerate() {
                let est = LaplaceEstimate::from_samples(&samples[ti][fi])?;
                let oracle = oracles[ti][fi];
                let gap = (est.point_estimate - oracle).abs();
                let tolerance = if t == 0.0 {
                    let norm = f.heights.iter().fold(0.0, |a: f64, &b| a.max(b));
                    norm * spec.levels.len() as f64 / f64::from(k)
                } else {
                    3.0 * est.std_error + spec.slack / f64::from(k)
                };
                rows.push(ConvergenceRow {
                    k,
                    t,
                    test: f.id.clone(),
                    estimate: est.point_estimate,
                    std_error: est.std_error,
                    replicas: est.replicas,
                    oracle,
                    gap,
                    z_score: z_score(est.point_estimate - oracle, est.std_error),
                    tolerance,
                    pass: gap <= tolerance,
                });
            }
        }
        levels.push(LevelInfo {
            k,
            sigma,
            master_seed: seed,
            tightness,
            initial_counts: x0,
        });
    }
    if levels.len() >= 2 {
        let (first, last) = (&levels[0], &levels[levels.len() - 1]);
        if last.tightness > 1.5 * first.tightness.max(1e-12) {
            log::warn!(
                "sigma_k [g_k'(1) - 1 + b_k(0)] grows with k ({} at k = {}, {} at k = {}); \
                 the tightness hypothesis is not met by this discretization",
                first.tightness,
                first.k,
                last.tightness,
                last.k
            );
        }
    }
    let trends = trends(&rows, spec);
    let pass = rows.iter().all(|r| r.pass) && trends.iter().all(|t| t.nonincreasing);
    Ok(ConvergenceReport {
        family: label.to_string(),
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
        slack: spec.slack,
        levels,
        rows,
        trends,
        pass,
    })
}

fn trends(rows: &[ConvergenceRow], spec: &ConvergenceSpec) -> Vec<TrendRow> {
    let mut out = Vec::new();
    for &t in spec.times.iter().filter(|&&t| t > 0.0) {
        for f in &spec.tests {
            let sel: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.t == t && r.test == f.id).collect();
            let k: Vec<u32> = sel.iter().map(|r| r.k).collect();
            let gaps: Vec<f64> = sel.iter().map(|r| r.gap).collect();
            let nonincreasing = sel.windows(2).all(|w| {
                let noise = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
                w[1].gap <= w[0].gap + 2.0 * noise
            });
            let kf: Vec<f64> = k.iter().map(|&k| f64::from(k)).collect();
            out.push(TrendRow {
                t,
                test: f.id.clone(),
                spearman: if k.len() >= 2 { spearman(&kf, &gaps) } else { 0.0 },
                k,
                gaps,
                nonincreasing,
            });
        }
    }
    out
}
