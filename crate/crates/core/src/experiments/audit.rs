//! Moment identities and distributional comparisons of simulated
//! populations.

use serde::Serialize;

use super::martingale::MIN_PATH_REPLICAS;
use super::runner::run_replicas;
use super::stats::{empirical_pgf, z_score, Estimate};
use crate::error::{Error, Result};
use crate::flowsim::{run_single, Snapshots, DEFAULT_EVENT_CAP};
use crate::mechanisms::OffspringLaw;

/// Standard errors allowed by every audit in this module.
pub const AUDIT_SE: f64 = 4.0;

/// Counts indexed `[time][replica]`.
pub type Samples = Vec<Vec<u64>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `X_0 exp(sigma (m - 1) t)`.
    pub expected: f64,
    pub z_score: f64,
    pub mean_pass: bool,
    pub sup_mean: f64,
    pub sup_std_error: f64,
    /// `X_0 exp(sigma m t)`.
    pub sup_bound: f64,
    pub sup_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentAudit {
    pub x0: u64,
    pub sigma: f64,
    pub mean_offspring: f64,
    pub replicas: usize,
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

/// Audits samples `values[t][replica]` and `sups[t][replica]` of a level
/// with initial count `x0`, rate `sigma` and offspring mean `m`.
pub fn moment_audit_samples(
    x0: u64,
    sigma: f64,
    m: f64,
    times: &[f64],
    values: &[Vec<u64>],
    sups: &[Vec<u64>],
) -> Result<MomentAudit> {
    let replicas = values.first().map_or(0, Vec::len);
    if replicas < MIN_PATH_REPLICAS {
        return Err(Error::InsufficientReplicas {
            got: replicas,
            need: MIN_PATH_REPLICAS,
        });
    }
    let x = x0 as f64;
    let rows: Vec<MomentRow> = times
        .iter()
        .zip(values)
        .zip(sups)
        .map(|((&t, v), s)| {
            let e = Estimate::from_counts(v);
            let sup = Estimate::from_counts(s);
            let expected = x * (sigma * (m - 1.0) * t).exp();
            let sup_bound = x * (sigma * m * t).exp();
            MomentRow {
                t,
                mean: e.mean,
                std_error: e.std_error,
                expected,
                z_score: e.z_score(expected),
                mean_pass: (e.mean - expected).abs() <= AUDIT_SE * e.std_error + 1e-12 * expected,
                sup_mean: sup.mean,
                sup_std_error: sup.std_error,
                sup_bound,
                sup_pass: sup.mean <= sup_bound + AUDIT_SE * sup.std_error,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.mean_pass && r.sup_pass);
    Ok(MomentAudit {
        x0,
        sigma,
        mean_offspring: m,
        replicas,
        rows,
        pass,
    })
}

/// Samples `X_t` and `sup_{s <= t} X_s` of the single process at every time,
/// indexed `[t][replica]`.
pub fn single_samples(
    law: &OffspringLaw,
    sigma: f64,
    x0: u64,
    times: &[f64],
    replicas: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<(Samples, Samples)> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let runs = run_replicas(master_seed, replicas, workers, |seed| {
        let mut snaps = Snapshots::new(times.to_vec());
        run_single(law, sigma, x0, horizon, seed, DEFAULT_EVENT_CAP, &mut snaps)?;
        Ok((snaps.values, snaps.sups))
    })?;
    let mut values: Samples = vec![Vec::with_capacity(replicas); times.len()];
    let mut sups = values.clone();
    for (v, s) in &runs {
        for (dst, snap) in values.iter_mut().zip(v) {
            dst.push(snap[0]);
        }
        for (dst, snap) in sups.iter_mut().zip(s) {
            dst.push(snap[0]);
        }
    }
    Ok((values, sups))
}

/// Simulates the single process and audits its moments.
pub fn moment_audit(
    law: &OffspringLaw,
    sigma: f64,
    x0: u64,
    times: &[f64],
    replicas: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<MomentAudit> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || !(times[0] > 0.0) {
        return Err(Error::input("audit times must be positive and strictly increasing"));
    }
    let (values, sups) = single_samples(law, sigma, x0, times, replicas, master_seed, workers)?;
    moment_audit_samples(x0, sigma, law.mean(), times, &values, &sups)
}

/// Empirical generating functions of two populations at one `s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgfRow {
    pub s: f64,
    pub a: f64,
    pub se_a: f64,
    pub b: f64,
    pub se_b: f64,
    pub gap: f64,
    pub pooled_se: f64,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionReport {
    pub label: String,
    pub rows: Vec<PgfRow>,
    pub pass: bool,
}

fn row(s: f64, a: Estimate, b: f64, se_b: f64) -> PgfRow {
    let gap = (a.mean - b).abs();
    let pooled = (a.std_error.powi(2) + se_b.powi(2)).sqrt();
    PgfRow {
        s,
        a: a.mean,
        se_a: a.std_error,
        b,
        se_b,
        gap,
        pooled_se: pooled,
        z_score: z_score(a.mean - b, pooled),
        pass: gap <= AUDIT_SE * pooled,
    }
}

fn report(label: &str, rows: Vec<PgfRow>) -> DistributionReport {
    DistributionReport {
        label: label.to_string(),
        pass: rows.iter().all(|r| r.pass),
        rows,
    }
}

/// Compares `E s^X` of two independent populations.
pub fn distribution_tests(label: &str, a: &[u64], b: &[u64], s_points: &[f64]) -> DistributionReport {
    let rows = s_points
        .iter()
        .map(|&s| {
            let eb = empirical_pgf(b, s);
            row(s, empirical_pgf(a, s), eb.mean, eb.std_error)
        })
        .collect();
    report(label, rows)
}

/// Branching property: `E s^X` from `X_0 = 2` against the square of the
/// `X_0 = 1` generating function (delta-method standard error).
pub fn branching_test(label: &str, from_two: &[u64], from_one: &[u64], s_points: &[f64]) -> DistributionReport {
    let rows = s_points
        .iter()
        .map(|&s| {
            let one = empirical_pgf(from_one, s);
            row(
                s,
                empirical_pgf(from_two, s),
                one.mean * one.mean,
                2.0 * one.mean * one.std_error,
            )
        })
        .collect();
    report(label, rows)
}
