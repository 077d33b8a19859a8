//! Discretization recipe: an admissible offspring-law family whose rescaled
//! mechanism reproduces a continuum target.
//!
//! For a target family `phi_theta` and scale `k` the generating functions are
//!
//! ```text
//! g^(k)_theta(s) = s + phi_{theta/k}(k (1 - s)) / (k sigma_k),   0 <= theta <= k,
//! ```
//!
//! so that `k sigma_k [g_{k theta}(e^{-z/k}) - e^{-z/k}] = phi_theta(k (1 - e^{-z/k}))`.
//! The power series of `phi_0(k(1-s))`, `k(1-s)` and `k(1-s)/(rho+k(1-s))` are
//! expanded in closed form; only `p_0` and `p_1` can be negative, and `p_1` is
//! repaired by raising `sigma_k`.

use serde::Serialize;

use super::discrete::{DiscreteFlowFamily, LawSource, RecipeCoefficients};
use super::family::MechanismFamily;
use crate::error::{Error, Result};

/// Tail mass tolerance of the truncated offspring series.
pub const TAIL_MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct RecipeOptions {
    /// Validation grid size over `[0, k]`.
    pub validation_points: usize,
    /// Admissibility fails if `sigma_k` would have to exceed `max_sigma_factor * k`.
    pub max_sigma_factor: f64,
}

impl Default for RecipeOptions {
    fn default() -> Self {
        RecipeOptions {
            validation_points: 101,
            max_sigma_factor: 1e6,
        }
    }
}

/// Diagnostics of one recipe construction.
#[derive(Clone, Debug, Serialize)]
pub struct RecipeReport {
    pub k: u32,
    pub sigma: f64,
    pub support_bound: usize,
    pub tail_tolerance: f64,
    /// Largest |g'_theta(1) - (1 - phi'_{theta/k}(0)/sigma_k)| on the validation grid.
    pub max_mean_bias: f64,
    /// Smallest coefficient seen on the validation grid (after clamping).
    pub min_coefficient: f64,
}

/// Builds the recipe family for `target` at scale `k`; returns it with `sigma_k`.
pub fn build_discrete_family(target: &MechanismFamily, k: u32) -> Result<(DiscreteFlowFamily, f64)> {
    build_discrete_family_with(target, k, RecipeOptions::default()).map(|(f, r)| (f, r.sigma))
}

pub fn build_discrete_family_with(
    target: &MechanismFamily,
    k: u32,
    opts: RecipeOptions,
) -> Result<(DiscreteFlowFamily, RecipeReport)> {
    if k == 0 {
        return Err(Error::Domain { what: "k", value: 0.0 });
    }
    let kf = k as f64;
    let base = target.base();
    let rho = target.decay();

    let a1 = series_a1(target, kf);
    let sigma_start = base.diffusion * kf
        + base.drift.max(0.0)
        + target.gamma_profile().sup_on_grid(101) / rho;
    let sigma_needed = (-a1 / kf).max(0.0);
    let mut j = (sigma_needed - sigma_start).max(0.0).ceil();
    if sigma_start + j <= 0.0 {
        j = 1.0;
    }
    let mut sigma = sigma_start + j;
    while 1.0 + a1 / (kf * sigma) < -TAIL_MASS_TOL {
        sigma += 1.0;
    }
    if sigma > opts.max_sigma_factor * kf {
        return Err(Error::Admissibility {
            k,
            index: 1,
            theta: 0.0,
            value: 1.0 + a1 / (kf * opts.max_sigma_factor * kf),
            sigma: opts.max_sigma_factor * kf,
        });
    }

    let norm = kf * sigma;
    let gamma_sup = target.gamma_profile().integral(1.0);
    let tail_tol = TAIL_MASS_TOL / norm.max(1.0);
    let n_max = truncation_index(target, kf, gamma_sup, tail_tol * norm)?;

    let mut coeff_a = series_a(target, kf, n_max);
    coeff_a[1] = a1;
    let mut base_c: Vec<f64> = coeff_a.iter().map(|a| a / norm).collect();
    base_c[1] += 1.0;
    let mut linear = vec![0.0; n_max + 1];
    linear[0] = -kf / norm;
    linear[1] = kf / norm;
    let mut saturating = vec![0.0; n_max + 1];
    let ratio = kf / (rho + kf);
    saturating[0] = -ratio / norm;
    let mut pow = 1.0;
    for s in saturating.iter_mut().skip(1) {
        pow *= ratio;
        *s = rho / (rho + kf) * pow / norm;
    }
    fold_tail(&mut base_c, 1.0);
    fold_tail(&mut linear, 0.0);
    fold_tail(&mut saturating, 0.0);

    let coeffs = RecipeCoefficients {
        k,
        base: base_c,
        linear,
        saturating,
        h: target.h_profile().clone(),
        gamma: target.gamma_profile().clone(),
    };
    let family = DiscreteFlowFamily::from_source(
        format!("recipe(k={k})"),
        LawSource::Recipe(coeffs),
        sigma,
        kf,
    )?;

    // Coefficient signs and mean bias on the validation grid.
    let points = opts.validation_points.max(2);
    let mut min_coeff = f64::INFINITY;
    let mut max_bias: f64 = 0.0;
    for i in 0..points {
        let theta = kf * i as f64 / (points - 1) as f64;
        let raw = raw_probs(&family, theta);
        for (idx, &v) in raw.iter().enumerate() {
            if v < -TAIL_MASS_TOL {
                return Err(Error::Admissibility {
                    k,
                    index: idx,
                    theta,
                    value: v,
                    sigma,
                });
            }
        }
        let law = family.law_at(theta)?;
        min_coeff = min_coeff.min(law.probs().iter().copied().fold(f64::INFINITY, f64::min));
        let exact_mean = 1.0 - target.slope_at_zero(theta / kf) / sigma;
        max_bias = max_bias.max((law.mean() - exact_mean).abs());
    }
    family.validate(points)?;

    Ok((
        family,
        RecipeReport {
            k,
            sigma,
            support_bound: n_max,
            tail_tolerance: tail_tol,
            max_mean_bias: max_bias,
            min_coefficient: min_coeff,
        },
    ))
}

/// Coefficients before clamping, to locate the most negative one.
fn raw_probs(family: &DiscreteFlowFamily, theta: f64) -> Vec<f64> {
    match family.source() {
        LawSource::Recipe(r) => {
            let t = theta / r.k as f64;
            let (wh, wg) = (r.h.integral(t), r.gamma.integral(t));
            r.base
                .iter()
                .zip(&r.linear)
                .zip(&r.saturating)
                .map(|((a, l), s)| a + wh * l + wg * s)
                .collect()
        }
        _ => unreachable!("recipe families only"),
    }
}

/// Adds `target_sum - sum(v)` to the last entry.
fn fold_tail(v: &mut [f64], target_sum: f64) {
    let partial: f64 = v.iter().sum();
    if let Some(last) = v.last_mut() {
        *last += target_sum - partial;
    }
}

/// `A_1`, the coefficient of `s` in `phi_0(k(1-s))`.
fn series_a1(target: &MechanismFamily, k: f64) -> f64 {
    let base = target.base();
    let mut a1 = -base.drift * k - base.diffusion * k * k;
    for atom in &base.atoms {
        let x = k * atom.size;
        a1 += atom.weight * (x * (-x).exp() - x);
    }
    if let Some(e) = base.exp_jumps {
        let a = k / (e.decay + k);
        a1 += e.amplitude * (e.decay / (e.decay + k) * a - k / e.decay);
    }
    a1
}

/// Coefficients `A_0 .. A_n` of `phi_0(k(1-s))` (with `A_1` recomputed by the caller).
fn series_a(target: &MechanismFamily, k: f64, n: usize) -> Vec<f64> {
    let base = target.base();
    let mut a = vec![0.0; n + 1];
    a[0] += base.drift * k + 0.5 * base.diffusion * k * k;
    a[2] += 0.5 * base.diffusion * k * k;
    for atom in &base.atoms {
        let x = k * atom.size;
        a[0] += atom.weight * (x - 1.0);
        let mut log_term = -x;
        for (i, ai) in a.iter_mut().enumerate() {
            if i > 0 {
                log_term += x.ln() - (i as f64).ln();
            }
            if i != 1 {
                *ai += atom.weight * log_term.exp();
            }
        }
    }
    if let Some(e) = base.exp_jumps {
        let ratio = k / (e.decay + k);
        let lead = e.amplitude * e.decay / (e.decay + k);
        a[0] += e.amplitude * (k / e.decay - 1.0) + lead;
        let mut pow = 1.0;
        for ai in a.iter_mut().skip(1) {
            pow *= ratio;
            *ai += lead * pow;
        }
    }
    a
}

/// Smallest `N >= 2` such that the series tail beyond `N` is below `tol`
/// (in mechanism units).
fn truncation_index(target: &MechanismFamily, k: f64, gamma_sup: f64, tol: f64) -> Result<usize> {
    let base = target.base();
    let rho = target.decay();
    let sat_ratio = k / (rho + k);
    let exp_ratio = base.exp_jumps.map(|e| (e.amplitude, k / (e.decay + k)));
    const CAP: usize = 50_000_000;
    let mut n = 2usize;
    loop {
        let mut tail = gamma_sup * sat_ratio.powi(n as i32 + 1);
        if let Some((amp, r)) = exp_ratio {
            tail += amp * r.powi(n as i32 + 1);
        }
        for atom in &base.atoms {
            let x = k * atom.size;
            let m = n + 1;
            if (m as f64) + 1.0 <= x {
                tail = f64::INFINITY;
                break;
            }
            let log_term = -x + m as f64 * x.ln() - ln_factorial(m);
            tail += atom.weight * log_term.exp() / (1.0 - x / (m as f64 + 1.0));
        }
        if tail <= tol {
            return Ok(n);
        }
        n += 1;
        if n > CAP {
            return Err(Error::input("offspring series does not truncate within 5e7 terms"));
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}
