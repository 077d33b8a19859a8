//! Fixed-step RK4 solvers for the generating-function and cumulant ODEs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{BranchingMechanism, OffspringLaw};

/// Values above this are treated as a blowup.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Clamps larger than this (in magnitude) are logged.
pub const CLAMP_WARN: f64 = 1e-9;

/// Fixed-step RK4 settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_max_time() -> f64 {
    100.0
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            step: default_step(),
            max_time: default_max_time(),
        }
    }
}

impl OdeConfig {
    pub fn with_step(step: f64) -> Self {
        OdeConfig {
            step,
            ..OdeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= self.max_time && self.max_time.is_finite()) {
            return Err(Error::Config(format!(
                "ode step {} must lie in (0, max_time = {}]",
                self.step, self.max_time
            )));
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        self.validate()?;
        if !(t >= 0.0 && t <= self.max_time) {
            return Err(Error::Domain {
                what: "time",
                value: t,
            });
        }
        Ok(())
    }

    /// Number of steps and the step actually used to land exactly on `t`.
    fn steps(&self, t: f64) -> (usize, f64) {
        if t == 0.0 {
            return (0, 0.0);
        }
        let n = (t / self.step).ceil().max(1.0) as usize;
        (n, t / n as f64)
    }
}

/// Integrates `y' = f(y)` from 0 to `t` with classical RK4; after every step
/// `post(time, y)` may project the state and reject it with an error.
pub(crate) fn rk4<F, P>(mut y: Vec<f64>, t: f64, cfg: &OdeConfig, mut f: F, mut post: P) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
    P: FnMut(f64, &mut [f64]) -> Result<()>,
{
    cfg.check_time(t)?;
    let (n, h) = cfg.steps(t);
    let d = y.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for step in 0..n {
        f(&y, &mut k1);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        post((step + 1) as f64 * h, &mut y)?;
    }
    Ok(y)
}

/// Floors negative values at 0 and rejects non-finite or huge values.
pub(crate) fn clamp_nonnegative(time: f64, y: &mut [f64]) -> Result<()> {
    for v in y.iter_mut() {
        if !v.is_finite() || *v > BLOWUP_THRESHOLD {
            return Err(Error::Blowup { time, value: *v });
        }
        if *v < 0.0 {
            if *v < -CLAMP_WARN {
                log::warn!("clamped cumulant value {v:e} to 0 at t = {time}");
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// `F_t(s0)` solving `F' = sigma (g(F) - F)`, `F_0 = s0`: the generating
/// function `E[s0^{X_t}]` of the process started from one individual.
pub fn solve_pgf_ode(law: &OffspringLaw, sigma: f64, t: f64, s0: f64, cfg: &OdeConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&s0) {
        return Err(Error::Domain { what: "s", value: s0 });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "rate",
            value: sigma,
        });
    }
    if s0 == 1.0 {
        cfg.check_time(t)?;
        return Ok(1.0);
    }
    let y = rk4(
        vec![s0],
        t,
        cfg,
        |y, dy| {
            let s = y[0].clamp(0.0, 1.0);
            dy[0] = sigma * (law.pgf_unchecked(s) - s);
        },
        |_, y| {
            y[0] = y[0].clamp(0.0, 1.0);
            Ok(())
        },
    )?;
    Ok(y[0])
}

/// `v_t(lambda)` solving `v' = -phi(v)`, `v_0 = lambda`, so that
/// `E exp(-lambda Y_t) = exp(-y0 v_t(lambda))`.
pub fn solve_cb_cumulant<M: BranchingMechanism + ?Sized>(
    mech: &M,
    lambda: f64,
    t: f64,
    cfg: &OdeConfig,
) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
        });
    }
    if lambda == 0.0 {
        cfg.check_time(t)?;
        return Ok(0.0);
    }
    let y = rk4(
        vec![lambda],
        t,
        cfg,
        |y, dy| dy[0] = -mech.phi(y[0].max(0.0)),
        clamp_nonnegative,
    )?;
    Ok(y[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::Mechanism;

    #[test]
    fn pgf_ode_critical_binary_closed_form() {
        let law = OffspringLaw::critical_binary();
        let cfg = OdeConfig::default();
        let f = solve_pgf_ode(&law, 1.0, 2.0, 0.0, &cfg).unwrap();
        assert!((f - 0.5).abs() < 1e-8);
        assert_eq!(solve_pgf_ode(&law, 1.0, 0.0, 0.3, &cfg).unwrap(), 0.3);
        assert_eq!(solve_pgf_ode(&law, 1.0, 5.0, 1.0, &cfg).unwrap(), 1.0);
        // General s0: F_t = 1 - (1 - s)/(1 + (1 - s) t / 2).
        let s = 0.4;
        let exact = 1.0 - (1.0 - s) / (1.0 + (1.0 - s) * 1.5 / 2.0);
        assert!((solve_pgf_ode(&law, 1.0, 1.5, s, &cfg).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn pgf_ode_pure_death() {
        // F_t(s) = 1 - (1 - s) e^{-sigma t}.
        let law = OffspringLaw::pure_death();
        let f = solve_pgf_ode(&law, 2.0, 0.7, 0.25, &OdeConfig::default()).unwrap();
        assert!((f - (1.0 - 0.75 * (-1.4f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn cb_cumulant_closed_forms() {
        let cfg = OdeConfig::default();
        let feller = Mechanism::feller(1.0).unwrap();
        assert!((solve_cb_cumulant(&feller, 1.0, 2.0, &cfg).unwrap() - 0.5).abs() < 1e-8);
        let lin = Mechanism::linear(0.7).unwrap();
        let v = solve_cb_cumulant(&lin, 2.0, 1.3, &cfg).unwrap();
        assert!((v - 2.0 * (-0.7f64 * 1.3).exp()).abs() < 1e-10);
        assert_eq!(solve_cb_cumulant(&feller, 0.0, 3.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn step_halving_is_below_1e_7() {
        let feller = Mechanism::feller(1.0).unwrap();
        let law = OffspringLaw::new(vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let a = OdeConfig::default();
        let b = OdeConfig::with_step(a.step / 2.0);
        for (lambda, t) in [(0.5, 1.0), (3.0, 2.0), (10.0, 0.5)] {
            let d = (solve_cb_cumulant(&feller, lambda, t, &a).unwrap()
                - solve_cb_cumulant(&feller, lambda, t, &b).unwrap())
            .abs();
            assert!(d <= 1e-7, "{d}");
            let d = (solve_pgf_ode(&law, 1.0, t, 0.3, &a).unwrap()
                - solve_pgf_ode(&law, 1.0, t, 0.3, &b).unwrap())
            .abs();
            assert!(d <= 1e-7, "{d}");
        }
    }

    #[test]
    fn blowup_is_reported() {
        // v' = v^2 / 2 explodes at t = 2 / lambda.
        let m = |z: f64| -z * z / 2.0;
        struct Neg<F>(F);
        impl<F: Fn(f64) -> f64> BranchingMechanism for Neg<F> {
            fn phi(&self, z: f64) -> f64 {
                (self.0)(z)
            }
        }
        let r = solve_cb_cumulant(&Neg(m), 1.0, 3.0, &OdeConfig::default());
        assert!(matches!(r, Err(Error::Blowup { .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = OdeConfig::default();
        let law = OffspringLaw::critical_binary();
        assert!(solve_pgf_ode(&law, 1.0, 1.0, 1.5, &cfg).is_err());
        assert!(solve_pgf_ode(&law, 1.0, 1e6, 0.5, &cfg).is_err());
        assert!(OdeConfig::with_step(0.0).validate().is_err());
    }
}
