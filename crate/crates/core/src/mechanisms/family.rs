//! Admissible families `phi_theta = phi_0 - int_0^theta psi_s ds` with
//! `psi_theta(z) = h_theta z + gamma_theta z / (rho + z)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mechanism::{ExpJumps, Mechanism};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance of the theta-quadrature for non-polynomial profiles.
pub const THETA_QUAD_TOL: f64 = 1e-10;

/// A nonnegative coefficient `theta -> h_theta` (or `gamma_theta`) on `[0, 1]`.
#[derive(Clone)]
pub enum ThetaProfile {
    /// `c_0 + c_1 theta + c_2 theta^2 + ...`
    Polynomial(Vec<f64>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ThetaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaProfile::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            ThetaProfile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ThetaProfile {
    pub fn constant(c: f64) -> Self {
        ThetaProfile::Polynomial(vec![c])
    }

    pub fn value(&self, theta: f64) -> f64 {
        match self {
            ThetaProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * theta + a),
            ThetaProfile::Custom(f) => f(theta),
        }
    }

    /// `int_0^theta value(s) ds`, in closed form for polynomials.
    pub fn integral(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        match self {
            ThetaProfile::Polynomial(c) => c
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (i, &a)| acc * theta + a / (i + 1) as f64)
                * theta,
            ThetaProfile::Custom(f) => adaptive_simpson(|s| f(s), 0.0, theta, THETA_QUAD_TOL),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ThetaProfile::Polynomial(c) => c.iter().all(|&a| a == 0.0),
            ThetaProfile::Custom(_) => false,
        }
    }

    /// Largest value over a uniform grid of `[0, 1]`.
    pub fn sup_on_grid(&self, points: usize) -> f64 {
        unit_grid(points)
            .map(|t| self.value(t))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn min_on_grid(&self, points: usize) -> f64 {
        unit_grid(points)
            .map(|t| self.value(t))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn unit_grid(points: usize) -> impl Iterator<Item = f64> {
    let n = points.max(2) - 1;
    (0..=n).map(move |i| i as f64 / n as f64)
}

/// Numeric parameters of the catalog family
/// `phi_theta(z) = b0 z + c z^2/2 + gamma_m z^2/(rho_m(rho_m+z)) - theta (h z + gamma z/(rho+z))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    #[serde(default)]
    pub b0: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub gamma_m: f64,
    #[serde(default = "one")]
    pub rho_m: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

fn one() -> f64 {
    1.0
}

impl CatalogParams {
    /// Named entries: `feller`, `nonlocal`, `jumps`.
    pub fn named(name: &str) -> Option<Self> {
        let feller = CatalogParams {
            b0: 0.0,
            c: 1.0,
            gamma_m: 0.0,
            rho_m: 1.0,
            h: 0.0,
            gamma: 0.0,
            rho: 1.0,
        };
        match name {
            "feller" => Some(feller),
            "nonlocal" => Some(CatalogParams {
                h: 0.5,
                gamma: 0.5,
                ..feller
            }),
            "jumps" => Some(CatalogParams {
                gamma_m: 1.0,
                h: 0.5,
                gamma: 0.5,
                ..feller
            }),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 3] = ["feller", "nonlocal", "jumps"];
}

/// Evaluates `phi` for a mechanism-like object.
pub trait BranchingMechanism {
    fn phi(&self, z: f64) -> f64;
}

impl BranchingMechanism for Mechanism {
    fn phi(&self, z: f64) -> f64 {
        Mechanism::phi(self, z)
    }
}

/// An admissible family of branching mechanisms indexed by `theta` in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct MechanismFamily {
    base: Mechanism,
    h: ThetaProfile,
    gamma: ThetaProfile,
    decay: f64,
}

impl MechanismFamily {
    pub fn new(base: Mechanism, h: ThetaProfile, gamma: ThetaProfile, decay: f64) -> Result<Self> {
        base.validate()?;
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::Domain {
                what: "rho",
                value: decay,
            });
        }
        let family = MechanismFamily {
            base,
            h,
            gamma,
            decay,
        };
        for (what, profile) in [("h_theta", &family.h), ("gamma_theta", &family.gamma)] {
            let lo = profile.min_on_grid(101);
            if !(lo >= 0.0) {
                return Err(Error::Domain { what, value: lo });
            }
        }
        let sup = family.sup_first_moment();
        if !sup.is_finite() {
            return Err(Error::Domain {
                what: "sup(h + gamma/rho)",
                value: sup,
            });
        }
        Ok(family)
    }

    pub fn from_catalog(p: &CatalogParams) -> Result<Self> {
        let exp_jumps = (p.gamma_m != 0.0).then_some(ExpJumps {
            amplitude: p.gamma_m,
            decay: p.rho_m,
        });
        let base = Mechanism::new(p.b0, p.c, Vec::new(), exp_jumps)?;
        MechanismFamily::new(
            base,
            ThetaProfile::constant(p.h),
            ThetaProfile::constant(p.gamma),
            p.rho,
        )
    }

    /// A family with `psi = 0`: every member equals `base`.
    pub fn local(base: Mechanism) -> Result<Self> {
        MechanismFamily::new(
            base,
            ThetaProfile::constant(0.0),
            ThetaProfile::constant(0.0),
            1.0,
        )
    }

    pub fn base(&self) -> &Mechanism {
        &self.base
    }

    pub fn h_profile(&self) -> &ThetaProfile {
        &self.h
    }

    pub fn gamma_profile(&self) -> &ThetaProfile {
        &self.gamma
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// True when `psi` vanishes identically (local branching only).
    pub fn is_local(&self) -> bool {
        self.h.is_zero() && self.gamma.is_zero()
    }

    /// `sup_theta [h_theta + gamma_theta / rho]` over a 101-point grid.
    pub fn sup_first_moment(&self) -> f64 {
        unit_grid(101)
            .map(|t| self.h.value(t) + self.gamma.value(t) / self.decay)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `z / (rho + z)`, the shape of the nonlocal jump term.
    pub fn saturation(&self, z: f64) -> f64 {
        z / (self.decay + z)
    }

    pub fn psi(&self, theta: f64, z: f64) -> f64 {
        self.h.value(theta) * z + self.gamma.value(theta) * self.saturation(z)
    }

    /// `phi_0(z) - int_0^theta psi_s(z) ds`.
    pub fn phi_theta(&self, theta: f64, z: f64) -> f64 {
        if theta == 0.0 {
            return self.base.phi(z);
        }
        self.base.phi(z) - self.h.integral(theta) * z - self.gamma.integral(theta) * self.saturation(z)
    }

    /// `phi_theta'(0) = b0 - H(theta) - Gamma(theta) / rho`.
    pub fn slope_at_zero(&self, theta: f64) -> f64 {
        self.base.slope_at_zero() - self.h.integral(theta) - self.gamma.integral(theta) / self.decay
    }

    /// The member `phi_theta` as a standalone mechanism.
    pub fn at(&self, theta: f64) -> FamilyMember<'_> {
        FamilyMember {
            family: self,
            theta,
        }
    }
}

/// A single member `phi_theta` of a [`MechanismFamily`].
#[derive(Clone, Copy, Debug)]
pub struct FamilyMember<'a> {
    family: &'a MechanismFamily,
    theta: f64,
}

impl BranchingMechanism for FamilyMember<'_> {
    fn phi(&self, z: f64) -> f64 {
        self.family.phi_theta(self.theta, z)
    }
}

fn check_theta_z(theta: f64, z: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain {
            what: "theta",
            value: theta,
        });
    }
    if !(z >= 0.0) {
        return Err(Error::Domain { what: "z", value: z });
    }
    Ok(())
}

/// `psi_theta(z)`.
pub fn eval_psi(family: &MechanismFamily, theta: f64, z: f64) -> Result<f64> {
    check_theta_z(theta, z)?;
    Ok(family.psi(theta, z))
}

/// `phi_theta(z)`.
pub fn eval_phi_theta(family: &MechanismFamily, theta: f64, z: f64) -> Result<f64> {
    check_theta_z(theta, z)?;
    Ok(family.phi_theta(theta, z))
}
