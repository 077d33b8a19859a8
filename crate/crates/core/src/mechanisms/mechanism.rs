//! Continuum branching mechanisms
//! `phi(z) = b z + sigma^2 z^2 / 2 + int (e^{-zu} - 1 + zu) m(du)`
//! with `m` a finite atom list plus an optional exponential density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A jump atom `weight * delta_size` of the Lévy measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    pub size: f64,
    pub weight: f64,
}

/// Exponential jump density `amplitude * decay * exp(-decay * u) du`,
/// so that `amplitude` is the total mass and `amplitude / decay` the first moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpJumps {
    pub amplitude: f64,
    pub decay: f64,
}

impl ExpJumps {
    /// `int (e^{-zu} - 1 + zu) n(du) = amplitude * z^2 / (decay (decay + z))`.
    pub fn compensated_laplace(&self, z: f64) -> f64 {
        self.amplitude * z * z / (self.decay * (self.decay + z))
    }

    /// `int (1 - e^{-zu}) n(du) = amplitude * z / (decay + z)`.
    pub fn laplace_deficit(&self, z: f64) -> f64 {
        self.amplitude * z / (self.decay + z)
    }
}

/// A branching mechanism of Lévy-Khintchine type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub drift: f64,
    /// `sigma^2`.
    pub diffusion: f64,
    #[serde(default)]
    pub atoms: Vec<JumpAtom>,
    #[serde(default)]
    pub exp_jumps: Option<ExpJumps>,
}

impl Mechanism {
    pub fn new(
        drift: f64,
        diffusion: f64,
        atoms: Vec<JumpAtom>,
        exp_jumps: Option<ExpJumps>,
    ) -> Result<Self> {
        let mech = Mechanism {
            drift,
            diffusion,
            atoms,
            exp_jumps,
        };
        mech.validate()?;
        Ok(mech)
    }

    /// Feller diffusion `phi(z) = diffusion * z^2 / 2`.
    pub fn feller(diffusion: f64) -> Result<Self> {
        Mechanism::new(0.0, diffusion, Vec::new(), None)
    }

    pub fn linear(drift: f64) -> Result<Self> {
        Mechanism::new(drift, 0.0, Vec::new(), None)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(Error::Domain {
                what: "drift",
                value: self.drift,
            });
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(Error::Domain {
                what: "diffusion",
                value: self.diffusion,
            });
        }
        for atom in &self.atoms {
            if !(atom.size > 0.0 && atom.size.is_finite()) {
                return Err(Error::Domain {
                    what: "atom size",
                    value: atom.size,
                });
            }
            if !(atom.weight >= 0.0 && atom.weight.is_finite()) {
                return Err(Error::Domain {
                    what: "atom weight",
                    value: atom.weight,
                });
            }
        }
        if let Some(e) = self.exp_jumps {
            if !(e.amplitude >= 0.0 && e.amplitude.is_finite()) {
                return Err(Error::Domain {
                    what: "gamma_m",
                    value: e.amplitude,
                });
            }
            if !(e.decay > 0.0 && e.decay.is_finite()) {
                return Err(Error::Domain {
                    what: "rho_m",
                    value: e.decay,
                });
            }
        }
        Ok(())
    }

    /// `phi(z)`; exactly zero at `z = 0`.
    pub fn phi(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        let mut value = self.drift * z + 0.5 * self.diffusion * z * z;
        for atom in &self.atoms {
            let x = z * atom.size;
            value += atom.weight * ((-x).exp_m1() + x);
        }
        if let Some(e) = self.exp_jumps {
            value += e.compensated_laplace(z);
        }
        value
    }

    /// `phi'(0) = b`; the jump part has zero slope at the origin.
    pub fn slope_at_zero(&self) -> f64 {
        self.drift
    }
}

/// `phi(z)` for `z >= 0`.
pub fn eval_phi(mech: &Mechanism, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain { what: "z", value: z });
    }
    Ok(mech.phi(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on `[0, upper]`, used as an independent check of the
    /// closed-form jump integrals.
    fn simpson(f: impl Fn(f64) -> f64, upper: f64, n: usize) -> f64 {
        let h = upper / n as f64;
        let mut acc = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn feller_at_two() {
        let m = Mechanism::feller(1.0).unwrap();
        assert_eq!(eval_phi(&m, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn vanishes_at_zero() {
        let m = Mechanism::new(
            -0.3,
            2.0,
            vec![JumpAtom {
                size: 0.5,
                weight: 1.0,
            }],
            Some(ExpJumps {
                amplitude: 1.0,
                decay: 2.0,
            }),
        )
        .unwrap();
        assert_eq!(m.phi(0.0), 0.0);
    }

    #[test]
    fn exponential_jump_closed_form_matches_quadrature() {
        let m = Mechanism::new(
            0.0,
            0.0,
            vec![],
            Some(ExpJumps {
                amplitude: 1.0,
                decay: 1.0,
            }),
        )
        .unwrap();
        assert!((eval_phi(&m, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let quad = simpson(
            |u| ((-u).exp() - 1.0 + u) * (-u).exp(),
            60.0,
            60_000,
        );
        assert!((quad - 0.5).abs() < 1e-10);
        for z in [0.3, 2.0, 7.5] {
            let e = m.exp_jumps.unwrap();
            let q = simpson(|u| ((-z * u).exp() - 1.0 + z * u) * (-u).exp(), 80.0, 80_000);
            assert!((e.compensated_laplace(z) - q).abs() < 1e-8, "z = {z}");
        }
    }

    #[test]
    fn convex_on_test_grid() {
        let m = Mechanism::new(
            -1.0,
            0.5,
            vec![JumpAtom {
                size: 2.0,
                weight: 0.7,
            }],
            Some(ExpJumps {
                amplitude: 1.5,
                decay: 0.5,
            }),
        )
        .unwrap();
        let h = 0.01;
        for i in 1..1000 {
            let z = i as f64 * h;
            let second = m.phi(z + h) - 2.0 * m.phi(z) + m.phi(z - h);
            assert!(second >= -1e-9, "z = {z}: {second}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Mechanism::new(0.0, -1.0, vec![], None).is_err());
        assert!(Mechanism::new(
            0.0,
            1.0,
            vec![],
            Some(ExpJumps {
                amplitude: 1.0,
                decay: 0.0
            })
        )
        .is_err());
        assert!(eval_phi(&Mechanism::feller(1.0).unwrap(), -1.0).is_err());
    }
}
