//! Theta-indexed offspring-law families driving the flow equation.

use serde::Serialize;

use super::family::ThetaProfile;
use super::law::{OffspringLaw, NORMALIZATION_TOL};
use crate::error::{Error, Result};

/// How `theta -> pi_theta` is represented.
#[derive(Clone, Debug)]
pub enum LawSource {
    /// The same law at every `theta`.
    Constant(OffspringLaw),
    /// `p(theta) = intercept + theta * slope`.
    Affine { intercept: Vec<f64>, slope: Vec<f64> },
    /// Coefficients produced by the discretization recipe.
    Recipe(RecipeCoefficients),
}

/// `p(theta) = base + H(theta/k) * linear + Gamma(theta/k) * saturating`, where
/// `H`, `Gamma` are the primitives of the target's `h` and `gamma` profiles.
#[derive(Clone, Debug)]
pub struct RecipeCoefficients {
    pub(crate) k: u32,
    pub(crate) base: Vec<f64>,
    pub(crate) linear: Vec<f64>,
    pub(crate) saturating: Vec<f64>,
    pub(crate) h: ThetaProfile,
    pub(crate) gamma: ThetaProfile,
}

impl RecipeCoefficients {
    fn weights(&self, theta: f64) -> (f64, f64) {
        let t = theta / self.k as f64;
        (self.h.integral(t), self.gamma.integral(t))
    }
}

/// Outcome of the admissibility checks on a validation grid.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyValidation {
    pub grid_points: usize,
    /// Largest |g'_theta(1) - g'_theta'(1)| between neighbouring grid points.
    pub max_mean_step: f64,
    /// The same on a grid with twice the resolution.
    pub max_mean_step_refined: f64,
}

/// A family `{pi_theta : 0 <= theta <= theta_max}` with event rate `sigma`.
#[derive(Clone, Debug)]
pub struct DiscreteFlowFamily {
    id: String,
    rate: f64,
    theta_max: f64,
    source: LawSource,
}

impl DiscreteFlowFamily {
    pub fn constant(law: OffspringLaw, rate: f64, theta_max: f64) -> Result<Self> {
        DiscreteFlowFamily::from_source("constant", LawSource::Constant(law), rate, theta_max)
    }

    pub fn affine(intercept: Vec<f64>, slope: Vec<f64>, rate: f64, theta_max: f64) -> Result<Self> {
        if intercept.len() != slope.len() {
            return Err(Error::input("intercept and slope lengths differ"));
        }
        let fam = DiscreteFlowFamily::from_source(
            "affine",
            LawSource::Affine { intercept, slope },
            rate,
            theta_max,
        )?;
        fam.validate(101)?;
        Ok(fam)
    }

    pub(crate) fn from_source(
        id: impl Into<String>,
        source: LawSource,
        rate: f64,
        theta_max: f64,
    ) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain {
                what: "sigma",
                value: rate,
            });
        }
        if !(theta_max > 0.0 && theta_max.is_finite()) {
            return Err(Error::Domain {
                what: "theta_max",
                value: theta_max,
            });
        }
        Ok(DiscreteFlowFamily {
            id: id.into(),
            rate,
            theta_max,
            source,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn source(&self) -> &LawSource {
        &self.source
    }

    /// True when `pi_theta` does not depend on `theta`.
    pub fn is_theta_independent(&self) -> bool {
        match &self.source {
            LawSource::Constant(_) => true,
            LawSource::Affine { slope, .. } => slope.iter().all(|&s| s == 0.0),
            LawSource::Recipe(r) => r.h.is_zero() && r.gamma.is_zero(),
        }
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if !(theta >= 0.0 && theta <= self.theta_max * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
            });
        }
        Ok(())
    }

    /// Raw probability vector of `pi_theta` (tiny negative rounding clamped).
    pub fn probs_at(&self, theta: f64) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let mut p = match &self.source {
            LawSource::Constant(law) => law.probs().to_vec(),
            LawSource::Affine { intercept, slope } => intercept
                .iter()
                .zip(slope)
                .map(|(a, b)| a + theta * b)
                .collect(),
            LawSource::Recipe(r) => {
                let (wh, wg) = r.weights(theta);
                r.base
                    .iter()
                    .zip(&r.linear)
                    .zip(&r.saturating)
                    .map(|((a, l), s)| a + wh * l + wg * s)
                    .collect()
            }
        };
        for (i, v) in p.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -NORMALIZATION_TOL {
                    return Err(Error::input(format!(
                        "p_{i}({theta}) = {v:e} is negative"
                    )));
                }
                *v = 0.0;
            }
        }
        Ok(p)
    }

    /// `pi_theta`.
    pub fn law_at(&self, theta: f64) -> Result<OffspringLaw> {
        match &self.source {
            LawSource::Constant(law) => {
                self.check_theta(theta)?;
                Ok(law.clone())
            }
            _ => OffspringLaw::new(self.probs_at(theta)?),
        }
    }

    /// `b(theta) = pi_theta({0})`.
    pub fn death_probability(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let b = match &self.source {
            LawSource::Constant(law) => law.death_probability(),
            LawSource::Affine { intercept, slope } => intercept[0] + theta * slope[0],
            LawSource::Recipe(r) => {
                let (wh, wg) = r.weights(theta);
                r.base[0] + wh * r.linear[0] + wg * r.saturating[0]
            }
        };
        Ok(b.max(0.0))
    }

    /// Checks the admissibility requirements on a uniform grid of
    /// `[0, theta_max]`: `p_i` nondecreasing for `i >= 1`, `p_0` nonincreasing,
    /// and bounded successive differences of `theta -> g'_theta(1)`.
    ///
    /// The continuity check is heuristic: halving the grid spacing must shrink
    /// the largest jump of the mean by at least a quarter.
    pub fn validate(&self, points: usize) -> Result<FamilyValidation> {
        let points = points.max(2);
        let grid = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| self.theta_max * i as f64 / (n - 1) as f64)
                .collect()
        };
        let coarse = grid(points);
        let mut prev: Option<(f64, Vec<f64>)> = None;
        let mut max_step: f64 = 0.0;
        for &theta in &coarse {
            let law = self.law_at(theta)?;
            let p = law.probs();
            if let Some((pt, pp)) = &prev {
                let len = p.len().max(pp.len());
                for i in 0..len {
                    let now = p.get(i).copied().unwrap_or(0.0);
                    let before = pp.get(i).copied().unwrap_or(0.0);
                    let ok = if i == 0 {
                        now <= before + NORMALIZATION_TOL
                    } else {
                        now >= before - NORMALIZATION_TOL
                    };
                    if !ok {
                        return Err(Error::input(format!(
                            "family {} is not monotone: p_{i} moves from {before} at theta = {pt} \
                             to {now} at theta = {theta}",
                            self.id
                        )));
                    }
                }
                max_step = max_step.max((law.mean() - mean(pp)).abs());
            }
            prev = Some((theta, p.to_vec()));
        }
        let fine = grid(2 * points - 1);
        let mut max_fine: f64 = 0.0;
        let mut last: Option<f64> = None;
        for &theta in &fine {
            let m = self.law_at(theta)?.mean();
            if let Some(l) = last {
                max_fine = max_fine.max((m - l).abs());
            }
            last = Some(m);
        }
        if max_step > 1e-9 && max_fine > 0.75 * max_step {
            return Err(Error::input(format!(
                "theta -> g'(1) of family {} does not look continuous ({max_fine} > {max_step})",
                self.id
            )));
        }
        Ok(FamilyValidation {
            grid_points: points,
            max_mean_step: max_step,
            max_mean_step_refined: max_fine,
        })
    }
}

fn mean(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, v)| i as f64 * v).sum()
}

/// `phi^(k)_theta(z) = k sigma_k [g_{k theta}(e^{-z/k}) - e^{-z/k}]`.
pub fn discrete_mechanism(
    k: u32,
    sigma_k: f64,
    fam: &DiscreteFlowFamily,
    theta: f64,
    z: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain { what: "k", value: 0.0 });
    }
    if !(z >= 0.0) {
        return Err(Error::Domain { what: "z", value: z });
    }
    let kf = k as f64;
    if !(theta >= 0.0) || kf * theta > fam.theta_max() * (1.0 + 1e-12) {
        return Err(Error::Domain {
            what: "k * theta",
            value: kf * theta,
        });
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let law = fam.law_at((kf * theta).min(fam.theta_max()))?;
    let s = (-z / kf).exp();
    Ok(kf * sigma_k * (law.pgf(s)? - s))
}
