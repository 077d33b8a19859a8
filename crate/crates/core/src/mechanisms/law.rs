//! Offspring laws on the nonnegative integers.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};

/// Normalization tolerance for offspring laws.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability law `p_0, ..., p_M` on `{0, ..., M}` with generating
/// function `g(s) = sum p_i s^i`.
#[derive(Clone, Debug)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    mean: f64,
    sampler: WeightedAliasIndex<f64>,
}

impl PartialEq for OffspringLaw {
    fn eq(&self, other: &Self) -> bool {
        self.probs == other.probs
    }
}

impl OffspringLaw {
    /// Builds a law from its probability vector. Entries in `[-1e-12, 0)`
    /// are treated as rounding noise and set to zero; trailing zero atoms
    /// are dropped.
    pub fn new(probs: impl Into<Vec<f64>>) -> Result<Self> {
        let mut probs = probs.into();
        if probs.is_empty() {
            return Err(Error::input("offspring law needs at least one atom"));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NORMALIZATION_TOL {
                return Err(Error::input(format!("p_{i} = {p} is not a probability")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        while probs.len() > 1 && probs[probs.len() - 1] == 0.0 {
            probs.pop();
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::input(format!(
                "offspring probabilities sum to {total}, not 1"
            )));
        }
        let mean = mean_of(&probs);
        let sampler = WeightedAliasIndex::new(probs.clone())
            .map_err(|e| Error::input(format!("cannot build offspring sampler: {e}")))?;
        Ok(OffspringLaw {
            probs,
            mean,
            sampler,
        })
    }

    /// The law of a particle that dies without offspring.
    pub fn pure_death() -> Self {
        OffspringLaw::new(vec![1.0]).expect("valid law")
    }

    /// Binary splitting: `p_0 = 1 - p2`, `p_2 = p2`.
    pub fn binary(p2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p2) {
            return Err(Error::Domain {
                what: "p2",
                value: p2,
            });
        }
        OffspringLaw::new(vec![1.0 - p2, 0.0, p2])
    }

    /// Critical binary branching, `g(s) = (1 + s^2) / 2`.
    pub fn critical_binary() -> Self {
        OffspringLaw::binary(0.5).expect("valid law")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest atom `M` of the (trimmed) support.
    pub fn support_bound(&self) -> usize {
        self.probs.len() - 1
    }

    /// `g'(1) = sum i p_i`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `p_0`, the one-step extinction probability `b`.
    pub fn death_probability(&self) -> f64 {
        self.probs[0]
    }

    /// Generating function on `[0, 1]`; exactly 1 at `s = 1`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain { what: "s", value: s });
        }
        if s == 1.0 {
            return Ok(1.0);
        }
        Ok(self.pgf_unchecked(s).clamp(0.0, 1.0))
    }

    /// Horner evaluation without domain checks, for use inside ODE stages.
    pub fn pgf_unchecked(&self, s: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    /// Draws an offspring count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sampler.sample(rng) as u32
    }
}

fn mean_of(probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * p)
        .sum()
}

/// `g(s)` for `s` in `[0, 1]`.
pub fn eval_pgf(law: &OffspringLaw, s: f64) -> Result<f64> {
    law.pgf(s)
}
