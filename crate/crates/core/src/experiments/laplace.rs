//! Laplace functionals `E exp(-<Y_t, f>)` of rescaled flows.

use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use crate::cumulant::{GridFunction, UnitGrid};
use crate::error::{Error, Result};
use crate::flowsim::{rescale, FlowPath};

/// Fewest replicas accepted by any Laplace estimate.
pub const MIN_REPLICAS: usize = 100;

/// A test function on a level grid `q_1 < ... < q_n`: the value `heights[i]`
/// on `(q_{i-1}, q_i]` (on `[0, q_1]` for `i = 0`), 0 above `q_n`. Pairing a
/// staircase measure with atoms at the levels against it is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub heights: Vec<f64>,
}

impl TestFunction {
    /// `sum_i lambda_i 1_[0, q_i]`.
    pub fn step(id: impl Into<String>, lambdas: &[f64]) -> Result<Self> {
        let mut heights = vec![0.0; lambdas.len()];
        let mut acc = 0.0;
        for (h, &l) in heights.iter_mut().zip(lambdas).rev() {
            acc += l;
            *h = acc;
        }
        TestFunction::new(id, heights)
    }

    /// `f` sampled at the levels.
    pub fn sampled(id: impl Into<String>, levels: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        TestFunction::new(id, levels.iter().map(|&q| f(q)).collect())
    }

    pub fn new(id: impl Into<String>, heights: Vec<f64>) -> Result<Self> {
        if let Some(h) = heights.iter().find(|h| !(**h >= 0.0 && h.is_finite())) {
            return Err(Error::Domain {
                what: "test function value",
                value: *h,
            });
        }
        Ok(TestFunction {
            id: id.into(),
            heights,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.heights.iter().all(|&h| h == 0.0)
    }

    /// `<mu, f>` for atom masses at the levels.
    pub fn pair(&self, masses: &[f64]) -> f64 {
        self.heights.iter().zip(masses).map(|(h, m)| h * m).sum()
    }

    /// `<mu, f>` for the staircase `counts / k`.
    pub fn pair_counts(&self, counts: &[u64], k: f64) -> f64 {
        let mut prev = 0u64;
        let mut acc = 0.0;
        for (h, &c) in self.heights.iter().zip(counts) {
            acc += h * (c - prev) as f64;
            prev = c;
        }
        acc / k
    }

    /// The same function on a solver grid; the levels must be grid nodes.
    pub fn grid_function(&self, grid: UnitGrid, levels: &[f64]) -> Result<GridFunction> {
        GridFunction::level_step(grid, levels, &self.heights)
    }
}

/// Monte Carlo estimate of `E exp(-<Y_t, f>)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LaplaceEstimate {
    pub point_estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
}

impl LaplaceEstimate {
    /// From per-replica values of `exp(-<Y_t, f>)`.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < MIN_REPLICAS {
            return Err(Error::InsufficientReplicas {
                got: samples.len(),
                need: MIN_REPLICAS,
            });
        }
        let e = Estimate::from_samples(samples);
        Ok(LaplaceEstimate {
            point_estimate: e.mean,
            std_error: e.std_error,
            replicas: e.n,
        })
    }
}

/// Estimates `E exp(-<Y_t, f>)` from recorded paths simulated with theta
/// scale `k`.
pub fn estimate_laplace(paths: &[FlowPath], k: u32, f: &TestFunction, t: f64) -> Result<LaplaceEstimate> {
    if paths.len() < MIN_REPLICAS {
        return Err(Error::InsufficientReplicas {
            got: paths.len(),
            need: MIN_REPLICAS,
        });
    }
    let levels = &paths[0].header.levels;
    if f.heights.len() != levels.len() {
        return Err(Error::GridMismatch {
            expected: levels.len(),
            found: f.heights.len(),
        });
    }
    let samples = paths
        .iter()
        .map(|p| {
            if &p.header.levels != levels {
                return Err(Error::input("paths do not share a level grid"));
            }
            if p.header.horizon < t {
                return Err(Error::input(format!(
                    "path horizon {} is before t = {t}",
                    p.header.horizon
                )));
            }
            let view = rescale(p, k)?.view_at(t)?;
            Ok((-f.pair(&view.masses)).exp())
        })
        .collect::<Result<Vec<_>>>()?;
    LaplaceEstimate::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowsim::{simulate_flow, LevelGrid, SeedSpec};
    use crate::mechanisms::{DiscreteFlowFamily, OffspringLaw};

    fn paths(n: u64, horizon: f64) -> Vec<FlowPath> {
        let fam = DiscreteFlowFamily::constant(OffspringLaw::critical_binary(), 2.0, 4.0).unwrap();
        let grid = LevelGrid::new(vec![0.5, 1.0]).unwrap();
        (0..n)
            .map(|i| simulate_flow(&fam, &grid, 4.0, &[2, 4], horizon, SeedSpec::new(3, i)).unwrap())
            .collect()
    }

    #[test]
    fn step_heights_accumulate() {
        let f = TestFunction::step("f", &[1.0, 0.5]).unwrap();
        assert_eq!(f.heights, vec![1.5, 0.5]);
        assert_eq!(f.pair_counts(&[2, 6], 2.0), (1.5 * 2.0 + 0.5 * 4.0) / 2.0);
        assert!(TestFunction::new("bad", vec![-1.0]).is_err());
    }

    #[test]
    fn zero_function_and_time_zero_are_exact() {
        let p = paths(100, 1.0);
        let zero = TestFunction::new("0", vec![0.0, 0.0]).unwrap();
        let e = estimate_laplace(&p, 4, &zero, 0.7).unwrap();
        assert_eq!((e.point_estimate, e.std_error), (1.0, 0.0));
        let f = TestFunction::step("f", &[1.0, 1.0]).unwrap();
        let e = estimate_laplace(&p, 4, &f, 0.0).unwrap();
        // <Y_0, f> = 2 * (2/4) + 1 * (2/4).
        assert_eq!(e.point_estimate, (-1.5f64).exp());
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn too_few_replicas() {
        let p = paths(10, 1.0);
        let f = TestFunction::step("f", &[1.0, 1.0]).unwrap();
        assert!(matches!(
            estimate_laplace(&p, 4, &f, 0.5),
            Err(Error::InsufficientReplicas { got: 10, need: 100 })
        ));
        assert!(matches!(
            LaplaceEstimate::from_samples(&[1.0; 99]),
            Err(Error::InsufficientReplicas { .. })
        ));
    }
}
