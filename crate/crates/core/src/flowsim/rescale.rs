//! Measure-valued views of rescaled flow paths: `Y(q) = X(k q) / k`.

use serde::Serialize;

use super::path::FlowPath;
use crate::error::{Error, Result};

/// A finite measure on the levels: atom `Y(q_i) - Y(q_{i-1})` at `q_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureView {
    pub levels: Vec<f64>,
    pub masses: Vec<f64>,
}

impl MeasureView {
    /// View of counts on `levels` (unscaled `q`) divided by `k`.
    pub fn from_counts(levels: &[f64], counts: &[u64], k: f64) -> Self {
        let mut prev = 0u64;
        let masses = counts
            .iter()
            .map(|&c| {
                let m = (c - prev) as f64 / k;
                prev = c;
                m
            })
            .collect();
        MeasureView {
            levels: levels.to_vec(),
            masses,
        }
    }

    /// `<Y, f> = sum_i f(q_i) * mass_i`.
    pub fn pair(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.levels
            .iter()
            .zip(&self.masses)
            .map(|(&q, &m)| f(q) * m)
            .sum()
    }

    /// `Y(q_n)`.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Cumulative values `Y(q_i)`.
    pub fn staircase(&self) -> Vec<f64> {
        self.masses
            .iter()
            .scan(0.0, |acc, &m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }
}

/// A path read through the scaling `Y_t(q) = X_t(k q) / k`.
#[derive(Clone, Debug)]
pub struct RescaledPath<'a> {
    path: &'a FlowPath,
    k: f64,
}

/// Wraps a path simulated with theta scale `k`.
pub fn rescale(path: &FlowPath, k: u32) -> Result<RescaledPath<'_>> {
    let kf = f64::from(k);
    if k == 0 || path.header.theta_scale != kf {
        return Err(Error::input(format!(
            "path was simulated with theta scale {}, not {k}",
            path.header.theta_scale
        )));
    }
    Ok(RescaledPath { path, k: kf })
}

impl RescaledPath<'_> {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn view_at(&self, t: f64) -> Result<MeasureView> {
        let counts = self.path.counts_at(t)?;
        Ok(MeasureView::from_counts(&self.path.header.levels, &counts, self.k))
    }

    pub fn terminal(&self) -> MeasureView {
        MeasureView::from_counts(&self.path.header.levels, &self.path.terminal, self.k)
    }
}
