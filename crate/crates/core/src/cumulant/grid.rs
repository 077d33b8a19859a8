//! Uniform grids on `[0, 1]` and functions sampled on them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance for recognizing a point as a grid node.
const NODE_TOL: f64 = 1e-12;

/// The uniform partition `x_j = j / M`, `j = 0..=M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UnitGrid {
    intervals: usize,
}

impl UnitGrid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::input("grid needs at least one interval"));
        }
        Ok(UnitGrid { intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.intervals as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(|j| self.x(j))
    }

    /// Index of the node at `x`, if `x` is a node.
    pub fn node(&self, x: f64) -> Option<usize> {
        let s = x * self.intervals as f64;
        let j = s.round();
        ((s - j).abs() <= NODE_TOL * self.intervals as f64 && j >= 0.0 && j <= self.intervals as f64)
            .then_some(j as usize)
    }

    /// Index `j` with `x_j <= x < x_{j+1}` (the last node for `x = 1`).
    pub fn cell(&self, x: f64) -> usize {
        ((x * self.intervals as f64).floor().max(0.0) as usize).min(self.intervals)
    }
}

/// A nonnegative function on a [`UnitGrid`], stored as its node values
/// together with its right limits at the nodes. Between nodes the function is
/// taken to be continuous, so left-closed steps `1_[0, a]` with `a` on the
/// grid are represented exactly: value 1 at `a`, right limit 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFunction {
    grid: UnitGrid,
    values: Vec<f64>,
    right: Vec<f64>,
}

impl GridFunction {
    pub fn from_parts(grid: UnitGrid, values: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        for v in [&values, &right] {
            if v.len() != grid.len() {
                return Err(Error::GridMismatch {
                    expected: grid.len(),
                    found: v.len(),
                });
            }
        }
        if let Some(bad) = values.iter().chain(&right).find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain {
                what: "grid function value",
                value: *bad,
            });
        }
        Ok(GridFunction {
            grid,
            values,
            right,
        })
    }

    pub fn constant(grid: UnitGrid, c: f64) -> Result<Self> {
        GridFunction::from_parts(grid, vec![c; grid.len()], vec![c; grid.len()])
    }

    pub fn zero(grid: UnitGrid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
            right: vec![0.0; grid.len()],
        }
    }

    /// Samples a continuous function at the nodes.
    pub fn from_fn(grid: UnitGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.points().map(f).collect();
        GridFunction::from_parts(grid, values.clone(), values)
    }

    /// `f = sum_i lambda_i 1_[0, a_i]`; every `a_i` must be a grid node.
    pub fn step(grid: UnitGrid, levels: &[f64], lambdas: &[f64]) -> Result<Self> {
        if levels.len() != lambdas.len() {
            return Err(Error::input(format!(
                "{} step levels but {} heights",
                levels.len(),
                lambdas.len()
            )));
        }
        let mut values = vec![0.0; grid.len()];
        let mut right = vec![0.0; grid.len()];
        for (&a, &lam) in levels.iter().zip(lambdas) {
            let node = node_of(grid, a)?;
            for v in values.iter_mut().take(node + 1) {
                *v += lam;
            }
            for r in right.iter_mut().take(node) {
                *r += lam;
            }
        }
        GridFunction::from_parts(grid, values, right)
    }

    /// The function equal to `heights[i]` on `(a_{i-1}, a_i]` (on `[0, a_1]`
    /// for `i = 0`) and 0 above `a_n`, for increasing nodes `a_i`.
    pub fn level_step(grid: UnitGrid, levels: &[f64], heights: &[f64]) -> Result<Self> {
        if levels.len() != heights.len() || levels.is_empty() {
            return Err(Error::input(format!(
                "{} levels but {} heights",
                levels.len(),
                heights.len()
            )));
        }
        let nodes = levels
            .iter()
            .map(|&a| node_of(grid, a))
            .collect::<Result<Vec<_>>>()?;
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("step levels must be strictly increasing"));
        }
        let pick = |i: usize| heights.get(i).copied().unwrap_or(0.0);
        let values = (0..grid.len())
            .map(|j| pick(nodes.partition_point(|&n| n < j)))
            .collect();
        let right = (0..grid.len())
            .map(|j| pick(nodes.partition_point(|&n| n <= j)))
            .collect();
        GridFunction::from_parts(grid, values, right)
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn right_limits(&self) -> &[f64] {
        &self.right
    }

    /// Value at `x`: the node value on nodes, the linear interpolation
    /// between the right limit and the next node value elsewhere.
    pub fn at(&self, x: f64) -> f64 {
        if let Some(j) = self.grid.node(x) {
            return self.values[j];
        }
        let j = self.grid.cell(x);
        let w = x * self.grid.intervals() as f64 - j as f64;
        (1.0 - w) * self.right[j] + w * self.values[j + 1]
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .chain(&self.right)
            .fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Whether the function is nonincreasing in `x`, up to `tol`.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        (0..self.values.len()).all(|j| {
            self.right[j] <= self.values[j] + tol
                && (j + 1 == self.values.len() || self.values[j + 1] <= self.right[j] + tol)
        })
    }

    /// Whether `self <= other` at every node and right limit, up to `tol`.
    pub fn le(&self, other: &GridFunction, tol: f64) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| *a <= b + tol)
            && self.right.iter().zip(&other.right).all(|(a, b)| *a <= b + tol)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .chain(self.right.iter().zip(&other.right))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn into_state(self) -> Vec<f64> {
        let mut s = self.values;
        s.extend(self.right);
        s
    }

    pub(crate) fn from_state(grid: UnitGrid, mut state: Vec<f64>) -> Self {
        let right = state.split_off(grid.len());
        GridFunction {
            grid,
            values: state,
            right,
        }
    }
}

fn node_of(grid: UnitGrid, a: f64) -> Result<usize> {
    grid.node(a).ok_or_else(|| {
        Error::input(format!(
            "step level {a} is not a node of the {}-interval grid",
            grid.intervals()
        ))
    })
}
