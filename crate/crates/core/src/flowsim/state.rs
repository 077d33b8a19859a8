use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered levels `0 < q_1 < ... < q_n <= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelGrid(Vec<f64>);

impl LevelGrid {
    pub fn new(levels: impl Into<Vec<f64>>) -> Result<Self> {
        let levels = levels.into();
        if levels.is_empty() {
            return Err(Error::input("level grid is empty"));
        }
        for w in levels.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::input(format!(
                    "levels must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(levels[0] > 0.0) || !(levels[levels.len() - 1] <= 1.0) {
            return Err(Error::input("levels must lie in (0, 1]"));
        }
        Ok(LevelGrid(levels))
    }

    /// The single level `{1}`.
    pub fn unit() -> Self {
        LevelGrid(vec![1.0])
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when the top level is 1, as measure-valued views require.
    pub fn reaches_one(&self) -> bool {
        self.0[self.0.len() - 1] == 1.0
    }
}

/// Counts `X(q_1) <= ... <= X(q_n)` at a time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: FloatBits,
    pub counts: Vec<u64>,
}

/// An `f64` compared bitwise, so states can derive `Eq`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloatBits(pub f64);

impl PartialEq for FloatBits {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for FloatBits {}

impl FlowState {
    pub fn new(time: f64, counts: Vec<u64>) -> Self {
        FlowState {
            time: FloatBits(time),
            counts,
        }
    }

    pub fn time(&self) -> f64 {
        self.time.0
    }

    pub fn is_monotone(&self) -> bool {
        is_monotone(&self.counts)
    }

    pub fn is_extinct(&self) -> bool {
        self.counts.last().is_none_or(|&x| x == 0)
    }
}

pub(crate) fn is_monotone(counts: &[u64]) -> bool {
    counts.windows(2).all(|w| w[0] <= w[1])
}
