//! Exact simulation of the coupled flow across a level grid by thinning.
//!
//! Births are driven by a Poisson measure on `(t, z, theta, u)` with
//! intensity `sigma dt pibar(dz, dtheta) du`, where
//! `pibar(A x [0, theta]) = pi_theta(A)`; deaths by an independent measure
//! with intensity `sigma dt dtheta du`, killing at level `q` when
//! `theta <= b(kappa q)`. Candidates are drawn on the rectangle covering all
//! levels and resolved against the current staircase.
//!
//! The birth `theta`-marginal is split into cells: an atom at 0 carrying
//! `pi_0` restricted to `{1, 2, ...}`, then one cell per interval of a grid
//! that contains every scaled level `kappa q_j`. A cell carries the exact
//! increment `pi_hi - pi_lo` on `{1, 2, ...}`, and every level lies on a
//! cell boundary, so the set of affected levels depends only on the cell;
//! `theta` is placed uniformly inside its cell for the record.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};

use super::observer::{Observer, Recorder, RunSummary};
use super::path::{EventKind, FlowEvent, FlowPath, PathHeader};
use super::seed::SeedSpec;
use super::single::{check_common, DEFAULT_EVENT_CAP};
use super::state::{is_monotone, LevelGrid};
use crate::error::{Error, Result};
use crate::mechanisms::{DiscreteFlowFamily, NORMALIZATION_TOL};

/// Default number of uniform cells on `[0, kappa q_n]`.
pub const DEFAULT_THETA_CELLS: usize = 100;

/// Adjacent cells whose normalized offspring increments agree to this
/// tolerance share a sampler.
const SHARE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Cell {
    lo: f64,
    hi: f64,
    /// First level index `j` with `kappa q_j >= theta` for `theta` in the cell.
    start: usize,
    /// Index into the kernel's offspring samplers (over `z - 1`).
    law: usize,
}

/// Precomputed driving intensities for one family, grid and scale.
#[derive(Clone, Debug)]
pub struct FlowKernel {
    family_id: String,
    rate: f64,
    kappa: f64,
    levels: Vec<f64>,
    scaled: Vec<f64>,
    /// `b(kappa q_j)`, nonincreasing in `j`.
    death: Vec<f64>,
    cells: Vec<Cell>,
    /// Distinct conditional offspring laws; cells with proportional
    /// increments share one sampler.
    laws: Vec<WeightedAliasIndex<f64>>,
    cell_masses: Vec<f64>,
    cell_sampler: WeightedAliasIndex<f64>,
    birth_mass: f64,
}

impl FlowKernel {
    pub fn new(
        family: &DiscreteFlowFamily,
        grid: &LevelGrid,
        kappa: f64,
        theta_cells: usize,
    ) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Domain {
                what: "theta scale",
                value: kappa,
            });
        }
        let levels = grid.levels().to_vec();
        let scaled: Vec<f64> = levels.iter().map(|q| kappa * q).collect();
        let top = scaled[scaled.len() - 1];
        if top > family.theta_max() * (1.0 + 1e-12) {
            return Err(Error::input(format!(
                "kappa * q_n = {top} exceeds the family's theta range {}",
                family.theta_max()
            )));
        }
        let death = scaled
            .iter()
            .map(|&th| family.death_probability(th))
            .collect::<Result<Vec<_>>>()?;
        if death.windows(2).any(|w| w[1] > w[0] + NORMALIZATION_TOL) {
            return Err(Error::input(
                "death probability increases in theta; pi_theta is not monotone",
            ));
        }

        // Cell boundaries: uniform refinement merged with the scaled levels.
        let cells_n = theta_cells.max(1);
        let mut bounds: Vec<f64> = (0..=cells_n)
            .map(|i| top * i as f64 / cells_n as f64)
            .chain(scaled.iter().copied())
            .collect();
        bounds.sort_by(f64::total_cmp);
        let merge_tol = 1e-12 * top.max(1.0);
        let mut merged: Vec<f64> = Vec::with_capacity(bounds.len());
        for b in bounds {
            match merged.last_mut() {
                Some(last) if b - *last <= merge_tol => {
                    // Keep level points exact.
                    if scaled.contains(&b) {
                        *last = b;
                    }
                }
                _ => merged.push(b),
            }
        }

        let mut cells = Vec::new();
        let mut masses = Vec::new();
        let mut laws = Vec::new();
        let mut last_law: Vec<f64> = Vec::new();
        let mut prev = family.probs_at(0.0)?;
        let mut push_cell = |lo: f64, hi: f64, weights: Vec<f64>| -> Result<()> {
            let mass: f64 = weights.iter().sum();
            if mass <= 0.0 {
                return Ok(());
            }
            let start = scaled.partition_point(|&s| s < hi);
            let normalized: Vec<f64> = weights.iter().map(|w| w / mass).collect();
            let same = normalized.len() == last_law.len()
                && normalized
                    .iter()
                    .zip(&last_law)
                    .all(|(a, b)| (a - b).abs() <= SHARE_TOL);
            if !same {
                laws.push(
                    WeightedAliasIndex::new(weights)
                        .map_err(|e| Error::input(format!("offspring cell sampler: {e}")))?,
                );
                last_law = normalized;
            }
            cells.push(Cell {
                lo,
                hi,
                start,
                law: laws.len() - 1,
            });
            masses.push(mass);
            Ok(())
        };
        push_cell(0.0, 0.0, prev.iter().skip(1).copied().collect())?;
        for w in merged.windows(2) {
            let cur = family.probs_at(w[1])?;
            let len = cur.len().max(prev.len());
            let mut weights = Vec::with_capacity(len.saturating_sub(1));
            for z in 1..len {
                let d = cur.get(z).copied().unwrap_or(0.0) - prev.get(z).copied().unwrap_or(0.0);
                if d < -NORMALIZATION_TOL {
                    return Err(Error::input(format!(
                        "p_{z} decreases on ({}, {}]; pi_theta is not monotone",
                        w[0], w[1]
                    )));
                }
                weights.push(d.max(0.0));
            }
            push_cell(w[0], w[1], weights)?;
            prev = cur;
        }
        let birth_mass: f64 = masses.iter().sum();
        let cell_sampler = WeightedAliasIndex::new(if masses.is_empty() {
            vec![1.0]
        } else {
            masses.clone()
        })
        .map_err(|e| Error::input(format!("theta cell sampler: {e}")))?;
        Ok(FlowKernel {
            family_id: family.id().to_string(),
            rate: family.rate(),
            kappa,
            levels,
            scaled,
            death,
            cells,
            laws,
            cell_masses: masses,
            cell_sampler,
            birth_mass,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `b(kappa q_j)` per level.
    pub fn death_probabilities(&self) -> &[f64] {
        &self.death
    }

    /// Total birth mass `pi_{kappa q_n}({1, 2, ...}) = 1 - b(kappa q_n)`.
    pub fn birth_mass(&self) -> f64 {
        self.birth_mass
    }

    /// Number of distinct conditional offspring laws among the cells.
    pub fn distinct_laws(&self) -> usize {
        self.laws.len()
    }

    /// Birth cells as `(lo, hi, mass)`; the first may be the atom at 0.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        self.cells
            .iter()
            .zip(&self.cell_masses)
            .map(|(c, &m)| (c.lo, c.hi, m))
            .collect()
    }

    /// `sigma X(q_n) [(1 - b(kappa q_n)) + b(kappa q_1)]`.
    pub fn candidate_rate(&self, counts: &[u64]) -> f64 {
        let top = counts[counts.len() - 1] as f64;
        self.rate * top * (self.birth_mass + self.death[0])
    }

    /// Exact rate of accepted events: births hit level `n` whenever they
    /// occur, deaths only where `u` and `theta` both select a level.
    pub fn accepted_rate(&self, counts: &[u64]) -> f64 {
        let n = counts.len();
        let births = self.birth_mass * counts[n - 1] as f64;
        // Death area: union over j of (0, b_j] x (0, X_j], a staircase.
        let mut deaths = 0.0;
        let mut below = 0u64;
        for (&x, &b) in counts.iter().zip(&self.death) {
            // u in (X_{j-1}, X_j] is first admitted at level j; theta must
            // then satisfy theta <= b_j.
            deaths += (x - below) as f64 * b;
            below = x;
        }
        self.rate * (births + deaths)
    }

    /// Affected levels of a birth candidate: the suffix
    /// `{j : kappa q_j >= theta, X_j >= u}`.
    pub fn resolve_birth(&self, theta: f64, u: f64, counts: &[u64]) -> Option<(usize, usize)> {
        let by_theta = self.scaled.partition_point(|&s| s < theta);
        self.birth_range(by_theta, u, counts)
    }

    fn birth_range(&self, start: usize, u: f64, counts: &[u64]) -> Option<(usize, usize)> {
        let by_u = counts.partition_point(|&x| (x as f64) < u);
        let first = start.max(by_u);
        (first < counts.len()).then(|| (first, counts.len() - 1))
    }

    /// Affected levels of a death candidate: `{j : u <= X_j, theta <= b_j}`,
    /// a contiguous range because `X` is nondecreasing and `b` nonincreasing.
    pub fn resolve_death(&self, theta: f64, u: f64, counts: &[u64]) -> Option<(usize, usize)> {
        let end = self.death.partition_point(|&b| theta <= b);
        let first = counts.partition_point(|&x| (x as f64) < u);
        (first < end).then(|| (first, end - 1))
    }

    /// Draws the marks of one candidate at `time` and resolves it. Returns
    /// `None` for a no-op. Requires a positive candidate rate.
    pub fn sample_candidate<R: Rng + ?Sized>(
        &self,
        time: f64,
        counts: &[u64],
        rng: &mut R,
    ) -> Option<FlowEvent> {
        let top = counts[counts.len() - 1] as f64;
        let total = self.birth_mass + self.death[0];
        let pick: f64 = rng.random::<f64>() * total;
        if pick < self.birth_mass {
            let cell = &self.cells[self.cell_sampler.sample(rng)];
            let theta = cell.lo + (cell.hi - cell.lo) * (1.0 - rng.random::<f64>());
            let z = self.laws[cell.law].sample(rng) as u32 + 1;
            let u = top * (1.0 - rng.random::<f64>());
            let (first, last) = self.birth_range(cell.start, u, counts)?;
            Some(FlowEvent {
                time,
                kind: EventKind::Birth,
                theta,
                u,
                offspring: z,
                first,
                last,
            })
        } else {
            let theta = self.death[0] * (1.0 - rng.random::<f64>());
            let u = top * (1.0 - rng.random::<f64>());
            let (first, last) = self.resolve_death(theta, u, counts)?;
            Some(FlowEvent {
                time,
                kind: EventKind::Death,
                theta,
                u,
                offspring: 0,
                first,
                last,
            })
        }
    }

    /// Applies an event, asserting that level ordering survives it.
    pub fn apply(&self, event: &FlowEvent, counts: &mut [u64]) -> Result<()> {
        if event.kind == EventKind::Death
            && event.first > 0
            && counts[event.first] < counts[event.first - 1] + 1
        {
            return Err(Error::Invariant(format!(
                "death at t = {} would break level ordering at index {}",
                event.time, event.first
            )));
        }
        event.apply(counts)?;
        debug_assert!(is_monotone(counts));
        Ok(())
    }

    /// Runs one path from `x0` and feeds it to `obs`.
    pub fn run<O: Observer>(
        &self,
        x0: &[u64],
        horizon: f64,
        seed: SeedSpec,
        cap: u64,
        obs: &mut O,
    ) -> Result<RunSummary> {
        check_common(self.rate, horizon)?;
        if x0.len() != self.levels.len() {
            return Err(Error::GridMismatch {
                expected: self.levels.len(),
                found: x0.len(),
            });
        }
        if !is_monotone(x0) {
            return Err(Error::input("initial counts must be nondecreasing across levels"));
        }
        let mut rng = seed.rng();
        let mut counts = x0.to_vec();
        let n = counts.len();
        obs.on_start(&counts);
        let mut t = 0.0;
        let mut candidates = 0u64;
        let mut events = 0u64;
        let mut no_ops = 0u64;
        let mut extinction_time = None;
        let per_individual = self.rate * (self.birth_mass + self.death[0]);
        if per_individual > 0.0 {
            loop {
                if counts[n - 1] == 0 {
                    if x0[n - 1] > 0 {
                        extinction_time = Some(t);
                    }
                    break;
                }
                let lambda = per_individual * counts[n - 1] as f64;
                t += rng.sample::<f64, _>(Exp1) / lambda;
                if t >= horizon {
                    break;
                }
                if candidates >= cap {
                    return Err(Error::Resource { cap, time: t });
                }
                candidates += 1;
                match self.sample_candidate(t, &counts, &mut rng) {
                    Some(ev) => {
                        self.apply(&ev, &mut counts)?;
                        events += 1;
                        obs.on_event(&ev, &counts);
                    }
                    None => {
                        no_ops += 1;
                        obs.on_noop();
                    }
                }
            }
        }
        obs.on_finish(horizon, &counts);
        Ok(RunSummary {
            terminal: counts,
            events,
            no_ops,
            extinction_time,
        })
    }

    /// Runs and records a full path.
    pub fn simulate(&self, x0: &[u64], horizon: f64, seed: SeedSpec) -> Result<FlowPath> {
        let mut rec = Recorder::default();
        let summary = self.run(x0, horizon, seed, DEFAULT_EVENT_CAP, &mut rec)?;
        Ok(FlowPath {
            header: PathHeader {
                family_id: self.family_id.clone(),
                levels: self.levels.clone(),
                theta_scale: self.kappa,
                rate: self.rate,
                horizon,
                seed,
            },
            initial: x0.to_vec(),
            events: rec.events,
            terminal: summary.terminal,
            no_ops: summary.no_ops,
        })
    }
}

/// Simulates the coupled flow with the default cell refinement.
pub fn simulate_flow(
    family: &DiscreteFlowFamily,
    grid: &LevelGrid,
    kappa: f64,
    x0: &[u64],
    horizon: f64,
    seed: SeedSpec,
) -> Result<FlowPath> {
    FlowKernel::new(family, grid, kappa, DEFAULT_THETA_CELLS)?.simulate(x0, horizon, seed)
}
