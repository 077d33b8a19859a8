//! Event records, recorded paths, and their line-oriented file format.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::seed::SeedSpec;
use super::state::{is_monotone, FlowState};
use crate::error::{Error, Result};

/// Header line identifying the path file format.
pub const PATH_FORMAT: &str = "branchflow-path 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Birth,
    Death,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Birth => "birth",
            EventKind::Death => "death",
        })
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "birth" => Ok(EventKind::Birth),
            "death" => Ok(EventKind::Death),
            other => Err(format!("unknown event kind {other:?}")),
        }
    }
}

/// One accepted event. Births add `offspring - 1` to levels `first..=last`,
/// deaths remove one individual from each of them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowEvent {
    pub time: f64,
    pub kind: EventKind,
    pub theta: f64,
    pub u: f64,
    pub offspring: u32,
    pub first: usize,
    pub last: usize,
}

impl FlowEvent {
    /// Applies the event in place. Fails if a death hits an empty level.
    pub fn apply(&self, counts: &mut [u64]) -> Result<()> {
        if self.last >= counts.len() || self.first > self.last {
            return Err(Error::Invariant(format!(
                "event range {}..={} outside {} levels",
                self.first,
                self.last,
                counts.len()
            )));
        }
        match self.kind {
            EventKind::Birth => {
                let add = u64::from(self.offspring.saturating_sub(1));
                for c in &mut counts[self.first..=self.last] {
                    *c += add;
                }
            }
            EventKind::Death => {
                for c in &mut counts[self.first..=self.last] {
                    *c = c.checked_sub(1).ok_or_else(|| {
                        Error::Invariant(format!("death at t = {} hits an empty level", self.time))
                    })?;
                }
            }
        }
        Ok(())
    }
}

/// Metadata stored with a path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathHeader {
    pub family_id: String,
    pub levels: Vec<f64>,
    pub theta_scale: f64,
    pub rate: f64,
    pub horizon: f64,
    pub seed: SeedSpec,
}

/// A realized path: initial counts, accepted events, terminal counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowPath {
    pub header: PathHeader,
    pub initial: Vec<u64>,
    pub events: Vec<FlowEvent>,
    pub terminal: Vec<u64>,
    pub no_ops: u64,
}

/// Outcome of [`FlowPath::verify`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathVerification {
    pub events: usize,
    pub monotonicity_violations: usize,
    pub time_order_violations: usize,
    pub apply_failures: usize,
    pub terminal_matches: bool,
    pub pass: bool,
}

impl FlowPath {
    pub fn initial_state(&self) -> FlowState {
        FlowState::new(0.0, self.initial.clone())
    }

    pub fn terminal_state(&self) -> FlowState {
        FlowState::new(self.header.horizon, self.terminal.clone())
    }

    /// Replays all events from the initial counts, checking time order and
    /// level ordering after every event.
    pub fn replay(&self) -> Result<Vec<u64>> {
        let mut counts = self.initial.clone();
        let mut last = f64::NEG_INFINITY;
        for ev in &self.events {
            if !(ev.time > last) {
                return Err(Error::Invariant(format!(
                    "event times not increasing at t = {}",
                    ev.time
                )));
            }
            last = ev.time;
            ev.apply(&mut counts)?;
            if !is_monotone(&counts) {
                return Err(Error::Invariant(format!(
                    "level ordering violated at t = {}",
                    ev.time
                )));
            }
        }
        Ok(counts)
    }

    /// Counts at time `t` (right-continuous: events at `t` are included).
    pub fn counts_at(&self, t: f64) -> Result<Vec<u64>> {
        let mut counts = self.initial.clone();
        for ev in self.events.iter().take_while(|e| e.time <= t) {
            ev.apply(&mut counts)?;
        }
        Ok(counts)
    }

    /// Counts every defect instead of stopping at the first.
    pub fn verify(&self) -> PathVerification {
        let mut counts = self.initial.clone();
        let mut mono = usize::from(!is_monotone(&counts));
        let mut order = 0;
        let mut failures = 0;
        let mut last = f64::NEG_INFINITY;
        for ev in &self.events {
            if !(ev.time > last) {
                order += 1;
            }
            last = ev.time;
            if ev.apply(&mut counts).is_err() {
                failures += 1;
            }
            if !is_monotone(&counts) {
                mono += 1;
            }
        }
        let terminal_matches = counts == self.terminal;
        PathVerification {
            events: self.events.len(),
            monotonicity_violations: mono,
            time_order_violations: order,
            apply_failures: failures,
            terminal_matches,
            pass: mono == 0 && order == 0 && failures == 0 && terminal_matches,
        }
    }

    /// Writes the line-oriented representation.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let h = &self.header;
        writeln!(w, "{PATH_FORMAT}")?;
        writeln!(w, "family {}", h.family_id)?;
        writeln!(w, "seed {} {}", h.seed.master_seed, h.seed.replica_index)?;
        writeln!(w, "scale {}", h.theta_scale)?;
        writeln!(w, "rate {}", h.rate)?;
        writeln!(w, "horizon {}", h.horizon)?;
        writeln!(w, "levels {}", join(&h.levels))?;
        writeln!(w, "initial {}", join(&self.initial))?;
        writeln!(w, "terminal {}", join(&self.terminal))?;
        writeln!(w, "noops {}", self.no_ops)?;
        writeln!(w, "events {}", self.events.len())?;
        writeln!(w, "# t kind theta u z j0 j1")?;
        for e in &self.events {
            writeln!(
                w,
                "{} {} {} {} {} {} {}",
                e.time, e.kind, e.theta, e.u, e.offspring, e.first, e.last
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("path text is ASCII")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        FlowPath::read_from(std::io::BufReader::new(file), path)
    }

    /// Parses the line-oriented representation; `origin` is used in errors.
    pub fn read_from<R: BufRead>(r: R, origin: &Path) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.starts_with('#') || s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing {key:?}")))?;
            let line = line?;
            if key.is_empty() {
                return Ok((n, line));
            }
            match line.strip_prefix(key) {
                Some(rest) if rest.is_empty() || rest.starts_with(' ') => {
                    Ok((n, rest.trim().to_string()))
                }
                _ => Err(err(n, format!("expected {key:?}, found {line:?}"))),
            }
        };
        let (n, first) = next("")?;
        if first.trim() != PATH_FORMAT {
            return Err(err(n, format!("unsupported format header {first:?}")));
        }
        let (_, family_id) = next("family")?;
        let (n, seed) = next("seed")?;
        let seed_parts: Vec<u64> = parse_list(&seed).map_err(|m| err(n, m))?;
        if seed_parts.len() != 2 {
            return Err(err(n, "seed needs two integers".into()));
        }
        let (n, scale) = next("scale")?;
        let theta_scale = parse_one(&scale).map_err(|m| err(n, m))?;
        let (n, rate) = next("rate")?;
        let rate = parse_one(&rate).map_err(|m| err(n, m))?;
        let (n, horizon) = next("horizon")?;
        let horizon = parse_one(&horizon).map_err(|m| err(n, m))?;
        let (n, levels) = next("levels")?;
        let levels: Vec<f64> = parse_list(&levels).map_err(|m| err(n, m))?;
        let (n, initial) = next("initial")?;
        let initial: Vec<u64> = parse_list(&initial).map_err(|m| err(n, m))?;
        let (n, terminal) = next("terminal")?;
        let terminal: Vec<u64> = parse_list(&terminal).map_err(|m| err(n, m))?;
        let (n, noops) = next("noops")?;
        let no_ops = parse_one(&noops).map_err(|m| err(n, m))?;
        let (n, count) = next("events")?;
        let count: usize = parse_one(&count).map_err(|m| err(n, m))?;
        if initial.len() != levels.len() || terminal.len() != levels.len() {
            return Err(err(n, "count vectors do not match the level grid".into()));
        }
        let mut events = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(err(n, format!("expected 7 fields, found {}", f.len())));
            }
            let p = |s: &str| -> Result<f64> { parse_one(s).map_err(|m| err(n, m)) };
            let pu = |s: &str| -> Result<usize> { parse_one(s).map_err(|m| err(n, m)) };
            events.push(FlowEvent {
                time: p(f[0])?,
                kind: f[1].parse().map_err(|m| err(n, m))?,
                theta: p(f[2])?,
                u: p(f[3])?,
                offspring: parse_one(f[4]).map_err(|m| err(n, m))?,
                first: pu(f[5])?,
                last: pu(f[6])?,
            });
        }
        if let Some((n, Ok(extra))) = lines.next() {
            return Err(err(n, format!("trailing content {extra:?}")));
        }
        Ok(FlowPath {
            header: PathHeader {
                family_id,
                levels,
                theta_scale,
                rate,
                horizon,
                seed: SeedSpec::new(seed_parts[0], seed_parts[1]),
            },
            initial,
            events,
            terminal,
            no_ops,
        })
    }

    /// CSV of the level counts sampled at `times`.
    pub fn write_trajectory_csv<W: Write>(&self, times: &[f64], mut w: W) -> Result<()> {
        write!(w, "t")?;
        for q in &self.header.levels {
            write!(w, ",q={q}")?;
        }
        writeln!(w)?;
        let mut counts = self.initial.clone();
        let mut idx = 0;
        let mut sorted: Vec<f64> = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        for t in sorted {
            while idx < self.events.len() && self.events[idx].time <= t {
                self.events[idx].apply(&mut counts)?;
                idx += 1;
            }
            writeln!(w, "{t},{}", join_sep(&counts, ","))?;
        }
        Ok(())
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    join_sep(v, " ")
}

fn join_sep<T: fmt::Display>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn parse_one<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| format!("cannot parse {s:?}: {e}"))
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split_whitespace().map(parse_one).collect()
}
