//! Exact simulation of one branching process: each of the `X` individuals
//! branches at rate `sigma`, replaced by `z` offspring drawn from the law.

use rand::Rng;
use rand_distr::Exp1;

use super::observer::{Observer, Recorder, RunSummary};
use super::path::{EventKind, FlowEvent, FlowPath, PathHeader};
use super::seed::SeedSpec;
use crate::error::{Error, Result};
use crate::mechanisms::OffspringLaw;

/// Default cap on the number of events of a single path.
pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// Runs one path and feeds it to `obs`. Events are encoded on the single
/// level `q = 1`: `z >= 1` as a birth, `z = 0` as a death; `u` is the
/// uniform mark selecting the branching individual.
pub fn run_single<O: Observer>(
    law: &OffspringLaw,
    sigma: f64,
    x0: u64,
    horizon: f64,
    seed: SeedSpec,
    cap: u64,
    obs: &mut O,
) -> Result<RunSummary> {
    check_common(sigma, horizon)?;
    let mut rng = seed.rng();
    let mut x = [x0];
    obs.on_start(&x);
    let mut t = 0.0;
    let mut events = 0u64;
    let mut extinction_time = None;
    loop {
        if x[0] == 0 {
            if x0 > 0 {
                extinction_time = Some(t);
            }
            break;
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / (sigma * x[0] as f64);
        t += dt;
        if t >= horizon {
            break;
        }
        if events >= cap {
            return Err(Error::Resource { cap, time: t });
        }
        let z = law.sample(&mut rng);
        let u = x[0] as f64 * (1.0 - rng.random::<f64>());
        x[0] = x[0] + u64::from(z) - 1;
        events += 1;
        let event = FlowEvent {
            time: t,
            kind: if z == 0 { EventKind::Death } else { EventKind::Birth },
            theta: 0.0,
            u,
            offspring: z,
            first: 0,
            last: 0,
        };
        obs.on_event(&event, &x);
    }
    obs.on_finish(horizon, &x);
    Ok(RunSummary {
        terminal: x.to_vec(),
        events,
        no_ops: 0,
        extinction_time,
    })
}

/// Simulates and records a full single-level path.
pub fn simulate_single(
    law: &OffspringLaw,
    sigma: f64,
    x0: u64,
    horizon: f64,
    seed: SeedSpec,
) -> Result<FlowPath> {
    let mut rec = Recorder::default();
    let summary = run_single(law, sigma, x0, horizon, seed, DEFAULT_EVENT_CAP, &mut rec)?;
    Ok(FlowPath {
        header: PathHeader {
            family_id: "single".into(),
            levels: vec![1.0],
            theta_scale: 1.0,
            rate: sigma,
            horizon,
            seed,
        },
        initial: vec![x0],
        events: rec.events,
        terminal: summary.terminal,
        no_ops: 0,
    })
}

pub(crate) fn check_common(sigma: f64, horizon: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "rate",
            value: sigma,
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain {
            what: "horizon",
            value: horizon,
        });
    }
    Ok(())
}
