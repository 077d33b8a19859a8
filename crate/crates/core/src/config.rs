//! Experiment configuration: a TOML file with one section per subcommand.
//! Unknown keys are rejected; the SHA-256 of the canonical JSON form of the
//! resolved configuration identifies a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cumulant::OdeConfig;
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceSpec, MartingaleSpec, TestFunction};
use crate::mechanisms::{CatalogParams, MechanismFamily};

/// Environment variable overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "BRANCHFLOW_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub family: FamilySpec,
    #[serde(default)]
    pub ode: OdeConfig,
    pub mech: Option<MechConfig>,
    pub simulate: Option<SimulateConfig>,
    pub flow: Option<FlowConfig>,
    pub converge: Option<ConvergeConfig>,
    pub martingale: Option<MartingaleConfig>,
    pub oracle: Option<OracleConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

/// A catalog entry with optional parameter overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    pub b0: Option<f64>,
    pub c: Option<f64>,
    pub gamma_m: Option<f64>,
    pub rho_m: Option<f64>,
    pub h: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
}

impl FamilySpec {
    pub fn named(name: &str) -> Self {
        FamilySpec {
            name: name.to_string(),
            b0: None,
            c: None,
            gamma_m: None,
            rho_m: None,
            h: None,
            gamma: None,
            rho: None,
        }
    }

    pub fn params(&self) -> Result<CatalogParams> {
        let mut p = CatalogParams::named(&self.name).ok_or_else(|| {
            Error::Config(format!(
                "unknown family {:?}; expected one of {:?}",
                self.name,
                CatalogParams::NAMES
            ))
        })?;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.b0, self.b0);
        set(&mut p.c, self.c);
        set(&mut p.gamma_m, self.gamma_m);
        set(&mut p.rho_m, self.rho_m);
        set(&mut p.h, self.h);
        set(&mut p.gamma, self.gamma);
        set(&mut p.rho, self.rho);
        Ok(p)
    }

    pub fn build(&self) -> Result<MechanismFamily> {
        MechanismFamily::from_catalog(&self.params()?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechConfig {
    pub k_list: Vec<u32>,
    pub grid_bound: f64,
    pub n_grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Offspring probabilities `p_0, p_1, ...`.
    pub law: Vec<f64>,
    pub sigma: f64,
    pub x0: u64,
    pub times: Vec<f64>,
    pub replicas: usize,
    pub s_points: Vec<f64>,
    /// Number of leading replicas whose full paths are written.
    #[serde(default)]
    pub save_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Scale: the flow of the family discretized at `k`, theta scale `k`.
    pub k: u32,
    pub levels: Vec<f64>,
    pub x0: Vec<u64>,
    /// Snapshot times; the last one is the horizon.
    pub times: Vec<f64>,
    pub replicas: usize,
    pub s_points: Vec<f64>,
    pub theta_cells: usize,
    /// Level whose marginal is audited against the single process;
    /// defaults to the top level.
    pub marginal: Option<usize>,
    #[serde(default)]
    pub save_paths: usize,
}

/// A test function: `lambdas` for `sum_i lambda_i 1_[0, q_i]`, or `fn` in
/// `{"one", "x", "exp"}` sampled at the levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub id: String,
    pub lambdas: Option<Vec<f64>>,
    #[serde(rename = "fn")]
    pub function: Option<String>,
}

impl TestSpec {
    pub fn resolve(&self, levels: &[f64]) -> Result<TestFunction> {
        match (&self.lambdas, &self.function) {
            (Some(l), None) => {
                if l.len() != levels.len() {
                    return Err(Error::Config(format!(
                        "test {:?} has {} lambdas for {} levels",
                        self.id,
                        l.len(),
                        levels.len()
                    )));
                }
                TestFunction::step(&self.id, l)
            }
            (None, Some(name)) => {
                let f: fn(f64) -> f64 = match name.as_str() {
                    "one" => |_| 1.0,
                    "x" => |x| x,
                    "exp" => |x| (-x).exp(),
                    other => {
                        return Err(Error::Config(format!(
                            "unknown test function {other:?}; expected one, x or exp"
                        )))
                    }
                };
                TestFunction::sampled(&self.id, levels, f)
            }
            _ => Err(Error::Config(format!(
                "test {:?} needs exactly one of lambdas or fn",
                self.id
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub k_list: Vec<u32>,
    pub levels: Vec<f64>,
    pub initial: Vec<f64>,
    pub times: Vec<f64>,
    pub tests: Vec<TestSpec>,
    pub replicas: usize,
    pub slack: f64,
    pub grid_intervals: usize,
    pub theta_cells: usize,
}

impl ConvergeConfig {
    pub fn spec(&self, ode: OdeConfig) -> Result<ConvergenceSpec> {
        let tests = self
            .tests
            .iter()
            .map(|t| t.resolve(&self.levels))
            .collect::<Result<Vec<_>>>()?;
        let spec = ConvergenceSpec {
            k_list: self.k_list.clone(),
            levels: self.levels.clone(),
            initial: self.initial.clone(),
            times: self.times.clone(),
            tests,
            replicas: self.replicas,
            slack: self.slack,
            grid_intervals: self.grid_intervals,
            theta_cells: self.theta_cells,
            ode,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleConfig {
    pub k_list: Vec<u32>,
    pub levels: Vec<f64>,
    pub initial: Vec<f64>,
    pub t: f64,
    pub test: TestSpec,
    pub replicas: usize,
    pub slack: f64,
    pub theta_cells: usize,
}

impl MartingaleConfig {
    pub fn spec(&self) -> Result<MartingaleSpec> {
        Ok(MartingaleSpec {
            k_list: self.k_list.clone(),
            levels: self.levels.clone(),
            initial: self.initial.clone(),
            t: self.t,
            test: self.test.resolve(&self.levels)?,
            replicas: self.replicas,
            slack: self.slack,
            theta_cells: self.theta_cells,
        })
    }
}

/// Oracle tables of the cumulant `v_t(lambda)` of the top member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Command-line overrides, applied before hashing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub replicas: Option<usize>,
    pub k_list: Option<Vec<u32>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Flags first, then the environment variable for the output directory.
    pub fn apply(&mut self, o: &Overrides, env_output: Option<PathBuf>) -> Result<()> {
        if let Some(s) = o.master_seed {
            self.run.master_seed = s;
        }
        if let Some(d) = o.output_dir.clone().or(env_output) {
            self.run.output_dir = d;
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
        if let Some(r) = o.replicas {
            if let Some(s) = &mut self.simulate {
                s.replicas = r;
            }
            if let Some(s) = &mut self.flow {
                s.replicas = r;
            }
            if let Some(s) = &mut self.converge {
                s.replicas = r;
            }
            if let Some(s) = &mut self.martingale {
                s.replicas = r;
            }
        }
        if let Some(k) = &o.k_list {
            if let Some(s) = &mut self.mech {
                s.k_list = k.clone();
            }
            if let Some(s) = &mut self.converge {
                s.k_list = k.clone();
            }
            if let Some(s) = &mut self.martingale {
                s.k_list = k.clone();
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.family.params()?;
        self.ode.validate()?;
        if let Some(m) = &self.mech {
            if m.k_list.is_empty() {
                return bad("mech.k_list is empty".into());
            }
            if !(m.grid_bound > 0.0) || m.n_grid < 2 {
                return bad("mech.grid_bound must be positive and mech.n_grid at least 2".into());
            }
        }
        if let Some(s) = &self.simulate {
            if !(s.sigma > 0.0) || s.replicas == 0 {
                return bad("simulate needs sigma > 0 and replicas".into());
            }
            if s.times.is_empty() || s.times.windows(2).any(|w| w[1] <= w[0]) || !(s.times[0] > 0.0) {
                return bad("simulate.times must be positive and strictly increasing".into());
            }
            if s.s_points.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return bad("simulate.s_points must lie in [0, 1]".into());
            }
        }
        if let Some(f) = &self.flow {
            if f.k == 0 || f.levels.len() != f.x0.len() || f.replicas == 0 {
                return bad("flow needs k > 0, one x0 per level and replicas".into());
            }
            if f.times.is_empty() || f.times.windows(2).any(|w| w[1] <= w[0]) || !(f.times[0] > 0.0) {
                return bad("flow.times must be positive and strictly increasing".into());
            }
            if f.marginal.is_some_and(|j| j >= f.levels.len()) {
                return bad("flow.marginal is not a level index".into());
            }
            if f.s_points.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return bad("flow.s_points must lie in [0, 1]".into());
            }
        }
        if let Some(c) = &self.converge {
            c.spec(self.ode)?;
        }
        if let Some(m) = &self.martingale {
            m.spec()?;
        }
        Ok(())
    }

    pub fn workers(&self) -> Option<usize> {
        (self.run.workers > 0).then_some(self.run.workers)
    }

    /// Canonical JSON: keys sorted, no whitespace.
    /// The output directory and worker count are left out: neither changes
    /// any result.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("configuration serializes");
        if let Some(run) = v.get_mut("run").and_then(|r| r.as_object_mut()) {
            run.remove("output_dir");
            run.remove("workers");
        }
        v.to_string()
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
