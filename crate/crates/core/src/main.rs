use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use serde::Serialize;

use branchflow::config::{ExperimentConfig, Overrides, OUTPUT_DIR_ENV};
use branchflow::cumulant::{
    solve_cb_cumulant, solve_nonlocal_cumulant, write_oracle_csv, GridFunction, OracleRow, UnitGrid,
};
use branchflow::error::{Error, Result};
use branchflow::experiments::{
    branching_test, convergence_experiment, distribution_tests, martingale_residual,
    moment_audit_samples, run_replicas, single_samples, write_json, DistributionReport, RunContext,
    Samples, TextReport,
};
use branchflow::flowsim::{
    simulate_single, FlowKernel, FlowPath, LevelGrid, SeedSpec, Snapshots, DEFAULT_EVENT_CAP,
};
use branchflow::mechanisms::{build_discrete_family, check_condition_5a, OffspringLaw};

/// Simulation and verification of branching particle flows and their
/// superprocess limits.
#[derive(Parser)]
#[command(name = "branchflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the discrete-to-continuum mechanism approximation for each k.
    Mech(RunArgs),
    /// Simulate the single-level process; audit moments and the branching property.
    Simulate(RunArgs),
    /// Simulate the flow; audit a level marginal against the single process.
    Flow(RunArgs),
    /// Tabulate cumulant oracles.
    Ode(RunArgs),
    /// Laplace-functional convergence (and martingale residuals when configured).
    Converge(RunArgs),
    /// Replay serialized paths and check their invariants.
    Verify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory (takes precedence over BRANCHFLOW_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Override every replica count.
    #[arg(long)]
    replicas: Option<usize>,
    /// Override every k list, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<u32>>,
}

/// Every JSON artifact carries the configuration hash and seed.
#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    command: &'a str,
    config_hash: &'a str,
    master_seed: u64,
    pass: bool,
    report: &'a T,
}

struct Session {
    config: ExperimentConfig,
    hash: String,
    out: PathBuf,
}

impl Session {
    fn open(args: &RunArgs) -> Result<Self> {
        let mut config = ExperimentConfig::load(&args.config)?;
        let overrides = Overrides {
            master_seed: args.seed,
            output_dir: args.out.clone(),
            workers: args.workers,
            replicas: args.replicas,
            k_list: args.k.clone(),
        };
        let env_out = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
        config.apply(&overrides, env_out)?;
        let hash = config.hash();
        let out = config.run.output_dir.clone();
        std::fs::create_dir_all(&out)?;
        info!("config hash {hash}, output in {}", out.display());
        Ok(Session { config, hash, out })
    }

    fn ctx(&self) -> RunContext {
        RunContext {
            master_seed: self.config.run.master_seed,
            config_hash: self.hash.clone(),
            workers: self.config.workers(),
        }
    }

    fn seed(&self) -> u64 {
        self.config.run.master_seed
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn emit<T: Serialize + TextReport>(&self, command: &str, stem: &str, report: &T, pass: bool) -> Result<()> {
        let artifact = Artifact {
            command,
            config_hash: &self.hash,
            master_seed: self.seed(),
            pass,
            report,
        };
        write_json(&self.path(&format!("{stem}.json")), &artifact)?;
        let header = format!("# config_hash={}\n", self.hash);
        let text = report.to_text();
        std::fs::write(self.path(&format!("{stem}.txt")), format!("{header}{text}"))?;
        std::fs::write(self.path(&format!("{stem}.csv")), format!("{header}{}", report.to_csv()))?;
        print!("{text}");
        Ok(())
    }

    fn save_path(&self, name: &str, path: &FlowPath) -> Result<()> {
        let dir = self.path("paths");
        std::fs::create_dir_all(&dir)?;
        path.save(&dir.join(name))
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Config(format!("missing [{name}] section")))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_mech(s: &Session) -> Result<bool> {
    let m = section(&s.config.mech, "mech")?;
    let family = s.config.family.build()?;
    let report = check_condition_5a(&family, &m.k_list, m.grid_bound, m.n_grid)?;
    s.emit("mech", "mech", &report, report.pass)?;
    Ok(report.pass)
}

#[derive(Serialize)]
struct ExtinctionRow {
    t: f64,
    extinct_fraction: f64,
    std_error: f64,
}

fn extinction_rows(times: &[f64], values: &[Vec<u64>]) -> Vec<ExtinctionRow> {
    times
        .iter()
        .zip(values)
        .map(|(&t, xs)| {
            let p = xs.iter().filter(|&&x| x == 0).count() as f64 / xs.len() as f64;
            ExtinctionRow {
                t,
                extinct_fraction: p,
                std_error: (p * (1.0 - p) / xs.len() as f64).sqrt(),
            }
        })
        .collect()
}

fn emit_distribution(s: &Session, command: &str, stem: &str, report: &DistributionReport) -> Result<()> {
    s.emit(command, stem, report, report.pass)?;
    println!("{}: {}", report.label, verdict(report.pass));
    Ok(())
}

fn cmd_simulate(s: &Session) -> Result<bool> {
    let c = section(&s.config.simulate, "simulate")?;
    let law = OffspringLaw::new(c.law.clone())?;
    let workers = s.config.workers();
    let (values, sups) = single_samples(&law, c.sigma, c.x0, &c.times, c.replicas, s.seed(), workers)?;
    let audit = moment_audit_samples(c.x0, c.sigma, law.mean(), &c.times, &values, &sups)?;
    s.emit("simulate", "simulate_moments", &audit, audit.pass)?;

    let extinction = extinction_rows(&c.times, &values);
    write_json(&s.path("simulate_extinction.json"), &extinction)?;
    for r in &extinction {
        println!("P(X_{} = 0) ~ {:.5} +- {:.5}", r.t, r.extinct_fraction, r.std_error);
    }

    // Branching property at the horizon: a population started from 2 x0
    // against two independent populations started from x0.
    let last = c.times.len() - 1;
    let times = [c.times[last]];
    let doubled_seed = SeedSpec::derive_master(s.seed(), 2);
    let (doubled, _) = single_samples(&law, c.sigma, 2 * c.x0, &times, c.replicas, doubled_seed, workers)?;
    let branching = branching_test("branching property", &doubled[0], &values[last], &c.s_points);
    emit_distribution(s, "simulate", "simulate_branching", &branching)?;

    for i in 0..c.save_paths.min(c.replicas) {
        let horizon = c.times[last];
        let path = simulate_single(&law, c.sigma, c.x0, horizon, SeedSpec::new(s.seed(), i as u64))?;
        s.save_path(&format!("single_{i:06}.path"), &path)?;
    }
    Ok(audit.pass && branching.pass)
}

fn cmd_flow(s: &Session) -> Result<bool> {
    let c = section(&s.config.flow, "flow")?;
    let target = s.config.family.build()?;
    let (family, sigma) = build_discrete_family(&target, c.k)?;
    let grid = LevelGrid::new(c.levels.clone())?;
    let kappa = f64::from(c.k);
    let kernel = FlowKernel::new(&family, &grid, kappa, c.theta_cells)?;
    let workers = s.config.workers();
    let horizon = c.times[c.times.len() - 1];
    let runs = run_replicas(s.seed(), c.replicas, workers, |seed| {
        let mut snaps = Snapshots::new(c.times.clone());
        kernel.run(&c.x0, horizon, seed, DEFAULT_EVENT_CAP, &mut snaps)?;
        Ok((snaps.values, snaps.sups))
    })?;

    // A single level of the flow is itself a single-level process with the
    // offspring law at its scaled level.
    let j = c.marginal.unwrap_or(c.levels.len() - 1);
    let law = family.law_at(kappa * c.levels[j])?;
    let level = |sel: fn(&(Samples, Samples)) -> &Samples| -> Samples {
        (0..c.times.len())
            .map(|ti| runs.iter().map(|r| sel(r)[ti][j]).collect())
            .collect()
    };
    let values = level(|r| &r.0);
    let sups = level(|r| &r.1);
    let audit = moment_audit_samples(c.x0[j], sigma, law.mean(), &c.times, &values, &sups)?;
    s.emit("flow", "flow_moments", &audit, audit.pass)?;

    let single_seed = SeedSpec::derive_master(s.seed(), 1);
    let last = c.times.len() - 1;
    let (single, _) = single_samples(&law, sigma, c.x0[j], &[horizon], c.replicas, single_seed, workers)?;
    let label = format!("flow level {j} against single process");
    let marginal = distribution_tests(&label, &values[last], &single[0], &c.s_points);
    emit_distribution(s, "flow", "flow_marginal", &marginal)?;

    let total_extinct = runs
        .iter()
        .filter(|r| r.0[last].iter().all(|&x| x == 0))
        .count() as f64
        / c.replicas as f64;
    println!("P(flow extinct at t = {horizon}) ~ {total_extinct:.5}");

    for i in 0..c.save_paths.min(c.replicas) {
        let path = kernel.simulate(&c.x0, horizon, SeedSpec::new(s.seed(), i as u64))?;
        s.save_path(&format!("flow_{i:06}.path"), &path)?;
    }
    Ok(audit.pass && marginal.pass)
}

fn cmd_ode(s: &Session) -> Result<bool> {
    let c = section(&s.config.oracle, "oracle")?;
    let family = s.config.family.build()?;
    let ode = s.config.ode;
    let grid = UnitGrid::new(
        s.config
            .converge
            .as_ref()
            .map_or(1000, |cv| cv.grid_intervals),
    )?;
    let top = family.at(1.0);
    let mut rows = Vec::new();
    for &t in &c.times {
        for &lambda in &c.lambdas {
            rows.push(OracleRow {
                t,
                input: format!("local lambda={lambda}"),
                prediction: solve_cb_cumulant(&top, lambda, t, &ode)?,
            });
            let f = GridFunction::constant(grid, lambda)?;
            let v = solve_nonlocal_cumulant(&family, &f, t, &ode)?;
            rows.push(OracleRow {
                t,
                input: format!("nonlocal lambda={lambda} x=1"),
                prediction: v.at(1.0),
            });
        }
    }
    let file = std::fs::File::create(s.path("oracle.csv"))?;
    write_oracle_csv(std::io::BufWriter::new(file), &s.hash, &rows)?;
    for r in &rows {
        println!("t={} {}: {}", r.t, r.input, r.prediction);
    }
    Ok(true)
}

fn cmd_converge(s: &Session) -> Result<bool> {
    let c = section(&s.config.converge, "converge")?;
    let family = s.config.family.build()?;
    let spec = c.spec(s.config.ode)?;
    let ctx = s.ctx();
    let report = convergence_experiment(&family, &s.config.family.name, &spec, &ctx)?;
    s.emit("converge", "converge", &report, report.pass)?;
    let mut pass = report.pass;
    if let Some(m) = &s.config.martingale {
        let report = martingale_residual(&family, &s.config.family.name, &m.spec()?, &ctx)?;
        s.emit("converge", "martingale", &report, report.pass)?;
        pass &= report.pass;
    }
    Ok(pass)
}

fn cmd_verify(paths: &[PathBuf]) -> Result<bool> {
    let mut pass = true;
    for p in paths {
        let ok = verify_one(p)?;
        pass &= ok;
    }
    Ok(pass)
}

fn verify_one(p: &Path) -> Result<bool> {
    let path = FlowPath::load(p)?;
    let v = path.verify();
    println!(
        "{}: {} events, {} monotonicity violations, {} time-order violations, {} failed updates, terminal {} -> {}",
        p.display(),
        v.events,
        v.monotonicity_violations,
        v.time_order_violations,
        v.apply_failures,
        if v.terminal_matches { "matches" } else { "differs" },
        verdict(v.pass)
    );
    Ok(v.pass)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Verify { paths } => cmd_verify(paths),
        Command::Mech(a) => cmd_mech(&Session::open(a)?),
        Command::Simulate(a) => cmd_simulate(&Session::open(a)?),
        Command::Flow(a) => cmd_flow(&Session::open(a)?),
        Command::Ode(a) => cmd_ode(&Session::open(a)?),
        Command::Converge(a) => cmd_converge(&Session::open(a)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {
            println!("verdict: PASS");
            ExitCode::SUCCESS
        }
        Ok(false) => {
            println!("verdict: FAIL");
            ExitCode::from(1)
        }
        Err(e) => {
            if let Error::Resource { .. } = e {
                warn!("increase the event cap or shorten the horizon");
            }
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
