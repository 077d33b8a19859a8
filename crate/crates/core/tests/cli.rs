//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

use branchflow::flowsim::FlowPath;

const BASE: &str = r#"
[run]
master_seed = 42
output_dir = "unused"

[family]
name = "feller"

[mech]
k_list = [10, 100]
grid_bound = 5.0
n_grid = 101

[simulate]
law = [0.5, 0.0, 0.5]
sigma = 1.0
x0 = 1
times = [1.0, 2.0]
replicas = 20000
s_points = [0.2, 0.5, 0.8]
save_paths = 1

[flow]
k = 10
levels = [0.5, 1.0]
x0 = [5, 10]
times = [0.5]
replicas = 10000
s_points = [0.5, 0.8]
theta_cells = 20
save_paths = 1

[converge]
k_list = [10, 20]
levels = [1.0]
initial = [1.0]
times = [0.0, 0.5]
replicas = 2000
slack = 2.0
grid_intervals = 100
theta_cells = 20
tests = [{ id = "one", lambdas = [1.0] }]

[oracle]
times = [1.0]
lambdas = [1.0]
"#;

fn branchflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("BRANCHFLOW_OUT")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), config).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mech_passes_and_is_reproducible() {
    let dir = setup(BASE);
    let a = branchflow(&["mech", "-c", "c.toml", "--out", "a"], dir.path());
    let b = branchflow(&["mech", "-c", "c.toml", "--out", "b"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(b.status.code(), Some(0));
    let ja = std::fs::read(dir.path().join("a/mech.json")).unwrap();
    let jb = std::fs::read(dir.path().join("b/mech.json")).unwrap();
    assert_eq!(ja, jb);
    let json: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    let records = json["report"]["records"].as_array().unwrap();
    assert_eq!(records.len(), 2);
    for r in records {
        for key in ["k", "sup_error", "lipschitz", "pass"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("a/mech.csv")).unwrap();
    assert!(csv.starts_with("# config_hash="));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = setup(BASE);
    let empty = branchflow(&["mech", "-c", "c.toml", "--k", ""], dir.path());
    assert_eq!(empty.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), BASE.replace("[mech]", "[mech]\nbogus = 1")).unwrap();
    let bad = branchflow(&["mech", "-c", "bad.toml"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));
    std::fs::write(dir.path().join("nok.toml"), BASE.replace("k_list = [10, 100]", "k_list = []")).unwrap();
    assert_eq!(branchflow(&["mech", "-c", "nok.toml"], dir.path()).status.code(), Some(2));
    let missing = branchflow(&["ode", "-c", "none.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn simulate_extinction_and_zero_start() {
    let dir = setup(BASE);
    let o = branchflow(&["simulate", "-c", "c.toml", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let ext: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s/simulate_extinction.json")).unwrap()).unwrap();
    // Critical binary splitting at rate 1: P(X_2 = 0) = 2 / (2 + 2).
    let p = ext[1]["extinct_fraction"].as_f64().unwrap();
    let se = ext[1]["std_error"].as_f64().unwrap();
    assert!((p - 0.5).abs() <= 4.0 * se, "{p} +- {se}");
    let path = FlowPath::load(&dir.path().join("s/paths/single_000000.path")).unwrap();
    assert!(path.verify().pass);

    std::fs::write(dir.path().join("z.toml"), BASE.replace("x0 = 1\n", "x0 = 0\n")).unwrap();
    let z = branchflow(&["simulate", "-c", "z.toml", "--out", "z"], dir.path());
    assert_eq!(z.status.code(), Some(0), "{}", stdout(&z));
    let audit: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("z/simulate_moments.json")).unwrap()).unwrap();
    for row in audit["report"]["rows"].as_array().unwrap() {
        assert_eq!(row["mean"].as_f64(), Some(0.0));
        assert_eq!(row["sup_mean"].as_f64(), Some(0.0));
    }
}

#[test]
fn flow_paths_verify_and_corruption_fails() {
    let dir = setup(BASE);
    let o = branchflow(&["flow", "-c", "c.toml", "--out", "f", "--workers", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let good = dir.path().join("f/paths/flow_000000.path");
    let v = branchflow(&["verify", good.to_str().unwrap()], dir.path());
    assert_eq!(v.status.code(), Some(0));

    // Lift the lower level above the upper one in the initial staircase.
    let text = std::fs::read_to_string(&good).unwrap();
    let corrupted = text.replacen("initial 5 10", "initial 11 10", 1);
    assert_ne!(text, corrupted);
    let bad = dir.path().join("bad.path");
    std::fs::write(&bad, corrupted).unwrap();
    let v = branchflow(&["verify", bad.to_str().unwrap()], dir.path());
    assert_eq!(v.status.code(), Some(1), "{}", stdout(&v));
    assert!(stdout(&v).contains("FAIL"));
}

#[test]
fn converge_and_oracle_tables() {
    let dir = setup(BASE);
    let o = branchflow(&["converge", "-c", "c.toml", "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("c/converge.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    // t = 0 rows are exact: the start is a deterministic staircase.
    for row in report["report"]["rows"].as_array().unwrap() {
        if row["t"].as_f64() == Some(0.0) {
            assert_eq!(row["gap"].as_f64(), Some(0.0));
        }
    }
    let o = branchflow(&["ode", "-c", "c.toml", "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("c/oracle.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    // Feller: v_1(1) = 1 / (1 + 1/2).
    for r in rows {
        let v: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-9, "{r}");
    }
}

#[test]
fn output_directory_precedence() {
    let dir = setup(BASE);
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_branchflow"));
        c.args(["ode", "-c", "c.toml"]).args(extra).current_dir(dir.path());
        match env {
            Some(e) => c.env("BRANCHFLOW_OUT", e),
            None => c.env_remove("BRANCHFLOW_OUT"),
        };
        assert!(c.output().unwrap().status.success());
    };
    run(&[], None);
    assert!(dir.path().join("unused/oracle.csv").exists());
    run(&[], Some("from_env"));
    assert!(dir.path().join("from_env/oracle.csv").exists());
    run(&["--out", "from_flag"], Some("from_env2"));
    assert!(dir.path().join("from_flag/oracle.csv").exists());
    assert!(!dir.path().join("from_env2").exists());
}
