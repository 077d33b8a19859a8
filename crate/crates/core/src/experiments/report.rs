//! Human-readable and CSV renderings of reports; JSON goes through serde.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::audit::{DistributionReport, MomentAudit};
use super::convergence::ConvergenceReport;
use super::martingale::MartingaleReport;
use crate::error::Result;
use crate::mechanisms::ConditionReport;

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Aligned-column text and raw CSV views of a report.
pub trait TextReport {
    fn to_text(&self) -> String;
    fn to_csv(&self) -> String;
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

impl TextReport for ConvergenceReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "convergence: family {}  seed {}  config {}  slack C = {}",
            self.family, self.master_seed, self.config_hash, self.slack
        );
        for l in &self.levels {
            let _ = writeln!(
                s,
                "  k = {:<5} sigma = {:<12.6} tightness = {:<12.6} x0 = {:?}",
                l.k, l.sigma, l.tightness, l.initial_counts
            );
        }
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:<10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>10} {:>6}",
            "k", "t", "test", "estimate", "se", "oracle", "gap", "z", "tol", "ok"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:<10} {:>10.6} {:>10.2e} {:>10.6} {:>10.2e} {:>8.2} {:>10.2e} {:>6}",
                r.k, r.t, r.test, r.estimate, r.std_error, r.oracle, r.gap, r.z_score, r.tolerance, verdict(r.pass)
            );
        }
        for t in &self.trends {
            let _ = writeln!(
                s,
                "trend t = {} {}: gaps {:?} spearman {:.3} {}",
                t.t,
                t.test,
                t.gaps,
                t.spearman,
                verdict(t.nonincreasing)
            );
        }
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }

    fn to_csv(&self) -> String {
        let mut s = format!("# config_hash={}\nfamily,k,t,test,estimate,std_error,replicas,oracle,gap,z,tolerance,pass\n", self.config_hash);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.family, r.k, r.t, r.test, r.estimate, r.std_error, r.replicas, r.oracle, r.gap, r.z_score, r.tolerance, r.pass
            );
        }
        s
    }
}

impl TextReport for MartingaleReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "martingale residual: family {}  G = exp(-x)  f = {}  t = {}  seed {}  config {}  slack C = {}",
            self.family, self.test, self.t, self.master_seed, self.config_hash, self.slack
        );
        let _ = writeln!(
            s,
            "{:>6} {:>12} {:>12} {:>12} {:>8} {:>12} {:>6}",
            "k", "residual", "ci95", "sigma", "z", "tol", "ok"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>12.3e} {:>12.3e} {:>12.4} {:>8.2} {:>12.3e} {:>6}",
                r.k, r.residual, r.ci_half_width, r.sigma, r.z_score, r.tolerance, verdict(r.pass)
            );
        }
        let _ = writeln!(s, "trend: {}", verdict(self.trend_nonincreasing));
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }

    fn to_csv(&self) -> String {
        let mut s = format!("# config_hash={}\nfamily,k,t,test,residual,std_error,ci_half_width,replicas,tolerance,pass\n", self.config_hash);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.family, r.k, self.t, self.test, r.residual, r.std_error, r.ci_half_width, r.replicas, r.tolerance, r.pass
            );
        }
        s
    }
}

impl TextReport for MomentAudit {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "moment audit: x0 = {}  sigma = {}  g'(1) = {}  replicas = {}",
            self.x0, self.sigma, self.mean_offspring, self.replicas
        );
        let _ = writeln!(
            s,
            "{:>8} {:>12} {:>10} {:>12} {:>8} {:>6} {:>12} {:>12} {:>6}",
            "t", "mean", "se", "expected", "z", "ok", "E sup", "bound", "ok"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>8.4} {:>12.5} {:>10.2e} {:>12.5} {:>8.2} {:>6} {:>12.5} {:>12.5} {:>6}",
                r.t, r.mean, r.std_error, r.expected, r.z_score, verdict(r.mean_pass), r.sup_mean, r.sup_bound, verdict(r.sup_pass)
            );
        }
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("t,mean,std_error,expected,z,mean_pass,sup_mean,sup_std_error,sup_bound,sup_pass\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t, r.mean, r.std_error, r.expected, r.z_score, r.mean_pass, r.sup_mean, r.sup_std_error, r.sup_bound, r.sup_pass
            );
        }
        s
    }
}

impl TextReport for DistributionReport {
    fn to_text(&self) -> String {
        let mut s = format!("distribution test: {}\n", self.label);
        let _ = writeln!(
            s,
            "{:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>6}",
            "s", "pgf a", "pgf b", "gap", "pooled se", "z", "ok"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>10.6} {:>10.6} {:>10.2e} {:>10.2e} {:>8.2} {:>6}",
                r.s, r.a, r.b, r.gap, r.pooled_se, r.z_score, verdict(r.pass)
            );
        }
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("label,s,a,se_a,b,se_b,gap,pooled_se,z,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.label, r.s, r.a, r.se_a, r.b, r.se_b, r.gap, r.pooled_se, r.z_score, r.pass
            );
        }
        s
    }
}

impl TextReport for ConditionReport {
    fn to_text(&self) -> String {
        let mut s = format!(
            "mechanism convergence on [0,1] x [0,{}] with a {n}x{n} lattice\n",
            self.grid_bound,
            n = self.n_grid
        );
        let _ = writeln!(
            s,
            "{:>6} {:>12} {:>12} {:>12} {:>8} {:>6}",
            "k", "sigma", "sup error", "lipschitz", "ratio", "ok"
        );
        for r in &self.records {
            let ratio = r.ratio.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
            let _ = writeln!(
                s,
                "{:>6} {:>12.4} {:>12.4e} {:>12.4} {:>8} {:>6}",
                r.k, r.sigma, r.sup_error, r.lipschitz, ratio, verdict(r.pass)
            );
        }
        let _ = writeln!(s, "overall: {}", verdict(self.pass));
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("k,sigma,sup_error,lipschitz,ratio,pass\n");
        for r in &self.records {
            let ratio = r.ratio.map_or_else(String::new, |x| x.to_string());
            let _ = writeln!(s, "{},{},{},{},{},{}", r.k, r.sigma, r.sup_error, r.lipschitz, ratio, r.pass);
        }
        s
    }
}
