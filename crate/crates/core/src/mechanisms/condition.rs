//! Uniform convergence check of the rescaled discrete mechanisms to the target.

use serde::Serialize;

use super::discrete::discrete_mechanism;
use super::family::MechanismFamily;
use super::recipe::build_discrete_family;
use crate::error::{Error, Result};

/// Acceptable range of `err(k) / err(2k)` for a first-order error.
pub const RATIO_BAND: (f64, f64) = (1.5, 2.5);

/// One row of the report.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionRecord {
    pub k: u32,
    pub sigma: f64,
    pub sup_error: f64,
    pub lipschitz: f64,
    /// `err(previous k) / err(k)` rescaled to a doubling step; absent on the first row.
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub grid_bound: f64,
    pub n_grid: usize,
    pub records: Vec<ConditionRecord>,
    pub pass: bool,
}

/// Sup over an `n_grid x n_grid` lattice of `(theta, z)` in `[0,1] x [0,l]` of
/// `|phi^(k)_theta(z) - phi_theta(z)|`, with the empirical Lipschitz constant
/// of `z -> phi^(k)_theta(z)`, for each `k`.
///
/// A row passes when its error does not exceed the previous row's and the
/// error ratio, normalized to a doubling of `k`, lies in [`RATIO_BAND`]:
/// for a step `k -> m k` the raw ratio is multiplied by `2 / m`.
pub fn check_condition_5a(
    target: &MechanismFamily,
    k_list: &[u32],
    grid_bound: f64,
    n_grid: usize,
) -> Result<ConditionReport> {
    if k_list.is_empty() {
        return Err(Error::input("k list is empty"));
    }
    if !(grid_bound > 0.0) {
        return Err(Error::Domain {
            what: "l",
            value: grid_bound,
        });
    }
    let n = n_grid.max(2);
    let zs: Vec<f64> = (0..n).map(|j| grid_bound * j as f64 / (n - 1) as f64).collect();
    let mut records: Vec<ConditionRecord> = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let (fam, sigma) = build_discrete_family(target, k)?;
        let mut sup_error: f64 = 0.0;
        let mut lipschitz: f64 = 0.0;
        for i in 0..n {
            let theta = i as f64 / (n - 1) as f64;
            let mut prev: Option<f64> = None;
            for &z in &zs {
                let approx = discrete_mechanism(k, sigma, &fam, theta, z)?;
                sup_error = sup_error.max((approx - target.phi_theta(theta, z)).abs());
                if let Some(p) = prev {
                    lipschitz = lipschitz.max((approx - p).abs() / (zs[1] - zs[0]));
                }
                prev = Some(approx);
            }
        }
        let (ratio, pass) = match records.last() {
            None => (None, sup_error.is_finite()),
            Some(last) => {
                let step = k as f64 / last.k as f64;
                let r = if sup_error > 0.0 {
                    last.sup_error / sup_error * 2.0 / step
                } else {
                    f64::INFINITY
                };
                let ok = sup_error <= last.sup_error && (RATIO_BAND.0..=RATIO_BAND.1).contains(&r);
                (Some(r), ok)
            }
        };
        records.push(ConditionRecord {
            k,
            sigma,
            sup_error,
            lipschitz,
            ratio,
            pass,
        });
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(ConditionReport {
        grid_bound,
        n_grid: n,
        records,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::CatalogParams;

    #[test]
    fn feller_errors_at_z_one() {
        let target = MechanismFamily::from_catalog(&CatalogParams::named("feller").unwrap()).unwrap();
        let report = check_condition_5a(&target, &[10, 100], 1.0, 11).unwrap();
        let e10 = report.records[0].sup_error;
        let e100 = report.records[1].sup_error;
        assert!((e10 - 0.0472).abs() < 1e-4, "{e10}");
        assert!((e100 - 0.00498).abs() < 1e-4, "{e100}");
        assert!(report.pass);
    }

    #[test]
    fn doubling_ratio_near_two() {
        let target = MechanismFamily::from_catalog(&CatalogParams::named("feller").unwrap()).unwrap();
        let report = check_condition_5a(&target, &[10, 20], 1.0, 11).unwrap();
        let r = report.records[1].ratio.unwrap();
        assert!((r - 2.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn z_zero_row_is_exact() {
        let target = MechanismFamily::from_catalog(&CatalogParams::named("jumps").unwrap()).unwrap();
        let (fam, sigma) = build_discrete_family(&target, 10).unwrap();
        for i in 0..=10 {
            let theta = i as f64 / 10.0;
            assert_eq!(discrete_mechanism(10, sigma, &fam, theta, 0.0).unwrap(), 0.0);
            assert_eq!(target.phi_theta(theta, 0.0), 0.0);
        }
    }

    #[test]
    fn empty_k_list_is_an_error() {
        let target = MechanismFamily::from_catalog(&CatalogParams::named("feller").unwrap()).unwrap();
        assert!(check_condition_5a(&target, &[], 1.0, 11).is_err());
    }
}
