//! The nonlocal cumulant equation
//! `V_t f(x) = f(x) - int_0^t [phi_0(V_s f(x)) - Psi(x, V_s f)] ds`
//! with `Psi(x, f) = int_0^1 psi_theta(f(x v theta)) dtheta`, solved by the
//! method of lines on a uniform grid.

use super::grid::{GridFunction, UnitGrid};
use super::ode::{clamp_nonnegative, rk4, OdeConfig};
use crate::error::{Error, Result};
use crate::mechanisms::MechanismFamily;

/// `Psi` on a fixed grid. The theta-integrals use exact primitives of
/// `h_theta` and `gamma_theta` on `[0, x_j]`, where `f(x v theta) = f(x_j)`,
/// and a product trapezoid on each panel above `x_j`, pairing the right limit
/// at the left node with the value at the right node.
#[derive(Clone, Debug)]
pub struct NonlocalOperator<'a> {
    family: &'a MechanismFamily,
    grid: UnitGrid,
    h_cum: Vec<f64>,
    g_cum: Vec<f64>,
}

impl<'a> NonlocalOperator<'a> {
    pub fn new(family: &'a MechanismFamily, grid: UnitGrid) -> Self {
        let h_cum = grid.points().map(|x| family.h_profile().integral(x)).collect();
        let g_cum = grid.points().map(|x| family.gamma_profile().integral(x)).collect();
        NonlocalOperator {
            family,
            grid,
            h_cum,
            g_cum,
        }
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.intervals(),
                found: f.grid().intervals(),
            });
        }
        Ok(())
    }

    fn sat(&self, y: f64) -> f64 {
        self.family.saturation(y)
    }

    fn panel(&self, m: usize, left: f64, right: f64) -> f64 {
        let dh = self.h_cum[m + 1] - self.h_cum[m];
        let dg = self.g_cum[m + 1] - self.g_cum[m];
        0.5 * (dh * (left + right) + dg * (self.sat(left) + self.sat(right)))
    }

    /// Suffix sums `S_j = sum_{m >= j} panel_m` for node values `v` and right
    /// limits `r`.
    fn suffix(&self, v: &[f64], r: &[f64], out: &mut [f64]) {
        let m = self.grid.intervals();
        out[m] = 0.0;
        for j in (0..m).rev() {
            out[j] = out[j + 1] + self.panel(j, r[j], v[j + 1]);
        }
    }

    /// `Psi(x, f)`.
    pub fn eval(&self, x: f64, f: &GridFunction) -> Result<f64> {
        self.check(f)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { what: "x", value: x });
        }
        let (v, r) = (f.values(), f.right_limits());
        let mut s = vec![0.0; self.grid.len()];
        self.suffix(v, r, &mut s);
        if let Some(j) = self.grid.node(x) {
            let y = v[j];
            return Ok(y * self.h_cum[j] + self.sat(y) * self.g_cum[j] + s[j]);
        }
        // Off-node: f is r_j just above x_j; split the panel at x.
        let j = self.grid.cell(x);
        let y = f.at(x);
        let hx = self.family.h_profile().integral(x);
        let gx = self.family.gamma_profile().integral(x);
        let partial = 0.5
            * ((self.h_cum[j + 1] - hx) * (y + v[j + 1])
                + (self.g_cum[j + 1] - gx) * (self.sat(y) + self.sat(v[j + 1])));
        Ok(y * hx + self.sat(y) * gx + partial + s[j + 1])
    }

    /// Right-hand side of the method-of-lines system for the state
    /// `[values..., right limits...]`.
    fn rhs(&self, state: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let n = self.grid.len();
        let (v, r) = state.split_at(n);
        self.suffix(v, r, scratch);
        let base = self.family.base();
        for j in 0..n {
            let (hj, gj, sj) = (self.h_cum[j], self.g_cum[j], scratch[j]);
            let a = v[j].max(0.0);
            let b = r[j].max(0.0);
            out[j] = -base.phi(a) + a * hj + self.sat(a) * gj + sj;
            out[n + j] = -base.phi(b) + b * hj + self.sat(b) * gj + sj;
        }
    }

    /// `V_t f` on the grid.
    pub fn solve(&self, f: &GridFunction, t: f64, cfg: &OdeConfig) -> Result<GridFunction> {
        self.check(f)?;
        let mut scratch = vec![0.0; self.grid.len()];
        let state = rk4(
            f.clone().into_state(),
            t,
            cfg,
            |y, dy| self.rhs(y, dy, &mut scratch),
            clamp_nonnegative,
        )?;
        Ok(GridFunction::from_state(self.grid, state))
    }
}

/// `Psi(x, f)` with the theta-quadrature on `grid`, which must be `f`'s grid.
pub fn eval_big_psi(family: &MechanismFamily, grid: UnitGrid, x: f64, f: &GridFunction) -> Result<f64> {
    NonlocalOperator::new(family, grid).eval(x, f)
}

/// `V_t f` on `f`'s grid.
pub fn solve_nonlocal_cumulant(
    family: &MechanismFamily,
    f: &GridFunction,
    t: f64,
    cfg: &OdeConfig,
) -> Result<GridFunction> {
    NonlocalOperator::new(family, f.grid()).solve(f, t, cfg)
}

/// `exp(-sum_j mass_j V(x_j))` for atoms `mass_j` at `x_j`.
pub fn laplace_prediction(levels: &[f64], masses: &[f64], v: &GridFunction) -> Result<f64> {
    if levels.len() != masses.len() {
        return Err(Error::GridMismatch {
            expected: levels.len(),
            found: masses.len(),
        });
    }
    let mut acc = 0.0;
    for (&x, &m) in levels.iter().zip(masses) {
        if !(m >= 0.0) {
            return Err(Error::Domain { what: "mass", value: m });
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { what: "x", value: x });
        }
        acc += m * v.at(x);
    }
    Ok((-acc).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::solve_cb_cumulant;
    use crate::mechanisms::{CatalogParams, Mechanism, ThetaProfile};

    fn grid() -> UnitGrid {
        UnitGrid::new(200).unwrap()
    }

    fn fam(h: f64, gamma: f64, rho: f64) -> MechanismFamily {
        MechanismFamily::new(
            Mechanism::feller(1.0).unwrap(),
            ThetaProfile::constant(h),
            ThetaProfile::constant(gamma),
            rho,
        )
        .unwrap()
    }

    fn nonlocal() -> MechanismFamily {
        MechanismFamily::from_catalog(&CatalogParams::named("nonlocal").unwrap()).unwrap()
    }

    #[test]
    fn big_psi_examples() {
        let g = grid();
        let zero = GridFunction::zero(g);
        assert_eq!(eval_big_psi(&nonlocal(), g, 0.3, &zero).unwrap(), 0.0);
        let c = GridFunction::constant(g, 2.5).unwrap();
        for x in [0.0, 0.3, 0.31234, 1.0] {
            let v = eval_big_psi(&fam(1.0, 0.0, 1.0), g, x, &c).unwrap();
            assert!((v - 2.5).abs() < 1e-12, "{v}");
        }
        let one = GridFunction::constant(g, 1.0).unwrap();
        let v = eval_big_psi(&fam(0.0, 1.0, 1.0), g, 0.5, &one).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn big_psi_of_step_is_exact() {
        // f = 1_[0, 1/2]: Psi(x) = h (1/2) + gamma (1/2) / 2 for x <= 1/2.
        let g = grid();
        let f = GridFunction::step(g, &[0.5], &[1.0]).unwrap();
        let v = eval_big_psi(&fam(0.4, 0.6, 1.0), g, 0.2, &f).unwrap();
        assert!((v - (0.4 * 0.5 + 0.6 * 0.25)).abs() < 1e-12);
        // Above 1/2 the function vanishes.
        assert_eq!(eval_big_psi(&fam(0.4, 0.6, 1.0), g, 0.7, &f).unwrap(), 0.0);
    }

    #[test]
    fn big_psi_rejects_foreign_grid() {
        let f = GridFunction::constant(UnitGrid::new(50).unwrap(), 1.0).unwrap();
        assert!(matches!(
            eval_big_psi(&nonlocal(), grid(), 0.5, &f),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn zero_stays_zero() {
        let v = solve_nonlocal_cumulant(&nonlocal(), &GridFunction::zero(grid()), 1.0, &OdeConfig::default())
            .unwrap();
        assert_eq!(v.max_value(), 0.0);
    }

    #[test]
    fn local_family_matches_cb_solver() {
        let f = MechanismFamily::local(Mechanism::feller(1.0).unwrap()).unwrap();
        let cfg = OdeConfig::default();
        let v = solve_nonlocal_cumulant(&f, &GridFunction::constant(grid(), 1.5).unwrap(), 1.0, &cfg)
            .unwrap();
        let cb = solve_cb_cumulant(f.base(), 1.5, 1.0, &cfg).unwrap();
        assert!(v.values().iter().all(|x| (x - cb).abs() < 1e-8));
    }

    #[test]
    fn constant_input_follows_top_member() {
        // For constant f the nonlocal term is int_0^1 psi_theta(v), so
        // V_t f = v_t solving v' = -phi_1(v).
        let f = nonlocal();
        let cfg = OdeConfig::default();
        let v = solve_nonlocal_cumulant(&f, &GridFunction::constant(grid(), 2.0).unwrap(), 1.0, &cfg)
            .unwrap();
        let cb = solve_cb_cumulant(&f.at(1.0), 2.0, 1.0, &cfg).unwrap();
        assert!(v.values().iter().all(|x| (x - cb).abs() < 1e-8));
    }

    #[test]
    fn semigroup_order_and_monotonicity() {
        let f = nonlocal();
        let g = grid();
        let cfg = OdeConfig::default();
        let step = GridFunction::step(g, &[0.25, 0.6, 1.0], &[1.0, 0.5, 0.8]).unwrap();
        let v1 = solve_nonlocal_cumulant(&f, &step, 1.0, &cfg).unwrap();
        let v04 = solve_nonlocal_cumulant(&f, &step, 0.4, &cfg).unwrap();
        let v = solve_nonlocal_cumulant(&f, &v04, 0.6, &cfg).unwrap();
        assert!(v.max_abs_diff(&v1) < 1e-6);
        assert!(v1.is_nonincreasing(1e-12));
        let bigger = GridFunction::step(g, &[0.25, 0.6, 1.0], &[1.2, 0.5, 0.9]).unwrap();
        let w1 = solve_nonlocal_cumulant(&f, &bigger, 1.0, &cfg).unwrap();
        assert!(v1.le(&w1, 1e-12));
    }

    #[test]
    fn step_halving() {
        let f = MechanismFamily::from_catalog(&CatalogParams::named("jumps").unwrap()).unwrap();
        let g = grid();
        let step = GridFunction::step(g, &[0.5, 1.0], &[2.0, 1.0]).unwrap();
        let a = solve_nonlocal_cumulant(&f, &step, 1.0, &OdeConfig::default()).unwrap();
        let b = solve_nonlocal_cumulant(&f, &step, 1.0, &OdeConfig::with_step(5e-4)).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-7);
    }

    #[test]
    fn laplace_predictions() {
        let g = grid();
        let v = GridFunction::constant(g, 0.7).unwrap();
        assert_eq!(laplace_prediction(&[], &[], &v).unwrap(), 1.0);
        let p = laplace_prediction(&[1.0], &[3.0], &v).unwrap();
        assert!((p - (-2.1f64).exp()).abs() < 1e-15);
        // Local family: two atoms factorize.
        let f = MechanismFamily::local(Mechanism::feller(1.0).unwrap()).unwrap();
        let cfg = OdeConfig::default();
        let vt = solve_nonlocal_cumulant(&f, &GridFunction::constant(g, 1.0).unwrap(), 0.5, &cfg).unwrap();
        let both = laplace_prediction(&[0.5, 1.0], &[1.0, 2.0], &vt).unwrap();
        let a = laplace_prediction(&[0.5], &[1.0], &vt).unwrap();
        let b = laplace_prediction(&[1.0], &[2.0], &vt).unwrap();
        assert!((both - a * b).abs() < 1e-14);
    }
}
