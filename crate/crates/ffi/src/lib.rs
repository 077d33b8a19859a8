//! C ABI over the branchflow library.
//!
//! Every fallible function returns a [`BfStatus`]; on failure the message is
//! available from [`bf_last_error_message`] on the same thread. Objects are
//! opaque handles created by `bf_*_new`/`bf_*_build`-style functions and
//! released with the matching `bf_*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use branchflow::cumulant::{
    solve_cb_cumulant, solve_nonlocal_cumulant, solve_pgf_ode, GridFunction, OdeConfig, UnitGrid,
};
use branchflow::error::Error;
use branchflow::flowsim::{simulate_flow, simulate_single, FlowPath, LevelGrid, SeedSpec};
use branchflow::mechanisms::{
    build_discrete_family, discrete_mechanism, CatalogParams, DiscreteFlowFamily, MechanismFamily,
    OffspringLaw,
};

/// Result codes; `BF_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BfStatus {
    BfOk = 0,
    BfNullPointer = 1,
    BfDomain = 2,
    BfAdmissibility = 3,
    BfResource = 4,
    BfInput = 5,
    BfGridMismatch = 6,
    BfBlowup = 7,
    BfInsufficientReplicas = 8,
    BfInvariant = 9,
    BfConfig = 10,
    BfParse = 11,
    BfIo = 12,
    BfPanic = 13,
}

impl From<&Error> for BfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain { .. } => BfStatus::BfDomain,
            Error::Admissibility { .. } => BfStatus::BfAdmissibility,
            Error::Resource { .. } => BfStatus::BfResource,
            Error::Input(_) => BfStatus::BfInput,
            Error::GridMismatch { .. } => BfStatus::BfGridMismatch,
            Error::Blowup { .. } => BfStatus::BfBlowup,
            Error::InsufficientReplicas { .. } => BfStatus::BfInsufficientReplicas,
            Error::Invariant(_) => BfStatus::BfInvariant,
            Error::Config(_) => BfStatus::BfConfig,
            Error::Parse { .. } => BfStatus::BfParse,
            Error::Io(_) | Error::Json(_) => BfStatus::BfIo,
        }
    }
}

/// Offspring law `p_0, p_1, ...`.
pub struct BfLaw(OffspringLaw);

/// Continuum mechanism family `theta -> phi_theta`.
pub struct BfFamily(MechanismFamily);

/// Discrete family for one `k`, with its rate `sigma_k`.
pub struct BfDiscreteFamily {
    family: DiscreteFlowFamily,
    k: u32,
    sigma: f64,
}

/// A simulated path.
pub struct BfPath(FlowPath);

/// Catalog parameters of
/// `phi_theta(z) = b0 z + c z^2/2 + gamma_m z^2/(rho_m(rho_m+z)) - theta (h z + gamma z/(rho+z))`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BfCatalogParams {
    pub b0: f64,
    pub c: f64,
    pub gamma_m: f64,
    pub rho_m: f64,
    pub h: f64,
    pub gamma: f64,
    pub rho: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> BfStatus {
    let status = BfStatus::from(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> BfStatus {
    set_error(format!("null pointer: {what}"));
    BfStatus::BfNullPointer
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), BfStatus>) -> BfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BfStatus::BfOk,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BfStatus::BfPanic
        }
    }
}

fn lift<T>(r: branchflow::error::Result<T>) -> Result<T, BfStatus> {
    r.map_err(fail)
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, BfStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], BfStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, BfStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, BfStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(Error::Input(format!("{what} is not UTF-8"))))
}

fn ode(step: f64) -> OdeConfig {
    if step > 0.0 {
        OdeConfig::with_step(step)
    } else {
        OdeConfig::default()
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an offspring law from `len` probabilities.
///
/// # Safety
/// `probs` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_law_new(probs: *const f64, len: usize, out_law: *mut *mut BfLaw) -> BfStatus {
    guard(|| {
        let p = slice(probs, len, "probs")?;
        let o = out(out_law, "out_law")?;
        let law = lift(OffspringLaw::new(p.to_vec()))?;
        *o = Box::into_raw(Box::new(BfLaw(law)));
        Ok(())
    })
}

/// # Safety
/// `law` must come from `bf_law_new` (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bf_law_free(law: *mut BfLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Generating function `g(s)` for `s` in `[0, 1]`.
///
/// # Safety
/// `law` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_law_pgf(law: *const BfLaw, s: f64, out_value: *mut f64) -> BfStatus {
    guard(|| {
        let l = obj(law, "law")?;
        *out(out_value, "out_value")? = lift(l.0.pgf(s))?;
        Ok(())
    })
}

/// Mean offspring number.
///
/// # Safety
/// `law` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_law_mean(law: *const BfLaw, out_value: *mut f64) -> BfStatus {
    guard(|| {
        *out(out_value, "out_value")? = obj(law, "law")?.0.mean();
        Ok(())
    })
}

/// Builds a named catalog family (`feller`, `nonlocal`, `jumps`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out_family` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_family_from_catalog(name: *const c_char, out_family: *mut *mut BfFamily) -> BfStatus {
    guard(|| {
        let n = text(name, "name")?;
        let o = out(out_family, "out_family")?;
        let p = CatalogParams::named(n)
            .ok_or_else(|| fail(Error::Input(format!("unknown family {n:?}"))))?;
        *o = Box::into_raw(Box::new(BfFamily(lift(MechanismFamily::from_catalog(&p))?)));
        Ok(())
    })
}

/// Builds a family from explicit parameters.
///
/// # Safety
/// `out_family` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_family_from_params(params: BfCatalogParams, out_family: *mut *mut BfFamily) -> BfStatus {
    guard(|| {
        let o = out(out_family, "out_family")?;
        let p = CatalogParams {
            b0: params.b0,
            c: params.c,
            gamma_m: params.gamma_m,
            rho_m: params.rho_m,
            h: params.h,
            gamma: params.gamma,
            rho: params.rho,
        };
        *o = Box::into_raw(Box::new(BfFamily(lift(MechanismFamily::from_catalog(&p))?)));
        Ok(())
    })
}

/// # Safety
/// `family` must come from a `bf_family_*` constructor (or be null).
#[no_mangle]
pub unsafe extern "C" fn bf_family_free(family: *mut BfFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// `phi_theta(z)` for `theta` in `[0, 1]`, `z >= 0`.
///
/// # Safety
/// `family` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_family_phi_theta(
    family: *const BfFamily,
    theta: f64,
    z: f64,
    out_value: *mut f64,
) -> BfStatus {
    guard(|| {
        let f = obj(family, "family")?;
        *out(out_value, "out_value")? = lift(branchflow::mechanisms::eval_phi_theta(&f.0, theta, z))?;
        Ok(())
    })
}

/// Discretizes `family` at scale `k`; writes the handle and `sigma_k`.
///
/// # Safety
/// `family` must be a live handle; the out pointers must be writable
/// (`out_sigma` may be null).
#[no_mangle]
pub unsafe extern "C" fn bf_discrete_family_build(
    family: *const BfFamily,
    k: u32,
    out_discrete: *mut *mut BfDiscreteFamily,
    out_sigma: *mut f64,
) -> BfStatus {
    guard(|| {
        let f = obj(family, "family")?;
        let o = out(out_discrete, "out_discrete")?;
        let (family, sigma) = lift(build_discrete_family(&f.0, k))?;
        if let Some(s) = out_sigma.as_mut() {
            *s = sigma;
        }
        *o = Box::into_raw(Box::new(BfDiscreteFamily { family, k, sigma }));
        Ok(())
    })
}

/// # Safety
/// `discrete` must come from `bf_discrete_family_build` (or be null).
#[no_mangle]
pub unsafe extern "C" fn bf_discrete_family_free(discrete: *mut BfDiscreteFamily) {
    if !discrete.is_null() {
        drop(Box::from_raw(discrete));
    }
}

/// Offspring law at the scaled level `theta` in `[0, k]`; a new handle.
///
/// # Safety
/// `discrete` must be a live handle; `out_law` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_discrete_law_at(
    discrete: *const BfDiscreteFamily,
    theta: f64,
    out_law: *mut *mut BfLaw,
) -> BfStatus {
    guard(|| {
        let d = obj(discrete, "discrete")?;
        let o = out(out_law, "out_law")?;
        *o = Box::into_raw(Box::new(BfLaw(lift(d.family.law_at(theta))?)));
        Ok(())
    })
}

/// Discrete mechanism `phi^(k)_theta(z)` for `theta` in `[0, 1]`.
///
/// # Safety
/// `discrete` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_discrete_mechanism(
    discrete: *const BfDiscreteFamily,
    theta: f64,
    z: f64,
    out_value: *mut f64,
) -> BfStatus {
    guard(|| {
        let d = obj(discrete, "discrete")?;
        *out(out_value, "out_value")? = lift(discrete_mechanism(d.k, d.sigma, &d.family, theta, z))?;
        Ok(())
    })
}

/// Simulates the single-level process; replica `replica` of `master_seed`.
///
/// # Safety
/// `law` must be a live handle; `out_path` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_simulate_single(
    law: *const BfLaw,
    sigma: f64,
    x0: u64,
    horizon: f64,
    master_seed: u64,
    replica: u64,
    out_path: *mut *mut BfPath,
) -> BfStatus {
    guard(|| {
        let l = obj(law, "law")?;
        let o = out(out_path, "out_path")?;
        let seed = SeedSpec::new(master_seed, replica);
        *o = Box::into_raw(Box::new(BfPath(lift(simulate_single(&l.0, sigma, x0, horizon, seed))?)));
        Ok(())
    })
}

/// Simulates the flow of a discrete family on `n_levels` levels in `(0, 1]`
/// with level scale `k`.
///
/// # Safety
/// `levels` and `x0` must point to `n_levels` values; `out_path` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_simulate_flow(
    discrete: *const BfDiscreteFamily,
    levels: *const f64,
    x0: *const u64,
    n_levels: usize,
    horizon: f64,
    master_seed: u64,
    replica: u64,
    out_path: *mut *mut BfPath,
) -> BfStatus {
    guard(|| {
        let d = obj(discrete, "discrete")?;
        let q = slice(levels, n_levels, "levels")?;
        let x = slice(x0, n_levels, "x0")?;
        let o = out(out_path, "out_path")?;
        let grid = lift(LevelGrid::new(q.to_vec()))?;
        let seed = SeedSpec::new(master_seed, replica);
        let path = lift(simulate_flow(&d.family, &grid, f64::from(d.k), x, horizon, seed))?;
        *o = Box::into_raw(Box::new(BfPath(path)));
        Ok(())
    })
}

/// # Safety
/// `path` must come from a simulation or `bf_path_load` (or be null).
#[no_mangle]
pub unsafe extern "C" fn bf_path_free(path: *mut BfPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of levels of a path.
///
/// # Safety
/// `path` must be a live handle or null (then 0).
#[no_mangle]
pub unsafe extern "C" fn bf_path_num_levels(path: *const BfPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.initial.len())
}

/// Number of recorded events of a path.
///
/// # Safety
/// `path` must be a live handle or null (then 0).
#[no_mangle]
pub unsafe extern "C" fn bf_path_num_events(path: *const BfPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.events.len())
}

/// Counts at time `t` (right-continuous), written to `out_counts[0..len]`;
/// `len` must equal the number of levels.
///
/// # Safety
/// `path` must be a live handle; `out_counts` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn bf_path_counts_at(
    path: *const BfPath,
    t: f64,
    out_counts: *mut u64,
    len: usize,
) -> BfStatus {
    guard(|| {
        let p = obj(path, "path")?;
        if out_counts.is_null() {
            return Err(null("out_counts"));
        }
        let counts = lift(p.0.counts_at(t))?;
        if counts.len() != len {
            return Err(fail(Error::GridMismatch {
                expected: counts.len(),
                found: len,
            }));
        }
        std::slice::from_raw_parts_mut(out_counts, len).copy_from_slice(&counts);
        Ok(())
    })
}

/// Replays the path and writes whether every invariant holds.
///
/// # Safety
/// `path` must be a live handle; `out_pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_path_verify(path: *const BfPath, out_pass: *mut bool) -> BfStatus {
    guard(|| {
        *out(out_pass, "out_pass")? = obj(path, "path")?.0.verify().pass;
        Ok(())
    })
}

/// Writes the path in the text path format.
///
/// # Safety
/// `path` must be a live handle; `filename` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bf_path_save(path: *const BfPath, filename: *const c_char) -> BfStatus {
    guard(|| {
        let p = obj(path, "path")?;
        let f = text(filename, "filename")?;
        lift(p.0.save(Path::new(f)))
    })
}

/// Reads a path written by `bf_path_save` or the command-line tool.
///
/// # Safety
/// `filename` must be a NUL-terminated string; `out_path` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_path_load(filename: *const c_char, out_path: *mut *mut BfPath) -> BfStatus {
    guard(|| {
        let f = text(filename, "filename")?;
        let o = out(out_path, "out_path")?;
        *o = Box::into_raw(Box::new(BfPath(lift(FlowPath::load(Path::new(f)))?)));
        Ok(())
    })
}

/// `E_1[s0^{X_t}]` of the single process, by the generating-function ODE.
/// A non-positive `step` selects the default.
///
/// # Safety
/// `law` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_solve_pgf_ode(
    law: *const BfLaw,
    sigma: f64,
    t: f64,
    s0: f64,
    step: f64,
    out_value: *mut f64,
) -> BfStatus {
    guard(|| {
        let l = obj(law, "law")?;
        *out(out_value, "out_value")? = lift(solve_pgf_ode(&l.0, sigma, t, s0, &ode(step)))?;
        Ok(())
    })
}

/// Cumulant `v_t(lambda)` of the member `phi_theta` of a family.
///
/// # Safety
/// `family` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bf_solve_cb_cumulant(
    family: *const BfFamily,
    theta: f64,
    lambda: f64,
    t: f64,
    step: f64,
    out_value: *mut f64,
) -> BfStatus {
    guard(|| {
        let f = obj(family, "family")?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(fail(Error::Domain { what: "theta", value: theta }));
        }
        *out(out_value, "out_value")? = lift(solve_cb_cumulant(&f.0.at(theta), lambda, t, &ode(step)))?;
        Ok(())
    })
}

/// Nonlocal cumulant started from `sum_i lambdas[i] 1_[0, levels[i]]`,
/// evaluated at the levels; `intervals` sets the unit-grid resolution.
///
/// # Safety
/// `levels`, `lambdas` and `out_values` must hold `n_levels` values.
#[no_mangle]
pub unsafe extern "C" fn bf_solve_nonlocal_step(
    family: *const BfFamily,
    levels: *const f64,
    lambdas: *const f64,
    n_levels: usize,
    intervals: usize,
    t: f64,
    step: f64,
    out_values: *mut f64,
) -> BfStatus {
    guard(|| {
        let f = obj(family, "family")?;
        let q = slice(levels, n_levels, "levels")?;
        let l = slice(lambdas, n_levels, "lambdas")?;
        if out_values.is_null() {
            return Err(null("out_values"));
        }
        let grid = lift(UnitGrid::new(intervals))?;
        let f0 = lift(GridFunction::step(grid, q, l))?;
        let v = lift(solve_nonlocal_cumulant(&f.0, &f0, t, &ode(step)))?;
        let dst = std::slice::from_raw_parts_mut(out_values, n_levels);
        for (d, &x) in dst.iter_mut().zip(q) {
            *d = v.at(x);
        }
        Ok(())
    })
}
