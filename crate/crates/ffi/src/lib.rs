//! C ABI for `cgas`.
//!
//! Every fallible function returns a [`CgasStatus`]; on failure the message
//! is available from [`cgas_last_error`] on the same thread. Handles are
//! opaque, created by `cgas_*_new`/`cgas_*_solve` style functions and
//! released with the matching `cgas_*_free`. Panics never cross the
//! boundary; they surface as [`CgasStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cgas::determinantal::RadialEnsemble;
use cgas::equilibrium::{solve_grid, solve_radial, EquilibriumResult, GridDomain, SolveOptions};
use cgas::potential::{ExternalField, Potential};
use cgas::sampler::{hamiltonian, run_chain, ChainParams, SampleBatch};
use cgas::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    UnsupportedPotential = 3,
    NonConvergence = 4,
    BoxTooSmall = 5,
    Quadrature = 6,
    /// The caller's buffer is shorter than the data; nothing was written.
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
    Other = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgasSolveMethod {
    /// Closed form for radial fields, grid solver otherwise.
    Auto = 0,
    Grid = 1,
    Radial = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CgasStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter(_) | Error::Config { .. } | Error::EmptyInput(_) => CgasStatus::InvalidParameter,
            Error::UnsupportedPotential(_) => CgasStatus::UnsupportedPotential,
            Error::NonConvergence { .. } => CgasStatus::NonConvergence,
            Error::BoxTooSmall => CgasStatus::BoxTooSmall,
            Error::Quadrature(_) => CgasStatus::Quadrature,
            Error::Io(_) | Error::MissingArtifact { .. } | Error::MalformedArtifact { .. } => CgasStatus::Io,
            _ => CgasStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CgasStatus::NullPointer, format!("`{what}` is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CgasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgasStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CgasStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn fill(buf: *mut f64, cap: usize, data: &[f64]) -> Result<(), Failure> {
    if data.len() > cap {
        return Err(Failure(
            CgasStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", data.len()),
        ));
    }
    if data.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cgas_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cgas_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cgas_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// An external field `Q`.
pub struct CgasPotential {
    inner: Arc<Potential>,
}

fn new_potential(p: Result<Potential, Error>, out: *mut *mut CgasPotential) -> CgasStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = Box::new(CgasPotential { inner: Arc::new(p?) });
        unsafe { out.write(Box::into_raw(h)) };
        Ok(())
    })
}

/// `Q(ζ) = |ζ|²`.
#[no_mangle]
pub unsafe extern "C" fn cgas_potential_ginibre(out: *mut *mut CgasPotential) -> CgasStatus {
    new_potential(Ok(Potential::ginibre()), out)
}

/// `Q(ζ) = |ζ|^{2b}`.
#[no_mangle]
pub unsafe extern "C" fn cgas_potential_power(b: f64, out: *mut *mut CgasPotential) -> CgasStatus {
    new_potential(Potential::power(b), out)
}

/// `Q(ζ) = (|ζ|² − τ Re ζ²)/(1 − τ²)`, `0 ≤ τ < 1`.
#[no_mangle]
pub unsafe extern "C" fn cgas_potential_elliptic(tau: f64, out: *mut *mut CgasPotential) -> CgasStatus {
    new_potential(Potential::elliptic(tau), out)
}

#[no_mangle]
pub unsafe extern "C" fn cgas_potential_free(p: *mut CgasPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cgas_potential_value(p: *const CgasPotential, re: f64, im: f64, out: *mut f64) -> CgasStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        write(out, p.inner.value(Complex64::new(re, im)), "out")
    })
}

/// Normalized Laplacian `∂∂̄Q` at `re + i·im`.
#[no_mangle]
pub unsafe extern "C" fn cgas_potential_laplacian(
    p: *const CgasPotential,
    re: f64,
    im: f64,
    out: *mut f64,
) -> CgasStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        write(out, p.inner.laplacian(Complex64::new(re, im)), "out")
    })
}

/// `H_n` of `n` points given as separate real and imaginary arrays.
#[no_mangle]
pub unsafe extern "C" fn cgas_hamiltonian(
    p: *const CgasPotential,
    re: *const f64,
    im: *const f64,
    n: usize,
    out: *mut f64,
) -> CgasStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        if n > 0 && (re.is_null() || im.is_null()) {
            return Err(null("points"));
        }
        let pts: Vec<Complex64> = (0..n).map(|i| Complex64::new(*re.add(i), *im.add(i))).collect();
        write(out, hamiltonian(&pts, &*p.inner, n), "out")
    })
}

/// Equilibrium measure on a square grid.
pub struct CgasEquilibrium {
    inner: EquilibriumResult,
}

/// Scalar constants of an equilibrium solve. `droplet_radius` is NaN when
/// the droplet is not a centred disc.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CgasEquilibriumSummary {
    pub frostman_const: f64,
    pub robin_const: f64,
    pub c0: f64,
    pub a0: f64,
    pub sigma_q: f64,
    pub droplet_radius: f64,
    pub total_mass: f64,
}

/// Solve on `[−half_width, half_width]²` with `resolution²` cells; `method`
/// is one of the `CgasSolveMethod` values.
#[no_mangle]
pub unsafe extern "C" fn cgas_equilibrium_solve(
    p: *const CgasPotential,
    half_width: f64,
    resolution: usize,
    method: i32,
    out: *mut *mut CgasEquilibrium,
) -> CgasStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = GridDomain::square(half_width, resolution)?;
        let radial = match method {
            m if m == CgasSolveMethod::Auto as i32 => p.inner.is_radial(),
            m if m == CgasSolveMethod::Grid as i32 => false,
            m if m == CgasSolveMethod::Radial as i32 => true,
            m => return Err(Failure(CgasStatus::InvalidParameter, format!("unknown solve method {m}"))),
        };
        let eq = if radial { solve_radial(&*p.inner, grid)?.1 } else { solve_grid(&*p.inner, grid, &SolveOptions::default())? };
        out.write(Box::into_raw(Box::new(CgasEquilibrium { inner: eq })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cgas_equilibrium_free(eq: *mut CgasEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cgas_equilibrium_summary(
    eq: *const CgasEquilibrium,
    out: *mut CgasEquilibriumSummary,
) -> CgasStatus {
    guard(|| {
        let e = &deref(eq, "equilibrium")?.inner;
        let s = CgasEquilibriumSummary {
            frostman_const: e.frostman_const,
            robin_const: e.robin_const,
            c0: e.c0,
            a0: e.a0,
            sigma_q: e.sigma_q,
            droplet_radius: e.droplet_radius.unwrap_or(f64::NAN),
            total_mass: e.total_mass(),
        };
        write(out, s, "out")
    })
}

/// Distance from `re + i·im` to the droplet (0 inside).
#[no_mangle]
pub unsafe extern "C" fn cgas_equilibrium_distance(
    eq: *const CgasEquilibrium,
    re: f64,
    im: f64,
    out: *mut f64,
) -> CgasStatus {
    guard(|| {
        let e = &deref(eq, "equilibrium")?.inner;
        write(out, e.distance_to_droplet(Complex64::new(re, im)), "out")
    })
}

/// Parameters of one Metropolis chain.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CgasChainParams {
    pub n: usize,
    pub beta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chain: u32,
    pub step_scale: f64,
}

#[no_mangle]
pub extern "C" fn cgas_chain_params_default() -> CgasChainParams {
    let d = ChainParams::default();
    CgasChainParams {
        n: d.n,
        beta: d.beta,
        sweeps: d.sweeps,
        burn_in: d.burn_in,
        thin: d.thin,
        seed: d.seed,
        chain: d.chain,
        step_scale: d.step_scale,
    }
}

/// Retained samples of one chain.
pub struct CgasBatch {
    inner: SampleBatch,
}

#[no_mangle]
pub unsafe extern "C" fn cgas_run_chain(
    p: *const CgasPotential,
    eq: *const CgasEquilibrium,
    params: *const CgasChainParams,
    out: *mut *mut CgasBatch,
) -> CgasStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        let eq = deref(eq, "equilibrium")?;
        let c = deref(params, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ChainParams {
            n: c.n,
            beta: c.beta,
            sweeps: c.sweeps,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed,
            chain: c.chain,
            step_scale: c.step_scale,
            ..Default::default()
        };
        let batch = run_chain(&params, &*p.inner, &eq.inner)?;
        out.write(Box::into_raw(Box::new(CgasBatch { inner: batch })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cgas_batch_free(b: *mut CgasBatch) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Number of retained samples; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cgas_batch_len(b: *const CgasBatch) -> usize {
    b.as_ref().map_or(0, |b| b.inner.len())
}

/// Copy the per-sample droplet distances `D_n` into `buf[0..len)`.
#[no_mangle]
pub unsafe extern "C" fn cgas_batch_d_n(b: *const CgasBatch, buf: *mut f64, cap: usize) -> CgasStatus {
    guard(|| fill(buf, cap, &deref(b, "batch")?.inner.d_n))
}

/// Copy the per-sample energies `H_n` into `buf[0..len)`.
#[no_mangle]
pub unsafe extern "C" fn cgas_batch_energies(b: *const CgasBatch, buf: *mut f64, cap: usize) -> CgasStatus {
    guard(|| fill(buf, cap, &deref(b, "batch")?.inner.energies))
}

/// Overall Metropolis acceptance rate after burn-in.
#[no_mangle]
pub unsafe extern "C" fn cgas_batch_acceptance(b: *const CgasBatch, out: *mut f64) -> CgasStatus {
    guard(|| {
        let b = deref(b, "batch")?;
        write(out, b.inner.meta.acceptance, "out")
    })
}

/// Exact `β = 1` ensemble of a radial potential.
pub struct CgasEnsemble {
    // declared before `_field` so it is dropped first
    inner: RadialEnsemble<'static, Potential>,
    _field: Arc<Potential>,
}

#[no_mangle]
pub unsafe extern "C" fn cgas_ensemble_new(p: *const CgasPotential, n: usize, out: *mut *mut CgasEnsemble) -> CgasStatus {
    guard(|| {
        let p = deref(p, "potential")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let field = Arc::clone(&p.inner);
        // SAFETY: the Arc keeps the potential at a fixed heap address for as
        // long as the handle lives, and the ensemble is dropped before it.
        let target: &'static Potential = &*Arc::as_ptr(&field);
        let inner = RadialEnsemble::build(target, n)?;
        out.write(Box::into_raw(Box::new(CgasEnsemble { inner, _field: field })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cgas_ensemble_free(e: *mut CgasEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Droplet radius `R` of the ensemble's potential.
#[no_mangle]
pub unsafe extern "C" fn cgas_ensemble_radius(e: *const CgasEnsemble, out: *mut f64) -> CgasStatus {
    guard(|| write(out, deref(e, "ensemble")?.inner.radius(), "out"))
}

/// One-point function `R_n(r)`.
#[no_mangle]
pub unsafe extern "C" fn cgas_ensemble_one_point(e: *const CgasEnsemble, r: f64, out: *mut f64) -> CgasStatus {
    guard(|| write(out, deref(e, "ensemble")?.inner.one_point_exact(r), "out"))
}

/// `P(max |ζ_j| ≤ r)`.
#[no_mangle]
pub unsafe extern "C" fn cgas_ensemble_radius_cdf(e: *const CgasEnsemble, r: f64, out: *mut f64) -> CgasStatus {
    guard(|| write(out, deref(e, "ensemble")?.inner.radius_cdf(r), "out"))
}

/// Draw `draws` independent maximal moduli into `buf`.
#[no_mangle]
pub unsafe extern "C" fn cgas_ensemble_max_radius_draws(
    e: *const CgasEnsemble,
    draws: usize,
    seed: u64,
    buf: *mut f64,
    cap: usize,
) -> CgasStatus {
    guard(|| {
        let e = deref(e, "ensemble")?;
        if draws > cap {
            return Err(Failure(CgasStatus::BufferTooSmall, format!("buffer holds {cap} values, {draws} needed")));
        }
        let d = e.inner.max_radius_draws(draws, seed)?;
        fill(buf, cap, &d)
    })
}
