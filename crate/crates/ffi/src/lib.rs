//! C interface to `bq-core`.
//!
//! Every function returns a [`BqStatus`]; results come back through out
//! pointers. Handles are opaque and owned by the caller, who releases them
//! with the matching `*_free` function. After a non-OK status,
//! [`bq_last_error`] describes the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bq_core::harness::{build_integrand, IntegrandSpec};
use bq_core::integrands::{make_benchmark, make_constant, make_synthetic, make_weight, NoisyOracle, WeightSpec};
use bq_core::kernel::{kernel_eval, KernelSpec};
use bq_core::oracle::{self, OracleConfig};
use bq_core::quadrature::{run_strategy, GpConfig, StrategyConfig, StrategyKind};
use bq_core::rng::{label_key, stream};
use bq_core::{Error, GpState, Integrand};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Oracle = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqStrategy {
    Mc = 0,
    Mvs = 1,
    MvsMc = 2,
}

/// Result of [`bq_estimate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BqEstimate {
    pub estimate: f64,
    /// Integral of the posterior mean after the MVS batch (0 for MC).
    pub initial_estimate: f64,
    /// Residual estimate from the MC batch (0 for MVS).
    pub residual: f64,
    pub queries: usize,
}

pub struct BqKernel {
    spec: KernelSpec,
}

pub struct BqGp {
    state: GpState,
}

pub struct BqIntegrand {
    f: Integrand,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BqStatus {
    match e {
        Error::InvalidKernel(_)
        | Error::InvalidArgument(_)
        | Error::UnknownBenchmark(_)
        | Error::IndexOutOfRange { .. }
        | Error::ObservationState(_) => BqStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => BqStatus::DimensionMismatch,
        Error::NonFinite(_) | Error::Factorization { .. } | Error::FitFailed => BqStatus::Numerical,
        Error::Oracle(_) => BqStatus::Oracle,
        Error::Config(_) => BqStatus::Config,
        Error::Parse { .. } | Error::EmptySeries(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => {
            BqStatus::Io
        }
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

type FfiResult = Result<(), Fail>;

// Runs `body`, records any failure for `bq_last_error` and never unwinds
// across the boundary.
fn guard(body: impl FnOnce() -> FfiResult) -> BqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BqStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            BqStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BqStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Matérn kernel with smoothness `nu`, lengthscale and output scale.
///
/// # Safety
/// `out_kernel` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bq_kernel_new(nu: f64, lengthscale: f64, scale: f64, out_kernel: *mut *mut BqKernel) -> BqStatus {
    guard(|| {
        let o = out(out_kernel, "out_kernel")?;
        let spec = KernelSpec::new(nu, lengthscale, scale)?;
        *o = boxed(BqKernel { spec });
        Ok(())
    })
}

/// `k(x, y)` for two points of length `dim`.
///
/// # Safety
/// `x` and `y` must point to `dim` doubles; `kernel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bq_kernel_eval(
    kernel: *const BqKernel,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out_value: *mut f64,
) -> BqStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        let (x, y) = (slice(x, dim, "x")?, slice(y, dim, "y")?);
        *out(out_value, "out_value")? = kernel_eval(&k.spec, x, y)?;
        Ok(())
    })
}

/// # Safety
/// `kernel` must be NULL or a handle from [`bq_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bq_kernel_free(kernel: *mut BqKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Empty GP posterior on `dim`-dimensional inputs with regularizer `lambda`.
/// The kernel is copied; its handle may be freed afterwards.
///
/// # Safety
/// `kernel` must be a live handle and `out_gp` writable.
#[no_mangle]
pub unsafe extern "C" fn bq_gp_new(kernel: *const BqKernel, lambda: f64, dim: usize, out_gp: *mut *mut BqGp) -> BqStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        let o = out(out_gp, "out_gp")?;
        let state = GpState::new(k.spec, lambda, dim)?;
        *o = boxed(BqGp { state });
        Ok(())
    })
}

/// Adds the observation `(x, y)`; `x` has the GP's dimension.
///
/// # Safety
/// `gp` must be a live handle and `x` point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn bq_gp_observe(gp: *mut BqGp, x: *const f64, dim: usize, y: f64) -> BqStatus {
    guard(|| {
        let g = out(gp, "gp")?;
        let x = slice(x, dim, "x")?.to_vec();
        g.state.push(x, Some(y))?;
        Ok(())
    })
}

/// Number of observations.
///
/// # Safety
/// `gp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bq_gp_len(gp: *const BqGp, out_len: *mut usize) -> BqStatus {
    guard(|| {
        *out(out_len, "out_len")? = handle(gp, "gp")?.state.len();
        Ok(())
    })
}

/// Posterior mean and variance at `x`. Either output may be NULL.
///
/// # Safety
/// `gp` must be a live handle and `x` point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn bq_gp_predict(
    gp: *const BqGp,
    x: *const f64,
    dim: usize,
    out_mean: *mut f64,
    out_var: *mut f64,
) -> BqStatus {
    guard(|| {
        let g = handle(gp, "gp")?;
        let x = slice(x, dim, "x")?;
        if let Some(m) = out_mean.as_mut() {
            *m = if g.state.is_empty() { 0.0 } else { g.state.posterior_mean(x)? };
        }
        if let Some(v) = out_var.as_mut() {
            *v = g.state.posterior_var(x)?;
        }
        Ok(())
    })
}

/// # Safety
/// `gp` must be NULL or a handle from [`bq_gp_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bq_gp_free(gp: *mut BqGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

/// Benchmark function by name (`ackley`, `alpine1`, `gramacy-lee`,
/// `griewank`, `rastrigin`, `keane`) rescaled to the unit cube.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_integrand` writable.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_benchmark(
    name: *const c_char,
    dim: usize,
    out_integrand: *mut *mut BqIntegrand,
) -> BqStatus {
    guard(|| {
        let name = string(name, "name")?;
        let o = out(out_integrand, "out_integrand")?;
        *o = boxed(BqIntegrand { f: make_benchmark(name, dim)? });
        Ok(())
    })
}

/// # Safety
/// `out_integrand` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_constant(dim: usize, value: f64, out_integrand: *mut *mut BqIntegrand) -> BqStatus {
    guard(|| {
        let o = out(out_integrand, "out_integrand")?;
        *o = boxed(BqIntegrand { f: make_constant(dim, value)? });
        Ok(())
    })
}

/// Random kernel expansion with `centers` terms drawn from `seed`.
///
/// # Safety
/// `kernel` must be a live handle and `out_integrand` writable.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_synthetic(
    dim: usize,
    centers: usize,
    kernel: *const BqKernel,
    seed: u64,
    out_integrand: *mut *mut BqIntegrand,
) -> BqStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        let o = out(out_integrand, "out_integrand")?;
        let mut rng = stream(seed, &[label_key("synthetic")]);
        *o = boxed(BqIntegrand {
            f: make_synthetic(dim, centers, k.spec, &mut rng)?,
        });
        Ok(())
    })
}

/// Integrand from the compact form used by the `bq` command line, e.g.
/// `benchmark:ackley:2`, `bump:1:16` or `sensor:/path/data.csv`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out_integrand` writable.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_parse(
    spec: *const c_char,
    seed: u64,
    out_integrand: *mut *mut BqIntegrand,
) -> BqStatus {
    guard(|| {
        let spec = IntegrandSpec::parse_inline(string(spec, "spec")?)?;
        let o = out(out_integrand, "out_integrand")?;
        *o = boxed(BqIntegrand {
            f: build_integrand(&spec, seed)?,
        });
        Ok(())
    })
}

/// # Safety
/// `integrand` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_dim(integrand: *const BqIntegrand, out_dim: *mut usize) -> BqStatus {
    guard(|| {
        *out(out_dim, "out_dim")? = handle(integrand, "integrand")?.f.dim();
        Ok(())
    })
}

/// # Safety
/// `integrand` must be a live handle and `x` point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_eval(
    integrand: *const BqIntegrand,
    x: *const f64,
    dim: usize,
    out_value: *mut f64,
) -> BqStatus {
    guard(|| {
        let f = &handle(integrand, "integrand")?.f;
        let x = slice(x, dim, "x")?;
        *out(out_value, "out_value")? = f.eval(x)?;
        Ok(())
    })
}

/// # Safety
/// `integrand` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bq_integrand_free(integrand: *mut BqIntegrand) {
    if !integrand.is_null() {
        drop(Box::from_raw(integrand));
    }
}

/// Reference integral over the unit cube with the default oracle settings.
/// `out_err` (may be NULL) receives the oracle's error estimate.
///
/// # Safety
/// `integrand` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bq_oracle_integrate(
    integrand: *const BqIntegrand,
    out_value: *mut f64,
    out_err: *mut f64,
) -> BqStatus {
    guard(|| {
        let f = &handle(integrand, "integrand")?.f;
        let o = out(out_value, "out_value")?;
        let w = make_weight(&WeightSpec::Uniform, f.dim())?;
        let r = oracle::integrate(f, &w, &OracleConfig::default())?;
        *o = r.value;
        if let Some(e) = out_err.as_mut() {
            *e = r.err_estimate;
        }
        Ok(())
    })
}

/// Runs one estimator with `budget` noisy queries of standard deviation
/// `sigma` under the uniform weight. `split` is the MVS fraction of the
/// two-batch estimator. `kernel` may be NULL for Monte Carlo; the GP
/// regularizer is `max(sigma², 1e-10·scale)`. Equal seeds give equal results.
///
/// # Safety
/// `integrand` must be a live handle, `kernel` NULL or live, `out_estimate`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bq_estimate(
    integrand: *const BqIntegrand,
    strategy: BqStrategy,
    budget: usize,
    split: f64,
    sigma: f64,
    kernel: *const BqKernel,
    seed: u64,
    out_estimate: *mut BqEstimate,
) -> BqStatus {
    guard(|| {
        let f = &handle(integrand, "integrand")?.f;
        let o = out(out_estimate, "out_estimate")?;
        let kind = match strategy {
            BqStrategy::Mc => StrategyKind::Mc,
            BqStrategy::Mvs => StrategyKind::Mvs,
            BqStrategy::MvsMc => StrategyKind::MvsMc,
        };
        let gp = match (kind, kernel.as_ref()) {
            (StrategyKind::Mc, _) => None,
            (_, Some(k)) => Some(GpConfig::new(k.spec)),
            (_, None) => return Err(Fail::Null("kernel")),
        };
        let mut cfg = StrategyConfig::new(kind, budget);
        if kind == StrategyKind::MvsMc {
            cfg.split = split;
        }
        let w = make_weight(&WeightSpec::Uniform, f.dim())?;
        let mut oracle = NoisyOracle::new(f, sigma, stream(seed, &[label_key("noise")]))?;
        let mut rng = stream(seed, &[label_key("sample")]);
        // Bad budgets or splits come back as config errors; here they are arguments.
        let tr = run_strategy(&mut oracle, &w, &cfg, gp.as_ref(), None, &mut rng).map_err(|e| match e {
            Error::Config(m) => Error::InvalidArgument(m),
            e => e,
        })?;
        *o = BqEstimate {
            estimate: tr.estimate,
            initial_estimate: tr.initial_estimate,
            residual: tr.residual,
            queries: oracle.queries(),
        };
        Ok(())
    })
}
