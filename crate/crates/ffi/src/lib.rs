//! C ABI for the `mmigm` solver.
//!
//! Objects cross the boundary as opaque handles created by `*_new` / `*_run`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`MmigmStatus`]; on failure a human-readable message can be
//! fetched with [`mmigm_last_error_message`] on the same thread. Handles are
//! not synchronized: use each one from a single thread at a time.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mmigm::assembly::{eval_field, solve_poisson, FieldCoefficients};
use mmigm::config::RunConfig;
use mmigm::geometry::{build_identity_geometry, NurbsGeometry, Rect};
use mmigm::linalg::CgSettings;
use mmigm::movemesh::{mmigm_solve, MonitorKind, MonitorSpec, MoveMeshConfig, MoveMeshState};
use mmigm::postproc::{error_norms, lattice_max_abs};
use mmigm::problems::{self, Problem};
use mmigm::splines::KnotVector;
use mmigm::{Error, ErrorCategory};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmigmStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Solver = 3,
    MeshWrap = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

/// Built-in model problems.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmigmProblem {
    /// `u = sin x sin y` on `[-1, 1]^2`.
    Case1Sine = 0,
    /// `u = tanh((0.25 - r) / 0.01)` on `[0, 1]^2`.
    Case2Tanh = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmigmMonitorKind {
    Gradient = 0,
    Hessian = 1,
    Combined = 2,
}

/// Monitor `sqrt(epsilon + alpha |grad u|^2 + beta |hess u|^2)`; the
/// gradient and hessian kinds fix `epsilon = 1` and drop the other term.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MmigmMonitor {
    pub kind: MmigmMonitorKind,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub smoothing: usize,
}

/// Moving-mesh outer-loop settings. `tolerance <= 0` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MmigmMoveMeshParams {
    pub tau: f64,
    pub tolerance: f64,
    pub max_outer: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmigmNorms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmigmMoveMeshSummary {
    pub dofs: usize,
    pub iterations: usize,
    pub mesh_updates: usize,
    pub converged: bool,
    pub initial: MmigmNorms,
    pub final_: MmigmNorms,
    pub initial_max_abs: f64,
    pub final_max_abs: f64,
    pub min_jacobian: f64,
}

/// Opaque NURBS geometry map.
pub struct MmigmGeometry {
    inner: NurbsGeometry,
}

/// Opaque spline field (coefficients on a geometry's basis).
pub struct MmigmField {
    inner: FieldCoefficients,
}

/// Opaque result of a moving-mesh run.
pub struct MmigmMoveMesh {
    inner: MoveMeshState,
}

/// Scalar callback `f(x, y, user_data)`.
pub type MmigmScalarFn = Option<unsafe extern "C" fn(x: f64, y: f64, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MmigmStatus {
    match e.category() {
        ErrorCategory::InvalidArgument => MmigmStatus::InvalidArgument,
        ErrorCategory::Config => MmigmStatus::Config,
        ErrorCategory::Solver => MmigmStatus::Solver,
        ErrorCategory::MeshWrap => MmigmStatus::MeshWrap,
        ErrorCategory::Io => MmigmStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MmigmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MmigmStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            MmigmStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(&msg);
            MmigmStatus::InvalidArgument
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            MmigmStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(value);
    Ok(())
}

/// Boxes `value` into a new handle stored at `out`.
unsafe fn give<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a Path, Failure> {
    let s = as_ref(p, what).map(|_| CStr::from_ptr(p))?;
    s.to_str().map(Path::new).map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

fn builtin(p: MmigmProblem) -> Problem {
    match p {
        MmigmProblem::Case1Sine => problems::case1_sine(),
        MmigmProblem::Case2Tanh => problems::case2_tanh(),
    }
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. The pointer stays valid until the next `mmigm_*` call on
/// the same thread.
#[no_mangle]
pub extern "C" fn mmigm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mmigm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Identity NURBS geometry on `[x0, x1] x [y0, y1]` with `elements` uniform
/// elements per direction, degree `degree` and interior knot multiplicity
/// `multiplicity` (1 gives maximal smoothness, `degree` gives C0).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mmigm_geometry_new_uniform(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    degree: usize,
    elements: usize,
    multiplicity: usize,
    out: *mut *mut MmigmGeometry,
) -> MmigmStatus {
    guard(|| {
        let rect = Rect::new(x0, x1, y0, y1)?;
        let kv = KnotVector::open_uniform(degree, elements, multiplicity)?;
        let g = build_identity_geometry(rect, kv.clone(), kv);
        give(out, MmigmGeometry { inner: g })
    })
}

/// # Safety
/// `g` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mmigm_geometry_free(g: *mut MmigmGeometry) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of basis functions (degrees of freedom) of the geometry's space.
///
/// # Safety
/// `g` must be a live geometry handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_geometry_num_dofs(g: *const MmigmGeometry, out: *mut usize) -> MmigmStatus {
    guard(|| write_out(out, as_ref(g, "geometry")?.inner.num_dofs(), "out"))
}

/// Physical point `F(s, t)` and Jacobian determinant there.
///
/// # Safety
/// `g` must be a live geometry handle; `x`, `y` and `det` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_geometry_map(
    g: *const MmigmGeometry,
    s: f64,
    t: f64,
    x: *mut f64,
    y: *mut f64,
    det: *mut f64,
) -> MmigmStatus {
    guard(|| {
        let g = &as_ref(g, "geometry")?.inner;
        if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)) {
            return Err(Failure::Invalid(format!("parametric point ({s}, {t}) outside [0, 1]^2")));
        }
        let m = g.map_point([s, t], 1);
        write_out(x, m.point[0], "x")?;
        write_out(y, m.point[1], "y")?;
        write_out(det, m.det(), "det")
    })
}

/// Smallest Jacobian determinant over the element quadrature points.
///
/// # Safety
/// `g` must be a live geometry handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_geometry_min_jacobian(g: *const MmigmGeometry, out: *mut f64) -> MmigmStatus {
    guard(|| write_out(out, as_ref(g, "geometry")?.inner.min_jacobian(), "out"))
}

/// Solves `-Laplace(u) = source` with `u = boundary` on the geometry's
/// edges, using default solver settings.
///
/// # Safety
/// `g` must be a live geometry handle, `out` writable, and the callbacks
/// safe to call with `user_data` for the duration of this call.
#[no_mangle]
pub unsafe extern "C" fn mmigm_solve_poisson(
    g: *const MmigmGeometry,
    source: MmigmScalarFn,
    boundary: MmigmScalarFn,
    user_data: *mut c_void,
    out: *mut *mut MmigmField,
) -> MmigmStatus {
    guard(|| {
        let g = &as_ref(g, "geometry")?.inner;
        let source = source.ok_or(Failure::Null("source"))?;
        let boundary = boundary.ok_or(Failure::Null("boundary"))?;
        let f = |x: [f64; 2]| unsafe { source(x[0], x[1], user_data) };
        let b = |x: [f64; 2]| unsafe { boundary(x[0], x[1], user_data) };
        let u = solve_poisson(g, &f, &b, &CgSettings::default())?;
        give(out, MmigmField { inner: u })
    })
}

/// Solves a built-in model problem on `g`.
///
/// # Safety
/// `g` must be a live geometry handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_solve_builtin(
    g: *const MmigmGeometry,
    problem: MmigmProblem,
    out: *mut *mut MmigmField,
) -> MmigmStatus {
    guard(|| {
        let g = &as_ref(g, "geometry")?.inner;
        let p = builtin(problem);
        let u = solve_poisson(g, &*p.source, &*p.boundary, &CgSettings::default())?;
        give(out, MmigmField { inner: u })
    })
}

/// # Safety
/// `u` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mmigm_field_free(u: *mut MmigmField) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// Copies up to `len` coefficients into `buf` and stores the total count in
/// `count`. Pass `buf = NULL` to query the count only.
///
/// # Safety
/// `u` must be a live field handle, `count` writable and `buf` (when not
/// null) valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mmigm_field_coefficients(
    u: *const MmigmField,
    buf: *mut f64,
    len: usize,
    count: *mut usize,
) -> MmigmStatus {
    guard(|| {
        let c = &as_ref(u, "field")?.inner.coeffs;
        if !buf.is_null() {
            ptr::copy_nonoverlapping(c.as_ptr(), buf, len.min(c.len()));
        }
        write_out(count, c.len(), "count")
    })
}

/// Value and physical gradient of `u` at parametric point `(s, t)`.
///
/// # Safety
/// `g` and `u` must be live handles for matching spaces; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_field_eval(
    g: *const MmigmGeometry,
    u: *const MmigmField,
    s: f64,
    t: f64,
    value: *mut f64,
    dx: *mut f64,
    dy: *mut f64,
) -> MmigmStatus {
    guard(|| {
        let g = &as_ref(g, "geometry")?.inner;
        let u = &as_ref(u, "field")?.inner;
        if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)) {
            return Err(Failure::Invalid(format!("parametric point ({s}, {t}) outside [0, 1]^2")));
        }
        let fe = eval_field(g, u, [s, t], 1)?;
        write_out(value, fe.value, "value")?;
        write_out(dx, fe.grad[0], "dx")?;
        write_out(dy, fe.grad[1], "dy")
    })
}

/// L2, H1-seminorm and lattice max-norm errors of `u` against a built-in
/// problem's exact solution.
///
/// # Safety
/// `g` and `u` must be live handles for matching spaces; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_error_norms(
    g: *const MmigmGeometry,
    u: *const MmigmField,
    problem: MmigmProblem,
    out: *mut MmigmNorms,
) -> MmigmStatus {
    guard(|| {
        let g = &as_ref(g, "geometry")?.inner;
        let u = &as_ref(u, "field")?.inner;
        let p = builtin(problem);
        let r = error_norms(g, u, p.exact.as_ref().expect("built-in problems have exact solutions"))?;
        write_out(out, MmigmNorms { l2: r.l2, h1: r.h1_semi, linf: r.linf }, "out")
    })
}

/// Runs the moving-mesh iteration for a built-in problem starting from `g0`.
///
/// # Safety
/// `g0` must be a live geometry handle, `monitor` and `params` readable and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_movemesh_run(
    problem: MmigmProblem,
    g0: *const MmigmGeometry,
    monitor: *const MmigmMonitor,
    params: *const MmigmMoveMeshParams,
    out: *mut *mut MmigmMoveMesh,
) -> MmigmStatus {
    guard(|| {
        let g0 = &as_ref(g0, "geometry")?.inner;
        let m = as_ref(monitor, "monitor")?;
        let prm = as_ref(params, "params")?;
        let spec = MonitorSpec {
            kind: match m.kind {
                MmigmMonitorKind::Gradient => MonitorKind::Gradient,
                MmigmMonitorKind::Hessian => MonitorKind::Hessian,
                MmigmMonitorKind::Combined => MonitorKind::Combined,
            },
            epsilon: m.epsilon,
            alpha: m.alpha,
            beta: m.beta,
            smoothing: m.smoothing,
        };
        let cfg = MoveMeshConfig {
            tau: prm.tau,
            tolerance: (prm.tolerance > 0.0).then_some(prm.tolerance),
            max_outer: prm.max_outer,
            ..MoveMeshConfig::default()
        };
        let state = mmigm_solve(&builtin(problem), g0, &spec, &cfg, |_, _, _| {})?;
        give(out, MmigmMoveMesh { inner: state })
    })
}

/// # Safety
/// `m` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mmigm_movemesh_free(m: *mut MmigmMoveMesh) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Norms and diagnostics of a finished moving-mesh run.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_movemesh_summary(
    m: *const MmigmMoveMesh,
    out: *mut MmigmMoveMeshSummary,
) -> MmigmStatus {
    guard(|| {
        let st = &as_ref(m, "movemesh")?.inner;
        let norms = |r: Option<&mmigm::postproc::ErrorReport>| {
            r.map_or(MmigmNorms::default(), |r| MmigmNorms { l2: r.l2, h1: r.h1_semi, linf: r.linf })
        };
        let summary = MmigmMoveMeshSummary {
            dofs: st.geometry.num_dofs(),
            iterations: st.trace.len(),
            mesh_updates: st.mesh_updates(),
            converged: st.converged,
            initial: norms(st.initial_errors.as_ref()),
            final_: norms(st.final_errors.as_ref()),
            initial_max_abs: lattice_max_abs(&st.initial_geometry, &st.initial_solution)?,
            final_max_abs: lattice_max_abs(&st.geometry, &st.solution)?,
            min_jacobian: st.geometry.min_jacobian(),
        };
        write_out(out, summary, "out")
    })
}

/// New handles holding copies of the final geometry and solution. Either
/// output may be null to skip it.
///
/// # Safety
/// `m` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmigm_movemesh_final(
    m: *const MmigmMoveMesh,
    geometry: *mut *mut MmigmGeometry,
    solution: *mut *mut MmigmField,
) -> MmigmStatus {
    guard(|| {
        let st = &as_ref(m, "movemesh")?.inner;
        if !geometry.is_null() {
            geometry.write(Box::into_raw(Box::new(MmigmGeometry { inner: st.geometry.clone() })));
        }
        if !solution.is_null() {
            solution.write(Box::into_raw(Box::new(MmigmField { inner: st.solution.clone() })));
        }
        Ok(())
    })
}

/// Runs the experiment described by the JSON config at `config_path`,
/// writing artifacts to `out_dir` (or the config's own directory when null).
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn mmigm_run_config(config_path: *const c_char, out_dir: *const c_char) -> MmigmStatus {
    guard(|| {
        let cfg = RunConfig::load(path_arg(config_path, "config_path")?)?;
        let dir = if out_dir.is_null() { cfg.output.dir.clone() } else { path_arg(out_dir, "out_dir")?.to_path_buf() };
        mmigm::cli::run(&cfg, &dir, true)?;
        Ok(())
    })
}

