//! Harmonic-map moving mesh driver.
//!
//! The physical mesh is redistributed by solving `-div(M^{-1} grad xi) = 0`
//! for a map `xi: Omega -> Omega_c` onto a fixed logical domain. Each
//! physical node is then moved by the inverse Jacobian of `xi` applied to
//! the mismatch between its fixed logical position `A_j` and its current
//! image `xi(X_j)`, the control net is re-fitted, and the PDE is re-solved.

use std::time::Instant;

use crate::assembly::{
    apply_dirichlet_values, assemble_weighted_stiffness, boundary_coefficients, eval_field,
    solve_dirichlet_system, solve_poisson, FieldCoefficients, FieldEval,
};
use crate::error::{Error, Result};
use crate::geometry::{collocation_matrix, solve_tensor, NurbsGeometry, Rect};
use crate::linalg::CgSettings;
use crate::postproc::{error_norms, ErrorReport};
use crate::problems::Problem;

/// Absolute threshold below which the logical Jacobian counts as degenerate.
pub const DEGENERATE_JACOBIAN: f64 = 1e-12;
/// Maximum number of step halvings when an update wraps the mesh.
pub const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonitorKind {
    /// `sqrt(1 + alpha |grad u|^2)`.
    Gradient,
    /// `sqrt(1 + beta |hess u|^2)`.
    Hessian,
    /// `sqrt(epsilon + alpha |grad u|^2 + beta |hess u|^2)`.
    Combined,
}

/// Monitor function family and parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSpec {
    pub kind: MonitorKind,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Passes of nodal averaging on the Greville grid; 0 disables smoothing.
    pub smoothing: usize,
}

impl MonitorSpec {
    pub fn gradient(alpha: f64) -> Self {
        Self { kind: MonitorKind::Gradient, epsilon: 1.0, alpha, beta: 0.0, smoothing: 0 }
    }

    pub fn hessian(beta: f64) -> Self {
        Self { kind: MonitorKind::Hessian, epsilon: 1.0, alpha: 0.0, beta, smoothing: 0 }
    }

    /// `M = 1`.
    pub fn identity() -> Self {
        Self { kind: MonitorKind::Combined, epsilon: 1.0, alpha: 0.0, beta: 0.0, smoothing: 0 }
    }

    /// `(epsilon, alpha, beta)` after applying the kind's restrictions.
    pub fn effective(&self) -> (f64, f64, f64) {
        match self.kind {
            MonitorKind::Gradient => (1.0, self.alpha, 0.0),
            MonitorKind::Hessian => (1.0, 0.0, self.beta),
            MonitorKind::Combined => (self.epsilon, self.alpha, self.beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (e, a, b) = self.effective();
        if !(a >= 0.0 && b >= 0.0 && e > 0.0) || ![e, a, b].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "monitor needs epsilon > 0 and alpha, beta >= 0 (got {e}, {a}, {b})"
            )));
        }
        Ok(())
    }

    /// Derivative order the monitor needs from the solution.
    pub fn derivative_order(&self) -> usize {
        if self.effective().2 > 0.0 { 2 } else { 1 }
    }

    /// Monitor value from field derivatives (Frobenius norm for the Hessian).
    pub fn value(&self, fe: &FieldEval) -> f64 {
        let (e, a, b) = self.effective();
        let g2 = fe.grad[0].powi(2) + fe.grad[1].powi(2);
        let h2: f64 = fe.hess.iter().flatten().map(|h| h * h).sum();
        (e + a * g2 + b * h2).sqrt()
    }
}

/// `M(x)` at parametric point `s` for solution `u` on geometry `g`.
pub fn eval_monitor(spec: &MonitorSpec, g: &NurbsGeometry, u: &FieldCoefficients, s: [f64; 2]) -> Result<f64> {
    let fe = eval_field(g, u, s, spec.derivative_order())?;
    Ok(spec.value(&fe))
}

/// Edge-to-edge affine map from the physical rectangle boundary onto the
/// logical rectangle boundary (corners to corners).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMap {
    pub physical: Rect,
    pub logical: Rect,
}

pub fn make_boundary_map(physical: Rect, logical: Rect) -> BoundaryMap {
    BoundaryMap { physical, logical }
}

impl BoundaryMap {
    /// Image of a boundary point; each edge is mapped proportionally to arc
    /// length onto the corresponding logical edge.
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        self.logical.from_unit(self.physical.to_unit(x))
    }

    pub fn component(&self, k: usize) -> impl Fn([f64; 2]) -> f64 + '_ {
        move |x| self.apply(x)[k]
    }
}

/// The fixed reference mesh on the logical domain.
#[derive(Debug, Clone)]
pub struct LogicalMesh {
    pub domain: Rect,
    /// Components of the initial harmonic map `xi^0`.
    pub xi0: [FieldCoefficients; 2],
    /// Fixed logical node positions `A_j` (Greville grid order).
    pub nodes: Vec<[f64; 2]>,
}

fn solve_map(
    g: &NurbsGeometry,
    bm: &BoundaryMap,
    weight: &dyn Fn(&crate::assembly::QuadPoint) -> f64,
    lin: &CgSettings,
) -> Result<[FieldCoefficients; 2]> {
    let a = assemble_weighted_stiffness(g, weight)?;
    let zero = vec![0.0; g.num_dofs()];
    let mut out = Vec::with_capacity(2);
    for k in 0..2 {
        let xb = boundary_coefficients(g, &bm.component(k))?;
        let sys = apply_dirichlet_values(&a, &zero, g, xb)?;
        out.push(solve_dirichlet_system(&sys, lin)?);
    }
    let second = out.pop().unwrap();
    Ok([out.pop().unwrap(), second])
}

fn nodal_values(g: &NurbsGeometry, xi: &[FieldCoefficients; 2]) -> Result<Vec<[f64; 2]>> {
    g.greville_grid()
        .into_iter()
        .map(|s| Ok([eval_field(g, &xi[0], s, 0)?.value, eval_field(g, &xi[1], s, 0)?.value]))
        .collect()
}

/// Solves `-Laplace(xi) = 0`, `xi = boundary map` on the initial geometry and
/// records the fixed logical nodes.
pub fn init_logical_mesh(g0: &NurbsGeometry, bm: &BoundaryMap, lin: &CgSettings) -> Result<LogicalMesh> {
    let xi0 = solve_map(g0, bm, &|_| 1.0, lin)?;
    let nodes = nodal_values(g0, &xi0)?;
    Ok(LogicalMesh { domain: bm.logical, xi0, nodes })
}

/// Monitor values at quadrature points, optionally smoothed on the node grid.
struct MonitorField<'a> {
    spec: &'a MonitorSpec,
    g: &'a NurbsGeometry,
    u: &'a FieldCoefficients,
    smoothed: Option<(FieldCoefficients, f64)>,
}

impl<'a> MonitorField<'a> {
    fn new(spec: &'a MonitorSpec, g: &'a NurbsGeometry, u: &'a FieldCoefficients) -> Result<Self> {
        spec.validate()?;
        let smoothed = if spec.smoothing > 0 { Some(smoothed_monitor(spec, g, u)?) } else { None };
        Ok(Self { spec, g, u, smoothed })
    }

    fn at(&self, s: [f64; 2]) -> f64 {
        match &self.smoothed {
            Some((field, floor)) => eval_field(self.g, field, s, 0).map(|f| f.value.max(*floor)).unwrap_or(f64::NAN),
            None => eval_monitor(self.spec, self.g, self.u, s).unwrap_or(f64::NAN),
        }
    }
}

/// Nodal monitor values averaged with their grid neighbours `spec.smoothing`
/// times, then interpolated back into the spline space. Returns the field and
/// the smallest nodal value, used as a positivity floor.
fn smoothed_monitor(spec: &MonitorSpec, g: &NurbsGeometry, u: &FieldCoefficients) -> Result<(FieldCoefficients, f64)> {
    let (n1, n2) = g.dims();
    let grid = g.greville_grid();
    let mut m: Vec<f64> = grid.iter().map(|s| eval_monitor(spec, g, u, *s)).collect::<Result<_>>()?;
    for _ in 0..spec.smoothing {
        let prev = m.clone();
        for j in 0..n2 {
            for i in 0..n1 {
                let mut sum = prev[i + n1 * j];
                let mut cnt = 1.0;
                let mut add = |ii: usize, jj: usize| {
                    sum += prev[ii + n1 * jj];
                    cnt += 1.0;
                };
                if i > 0 {
                    add(i - 1, j);
                }
                if i + 1 < n1 {
                    add(i + 1, j);
                }
                if j > 0 {
                    add(i, j - 1);
                }
                if j + 1 < n2 {
                    add(i, j + 1);
                }
                m[i + n1 * j] = sum / cnt;
            }
        }
    }
    let floor = m.iter().cloned().fold(f64::INFINITY, f64::min);
    let [kx, ky] = g.knot_vectors();
    let lu_x = collocation_matrix(kx).factor()?;
    let lu_y = collocation_matrix(ky).factor()?;
    let h: Vec<[f64; 2]> = grid.iter().zip(&m).map(|(s, v)| [g.weight_function(*s) * v, 0.0]).collect();
    let q = solve_tensor(&lu_x, &lu_y, n1, n2, &h);
    let w = g.weights();
    let coeffs = q.iter().enumerate().map(|(k, v)| v[0] / w.get(k % n1, k / n1)).collect();
    Ok((FieldCoefficients { coeffs }, floor))
}

/// Solves the weighted Euler-Lagrange equation `-div(M^{-1} grad xi) = 0`
/// with the boundary map as Dirichlet data.
pub fn solve_harmonic_map(
    g: &NurbsGeometry,
    spec: &MonitorSpec,
    u: &FieldCoefficients,
    bm: &BoundaryMap,
    lin: &CgSettings,
) -> Result<[FieldCoefficients; 2]> {
    let monitor = MonitorField::new(spec, g, u)?;
    solve_map(g, bm, &|q| 1.0 / monitor.at(q.param), lin)
}

/// Node displacements produced by one harmonic-map solve.
#[derive(Debug, Clone)]
pub struct Movement {
    /// `delta X_j` in Greville grid order; zero on the boundary ring.
    pub dx: Vec<[f64; 2]>,
    /// `max_j |A_j - xi*(X_j)|_inf`, i.e. the nodal `|xi* - xi^0|_inf`.
    pub xi_inf_err: f64,
    /// Interior nodes whose logical Jacobian fell below the guard and were
    /// left in place.
    pub degenerate: Vec<(usize, usize)>,
}

/// Exact node movement `delta X_j = (d x / d xi)|_{X_j} (A_j - xi*(X_j))`,
/// with `d x / d xi` the inverse of the physical Jacobian of `xi*`.
pub fn compute_movement(g: &NurbsGeometry, xi_star: &[FieldCoefficients; 2], lm: &LogicalMesh) -> Result<Movement> {
    let (n1, n2) = g.dims();
    if lm.nodes.len() != n1 * n2 {
        return Err(Error::invalid("logical mesh does not match the geometry"));
    }
    let grid = g.greville_grid();
    let mut dx = vec![[0.0; 2]; n1 * n2];
    let mut xi_inf_err = 0.0f64;
    let mut degenerate = Vec::new();
    for j in 0..n2 {
        for i in 0..n1 {
            let k = i + n1 * j;
            let s = grid[k];
            let boundary = g.is_boundary(i, j);
            let order = if boundary { 0 } else { 1 };
            let fx = eval_field(g, &xi_star[0], s, order)?;
            let fy = eval_field(g, &xi_star[1], s, order)?;
            let da = [lm.nodes[k][0] - fx.value, lm.nodes[k][1] - fy.value];
            xi_inf_err = xi_inf_err.max(da[0].abs()).max(da[1].abs());
            if boundary {
                continue;
            }
            let (xx, xy) = (fx.grad[0], fx.grad[1]);
            let (yx, yy) = (fy.grad[0], fy.grad[1]);
            let jac = xx * yy - xy * yx;
            if !(jac.abs() >= DEGENERATE_JACOBIAN) {
                degenerate.push((i, j));
                continue;
            }
            dx[k] = [(yy * da[0] - xy * da[1]) / jac, (-yx * da[0] + xx * da[1]) / jac];
        }
    }
    let interior = n1.saturating_sub(2) * n2.saturating_sub(2);
    if !degenerate.is_empty() && degenerate.len() * 100 >= interior {
        let node = degenerate[0];
        let s = grid[node.0 + n1 * node.1];
        let fx = eval_field(g, &xi_star[0], s, 1)?;
        let fy = eval_field(g, &xi_star[1], s, 1)?;
        let jacobian = fx.grad[0] * fy.grad[1] - fx.grad[1] * fy.grad[0];
        return Err(Error::DegenerateMap { node, jacobian });
    }
    Ok(Movement { dx, xi_inf_err, degenerate })
}

/// Moves interior nodes by `tau * dx` and re-fits the geometry, halving `tau`
/// (at most [`MAX_HALVINGS`] times) while the result wraps. Returns the new
/// geometry and the accepted step.
pub fn update_mesh(g: &NurbsGeometry, dx: &[[f64; 2]], tau: f64) -> Result<(NurbsGeometry, f64)> {
    let (n1, n2) = g.dims();
    if dx.len() != n1 * n2 {
        return Err(Error::invalid(format!("{} displacements for {n1} x {n2} nodes", dx.len())));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("step {tau} outside [0, 1]")));
    }
    for j in 0..n2 {
        for i in 0..n1 {
            let d = dx[i + n1 * j];
            if g.is_boundary(i, j) && (d[0] != 0.0 || d[1] != 0.0) {
                return Err(Error::invalid(format!("boundary node ({i}, {j}) has nonzero displacement")));
            }
        }
    }
    let nodes = g.mesh_nodes().nodes;
    let mut step = tau;
    let mut last = f64::NAN;
    for _ in 0..=MAX_HALVINGS {
        let targets: Vec<[f64; 2]> =
            nodes.iter().zip(dx).map(|(x, d)| [x[0] + step * d[0], x[1] + step * d[1]]).collect();
        match g.refit_preserving_boundary(&targets) {
            Ok(moved) => return Ok((moved, step)),
            Err(Error::MeshWrap { min_jacobian, .. }) => last = min_jacobian,
            Err(e) => return Err(e),
        }
        step *= 0.5;
    }
    Err(Error::MeshWrap { min_jacobian: last, halvings: MAX_HALVINGS })
}

/// Outer-loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveMeshConfig {
    /// Damping step in `[0, 1]`.
    pub tau: f64,
    /// Stopping tolerance on `|xi* - xi^0|_inf`; `None` = 1e-4 x diam(logical).
    pub tolerance: Option<f64>,
    pub max_outer: usize,
    pub lin: CgSettings,
    pub logical: Rect,
}

impl Default for MoveMeshConfig {
    fn default() -> Self {
        Self { tau: 0.5, tolerance: None, max_outer: 50, lin: CgSettings::default(), logical: Rect::unit() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceErrors {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

impl From<&ErrorReport> for TraceErrors {
    fn from(r: &ErrorReport) -> Self {
        Self { l2: r.l2, h1: r.h1_semi, linf: r.linf }
    }
}

/// One completed outer iteration.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub xi_inf_err: f64,
    /// Accepted damping step; 0 when the iteration stopped before moving.
    pub tau_used: f64,
    pub min_jacobian: f64,
    pub errors: Option<TraceErrors>,
    /// Accumulated solve time (assembly, linear solves, movement).
    pub cpu_seconds: f64,
    pub degenerate_nodes: usize,
}

/// Result of a moving-mesh run.
#[derive(Debug, Clone)]
pub struct MoveMeshState {
    pub geometry: NurbsGeometry,
    pub solution: FieldCoefficients,
    pub xi_star: [FieldCoefficients; 2],
    pub logical: LogicalMesh,
    pub trace: Vec<TraceRecord>,
    pub initial_geometry: NurbsGeometry,
    pub initial_solution: FieldCoefficients,
    pub initial_errors: Option<ErrorReport>,
    pub final_errors: Option<ErrorReport>,
    pub converged: bool,
    pub tolerance: f64,
}

impl MoveMeshState {
    pub fn mesh_updates(&self) -> usize {
        self.trace.iter().filter(|r| r.tau_used > 0.0).count()
    }
}

fn solve_problem(g: &NurbsGeometry, problem: &Problem, lin: &CgSettings) -> Result<FieldCoefficients> {
    solve_poisson(g, &*problem.source, &*problem.boundary, lin)
}

/// Runs the moving-mesh iteration. `observe(iter, geometry, solution)` is
/// called after each mesh update and re-solve.
pub fn mmigm_solve(
    problem: &Problem,
    g0: &NurbsGeometry,
    spec: &MonitorSpec,
    cfg: &MoveMeshConfig,
    mut observe: impl FnMut(usize, &NurbsGeometry, &FieldCoefficients),
) -> Result<MoveMeshState> {
    spec.validate()?;
    let tolerance = cfg.tolerance.unwrap_or(1e-4 * cfg.logical.diameter());
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.tau) {
        return Err(Error::invalid(format!("step {} outside [0, 1]", cfg.tau)));
    }
    let bm = make_boundary_map(problem.domain, cfg.logical);
    let mut clock = 0.0;
    let timed = |clock: &mut f64, t: Instant| *clock += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let u0 = solve_problem(g0, problem, &cfg.lin)?;
    let logical = init_logical_mesh(g0, &bm, &cfg.lin)?;
    timed(&mut clock, t);
    let report = |g: &NurbsGeometry, u: &FieldCoefficients, clock: f64| -> Result<Option<ErrorReport>> {
        problem
            .exact
            .as_ref()
            .map(|ex| error_norms(g, u, ex).map(|r| ErrorReport { cpu_seconds: clock, ..r }))
            .transpose()
    };
    let initial_errors = report(g0, &u0, clock)?;

    let mut g = g0.clone();
    let mut u = u0.clone();
    let mut xi_star = logical.xi0.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last_errors = initial_errors.clone();
    for iter in 1..=cfg.max_outer {
        let t = Instant::now();
        xi_star = solve_harmonic_map(&g, spec, &u, &bm, &cfg.lin)?;
        let mv = compute_movement(&g, &xi_star, &logical)?;
        if !mv.xi_inf_err.is_finite() {
            return Err(Error::NonFiniteNorm { iteration: iter });
        }
        if mv.xi_inf_err < tolerance {
            timed(&mut clock, t);
            trace.push(TraceRecord {
                iter,
                xi_inf_err: mv.xi_inf_err,
                tau_used: 0.0,
                min_jacobian: g.min_jacobian(),
                errors: last_errors.as_ref().map(TraceErrors::from),
                cpu_seconds: clock,
                degenerate_nodes: mv.degenerate.len(),
            });
            converged = true;
            break;
        }
        let (moved, tau_used) = update_mesh(&g, &mv.dx, cfg.tau)?;
        g = moved;
        u = solve_problem(&g, problem, &cfg.lin)?;
        timed(&mut clock, t);
        last_errors = report(&g, &u, clock)?;
        if let Some(r) = &last_errors {
            if !r.l2.is_finite() {
                return Err(Error::NonFiniteNorm { iteration: iter });
            }
        }
        trace.push(TraceRecord {
            iter,
            xi_inf_err: mv.xi_inf_err,
            tau_used,
            min_jacobian: g.min_jacobian(),
            errors: last_errors.as_ref().map(TraceErrors::from),
            cpu_seconds: clock,
            degenerate_nodes: mv.degenerate.len(),
        });
        observe(iter, &g, &u);
    }
    Ok(MoveMeshState {
        geometry: g,
        solution: u,
        xi_star,
        logical,
        trace,
        initial_geometry: g0.clone(),
        initial_solution: u0,
        initial_errors,
        final_errors: last_errors,
        converged,
        tolerance,
    })
}
