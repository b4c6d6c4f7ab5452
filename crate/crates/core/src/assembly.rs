//! Gauss quadrature and Galerkin assembly over a NURBS space: weighted
//! stiffness matrices, load vectors, Dirichlet elimination and evaluation of
//! discrete fields with physical derivatives.

use crate::error::{Error, Result};
use crate::geometry::{collocation_matrix, solve_tensor, MapEval, NurbsGeometry, ParamElement};
use crate::linalg::{cg_solve, CgSettings, CsrMatrix};

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(t, w)| w * f(*t)).sum()
    }
}

/// `q`-point Gauss-Legendre rule mapped to `[0, 1]`, `1 <= q <= 16`.
pub fn gauss_rule(q: usize) -> Result<QuadratureRule> {
    if !(1..=16).contains(&q) {
        return Err(Error::invalid(format!("quadrature point count {q} outside 1..=16")));
    }
    let mut points = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let n = q as f64;
    for i in 0..q.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_q
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 1 { x } else { p1 };
            let pqm1 = if q == 1 { 1.0 } else { p0 };
            dp = n * (x * pq - pqm1) / (x * x - 1.0);
            let dx = pq / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root
        points[q - 1 - i] = 0.5 * (1.0 + x);
        points[i] = 0.5 * (1.0 - x);
        weights[q - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    if q % 2 == 1 {
        points[q / 2] = 0.5;
    }
    Ok(QuadratureRule { points, weights })
}

/// Coefficients of a scalar field in the rational basis (first index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoefficients {
    pub coeffs: Vec<f64>,
}

impl FieldCoefficients {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Greville-collocation interpolant of `f` on the physical domain of `g`.
    pub fn interpolate(g: &NurbsGeometry, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let (n1, n2) = g.dims();
        let [kx, ky] = g.knot_vectors();
        let lu_x = collocation_matrix(kx).factor()?;
        let lu_y = collocation_matrix(ky).factor()?;
        let mut h = Vec::with_capacity(n1 * n2);
        for s in g.greville_grid() {
            let x = g.map_point(s, 0).point;
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite interpolation data at {x:?}")));
            }
            h.push([g.weight_function(s) * v, 0.0]);
        }
        let q = solve_tensor(&lu_x, &lu_y, n1, n2, &h);
        let w = g.weights();
        let coeffs = q.iter().enumerate().map(|(k, v)| v[0] / w.get(k % n1, k / n1)).collect();
        Ok(Self { coeffs })
    }
}

/// Boundary/interior partition of the degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n1: usize,
    pub n2: usize,
    /// Outer ring of the index grid, ascending.
    pub boundary: Vec<usize>,
    /// Remaining indices, ascending.
    pub interior: Vec<usize>,
}

impl DofMap {
    pub fn new(g: &NurbsGeometry) -> Self {
        let (n1, n2) = g.dims();
        let (mut boundary, mut interior) = (Vec::new(), Vec::new());
        for j in 0..n2 {
            for i in 0..n1 {
                if g.is_boundary(i, j) { boundary.push(i + n1 * j) } else { interior.push(i + n1 * j) }
            }
        }
        Self { n1, n2, boundary, interior }
    }

    pub fn total(&self) -> usize {
        self.n1 * self.n2
    }
}

/// A quadrature point as seen by coefficient callbacks.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub element: (usize, usize),
    pub param: [f64; 2],
    pub phys: [f64; 2],
}

/// Basis data at one quadrature point: global indices, values, physical
/// gradients and the integration weight `w_q |det J|`.
pub(crate) struct PointBasis<'a> {
    pub point: QuadPoint,
    pub map: &'a MapEval,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub jxw: f64,
}

/// Physical basis gradients from parametric ones via the inverse Jacobian.
pub(crate) fn physical_gradients(map: &MapEval) -> Result<(Vec<f64>, Vec<f64>)> {
    let det = map.det();
    let j = map.jac;
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::SingularJacobian { param: [f64::NAN; 2], det });
    }
    let b = &map.basis;
    let n = b.len();
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    for l in 0..n {
        let (rs, rt) = (b.d1[0][l], b.d1[1][l]);
        dx[l] = (j[1][1] * rs - j[1][0] * rt) / det;
        dy[l] = (-j[0][1] * rs + j[0][0] * rt) / det;
    }
    Ok((dx, dy))
}

/// Element loop with `q_xi x q_eta` Gauss points per element.
pub(crate) fn for_each_quad_point(
    g: &NurbsGeometry,
    extra_points: usize,
    mut visit: impl FnMut(&ParamElement, &PointBasis<'_>) -> Result<()>,
) -> Result<()> {
    let [p, q] = g.degrees();
    let rx = gauss_rule(p + 1 + extra_points)?;
    let ry = gauss_rule(q + 1 + extra_points)?;
    for e in g.elements() {
        let area = e.area();
        for (v, wv) in ry.points.iter().zip(&ry.weights) {
            for (u, wu) in rx.points.iter().zip(&rx.weights) {
                let s = e.lerp(*u, *v);
                let map = g.map_point(s, 1);
                let (dx, dy) = physical_gradients(&map)
                    .map_err(|_| Error::SingularJacobian { param: s, det: map.det() })?;
                let jxw = wu * wv * area * map.det().abs();
                let point = QuadPoint { element: e.index, param: s, phys: map.point };
                visit(&e, &PointBasis { point, map: &map, dx, dy, jxw })?;
            }
        }
    }
    Ok(())
}

/// `A_kl = int w grad(phi_k) . grad(phi_l)` with `(p+1)^2` Gauss points per
/// element. `w` must be strictly positive at every quadrature point.
pub fn assemble_weighted_stiffness(
    g: &NurbsGeometry,
    w: &dyn Fn(&QuadPoint) -> f64,
) -> Result<CsrMatrix> {
    let n1 = g.dims().0;
    let nloc = (g.degrees()[0] + 1) * (g.degrees()[1] + 1);
    let mut triplets = Vec::with_capacity(g.elements().len() * nloc * nloc);
    let mut local = vec![0.0; nloc * nloc];
    let mut current: Option<(usize, usize)> = None;
    let mut globals: Vec<usize> = Vec::new();

    let flush = |local: &mut Vec<f64>, globals: &[usize], triplets: &mut Vec<(usize, usize, f64)>| {
        for (a, ga) in globals.iter().enumerate() {
            for (b, gb) in globals.iter().enumerate() {
                triplets.push((*ga, *gb, local[a * nloc + b]));
            }
        }
        local.iter_mut().for_each(|v| *v = 0.0);
    };

    for_each_quad_point(g, 0, |e, pb| {
        if current != Some(e.index) {
            if current.is_some() {
                flush(&mut local, &globals, &mut triplets);
            }
            current = Some(e.index);
            globals = (0..pb.map.basis.len()).map(|l| pb.map.basis.global_index(l, n1)).collect();
        }
        let wv = w(&pb.point);
        if !(wv > 0.0) || !wv.is_finite() {
            return Err(Error::NonPositiveWeight { element: e.index, value: wv });
        }
        let c = wv * pb.jxw;
        for a in 0..nloc {
            for b in a..nloc {
                let v = c * (pb.dx[a] * pb.dx[b] + pb.dy[a] * pb.dy[b]);
                local[a * nloc + b] += v;
                if b != a {
                    local[b * nloc + a] += v;
                }
            }
        }
        Ok(())
    })?;
    if current.is_some() {
        flush(&mut local, &globals, &mut triplets);
    }
    Ok(CsrMatrix::from_triplets(g.num_dofs(), &triplets))
}

/// Unit-coefficient stiffness matrix.
pub fn assemble_stiffness(g: &NurbsGeometry) -> Result<CsrMatrix> {
    assemble_weighted_stiffness(g, &|_| 1.0)
}

/// `b_k = int f phi_k`.
pub fn assemble_load(g: &NurbsGeometry, f: &dyn Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let n1 = g.dims().0;
    let mut b = vec![0.0; g.num_dofs()];
    for_each_quad_point(g, 0, |e, pb| {
        let fv = f(pb.point.phys);
        if !fv.is_finite() {
            return Err(Error::NonFinite { what: "source value", element: e.index });
        }
        let c = fv * pb.jxw;
        for (l, r) in pb.map.basis.values.iter().enumerate() {
            b[pb.map.basis.global_index(l, n1)] += c * r;
        }
        Ok(())
    })?;
    Ok(b)
}

/// Interior system after eliminating prescribed boundary coefficients.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    pub dofs: DofMap,
    /// `A_II`.
    pub matrix: CsrMatrix,
    /// `b_I - A_IB x_B`.
    pub rhs: Vec<f64>,
    /// Full-length coefficient vector holding `x_B` (zeros at interior dofs).
    pub boundary_values: Vec<f64>,
}

impl DirichletSystem {
    /// Scatters interior unknowns into a full coefficient vector.
    pub fn merge(&self, interior: &[f64]) -> FieldCoefficients {
        let mut coeffs = self.boundary_values.clone();
        for (k, &i) in self.dofs.interior.iter().enumerate() {
            coeffs[i] = interior[k];
        }
        FieldCoefficients { coeffs }
    }
}

/// Boundary coefficients interpolating `bc` at the Greville points of each
/// boundary curve (corners are interpolatory).
pub fn boundary_coefficients(g: &NurbsGeometry, bc: &dyn Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let (n1, n2) = g.dims();
    let [kx, ky] = g.knot_vectors();
    let w = g.weights();
    let mut out = vec![0.0; n1 * n2];

    // (fixed parameter, along xi?) per edge
    let edges: [(bool, f64); 4] = [(true, 0.0), (true, 1.0), (false, 0.0), (false, 1.0)];
    for (along_xi, fixed) in edges {
        let kv = if along_xi { kx } else { ky };
        let n = kv.num_basis();
        let index = |k: usize| -> usize {
            match (along_xi, fixed == 0.0) {
                (true, true) => k,
                (true, false) => k + n1 * (n2 - 1),
                (false, true) => n1 * k,
                (false, false) => (n1 - 1) + n1 * k,
            }
        };
        let mut rhs = Vec::with_capacity(n);
        for &t in &kv.greville() {
            let s = if along_xi { [t, fixed] } else { [fixed, t] };
            let x = g.map_point(s, 0).point;
            let v = bc(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteBoundary { point: x });
            }
            // edge denominator: only the edge row of weights is active
            let b = kv.eval_basis_padded(t, 0);
            let wsum: f64 = b
                .values()
                .iter()
                .enumerate()
                .map(|(a, nv)| nv * w_at(w, index(b.first() + a), n1))
                .sum();
            rhs.push(wsum * v);
        }
        let d = crate::linalg::banded_solve(&collocation_matrix(kv), &[rhs])?.remove(0);
        for (k, dk) in d.iter().enumerate() {
            let gi = index(k);
            out[gi] = dk / w_at(w, gi, n1);
        }
    }
    Ok(out)
}

fn w_at(w: &crate::splines::TensorWeights, flat: usize, n1: usize) -> f64 {
    w.get(flat % n1, flat / n1)
}

/// Eliminates Dirichlet boundary coefficients interpolating `bc`.
pub fn apply_dirichlet(
    a: &CsrMatrix,
    b: &[f64],
    g: &NurbsGeometry,
    bc: &dyn Fn([f64; 2]) -> f64,
) -> Result<DirichletSystem> {
    let xb = boundary_coefficients(g, bc)?;
    apply_dirichlet_values(a, b, g, xb)
}

/// Eliminates given boundary coefficients (full-length vector, interior
/// entries ignored).
pub fn apply_dirichlet_values(
    a: &CsrMatrix,
    b: &[f64],
    g: &NurbsGeometry,
    mut boundary_values: Vec<f64>,
) -> Result<DirichletSystem> {
    let dofs = DofMap::new(g);
    if a.dim() != dofs.total() || b.len() != dofs.total() || boundary_values.len() != dofs.total() {
        return Err(Error::invalid("system size does not match the geometry"));
    }
    for &i in &dofs.interior {
        boundary_values[i] = 0.0;
    }
    let a_ib = a.submatrix(&dofs.interior, &dofs.boundary);
    let xb: Vec<f64> = dofs.boundary.iter().map(|&i| boundary_values[i]).collect();
    let lift = a_ib.apply(&xb);
    let rhs = dofs.interior.iter().zip(&lift).map(|(&i, l)| b[i] - l).collect();
    let matrix = a.submatrix(&dofs.interior, &dofs.interior).into_square();
    Ok(DirichletSystem { dofs, matrix, rhs, boundary_values })
}

/// Solves the reduced system and merges boundary and interior coefficients.
pub fn solve_dirichlet_system(sys: &DirichletSystem, lin: &CgSettings) -> Result<FieldCoefficients> {
    let out = cg_solve(&sys.matrix, &sys.rhs, lin)?;
    Ok(sys.merge(&out.x))
}

/// Galerkin solution of `-Laplace(u) = f`, `u = bc` on the boundary.
pub fn solve_poisson(
    g: &NurbsGeometry,
    f: &dyn Fn([f64; 2]) -> f64,
    bc: &dyn Fn([f64; 2]) -> f64,
    lin: &CgSettings,
) -> Result<FieldCoefficients> {
    let a = assemble_stiffness(g)?;
    let b = assemble_load(g, f)?;
    let sys = apply_dirichlet(&a, &b, g, bc)?;
    solve_dirichlet_system(&sys, lin)
}

/// Value and physical derivatives of a discrete field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEval {
    pub value: f64,
    pub grad: [f64; 2],
    /// Symmetric physical Hessian; zero unless `k = 2`.
    pub hess: [[f64; 2]; 2],
}

/// Evaluates `u` at parametric point `s` with physical derivatives up to
/// order `k <= 2`.
pub fn eval_field(g: &NurbsGeometry, u: &FieldCoefficients, s: [f64; 2], k: usize) -> Result<FieldEval> {
    let map = g.map_point(s, k.max(1));
    eval_field_at(g, u, &map, k).map_err(|e| match e {
        Error::SingularJacobian { det, .. } => Error::SingularJacobian { param: s, det },
        other => other,
    })
}

pub(crate) fn eval_field_at(g: &NurbsGeometry, u: &FieldCoefficients, map: &MapEval, k: usize) -> Result<FieldEval> {
    let n1 = g.dims().0;
    let b = &map.basis;
    let mut value = 0.0;
    let mut gs = [0.0; 2];
    let mut hs = [0.0; 3];
    for l in 0..b.len() {
        let c = u.coeffs[b.global_index(l, n1)];
        value += b.values[l] * c;
        if k >= 1 {
            gs[0] += b.d1[0][l] * c;
            gs[1] += b.d1[1][l] * c;
        }
        if k >= 2 {
            for m in 0..3 {
                hs[m] += b.d2[m][l] * c;
            }
        }
    }
    let mut out = FieldEval { value, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
    if k == 0 {
        return Ok(out);
    }
    let det = map.det();
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::SingularJacobian { param: [f64::NAN; 2], det });
    }
    let j = map.jac;
    // inverse Jacobian: inv[s_b][x_a] = d s_b / d x_a
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    // grad_x u = J^{-T} grad_s u
    let grad = [inv[0][0] * gs[0] + inv[1][0] * gs[1], inv[0][1] * gs[0] + inv[1][1] * gs[1]];
    out.grad = grad;
    if k >= 2 {
        // H_s - sum_c u_{x_c} x_c'' , then conjugate by J^{-1}
        let mut m = [[hs[0], hs[1]], [hs[1], hs[2]]];
        for c in 0..2 {
            let xc = map.hess[c];
            m[0][0] -= grad[c] * xc[0];
            m[0][1] -= grad[c] * xc[1];
            m[1][0] -= grad[c] * xc[1];
            m[1][1] -= grad[c] * xc[2];
        }
        let mut h = [[0.0; 2]; 2];
        for (a, row) in h.iter_mut().enumerate() {
            for (bb, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for c in 0..2 {
                    for d in 0..2 {
                        acc += inv[c][a] * m[c][d] * inv[d][bb];
                    }
                }
                *v = acc;
            }
        }
        out.hess = h;
    }
    Ok(out)
}
