//! Tensor-product NURBS geometry maps `F: [0,1]^2 -> Omega` and the physical
//! mesh they carry.
//!
//! Physical mesh nodes are the images of the Greville parameter grid, so the
//! node grid has exactly one node per control point. Moving nodes and then
//! re-fitting the control net is a square tensor-product collocation problem.

use crate::assembly::gauss_rule;
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, BandedMatrix};
use crate::splines::{eval_nurbs_2d, KnotVector, NurbsEval, TensorWeights};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0) || !(y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn unit() -> Self {
        Self { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Affine image of a unit-square point.
    pub fn from_unit(&self, s: [f64; 2]) -> [f64; 2] {
        [self.x0 + self.width() * s[0], self.y0 + self.height() * s[1]]
    }

    pub fn to_unit(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.x0) / self.width(), (x[1] - self.y0) / self.height()]
    }
}

/// Point, Jacobian and (optionally) second derivatives of the geometry map.
#[derive(Debug, Clone)]
pub struct MapEval {
    pub point: [f64; 2],
    /// `jac[a][b] = d x_a / d s_b`.
    pub jac: [[f64; 2]; 2],
    /// `hess[a] = [x_a,ss, x_a,st, x_a,tt]`; zero unless requested.
    pub hess: [[f64; 3]; 2],
    pub basis: NurbsEval,
}

impl MapEval {
    pub fn det(&self) -> f64 {
        self.jac[0][0] * self.jac[1][1] - self.jac[0][1] * self.jac[1][0]
    }
}

/// A rectangular patch of the parametric domain spanned by one pair of
/// nonempty knot spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamElement {
    /// Position in the element grid.
    pub index: (usize, usize),
    pub xi: [f64; 2],
    pub eta: [f64; 2],
}

impl ParamElement {
    pub fn area(&self) -> f64 {
        (self.xi[1] - self.xi[0]) * (self.eta[1] - self.eta[0])
    }

    pub fn lerp(&self, u: f64, v: f64) -> [f64; 2] {
        [self.xi[0] + u * (self.xi[1] - self.xi[0]), self.eta[0] + v * (self.eta[1] - self.eta[0])]
    }
}

/// Tensor-product NURBS geometry: knot vectors, weights and control net.
/// Grids are stored with the first (xi) index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsGeometry {
    kv: [KnotVector; 2],
    weights: TensorWeights,
    control_points: Vec<[f64; 2]>,
}

impl NurbsGeometry {
    pub fn new(
        kv_xi: KnotVector,
        kv_eta: KnotVector,
        weights: TensorWeights,
        control_points: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let (n1, n2) = (kv_xi.num_basis(), kv_eta.num_basis());
        if weights.dims() != (n1, n2) {
            return Err(Error::invalid(format!(
                "weight grid {:?} does not match basis dimensions ({n1}, {n2})",
                weights.dims()
            )));
        }
        if control_points.len() != n1 * n2 {
            return Err(Error::invalid(format!(
                "{} control points for a {n1} x {n2} basis",
                control_points.len()
            )));
        }
        Ok(Self { kv: [kv_xi, kv_eta], weights, control_points })
    }

    pub fn knot_vectors(&self) -> &[KnotVector; 2] {
        &self.kv
    }

    pub fn weights(&self) -> &TensorWeights {
        &self.weights
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.control_points
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.kv[0].num_basis(), self.kv[1].num_basis())
    }

    pub fn num_dofs(&self) -> usize {
        let (a, b) = self.dims();
        a * b
    }

    pub fn degrees(&self) -> [usize; 2] {
        [self.kv[0].degree(), self.kv[1].degree()]
    }

    /// Whether grid position `(i, j)` is on the outer ring.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        let (n1, n2) = self.dims();
        i == 0 || j == 0 || i + 1 == n1 || j + 1 == n2
    }

    /// Same knots and weights, new control net.
    pub fn with_control_points(&self, control_points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(self.kv[0].clone(), self.kv[1].clone(), self.weights.clone(), control_points)
    }

    /// Applies `f` to every control point.
    pub fn map_control_points(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            kv: self.kv.clone(),
            weights: self.weights.clone(),
            control_points: self.control_points.iter().map(|p| f(*p)).collect(),
        }
    }

    /// Evaluates the rational basis at `s` with derivatives up to `k <= 2`.
    pub fn basis(&self, s: [f64; 2], k: usize) -> NurbsEval {
        eval_nurbs_2d(&self.kv[0], &self.kv[1], &self.weights, s, k)
    }

    /// `F(s)`, its parametric Jacobian and, for `k = 2`, second derivatives.
    pub fn map_point(&self, s: [f64; 2], k: usize) -> MapEval {
        let basis = self.basis(s, k.max(1));
        self.map_from_basis(basis, k)
    }

    pub(crate) fn map_from_basis(&self, basis: NurbsEval, k: usize) -> MapEval {
        let n1 = self.dims().0;
        let mut point = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        let mut hess = [[0.0; 3]; 2];
        for l in 0..basis.len() {
            let cp = self.control_points[basis.global_index(l, n1)];
            for a in 0..2 {
                point[a] += basis.values[l] * cp[a];
                jac[a][0] += basis.d1[0][l] * cp[a];
                jac[a][1] += basis.d1[1][l] * cp[a];
                if k >= 2 {
                    for c in 0..3 {
                        hess[a][c] += basis.d2[c][l] * cp[a];
                    }
                }
            }
        }
        MapEval { point, jac, hess, basis }
    }

    /// Parametric elements (pairs of nonempty knot spans), xi index fastest.
    pub fn elements(&self) -> Vec<ParamElement> {
        let spans = |kv: &KnotVector| -> Vec<[f64; 2]> {
            kv.nonempty_spans().iter().map(|&i| [kv.knots()[i], kv.knots()[i + 1]]).collect()
        };
        let (sx, sy) = (spans(&self.kv[0]), spans(&self.kv[1]));
        let mut out = Vec::with_capacity(sx.len() * sy.len());
        for (j, eta) in sy.iter().enumerate() {
            for (i, xi) in sx.iter().enumerate() {
                out.push(ParamElement { index: (i, j), xi: *xi, eta: *eta });
            }
        }
        out
    }

    pub fn element_counts(&self) -> (usize, usize) {
        (self.kv[0].nonempty_spans().len(), self.kv[1].nonempty_spans().len())
    }

    /// Greville parameter pairs, xi index fastest.
    pub fn greville_grid(&self) -> Vec<[f64; 2]> {
        let (gx, gy) = (self.kv[0].greville(), self.kv[1].greville());
        gy.iter().flat_map(|y| gx.iter().map(move |x| [*x, *y])).collect()
    }

    /// Physical nodes (Greville images) and element images.
    pub fn mesh_nodes(&self) -> PhysicalMesh {
        let (n1, n2) = self.dims();
        let nodes = self.greville_grid().into_iter().map(|s| self.map_point(s, 0).point).collect();
        let elements = self
            .elements()
            .into_iter()
            .map(|e| {
                let corners = [
                    [e.xi[0], e.eta[0]],
                    [e.xi[1], e.eta[0]],
                    [e.xi[1], e.eta[1]],
                    [e.xi[0], e.eta[1]],
                ]
                .map(|s| self.map_point(s, 0).point);
                MeshElement { param: e, corners }
            })
            .collect();
        PhysicalMesh { n1, n2, nodes, elements }
    }

    /// Smallest Jacobian determinant over the Gauss points of every element
    /// (`p + 1` points per direction).
    pub fn min_jacobian(&self) -> f64 {
        let [p, q] = self.degrees();
        let (rx, ry) = (gauss_rule(p + 1).expect("degree in range"), gauss_rule(q + 1).expect("degree in range"));
        let mut worst = f64::INFINITY;
        for e in self.elements() {
            for v in &ry.points {
                for u in &rx.points {
                    worst = worst.min(self.map_point(e.lerp(*u, *v), 1).det());
                }
            }
        }
        worst
    }

    /// Re-fits the control net so that `F(greville_i, greville_j) = target_ij`.
    ///
    /// Weights and knots are kept. Fails with [`Error::MeshWrap`] when the new
    /// map has a non-positive Jacobian at some Gauss point.
    pub fn refit_from_node_targets(&self, targets: &[[f64; 2]]) -> Result<Self> {
        let refit = self.collocate(targets)?;
        refit.ensure_valid()
    }

    /// [`refit_from_node_targets`](Self::refit_from_node_targets) for targets
    /// whose boundary ring equals the current boundary nodes. The boundary
    /// control points are carried over unchanged, so the boundary curve is
    /// bit-identical to the input.
    pub fn refit_preserving_boundary(&self, targets: &[[f64; 2]]) -> Result<Self> {
        let (n1, n2) = self.dims();
        if targets.len() != n1 * n2 {
            return Err(Error::invalid(format!("{} targets for {n1} x {n2} nodes", targets.len())));
        }
        let current = self.mesh_nodes().nodes;
        let tol = 1e-9 * self.bounding_diameter().max(1.0);
        for j in 0..n2 {
            for i in 0..n1 {
                if self.is_boundary(i, j) {
                    let (a, b) = (targets[i + n1 * j], current[i + n1 * j]);
                    if (a[0] - b[0]).abs() > tol || (a[1] - b[1]).abs() > tol {
                        return Err(Error::invalid(format!(
                            "boundary target ({i}, {j}) moved from {b:?} to {a:?}"
                        )));
                    }
                }
            }
        }
        let mut refit = self.collocate(targets)?;
        for j in 0..n2 {
            for i in 0..n1 {
                if self.is_boundary(i, j) {
                    refit.control_points[i + n1 * j] = self.control_points[i + n1 * j];
                }
            }
        }
        refit.ensure_valid()
    }

    /// Denominator `W(s) = sum w_ij N_i(s_0) M_j(s_1)` of the rational basis.
    pub fn weight_function(&self, s: [f64; 2]) -> f64 {
        let bx = self.kv[0].eval_basis_padded(s[0], 0);
        let by = self.kv[1].eval_basis_padded(s[1], 0);
        let (fx, fy) = (bx.first(), by.first());
        let mut w = 0.0;
        for (b, m) in by.values().iter().enumerate() {
            for (a, n) in bx.values().iter().enumerate() {
                w += self.weights.get(fx + a, fy + b) * n * m;
            }
        }
        w
    }

    fn ensure_valid(self) -> Result<Self> {
        let min_jacobian = self.min_jacobian();
        if min_jacobian > 0.0 {
            Ok(self)
        } else {
            Err(Error::MeshWrap { min_jacobian, halvings: 0 })
        }
    }

    fn bounding_diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.control_points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Solves `Bx Q By^T = W .* T` for homogeneous control points `Q = w P`
    /// with two sweeps of banded 1D solves.
    fn collocate(&self, targets: &[[f64; 2]]) -> Result<Self> {
        let (n1, n2) = self.dims();
        if targets.len() != n1 * n2 {
            return Err(Error::invalid(format!("{} targets for {n1} x {n2} nodes", targets.len())));
        }
        if targets.iter().any(|t| !t[0].is_finite() || !t[1].is_finite()) {
            return Err(Error::invalid("non-finite node target"));
        }
        let (gx, gy) = (self.kv[0].greville(), self.kv[1].greville());
        let lu_x = collocation_matrix(&self.kv[0]).factor()?;
        let lu_y = collocation_matrix(&self.kv[1]).factor()?;

        // rhs H_rc = W(g_r, g_c) * T_rc, three channels: w x, w y
        let mut h = vec![[0.0; 2]; n1 * n2];
        for (c, &ty) in gy.iter().enumerate() {
            for (r, &tx) in gx.iter().enumerate() {
                let wsum = self.weight_function([tx, ty]);
                let t = targets[r + n1 * c];
                h[r + n1 * c] = [wsum * t[0], wsum * t[1]];
            }
        }
        let q = solve_tensor(&lu_x, &lu_y, n1, n2, &h);
        let control_points = q
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let w = self.weights.get(k % n1, k / n1);
                [v[0] / w, v[1] / w]
            })
            .collect();
        Ok(Self { kv: self.kv.clone(), weights: self.weights.clone(), control_points })
    }
}

/// Univariate Greville collocation matrix `B[r][c] = N_c(g_r)` in band form.
pub fn collocation_matrix(kv: &KnotVector) -> BandedMatrix {
    let n = kv.num_basis();
    let p = kv.degree();
    let g = kv.greville();
    let mut m = BandedMatrix::zeros(n, p, p);
    for (r, &t) in g.iter().enumerate() {
        let b = kv.eval_basis_padded(t, 0);
        for (a, v) in b.values().iter().enumerate() {
            let c = b.first() + a;
            if *v != 0.0 {
                m.set(r, c, *v);
            }
        }
    }
    m
}

/// Solves `Bx Q By^T = H` for a grid of 2-vectors (xi index fastest).
pub(crate) fn solve_tensor(
    lu_x: &BandedLu,
    lu_y: &BandedLu,
    n1: usize,
    n2: usize,
    h: &[[f64; 2]],
) -> Vec<[f64; 2]> {
    let mut z = h.to_vec();
    let mut col = vec![0.0; n1];
    for c in 0..n2 {
        for a in 0..2 {
            for r in 0..n1 {
                col[r] = z[r + n1 * c][a];
            }
            lu_x.solve_in_place(&mut col);
            for r in 0..n1 {
                z[r + n1 * c][a] = col[r];
            }
        }
    }
    let mut row = vec![0.0; n2];
    for r in 0..n1 {
        for a in 0..2 {
            for c in 0..n2 {
                row[c] = z[r + n1 * c][a];
            }
            lu_y.solve_in_place(&mut row);
            for c in 0..n2 {
                z[r + n1 * c][a] = row[c];
            }
        }
    }
    z
}

/// Identity-like geometry: unit weights and control points at affinely
/// scaled Greville pairs, so `F` is exactly the affine map onto `rect`.
pub fn build_identity_geometry(rect: Rect, kv_xi: KnotVector, kv_eta: KnotVector) -> NurbsGeometry {
    let (gx, gy) = (kv_xi.greville(), kv_eta.greville());
    let cps = gy.iter().flat_map(|y| gx.iter().map(move |x| rect.from_unit([*x, *y]))).collect();
    let w = TensorWeights::uniform(gx.len(), gy.len());
    NurbsGeometry { kv: [kv_xi, kv_eta], weights: w, control_points: cps }
}

/// One physical element with its parametric parent.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshElement {
    pub param: ParamElement,
    /// Images of the parametric corners, counter-clockwise from `(xi0, eta0)`.
    pub corners: [[f64; 2]; 4],
}

/// Logically rectangular node grid plus element images.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalMesh {
    pub n1: usize,
    pub n2: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<MeshElement>,
}

impl PhysicalMesh {
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        self.nodes[i + self.n1 * j]
    }
}
