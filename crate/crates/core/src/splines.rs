//! Open knot vectors, B-spline and tensor-product NURBS bases.
//!
//! All knot vectors live on the parametric interval `[0, 1]`. Evaluation is
//! defined on the closed interval: `t = 1` belongs to the last nonempty span.

use crate::error::{Error, Result};

/// Tolerance used when comparing knots for equality.
const KNOT_EPS: f64 = 1e-14;

/// An open, nondecreasing knot vector on `[0, 1]` together with its degree.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Validates and wraps a raw knot sequence.
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnotVector(format!(
                "{} knots cannot carry p+1 = {} basis functions of degree {p}",
                knots.len(),
                p + 1
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnotVector("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnotVector("knots must be nondecreasing".into()));
        }
        let len = knots.len();
        if knots[..=p].iter().any(|&k| k != 0.0) || knots[len - p - 1..].iter().any(|&k| k != 1.0) {
            return Err(Error::InvalidKnotVector(format!(
                "first and last {} knots must equal 0 and 1",
                p + 1
            )));
        }
        // interior multiplicity
        let mut i = p + 1;
        while i < len - p - 1 {
            let mut j = i;
            while j + 1 < len - p - 1 && (knots[j + 1] - knots[i]).abs() <= KNOT_EPS {
                j += 1;
            }
            let mult = j - i + 1;
            if mult > p {
                return Err(Error::InvalidKnotVector(format!(
                    "interior knot {} has multiplicity {mult} > degree {p}",
                    knots[i]
                )));
            }
            i = j + 1;
        }
        Ok(Self { degree, knots })
    }

    /// Uniform open knot vector with `spans` equal interior spans whose
    /// interior breakpoints are repeated `multiplicity` times.
    ///
    /// `multiplicity = 1` gives C^{p-1} bases (k-refinement); `multiplicity = p`
    /// gives C^0 bases (hp-refinement).
    pub fn open_uniform(degree: usize, spans: usize, multiplicity: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidKnotVector("degree must be at least 1".into()));
        }
        if spans < 1 {
            return Err(Error::InvalidKnotVector("need at least one span".into()));
        }
        if multiplicity < 1 || multiplicity > degree {
            return Err(Error::InvalidKnotVector(format!(
                "interior multiplicity {multiplicity} outside 1..={degree}"
            )));
        }
        let mut knots = vec![0.0; degree + 1];
        for k in 1..spans {
            let t = k as f64 / spans as f64;
            knots.extend(std::iter::repeat(t).take(multiplicity));
        }
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions `n = len - p - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Indices `i` of the nonempty spans `[knots[i], knots[i+1])`, in order.
    pub fn nonempty_spans(&self) -> Vec<usize> {
        (self.degree..self.num_basis())
            .filter(|&i| self.knots[i + 1] > self.knots[i])
            .collect()
    }

    /// Distinct breakpoints `0 = b_0 < ... < b_m = 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![self.knots[self.degree]];
        for &i in &self.nonempty_spans() {
            out.push(self.knots[i + 1]);
        }
        out
    }

    /// Span index `i` with `knots[i] <= t < knots[i+1]`; `t = 1` maps to the
    /// last nonempty span.
    pub fn find_span(&self, t: f64) -> usize {
        debug_assert!((0.0..=1.0).contains(&t), "parameter {t} outside [0, 1]");
        let n = self.num_basis();
        let p = self.degree;
        if t >= self.knots[n] {
            return n - 1;
        }
        if t <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n);
        let mut mid = (lo + hi) / 2;
        while t < self.knots[mid] || t >= self.knots[mid + 1] {
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        mid
    }

    /// The `p + 1` nonzero basis functions at `t` and their derivatives up to
    /// order `k <= p`.
    pub fn eval_basis(&self, t: f64, k: usize) -> Result<BasisEval> {
        if k > self.degree {
            return Err(Error::invalid(format!(
                "derivative order {k} exceeds degree {}",
                self.degree
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("parameter {t} outside [0, 1]")));
        }
        Ok(self.eval_basis_padded(t, k))
    }

    /// Like [`eval_basis`](Self::eval_basis) but accepts `k > p`, filling the
    /// higher-order rows with zeros.
    pub(crate) fn eval_basis_padded(&self, t: f64, k: usize) -> BasisEval {
        let t = t.clamp(0.0, 1.0);
        let span = self.find_span(t);
        let ders = ders_basis_funs(&self.knots, self.degree, span, t, k);
        BasisEval { span, ders }
    }

    /// Greville abscissae `(k_{i+1} + ... + k_{i+p}) / p`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.num_basis())
            .map(|i| {
                let s: f64 = self.knots[i + 1..=i + p].iter().sum();
                (s / p as f64).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Support `[knots[i], knots[i+p+1]]` of basis function `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.degree + 1])
    }
}

/// Nonzero univariate basis values and derivatives at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    /// Knot span index; the nonzero functions are `span - p ..= span`.
    pub span: usize,
    /// `ders[k][a]` is the k-th derivative of basis `span - p + a`.
    pub ders: Vec<Vec<f64>>,
}

impl BasisEval {
    pub fn values(&self) -> &[f64] {
        &self.ders[0]
    }

    /// Index of the first nonzero basis function.
    pub fn first(&self) -> usize {
        self.span + 1 - self.ders[0].len()
    }
}

/// Triangular Cox-de Boor recurrence for values and derivatives
/// (0/0 := 0). Rows above the degree are zero.
fn ders_basis_funs(knots: &[f64], p: usize, span: usize, t: f64, n_ders: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = if ndu[j][r] != 0.0 { ndu[r][j - 1] / ndu[j][r] } else { 0.0 };
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; n_ders + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let top = n_ders.min(p);
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0].iter_mut().for_each(|v| *v = 0.0);
        a[0][0] = 1.0;
        for k in 1..=top {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let rk = rk as usize;
                let den = ndu[pk + 1][rk];
                a[s2][0] = if den != 0.0 { a[s1][0] / den } else { 0.0 };
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                let den = ndu[pk + 1][idx];
                a[s2][j] = if den != 0.0 { (a[s1][j] - a[s1][j - 1]) / den } else { 0.0 };
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                let den = ndu[pk + 1][r];
                a[s2][k] = if den != 0.0 { -a[s1][k - 1] / den } else { 0.0 };
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=top {
        for v in ders[k].iter_mut() {
            *v *= fac;
        }
        fac *= (p - k) as f64;
    }
    ders
}

/// Positive weights on an `n1 x n2` grid, stored with the first index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorWeights {
    n1: usize,
    n2: usize,
    w: Vec<f64>,
}

impl TensorWeights {
    pub fn new(n1: usize, n2: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != n1 * n2 {
            return Err(Error::invalid(format!(
                "weight grid has {} entries, expected {n1} x {n2}",
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("weights must be positive, got {bad}")));
        }
        Ok(Self { n1, n2, w })
    }

    pub fn uniform(n1: usize, n2: usize) -> Self {
        Self { n1, n2, w: vec![1.0; n1 * n2] }
    }

    /// Weights `w_ij = a_i * b_j`.
    pub fn outer(a: &[f64], b: &[f64]) -> Result<Self> {
        let w = b.iter().flat_map(|bj| a.iter().map(move |ai| ai * bj)).collect();
        Self::new(a.len(), b.len(), w)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i + self.n1 * j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// Rational basis functions of a tensor-product NURBS space at one point.
///
/// Local index `a + (p+1) * b` corresponds to the global function
/// `(first[0] + a, first[1] + b)`.
#[derive(Debug, Clone)]
pub struct NurbsEval {
    pub first: [usize; 2],
    pub degree: [usize; 2],
    pub values: Vec<f64>,
    /// First derivatives `[d/dxi, d/deta]`; empty when not requested.
    pub d1: [Vec<f64>; 2],
    /// Second derivatives `[xixi, xieta, etaeta]`; empty when not requested.
    pub d2: [Vec<f64>; 3],
}

impl NurbsEval {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Global grid index `(i, j)` of a local function.
    pub fn grid_index(&self, local: usize) -> (usize, usize) {
        let w = self.degree[0] + 1;
        (self.first[0] + local % w, self.first[1] + local / w)
    }

    /// Flat global index `i + n1 * j`.
    pub fn global_index(&self, local: usize, n1: usize) -> usize {
        let (i, j) = self.grid_index(local);
        i + n1 * j
    }
}

/// Evaluates the nonzero bivariate NURBS functions `R_ij` at `s` with
/// parametric derivatives up to order `k` (at most 2).
pub fn eval_nurbs_2d(
    kv_xi: &KnotVector,
    kv_eta: &KnotVector,
    weights: &TensorWeights,
    s: [f64; 2],
    k: usize,
) -> NurbsEval {
    debug_assert!(k <= 2, "derivative order {k} > 2 not supported");
    let bx = kv_xi.eval_basis_padded(s[0], k);
    let by = kv_eta.eval_basis_padded(s[1], k);
    eval_nurbs_from_univariate(&bx, &by, weights, k)
}

pub(crate) fn eval_nurbs_from_univariate(
    bx: &BasisEval,
    by: &BasisEval,
    weights: &TensorWeights,
    k: usize,
) -> NurbsEval {
    let px = bx.ders[0].len() - 1;
    let py = by.ders[0].len() - 1;
    let (fx, fy) = (bx.first(), by.first());
    let nloc = (px + 1) * (py + 1);

    // weighted products A = w N M and their derivatives
    let mut a0 = vec![0.0; nloc];
    let mut w0 = 0.0;
    for b in 0..=py {
        for a in 0..=px {
            let v = weights.get(fx + a, fy + b) * bx.ders[0][a] * by.ders[0][b];
            a0[a + (px + 1) * b] = v;
            w0 += v;
        }
    }
    let values: Vec<f64> = a0.iter().map(|v| v / w0).collect();
    let mut out = NurbsEval {
        first: [fx, fy],
        degree: [px, py],
        values,
        d1: [Vec::new(), Vec::new()],
        d2: [Vec::new(), Vec::new(), Vec::new()],
    };
    if k == 0 {
        return out;
    }

    let prod = |dx: usize, dy: usize| -> Vec<f64> {
        let mut v = vec![0.0; nloc];
        for b in 0..=py {
            for a in 0..=px {
                v[a + (px + 1) * b] =
                    weights.get(fx + a, fy + b) * bx.ders[dx][a] * by.ders[dy][b];
            }
        }
        v
    };
    let ax = prod(1, 0);
    let ay = prod(0, 1);
    let wx: f64 = ax.iter().sum();
    let wy: f64 = ay.iter().sum();
    let r = &out.values;
    let rx: Vec<f64> = (0..nloc).map(|i| (ax[i] - r[i] * wx) / w0).collect();
    let ry: Vec<f64> = (0..nloc).map(|i| (ay[i] - r[i] * wy) / w0).collect();

    if k >= 2 {
        let axx = prod(2, 0);
        let axy = prod(1, 1);
        let ayy = prod(0, 2);
        let wxx: f64 = axx.iter().sum();
        let wxy: f64 = axy.iter().sum();
        let wyy: f64 = ayy.iter().sum();
        let rxx = (0..nloc)
            .map(|i| (axx[i] - 2.0 * rx[i] * wx - r[i] * wxx) / w0)
            .collect();
        let rxy = (0..nloc)
            .map(|i| (axy[i] - rx[i] * wy - ry[i] * wx - r[i] * wxy) / w0)
            .collect();
        let ryy = (0..nloc)
            .map(|i| (ayy[i] - 2.0 * ry[i] * wy - r[i] * wyy) / w0)
            .collect();
        out.d2 = [rxx, rxy, ryy];
    }
    out.d1 = [rx, ry];
    out
}
