//! Compressed-row sparse matrices, preconditioned conjugate gradients and
//! banded direct solves.

use crate::error::SolverError;

/// Square sparse matrix in compressed row form with sorted, unique columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in the order they appear, so the result only depends on the triplet
    /// order, never on hashing.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 4);
        let mut vals = Vec::with_capacity(triplets.len() / 4);
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n} x {n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, i)).abs());
            }
        }
        worst
    }

    pub fn scale(&mut self, c: f64) {
        self.vals.iter_mut().for_each(|v| *v *= c);
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// Restriction to `rows x cols` given as index lists (both sorted).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SubMatrix {
        let mut col_map = vec![usize::MAX; self.n];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut row_ptr = vec![0usize; rows.len() + 1];
        let mut out_cols = Vec::new();
        let mut out_vals = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            let (rc, rv) = self.row(r);
            for (c, v) in rc.iter().zip(rv) {
                let m = col_map[*c];
                if m != usize::MAX {
                    out_cols.push(m);
                    out_vals.push(*v);
                }
            }
            row_ptr[k + 1] = out_cols.len();
        }
        SubMatrix { nrows: rows.len(), ncols: cols.len(), row_ptr, cols: out_cols, vals: out_vals }
    }
}

/// Rectangular sparse block extracted from a [`CsrMatrix`].
#[derive(Debug, Clone)]
pub struct SubMatrix {
    pub nrows: usize,
    pub ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SubMatrix {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
                self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(c, v)| v * x[*c]).sum()
            })
            .collect()
    }

    /// Converts a square block into a [`CsrMatrix`].
    pub fn into_square(self) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols, "block is not square");
        CsrMatrix { n: self.nrows, row_ptr: self.row_ptr, cols: self.cols, vals: self.vals }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Diagonal,
}

/// Linear-solver settings shared by every Galerkin solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Relative residual target `|b - Ax| <= tol |b|`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * n`.
    pub max_iter: Option<usize>,
    pub precond: Preconditioner,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None, precond: Preconditioner::Diagonal }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients from a zero initial guess.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], settings: &CgSettings) -> Result<CgOutcome, SolverError> {
    cg_solve_observed(a, b, settings, |_, _| {})
}

/// [`cg_solve`] calling `observe(k, x_k)` after every iterate update.
pub fn cg_solve_observed(
    a: &CsrMatrix,
    b: &[f64],
    settings: &CgSettings,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<CgOutcome, SolverError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolverError::Dimension(format!("rhs has length {}, matrix is {n} x {n}", b.len())));
    }
    let max_iter = settings.max_iter.unwrap_or(10 * n.max(1));
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = match settings.precond {
        Preconditioner::Diagonal => a
            .diagonal()
            .iter()
            .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
            .collect(),
        Preconditioner::None => vec![1.0; n],
    };
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for k in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(SolverError::Breakdown { iteration: k, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observe(k, &x);
        res = norm(&r) / bnorm;
        if res <= settings.tol {
            return Ok(CgOutcome { x, iterations: k, relative_residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged { iterations: max_iter, residual: res })
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major band storage: entry (i, j) at i * width + (j + kl - i)
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, band: vec![0.0; n * (kl + ku + 1)] }
    }

    /// Captures the band of a dense matrix, sizing the bandwidths to its
    /// nonzero pattern.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let (mut kl, mut ku) = (0, 0);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    if j < i {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    m.set(i, j, *v);
                }
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) { self.band[i * self.width() + j + self.kl - i] } else { 0.0 }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let w = self.width();
        self.band[i * w + j + self.kl - i] = v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization without pivoting.
    pub fn factor(mut self) -> Result<BandedLu, SolverError> {
        let n = self.n;
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let w = self.width();
        for k in 0..n {
            let pivot = self.band[k * w + self.kl];
            if pivot.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(SolverError::SingularBanded { row: k, pivot });
            }
            let imax = (k + self.kl).min(n - 1);
            let jmax = (k + self.ku).min(n - 1);
            for i in k + 1..=imax {
                let lik = self.get(i, k) / pivot;
                self.set(i, k, lik);
                if lik != 0.0 {
                    for j in k + 1..=jmax {
                        let v = self.get(i, j) - lik * self.get(k, j);
                        self.set(i, j, v);
                    }
                }
            }
        }
        Ok(BandedLu { lu: self })
    }
}

/// LU factors of a [`BandedMatrix`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let m = &self.lu;
        let n = m.n;
        for i in 0..n {
            let lo = i.saturating_sub(m.kl);
            let s: f64 = (lo..i).map(|j| m.get(i, j) * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + m.ku).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|j| m.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / m.get(i, i);
        }
    }
}

/// Factors `b` once and solves for each right-hand side.
pub fn banded_solve(b: &BandedMatrix, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SolverError> {
    if let Some(bad) = rhs.iter().find(|r| r.len() != b.dim()) {
        return Err(SolverError::Dimension(format!(
            "rhs of length {} for a {}-dimensional system",
            bad.len(),
            b.dim()
        )));
    }
    let lu = b.clone().factor()?;
    Ok(rhs
        .iter()
        .map(|r| {
            let mut x = r.clone();
            lu.solve_in_place(&mut x);
            x
        })
        .collect())
}
