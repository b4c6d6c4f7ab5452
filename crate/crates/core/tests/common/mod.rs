#![allow(dead_code)]

use mmigm::geometry::{build_identity_geometry, NurbsGeometry, Rect};
use mmigm::linalg::{cg_solve, CgSettings, CsrMatrix};
use mmigm::splines::{KnotVector, TensorWeights};

/// Cubic rational geometry on the unit square with a smooth interior bulge
/// and non-uniform weights; the boundary stays on the square.
pub fn warped_geometry(m: usize) -> NurbsGeometry {
    let kv = KnotVector::open_uniform(3, m, 1).unwrap();
    let g = build_identity_geometry(Rect::unit(), kv.clone(), kv.clone());
    let n = kv.num_basis();
    let wx: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * ((i as f64) * 0.9).sin().abs()).collect();
    let wy: Vec<f64> = (0..n).map(|j| 1.0 + 0.2 * ((j as f64) * 1.3).cos().abs()).collect();
    let pts = g
        .control_points()
        .iter()
        .map(|p| {
            let b = 0.06 * (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin();
            [p[0] + b, p[1] + 0.5 * b]
        })
        .collect();
    NurbsGeometry::new(kv.clone(), kv, TensorWeights::outer(&wx, &wy).unwrap(), pts).unwrap()
}

/// Five-point finite-difference solve of `-Laplace(v) = 0` on `rect` with
/// Dirichlet data `bc`, on an `n x n` grid of points (boundary included).
/// Returns grid values, x index fastest.
pub fn fd_laplace(rect: Rect, n: usize, bc: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let hx = rect.width() / (n - 1) as f64;
    let hy = rect.height() / (n - 1) as f64;
    let pt = |i: usize, j: usize| [rect.x0 + i as f64 * hx, rect.y0 + j as f64 * hy];
    let ni = n - 2;
    let id = |i: usize, j: usize| (i - 1) + ni * (j - 1);
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let mut trip = Vec::new();
    let mut rhs = vec![0.0; ni * ni];
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let r = id(i, j);
            trip.push((r, r, 2.0 * cx + 2.0 * cy));
            for (ii, jj, c) in [(i - 1, j, cx), (i + 1, j, cx), (i, j - 1, cy), (i, j + 1, cy)] {
                if ii == 0 || jj == 0 || ii == n - 1 || jj == n - 1 {
                    rhs[r] += c * bc(pt(ii, jj));
                } else {
                    trip.push((r, id(ii, jj), -c));
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(ni * ni, &trip);
    let x = cg_solve(&a, &rhs, &CgSettings { tol: 1e-13, max_iter: Some(100_000), ..Default::default() }).unwrap().x;
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[i + n * j] = if i == 0 || j == 0 || i == n - 1 || j == n - 1 { bc(pt(i, j)) } else { x[id(i, j)] };
        }
    }
    out
}

/// Samples `count` points along each of the four parametric edges.
pub fn edge_params(count: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(4 * count);
    for k in 0..count {
        let t = k as f64 / (count - 1) as f64;
        out.extend([[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]]);
    }
    out
}
