mod common;

use common::{edge_params, fd_laplace, warped_geometry};
use mmigm::assembly::{eval_field, solve_poisson, FieldCoefficients};
use mmigm::geometry::{build_identity_geometry, NurbsGeometry, Rect};
use mmigm::linalg::CgSettings;
use mmigm::movemesh::{
    compute_movement, eval_monitor, init_logical_mesh, make_boundary_map, mmigm_solve, solve_harmonic_map,
    LogicalMesh, MonitorKind, MonitorSpec, MoveMeshConfig,
};
use mmigm::problems::case2_tanh;
use mmigm::splines::KnotVector;

fn uniform(rect: Rect, p: usize, m: usize) -> NurbsGeometry {
    let kv = KnotVector::open_uniform(p, m, 1).unwrap();
    build_identity_geometry(rect, kv.clone(), kv)
}

fn tight() -> CgSettings {
    CgSettings { tol: 1e-13, ..Default::default() }
}

/// Warped interior on a non-square rectangle; the boundary stays put.
fn warped_on(rect: Rect, m: usize) -> NurbsGeometry {
    let g = warped_geometry(m);
    g.map_control_points(|p| rect.from_unit(p))
}

#[test]
fn logical_mesh_matches_finite_difference_oracle() {
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let logical = Rect::unit();
    let bm = make_boundary_map(rect, logical);
    let g = uniform(rect, 3, 16);
    let lm = init_logical_mesh(&g, &bm, &tight()).unwrap();
    let n = 257;
    for k in 0..2 {
        let fd = fd_laplace(rect, n, bm.component(k));
        for j in (0..n).step_by(16) {
            for i in (0..n).step_by(16) {
                let s = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let v = eval_field(&g, &lm.xi0[k], s, 0).unwrap().value;
                assert!((v - fd[i + n * j]).abs() <= 1e-3, "xi{k} at ({i}, {j}): {v} vs {}", fd[i + n * j]);
            }
        }
    }
}

#[test]
fn laplace_solve_matches_finite_difference_oracle_for_curved_data() {
    // Non-affine harmonic data so the comparison is not trivially exact.
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let bc = |x: [f64; 2]| x[0].exp() * x[1].sin() + 0.3 * (x[0] * x[0] - x[1] * x[1]);
    let g = uniform(rect, 3, 16);
    let u = solve_poisson(&g, &|_| 0.0, &bc, &tight()).unwrap();
    let n = 257;
    let fd = fd_laplace(rect, n, bc);
    let mut worst = 0.0f64;
    for j in (0..n).step_by(8) {
        for i in (0..n).step_by(8) {
            let s = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
            worst = worst.max((eval_field(&g, &u, s, 0).unwrap().value - fd[i + n * j]).abs());
        }
    }
    assert!(worst <= 1e-3, "max nodal difference {worst}");
}

#[test]
fn unit_monitor_leaves_the_logical_map_unchanged() {
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let g = warped_on(rect, 6);
    let bm = make_boundary_map(rect, Rect::unit());
    let lm = init_logical_mesh(&g, &bm, &tight()).unwrap();
    let u = FieldCoefficients::interpolate(&g, |x| (3.0 * x[0]).sin() * x[1]).unwrap();
    for c in [1.0, 2.5] {
        let spec = MonitorSpec { kind: MonitorKind::Combined, epsilon: c * c, alpha: 0.0, beta: 0.0, smoothing: 0 };
        let xi = solve_harmonic_map(&g, &spec, &u, &bm, &tight()).unwrap();
        let mv = compute_movement(&g, &xi, &lm).unwrap();
        assert!(mv.xi_inf_err <= 1e-9, "M = {c}: nodal difference {}", mv.xi_inf_err);
        assert!(mv.dx.iter().all(|d| d[0].abs() <= 1e-8 && d[1].abs() <= 1e-8));
    }
}

/// Logical mesh whose map is `xi = (a x, b y)` on an identity geometry.
fn affine_logical(g: &NurbsGeometry, a: f64, b: f64) -> ([FieldCoefficients; 2], LogicalMesh) {
    let xi = [
        FieldCoefficients::interpolate(g, |x| a * x[0]).unwrap(),
        FieldCoefficients::interpolate(g, |x| b * x[1]).unwrap(),
    ];
    let nodes = g.mesh_nodes().nodes.iter().map(|x| [a * x[0], b * x[1]]).collect();
    (xi.clone(), LogicalMesh { domain: Rect::new(0.0, a, 0.0, b).unwrap(), xi0: xi, nodes })
}

#[test]
fn movement_examples() {
    let g = uniform(Rect::unit(), 3, 6);
    let (n1, _) = g.dims();
    let k = 3 + n1 * 4;

    let (xi, lm) = affine_logical(&g, 1.0, 1.0);
    let mv = compute_movement(&g, &xi, &lm).unwrap();
    assert!(mv.xi_inf_err <= 1e-13);
    assert!(mv.dx.iter().all(|d| d[0].abs() <= 1e-13 && d[1].abs() <= 1e-13));

    let (xi, mut lm) = affine_logical(&g, 1.0, 1.0);
    lm.nodes[k][0] += 0.01;
    let mv = compute_movement(&g, &xi, &lm).unwrap();
    assert!((mv.dx[k][0] - 0.01).abs() <= 1e-12 && mv.dx[k][1].abs() <= 1e-12, "{:?}", mv.dx[k]);
    assert!((mv.xi_inf_err - 0.01).abs() <= 1e-12);

    let (xi, mut lm) = affine_logical(&g, 2.0, 4.0);
    lm.nodes[k][0] += 0.02;
    lm.nodes[k][1] += 0.04;
    let mv = compute_movement(&g, &xi, &lm).unwrap();
    assert!((mv.dx[k][0] - 0.01).abs() <= 1e-12 && (mv.dx[k][1] - 0.01).abs() <= 1e-12, "{:?}", mv.dx[k]);
    for (j, d) in mv.dx.iter().enumerate() {
        if j != k {
            assert!(d[0].abs() <= 1e-12 && d[1].abs() <= 1e-12);
        }
    }
}

#[test]
fn monitor_examples() {
    let g = uniform(Rect::unit(), 3, 4);
    let lin = FieldCoefficients::interpolate(&g, |x| x[0]).unwrap();
    let quad = FieldCoefficients::interpolate(&g, |x| x[0] * x[0]).unwrap();
    for s in [[0.2, 0.3], [0.7, 0.9]] {
        for alpha in [0.1, 2.0] {
            let m = eval_monitor(&MonitorSpec::gradient(alpha), &g, &lin, s).unwrap();
            assert!((m - (1.0 + alpha).sqrt()).abs() <= 1e-12, "{m}");
        }
        let m = eval_monitor(&MonitorSpec::hessian(0.01), &g, &quad, s).unwrap();
        assert!((m - (1.0 + 4.0 * 0.01f64).sqrt()).abs() <= 1e-10, "{m}");
    }

    // the tanh front's monitor peaks on the circle r = 0.25
    let p = case2_tanh();
    let g = uniform(p.domain, 3, 64);
    let u = FieldCoefficients::interpolate(&g, |x| (p.boundary)(x)).unwrap();
    let spec = MonitorSpec::gradient(0.1);
    let mut best = (0.0, 0.0);
    for j in 0..=200 {
        for i in 0..=200 {
            let s = [i as f64 / 200.0, j as f64 / 200.0];
            let v = eval_monitor(&spec, &g, &u, s).unwrap();
            if v > best.0 {
                best = (v, (s[0] - 0.5).hypot(s[1] - 0.5));
            }
        }
    }
    assert!((best.1 - 0.25).abs() <= 0.01, "peak at r = {}", best.1);
}

#[test]
fn boundary_is_invariant_across_iterations() {
    let p = case2_tanh();
    let g0 = uniform(p.domain, 3, 12);
    let spec = MonitorSpec { smoothing: 16, ..MonitorSpec::gradient(0.1) };
    let cfg = MoveMeshConfig { max_outer: 4, ..Default::default() };
    let edge = edge_params(101);
    let reference: Vec<[f64; 2]> = edge.iter().map(|s| g0.map_point(*s, 0).point).collect();
    let mut seen = 0;
    let state = mmigm_solve(&p, &g0, &spec, &cfg, |_, g, _| {
        seen += 1;
        for (s, x) in edge.iter().zip(&reference) {
            assert_eq!(g.map_point(*s, 0).point, *x, "edge point {s:?} moved");
        }
        assert!(g.min_jacobian() > 0.0);
    })
    .unwrap();
    assert!(seen >= 1 && state.mesh_updates() == seen);
}

#[test]
fn identity_monitor_is_a_fixed_point() {
    let p = case2_tanh();
    let g0 = uniform(p.domain, 3, 16);
    let state = mmigm_solve(&p, &g0, &MonitorSpec::identity(), &MoveMeshConfig::default(), |_, _, _| {
        panic!("no mesh update expected")
    })
    .unwrap();
    assert!(state.converged);
    assert_eq!(state.trace.len(), 1);
    assert_eq!(state.mesh_updates(), 0);
    assert!(state.trace[0].xi_inf_err <= 1e-9);
    assert_eq!(state.geometry.control_points(), g0.control_points());
}

#[test]
fn trace_reports_progress_of_the_map() {
    let p = case2_tanh();
    let g0 = uniform(p.domain, 3, 12);
    let spec = MonitorSpec { smoothing: 16, ..MonitorSpec::gradient(0.1) };
    let cfg = MoveMeshConfig { max_outer: 30, ..Default::default() };
    let state = mmigm_solve(&p, &g0, &spec, &cfg, |_, _, _| {}).unwrap();
    let first = state.trace.first().unwrap().xi_inf_err;
    let last = state.trace.last().unwrap().xi_inf_err;
    assert!(last <= first, "{first} -> {last}");
    assert!(state.trace.iter().all(|r| r.min_jacobian > 0.0 && r.tau_used <= 0.5));
}
