mod common;

use common::warped_geometry;
use mmigm::assembly::{
    apply_dirichlet, assemble_load, assemble_stiffness, boundary_coefficients, eval_field, gauss_rule, solve_poisson,
    FieldCoefficients,
};
use mmigm::geometry::{build_identity_geometry, Rect};
use mmigm::linalg::{cg_solve, cg_solve_observed, CgSettings};
use mmigm::postproc::observed_order;
use mmigm::splines::KnotVector;
use rand::{Rng, SeedableRng};

#[test]
fn gauss_rules_are_exact_for_their_degree() {
    for q in 1..=16 {
        let rule = gauss_rule(q).unwrap();
        for d in 0..2 * q {
            // points live on [0, 1]
            let got = rule.integrate(|x| x.powi(d as i32));
            let exact = 1.0 / (d as f64 + 1.0);
            assert!((got - exact).abs() <= 1e-13, "q={q} degree {d}: {got} vs {exact}");
        }
    }
}

#[test]
fn stiffness_is_symmetric_with_constant_kernel() {
    let g = warped_geometry(5);
    let a = assemble_stiffness(&g).unwrap();
    assert!(a.asymmetry() <= 1e-13 * a.max_abs(), "asymmetry {}", a.asymmetry());
    let ones = vec![1.0; a.dim()];
    let r = a.apply(&ones);
    assert!(r.iter().all(|v| v.abs() <= 1e-12 * a.max_abs()));
}

#[test]
fn reduced_stiffness_is_positive_definite() {
    let g = warped_geometry(4);
    let a = assemble_stiffness(&g).unwrap();
    let f = vec![0.0; a.dim()];
    let sys = apply_dirichlet(&a, &f, &g, &|_| 0.0).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..50 {
        let x: Vec<f64> = (0..sys.matrix.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax = sys.matrix.apply(&x);
        let q: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!(q > 0.0);
    }
    // smallest diagonal positive as well
    assert!(sys.matrix.diagonal().iter().all(|d| *d > 0.0));
}

#[test]
fn galerkin_reproduces_functions_in_the_space() {
    // u = x^2 - y^2 + 3xy lies in the isoparametric quadratic space on an
    // affine map, so the discrete solution is exact.
    let kv = KnotVector::open_uniform(2, 4, 1).unwrap();
    let g = build_identity_geometry(Rect::new(0.0, 2.0, -1.0, 1.0).unwrap(), kv.clone(), kv);
    let u_exact = |x: [f64; 2]| x[0] * x[0] - x[1] * x[1] + 3.0 * x[0] * x[1];
    let u = solve_poisson(&g, &|_| 0.0, &u_exact, &CgSettings { tol: 1e-14, ..Default::default() }).unwrap();
    for s in g.greville_grid() {
        let x = g.map_point(s, 0).point;
        assert!((eval_field(&g, &u, s, 0).unwrap().value - u_exact(x)).abs() <= 1e-10);
    }
}

#[test]
fn galerkin_residual_is_orthogonal_to_test_space() {
    let g = warped_geometry(4);
    let f = |x: [f64; 2]| (3.0 * x[0]).sin() + x[1] * x[1];
    let bc = |x: [f64; 2]| x[0] * x[1];
    let u = solve_poisson(&g, &f, &bc, &CgSettings { tol: 1e-13, ..Default::default() }).unwrap();
    let a = assemble_stiffness(&g).unwrap();
    let b = assemble_load(&g, &f).unwrap();
    let au = a.apply(&u.coeffs);
    let (n1, n2) = g.dims();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 1..n2 - 1 {
        for i in 1..n1 - 1 {
            let k = i + n1 * j;
            assert!((au[k] - b[k]).abs() <= 1e-10 * scale, "row {k}: {}", au[k] - b[k]);
        }
    }
}

#[test]
fn field_derivatives_follow_the_chain_rule() {
    let g = warped_geometry(4);
    let u = FieldCoefficients::interpolate(&g, |x| (2.0 * x[0]).sin() * (1.5 * x[1]).cos() + x[0] * x[1]).unwrap();
    let h = 1e-6;
    for s in [[0.31, 0.47], [0.62, 0.18], [0.85, 0.71]] {
        let e = eval_field(&g, &u, s, 2).unwrap();
        let m = g.map_point(s, 1);
        for b in 0..2 {
            let mut sp = s;
            let mut sm = s;
            sp[b] += h;
            sm[b] -= h;
            let (ep, em) = (eval_field(&g, &u, sp, 1).unwrap(), eval_field(&g, &u, sm, 1).unwrap());
            let fd = (ep.value - em.value) / (2.0 * h);
            let chain = e.grad[0] * m.jac[0][b] + e.grad[1] * m.jac[1][b];
            assert!((fd - chain).abs() <= 1e-5, "du/ds{b}: {fd} vs {chain}");
            for a in 0..2 {
                let fd = (ep.grad[a] - em.grad[a]) / (2.0 * h);
                let chain = e.hess[a][0] * m.jac[0][b] + e.hess[a][1] * m.jac[1][b];
                assert!((fd - chain).abs() <= 1e-5 * chain.abs().max(1.0), "d grad_{a} / ds{b}: {fd} vs {chain}");
            }
        }
        assert!((e.hess[0][1] - e.hess[1][0]).abs() <= 1e-12);
    }
}

#[test]
fn load_vector_matches_refined_quadrature() {
    let f = |x: [f64; 2]| 2.0 * x[0].sin() * x[1].sin();
    for (p, m) in [(3, 8), (3, 16), (4, 8)] {
        let kv = KnotVector::open_uniform(p, m, 1).unwrap();
        let g = build_identity_geometry(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), kv.clone(), kv);
        let b = assemble_load(&g, &f).unwrap();
        // oracle: twice as many Gauss points per direction
        let rule = gauss_rule(2 * (p + 1)).unwrap();
        let (n1, _) = g.dims();
        let mut oracle = vec![0.0; g.num_dofs()];
        for e in g.elements() {
            for (v, wv) in rule.points.iter().zip(&rule.weights) {
                for (u, wu) in rule.points.iter().zip(&rule.weights) {
                    let m = g.map_point(e.lerp(*u, *v), 1);
                    let jxw = m.det() * e.area() * wu * wv;
                    let fx = f(m.point);
                    for (a, r) in m.basis.values.iter().enumerate() {
                        oracle[m.basis.global_index(a, n1)] += r * fx * jxw;
                    }
                }
            }
        }
        for (got, want) in b.iter().zip(&oracle) {
            assert!((got - want).abs() <= 1e-10, "p={p} m={m}: {got} vs {want}");
        }
    }
}

#[test]
fn boundary_trace_converges_at_fourth_order() {
    let bc = |x: [f64; 2]| (x[0] * 2.0).sin() * (x[1] + 0.3).cos() + x[0] * x[1] * x[1];
    let mut errs = Vec::new();
    for m in [8usize, 16, 32] {
        let kv = KnotVector::open_uniform(3, m, 1).unwrap();
        let g = build_identity_geometry(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), kv.clone(), kv);
        let mut u = FieldCoefficients { coeffs: vec![0.0; g.num_dofs()] };
        let vals = boundary_coefficients(&g, &bc).unwrap();
        let (n1, n2) = g.dims();
        for j in 0..n2 {
            for i in 0..n1 {
                if g.is_boundary(i, j) {
                    u.coeffs[i + n1 * j] = vals[i + n1 * j];
                }
            }
        }
        let mut worst = 0.0f64;
        for s in common::edge_params(401) {
            let x = g.map_point(s, 0).point;
            worst = worst.max((eval_field(&g, &u, s, 0).unwrap().value - bc(x)).abs());
        }
        errs.push((1.0 / m as f64, worst));
    }
    for w in errs.windows(2) {
        let order = observed_order(w[0].1, w[1].1, w[0].0, w[1].0).unwrap();
        assert!(order >= 3.8, "trace order {order} ({errs:?})");
    }
}

#[test]
fn cg_energy_error_decreases_monotonically() {
    let g = warped_geometry(6);
    let a = assemble_stiffness(&g).unwrap();
    let f = assemble_load(&g, &|x| x[0].sin() + 1.0).unwrap();
    let sys = apply_dirichlet(&a, &f, &g, &|_| 0.0).unwrap();
    let tight = cg_solve(&sys.matrix, &sys.rhs, &CgSettings { tol: 1e-14, ..Default::default() }).unwrap().x;
    let energy = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&tight).map(|(a, b)| a - b).collect();
        let ae = sys.matrix.apply(&e);
        e.iter().zip(&ae).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut history = vec![energy(&vec![0.0; tight.len()])];
    let out = cg_solve_observed(&sys.matrix, &sys.rhs, &CgSettings::default(), |_, x| history.push(energy(x))).unwrap();
    assert!(out.relative_residual <= 1e-10);
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-28, "energy error rose: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let g = warped_geometry(5);
    let f = |x: [f64; 2]| x[0] * x[1] + 1.0;
    let bc = |x: [f64; 2]| x[0] - x[1];
    let a = solve_poisson(&g, &f, &bc, &CgSettings::default()).unwrap();
    let b = solve_poisson(&g, &f, &bc, &CgSettings::default()).unwrap();
    assert_eq!(a.coeffs, b.coeffs);
}
