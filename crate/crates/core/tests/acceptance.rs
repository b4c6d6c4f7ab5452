//! End-to-end acceptance checks (custom harness). Each criterion prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use common::{edge_params, fd_laplace};
use mmigm::assembly::{assemble_stiffness, apply_dirichlet, eval_field, gauss_rule, solve_poisson};
use mmigm::config::RunConfig;
use mmigm::geometry::{build_identity_geometry, NurbsGeometry, Rect};
use mmigm::linalg::CgSettings;
use mmigm::movemesh::{init_logical_mesh, make_boundary_map, mmigm_solve, MoveMeshState};
use mmigm::postproc::{error_norms, lattice_max_abs, observed_order, ErrorReport};
use mmigm::splines::{eval_nurbs_2d, KnotVector, TensorWeights};

const REFERENCE_K: [(usize, f64, f64); 5] =
    [(25, 6.38e-4, 4.89e-3), (49, 3.78e-5, 4.93e-4), (121, 2.41e-6, 6.29e-5), (361, 1.57e-7, 8.19e-6), (1156, 1.01e-8, 1.05e-6)];
const REFERENCE_HP: [(usize, f64, f64); 5] =
    [(49, 1.72e-4, 2.30e-3), (169, 1.15e-5, 3.06e-4), (625, 7.56e-7, 3.84e-5), (2401, 4.85e-8, 4.78e-6), (9409, 3.08e-9, 5.96e-7)];

struct Verdict {
    pass: bool,
    detail: String,
    seconds: f64,
}

fn config(name: &str) -> RunConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn check(pass: &mut bool, ok: bool, detail: &mut String, msg: String) {
    if !ok {
        *pass = false;
        detail.push_str("!! ");
    }
    detail.push_str(&msg);
    detail.push_str("; ");
}

/// Convergence study from a shipped config: (dofs, h, L2, H1) per level.
fn convergence(name: &str) -> Vec<(usize, f64, f64, f64)> {
    let cfg = config(name);
    let problem = cfg.problem.build().unwrap();
    let exact = problem.exact.clone().unwrap();
    cfg.level_elements()
        .into_iter()
        .map(|m| {
            let kv = cfg.knot_vector(m).unwrap();
            let g = build_identity_geometry(problem.domain, kv.clone(), kv);
            let u = solve_poisson(&g, &*problem.source, &*problem.boundary, &cfg.solver.settings()).unwrap();
            let r = error_norms(&g, &u, &exact).unwrap();
            (r.dofs, 1.0 / m as f64, r.l2, r.h1_semi)
        })
        .collect()
}

fn convergence_criterion(name: &str, table: &[(usize, f64, f64)], h1_order: f64) -> Verdict {
    let t = Instant::now();
    let levels = convergence(name);
    let mut pass = levels.len() == table.len();
    let mut detail = String::new();
    for ((dofs, _, l2, _), (tdofs, tl2, _)) in levels.iter().zip(table) {
        let ratio = l2 / tl2;
        check(&mut pass, (1.0 / 3.0..=3.0).contains(&ratio), &mut detail, format!("{dofs} dofs L2 {l2:.2e} (reference {tdofs}: {tl2:.2e})"));
    }
    for w in levels.windows(2).skip(levels.len().saturating_sub(3)) {
        let ((_, h0, a2, a1), (d, h1, b2, b1)) = (w[0], w[1]);
        let o2 = observed_order(a2, b2, h0, h1).unwrap_or(f64::NAN);
        let o1 = observed_order(a1, b1, h0, h1).unwrap_or(f64::NAN);
        check(&mut pass, o2 >= 3.8 && o1 >= h1_order, &mut detail, format!("orders into {d}: L2 {o2:.2}, H1 {o1:.2}"));
    }
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

fn criterion_1() -> Verdict {
    convergence_criterion("convergence_k.json", &REFERENCE_K, 2.8)
}

fn criterion_2() -> Verdict {
    convergence_criterion("convergence_hp.json", &REFERENCE_HP, 2.9)
}

fn criterion_3() -> Verdict {
    // 16 x 16 cubic elements each: C2 (361 dofs) against C0 (2401 dofs)
    let t = Instant::now();
    let at = |name: &str, m: usize| {
        let mut cfg = config(name);
        cfg.levels = 1;
        cfg.base_elements = m;
        let problem = cfg.problem.build().unwrap();
        let kv = cfg.knot_vector(m).unwrap();
        let g = build_identity_geometry(problem.domain, kv.clone(), kv);
        let u = solve_poisson(&g, &*problem.source, &*problem.boundary, &cfg.solver.settings()).unwrap();
        error_norms(&g, &u, problem.exact.as_ref().unwrap()).unwrap()
    };
    let (k, hp) = (at("convergence_k.json", 16), at("convergence_hp.json", 16));
    let ratio = k.dofs as f64 / hp.dofs as f64;
    let mut pass = true;
    let mut detail = String::new();
    check(&mut pass, ratio <= 0.25, &mut detail, format!("dofs {} vs {} (ratio {ratio:.3})", k.dofs, hp.dofs));
    check(
        &mut pass,
        k.l2 <= 3.0 * 1.57e-7 && hp.l2 <= 3.0 * 4.85e-8,
        &mut detail,
        format!("L2 {:.2e} vs {:.2e}", k.l2, hp.l2),
    );
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

struct MovedRun {
    state: MoveMeshState,
    boundary_moved: bool,
    min_j_seen: f64,
}

fn moving_mesh(name: &str, edit: impl FnOnce(&mut RunConfig)) -> MovedRun {
    let mut cfg = config(name);
    edit(&mut cfg);
    let problem = cfg.problem.build().unwrap();
    let kv = cfg.knot_vector(cfg.elements).unwrap();
    let g0 = build_identity_geometry(problem.domain, kv.clone(), kv);
    let edges = edge_params(101);
    let reference: Vec<[f64; 2]> = edges.iter().map(|s| g0.map_point(*s, 0).point).collect();
    let mut boundary_moved = false;
    let mut min_j_seen = g0.min_jacobian();
    let state = mmigm_solve(&problem, &g0, &cfg.monitor.spec(), &cfg.movemesh_config(), |_, g, _| {
        min_j_seen = min_j_seen.min(g.min_jacobian());
        boundary_moved |= edges.iter().zip(&reference).any(|(s, x)| g.map_point(*s, 0).point != *x);
    })
    .unwrap_or_else(|e| panic!("{name}: {e}"));
    MovedRun { state, boundary_moved, min_j_seen }
}

fn errors(run: &MovedRun) -> (&ErrorReport, &ErrorReport) {
    (run.state.initial_errors.as_ref().unwrap(), run.state.final_errors.as_ref().unwrap())
}

fn criterion_4() -> Verdict {
    let t = Instant::now();
    let run = moving_mesh("case2_identity.json", |_| {});
    // ten times the linear solver tolerance
    let tol = 10.0 * 1e-10;
    let err = run.state.trace.iter().map(|r| r.xi_inf_err).fold(0.0, f64::max);
    let mut pass = true;
    let mut detail = String::new();
    check(&mut pass, err <= tol, &mut detail, format!("|xi* - xi0| {err:.2e} (limit {tol:.0e})"));
    check(&mut pass, run.state.mesh_updates() == 0, &mut detail, format!("{} mesh updates", run.state.mesh_updates()));
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

fn criterion_5() -> Verdict {
    let t = Instant::now();
    let run = moving_mesh("case2_gradient.json", |_| {});
    let (i, f) = errors(&run);
    let mut pass = true;
    let mut detail = String::new();
    check(&mut pass, f.l2 <= 0.5 * i.l2, &mut detail, format!("L2 {:.3e} -> {:.3e}", i.l2, f.l2));
    check(&mut pass, f.max_element_l2() < 0.01, &mut detail, format!("max element L2 {:.3e} -> {:.3e}", i.max_element_l2(), f.max_element_l2()));
    check(&mut pass, run.min_j_seen > 0.0, &mut detail, format!("min J {:.3e}", run.min_j_seen));
    check(&mut pass, !run.boundary_moved, &mut detail, "boundary fixed".into());
    detail.push_str(&format!("{} iterations", run.state.trace.len()));
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

/// Mean distance to the front circle of the 10% of mesh nodes nearest it.
fn concentration(g: &NurbsGeometry) -> f64 {
    let mut d: Vec<f64> = g.mesh_nodes().nodes.iter().map(|x| ((x[0] - 0.5).hypot(x[1] - 0.5) - 0.25).abs()).collect();
    d.sort_by(f64::total_cmp);
    let n = (d.len() / 10).max(1);
    d[..n].iter().sum::<f64>() / n as f64
}

fn criterion_6() -> Verdict {
    let t = Instant::now();
    let run = moving_mesh("case3_hessian.json", |_| {});
    let (i, f) = errors(&run);
    let (c0, c1) = (concentration(&run.state.initial_geometry), concentration(&run.state.geometry));
    let mut pass = true;
    let mut detail = String::new();
    check(&mut pass, f.l2 < i.l2, &mut detail, format!("L2 {:.3e} -> {:.3e}", i.l2, f.l2));
    check(&mut pass, c1 < c0, &mut detail, format!("mean distance to front {c0:.3e} -> {c1:.3e}"));
    check(&mut pass, run.min_j_seen > 0.0, &mut detail, format!("min J {:.3e}", run.min_j_seen));
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

fn criterion_7() -> Verdict {
    let t = Instant::now();
    let run = moving_mesh("case4_k_p2.json", |_| {});
    let (i, f) = errors(&run);
    let s = &run.state;
    let over0 = lattice_max_abs(&s.initial_geometry, &s.initial_solution).unwrap() - 1.0;
    let over1 = lattice_max_abs(&s.geometry, &s.solution).unwrap() - 1.0;
    let mut pass = s.geometry.num_dofs() == 1156;
    let mut detail = format!("{} dofs; ", s.geometry.num_dofs());
    check(&mut pass, f.linf < i.linf, &mut detail, format!("Linf {:.3e} -> {:.3e}", i.linf, f.linf));
    check(&mut pass, over1 <= 0.5 * over0, &mut detail, format!("overshoot {over0:.3e} -> {over1:.3e}"));
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

fn criterion_8() -> Verdict {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = String::new();

    // partition of unity, Marsden reproduction, derivatives
    let (mut pu, mut marsden, mut fd) = (0.0f64, 0.0f64, 0.0f64);
    for p in 1..=4 {
        for r in 1..=p {
            let kv = KnotVector::open_uniform(p, 7, r).unwrap();
            let g = kv.greville();
            for k in 0..=97 {
                let x = k as f64 / 97.0;
                let b = kv.eval_basis(x, 1).unwrap();
                pu = pu.max((b.values().iter().sum::<f64>() - 1.0).abs());
                let m: f64 = b.values().iter().enumerate().map(|(a, v)| v * g[b.first() + a]).sum();
                marsden = marsden.max((m - x).abs());
                let (h, y) = (1e-6, x * 0.9 + 0.05);
                if kv.knots().iter().all(|k| (k - y).abs() > 1e-3) {
                    let (bm, bp, b) = (kv.eval_basis(y - h, 0).unwrap(), kv.eval_basis(y + h, 0).unwrap(), kv.eval_basis(y, 1).unwrap());
                    for a in 0..=p {
                        let d = (bp.values()[a] - bm.values()[a]) / (2.0 * h);
                        fd = fd.max((d - b.ders[1][a]).abs() / b.ders[1][a].abs().max(1.0));
                    }
                }
            }
        }
    }
    check(&mut pass, pu <= 1e-13, &mut detail, format!("partition of unity {pu:.1e}"));
    check(&mut pass, marsden <= 1e-12, &mut detail, format!("Marsden {marsden:.1e}"));
    check(&mut pass, fd <= 1e-5, &mut detail, format!("derivative vs FD {fd:.1e}"));

    // rational partition of unity with non-uniform weights
    let kv = KnotVector::open_uniform(3, 5, 1).unwrap();
    let n = kv.num_basis();
    let w = TensorWeights::new(n, n, (0..n * n).map(|k| 0.6 + 0.05 * (k % 9) as f64).collect()).unwrap();
    let rpu = (0..50)
        .map(|k| eval_nurbs_2d(&kv, &kv, &w, [k as f64 / 49.0, (k as f64 * 0.61).fract()], 0).values.iter().sum::<f64>())
        .fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
    check(&mut pass, rpu <= 1e-13, &mut detail, format!("rational partition {rpu:.1e}"));

    // quadrature exactness
    let mut quad = 0.0f64;
    for q in 1..=10 {
        let rule = gauss_rule(q).unwrap();
        for d in 0..2 * q {
            quad = quad.max((rule.integrate(|x| x.powi(d as i32)) - 1.0 / (d as f64 + 1.0)).abs());
        }
    }
    check(&mut pass, quad <= 1e-13, &mut detail, format!("Gauss exactness {quad:.1e}"));

    // stiffness symmetry and positive definiteness after elimination
    let g = common::warped_geometry(5);
    let a = assemble_stiffness(&g).unwrap();
    let sym = a.asymmetry() / a.max_abs();
    let sys = apply_dirichlet(&a, &vec![0.0; a.dim()], &g, &|_| 0.0).unwrap();
    let spd = (0..20).all(|s| {
        let x: Vec<f64> = (0..sys.matrix.dim()).map(|k| ((k * 31 + s * 17) as f64 * 0.377).sin()).collect();
        let ax = sys.matrix.apply(&x);
        x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() > 0.0
    });
    check(&mut pass, sym <= 1e-13 && spd, &mut detail, format!("stiffness asymmetry {sym:.1e}, SPD {spd}"));

    // refit idempotence
    let again = g.refit_from_node_targets(&g.mesh_nodes().nodes).unwrap();
    let refit = g
        .control_points()
        .iter()
        .zip(again.control_points())
        .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
        .fold(0.0f64, f64::max);
    check(&mut pass, refit <= 1e-12, &mut detail, format!("refit idempotence {refit:.1e}"));

    // boundary invariance across iterations (bit-exact)
    let run = moving_mesh("case2_gradient.json", |c| {
        c.elements = 12;
        c.movemesh.max_outer = 4;
    });
    check(
        &mut pass,
        !run.boundary_moved && run.state.mesh_updates() > 0,
        &mut detail,
        format!("boundary bit-exact over {} updates", run.state.mesh_updates()),
    );
    Verdict { pass, detail, seconds: t.elapsed().as_secs_f64() }
}

fn criterion_9() -> Verdict {
    let t = Instant::now();
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let bm = make_boundary_map(rect, Rect::unit());
    let kv = KnotVector::open_uniform(3, 16, 1).unwrap();
    let g = build_identity_geometry(rect, kv.clone(), kv);
    let lm = init_logical_mesh(&g, &bm, &CgSettings { tol: 1e-13, ..Default::default() }).unwrap();
    let n = 257;
    let mut worst = 0.0f64;
    for k in 0..2 {
        let fd = fd_laplace(rect, n, bm.component(k));
        for j in (0..n).step_by(16) {
            for i in (0..n).step_by(16) {
                let s = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let v = eval_field(&g, &lm.xi0[k], s, 0).unwrap().value;
                worst = worst.max((v - fd[i + n * j]).abs());
            }
        }
    }
    Verdict { pass: worst <= 1e-3, detail: format!("max difference at shared nodes {worst:.2e}; "), seconds: t.elapsed().as_secs_f64() }
}

fn main() {
    let criteria: [(&str, u64, fn() -> Verdict); 9] = [
        ("k-refinement convergence", 60, criterion_1),
        ("hp-refinement convergence", 180, criterion_2),
        ("dof economy of k-refinement", 60, criterion_3),
        ("identity-monitor fixed point", 10, criterion_4),
        ("case 2 gradient monitor", 300, criterion_5),
        ("case 3 hessian monitor", 300, criterion_6),
        ("case 4 Gibbs suppression", 180, criterion_7),
        ("property suites", 30, criterion_8),
        ("finite-difference oracle", 60, criterion_9),
    ];
    let verdicts: Vec<Verdict> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|(_, _, f)| scope.spawn(*f)).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|e| Verdict {
                    pass: false,
                    detail: format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).unwrap_or("?")),
                    seconds: f64::NAN,
                })
            })
            .collect()
    });
    let mut failed = Vec::new();
    for (k, ((name, budget, _), v)) in criteria.iter().zip(&verdicts).enumerate() {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status}  {name} [{:.1}s, budget {budget}s]  {}", k + 1, v.seconds, v.detail.trim_end_matches("; "));
        if !v.pass {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
