//! Experiment drivers behind the `mmigm` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{solve_poisson, FieldCoefficients};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_identity_geometry, NurbsGeometry};
use crate::movemesh::{mmigm_solve, MonitorSpec};
use crate::postproc::{
    convergence_csv, convergence_orders, error_norms, export_trace, export_vtk, lattice_max_abs, ErrorReport, VtkField,
};
use crate::problems::{ExactSolution, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
}

impl From<&ErrorReport> for Norms {
    fn from(r: &ErrorReport) -> Self {
        Norms { l2: r.l2, h1: r.h1_semi, linf: r.linf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub elements: usize,
    pub dofs: usize,
    #[serde(flatten)]
    pub norms: Norms,
    #[serde(rename = "L2_order")]
    pub l2_order: Option<f64>,
    #[serde(rename = "H1_order")]
    pub h1_order: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub problem: String,
    pub degree: usize,
    pub dofs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Norms>,
    #[serde(rename = "final")]
    pub final_: Norms,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub wall_seconds: f64,
    #[serde(rename = "max_element_L2", default, skip_serializing_if = "Option::is_none")]
    pub max_element_l2: Option<Pair>,
    #[serde(rename = "max_abs_uh", default, skip_serializing_if = "Option::is_none")]
    pub max_abs_uh: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_jacobian: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelSummary>,
    #[serde(default)]
    pub deterministic: bool,
}

/// Files written by a run.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub summary: PathBuf,
    pub csv: Vec<PathBuf>,
    pub vtk: Vec<PathBuf>,
}

fn exact_of(problem: &Problem) -> Result<&ExactSolution> {
    problem.exact.as_ref().ok_or_else(|| Error::config("problem", "an exact solution is required"))
}

fn write_snapshot(
    cfg: &RunConfig,
    path: &Path,
    g: &NurbsGeometry,
    u: &FieldCoefficients,
    exact: &ExactSolution,
    monitor: Option<&MonitorSpec>,
) -> Result<()> {
    let value = exact.value.clone();
    let f = move |x: [f64; 2]| value(x);
    let mut fields = vec![("u_h", VtkField::Spline(u)), ("u_exact", VtkField::Function(&f))];
    if let Some(spec) = monitor {
        fields.push(("monitor", VtkField::Monitor { spec, solution: u }));
    }
    export_vtk(g, &fields, cfg.output.vtk_samples, path)
}

/// Runs one configured experiment, writing all artifacts into `out`.
pub fn run(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<(RunSummary, Artifacts)> {
    fs::create_dir_all(out)?;
    match cfg.mode {
        Mode::Convergence => run_convergence(cfg, out, quiet),
        Mode::Movemesh => run_movemesh(cfg, out, quiet),
    }
}

fn run_convergence(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<(RunSummary, Artifacts)> {
    let start = Instant::now();
    let problem = cfg.problem.build()?;
    let exact = exact_of(&problem)?;
    let lin = cfg.solver.settings();
    let mut art = Artifacts::default();
    let mut reports = Vec::new();
    let elements = cfg.level_elements();
    for &m in &elements {
        let kv = cfg.knot_vector(m)?;
        let g = build_identity_geometry(problem.domain, kv.clone(), kv);
        let t = Instant::now();
        let u = solve_poisson(&g, &*problem.source, &*problem.boundary, &lin)?;
        let solve_time = t.elapsed().as_secs_f64();
        let report = ErrorReport { cpu_seconds: solve_time, ..error_norms(&g, &u, exact)? };
        if !quiet {
            eprintln!("level {m:>4} x {m:<4} dofs {:>7}  L2 {:.3e}  H1 {:.3e}", report.dofs, report.l2, report.h1_semi);
        }
        if cfg.output.write_vtk {
            let path = out.join(format!("level_{m:04}.vtk"));
            write_snapshot(cfg, &path, &g, &u, exact, None)?;
            art.vtk.push(path);
        }
        reports.push(report);
    }
    let hs: Vec<(f64, &ErrorReport)> = elements.iter().map(|m| 1.0 / *m as f64).zip(&reports).collect();
    let all_orders = if reports.len() >= 2 { convergence_orders(&hs)? } else { vec![Default::default()] };
    let csv = out.join("convergence.csv");
    fs::write(&csv, convergence_csv(&reports, &all_orders))?;
    art.csv.push(csv);

    let levels = elements
        .iter()
        .zip(&reports)
        .zip(&all_orders)
        .map(|((m, r), o)| LevelSummary {
            elements: *m,
            dofs: r.dofs,
            norms: r.into(),
            l2_order: o.l2,
            h1_order: o.h1,
        })
        .collect();
    let last = reports.last().expect("at least one level");
    let summary = RunSummary {
        mode: Mode::Convergence,
        problem: problem.name.clone(),
        degree: cfg.degree,
        dofs: last.dofs,
        initial: None,
        final_: last.into(),
        iterations: 0,
        converged: None,
        wall_seconds: start.elapsed().as_secs_f64(),
        max_element_l2: None,
        max_abs_uh: None,
        min_jacobian: None,
        levels,
        deterministic: cfg.deterministic,
    };
    art.summary = write_summary(out, &summary)?;
    Ok((summary, art))
}

fn run_movemesh(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<(RunSummary, Artifacts)> {
    let start = Instant::now();
    let problem = cfg.problem.build()?;
    let exact = exact_of(&problem)?;
    let spec = cfg.monitor.spec();
    let kv = cfg.knot_vector(cfg.elements)?;
    let g0 = build_identity_geometry(problem.domain, kv.clone(), kv);
    let mut snapshots: Vec<(usize, NurbsGeometry, FieldCoefficients)> = Vec::new();
    let state = mmigm_solve(&problem, &g0, &spec, &cfg.movemesh_config(), |iter, g, u| {
        if cfg.output.write_vtk {
            snapshots.push((iter, g.clone(), u.clone()));
        }
    })?;
    if !quiet {
        for r in &state.trace {
            let l2 = r.errors.map_or(f64::NAN, |e| e.l2);
            eprintln!(
                "iter {:>3}  |xi*-xi0| {:.3e}  tau {:<9}  min J {:.3e}  L2 {:.3e}",
                r.iter, r.xi_inf_err, r.tau_used, r.min_jacobian, l2
            );
        }
    }
    let mut art = Artifacts::default();
    let trace = out.join("trace.csv");
    export_trace(&state, &trace)?;
    art.csv.push(trace);
    if cfg.output.write_vtk {
        let mut write = |name: &str, g: &NurbsGeometry, u: &FieldCoefficients| -> Result<()> {
            let path = out.join(name);
            write_snapshot(cfg, &path, g, u, exact, Some(&spec))?;
            art.vtk.push(path);
            Ok(())
        };
        write("initial.vtk", &state.initial_geometry, &state.initial_solution)?;
        if snapshots.len() >= 2 {
            let (_, g, u) = &snapshots[(snapshots.len() - 1) / 2];
            write("intermediate.vtk", g, u)?;
        }
        write("final.vtk", &state.geometry, &state.solution)?;
    }

    let initial = state.initial_errors.as_ref().expect("exact solution present");
    let fin = state.final_errors.as_ref().expect("exact solution present");
    let summary = RunSummary {
        mode: Mode::Movemesh,
        problem: problem.name.clone(),
        degree: cfg.degree,
        dofs: state.geometry.num_dofs(),
        initial: Some(initial.into()),
        final_: fin.into(),
        iterations: state.trace.len(),
        converged: Some(state.converged),
        wall_seconds: start.elapsed().as_secs_f64(),
        max_element_l2: Some(Pair { initial: initial.max_element_l2(), final_: fin.max_element_l2() }),
        max_abs_uh: Some(Pair {
            initial: lattice_max_abs(&state.initial_geometry, &state.initial_solution)?,
            final_: lattice_max_abs(&state.geometry, &state.solution)?,
        }),
        min_jacobian: Some(state.trace.iter().map(|r| r.min_jacobian).fold(state.initial_geometry.min_jacobian(), f64::min)),
        levels: Vec::new(),
        deterministic: cfg.deterministic,
    };
    art.summary = write_summary(out, &summary)?;
    Ok((summary, art))
}

fn write_summary(out: &Path, summary: &RunSummary) -> Result<PathBuf> {
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

/// Final lattice-L∞ errors of two runs and their ratio `a / b`.
pub fn compare_linf(a: &Path, b: &Path) -> Result<(f64, f64, f64)> {
    let (ea, eb) = (read_summary(a)?.final_.linf, read_summary(b)?.final_.linf);
    Ok((ea, eb, ea / eb))
}
