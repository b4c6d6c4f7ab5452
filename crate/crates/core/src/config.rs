//! Strict JSON run configuration.
//!
//! Unknown keys are rejected; every validation failure names the offending
//! field path (for example `monitor.alpha`). See `docs/config.md` for the
//! full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::linalg::{CgSettings, Preconditioner};
use crate::movemesh::{MonitorKind, MonitorSpec, MoveMeshConfig};
use crate::problems::{self, Problem};
use crate::splines::KnotVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Convergence,
    Movemesh,
}

/// Interior knot multiplicity: 1 (`k`, maximal smoothness) or `p` (`hp`, C0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    K,
    Hp,
}

impl Refinement {
    pub fn multiplicity(self, degree: usize) -> usize {
        match self {
            Refinement::K => 1,
            Refinement::Hp => degree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedConfig {
    /// `[x0, x1, y0, y1]`.
    pub domain: [f64; 4],
    /// Exact solution in `x`, `y`; also the Dirichlet data.
    pub exact: String,
    /// Right-hand side `f = -Laplace(exact)`.
    pub source: String,
    #[serde(default)]
    pub gradient: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Case1Sine,
    Case2Tanh,
    Manufactured(ManufacturedConfig),
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemConfig::Case1Sine => Ok(problems::case1_sine()),
            ProblemConfig::Case2Tanh => Ok(problems::case2_tanh()),
            ProblemConfig::Manufactured(m) => {
                let [x0, x1, y0, y1] = m.domain;
                let domain = Rect::new(x0, x1, y0, y1).map_err(|e| Error::config("problem.manufactured.domain", e.to_string()))?;
                let grad = m.gradient.as_ref().map(|[a, b]| [a.as_str(), b.as_str()]);
                problems::manufactured(domain, &m.exact, &m.source, grad)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub kind: MonitorKind,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub smoothing: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { kind: MonitorKind::Gradient, epsilon: 1.0, alpha: 0.1, beta: 0.0, smoothing: 0 }
    }
}

impl MonitorConfig {
    pub fn spec(&self) -> MonitorSpec {
        MonitorSpec { kind: self.kind, epsilon: self.epsilon, alpha: self.alpha, beta: self.beta, smoothing: self.smoothing }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveMeshParams {
    pub tau: f64,
    /// `None`: `1e-4` times the logical-domain diameter.
    pub tolerance: Option<f64>,
    pub max_outer: usize,
}

impl Default for MoveMeshParams {
    fn default() -> Self {
        Self { tau: 0.5, tolerance: None, max_outer: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub tol: f64,
    /// `None`: ten times the number of unknowns.
    pub maxit: Option<usize>,
    pub precond: Preconditioner,
}

impl Default for SolverParams {
    fn default() -> Self {
        let d = CgSettings::default();
        Self { tol: d.tol, maxit: d.max_iter, precond: d.precond }
    }
}

impl SolverParams {
    pub fn settings(&self) -> CgSettings {
        CgSettings { tol: self.tol, max_iter: self.maxit, precond: self.precond }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputParams {
    pub dir: PathBuf,
    /// Samples per element edge in VTK output.
    pub vtk_samples: usize,
    pub write_vtk: bool,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), vtk_samples: 5, write_vtk: true }
    }
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub problem: ProblemConfig,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_refinement")]
    pub refinement: Refinement,
    /// Convergence mode: number of levels, elements doubling per level.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Convergence mode: elements per direction on the coarsest level.
    #[serde(default = "default_base_elements")]
    pub base_elements: usize,
    /// Moving-mesh mode: elements per direction.
    #[serde(default = "default_elements")]
    pub elements: usize,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub movemesh: MoveMeshParams,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub output: OutputParams,
    /// Accepted for reproducibility bookkeeping; every run is sequential and
    /// bit-for-bit repeatable regardless.
    #[serde(default = "default_true")]
    pub deterministic: bool,
}

fn default_degree() -> usize {
    3
}
fn default_refinement() -> Refinement {
    Refinement::K
}
fn default_levels() -> usize {
    5
}
fn default_base_elements() -> usize {
    2
}
fn default_elements() -> usize {
    32
}
fn default_true() -> bool {
    true
}

/// Largest element count per direction a config may request.
pub const MAX_ELEMENTS: usize = 4096;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(Error::config(path, msg));
        match (&self.problem, self.mode) {
            (ProblemConfig::Case1Sine, Mode::Movemesh) => {
                return bad("mode", "case1_sine is a convergence study; use mode \"convergence\"".into())
            }
            (ProblemConfig::Case2Tanh, Mode::Convergence) => {
                return bad("mode", "case2_tanh is a moving-mesh study; use mode \"movemesh\"".into())
            }
            _ => {}
        }
        if !(1..=4).contains(&self.degree) {
            return bad("degree", format!("{} not in 1..=4", self.degree));
        }
        match self.mode {
            Mode::Convergence => {
                if !(1..=8).contains(&self.levels) {
                    return bad("levels", format!("{} not in 1..=8", self.levels));
                }
                let finest = self.base_elements.checked_shl(self.levels as u32 - 1).unwrap_or(usize::MAX);
                if self.base_elements == 0 || finest > MAX_ELEMENTS {
                    return bad(
                        "base_elements",
                        format!("finest level needs 1..={MAX_ELEMENTS} elements per direction"),
                    );
                }
            }
            Mode::Movemesh => {
                if !(1..=MAX_ELEMENTS).contains(&self.elements) {
                    return bad("elements", format!("{} not in 1..={MAX_ELEMENTS}", self.elements));
                }
                let m = &self.monitor;
                for (name, v) in [("epsilon", m.epsilon), ("alpha", m.alpha), ("beta", m.beta)] {
                    if !v.is_finite() || v < 0.0 {
                        return bad(&format!("monitor.{name}"), format!("{v} must be finite and >= 0"));
                    }
                }
                if let Err(e) = self.monitor.spec().validate() {
                    return bad("monitor", e.to_string());
                }
                let mm = &self.movemesh;
                if !(0.0..=1.0).contains(&mm.tau) || mm.tau == 0.0 {
                    return bad("movemesh.tau", format!("{} not in (0, 1]", mm.tau));
                }
                if let Some(t) = mm.tolerance {
                    if !(t > 0.0 && t.is_finite()) {
                        return bad("movemesh.tolerance", format!("{t} must be positive"));
                    }
                }
                if mm.max_outer == 0 {
                    return bad("movemesh.max_outer", "must be at least 1".into());
                }
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad("solver.tol", format!("{} not in (0, 1)", self.solver.tol));
        }
        if self.solver.maxit == Some(0) {
            return bad("solver.maxit", "must be at least 1".into());
        }
        if self.output.vtk_samples < 2 {
            return bad("output.vtk_samples", format!("{} < 2", self.output.vtk_samples));
        }
        if let ProblemConfig::Manufactured(_) = &self.problem {
            self.problem.build()?;
        }
        Ok(())
    }

    /// Knot vector for `elements` per direction at this config's degree and
    /// refinement family.
    pub fn knot_vector(&self, elements: usize) -> Result<KnotVector> {
        KnotVector::open_uniform(self.degree, elements, self.refinement.multiplicity(self.degree))
    }

    /// Element counts per direction for each convergence level.
    pub fn level_elements(&self) -> Vec<usize> {
        (0..self.levels).map(|l| self.base_elements << l).collect()
    }

    pub fn movemesh_config(&self) -> MoveMeshConfig {
        MoveMeshConfig {
            tau: self.movemesh.tau,
            tolerance: self.movemesh.tolerance,
            max_outer: self.movemesh.max_outer,
            lin: self.solver.settings(),
            ..MoveMeshConfig::default()
        }
    }
}
