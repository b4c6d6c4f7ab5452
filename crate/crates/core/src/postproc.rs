//! Error norms, convergence orders and file export (legacy VTK, CSV).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembly::{eval_field, eval_field_at, for_each_quad_point, FieldCoefficients};
use crate::error::{Error, Result};
use crate::geometry::NurbsGeometry;
use crate::movemesh::{eval_monitor, MonitorSpec, MoveMeshState};
use crate::problems::ExactSolution;

/// Side length of the per-element sampling lattice used for L-infinity.
pub const LATTICE_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ElementError {
    pub element: (usize, usize),
    pub l2: f64,
}

/// Error norms of a discrete solution against an exact one.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ErrorReport {
    pub l2: f64,
    pub h1_semi: f64,
    /// Maximum over a 5x5 lattice per element (corners included).
    pub linf: f64,
    pub per_element_l2: Vec<ElementError>,
    pub dofs: usize,
    pub cpu_seconds: f64,
}

impl ErrorReport {
    pub fn max_element_l2(&self) -> f64 {
        self.per_element_l2.iter().fold(0.0, |m, e| m.max(e.l2))
    }
}

/// Uniform lattice parameters of an element, `LATTICE_SAMPLES` per direction.
fn lattice(n: usize) -> impl Iterator<Item = (f64, f64)> + Clone {
    let k = n - 1;
    (0..n).flat_map(move |b| (0..n).map(move |a| (a as f64 / k as f64, b as f64 / k as f64)))
}

/// L2 and H1-seminorm errors by Gauss quadrature with `p + 2` points per
/// direction, and lattice L-infinity.
pub fn error_norms(g: &NurbsGeometry, u: &FieldCoefficients, exact: &ExactSolution) -> Result<ErrorReport> {
    let (ex, ey) = g.element_counts();
    let mut l2e = vec![0.0; ex * ey];
    let mut h1 = 0.0;
    for_each_quad_point(g, 1, |e, pb| {
        let fe = eval_field_at(g, u, pb.map, 1)?;
        let x = pb.point.phys;
        let du = (exact.value)(x) - fe.value;
        let gx = (exact.gradient)(x);
        l2e[e.index.0 + ex * e.index.1] += du * du * pb.jxw;
        h1 += ((gx[0] - fe.grad[0]).powi(2) + (gx[1] - fe.grad[1]).powi(2)) * pb.jxw;
        Ok(())
    })?;
    let mut linf = 0.0f64;
    for e in g.elements() {
        for (a, b) in lattice(LATTICE_SAMPLES) {
            let s = e.lerp(a, b);
            let map = g.map_point(s, 0);
            let v = eval_field_at(g, u, &map, 0)?.value;
            linf = linf.max(((exact.value)(map.point) - v).abs());
        }
    }
    let per_element_l2: Vec<ElementError> = g
        .elements()
        .iter()
        .map(|e| ElementError { element: e.index, l2: l2e[e.index.0 + ex * e.index.1].sqrt() })
        .collect();
    let l2 = l2e.iter().sum::<f64>().sqrt();
    Ok(ErrorReport { l2, h1_semi: h1.sqrt(), linf, per_element_l2, dofs: g.num_dofs(), cpu_seconds: 0.0 })
}

/// Largest `|u_h|` over the element sampling lattice.
pub fn lattice_max_abs(g: &NurbsGeometry, u: &FieldCoefficients) -> Result<f64> {
    let mut m = 0.0f64;
    for e in g.elements() {
        for (a, b) in lattice(LATTICE_SAMPLES) {
            m = m.max(eval_field(g, u, e.lerp(a, b), 0)?.value.abs());
        }
    }
    Ok(m)
}

/// Observed order `log(e0 / e1) / log(h0 / h1)`; `None` if either error is 0.
pub fn observed_order(e0: f64, e1: f64, h0: f64, h1: f64) -> Option<f64> {
    if e0 > 0.0 && e1 > 0.0 && h0 > 0.0 && h1 > 0.0 && h0 != h1 {
        Some((e0 / e1).ln() / (h0 / h1).ln())
    } else {
        None
    }
}

/// Convergence orders between consecutive refinement levels.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct LevelOrders {
    pub l2: Option<f64>,
    pub h1: Option<f64>,
    pub linf: Option<f64>,
}

/// Orders per level for reports paired with their mesh sizes `h`. The first
/// level has no order.
pub fn convergence_orders(levels: &[(f64, &ErrorReport)]) -> Result<Vec<LevelOrders>> {
    if levels.len() < 2 {
        return Err(Error::invalid("need at least two refinement levels"));
    }
    let mut out = vec![LevelOrders::default()];
    for w in levels.windows(2) {
        let ((h0, a), (h1, b)) = (w[0], w[1]);
        out.push(LevelOrders {
            l2: observed_order(a.l2, b.l2, h0, h1),
            h1: observed_order(a.h1_semi, b.h1_semi, h0, h1),
            linf: observed_order(a.linf, b.linf, h0, h1),
        });
    }
    Ok(out)
}

/// A scalar point field for VTK export.
pub enum VtkField<'a> {
    Spline(&'a FieldCoefficients),
    Monitor { spec: &'a MonitorSpec, solution: &'a FieldCoefficients },
    Function(&'a dyn Fn([f64; 2]) -> f64),
}

/// Writes a legacy ASCII VTK unstructured grid sampling each element on a
/// `samples x samples` lattice of bilinear sub-cells (shared along element
/// edges).
pub fn export_vtk(
    g: &NurbsGeometry,
    fields: &[(&str, VtkField<'_>)],
    samples_per_element: usize,
    path: &Path,
) -> Result<()> {
    if samples_per_element < 2 {
        return Err(Error::invalid("need at least 2 samples per element"));
    }
    let axis = |k: usize| -> Vec<f64> {
        let bps = g.knot_vectors()[k].breakpoints();
        let mut v = vec![bps[0]];
        for w in bps.windows(2) {
            for s in 1..samples_per_element {
                let t = s as f64 / (samples_per_element - 1) as f64;
                v.push(if s + 1 == samples_per_element { w[1] } else { w[0] + t * (w[1] - w[0]) });
            }
        }
        v
    };
    let (ax, ay) = (axis(0), axis(1));
    let (nx, ny) = (ax.len(), ay.len());
    let params: Vec<[f64; 2]> = ay.iter().flat_map(|y| ax.iter().map(move |x| [*x, *y])).collect();

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nmmigm isogeometric mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", params.len()).unwrap();
    for s in &params {
        let x = g.map_point(*s, 0).point;
        writeln!(out, "{:.17e} {:.17e} 0", x[0], x[1]).unwrap();
    }
    let ncells = (nx - 1) * (ny - 1);
    writeln!(out, "CELLS {} {}", ncells, ncells * 5).unwrap();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let p = i + nx * j;
            writeln!(out, "4 {} {} {} {}", p, p + 1, p + 1 + nx, p + nx).unwrap();
        }
    }
    writeln!(out, "CELL_TYPES {ncells}").unwrap();
    for _ in 0..ncells {
        out.push_str("9\n");
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", params.len()).unwrap();
    }
    for (name, field) in fields {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid VTK field name {name:?}")));
        }
        writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for s in &params {
            let v = match field {
                VtkField::Spline(u) => eval_field(g, u, *s, 0)?.value,
                VtkField::Monitor { spec, solution } => eval_monitor(spec, g, solution, *s)?,
                VtkField::Function(f) => f(g.map_point(*s, 0).point),
            };
            writeln!(out, "{v:.17e}").unwrap();
        }
    }
    let mut f = BufWriter::new(fs::File::create(path)?);
    f.write_all(out.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Contents of a legacy VTK unstructured grid written by [`export_vtk`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_data: BTreeMap<String, Vec<f64>>,
}

/// Minimal reader for ASCII unstructured grids with scalar point data.
pub fn read_vtk(path: &Path) -> Result<VtkGrid> {
    let text = fs::read_to_string(path)?;
    let bad = |m: &str| Error::invalid(format!("malformed VTK file {}: {m}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty"))?;
    if !header.starts_with("# vtk DataFile Version") {
        return Err(bad("missing header"));
    }
    lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(bad("not ASCII"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut grid = VtkGrid::default();
    let num = |t: Option<&str>| -> Result<f64> {
        t.ok_or_else(|| bad("unexpected end"))?.parse::<f64>().map_err(|_| bad("bad number"))
    };
    let mut npoints = 0;
    while let Some(tok) = tokens.next() {
        match tok {
            "DATASET" => {
                if tokens.next() != Some("UNSTRUCTURED_GRID") {
                    return Err(bad("unsupported dataset"));
                }
            }
            "POINTS" => {
                npoints = num(tokens.next())? as usize;
                tokens.next();
                for _ in 0..npoints {
                    grid.points.push([num(tokens.next())?, num(tokens.next())?, num(tokens.next())?]);
                }
            }
            "CELLS" => {
                let n = num(tokens.next())? as usize;
                tokens.next();
                for _ in 0..n {
                    let k = num(tokens.next())? as usize;
                    let cell = (0..k).map(|_| num(tokens.next()).map(|v| v as usize)).collect::<Result<_>>()?;
                    grid.cells.push(cell);
                }
            }
            "CELL_TYPES" => {
                let n = num(tokens.next())? as usize;
                for _ in 0..n {
                    grid.cell_types.push(num(tokens.next())? as u8);
                }
            }
            "POINT_DATA" => {
                num(tokens.next())?;
            }
            "SCALARS" => {
                let name = tokens.next().ok_or_else(|| bad("unnamed scalars"))?.to_string();
                tokens.next();
                let mut nxt = tokens.next();
                if nxt == Some("1") {
                    nxt = tokens.next();
                }
                if nxt != Some("LOOKUP_TABLE") {
                    return Err(bad("expected LOOKUP_TABLE"));
                }
                tokens.next();
                let vals = (0..npoints).map(|_| num(tokens.next())).collect::<Result<_>>()?;
                grid.point_data.insert(name, vals);
            }
            other => return Err(bad(&format!("unexpected token {other}"))),
        }
    }
    Ok(grid)
}

/// Header of the iteration-trace CSV.
pub const TRACE_HEADER: &str = "iter,xi_inf_err,tau_used,min_jacobian,L2,H1,Linf,cpu_seconds";

fn fmt17(v: f64) -> String {
    if v.is_finite() { format!("{v:.16e}") } else { "NaN".to_string() }
}

/// Writes one CSV row per outer iteration.
pub fn export_trace(state: &MoveMeshState, path: &Path) -> Result<()> {
    if state.trace.is_empty() {
        return Err(Error::invalid("empty iteration trace"));
    }
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &state.trace {
        let (l2, h1, linf) = r.errors.map_or((f64::NAN, f64::NAN, f64::NAN), |e| (e.l2, e.h1, e.linf));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            fmt17(r.xi_inf_err),
            fmt17(r.tau_used),
            fmt17(r.min_jacobian),
            fmt17(l2),
            fmt17(h1),
            fmt17(linf),
            fmt17(r.cpu_seconds)
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Convergence table with columns `dofs,L2,L2_order,H1,H1_order`.
pub fn convergence_csv(reports: &[ErrorReport], orders: &[LevelOrders]) -> String {
    let mut out = String::from("dofs,L2,L2_order,H1,H1_order\n");
    for (r, o) in reports.iter().zip(orders) {
        let ord = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.dofs, fmt17(r.l2), ord(o.l2), fmt17(r.h1_semi), ord(o.h1)).unwrap();
    }
    out
}
