//! Model problems: exact solutions with their manufactured sources and
//! boundary data.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::geometry::Rect;

pub type ScalarFn = Rc<dyn Fn([f64; 2]) -> f64>;
pub type VectorFn = Rc<dyn Fn([f64; 2]) -> [f64; 2]>;

/// Exact solution with its gradient, for error measurement.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

/// `-Laplace(u) = source` on `domain`, `u = boundary` on its edges.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub domain: Rect,
    pub source: ScalarFn,
    pub boundary: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// `u = sin x sin y` on `[-1, 1]^2`, `f = 2 sin x sin y`.
pub fn case1_sine() -> Problem {
    let u: ScalarFn = Rc::new(|x: [f64; 2]| x[0].sin() * x[1].sin());
    Problem {
        name: "case1_sine".into(),
        domain: Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 },
        source: Rc::new(|x: [f64; 2]| 2.0 * x[0].sin() * x[1].sin()),
        boundary: u.clone(),
        exact: Some(ExactSolution {
            value: u,
            gradient: Rc::new(|x: [f64; 2]| [x[0].cos() * x[1].sin(), x[0].sin() * x[1].cos()]),
        }),
    }
}

/// Layer width of the circular tanh front.
pub const TANH_WIDTH: f64 = 0.01;
/// Radius of the circular front.
pub const TANH_RADIUS: f64 = 0.25;
pub const TANH_CENTER: [f64; 2] = [0.5, 0.5];

/// `sech^2(s)` without overflow for large `|s|`.
fn sech2(s: f64) -> f64 {
    let e = (-2.0 * s.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Radial profile `u(r) = tanh((R - r) / d)` and its first two derivatives.
fn tanh_profile(r: f64) -> (f64, f64, f64) {
    let d = TANH_WIDTH;
    let s = (TANH_RADIUS - r) / d;
    let t = s.tanh();
    let sh = sech2(s);
    (t, -sh / d, -2.0 * sh * t / (d * d))
}

/// `u = tanh((0.25 - r) / 0.01)`, `r = |x - (0.5, 0.5)|`, on the unit square.
pub fn case2_tanh() -> Problem {
    let radius = |x: [f64; 2]| (x[0] - TANH_CENTER[0]).hypot(x[1] - TANH_CENTER[1]);
    let u: ScalarFn = Rc::new(move |x: [f64; 2]| tanh_profile(radius(x)).0);
    Problem {
        name: "case2_tanh".into(),
        domain: Rect::unit(),
        source: Rc::new(move |x: [f64; 2]| {
            let r = radius(x).max(1e-12);
            let (_, d1, d2) = tanh_profile(r);
            -(d2 + d1 / r)
        }),
        boundary: u.clone(),
        exact: Some(ExactSolution {
            value: u,
            gradient: Rc::new(move |x: [f64; 2]| {
                let r = radius(x);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let d1 = tanh_profile(r).1;
                [d1 * (x[0] - TANH_CENTER[0]) / r, d1 * (x[1] - TANH_CENTER[1]) / r]
            }),
        }),
    }
}

fn compile(expr: &str, path: &str) -> Result<ScalarFn> {
    let e: meval::Expr = expr.parse().map_err(|err| Error::config(path, format!("{err}")))?;
    let f = e.bind2("x", "y").map_err(|err| Error::config(path, format!("{err}")))?;
    Ok(Rc::new(move |x: [f64; 2]| f(x[0], x[1])))
}

/// Problem from user expressions in `x` and `y`. The boundary data is the
/// exact solution; `gradient` enables the H1 seminorm.
pub fn manufactured(
    domain: Rect,
    exact: &str,
    source: &str,
    gradient: Option<[&str; 2]>,
) -> Result<Problem> {
    let u = compile(exact, "problem.exact")?;
    let f = compile(source, "problem.source")?;
    let grad: VectorFn = match gradient {
        Some([gx, gy]) => {
            let (gx, gy) = (compile(gx, "problem.gradient[0]")?, compile(gy, "problem.gradient[1]")?);
            Rc::new(move |x: [f64; 2]| [gx(x), gy(x)])
        }
        None => {
            // central differences when no gradient is supplied
            let u = u.clone();
            Rc::new(move |x: [f64; 2]| {
                let h = 1e-6;
                [
                    (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h),
                    (u([x[0], x[1] + h]) - u([x[0], x[1] - h])) / (2.0 * h),
                ]
            })
        }
    };
    Ok(Problem {
        name: "manufactured".into(),
        domain,
        source: f,
        boundary: u.clone(),
        exact: Some(ExactSolution { value: u, gradient: grad }),
    })
}
