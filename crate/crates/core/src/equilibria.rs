//! Equilibrium search by multi-start damped Newton iteration, and local
//! classification from Jacobian eigenvalues.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denselin::{eigenvalues, solve_linear, EigenSet, LinalgError, Matrix};
use crate::sysdsl::{EvalError, VectorField};

/// Converged Newton roots must have `||f|| <` this.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Roots closer than this are merged.
pub const DEDUP_DISTANCE: f64 = 1e-6;
/// Real parts within `±MARGINAL_BAND` of zero count as neither stable nor unstable.
pub const MARGINAL_BAND: f64 = 1e-9;
/// [`classify_local`] accepts points with `||f|| <` this.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

const MAX_NEWTON_STEPS: usize = 100;
const MAX_HALVINGS: usize = 8;
const BOX_INFLATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("search box is invalid: {0}")]
    InvalidBox(String),
    #[error("point is not an equilibrium (||f|| = {0:e})")]
    NotAnEquilibrium(f64),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalClass {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    CenterMarginal,
    Degenerate,
}

impl LocalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LocalClass::StableNode => "stable-node",
            LocalClass::StableFocus => "stable-focus",
            LocalClass::UnstableNode => "unstable-node",
            LocalClass::UnstableFocus => "unstable-focus",
            LocalClass::Saddle => "saddle",
            LocalClass::CenterMarginal => "center-marginal",
            LocalClass::Degenerate => "degenerate",
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, LocalClass::StableNode | LocalClass::StableFocus)
    }

    /// Classification from eigenvalue signs with the `±1e-9` marginal band.
    pub fn from_eigen(eigen: &EigenSet) -> LocalClass {
        let tol = MARGINAL_BAND;
        let neg = eigen.values.iter().filter(|v| v.re < -tol).count();
        let pos = eigen.values.iter().filter(|v| v.re > tol).count();
        let complex = |pred: &dyn Fn(f64) -> bool| {
            eigen
                .values
                .iter()
                .any(|v| pred(v.re) && v.im.abs() > tol)
        };
        let n = eigen.values.len();
        if neg == n {
            if complex(&|re| re < -tol) {
                LocalClass::StableFocus
            } else {
                LocalClass::StableNode
            }
        } else if pos > 0 {
            if neg > 0 {
                LocalClass::Saddle
            } else if complex(&|re| re > tol) {
                LocalClass::UnstableFocus
            } else {
                LocalClass::UnstableNode
            }
        } else {
            // Some eigenvalues in the marginal band and none positive.
            let marginal_zero = eigen
                .values
                .iter()
                .any(|v| v.re.abs() <= tol && v.im.abs() <= tol);
            if marginal_zero {
                LocalClass::Degenerate
            } else {
                LocalClass::CenterMarginal
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    pub residual_norm: f64,
    pub jacobian: Matrix,
    pub eigen: EigenSet,
    pub local_class: LocalClass,
}

/// Axis-aligned box with a Newton start grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub grid_per_axis: usize,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, grid_per_axis: usize) -> Result<Self, EquilibriumError> {
        let b = SearchBox {
            lower,
            upper,
            grid_per_axis,
        };
        b.validate()?;
        Ok(b)
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64, grid_per_axis: usize) -> Self {
        SearchBox {
            lower: vec![lo; n],
            upper: vec![hi; n],
            grid_per_axis,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<(), EquilibriumError> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(EquilibriumError::InvalidBox(
                "lower and upper must be non-empty and of equal length".into(),
            ));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(EquilibriumError::InvalidBox(
                "lower must be strictly below upper on every axis".into(),
            ));
        }
        if self.grid_per_axis < 2 {
            return Err(EquilibriumError::InvalidBox("grid_per_axis must be at least 2".into()));
        }
        Ok(())
    }

    /// Grid nodes, first axis varying slowest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let m = self.grid_per_axis;
        let total = m.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; n];
                for axis in (0..n).rev() {
                    let k = idx % m;
                    idx /= m;
                    let frac = k as f64 / (m - 1) as f64;
                    p[axis] = self.lower[axis] + frac * (self.upper[axis] - self.lower[axis]);
                }
                p
            })
            .collect()
    }

    pub fn contains_inflated(&self, x: &[f64], inflation: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - inflation && *v <= u + inflation)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Damped Newton from one start. `None` when the start is abandoned.
fn newton(field: &VectorField, start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut x = start.to_vec();
    let mut fx = field.eval(&x).ok()?;
    let mut res = norm(&fx);
    let mut polish = 0;
    for _ in 0..MAX_NEWTON_STEPS {
        if res < RESIDUAL_TOL {
            // A couple of extra steps tighten the root; keep them only if they help.
            if polish == 2 || res == 0.0 {
                break;
            }
            polish += 1;
        }
        let j = field.jacobian(&x).ok()?;
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let step = solve_linear(&j, &rhs).ok()?;
        let mut scale = 1.0;
        let mut accepted = None;
        for attempt in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + scale * s).collect();
            if let Ok(ft) = field.eval(&trial) {
                let rt = norm(&ft);
                if rt.is_finite() && (rt < res || attempt == MAX_HALVINGS) {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            scale *= 0.5;
        }
        let (trial, ft, rt) = accepted?;
        if res < RESIDUAL_TOL && rt >= res {
            break;
        }
        x = trial;
        fx = ft;
        res = rt;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    (res < RESIDUAL_TOL).then_some((x, res))
}

/// All equilibria found by Newton iteration from every node of the search grid.
///
/// Roots outside the box (inflated by `1e-6`) are discarded, roots within
/// `1e-6` of each other are merged, and the result is sorted
/// lexicographically. An empty result is a valid outcome.
pub fn find_equilibria(field: &VectorField, search: &SearchBox) -> Result<Vec<Equilibrium>, EquilibriumError> {
    search.validate()?;
    if search.dim() != field.dim() {
        return Err(EquilibriumError::InvalidBox(format!(
            "box has {} axes, system has {} states",
            search.dim(),
            field.dim()
        )));
    }
    let roots: Vec<Option<(Vec<f64>, f64)>> = search
        .nodes()
        .par_iter()
        .map(|start| newton(field, start))
        .collect();

    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (x, _) in roots.into_iter().flatten() {
        if !search.contains_inflated(&x, BOX_INFLATION) {
            continue;
        }
        if kept.iter().any(|k| distance(k, &x) < DEDUP_DISTANCE) {
            continue;
        }
        kept.push(x);
    }
    kept.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    kept.iter().map(|x| classify_local(field, x)).collect()
}

/// Jacobian, eigenvalues and local class at an equilibrium.
pub fn classify_local(field: &VectorField, point: &[f64]) -> Result<Equilibrium, EquilibriumError> {
    let residual_norm = norm(&field.eval(point)?);
    if !(residual_norm < EQUILIBRIUM_TOL) {
        return Err(EquilibriumError::NotAnEquilibrium(residual_norm));
    }
    let jacobian = field.jacobian(point)?;
    let eigen = eigenvalues(&jacobian)?;
    let local_class = LocalClass::from_eigen(&eigen);
    Ok(Equilibrium {
        point: point.to_vec(),
        residual_norm,
        jacobian,
        eigen,
        local_class,
    })
}

/// A note describing how `found` differs from an `expected` equilibrium set,
/// or `None` when every expected point was found and nothing else was.
pub fn compare_expected(found: &[Equilibrium], expected: &[Vec<f64>], tol: f64) -> Option<String> {
    if expected.is_empty() {
        return None;
    }
    let fmt_point = |p: &[f64]| {
        let parts: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
        format!("({})", parts.join(", "))
    };
    let missing: Vec<String> = expected
        .iter()
        .filter(|e| !found.iter().any(|f| distance(&f.point, e) <= tol))
        .map(|e| fmt_point(e))
        .collect();
    let extra: Vec<String> = found
        .iter()
        .filter(|f| !expected.iter().any(|e| distance(&f.point, e) <= tol))
        .map(|f| fmt_point(&f.point))
        .collect();
    if missing.is_empty() && extra.is_empty() {
        return None;
    }
    let mut note = format!(
        "equilibrium set differs from the expected set: found {} equilibria, expected {}",
        found.len(),
        expected.len()
    );
    if !missing.is_empty() {
        note.push_str(&format!("; expected but not found: {}", missing.join(", ")));
    }
    if !extra.is_empty() {
        note.push_str(&format!("; found but not expected: {}", extra.join(", ")));
    }
    Some(note)
}
