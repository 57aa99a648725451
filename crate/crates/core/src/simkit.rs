//! Trajectory integration and classification of asymptotic fates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{distance, norm, Equilibrium};
use crate::sysdsl::{EvalError, VectorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid integration request: {0}")]
    Invalid(String),
    #[error("vector field cannot be evaluated at the initial condition: {0}")]
    InitialDomain(EvalError),
    #[error("stiffness failure at t = {t}: required step fell below {h_min:e}")]
    Stiffness { t: f64, h_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4Fixed,
    /// Runge-Kutta-Fehlberg 4(5) with adaptive steps.
    Rkf45Adaptive,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" | "rk4-fixed" => Ok(Method::Rk4Fixed),
            "rkf45" | "rkf45-adaptive" => Ok(Method::Rkf45Adaptive),
            other => Err(format!("unknown integration method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub method: Method,
    /// Step for [`Method::Rk4Fixed`].
    pub step: f64,
    /// Local error tolerance for [`Method::Rkf45Adaptive`], scaled by `1 + |x|`.
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Integration stops once `|x|` exceeds this.
    pub divergence_norm: f64,
    /// Keep every `record_stride`-th accepted state (the last state is always kept).
    pub record_stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            method: Method::Rkf45Adaptive,
            step: 1e-3,
            tol: 1e-9,
            h_min: 1e-8,
            h_max: 0.1,
            divergence_norm: 1e6,
            record_stride: 1,
        }
    }
}

impl IntegrateOptions {
    pub fn rk4(step: f64) -> Self {
        IntegrateOptions {
            method: Method::Rk4Fixed,
            step,
            ..Default::default()
        }
    }

    pub fn rkf45(tol: f64) -> Self {
        IntegrateOptions {
            method: Method::Rkf45Adaptive,
            tol,
            ..Default::default()
        }
    }
}

/// Why integration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    Diverged,
    NonFinite,
    DomainError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub method: Method,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }
}

struct Recorder {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    stride: usize,
    since: usize,
    pending: Option<(f64, Vec<f64>)>,
}

impl Recorder {
    fn new(t0: f64, x0: &[f64], stride: usize) -> Self {
        Recorder {
            times: vec![t0],
            states: vec![x0.to_vec()],
            stride: stride.max(1),
            since: 0,
            pending: None,
        }
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        self.since += 1;
        if self.since >= self.stride {
            self.since = 0;
            self.times.push(t);
            self.states.push(x.to_vec());
            self.pending = None;
        } else {
            self.pending = Some((t, x.to_vec()));
        }
    }

    fn finish(mut self) -> (Vec<f64>, Vec<Vec<f64>>) {
        if let Some((t, x)) = self.pending.take() {
            self.times.push(t);
            self.states.push(x);
        }
        (self.times, self.states)
    }
}

fn axpy(x: &[f64], terms: &[(f64, &[f64])], h: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    for (coef, k) in terms {
        if *coef != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * coef * v;
            }
        }
    }
    out
}

fn rk4_step(field: &VectorField, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
    let k1 = field.eval(x)?;
    let k2 = field.eval(&axpy(x, &[(0.5, &k1)], h))?;
    let k3 = field.eval(&axpy(x, &[(0.5, &k2)], h))?;
    let k4 = field.eval(&axpy(x, &[(1.0, &k3)], h))?;
    Ok(axpy(
        x,
        &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
        h,
    ))
}

/// New steps aim at this fraction of the permitted local error, which keeps
/// the accumulated error of long runs near `tol` rather than many times it.
const STEP_TARGET: f64 = 0.5;

// Fehlberg 4(5) tableau.
const A2: f64 = 1.0 / 4.0;
const A3: [f64; 2] = [3.0 / 32.0, 9.0 / 32.0];
const A4: [f64; 3] = [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0];
const A5: [f64; 4] = [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0];
const A6: [f64; 5] = [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

/// One Fehlberg step: fifth-order solution and the max-norm of the embedded error estimate.
fn rkf45_step(field: &VectorField, x: &[f64], h: f64) -> Result<(Vec<f64>, f64), EvalError> {
    let k1 = field.eval(x)?;
    let k2 = field.eval(&axpy(x, &[(A2, &k1)], h))?;
    let k3 = field.eval(&axpy(x, &[(A3[0], &k1), (A3[1], &k2)], h))?;
    let k4 = field.eval(&axpy(x, &[(A4[0], &k1), (A4[1], &k2), (A4[2], &k3)], h))?;
    let k5 = field.eval(&axpy(
        x,
        &[(A5[0], &k1), (A5[1], &k2), (A5[2], &k3), (A5[3], &k4)],
        h,
    ))?;
    let k6 = field.eval(&axpy(
        x,
        &[(A6[0], &k1), (A6[1], &k2), (A6[2], &k3), (A6[3], &k4), (A6[4], &k5)],
        h,
    ))?;
    let ks: [&[f64]; 6] = [&k1, &k2, &k3, &k4, &k5, &k6];
    let mut next = x.to_vec();
    let mut err: f64 = 0.0;
    for i in 0..x.len() {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for s in 0..6 {
            hi += B5[s] * ks[s][i];
            lo += B4[s] * ks[s][i];
        }
        next[i] += h * hi;
        err = err.max((h * (hi - lo)).abs());
    }
    Ok((next, err))
}

/// Integrates `dx/dt = f(x)` from `ic` over `[0, t_end]`.
///
/// Stops early when `|x|` exceeds `divergence_norm`, when a state turns
/// non-finite (that state is dropped) or when the field cannot be evaluated
/// along the way. Adaptive steps keep the local error below `tol * (1 + |x|)`.
pub fn integrate(
    field: &VectorField,
    ic: &[f64],
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, SimError> {
    if ic.len() != field.dim() {
        return Err(SimError::Invalid(format!(
            "initial condition has {} components, system has {} states",
            ic.len(),
            field.dim()
        )));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(SimError::Invalid(format!("t_end must be positive, got {t_end}")));
    }
    if !ic.iter().all(|v| v.is_finite()) {
        return Err(SimError::Invalid("initial condition is not finite".into()));
    }
    field.eval(ic).map_err(SimError::InitialDomain)?;

    let mut rec = Recorder::new(0.0, ic, opts.record_stride);
    let mut x = ic.to_vec();
    let mut t = 0.0;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut termination = Termination::Completed;

    let finish_step = |t: f64, next: Vec<f64>, x: &mut Vec<f64>, rec: &mut Recorder| {
        if !next.iter().all(|v| v.is_finite()) {
            return Some(Termination::NonFinite);
        }
        rec.push(t, &next);
        let diverged = norm(&next) > opts.divergence_norm;
        *x = next;
        diverged.then_some(Termination::Diverged)
    };

    match opts.method {
        Method::Rk4Fixed => {
            if !(opts.step > 0.0) {
                return Err(SimError::Invalid("step must be positive".into()));
            }
            let steps = (t_end / opts.step).round().max(1.0) as usize;
            let h = t_end / steps as f64;
            for i in 1..=steps {
                match rk4_step(field, &x, h) {
                    Ok(next) => {
                        accepted += 1;
                        t = if i == steps { t_end } else { i as f64 * h };
                        if let Some(stop) = finish_step(t, next, &mut x, &mut rec) {
                            termination = stop;
                            break;
                        }
                    }
                    Err(e) => {
                        termination = Termination::DomainError(e.to_string());
                        break;
                    }
                }
            }
        }
        Method::Rkf45Adaptive => {
            if !(opts.tol > 0.0) {
                return Err(SimError::Invalid("tol must be positive".into()));
            }
            let mut h = opts.h_max.min(t_end).min(0.01);
            while t < t_end {
                let last = t + h >= t_end;
                let step = if last { t_end - t } else { h };
                let scale = opts.tol * (1.0 + norm(&x));
                let outcome = rkf45_step(field, &x, step);
                let (next, err) = match outcome {
                    Ok(v) => v,
                    Err(e) => {
                        rejected += 1;
                        if h <= opts.h_min {
                            termination = Termination::DomainError(e.to_string());
                            break;
                        }
                        h = (h * 0.5).max(opts.h_min);
                        continue;
                    }
                };
                if err <= scale {
                    accepted += 1;
                    t = if last { t_end } else { t + step };
                    if let Some(stop) = finish_step(t, next, &mut x, &mut rec) {
                        termination = stop;
                        break;
                    }
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * (STEP_TARGET * scale / err).powf(0.2)).clamp(0.2, 5.0)
                    };
                    h = (h * factor).clamp(opts.h_min, opts.h_max);
                } else {
                    rejected += 1;
                    if h <= opts.h_min {
                        // A non-finite estimate means the state blew up inside the step.
                        if !err.is_finite() || !next.iter().all(|v| v.is_finite()) {
                            termination = Termination::NonFinite;
                            break;
                        }
                        return Err(SimError::Stiffness { t, h_min: opts.h_min });
                    }
                    let factor = if err.is_finite() {
                        (0.9 * (STEP_TARGET * scale / err).powf(0.2)).clamp(0.1, 0.5)
                    } else {
                        0.1
                    };
                    h = (h * factor).max(opts.h_min);
                }
            }
        }
    }
    let (times, states) = rec.finish();
    Ok(Trajectory {
        times,
        states,
        method: opts.method,
        accepted_steps: accepted,
        rejected_steps: rejected,
        termination,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FateThresholds {
    /// Converged requires the final state within this distance of an equilibrium.
    pub converge_radius: f64,
    /// Converged also requires `|f(final)|` below this.
    pub residual: f64,
    /// Diverged requires `|final| >` this.
    pub diverge_norm: f64,
}

impl Default for FateThresholds {
    fn default() -> Self {
        FateThresholds {
            converge_radius: 1e-4,
            residual: 1e-6,
            diverge_norm: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "fate")]
pub enum Fate {
    Converged { equilibrium: usize, distance: f64 },
    Diverged { time: f64, norm: f64 },
    Undetermined { state: Vec<f64>, note: Option<String> },
}

impl Fate {
    pub fn label(&self) -> &'static str {
        match self {
            Fate::Converged { .. } => "converged",
            Fate::Diverged { .. } => "diverged",
            Fate::Undetermined { .. } => "undetermined",
        }
    }
}

/// Classifies a trajectory by its final retained state.
pub fn classify_fate(
    field: &VectorField,
    traj: &Trajectory,
    equilibria: &[Equilibrium],
    thresholds: &FateThresholds,
) -> Fate {
    let x = traj.final_state();
    let n = norm(x);
    if n > thresholds.diverge_norm {
        return Fate::Diverged {
            time: traj.final_time(),
            norm: n,
        };
    }
    let nearest = equilibria
        .iter()
        .enumerate()
        .map(|(i, e)| (i, distance(&e.point, x)))
        .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        });
    let note = match &traj.termination {
        Termination::Completed | Termination::Diverged => None,
        Termination::NonFinite => Some("integration produced a non-finite state".to_string()),
        Termination::DomainError(e) => Some(format!("integration stopped: {e}")),
    };
    if let Some((i, d)) = nearest {
        if d < thresholds.converge_radius {
            match field.eval(x) {
                Ok(f) if norm(&f) < thresholds.residual => {
                    return Fate::Converged {
                        equilibrium: i,
                        distance: d,
                    }
                }
                Ok(_) => {}
                Err(e) => {
                    return Fate::Undetermined {
                        state: x.to_vec(),
                        note: Some(e.to_string()),
                    }
                }
            }
        }
    }
    Fate::Undetermined {
        state: x.to_vec(),
        note,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Tensor grid of initial conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<AxisRange>,
}

impl GridSpec {
    pub fn square(n: usize, lo: f64, hi: f64, count: usize) -> Self {
        GridSpec {
            axes: vec![AxisRange { lo, hi, count }; n],
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in row-major order: the first axis varies slowest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|mut idx| {
                let mut p = vec![0.0; self.axes.len()];
                for (axis, a) in self.axes.iter().enumerate().rev() {
                    let k = idx % a.count;
                    idx /= a.count;
                    p[axis] = if a.count == 1 {
                        a.lo
                    } else {
                        a.lo + (a.hi - a.lo) * k as f64 / (a.count - 1) as f64
                    };
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateMap {
    pub grid: GridSpec,
    pub fates: Vec<Fate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FateCounts {
    pub converged: usize,
    pub diverged: usize,
    pub undetermined: usize,
}

impl FateCounts {
    pub fn tally<'a>(fates: impl IntoIterator<Item = &'a Fate>) -> Self {
        let mut c = FateCounts::default();
        for f in fates {
            match f {
                Fate::Converged { .. } => c.converged += 1,
                Fate::Diverged { .. } => c.diverged += 1,
                Fate::Undetermined { .. } => c.undetermined += 1,
            }
        }
        c
    }
}

impl std::fmt::Display for FateCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} converged, {} diverged, {} undetermined",
            self.converged, self.diverged, self.undetermined
        )
    }
}

impl FateMap {
    pub fn counts(&self) -> FateCounts {
        FateCounts::tally(&self.fates)
    }
}

/// Integrates from `ic` and classifies, turning integration failures into
/// [`Fate::Undetermined`] with a note.
pub fn simulate_fate(
    field: &VectorField,
    ic: &[f64],
    t_end: f64,
    opts: &IntegrateOptions,
    equilibria: &[Equilibrium],
    thresholds: &FateThresholds,
) -> Fate {
    match integrate(field, ic, t_end, opts) {
        Ok(traj) => classify_fate(field, &traj, equilibria, thresholds),
        Err(e) => Fate::Undetermined {
            state: ic.to_vec(),
            note: Some(e.to_string()),
        },
    }
}

/// Integrates and classifies every grid node. Nodes are independent and run
/// in parallel; the result keeps row-major order.
pub fn basin_scan(
    field: &VectorField,
    grid: &GridSpec,
    t_end: f64,
    opts: &IntegrateOptions,
    equilibria: &[Equilibrium],
    thresholds: &FateThresholds,
) -> FateMap {
    let opts = IntegrateOptions {
        record_stride: usize::MAX,
        ..opts.clone()
    };
    let fates = grid
        .nodes()
        .par_iter()
        .map(|ic| simulate_fate(field, ic, t_end, &opts, equilibria, thresholds))
        .collect();
    FateMap {
        grid: grid.clone(),
        fates,
    }
}
