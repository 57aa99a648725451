//! The two-part global stability criterion and first-order Taylor remainder
//! bounds.
//!
//! Condition 1 asks every equilibrium to be Hurwitz (all Jacobian eigenvalues
//! with negative real part). Condition 2 asks the quadratic form
//! `(X - Xe)^T lambda_max(H(X)) (X - Xe) = lambda_max(H(X)) * |X - Xe|^2` to
//! stay below `epsilon` as `X` goes to infinity. The limit is probed by a
//! radial scan: for each direction `d` and radius `r` of a geometric
//! schedule, `s(r, d) = lambda_max(H(Xe + r d)) * r^2`, and the condition is
//! taken to hold when the maximum of `s` over directions is at most `epsilon`
//! at each of the three largest radii.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denselin::{eigenvalues, sym_eigmax, sym_spectral_norm, LinalgError};
use crate::equilibria::{
    compare_expected, distance, find_equilibria, norm, Equilibrium, EquilibriumError, SearchBox,
    EQUILIBRIUM_TOL, MARGINAL_BAND,
};
use crate::sysdsl::{EvalError, HessianMode, VectorField};

/// `epsilon = 0` is tested as `s <= ASYMPTOTIC_TOL`.
pub const ASYMPTOTIC_TOL: f64 = 1e-12;
/// The simplified criterion holds when the sampled supremum is at most this.
pub const SIMPLIFIED_TOL: f64 = 1e-9;
/// Slack on the remainder inequality, covering underestimation of the sampled `M`.
pub const REMAINDER_SLACK: f64 = 1.05;
/// Samples along the segment `[Xe, X]` used to estimate `M`.
pub const SEGMENT_SAMPLES: usize = 101;
/// Number of largest radii at which condition 2 must hold.
pub const TAIL_RADII: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("invalid criterion configuration: {0}")]
    InvalidConfig(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("base point is not an equilibrium (||f|| = {0:e})")]
    NotAnEquilibrium(f64),
    #[error(transparent)]
    Equilibria(#[from] EquilibriumError),
}

/// How the limit `X -> +infinity` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSet {
    /// Unit vectors with every component positive (all coordinates go to +infinity).
    PositiveOrthant,
    /// Unit vectors over the whole sphere (the norm goes to infinity).
    Sphere,
}

impl DirectionSet {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionSet::PositiveOrthant => "positive-orthant",
            DirectionSet::Sphere => "sphere",
        }
    }
}

impl std::str::FromStr for DirectionSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive-orthant" => Ok(DirectionSet::PositiveOrthant),
            "sphere" => Ok(DirectionSet::Sphere),
            other => Err(format!("unknown direction set `{other}`")),
        }
    }
}

/// `r0 * growth^k` for every `k >= 0` with the result at most `r_max`.
pub fn geometric_radii(r0: f64, growth: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r0;
    while r <= r_max * (1.0 + 1e-12) {
        out.push(r);
        r *= growth;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub epsilon: f64,
    pub hessian_mode: HessianMode,
    pub direction_set: DirectionSet,
    pub direction_count: usize,
    pub radii: Vec<f64>,
    pub rng_seed: u64,
    /// Region for the simplified criterion; the search box when `None`.
    pub sup_region: Option<SearchBox>,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        CriterionConfig {
            epsilon: 1e-6,
            hessian_mode: HessianMode::Tensor,
            direction_set: DirectionSet::PositiveOrthant,
            direction_count: 16,
            radii: geometric_radii(1.0, 2.0, 2f64.powi(20)),
            rng_seed: 0,
            sup_region: None,
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self, dim: usize) -> Result<(), CriteriaError> {
        let bad = |m: String| Err(CriteriaError::InvalidConfig(m));
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if self.direction_count < 8 {
            return bad(format!("direction_count must be >= 8, got {}", self.direction_count));
        }
        if self.direction_set == DirectionSet::Sphere && self.direction_count < 2 * dim {
            return bad(format!(
                "sphere directions need direction_count >= {} to include every +/- axis",
                2 * dim
            ));
        }
        if self.radii.len() < TAIL_RADII {
            return bad(format!("radius schedule needs at least {TAIL_RADII} radii"));
        }
        if self.radii[0] <= 0.0 || self.radii.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("radii must be positive and strictly increasing".into());
        }
        if let Some(region) = &self.sup_region {
            region.validate()?;
            if region.dim() != dim {
                return bad("sup_region dimension does not match the system".into());
            }
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        if self.epsilon == 0.0 {
            ASYMPTOTIC_TOL
        } else {
            self.epsilon
        }
    }

    /// Deterministic probe directions for this configuration.
    pub fn directions(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let mut out = Vec::with_capacity(self.direction_count);
        match self.direction_set {
            DirectionSet::PositiveOrthant => {
                out.push(vec![1.0 / (dim as f64).sqrt(); dim]);
                while out.len() < self.direction_count {
                    let v: Vec<f64> = (0..dim)
                        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
                        .collect();
                    if let Some(u) = unit(v) {
                        if u.iter().all(|c| *c > 0.0) {
                            out.push(u);
                        }
                    }
                }
            }
            DirectionSet::Sphere => {
                for axis in 0..dim {
                    for sign in [1.0, -1.0] {
                        let mut e = vec![0.0; dim];
                        e[axis] = sign;
                        out.push(e);
                    }
                }
                while out.len() < self.direction_count {
                    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    if let Some(u) = unit(v) {
                        out.push(u);
                    }
                }
            }
        }
        out
    }
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    (n > 1e-12).then(|| v.into_iter().map(|c| c / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition1Result {
    pub holds: bool,
    /// Largest eigenvalue real part at each equilibrium.
    pub spectral_abscissa: Vec<f64>,
}

/// Condition 1: every eigenvalue at every equilibrium has real part `< -1e-9`.
///
/// `None` for an empty equilibrium list, which makes the criterion inconclusive.
pub fn condition_one(equilibria: &[Equilibrium]) -> Option<Condition1Result> {
    if equilibria.is_empty() {
        return None;
    }
    let spectral_abscissa: Vec<f64> = equilibria.iter().map(|e| e.eigen.spectral_abscissa()).collect();
    Some(Condition1Result {
        holds: spectral_abscissa.iter().all(|a| *a < -MARGINAL_BAND),
        spectral_abscissa,
    })
}

/// Largest eigenvalue of the Hessian field at `x`.
///
/// Tensor mode takes the maximum over components of the largest symmetric
/// eigenvalue; paper-row mode takes the largest real part of the eigenvalues
/// of the single (generally non-symmetric) matrix.
pub fn lambda_max_field(field: &VectorField, mode: HessianMode, x: &[f64]) -> Result<f64, CriteriaError> {
    let hs = field.hessians(x, mode)?;
    match mode {
        HessianMode::Tensor => {
            let mut best = f64::NEG_INFINITY;
            for h in &hs {
                best = best.max(sym_eigmax(h)?);
            }
            Ok(best)
        }
        HessianMode::PaperRow => Ok(eigenvalues(&hs[0])?.spectral_abscissa()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition2Result {
    pub satisfied: bool,
    pub epsilon: f64,
    pub base: Vec<f64>,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    /// `s_values[i][j] = s(radii[i], directions[j])`; `None` marks a failed evaluation.
    pub s_values: Vec<Vec<Option<f64>>>,
    /// Maximum of `s` over directions at each radius (ignoring failed samples).
    pub s_max_per_radius: Vec<Option<f64>>,
    /// Direction attaining the largest `s` at the largest radius.
    pub worst_direction: Vec<f64>,
    pub failed_samples: usize,
}

/// Condition 2 by radial scan around `base`.
pub fn condition_two(
    field: &VectorField,
    base: &[f64],
    cfg: &CriterionConfig,
) -> Result<Condition2Result, CriteriaError> {
    let n = field.dim();
    cfg.validate(n)?;
    let directions = cfg.directions(n);
    let nd = directions.len();
    let samples: Vec<Option<f64>> = (0..cfg.radii.len() * nd)
        .into_par_iter()
        .map(|k| {
            let r = cfg.radii[k / nd];
            let d = &directions[k % nd];
            let x: Vec<f64> = base.iter().zip(d).map(|(b, c)| b + r * c).collect();
            lambda_max_field(field, cfg.hessian_mode, &x)
                .ok()
                .map(|l| l * r * r)
                .filter(|s| !s.is_nan())
        })
        .collect();
    let s_values: Vec<Vec<Option<f64>>> = samples.chunks(nd).map(<[_]>::to_vec).collect();
    let failed_samples = samples.iter().filter(|s| s.is_none()).count();
    let s_max_per_radius: Vec<Option<f64>> = s_values
        .iter()
        .map(|row| row.iter().flatten().copied().reduce(f64::max))
        .collect();

    let last = s_values.last().expect("validated non-empty radii");
    let mut worst = 0;
    for (j, s) in last.iter().enumerate() {
        if let (Some(s), Some(w)) = (s, last[worst]) {
            if *s > w {
                worst = j;
            }
        } else if last[worst].is_none() && s.is_some() {
            worst = j;
        }
    }

    let threshold = cfg.threshold();
    let tail_ok = s_max_per_radius[s_max_per_radius.len() - TAIL_RADII..]
        .iter()
        .all(|m| matches!(m, Some(v) if *v <= threshold));
    Ok(Condition2Result {
        satisfied: failed_samples == 0 && tail_ok,
        epsilon: cfg.epsilon,
        base: base.to_vec(),
        radii: cfg.radii.clone(),
        worst_direction: directions[worst].clone(),
        directions,
        s_values,
        s_max_per_radius,
        failed_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedResult {
    /// Supremum of `lambda_max(H)` over the sampled grid.
    pub sup: f64,
    /// Grid point attaining the supremum.
    pub argmax: Vec<f64>,
    pub region: SearchBox,
    pub points_per_axis: usize,
    pub failed_samples: usize,
    /// `sup <= 1e-9` with no failed samples.
    pub holds: bool,
}

/// Simplified criterion: `max(eig(H(X))) = 0` over a dense grid of `region`.
///
/// The grid has at least `direction_count^2` points in total.
pub fn simplified_criterion(
    field: &VectorField,
    region: &SearchBox,
    cfg: &CriterionConfig,
) -> Result<SimplifiedResult, CriteriaError> {
    let n = field.dim();
    region.validate()?;
    if region.dim() != n {
        return Err(CriteriaError::InvalidConfig(
            "sup_region dimension does not match the system".into(),
        ));
    }
    let target = cfg.direction_count.pow(2);
    let mut m = 2usize;
    while m.checked_pow(n as u32).is_some_and(|total| total < target) {
        m += 1;
    }
    let m = m.max(region.grid_per_axis);
    let grid = SearchBox {
        grid_per_axis: m,
        ..region.clone()
    };
    let nodes = grid.nodes();
    let values: Vec<Option<f64>> = nodes
        .par_iter()
        .map(|x| lambda_max_field(field, cfg.hessian_mode, x).ok())
        .collect();
    let failed_samples = values.iter().filter(|v| v.is_none()).count();
    let (mut sup, mut arg) = (f64::NEG_INFINITY, 0);
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if *v > sup {
                sup = *v;
                arg = i;
            }
        }
    }
    Ok(SimplifiedResult {
        sup,
        argmax: nodes[arg].clone(),
        region: region.clone(),
        points_per_axis: m,
        failed_samples,
        holds: failed_samples == 0 && sup <= SIMPLIFIED_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderBound {
    /// Per component: sampled supremum of `||H_k||_2` on the segment.
    pub m: Vec<f64>,
    /// Per component: `M_k / 2 * |X - Xe|^2`.
    pub bound: Vec<f64>,
}

/// Lagrange bound on the first-order Taylor remainder along `[xe, x]`.
pub fn remainder_bound(field: &VectorField, x: &[f64], xe: &[f64]) -> Result<RemainderBound, CriteriaError> {
    let n = field.dim();
    let dist2 = distance(x, xe).powi(2);
    let mut m = vec![0.0f64; n];
    for i in 0..SEGMENT_SAMPLES {
        let t = i as f64 / (SEGMENT_SAMPLES - 1) as f64;
        let p: Vec<f64> = xe.iter().zip(x).map(|(a, b)| a + t * (b - a)).collect();
        for (k, h) in field.hessians(&p, HessianMode::Tensor)?.iter().enumerate() {
            m[k] = m[k].max(sym_spectral_norm(h)?);
        }
    }
    let bound = m.iter().map(|mk| mk / 2.0 * dist2).collect();
    Ok(RemainderBound { m, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub point: Vec<f64>,
    pub base: Vec<f64>,
    /// `R1_k = f_k(X) - f_k(Xe) - [J(Xe)(X - Xe)]_k`.
    pub actual: Vec<f64>,
    pub m: Vec<f64>,
    pub bound: Vec<f64>,
    pub holds: bool,
}

/// First-order remainder at `x` about the equilibrium `xe`, checked against
/// its Lagrange bound.
///
/// The inequality is `|R1_k| <= 1.05 * bound_k`, plus a rounding allowance of
/// `1e-12` times the magnitude of the terms that were subtracted to form `R1_k`.
pub fn remainder_check(field: &VectorField, x: &[f64], xe: &[f64]) -> Result<RemainderReport, CriteriaError> {
    let f_base = field.eval(xe)?;
    let base_res = norm(&f_base);
    if !(base_res < EQUILIBRIUM_TOL) {
        return Err(CriteriaError::NotAnEquilibrium(base_res));
    }
    let f_x = field.eval(x)?;
    let delta: Vec<f64> = x.iter().zip(xe).map(|(a, b)| a - b).collect();
    let linear = field.jacobian(xe)?.mul_vec(&delta);
    let actual: Vec<f64> = (0..field.dim())
        .map(|k| f_x[k] - f_base[k] - linear[k])
        .collect();
    let RemainderBound { m, bound } = remainder_bound(field, x, xe)?;
    let holds = (0..field.dim()).all(|k| {
        let rounding = 1e-12 * (1.0 + f_x[k].abs() + f_base[k].abs() + linear[k].abs());
        actual[k].abs() <= REMAINDER_SLACK * bound[k] + rounding
    });
    Ok(RemainderReport {
        point: x.to_vec(),
        base: xe.to_vec(),
        actual,
        m,
        bound,
        holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictClass {
    GloballyStablePerCriterion,
    LocallyStableOnly,
    UnstablePerCriterion,
    Inconclusive,
}

impl VerdictClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictClass::GloballyStablePerCriterion => "globally-stable-per-criterion",
            VerdictClass::LocallyStableOnly => "locally-stable-only",
            VerdictClass::UnstablePerCriterion => "unstable-per-criterion",
            VerdictClass::Inconclusive => "inconclusive",
        }
    }
}

/// Combines the evidence into a verdict.
///
/// `condition1` is `None` when no equilibria were found; `any_unstable` is true
/// when some equilibrium has an eigenvalue with real part `> 1e-9`.
pub fn combine_verdict(condition1: Option<bool>, any_unstable: bool, condition2: Option<bool>) -> VerdictClass {
    match (condition1, any_unstable, condition2) {
        (None, _, _) => VerdictClass::Inconclusive,
        (Some(_), true, _) => VerdictClass::UnstablePerCriterion,
        (Some(true), false, Some(true)) => VerdictClass::GloballyStablePerCriterion,
        (Some(true), false, Some(false)) => VerdictClass::LocallyStableOnly,
        _ => VerdictClass::Inconclusive,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub verdict: VerdictClass,
    pub equilibria: Vec<Equilibrium>,
    pub condition1: Option<Condition1Result>,
    pub condition2: Option<Condition2Result>,
    pub simplified: Option<SimplifiedResult>,
    /// Index into `equilibria` of the base point used for condition 2.
    pub base_equilibrium: Option<usize>,
    pub config: CriterionConfig,
    pub notes: Vec<String>,
    /// Wall-clock milliseconds per phase.
    pub timings_ms: BTreeMap<String, f64>,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Tolerance when matching claimed equilibria (from `#@expect`) to found ones.
pub const EXPECTED_MATCH_TOL: f64 = 1e-3;

/// Full analysis: equilibria, condition 1, condition 2 about the
/// smallest-norm equilibrium, and the simplified criterion.
pub fn verdict(
    field: &VectorField,
    search: &SearchBox,
    cfg: &CriterionConfig,
) -> Result<StabilityVerdict, CriteriaError> {
    cfg.validate(field.dim())?;
    let mut timings_ms = BTreeMap::new();
    let clock = Instant::now();
    let equilibria = find_equilibria(field, search)?;
    timings_ms.insert("equilibria".to_string(), elapsed_ms(clock));
    let mut notes = Vec::new();
    let expected = field.system().expected_equilibria;
    if let Some(note) = compare_expected(&equilibria, &expected, EXPECTED_MATCH_TOL) {
        notes.push(note);
    }
    let condition1 = condition_one(&equilibria);
    let Some(c1) = &condition1 else {
        notes.push("no equilibria found in the search box; the criterion is inconclusive".into());
        return Ok(StabilityVerdict {
            verdict: VerdictClass::Inconclusive,
            equilibria,
            condition1,
            condition2: None,
            simplified: None,
            base_equilibrium: None,
            config: cfg.clone(),
            notes,
            timings_ms,
        });
    };

    let base_index = (0..equilibria.len())
        .min_by(|&a, &b| norm(&equilibria[a].point).total_cmp(&norm(&equilibria[b].point)))
        .expect("non-empty");
    let base = equilibria[base_index].point.clone();
    if equilibria.len() > 1 {
        notes.push(format!(
            "{} equilibria found; condition 2 is evaluated about the smallest-norm one",
            equilibria.len()
        ));
    }
    let clock = Instant::now();
    let condition2 = condition_two(field, &base, cfg)?;
    if condition2.failed_samples > 0 {
        notes.push(format!(
            "{} condition-2 samples failed to evaluate; condition 2 is treated as unsatisfied",
            condition2.failed_samples
        ));
    }

    // Report when the outcome hinges on the Hessian layout or on the reading of the limit.
    let alt_mode = match cfg.hessian_mode {
        HessianMode::Tensor => HessianMode::PaperRow,
        HessianMode::PaperRow => HessianMode::Tensor,
    };
    let alt = condition_two(field, &base, &CriterionConfig { hessian_mode: alt_mode, ..cfg.clone() })?;
    if alt.satisfied != condition2.satisfied {
        notes.push(format!(
            "condition 2 depends on the Hessian layout: {} mode gives {}, {} mode gives {}",
            cfg.hessian_mode.as_str(),
            satisfied_word(condition2.satisfied),
            alt_mode.as_str(),
            satisfied_word(alt.satisfied)
        ));
    }
    let alt_dirs = match cfg.direction_set {
        DirectionSet::PositiveOrthant => DirectionSet::Sphere,
        DirectionSet::Sphere => DirectionSet::PositiveOrthant,
    };
    let alt_cfg = CriterionConfig {
        direction_set: alt_dirs,
        direction_count: cfg.direction_count.max(2 * field.dim()),
        ..cfg.clone()
    };
    let alt = condition_two(field, &base, &alt_cfg)?;
    if alt.satisfied != condition2.satisfied {
        notes.push(format!(
            "condition 2 depends on how X -> infinity is read: {} directions give {}, {} directions give {}",
            cfg.direction_set.as_str(),
            satisfied_word(condition2.satisfied),
            alt_dirs.as_str(),
            satisfied_word(alt.satisfied)
        ));
    }

    timings_ms.insert("condition2".to_string(), elapsed_ms(clock));

    let clock = Instant::now();
    let region = cfg.sup_region.clone().unwrap_or_else(|| search.clone());
    let simplified = simplified_criterion(field, &region, cfg)?;
    if !simplified.holds {
        notes.push(format!(
            "simplified criterion max(eig(H)) = 0 fails on the region: sup = {} at {:?}",
            simplified.sup, simplified.argmax
        ));
    }

    timings_ms.insert("simplified".to_string(), elapsed_ms(clock));

    let any_unstable = equilibria
        .iter()
        .any(|e| e.eigen.values.iter().any(|v| v.re > MARGINAL_BAND));
    let verdict = combine_verdict(Some(c1.holds), any_unstable, Some(condition2.satisfied));
    if verdict == VerdictClass::Inconclusive {
        notes.push("some equilibrium has eigenvalues on the imaginary axis (within 1e-9)".into());
    }
    Ok(StabilityVerdict {
        verdict,
        equilibria,
        condition1,
        condition2: Some(condition2),
        simplified: Some(simplified),
        base_equilibrium: Some(base_index),
        config: cfg.clone(),
        notes,
        timings_ms,
    })
}

fn satisfied_word(b: bool) -> &'static str {
    if b {
        "satisfied"
    } else {
        "not satisfied"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::equilibria::classify_local;
    use crate::sysdsl::parse_system;

    fn field(src: &str) -> VectorField {
        VectorField::new(&parse_system(src).unwrap())
    }

    fn fhn() -> VectorField {
        field(benchmarks::FHN)
    }

    fn vdp(mu: f64) -> VectorField {
        field(benchmarks::VDP).with_param("mu", mu).unwrap()
    }

    #[test]
    fn default_radius_schedule() {
        let r = CriterionConfig::default().radii;
        assert_eq!(r.len(), 21);
        assert_eq!(r[0], 1.0);
        assert_eq!(r[20], 1_048_576.0);
        assert_eq!(geometric_radii(1.0, 2.0, 100.0).last(), Some(&64.0));
    }

    #[test]
    fn condition_one_examples() {
        let c = condition_one(&[classify_local(&vdp(-0.1), &[0.0, 0.0]).unwrap()]).unwrap();
        assert!(c.holds);
        assert!((c.spectral_abscissa[0] + 0.05).abs() < 1e-15);
        let c = condition_one(&[classify_local(&vdp(2.0), &[0.0, 0.0]).unwrap()]).unwrap();
        assert!(!c.holds);
        let c = condition_one(&[classify_local(&fhn(), &[0.0, 0.0]).unwrap()]).unwrap();
        assert!(c.holds);
        assert!((c.spectral_abscissa[0] + 0.1665).abs() < 1e-12);
        assert!(condition_one(&[]).is_none());
    }

    #[test]
    fn lambda_max_examples() {
        let f = fhn();
        assert_eq!(lambda_max_field(&f, HessianMode::PaperRow, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(lambda_max_field(&f, HessianMode::Tensor, &[-1.0, 0.0]).unwrap(), 2.0);
        let lin = field("system l\nstate x, y\ndx/dt = -x + 3*y\ndy/dt = x - 2*y\n");
        for mode in [HessianMode::Tensor, HessianMode::PaperRow] {
            assert_eq!(lambda_max_field(&lin, mode, &[7.0, -3.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn direction_sets() {
        let cfg = CriterionConfig::default();
        let d = cfg.directions(3);
        assert_eq!(d.len(), 16);
        assert!(d.iter().all(|u| u.iter().all(|c| *c > 0.0)));
        assert!(d.iter().all(|u| (norm(u) - 1.0).abs() < 1e-12));
        assert_eq!(d[0], vec![1.0 / 3f64.sqrt(); 3]);
        let sphere = CriterionConfig {
            direction_set: DirectionSet::Sphere,
            ..cfg.clone()
        };
        let d = sphere.directions(2);
        assert_eq!(&d[..4], &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
        assert_eq!(d, sphere.directions(2));
        let other_seed = CriterionConfig { rng_seed: 7, ..sphere };
        assert_ne!(d, other_seed.directions(2));
    }

    #[test]
    fn invalid_configs() {
        let n = 2;
        let mut c = CriterionConfig {
            epsilon: -1.0,
            ..Default::default()
        };
        assert!(c.validate(n).is_err());
        c.epsilon = 0.0;
        c.direction_count = 7;
        assert!(c.validate(n).is_err());
        c.direction_count = 8;
        c.radii = vec![1.0, 2.0, 2.0];
        assert!(c.validate(n).is_err());
        c.radii = vec![1.0, 2.0];
        assert!(c.validate(n).is_err());
        c.radii = vec![1.0, 2.0, 4.0];
        assert!(c.validate(n).is_ok());
        c.direction_set = DirectionSet::Sphere;
        assert!(c.validate(5).is_err());
    }

    #[test]
    fn condition_two_fhn_is_identically_zero() {
        let r = condition_two(&fhn(), &[0.0, 0.0], &CriterionConfig::default()).unwrap();
        assert!(r.satisfied);
        assert!(r.s_values.iter().flatten().all(|s| *s == Some(0.0) || *s == Some(-0.0)));
    }

    #[test]
    fn condition_two_vdp_grows() {
        let r = condition_two(&vdp(-0.1), &[0.0, 0.0], &CriterionConfig::default()).unwrap();
        assert!(!r.satisfied);
        let maxes: Vec<f64> = r.s_max_per_radius.iter().map(|m| m.unwrap()).collect();
        assert!(maxes.windows(2).all(|w| w[1] > w[0]));
        assert!(maxes.last().unwrap() > &1e15);
    }

    #[test]
    fn condition_two_linear_and_scaling_law() {
        let lin = field("system l\nstate x\ndx/dt = -x\n");
        let r = condition_two(&lin, &[0.0], &CriterionConfig::default()).unwrap();
        assert!(r.satisfied);
        assert!(r.s_values.iter().flatten().all(|s| *s == Some(0.0)));

        let quad = field("system q\nstate x\ndx/dt = x^2\n");
        let cfg = CriterionConfig {
            direction_set: DirectionSet::Sphere,
            ..Default::default()
        };
        let r = condition_two(&quad, &[0.0], &cfg).unwrap();
        for (i, row) in r.s_values.iter().enumerate() {
            let rr = r.radii[i];
            assert!(row.iter().all(|s| *s == Some(2.0 * rr * rr)));
        }
    }

    #[test]
    fn epsilon_zero_uses_absolute_tolerance() {
        let cfg = CriterionConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(condition_two(&fhn(), &[0.0, 0.0], &cfg).unwrap().satisfied);
        // A tiny constant positive curvature exceeds 1e-12 at large radius.
        let tiny = field("system t\nstate x\ndx/dt = -x + 1e-20*x^2\n");
        assert!(!condition_two(&tiny, &[0.0], &cfg).unwrap().satisfied);
    }

    #[test]
    fn failed_samples_make_condition_two_unsatisfied() {
        let f = field("system s\nstate x\ndx/dt = -x + 1e-9*ln(2 - x)\n");
        let r = condition_two(&f, &[0.0], &CriterionConfig::default()).unwrap();
        assert!(r.failed_samples > 0);
        assert!(!r.satisfied);
    }

    #[test]
    fn simplified_examples() {
        let f = fhn();
        let cfg = CriterionConfig::default();
        let q = simplified_criterion(&f, &SearchBox::cube(2, 0.0, 5.0, 2), &cfg).unwrap();
        assert_eq!(q.sup, 0.0);
        assert!(q.holds);
        assert!(q.points_per_axis.pow(2) >= 256);
        let full = simplified_criterion(&f, &SearchBox::cube(2, -5.0, 5.0, 2), &cfg).unwrap();
        assert_eq!(full.sup, 10.0);
        assert_eq!(full.argmax[0], -5.0);
        assert!(!full.holds);
        let lin = field("system l\nstate x, y, z\ndx/dt = -x\ndy/dt = -y\ndz/dt = x - z\n");
        let r = simplified_criterion(&lin, &SearchBox::cube(3, -1.0, 1.0, 2), &cfg).unwrap();
        assert_eq!(r.sup, 0.0);
        assert!(r.points_per_axis.pow(3) >= 256);
    }

    #[test]
    fn remainder_bound_examples() {
        let cubic = field("system c\nstate x\ndx/dt = -x^3/3\n");
        let b = remainder_bound(&cubic, &[1.0], &[0.0]).unwrap();
        assert_eq!(b.m, vec![2.0]);
        assert_eq!(b.bound, vec![1.0]);
        let b = remainder_bound(&fhn(), &[0.4, -0.2], &[0.4, -0.2]).unwrap();
        assert_eq!(b.bound, vec![0.0, 0.0]);
        let b = remainder_bound(&fhn(), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(b.m, vec![2.0, 0.0]);
        assert!((b.bound[0] - 2.0).abs() < 1e-15);
        assert_eq!(b.bound[1], 0.0);
    }

    #[test]
    fn remainder_check_examples() {
        let r = remainder_check(&fhn(), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((r.actual[0] + 1.0 / 3.0).abs() < 1e-12);
        assert!(r.actual[1].abs() < 1e-15);
        assert!(r.holds);
        let r = remainder_check(&fhn(), &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.actual, vec![0.0, 0.0]);
        assert!(r.holds);
        let lin = field("system l\nstate x, y\ndx/dt = -x + 3*y\ndy/dt = x - 2*y\n");
        let r = remainder_check(&lin, &[2.5, -1.25], &[0.0, 0.0]).unwrap();
        assert!(r.holds);
        assert!(r.actual.iter().all(|a| a.abs() < 1e-14));
        assert!(matches!(
            remainder_check(&fhn(), &[1.0, 1.0], &[1.0, 0.0]),
            Err(CriteriaError::NotAnEquilibrium(_))
        ));
    }

    #[test]
    fn verdict_branches_by_enumeration() {
        use VerdictClass::*;
        for c1 in [None, Some(true), Some(false)] {
            for unstable in [false, true] {
                for c2 in [None, Some(true), Some(false)] {
                    let v = combine_verdict(c1, unstable, c2);
                    let expected = match (c1, unstable, c2) {
                        (None, ..) => Inconclusive,
                        (_, true, _) => UnstablePerCriterion,
                        (Some(true), false, Some(true)) => GloballyStablePerCriterion,
                        (Some(true), false, Some(false)) => LocallyStableOnly,
                        _ => Inconclusive,
                    };
                    assert_eq!(v, expected, "{c1:?} {unstable} {c2:?}");
                }
            }
        }
    }

    #[test]
    fn benchmark_verdicts() {
        let search = SearchBox::cube(2, -5.0, 5.0, 9);
        let cfg = CriterionConfig::default();
        let v = verdict(&fhn(), &search, &cfg).unwrap();
        assert_eq!(v.verdict, VerdictClass::GloballyStablePerCriterion);
        assert!(v.notes.iter().any(|n| n.contains("expected")));
        let v = verdict(&vdp(-0.1), &search, &cfg).unwrap();
        assert_eq!(v.verdict, VerdictClass::LocallyStableOnly);
        assert!(v.notes.iter().any(|n| n.contains("Hessian layout")), "{:?}", v.notes);
        let v = verdict(&vdp(2.0), &search, &cfg).unwrap();
        assert_eq!(v.verdict, VerdictClass::UnstablePerCriterion);
    }

    #[test]
    fn no_equilibria_is_inconclusive() {
        let f = field("system q\nstate x\ndx/dt = x^2 + 1\n");
        let v = verdict(&f, &SearchBox::cube(1, -3.0, 3.0, 9), &CriterionConfig::default()).unwrap();
        assert_eq!(v.verdict, VerdictClass::Inconclusive);
        assert!(v.condition1.is_none());
        assert!(!v.notes.is_empty());
    }

    #[test]
    fn marginal_equilibrium_is_inconclusive() {
        let f = field("system h\nstate v, u\ndv/dt = u\ndu/dt = -v\n");
        let v = verdict(&f, &SearchBox::cube(2, -1.0, 1.0, 3), &CriterionConfig::default()).unwrap();
        assert_eq!(v.verdict, VerdictClass::Inconclusive);
    }
}
