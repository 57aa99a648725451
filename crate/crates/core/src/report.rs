//! Analysis reports, CSV exports and hand-written SVG phase portraits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criteria::{CriterionConfig, StabilityVerdict, VerdictClass};
use crate::equilibria::{Equilibrium, LocalClass, SearchBox};
use crate::simkit::Trajectory;
use crate::sysdsl::VectorField;

/// JSON schema that every [`AnalysisReport`] validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lowercase hex SHA-256 of the system source text.
pub fn source_digest(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub name: String,
    pub digest: String,
    pub states: Vec<String>,
    /// Parameter values after `--param` overrides.
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub criterion: CriterionConfig,
    pub search_box: SearchBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumEntry {
    pub point: Vec<f64>,
    pub residual: f64,
    pub eigenvalues: Vec<ComplexEntry>,
    pub class: LocalClass,
}

impl From<&Equilibrium> for EquilibriumEntry {
    fn from(e: &Equilibrium) -> Self {
        EquilibriumEntry {
            point: e.point.clone(),
            residual: e.residual_norm,
            eigenvalues: e
                .eigen
                .values
                .iter()
                .map(|z| ComplexEntry { re: z.re, im: z.im })
                .collect(),
            class: e.local_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition1Entry {
    /// `null` when no equilibrium was found.
    pub holds: Option<bool>,
    pub spectral_abscissa_per_equilibrium: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition2Entry {
    pub satisfied: bool,
    pub epsilon: f64,
    pub base: Vec<f64>,
    pub radii: Vec<f64>,
    /// `null` where every direction failed to evaluate or the value overflowed.
    pub s_max_per_radius: Vec<Option<f64>>,
    pub worst_direction: Vec<f64>,
    pub failed_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedEntry {
    pub sup: Option<f64>,
    pub argmax: Vec<f64>,
    pub region: SearchBox,
    pub points_per_axis: usize,
    pub failed_samples: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub version: String,
    pub system: SystemSummary,
    pub config: ConfigEcho,
    pub equilibria: Vec<EquilibriumEntry>,
    pub condition1: Condition1Entry,
    pub condition2: Option<Condition2Entry>,
    pub simplified: Option<SimplifiedEntry>,
    pub verdict: VerdictClass,
    pub notes: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl AnalysisReport {
    pub fn new(source: &str, field: &VectorField, search: &SearchBox, v: &StabilityVerdict) -> Self {
        let sys = field.system();
        AnalysisReport {
            version: VERSION.to_string(),
            system: SystemSummary {
                name: sys.name.clone(),
                digest: source_digest(source),
                states: sys.states.clone(),
                params: sys.params.clone(),
            },
            config: ConfigEcho {
                criterion: v.config.clone(),
                search_box: search.clone(),
            },
            equilibria: v.equilibria.iter().map(EquilibriumEntry::from).collect(),
            condition1: Condition1Entry {
                holds: v.condition1.as_ref().map(|c| c.holds),
                spectral_abscissa_per_equilibrium: v
                    .condition1
                    .as_ref()
                    .map(|c| c.spectral_abscissa.clone())
                    .unwrap_or_default(),
            },
            condition2: v.condition2.as_ref().map(|c| Condition2Entry {
                satisfied: c.satisfied,
                epsilon: c.epsilon,
                base: c.base.clone(),
                radii: c.radii.clone(),
                s_max_per_radius: c.s_max_per_radius.iter().map(|s| s.and_then(finite)).collect(),
                worst_direction: c.worst_direction.clone(),
                failed_samples: c.failed_samples,
            }),
            simplified: v.simplified.as_ref().map(|s| SimplifiedEntry {
                sup: finite(s.sup),
                argmax: s.argmax.clone(),
                region: s.region.clone(),
                points_per_axis: s.points_per_axis,
                failed_samples: s.failed_samples,
                holds: s.holds,
            }),
            verdict: v.verdict,
            notes: v.notes.clone(),
            timings_ms: v.timings_ms.clone(),
        }
    }

    /// Sets every timing to zero so that reports compare byte for byte.
    pub fn zero_timings(&mut self) {
        self.timings_ms.values_mut().for_each(|t| *t = 0.0);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Seventeen significant digits: enough for every double to reparse exactly.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A 2-D window through state space: `x_axis` against `y_axis` with every
/// other coordinate held at `base`. One-dimensional systems have no `y_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub x_axis: usize,
    pub y_axis: Option<usize>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub base: Vec<f64>,
}

impl Slice {
    pub fn point(&self, x: f64, y: f64) -> Vec<f64> {
        let mut p = self.base.clone();
        p[self.x_axis] = x;
        if let Some(j) = self.y_axis {
            p[j] = y;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

fn linspace(lo: f64, hi: f64, count: usize, k: usize) -> f64 {
    if count == 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (count - 1) as f64
    }
}

/// Samples the field on an `nx x ny` grid over the slice, `x` varying slowest.
/// Points where the field cannot be evaluated get NaN components.
pub fn sample_field(field: &VectorField, slice: &Slice, nx: usize, ny: usize) -> Vec<FieldSample> {
    let ny = if slice.y_axis.is_some() { ny } else { 1 };
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = linspace(slice.x_range.0, slice.x_range.1, nx, i);
        for j in 0..ny {
            let y = match slice.y_axis {
                Some(_) => linspace(slice.y_range.0, slice.y_range.1, ny, j),
                None => 0.0,
            };
            let (dx, dy) = match field.eval(&slice.point(x, y)) {
                Ok(f) => (f[slice.x_axis], slice.y_axis.map_or(0.0, |a| f[a])),
                Err(_) => (f64::NAN, f64::NAN),
            };
            out.push(FieldSample { x, y, dx, dy });
        }
    }
    out
}

pub fn field_csv(samples: &[FieldSample]) -> String {
    let mut s = String::from("x,y,dx,dy\n");
    for p in samples {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_num(p.x),
            fmt_num(p.y),
            fmt_num(p.dx),
            fmt_num(p.dy)
        );
    }
    s
}

/// Columns `traj_id,t,x1..xn`; ids are positions in `trajectories`.
pub fn trajectories_csv(trajectories: &[Trajectory], dim: usize) -> String {
    let mut s = String::from("traj_id,t");
    for k in 1..=dim {
        let _ = write!(s, ",x{k}");
    }
    s.push('\n');
    for (id, traj) in trajectories.iter().enumerate() {
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let _ = write!(s, "{id},{}", fmt_num(*t));
            for v in x {
                let _ = write!(s, ",{}", fmt_num(*v));
            }
            s.push('\n');
        }
    }
    s
}

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 48.0;
const MAX_POLYLINE_POINTS: usize = 4000;

/// 95th percentile of the finite field magnitudes, used as the arrow scale.
pub fn magnitude_p95(samples: &[FieldSample]) -> Option<f64> {
    let mut mags: Vec<f64> = samples
        .iter()
        .map(|p| p.dx.hypot(p.dy))
        .filter(|m| m.is_finite())
        .collect();
    if mags.is_empty() {
        return None;
    }
    mags.sort_by(f64::total_cmp);
    let idx = ((0.95 * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
    Some(mags[idx])
}

/// Renders arrows (scaled to the 95th-percentile magnitude, longer ones
/// capped), trajectories as polylines and equilibria as circles.
pub fn render_svg(
    slice: &Slice,
    axis_names: (&str, &str),
    samples: &[FieldSample],
    grid: (usize, usize),
    trajectories: &[Trajectory],
    equilibria: &[Vec<f64>],
) -> String {
    let plot = SVG_SIZE - 2.0 * SVG_MARGIN;
    let (xlo, xhi) = slice.x_range;
    let (ylo, yhi) = slice.y_range;
    let px = |x: f64| SVG_MARGIN + (x - xlo) / (xhi - xlo) * plot;
    let py = |y: f64| SVG_MARGIN + (yhi - y) / (yhi - ylo) * plot;
    let y_of = |p: &[f64]| slice.y_axis.map_or(0.0, |j| p[j]);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{SVG_MARGIN}" y="{SVG_MARGIN}" width="{plot}" height="{plot}"/></clipPath></defs>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{SVG_MARGIN}" y="{SVG_MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );

    let cells_x = grid.0.saturating_sub(1).max(1) as f64;
    let cells_y = grid.1.saturating_sub(1).max(1) as f64;
    let max_len = 0.8 * (plot / cells_x).min(plot / cells_y);
    if let Some(p95) = magnitude_p95(samples).filter(|m| *m > 0.0) {
        let _ = writeln!(s, r##"<g stroke="#4a6fa5" fill="#4a6fa5" stroke-width="1">"##);
        for p in samples {
            let mag = p.dx.hypot(p.dy);
            if !mag.is_finite() || mag == 0.0 {
                continue;
            }
            let len = max_len * (mag / p95).min(1.0);
            // Screen y grows downward.
            let (ux, uy) = (p.dx / mag, -p.dy / mag);
            let (x0, y0) = (px(p.x), py(p.y));
            let (x1, y1) = (x0 + len * ux, y0 + len * uy);
            let head = 0.3 * len;
            let (lx, ly) = (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux));
            let (rx, ry) = (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux));
            let _ = writeln!(
                s,
                r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/><polygon points="{x1:.2},{y1:.2} {lx:.2},{ly:.2} {rx:.2},{ry:.2}"/>"#
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(
        s,
        r##"<g clip-path="url(#plot)" fill="none" stroke="#c0392b" stroke-width="1.2">"##
    );
    for traj in trajectories {
        let stride = traj.states.len().div_ceil(MAX_POLYLINE_POINTS).max(1);
        let mut pts = String::new();
        for (k, x) in traj.states.iter().enumerate() {
            if k % stride != 0 && k + 1 != traj.states.len() {
                continue;
            }
            let (a, b) = (px(x[slice.x_axis]), py(y_of(x)));
            // Far-off points would only bloat the file; the clip hides them anyway.
            if a.abs() > 1e6 || b.abs() > 1e6 {
                break;
            }
            let _ = write!(pts, "{a:.2},{b:.2} ");
        }
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, pts.trim_end());
    }
    let _ = writeln!(s, "</g>");

    for e in equilibria {
        let (x, y) = (e[slice.x_axis], y_of(e));
        if (xlo..=xhi).contains(&x) && (ylo..=yhi).contains(&y) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="black"/>"#,
                px(x),
                py(y)
            );
        }
    }

    let text = |s: &mut String, x: f64, y: f64, anchor: &str, label: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{label}</text>"#
        );
    };
    let bottom = SVG_SIZE - SVG_MARGIN + 16.0;
    text(&mut s, SVG_MARGIN, bottom, "start", &format!("{xlo}"));
    text(&mut s, SVG_SIZE - SVG_MARGIN, bottom, "end", &format!("{xhi}"));
    text(&mut s, SVG_SIZE / 2.0, bottom + 16.0, "middle", &xml_escape(axis_names.0));
    text(&mut s, SVG_MARGIN - 6.0, SVG_SIZE - SVG_MARGIN, "end", &format!("{ylo}"));
    text(&mut s, SVG_MARGIN - 6.0, SVG_MARGIN + 10.0, "end", &format!("{yhi}"));
    text(&mut s, SVG_MARGIN - 6.0, SVG_SIZE / 2.0, "end", &xml_escape(axis_names.1));
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::simkit::{integrate, IntegrateOptions};
    use crate::sysdsl::parse_system;

    #[test]
    fn digest_is_sha256_hex() {
        assert_eq!(
            source_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn numbers_reparse_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            let back: f64 = fmt_num(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
        assert!(fmt_num(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    fn fhn_slice() -> Slice {
        Slice {
            x_axis: 0,
            y_axis: Some(1),
            x_range: (-4.0, 4.0),
            y_range: (-4.0, 4.0),
            base: vec![0.0, 0.0],
        }
    }

    #[test]
    fn field_csv_layout() {
        let f = VectorField::new(&parse_system(benchmarks::FHN).unwrap());
        let samples = sample_field(&f, &fhn_slice(), 20, 20);
        let csv = field_csv(&samples);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 401);
        assert_eq!(lines[0], "x,y,dx,dy");
        assert!(!csv.contains('\r'));
        let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], -4.0);
        assert_eq!(first[1], -4.0);
        // v' = -v^3/3 - w, w' = v - 0.333 w at (-4, -4)
        assert!((first[2] - (64.0 / 3.0 + 4.0)).abs() < 1e-12);
        assert!((first[3] - (-4.0 + 0.333 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn trajectory_csv_header() {
        let f = VectorField::new(&parse_system(benchmarks::VDP).unwrap());
        let t = integrate(&f, &[0.5, 0.0], 1.0, &IntegrateOptions::rk4(0.25)).unwrap();
        let csv = trajectories_csv(&[t.clone(), t], 2);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "traj_id,t,x1,x2");
        assert_eq!(lines.len(), 1 + 2 * 5);
        assert!(lines[6].starts_with("1,"));
    }

    #[test]
    fn svg_marks_each_equilibrium_in_window() {
        let f = VectorField::new(&parse_system(benchmarks::FHN).unwrap());
        let slice = fhn_slice();
        let samples = sample_field(&f, &slice, 20, 20);
        let t = integrate(&f, &[2.0, 2.0], 10.0, &IntegrateOptions::default()).unwrap();
        let svg = render_svg(&slice, ("v", "w"), &samples, (20, 20), &[t], &[vec![0.0, 0.0], vec![9.0, 9.0]]);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<line ").count(), 400);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn p95_scale() {
        let samples: Vec<FieldSample> = (1..=100)
            .map(|k| FieldSample { x: 0.0, y: 0.0, dx: k as f64, dy: 0.0 })
            .collect();
        assert_eq!(magnitude_p95(&samples), Some(95.0));
        assert_eq!(magnitude_p95(&[]), None);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
