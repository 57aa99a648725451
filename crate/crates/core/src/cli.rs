//! The `hstab` command line: argument parsing, orchestration and exit codes.
//!
//! Exit codes: 0 globally stable, 1 locally stable only, 2 unstable and
//! 3 inconclusive (for `analyze`); 64 usage error; 65 unreadable or invalid
//! system file; 70 internal failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::criteria::{geometric_radii, verdict, CriteriaError, CriterionConfig, DirectionSet, VerdictClass};
use crate::equilibria::{compare_expected, find_equilibria, Equilibrium, SearchBox};
use crate::report::{
    field_csv, render_svg, sample_field, trajectories_csv, write_atomic, AnalysisReport, EquilibriumEntry, Slice,
};
use crate::simkit::{
    classify_fate, integrate, Fate, FateCounts, FateThresholds, IntegrateOptions, Method, Trajectory,
};
use crate::sysdsl::{parse_system, HessianMode, SystemDef, VectorField};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;

#[derive(Debug, Parser)]
#[command(name = "hstab", version, about = "Global stability analysis for autonomous ODE systems")]
pub struct Cli {
    /// Output file (analyze, equilibria, simulate) or directory (portrait).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Override a system parameter; repeatable.
    #[arg(long = "param", global = true, value_name = "NAME=VALUE", allow_hyphen_values = true)]
    pub params: Vec<String>,
    /// Seed for the direction sampler.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Zero all timings so repeated runs produce identical reports.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the two-part criterion and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Export vector-field and trajectory CSV files, optionally an SVG.
    Portrait(PortraitArgs),
    /// Integrate trajectories and classify their fates.
    Simulate(SimulateArgs),
    /// Locate and classify equilibria.
    Equilibria(EquilibriaArgs),
}

#[derive(Debug, Args)]
pub struct BoxArgs {
    /// Search box, one LO:HI per state or a single range for all of them.
    #[arg(long = "box", value_name = "LO:HI[,LO:HI...]", allow_hyphen_values = true)]
    pub search_box: Option<String>,
    /// Newton starts per axis of the search box.
    #[arg(long, default_value_t = 9)]
    pub grid_per_axis: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 1e-6, allow_hyphen_values = true)]
    pub epsilon: f64,
    #[arg(long, default_value = "tensor")]
    pub hessian_mode: HessianMode,
    #[arg(long, default_value = "positive-orthant")]
    pub directions: DirectionSet,
    #[arg(long, default_value_t = 16)]
    pub direction_count: usize,
    /// Largest radius of the doubling schedule that starts at 1.
    #[arg(long, default_value_t = 1048576.0)]
    pub r_max: f64,
    #[command(flatten)]
    pub search: BoxArgs,
}

#[derive(Debug, Args)]
pub struct EquilibriaArgs {
    pub system: PathBuf,
    #[command(flatten)]
    pub search: BoxArgs,
}

#[derive(Debug, Args)]
pub struct IntegrationArgs {
    #[arg(long, default_value = "rkf45")]
    pub method: Method,
    /// Local error tolerance of the adaptive method.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Step of the fixed-step method.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

impl IntegrationArgs {
    fn options(&self) -> IntegrateOptions {
        IntegrateOptions {
            method: self.method,
            tol: self.tol,
            step: self.step,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub system: PathBuf,
    /// Initial condition as comma-separated values; repeatable.
    #[arg(long, value_name = "X1,X2,...", allow_hyphen_values = true)]
    pub ic: Vec<String>,
    /// Grid of initial conditions, e.g. 11x11 (requires --window).
    #[arg(long, value_name = "N1xN2...")]
    pub grid: Option<String>,
    #[arg(long, value_name = "LO:HI[,LO:HI...]", allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
    #[command(flatten)]
    pub search: BoxArgs,
}

#[derive(Debug, Args)]
pub struct PortraitArgs {
    pub system: PathBuf,
    #[arg(long, value_name = "LO:HI[,LO:HI]", allow_hyphen_values = true, default_value = "-4:4")]
    pub window: String,
    #[arg(long, value_name = "NXxNY", default_value = "20")]
    pub grid: String,
    /// Number of trajectories started on two rings inside the window.
    #[arg(long, default_value_t = 0)]
    pub seeds: usize,
    /// Extra trajectory start; repeatable.
    #[arg(long, value_name = "X1,X2,...", allow_hyphen_values = true)]
    pub ic: Vec<String>,
    /// States on the horizontal and vertical axes, by name or 1-based index.
    #[arg(long, value_name = "I,J")]
    pub axes: Option<String>,
    /// Also render portrait.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[command(flatten)]
    pub integration: IntegrationArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Software(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Software(_) => EXIT_SOFTWARE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Software(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Software(format!("i/o error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn verdict_exit_code(v: VerdictClass) -> i32 {
    match v {
        VerdictClass::GloballyStablePerCriterion => 0,
        VerdictClass::LocallyStableOnly => 1,
        VerdictClass::UnstablePerCriterion => 2,
        VerdictClass::Inconclusive => 3,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "hstab: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(cli, a, stdout),
        Command::Equilibria(a) => cmd_equilibria(cli, a, stdout, stderr),
        Command::Simulate(a) => cmd_simulate(cli, a, stdout),
        Command::Portrait(a) => cmd_portrait(cli, a, stdout),
    }
}

struct Loaded {
    source: String,
    field: VectorField,
}

fn load_system(path: &Path, overrides: &[String]) -> CliResult<Loaded> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut sys: SystemDef =
        parse_system(&source).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for o in overrides {
        let (name, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--param expects NAME=VALUE, got `{o}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--param {name}: `{value}` is not a number")))?;
        sys = sys
            .with_param(name.trim(), value)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let field = VectorField::new(&sys);
    Ok(Loaded { source, field })
}

fn parse_ranges(text: &str, n: usize, flag: &str) -> CliResult<Vec<(f64, f64)>> {
    let ranges = text
        .split(',')
        .map(|r| {
            let (lo, hi) = r
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("{flag}: expected LO:HI, got `{r}`")))?;
            let lo: f64 = lo.trim().parse().map_err(|_| CliError::Usage(format!("{flag}: bad number `{lo}`")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| CliError::Usage(format!("{flag}: bad number `{hi}`")))?;
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(CliError::Usage(format!("{flag}: range `{r}` must have LO < HI")));
            }
            Ok((lo, hi))
        })
        .collect::<CliResult<Vec<_>>>()?;
    match ranges.len() {
        1 => Ok(vec![ranges[0]; n]),
        k if k == n => Ok(ranges),
        k => Err(CliError::Usage(format!("{flag}: {k} ranges given for {n} states"))),
    }
}

fn parse_point(text: &str, n: usize, flag: &str) -> CliResult<Vec<f64>> {
    let p = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{flag}: bad number `{v}`"))))
        .collect::<CliResult<Vec<f64>>>()?;
    if p.len() != n {
        return Err(CliError::Usage(format!("{flag}: `{text}` has {} values, system has {n} states", p.len())));
    }
    Ok(p)
}

fn parse_counts(text: &str, n: usize, flag: &str) -> CliResult<Vec<usize>> {
    let counts = text
        .split('x')
        .map(|v| match v.trim().parse::<usize>() {
            Ok(c) if c >= 1 => Ok(c),
            _ => Err(CliError::Usage(format!("{flag}: bad count `{v}`"))),
        })
        .collect::<CliResult<Vec<usize>>>()?;
    match counts.len() {
        1 => Ok(vec![counts[0]; n]),
        k if k == n => Ok(counts),
        k => Err(CliError::Usage(format!("{flag}: {k} counts given for {n} axes"))),
    }
}

fn search_box(args: &BoxArgs, n: usize) -> CliResult<SearchBox> {
    let ranges = match &args.search_box {
        Some(text) => parse_ranges(text, n, "--box")?,
        None => vec![(-5.0, 5.0); n],
    };
    SearchBox::new(
        ranges.iter().map(|r| r.0).collect(),
        ranges.iter().map(|r| r.1).collect(),
        args.grid_per_axis,
    )
    .map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(cli: &Cli, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn cmd_analyze(cli: &Cli, a: &AnalyzeArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let total = Instant::now();
    let loaded = load_system(&a.system, &cli.params)?;
    let parse_ms = ms(total);
    let n = loaded.field.dim();
    let search = search_box(&a.search, n)?;
    let cfg = CriterionConfig {
        epsilon: a.epsilon,
        hessian_mode: a.hessian_mode,
        direction_set: a.directions,
        direction_count: a.direction_count,
        radii: geometric_radii(1.0, 2.0, a.r_max),
        rng_seed: cli.seed,
        sup_region: None,
    };
    cfg.validate(n).map_err(|e| CliError::Usage(e.to_string()))?;
    let v = verdict(&loaded.field, &search, &cfg).map_err(|e| match e {
        CriteriaError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Software(other.to_string()),
    })?;
    let mut report = AnalysisReport::new(&loaded.source, &loaded.field, &search, &v);
    report.timings_ms.insert("parse".into(), parse_ms);
    report.timings_ms.insert("total".into(), ms(total));
    if cli.deterministic {
        report.zero_timings();
    }
    emit(cli, &report.to_json(), stdout)?;
    Ok(verdict_exit_code(v.verdict))
}

fn cmd_equilibria(cli: &Cli, a: &EquilibriaArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let loaded = load_system(&a.system, &cli.params)?;
    let search = search_box(&a.search, loaded.field.dim())?;
    let eqs = find_equilibria(&loaded.field, &search).map_err(|e| CliError::Software(e.to_string()))?;
    let entries: Vec<EquilibriumEntry> = eqs.iter().map(EquilibriumEntry::from).collect();
    let mut text = serde_json::to_string_pretty(&entries).map_err(|e| CliError::Software(e.to_string()))?;
    text.push('\n');
    emit(cli, &text, stdout)?;
    if let Some(note) = compare_expected(&eqs, &loaded.field.system().expected_equilibria, crate::criteria::EXPECTED_MATCH_TOL) {
        writeln!(stderr, "note: {note}")?;
    }
    Ok(0)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_fate(fate: &Fate, equilibria: &[Equilibrium]) -> (String, String) {
    let detail = match fate {
        Fate::Converged { equilibrium, distance } => format!(
            "equilibrium {} at {}, distance {distance:.3e}",
            equilibrium,
            fmt_vec(&equilibria[*equilibrium].point)
        ),
        Fate::Diverged { time, norm } => format!("t = {time:.4}, |x| = {norm:.3e}"),
        Fate::Undetermined { state, note } => {
            let mut d = format!("final state {}", fmt_vec(state));
            if let Some(n) = note {
                d.push_str(&format!("; {n}"));
            }
            d
        }
    };
    (fate.label().to_string(), detail)
}

fn grid_points(counts: &[usize], ranges: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let grid = crate::simkit::GridSpec {
        axes: counts
            .iter()
            .zip(ranges)
            .map(|(&count, &(lo, hi))| crate::simkit::AxisRange { lo, hi, count })
            .collect(),
    };
    grid.nodes()
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let loaded = load_system(&a.system, &cli.params)?;
    let field = &loaded.field;
    let n = field.dim();
    let mut ics: Vec<Vec<f64>> = a
        .ic
        .iter()
        .map(|s| parse_point(s, n, "--ic"))
        .collect::<CliResult<_>>()?;
    match (&a.grid, &a.window) {
        (Some(g), Some(w)) => ics.extend(grid_points(&parse_counts(g, n, "--grid")?, &parse_ranges(w, n, "--window")?)),
        (Some(_), None) => return Err(CliError::Usage("--grid requires --window".into())),
        (None, Some(_)) => return Err(CliError::Usage("--window requires --grid".into())),
        (None, None) => {}
    }
    if ics.is_empty() {
        return Err(CliError::Usage("give at least one --ic or a --grid with --window".into()));
    }
    if !(a.t_end > 0.0) {
        return Err(CliError::Usage("--t-end must be positive".into()));
    }
    let search = search_box(&a.search, n)?;
    let eqs = find_equilibria(field, &search).map_err(|e| CliError::Software(e.to_string()))?;
    let opts = a.integration.options();
    let thresholds = FateThresholds::default();
    let keep = cli.out.is_some();
    let runs: Vec<(Fate, Option<Trajectory>)> = ics
        .par_iter()
        .map(|ic| match integrate(field, ic, a.t_end, &opts) {
            Ok(traj) => {
                let fate = classify_fate(field, &traj, &eqs, &thresholds);
                (fate, keep.then_some(traj))
            }
            Err(e) => (
                Fate::Undetermined {
                    state: ic.clone(),
                    note: Some(e.to_string()),
                },
                None,
            ),
        })
        .collect();

    writeln!(stdout, "{:>4}  {:<28}  {:<12}  detail", "id", "initial condition", "fate")?;
    for (id, (ic, (fate, _))) in ics.iter().zip(&runs).enumerate() {
        let (label, detail) = fmt_fate(fate, &eqs);
        writeln!(stdout, "{id:>4}  {:<28}  {label:<12}  {detail}", fmt_vec(ic))?;
    }
    let counts = FateCounts::tally(runs.iter().map(|r| &r.0));
    writeln!(stdout, "{counts}")?;

    if let Some(path) = &cli.out {
        // Ids follow the table; failed integrations contribute no rows.
        let mut csv = trajectories_csv(&[], n);
        for (id, (_, traj)) in runs.iter().enumerate() {
            if let Some(t) = traj {
                let body = trajectories_csv(std::slice::from_ref(t), n);
                for line in body.lines().skip(1) {
                    let rest = line.split_once(',').map_or("", |p| p.1);
                    csv.push_str(&format!("{id},{rest}\n"));
                }
            }
        }
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(0)
}

fn parse_axis(token: &str, names: &[String]) -> CliResult<usize> {
    if let Some(i) = names.iter().position(|s| s == token.trim()) {
        return Ok(i);
    }
    match token.trim().parse::<usize>() {
        Ok(k) if (1..=names.len()).contains(&k) => Ok(k - 1),
        _ => Err(CliError::Usage(format!("--axes: `{token}` is neither a state name nor an index in 1..={}", names.len()))),
    }
}

/// Trajectory starts on two concentric rings about the window centre,
/// alternating between 30% and 90% of the half-widths.
pub fn ring_seeds(count: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Vec<(f64, f64)> {
    let (cx, cy) = ((x_range.0 + x_range.1) / 2.0, (y_range.0 + y_range.1) / 2.0);
    let (hx, hy) = ((x_range.1 - x_range.0) / 2.0, (y_range.1 - y_range.0) / 2.0);
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
            let r = if k % 2 == 0 { 0.3 } else { 0.9 };
            (cx + r * hx * theta.cos(), cy + r * hy * theta.sin())
        })
        .collect()
}

fn cmd_portrait(cli: &Cli, a: &PortraitArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let loaded = load_system(&a.system, &cli.params)?;
    let field = &loaded.field;
    let n = field.dim();
    let dir = cli
        .out
        .as_ref()
        .ok_or_else(|| CliError::Usage("portrait needs --out DIR".into()))?;
    if a.svg && (n == 1 || (n > 2 && a.axes.is_none())) {
        return Err(CliError::Usage(format!(
            "SVG needs a 2-D picture; the system has {n} state(s){}",
            if n > 2 { ", choose two with --axes" } else { "" }
        )));
    }
    let names = field.state_names();
    let (x_axis, y_axis) = match &a.axes {
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != 2 {
                return Err(CliError::Usage("--axes expects I,J".into()));
            }
            let (i, j) = (parse_axis(parts[0], names)?, parse_axis(parts[1], names)?);
            if i == j {
                return Err(CliError::Usage("--axes needs two different states".into()));
            }
            (i, Some(j))
        }
        None if n == 1 => (0, None),
        None => (0, Some(1)),
    };
    let dims = if y_axis.is_some() { 2 } else { 1 };
    let ranges = parse_ranges(&a.window, dims, "--window")?;
    let counts = parse_counts(&a.grid, dims, "--grid")?;
    let slice = Slice {
        x_axis,
        y_axis,
        x_range: ranges[0],
        y_range: *ranges.get(1).unwrap_or(&(0.0, 0.0)),
        base: vec![0.0; n],
    };

    let mut starts: Vec<Vec<f64>> = a
        .ic
        .iter()
        .map(|s| parse_point(s, n, "--ic"))
        .collect::<CliResult<_>>()?;
    let y_range = if y_axis.is_some() { slice.y_range } else { (0.0, 0.0) };
    starts.extend(ring_seeds(a.seeds, slice.x_range, y_range).into_iter().map(|(x, y)| slice.point(x, y)));
    if !(a.t_end > 0.0) {
        return Err(CliError::Usage("--t-end must be positive".into()));
    }
    let opts = a.integration.options();
    let trajectories: Vec<Trajectory> = starts
        .par_iter()
        .filter_map(|ic| integrate(field, ic, a.t_end, &opts).ok())
        .collect();

    let samples = sample_field(field, &slice, counts[0], *counts.get(1).unwrap_or(&1));
    std::fs::create_dir_all(dir)?;
    let field_path = dir.join("field.csv");
    let traj_path = dir.join("trajectories.csv");
    write_atomic(&field_path, field_csv(&samples).as_bytes())?;
    write_atomic(&traj_path, trajectories_csv(&trajectories, n).as_bytes())?;
    writeln!(stdout, "wrote {} ({} rows)", field_path.display(), samples.len())?;
    writeln!(stdout, "wrote {} ({} trajectories)", traj_path.display(), trajectories.len())?;

    if a.svg {
        let y_axis = y_axis.expect("checked above");
        let mut lower = vec![-5.0; n];
        let mut upper = vec![5.0; n];
        lower[x_axis] = slice.x_range.0;
        upper[x_axis] = slice.x_range.1;
        lower[y_axis] = slice.y_range.0;
        upper[y_axis] = slice.y_range.1;
        let search = SearchBox::new(lower, upper, 9).map_err(|e| CliError::Software(e.to_string()))?;
        let eqs = find_equilibria(field, &search).map_err(|e| CliError::Software(e.to_string()))?;
        let points: Vec<Vec<f64>> = eqs.into_iter().map(|e| e.point).collect();
        let svg = render_svg(
            &slice,
            (&names[x_axis], &names[y_axis]),
            &samples,
            (counts[0], counts[1]),
            &trajectories,
            &points,
        );
        let svg_path = dir.join("portrait.svg");
        write_atomic(&svg_path, svg.as_bytes())?;
        writeln!(stdout, "wrote {}", svg_path.display())?;
    }
    Ok(0)
}
