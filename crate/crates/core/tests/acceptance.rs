//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! for ordered output; the lines are printed even without `--nocapture`.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use hessian_stability::criteria::{remainder_check, verdict, CriterionConfig, VerdictClass};
use hessian_stability::denselin::{eigenvalues, Matrix};
use hessian_stability::equilibria::{find_equilibria, SearchBox};
use hessian_stability::report::AnalysisReport;
use hessian_stability::simkit::{
    basin_scan, integrate, simulate_fate, Fate, FateThresholds, GridSpec, IntegrateOptions,
};
use hessian_stability::sysdsl::{differentiate, parse_system};
use hessian_stability::{benchmarks, HessianMode, VectorField};
use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;
use support::{at, central_difference, expr, linear_system};

/// Collects named checks and prints one summary line for the criterion.
struct Criterion {
    number: u32,
    title: &'static str,
    started: Instant,
    budget: Option<Duration>,
    failures: Vec<String>,
    details: Vec<String>,
}

impl Criterion {
    fn new(number: u32, title: &'static str, budget: Option<Duration>) -> Self {
        Criterion {
            number,
            title,
            started: Instant::now(),
            budget,
            failures: Vec::new(),
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.details.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed();
        if let Some(b) = self.budget {
            self.check(
                elapsed < b,
                format!("runtime {:.2} s within {:.0} s", elapsed.as_secs_f64(), b.as_secs_f64()),
            );
        }
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let body = if self.failures.is_empty() {
            self.details.join("; ")
        } else {
            self.failures.join("; ")
        };
        let line = format!(
            "acceptance criterion {} [{}]: {} ({:.2} s) {}",
            self.number,
            self.title,
            status,
            elapsed.as_secs_f64(),
            body
        );
        // Written to the raw handle so the line survives output capture.
        let _ = writeln!(std::io::stdout().lock(), "{line}");
        assert!(self.failures.is_empty(), "{line}");
    }
}

fn fhn() -> VectorField {
    VectorField::new(&parse_system(benchmarks::FHN).unwrap())
}

fn vdp(mu: f64) -> VectorField {
    VectorField::new(&parse_system(benchmarks::VDP).unwrap())
        .with_param("mu", mu)
        .unwrap()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            max_global_rejects: 100_000,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

#[test]
fn criterion_1_vdp_eigenvalues() {
    let mut c = Criterion::new(1, "Van der Pol eigenvalues", Some(Duration::from_secs(1)));
    let mu: f64 = -0.1;
    let j = vdp(mu).jacobian(&[0.0, 0.0]).unwrap();
    let eig = eigenvalues(&j).unwrap();
    // lambda^2 - mu lambda + 1 = 0
    let half = mu / 2.0;
    let im = (1.0 - half * half).sqrt();
    let exact = [Complex64::new(half, -im), Complex64::new(half, im)];
    let printed = [Complex64::new(-0.0500, -0.9987), Complex64::new(-0.0500, 0.9987)];
    let vals = &eig.values;
    c.check(vals.len() == 2, "two eigenvalues");
    let err_exact = vals.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let err_printed = vals.iter().zip(&printed).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    c.check(err_exact <= 1e-9, format!("quadratic formula error {err_exact:.1e} <= 1e-9"));
    c.check(err_printed <= 1e-3, format!("published value error {err_printed:.1e} <= 1e-3"));
    c.finish();
}

#[test]
fn criterion_2_fhn_paper_row_hessian() {
    let mut c = Criterion::new(2, "FHN paper-row Hessian", Some(Duration::from_secs(1)));
    let f = fhn();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let h = f.hessians(&x, HessianMode::PaperRow).unwrap();
        let expected = Matrix::from_rows(&[[-2.0 * x[0], 0.0], [0.0, 0.0]]);
        let err = h[0]
            .data()
            .iter()
            .zip(expected.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    c.check(worst <= 1e-12, format!("max deviation from [[-2v, 0], [0, 0]] over 100 points {worst:.1e}"));
    c.finish();
}

#[test]
fn criterion_3_verdicts() {
    let mut c = Criterion::new(3, "verdict reproduction", Some(Duration::from_secs(10)));
    let search = SearchBox::cube(2, -5.0, 5.0, 9);
    let cfg = CriterionConfig {
        epsilon: 1e-6,
        hessian_mode: HessianMode::Tensor,
        direction_set: "positive-orthant".parse().unwrap(),
        ..Default::default()
    };
    for (name, field, expected) in [
        ("FHN", fhn(), VerdictClass::GloballyStablePerCriterion),
        ("VdP mu=-0.1", vdp(-0.1), VerdictClass::LocallyStableOnly),
        ("VdP mu=2", vdp(2.0), VerdictClass::UnstablePerCriterion),
    ] {
        let v = verdict(&field, &search, &cfg).unwrap();
        c.check(
            v.verdict == expected,
            format!("{name} -> {} (expected {})", v.verdict.as_str(), expected.as_str()),
        );
    }
    c.finish();
}

#[test]
fn criterion_4_equilibria() {
    let mut c = Criterion::new(4, "equilibrium finding", None);
    let search = SearchBox::cube(2, -5.0, 5.0, 9);
    let v = find_equilibria(&vdp(-0.1), &search).unwrap();
    c.check(
        v.len() == 1 && v[0].point.iter().all(|x| x.abs() <= 1e-10) && v[0].residual_norm < 1e-10,
        format!("VdP equilibria {:?}", v.iter().map(|e| e.point.clone()).collect::<Vec<_>>()),
    );
    let f = fhn();
    let e = find_equilibria(&f, &search).unwrap();
    c.check(
        e.len() == 1 && e[0].point.iter().all(|x| x.abs() <= 1e-10),
        format!("FHN equilibria {:?}", e.iter().map(|e| e.point.clone()).collect::<Vec<_>>()),
    );
    let analysis = verdict(&f, &search, &CriterionConfig::default()).unwrap();
    let report = AnalysisReport::new(benchmarks::FHN, &f, &search, &analysis);
    let note = report
        .notes
        .iter()
        .find(|n| n.contains("differs from the expected set") && n.contains("(3, 1)") && n.contains("(-3, -1)"));
    c.check(note.is_some(), "FHN report carries the three-equilibria discrepancy note");
    c.finish();
}

#[test]
fn criterion_5_basins() {
    let mut c = Criterion::new(5, "basin corroboration", Some(Duration::from_secs(60)));
    let th = FateThresholds::default();
    let opts = IntegrateOptions::default();
    let search = SearchBox::cube(2, -5.0, 5.0, 9);

    let f = fhn();
    let eqs = find_equilibria(&f, &search).unwrap();
    let map = basin_scan(&f, &GridSpec::square(2, -3.0, 3.0, 11), 200.0, &opts, &eqs, &th);
    let good = map
        .fates
        .iter()
        .filter(|fate| matches!(fate, Fate::Converged { equilibrium, distance } if eqs[*equilibrium].point == [0.0, 0.0] && *distance < 1e-3))
        .count();
    c.check(good == 121, format!("FHN 11x11 on [-3,3]^2: {good}/121 converged to (0,0)"));

    let v = vdp(-0.1);
    let eqs = find_equilibria(&v, &search).unwrap();
    let inner = simulate_fate(&v, &[0.5, 0.5], 500.0, &opts, &eqs, &th);
    c.check(matches!(inner, Fate::Converged { .. }), format!("VdP from (0.5,0.5), t_end 500: {}", inner.label()));
    let outer = simulate_fate(&v, &[4.0, 4.0], 200.0, &opts, &eqs, &th);
    c.check(matches!(outer, Fate::Diverged { .. }), format!("VdP from (4,4), t_end 200: {}", outer.label()));
    c.finish();
}

#[test]
fn criterion_6_property_suites() {
    let mut c = Criterion::new(6, "property suites", None);

    let result = runner(1000).run(
        &(expr(), -2.0f64..2.0, -2.0f64..2.0, 0usize..2),
        |(e, x, y, axis)| {
            prop_assume!(at(&e, x, y).is_some_and(|v| v.abs() < 1e4));
            let var = if axis == 0 { "x" } else { "y" };
            let sym = at(&differentiate(&e, var), x, y);
            prop_assume!(sym.is_some_and(|v| v.abs() < 1e4));
            let fd = central_difference(&e, x, y, axis);
            prop_assume!(fd.is_some());
            let (sym, fd) = (sym.unwrap(), fd.unwrap());
            prop_assert!((sym - fd).abs() / sym.abs().max(1.0) < 1e-6, "{} at ({}, {})", e, x, y);
            Ok(())
        },
    );
    c.check(result.is_ok(), format!("derivative vs finite difference, 1000 cases: {}", outcome(&result)));

    let result = runner(200).run(
        &(1usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec(-10.0f64..10.0, n * n))),
        |(n, data)| {
            let a = Matrix::from_row_major(n, n, data.clone());
            let vals = eigenvalues(&a).unwrap().values;
            let scale = a.frobenius_norm().max(1.0);
            let sum: Complex64 = vals.iter().sum();
            prop_assert!((sum - Complex64::new(a.trace(), 0.0)).norm() <= 1e-9 * scale);
            let det = DMatrix::from_row_slice(n, n, &data).determinant();
            let prod: Complex64 = vals.iter().product();
            prop_assert!((prod - Complex64::new(det, 0.0)).norm() <= 1e-9 * scale.powi(n as i32));
            for v in vals.iter().filter(|v| v.im != 0.0) {
                prop_assert!(vals.iter().any(|w| (w - v.conj()).norm() <= 1e-9 * scale));
            }
            let oracle: Vec<Complex<f64>> = DMatrix::from_row_slice(n, n, &data).complex_eigenvalues().iter().cloned().collect();
            for v in &vals {
                prop_assert!(oracle.iter().any(|w| (w - v).norm() <= 1e-6 * scale), "{} not among {:?}", v, oracle);
            }
            Ok(())
        },
    );
    c.check(result.is_ok(), format!("eigenvalue trace/det/conjugacy, 200 matrices: {}", outcome(&result)));

    let decay = VectorField::new(&parse_system("system d\nstate x\ndx/dt = -x\n").unwrap());
    let err = |h: f64| {
        let t = integrate(&decay, &[1.0], 1.0, &IntegrateOptions::rk4(h)).unwrap();
        (t.final_state()[0] - (-1.0f64).exp()).abs()
    };
    let factor = err(0.1) / err(0.05);
    c.check((12.0..=20.0).contains(&factor), format!("RK4 halving factor {factor:.2} in [12, 20]"));

    for (name, field) in [("FHN", fhn()), ("VdP", vdp(-0.1))] {
        let result = runner(500).run(&(-5.0f64..5.0, -5.0f64..5.0), |(x, y)| {
            let r = remainder_check(&field, &[x, y], &[0.0, 0.0]).unwrap();
            prop_assert!(r.holds, "{:?}", r);
            Ok(())
        });
        c.check(result.is_ok(), format!("{name} remainder bound, 500 points: {}", outcome(&result)));
    }

    let result = runner(50).run(
        &(
            (2usize..=4).prop_flat_map(|n| (Just(n), prop::collection::vec(-2.0f64..2.0, n * n))),
            any::<bool>(),
            0.1f64..1.0,
        ),
        |((n, data), stable, margin)| {
            let abscissa = DMatrix::from_row_slice(n, n, &data)
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            let shift = abscissa + if stable { margin } else { -margin };
            let mut a = data.clone();
            for i in 0..n {
                a[i * n + i] -= shift;
            }
            let shifted = DMatrix::from_row_slice(n, n, &a);
            prop_assume!(shifted.determinant().abs() > 1e-6);
            let hurwitz = shifted.complex_eigenvalues().iter().all(|z| z.re < 0.0);
            let field = VectorField::new(&parse_system(&linear_system(n, &a)).unwrap());
            let v = verdict(&field, &SearchBox::cube(n, -5.0, 5.0, 3), &CriterionConfig::default()).unwrap();
            let expected = if hurwitz {
                VerdictClass::GloballyStablePerCriterion
            } else {
                VerdictClass::UnstablePerCriterion
            };
            prop_assert_eq!(v.verdict, expected);
            let c2 = v.condition2.unwrap();
            prop_assert!(c2.s_values.iter().flatten().all(|s| *s == Some(0.0)));
            Ok(())
        },
    );
    c.check(result.is_ok(), format!("linear systems match the Hurwitz test with s = 0, 50 systems: {}", outcome(&result)));
    c.finish();
}

fn outcome<T: std::fmt::Debug>(r: &Result<(), T>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(e) => format!("{e:?}"),
    }
}

#[test]
fn criterion_7_determinism() {
    let mut c = Criterion::new(7, "deterministic reports", None);
    let sys = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("systems").join("vdp.sys");
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["first.json", "second.json"] {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hstab"))
            .args(["analyze", sys.to_str().unwrap(), "--param", "mu=-0.1", "--seed", "11", "--deterministic", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        c.check(status.code() == Some(1), format!("{name}: exit {:?}", status.code()));
        reports.push(std::fs::read(&path).unwrap_or_default());
    }
    c.check(!reports[0].is_empty() && reports[0] == reports[1], "two runs are byte-identical");
    c.finish();
}
