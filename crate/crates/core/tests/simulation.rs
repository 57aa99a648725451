use hessian_stability::equilibria::{find_equilibria, norm, SearchBox};
use hessian_stability::simkit::{
    basin_scan, integrate, simulate_fate, Fate, FateThresholds, GridSpec, IntegrateOptions,
};
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, VectorField};

fn fhn() -> VectorField {
    VectorField::new(&parse_system(benchmarks::FHN).unwrap())
}

fn vdp() -> VectorField {
    VectorField::new(&parse_system(benchmarks::VDP).unwrap())
}

#[test]
fn adaptive_and_fixed_step_agree() {
    let tol = 1e-9;
    for (field, ics) in [
        (fhn(), vec![[2.0, 2.0], [-3.0, 1.0], [0.5, -2.5]]),
        (vdp(), vec![[0.5, 0.0], [1.0, 1.0], [-1.5, 0.5]]),
    ] {
        for ic in ics {
            let a = integrate(&field, &ic, 10.0, &IntegrateOptions::rkf45(tol)).unwrap();
            let b = integrate(&field, &ic, 10.0, &IntegrateOptions::rk4(1e-3)).unwrap();
            let gap: Vec<f64> = a.final_state().iter().zip(b.final_state()).map(|(p, q)| p - q).collect();
            assert!(norm(&gap) <= 10.0 * tol, "{} from {:?}: gap {:e}", field.name(), ic, norm(&gap));
        }
    }
}

#[test]
fn convergence_persists_when_the_horizon_doubles() {
    let th = FateThresholds::default();
    let opts = IntegrateOptions::default();
    for (field, t_end, ics) in [
        (fhn(), 200.0, vec![[2.0, 2.0], [-3.0, 3.0], [1.0, -1.0]]),
        (vdp(), 500.0, vec![[0.5, 0.5], [-1.0, 0.2], [0.0, -1.0]]),
    ] {
        let eqs = find_equilibria(&field, &SearchBox::cube(2, -5.0, 5.0, 9)).unwrap();
        for ic in ics {
            let short = simulate_fate(&field, &ic, t_end, &opts, &eqs, &th);
            assert!(matches!(short, Fate::Converged { .. }), "{short:?}");
            let long = simulate_fate(&field, &ic, 2.0 * t_end, &opts, &eqs, &th);
            assert!(matches!(long, Fate::Converged { .. }), "{long:?}");
        }
    }
}

#[test]
fn scans_are_deterministic_and_ordered() {
    let field = vdp();
    let eqs = find_equilibria(&field, &SearchBox::cube(2, -5.0, 5.0, 9)).unwrap();
    let th = FateThresholds::default();
    let opts = IntegrateOptions::default();
    let grid = GridSpec::square(2, -4.0, 4.0, 5);
    let a = basin_scan(&field, &grid, 100.0, &opts, &eqs, &th);
    let b = basin_scan(&field, &grid, 100.0, &opts, &eqs, &th);
    assert_eq!(a, b);
    assert_eq!(a.fates.len(), 25);
    let sequential: Vec<Fate> = grid
        .nodes()
        .iter()
        .map(|ic| simulate_fate(&field, ic, 100.0, &opts, &eqs, &th))
        .collect();
    assert_eq!(a.fates, sequential);
}

#[test]
fn scan_records_failures_without_aborting() {
    // ln(x) is undefined for the left half of the grid.
    let field = VectorField::new(&parse_system("system l\nstate x\ndx/dt = -ln(x)\n").unwrap());
    let eqs = find_equilibria(&field, &SearchBox::cube(1, 0.1, 3.0, 9)).unwrap();
    let grid = GridSpec::square(1, -1.0, 2.0, 4);
    let map = basin_scan(&field, &grid, 50.0, &IntegrateOptions::default(), &eqs, &FateThresholds::default());
    assert_eq!(map.fates.len(), 4);
    assert!(matches!(&map.fates[0], Fate::Undetermined { note: Some(_), .. }));
    assert!(matches!(&map.fates[1], Fate::Undetermined { note: Some(_), .. }));
    assert!(matches!(map.fates[2], Fate::Converged { equilibrium: 0, .. }));
    assert!(matches!(map.fates[3], Fate::Converged { equilibrium: 0, .. }));
}
