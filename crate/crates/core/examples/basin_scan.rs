//! Fate map of the Van der Pol oscillator with reversed damping, drawn as text.
//! `o` converged, `x` diverged, `?` undetermined.

use hessian_stability::equilibria::{find_equilibria, SearchBox};
use hessian_stability::simkit::{basin_scan, Fate, FateThresholds, GridSpec, IntegrateOptions};
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, VectorField};

fn main() {
    let field = VectorField::new(&parse_system(benchmarks::VDP).unwrap());
    let eqs = find_equilibria(&field, &SearchBox::cube(2, -5.0, 5.0, 9)).unwrap();
    let n = 21;
    let grid = GridSpec::square(2, -4.0, 4.0, n);
    let map = basin_scan(&field, &grid, 500.0, &IntegrateOptions::default(), &eqs, &FateThresholds::default());

    // Rows are v (first axis); print u upward.
    for j in (0..n).rev() {
        let line: String = (0..n)
            .map(|i| match map.fates[i * n + j] {
                Fate::Converged { .. } => 'o',
                Fate::Diverged { .. } => 'x',
                Fate::Undetermined { .. } => '?',
            })
            .collect();
        println!("{line}");
    }
    println!("{}", map.counts());
}
