//! Multi-start Newton search for equilibria, with local classification.

use hessian_stability::criteria::EXPECTED_MATCH_TOL;
use hessian_stability::equilibria::{compare_expected, find_equilibria, SearchBox};
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, VectorField};

const DUFFING: &str = "\
system duffing
param delta = 0.2
state x, y
dx/dt = y
dy/dt = x - x^3 - delta*y
";

fn main() {
    let search = SearchBox::cube(2, -5.0, 5.0, 9);
    for src in [DUFFING, benchmarks::FHN, benchmarks::VDP] {
        let sys = parse_system(src).unwrap();
        let field = VectorField::new(&sys);
        let eqs = find_equilibria(&field, &search).unwrap();
        println!("{}: {} equilibria", sys.name, eqs.len());
        for e in &eqs {
            let vals: Vec<String> = e.eigen.values.iter().map(|z| format!("{:.4}{:+.4}i", z.re, z.im)).collect();
            println!(
                "  {:?}  residual {:.1e}  {}  [{}]",
                e.point,
                e.residual_norm,
                e.local_class.as_str(),
                vals.join(", ")
            );
        }
        if let Some(note) = compare_expected(&eqs, &sys.expected_equilibria, EXPECTED_MATCH_TOL) {
            println!("  note: {note}");
        }
    }
}
