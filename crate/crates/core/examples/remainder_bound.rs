//! First-order Taylor remainder about an equilibrium against its Lagrange bound.

use hessian_stability::criteria::remainder_check;
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, VectorField};

fn main() {
    for src in [benchmarks::FHN, benchmarks::VDP] {
        let field = VectorField::new(&parse_system(src).unwrap());
        println!("{}:", field.name());
        for x in [[0.1, 0.1], [1.0, -0.5], [3.0, 2.0], [-4.0, 4.0]] {
            let r = remainder_check(&field, &x, &[0.0, 0.0]).unwrap();
            for k in 0..r.actual.len() {
                println!(
                    "  X = {:?}  f{}: |R| = {:.6e}  bound = {:.6e}  M = {:.4}",
                    x,
                    k + 1,
                    r.actual[k].abs(),
                    r.bound[k],
                    r.m[k]
                );
            }
            println!("  holds: {}", r.holds);
        }
    }
}
