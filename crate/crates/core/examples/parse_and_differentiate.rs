//! Parse a system file, then print its Jacobian and both Hessian layouts.

use hessian_stability::sysdsl::{differentiate, hessian_sym, jacobian_sym, parse_expr, parse_system};
use hessian_stability::{benchmarks, HessianMode};

fn main() {
    let sys = parse_system(benchmarks::FHN).expect("bundled system parses");
    println!("{sys}");

    let jac = jacobian_sym(&sys);
    println!("Jacobian:");
    for i in 0..jac.rows {
        let row: Vec<String> = (0..jac.cols).map(|j| jac.get(i, j).to_string()).collect();
        println!("  [{}]", row.join(", "));
    }

    for mode in [HessianMode::Tensor, HessianMode::PaperRow] {
        println!("Hessians ({}):", mode.as_str());
        for (k, h) in hessian_sym(&sys, mode).matrices.iter().enumerate() {
            let rows: Vec<String> = (0..h.rows)
                .map(|i| {
                    let row: Vec<String> = (0..h.cols).map(|j| h.get(i, j).to_string()).collect();
                    format!("[{}]", row.join(", "))
                })
                .collect();
            println!("  H{}: {}", k + 1, rows.join(" "));
        }
    }

    let e = parse_expr("x^2 * sin(y) / (1 + exp(-x))").unwrap();
    println!("d/dx {e} = {}", differentiate(&e, "x"));
    println!("d/dy {e} = {}", differentiate(&e, "y"));
}
