//! Eigenvalues of dense matrices, from the 2x2 Van der Pol Jacobian to a
//! general 4x4 matrix.

use hessian_stability::denselin::{eigenvalues, sym_eigen, Matrix};
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, VectorField};

fn main() {
    let vdp = VectorField::new(&parse_system(benchmarks::VDP).unwrap());
    for mu in [-0.1, 0.0, 0.5, 2.0] {
        let j = vdp.with_param("mu", mu).unwrap().jacobian(&[0.0, 0.0]).unwrap();
        let eig = eigenvalues(&j).unwrap();
        let vals: Vec<String> = eig.values.iter().map(|z| format!("{:.6} {:+.6}i", z.re, z.im)).collect();
        println!("mu = {mu:>4}: {}  (residual {:.1e})", vals.join(", "), eig.residual);
    }

    let a = Matrix::from_rows(&[
        [4.0, -2.0, 1.0, 0.5],
        [3.0, 6.0, -4.0, 2.0],
        [2.0, 1.0, 8.0, -5.0],
        [-1.0, 0.5, 2.0, 3.0],
    ]);
    let eig = eigenvalues(&a).unwrap();
    println!("\n{a}");
    for z in &eig.values {
        println!("  {:.10} {:+.10}i", z.re, z.im);
    }
    println!("spectral abscissa {:.10}", eig.spectral_abscissa());

    let s = Matrix::from_rows(&[[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]);
    let (vals, _vecs) = sym_eigen(&s).unwrap();
    println!("\nsymmetric eigenvalues {vals:?}");
}
