//! Full criterion on the bundled systems and a sweep over the Van der Pol
//! damping parameter.

use hessian_stability::criteria::{verdict, CriterionConfig, DirectionSet};
use hessian_stability::equilibria::SearchBox;
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, HessianMode, VectorField};

fn main() {
    let search = SearchBox::cube(2, -5.0, 5.0, 9);
    let cfg = CriterionConfig::default();
    let fhn = VectorField::new(&parse_system(benchmarks::FHN).unwrap());
    let vdp = VectorField::new(&parse_system(benchmarks::VDP).unwrap());

    let v = verdict(&fhn, &search, &cfg).unwrap();
    println!("fhn: {}", v.verdict.as_str());
    for note in &v.notes {
        println!("  note: {note}");
    }

    println!("\nVan der Pol sweep (tensor layout, positive-orthant directions):");
    for mu in [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 2.0] {
        let field = vdp.with_param("mu", mu).unwrap();
        let v = verdict(&field, &search, &cfg).unwrap();
        let c2 = v.condition2.as_ref().unwrap();
        let tail = c2.s_max_per_radius.last().copied().flatten().unwrap_or(f64::NAN);
        println!("  mu = {mu:>5}: {:<30} s at r = {:.0}: {tail:.3e}", v.verdict.as_str(), c2.radii.last().unwrap());
    }

    println!("\nVan der Pol mu = -0.1 under each reading:");
    let field = vdp.with_param("mu", -0.1).unwrap();
    for mode in [HessianMode::Tensor, HessianMode::PaperRow] {
        for set in [DirectionSet::PositiveOrthant, DirectionSet::Sphere] {
            let cfg = CriterionConfig {
                hessian_mode: mode,
                direction_set: set,
                ..Default::default()
            };
            let v = verdict(&field, &search, &cfg).unwrap();
            println!("  {:<9} {:<16} {}", mode.as_str(), set.as_str(), v.verdict.as_str());
        }
    }
}
