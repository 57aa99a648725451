//! Field samples, trajectories and an SVG portrait of the FitzHugh-Nagumo
//! system. Files go to the directory given as the first argument, or to a
//! fresh temporary directory.

use std::path::PathBuf;

use hessian_stability::equilibria::{find_equilibria, SearchBox};
use hessian_stability::report::{field_csv, render_svg, sample_field, trajectories_csv, write_atomic, Slice};
use hessian_stability::simkit::{integrate, IntegrateOptions};
use hessian_stability::sysdsl::parse_system;
use hessian_stability::{benchmarks, VectorField};

fn main() -> std::io::Result<()> {
    let field = VectorField::new(&parse_system(benchmarks::FHN).unwrap());
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => tempfile::tempdir()?.keep(),
    };
    std::fs::create_dir_all(&dir)?;

    let slice = Slice {
        x_axis: 0,
        y_axis: Some(1),
        x_range: (-4.0, 4.0),
        y_range: (-4.0, 4.0),
        base: vec![0.0, 0.0],
    };
    let samples = sample_field(&field, &slice, 20, 20);
    let starts = [[3.5, 3.5], [-3.5, 2.0], [2.0, -3.5], [-1.0, -1.0]];
    let trajectories: Vec<_> = starts
        .iter()
        .map(|ic| integrate(&field, ic, 30.0, &IntegrateOptions::default()).unwrap())
        .collect();
    let eqs = find_equilibria(&field, &SearchBox::cube(2, -4.0, 4.0, 9)).unwrap();
    let points: Vec<Vec<f64>> = eqs.into_iter().map(|e| e.point).collect();

    write_atomic(&dir.join("field.csv"), field_csv(&samples).as_bytes())?;
    write_atomic(&dir.join("trajectories.csv"), trajectories_csv(&trajectories, 2).as_bytes())?;
    let svg = render_svg(&slice, ("v", "w"), &samples, (20, 20), &trajectories, &points);
    write_atomic(&dir.join("portrait.svg"), svg.as_bytes())?;
    println!("wrote field.csv, trajectories.csv and portrait.svg to {}", dir.display());
    Ok(())
}
