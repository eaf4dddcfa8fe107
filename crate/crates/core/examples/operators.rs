//! Assembles the constant operators on a small mesh and checks a few of
//! their structural properties numerically.

use cda_fem::assembly::{assemble_constant_operators, assemble_convection};
use cda_fem::mesh::{build_coarse_partition, build_uniform_mesh};
use cda_fem::mms::{ManufacturedSolution, VelocityField};
use cda_fem::observer::{build_cell_average_observer, NudgingMatrixSpec};
use cda_fem::space::build_mixed_space;

fn main() -> cda_fem::Result<()> {
    let mesh = build_uniform_mesh(8)?;
    let space = build_mixed_space(&mesh)?;
    let part = build_coarse_partition(&mesh, 2)?;
    let obs = build_cell_average_observer(&part, &space)?;
    let ops = assemble_constant_operators(&mesh, &space, 1e-3, 0.05, &NudgingMatrixSpec::new(1.0, obs)?)?;

    println!("velocity dofs {}, pressure dofs {}", space.n_vel(), space.n_pres());
    for (name, m) in [("M", &ops.m), ("A", &ops.a), ("G", &ops.g), ("B", &ops.b)] {
        println!("{name}: nnz {:6}, max asymmetry {:.2e}", m.nnz(), m.asymmetry());
    }

    let ones_x: Vec<f64> = (0..space.n_vel()).map(|i| if i < space.n_nodes() { 1.0 } else { 0.0 }).collect();
    println!("int 1 over the square (x-component mass) = {:.15}", ops.m.bilinear(&ones_x, &ones_x));
    println!("sum of pressure mass vector = {:.15}", ops.pressure_mass.iter().sum::<f64>());

    let exact = ManufacturedSolution;
    let w = space.interpolate_velocity(|p| exact.velocity(p[0], p[1], 0.0));
    let n = assemble_convection(&space, &w)?;
    let s = cda_fem::sparse::SparseMatrix::linear_combination(&[(1.0, &n), (1.0, &n.transpose())])?;
    println!(
        "convection: |N + N^T| / |N| = {:.2e}",
        s.frobenius_norm() / n.frobenius_norm()
    );
    Ok(())
}
