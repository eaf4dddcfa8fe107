//! Steady Stokes problem with the manufactured velocity and pressure at a
//! fixed time: the velocity L2 error of Taylor-Hood P2/P1 falls as h^3.

use cda_fem::assembly::{assemble_constant_operators, assemble_load, l2_error_against_analytic};
use cda_fem::diagnostics::fit_slope;
use cda_fem::linsolve::{build_system, SaddleSolver, SolverSettings};
use cda_fem::mesh::{build_coarse_partition, build_uniform_mesh};
use cda_fem::mms::ManufacturedSolution;
use cda_fem::observer::{build_cell_average_observer, NudgingMatrixSpec};
use cda_fem::quadrature::QuadratureRule;
use cda_fem::space::build_mixed_space;

fn main() -> cda_fem::Result<()> {
    let sol = ManufacturedSolution;
    let t = 0.4;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [4, 8, 16, 32] {
        let mesh = build_uniform_mesh(n)?;
        let space = build_mixed_space(&mesh)?;
        let obs = build_cell_average_observer(&build_coarse_partition(&mesh, 1)?, &space)?;
        let ops = assemble_constant_operators(&mesh, &space, 1.0, 0.0, &NudgingMatrixSpec::new(0.0, obs)?)?;
        let rhs = assemble_load(&space, |p| {
            let lap = sol.velocity_laplacian(p[0], p[1], t);
            let gp = sol.pressure_gradient(p[0], p[1], t);
            [gp[0] - lap[0], gp[1] - lap[1]]
        });
        let sys = build_system(&ops, space.dirichlet_mask(), 0.0, None, rhs)?;
        let out = SaddleSolver::new(SolverSettings::default())?.solve(&sys)?;
        let err = l2_error_against_analytic(&space, &out.u, &sol, t, &QuadratureRule::degree8());
        println!("n = {n:3}  ||u - u_h|| = {err:.6e}  residual = {:.1e}", out.residual);
        hs.push(1.0 / n as f64);
        errs.push(err);
    }
    let fit = fit_slope(&hs, &errs)?;
    println!("observed order {:.3}", fit.slope);
    Ok(())
}
