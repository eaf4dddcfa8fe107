//! Observes the manufactured velocity with both coarse observers, compares
//! the observation of the exact field with that of its fine interpolant,
//! and writes one observation file.

use cda_fem::assembly::l2_error_and_norm;
use cda_fem::mesh::{build_coarse_partition, build_uniform_mesh};
use cda_fem::mms::{ManufacturedSolution, VelocityField};
use cda_fem::observer::{build_observer, ObserverKind};
use cda_fem::quadrature::QuadratureRule;
use cda_fem::space::build_mixed_space;

fn main() -> cda_fem::Result<()> {
    let exact = ManufacturedSolution;
    let t = 0.3;
    let mesh = build_uniform_mesh(48)?;
    let space = build_mixed_space(&mesh)?;
    let u_h = space.interpolate_velocity(|p| exact.velocity(p[0], p[1], t));
    let zero = vec![0.0; space.n_vel()];
    let (_, norm) = l2_error_and_norm(&space, &zero, &exact, t, &QuadratureRule::degree8());
    println!("||u(t)|| = {norm:.6}");
    println!("{:>16} {:>8} {:>8} {:>12} {:>14}", "observer", "H", "n_obs", "||I_H u||", "|I_H(u - u_h)|");
    for kind in [ObserverKind::CellAverage, ObserverKind::CoarseLagrange] {
        for ratio in [12, 6, 3] {
            let part = build_coarse_partition(&mesh, ratio)?;
            let obs = build_observer(kind, &part, &space)?;
            let data = obs.observe_exact(&exact, t);
            let from_h = obs.observe_discrete(&u_h);
            let mass = obs.coarse_mass();
            let diff: Vec<f64> = data.iter().zip(&from_h).map(|(a, b)| a - b).collect();
            println!(
                "{:>16} {:>8.5} {:>8} {:>12.6} {:>14.3e}",
                kind.to_string(),
                part.h_coarse(),
                obs.n_obs(),
                mass.bilinear(&data, &data).sqrt(),
                mass.bilinear(&diff, &diff).sqrt()
            );
            if kind == ObserverKind::CellAverage && ratio == 6 {
                obs.write_observations_csv("observations.csv", &data)?;
            }
        }
    }
    println!("wrote observations.csv");
    Ok(())
}
