//! One nudged run from zero initial data: the relative velocity error
//! starts at 1 and decays to the discretization plateau.
//!
//! RUST_LOG=info cargo run --release --example single_run

use cda_fem::config::ConfigSource;
use cda_fem::diagnostics::asymptotic_window_max;
use cda_fem::experiment::run_config;

fn main() {
    let cfg = ConfigSource::parse(
        "nu = 1e-6\nmu = 0.05\nbeta = 1\nn = 12\nratio = 3\ndt = 1/40\nT = 6\nscheme = bdf2_semi_implicit\n",
        "single_run",
    )
    .and_then(|s| s.resolve())
    .expect("valid configuration");
    let record = match run_config(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed after {} steps: {}", e.partial.len(), e.source);
            std::process::exit(2);
        }
    };
    for (t, e) in record.times.iter().zip(&record.rel_vel_errors).step_by(20) {
        println!("t = {t:6.3}  rel error = {e:.4e}");
    }
    let (ta, tb) = cfg.window();
    let plateau = asymptotic_window_max(&record, ta, tb).expect("window inside the run");
    println!("max error over [{ta}, {tb}] = {plateau:.4e} ({:.2?})", record.wall_time);
    let div = record.div_norms.iter().cloned().fold(0.0, f64::max);
    println!("max ||D u|| = {div:.2e}");
}
