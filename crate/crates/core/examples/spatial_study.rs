//! Spatial convergence with grad-div stabilization for a large and a small
//! viscosity, with a short horizon to keep the example quick.

use cda_fem::config::ConfigSource;
use cda_fem::experiment::study_space;

fn main() {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    for nu in ["1e-2", "1e-6"] {
        let text = format!(
            "nu = {nu}\nmu = 0.05\nbeta = 1\nn = 8\nratio = 2\ndt = 1/80\nT = 2\nwindow = 1,2\n\
             initial_data = exact_interpolant\n"
        );
        let cfg = ConfigSource::parse(&text, "spatial_study").and_then(|s| s.resolve()).expect("config");
        match study_space(&cfg, &[4, 8, 16], jobs) {
            Ok(res) => {
                println!("nu = {nu}");
                for r in &res.rows {
                    println!("  n = {:3}  window max = {:.4e}", r.n, r.window_max);
                }
                println!("  slope {:.3}", res.fit.slope);
            }
            Err(e) => eprintln!("nu = {nu}: {e}"),
        }
    }
}
