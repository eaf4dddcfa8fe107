//! Temporal convergence of the three schemes on a viscous, unnudged
//! problem whose spatial error is well below the time error.

use cda_fem::config::ConfigSource;
use cda_fem::experiment::study_time;

fn main() {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    for scheme in ["euler_implicit", "bdf2_implicit", "bdf2_semi_implicit"] {
        let text = format!(
            "nu = 1e-2\nmu = 0\nbeta = 0\nn = 16\nratio = 2\ndt = 1/10\nT = 1\nwindow = 0,1\n\
             initial_data = exact_interpolant\nscheme = {scheme}\n"
        );
        let cfg = ConfigSource::parse(&text, "temporal_study").and_then(|s| s.resolve()).expect("config");
        match study_time(&cfg, &[0.1, 0.05, 0.025], jobs) {
            Ok(res) => {
                print!("{scheme:>20}:");
                for r in &res.rows {
                    print!("  dt={:.4} err={:.3e}", r.dt, r.window_max);
                }
                println!("  slope {:.3}", res.fit.slope);
            }
            Err(e) => eprintln!("{scheme}: {e}"),
        }
    }
}
