use cda_fem::config::ConfigSource;
use cda_fem::diagnostics::asymptotic_window_max;
use cda_fem::experiment::run_config;

/// Window maximum of the default nudged run (zero initial data) on the
/// `h = 1/12` mesh, frozen from the first validated run.
const FROZEN_WINDOW_MAX: f64 = 1.16459577226983246e-1;

#[test]
fn default_configuration_window_max_is_frozen() {
    let cfg = ConfigSource::parse("nu = 1e-6\nmu = 0.05\nn = 12\ndt = 1/40\nT = 8\n", "regression")
        .and_then(|s| s.resolve())
        .unwrap();
    let rec = run_config(&cfg).unwrap();
    let (a, b) = cfg.window();
    let w = asymptotic_window_max(&rec, a, b).unwrap();
    assert!((w - FROZEN_WINDOW_MAX).abs() <= 1e-12 * FROZEN_WINDOW_MAX, "{w:.17e}");
    assert_eq!(rec.rel_vel_errors[0], 1.0);
    assert!(rec.div_norms.iter().all(|&d| d <= 1e-8));
}
