//! Decay rate gamma, the estimates L and L' and the theorem conditions for
//! a few parameter choices. The conditions are advisory only.

use cda_fem::config::ConfigSource;
use cda_fem::diagnostics::TheoryReport;
use cda_fem::experiment::{theory_report, Discretization};

fn main() -> cda_fem::Result<()> {
    println!("{}", TheoryReport::csv_header());
    for (nu, mu, beta, n) in [(1e-2, 0.0, 1.0, 12), (1e-6, 0.05, 1.0, 12), (1e-6, 0.05, 500.0, 24), (1e-2, 0.05, 100.0, 48)] {
        let text = format!("nu = {nu}\nmu = {mu}\nbeta = {beta}\nn = {n}\nratio = 3\ndt = 1/40\nT = 1\n");
        let cfg = ConfigSource::parse(&text, "theory_check")?.resolve()?;
        let disc = Discretization::build(&cfg)?;
        println!("{}", theory_report(&disc, &cfg, None)?.csv_row());
    }
    Ok(())
}
