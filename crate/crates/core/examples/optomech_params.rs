//! Optomechanical parameters of the vibrating array: closed forms against
//! the numerical mode couplings on a fine lattice.
//!
//!     cargo run --release --example optomech_params

use arraycav::config::{AtomDetuning, Config, LatticeSpec};
use arraycav::lattice_sums::{cooperative_rates_reciprocal, RealSpaceOptions};
use arraycav::optomech::{closed_form_params, kappa_sc_consistency, SiteCouplings};
use arraycav::Q;
use std::f64::consts::PI;

fn main() -> arraycav::Result<()> {
    let mut cfg = Config::default();
    cfg.lattice = LatticeSpec::new(0.25, 128)?;
    cfg.cavity.w = 8.0;
    cfg.cavity.k_cut = 6.0 / (Q * cfg.cavity.w);
    cfg.drive.detuning = AtomDetuning::FromShift(100.0);
    let total = cooperative_rates_reciprocal([0.0, 0.0], cfg.lattice.a)?.total_decay();

    println!("{:>6} {:>11} {:>11} {:>11} {:>11} {:>11} {:>9}", "qz0/pi", "g", "kappa_sc", "trace", "g2", "-Im C00", "checks");
    for frac in [0.0, 0.125, 0.25, 0.375, 0.5] {
        cfg.cavity.z0 = frac * PI / Q;
        let couplings = SiteCouplings::build(&cfg, None, &RealSpaceOptions::default())?;
        let params = closed_form_params(&cfg, couplings.grid().uniform_shift(), total)?;
        let report = kappa_sc_consistency(&couplings, &params);
        println!(
            "{frac:>6.3} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>9}",
            params.g,
            params.kappa_sc,
            report.numerical.kappa_sc_trace,
            params.g2,
            report.numerical.g2,
            if report.all_pass() { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
