//! Driven cavity with the moving array: the full multimode mean-field
//! equations against the reduced single-mode model.
//!
//!     cargo run --release --example optomech_dynamics

use arraycav::config::{AtomDetuning, Config, LatticeSpec};
use arraycav::lattice_sums::{cooperative_rates_reciprocal, RealSpaceOptions};
use arraycav::ode::Tolerances;
use arraycav::om_dynamics::{evolve_multimode, evolve_reduced, standard_model_report, OmDrive, OmState};
use arraycav::optomech::{closed_form_params, mechanical_basis, OmParams, SiteCouplings};
use arraycav::output::to_json;
use arraycav::Q;

fn main() -> arraycav::Result<()> {
    let mut cfg = Config::default();
    cfg.lattice = LatticeSpec::new(0.5, 22)?;
    cfg.cavity.w = 2.0;
    cfg.cavity.k_cut = 6.0 / (Q * cfg.cavity.w);
    cfg.drive.detuning = AtomDetuning::FromShift(100.0);
    cfg.drive.omega = 0.1;

    let couplings = SiteCouplings::build(&cfg, None, &RealSpaceOptions::default())?;
    let total = cooperative_rates_reciprocal([0.0, 0.0], cfg.lattice.a)?.total_decay();
    let params = closed_form_params(&cfg, couplings.grid().uniform_shift(), total)?;
    // Drive the shifted cavity resonance.
    cfg.drive.delta_c = params.delta_ac;
    let c = couplings.coupling_matrix_c(&mechanical_basis(&cfg.lattice, cfg.cavity.w, 0)?)?;
    let (kappa_trace, _, _) = couplings.trace_rates();
    let reduced = OmParams { kappa_sc: kappa_trace, g2: -c[(0, 0)].im, ..params.clone() };

    let drive = OmDrive::from_config(&cfg);
    let tol = Tolerances::new(1e-10, 1e-14);
    let multi = evolve_multimode(&params, &drive, &c, &OmState::empty(c.nrows()), 40.0, 4.0, &tol)?;
    let single = evolve_reduced(&reduced, &drive, &OmState::empty(1), 40.0, 4.0, &tol)?;

    println!("{} mechanical modes", c.nrows());
    println!("{:>6} {:>13} {:>13} {:>13} {:>13}", "t", "|a| multi", "|a| reduced", "difference", "Im b0");
    for (m, r) in multi.iter().zip(&single) {
        println!("{:>6.1} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}", m.t, m.a.norm(), r.a.norm(), (m.a - r.a).norm(), m.b[0].im);
    }
    println!("\n{}", to_json(&standard_model_report(&params, drive.kappa_c)?)?);
    Ok(())
}
