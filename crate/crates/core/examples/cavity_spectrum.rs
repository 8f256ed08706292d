//! Transmission-like spectra |a|^2(δ_c) of the driven cavity with the array,
//! from the two-oscillator model and the site-resolved model, on and off
//! the dark-state condition δ = Δ.
//!
//!     cargo run --release --example cavity_spectrum

use arraycav::cavity_dynamics::{build_two_mode, spectrum_scan, FullModel};
use arraycav::config::{AtomDetuning, Config};
use arraycav::confined::projected_kernel_for;
use arraycav::lattice_sums::{cooperative_rates_reciprocal, cooperative_shift, RealSpaceOptions};

fn main() -> arraycav::Result<()> {
    let base = Config::default();
    let mut uniform = cooperative_rates_reciprocal([0.0, 0.0], base.lattice.a)?;
    let shift = cooperative_shift(base.lattice.a, &RealSpaceOptions::default())?;
    uniform.delta_k = Some(shift);
    let (kernel, _) = projected_kernel_for(&base, false, None)?;
    let bare_peak = (2.0 * base.drive.omega / base.cavity.kappa_c).powi(2);

    for detuning in [0.0, 5.0, 100.0] {
        let mut cfg = base.clone();
        cfg.drive.detuning = AtomDetuning::FromShift(detuning);
        let two = build_two_mode(&cfg, &uniform)?;
        let full = FullModel::new(&cfg, kernel.clone(), shift, uniform.total_decay())?;
        let (lo, hi, n) = (-30.0, 30.0, 13);
        let s2 = spectrum_scan(&two, lo, hi, n)?;
        let sf = full.spectrum(lo, hi, n)?;
        println!("\ndelta - Delta = {detuning} (g_eff = {:.3}), |a|^2 in units of the bare peak", two.g_eff);
        println!("{:>8} {:>13} {:>13}", "delta_c", "two-mode", "full");
        for (p, q) in s2.iter().zip(&sf) {
            println!("{:>8.2} {:>13.6e} {:>13.6e}", p.delta_c, p.abs_a2 / bare_peak, q.abs_a2 / bare_peak);
        }
    }
    Ok(())
}
