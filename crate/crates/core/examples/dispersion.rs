//! Cooperative decay and shift of the infinite array along Γ-X-M-Γ, by the
//! reciprocal (diffraction-order) and real-space routes.
//!
//!     cargo run --release --example dispersion [a]

use arraycav::lattice_sums::{
    cooperative_rates_hybrid, cooperative_rates_reciprocal, diffraction_orders, path_samples, symmetry_point, uniform_mode_decay,
    RealSpaceOptions, RealSpaceSum,
};
use arraycav::Q;

fn main() -> arraycav::Result<()> {
    let a: f64 = std::env::args().nth(1).map(|s| s.parse().expect("lattice constant")).unwrap_or(0.4);
    let uniform = cooperative_rates_reciprocal([0.0, 0.0], a)?;
    println!("a = {a}: gamma + Gamma_0 = {:.12} (closed form {:.12})", uniform.total_decay(), uniform_mode_decay(a));

    let propagating = diffraction_orders([0.0, 0.0], a, 3).into_iter().filter(|o| o.is_propagating()).count();
    println!("propagating orders at k = 0: {propagating}");

    let path: Vec<[f64; 2]> = ["G", "X", "M", "G"].iter().map(|p| symmetry_point(p, a).unwrap()).collect();
    let sum = RealSpaceSum::new(a, &RealSpaceOptions { radius: 120.0, ..Default::default() })?;
    println!("\n{:>8} {:>8} {:>13} {:>13}", "kx/q", "ky/q", "Gamma_k", "Delta_k");
    for k in path_samples(&path, 25)? {
        let row = match cooperative_rates_hybrid(k, &sum) {
            Ok(p) => format!("{:>13.6e} {:>13.6e}", p.gamma_k, p.delta_k.unwrap()),
            // Close to a grazing diffraction order the real-space shift converges slowly.
            Err(e) => format!("{:>13} {e}", "-"),
        };
        println!("{:>8.4} {:>8.4} {row}", k[0] / Q, k[1] / Q);
    }
    Ok(())
}
