//! The cavity-profile collective mode under the projected (non-confined)
//! kernel: removing the radiation that the mirrors confine leaves it
//! almost dark, for every waist.
//!
//!     cargo run --release --example dark_cavity_mode

use arraycav::config::{CavitySpec, LatticeSpec};
use arraycav::confined::{cavity_profile, confined_kernel_paraxial, fs_kernel, mode_decay_rate, projected_kernel};
use arraycav::greens::Dipole;
use arraycav::lattice_sums::uniform_mode_decay;

fn main() -> arraycav::Result<()> {
    let a = 0.5;
    let total = uniform_mode_decay(a);
    println!("{:>4} {:>7} {:>14} {:>14} {:>12}", "w", "n_side", "free space", "projected", "/(g+G)");
    for w in [2.0, 4.0, 8.0] {
        // Extent 8w so the Gaussian tail is not clipped by the array edge.
        let lattice = LatticeSpec::new(a, (8.0 * w / a) as usize)?;
        let profile = cavity_profile(&lattice, w)?;
        let fs = fs_kernel(&lattice, Dipole::Circular);
        let confined = confined_kernel_paraxial(&lattice, 0.0, CavitySpec::default_k_cut(w))?;
        let projected = projected_kernel(&fs, &confined)?;
        let free = mode_decay_rate(&profile, &fs);
        let rest = mode_decay_rate(&profile, &projected);
        println!("{w:>4} {:>7} {free:>14.6e} {rest:>14.6e} {:>12.4e}", lattice.n_side, rest / total);
    }
    Ok(())
}
