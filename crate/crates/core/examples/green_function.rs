//! Free-space dipole-dipole kernel in the array plane and its second
//! longitudinal derivative, with the on-site limits.
//!
//!     cargo run --example green_function

use arraycav::greens::{kernel_fs, kernel_fs_d2z, kernel_fs_momentum, D2Z_ORIGIN_RE};
use arraycav::Q;

fn main() -> arraycav::Result<()> {
    println!("on site: D = {}, Re D'' = {:.6} (-q^2/5 = {:.6})", kernel_fs([0.0, 0.0], 0.0), kernel_fs_d2z([0.0, 0.0]).re, D2Z_ORIGIN_RE);

    println!("\n{:>6} {:>14} {:>14} {:>14} {:>14}", "r", "Re D", "Im D", "Re D''", "Im D''");
    for r in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let d = kernel_fs([r, 0.0], 0.0);
        let d2 = kernel_fs_d2z([r, 0.0]);
        println!("{r:>6.2} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}", d.re, d.im, d2.re, d2.im);
    }

    // Plane-wave components: purely radiative inside the light cone.
    println!("\n{:>8} {:>14} {:>14}", "|k|/q", "Re D(k)", "Im D(k)");
    for kq in [0.0, 0.5, 0.9, 1.1, 2.0] {
        let d = kernel_fs_momentum([kq * Q, 0.0], 0.0)?;
        println!("{kq:>8.2} {:>14.6e} {:>14.6e}", d.re, d.im);
    }
    Ok(())
}
