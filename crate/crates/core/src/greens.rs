//! Free-space dyadic Green's function and the scalar dipole-dipole kernel.
//!
//! For two dipoles with common in-plane orientation `e` the interaction is
//! `D(r) = -i (3/2) γ λ e†·G(r)·e`. Its real part is the radiative exchange
//! rate and its imaginary part the dispersive exchange. Writing
//! `G = f(r) I + h(r) r̂r̂`, the contraction is `f + h |e·r̂|²`, and with
//! `x = q r` both pieces reduce to spherical Bessel functions:
//!
//! ```text
//! Re D = (3/4) [ (2 j0 - j2)/3 + p q² j2/x² ],   p = |e·r|²
//! ```
//!
//! which stays accurate at short range where the closed form cancels.

use crate::{Error, Result, C64, LAMBDA, Q};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// In-plane transition dipole orientation `e_d = ex e_x + ey e_y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dipole {
    /// `(e_x + i e_y)/√2`.
    Circular,
    X,
    Y,
}

impl Dipole {
    pub fn components(self) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Dipole::Circular => [C64::new(s, 0.0), C64::new(0.0, s)],
            Dipole::X => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            Dipole::Y => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }
    }

    /// `|e·v|²` for a real in-plane vector.
    pub fn projection_sq(self, v: [f64; 2]) -> f64 {
        let [ex, ey] = self.components();
        (ex * v[0] + ey * v[1]).norm_sqr()
    }

    pub fn name(self) -> &'static str {
        match self {
            Dipole::Circular => "circular",
            Dipole::X => "x",
            Dipole::Y => "y",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "circular" => Some(Dipole::Circular),
            "x" => Some(Dipole::X),
            "y" => Some(Dipole::Y),
            _ => None,
        }
    }
}

/// The free-space dyadic Green's function at displacement `r`.
pub fn dyadic_green_fs(r: [f64; 3]) -> Result<[[C64; 3]; 3]> {
    let rr = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if rr == 0.0 {
        return Err(Error::InvalidArgument(
            "dyadic Green's function is singular at zero displacement".into(),
        ));
    }
    let qr = Q * rr;
    let i = C64::i();
    let pre = (i * qr).exp() / (4.0 * PI * rr);
    let diag = pre * (1.0 + (i * qr - 1.0) / (qr * qr));
    let outer = pre * (-1.0 + (3.0 - 3.0 * i * qr) / (qr * qr));
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            g[a][b] = outer * (r[a] * r[b] / (rr * rr));
            if a == b {
                g[a][b] += diag;
            }
        }
    }
    Ok(g)
}

/// `j_n(x) / x^n` for n = 0..=3.
fn sph_bessel_scaled(n: usize, x: f64) -> f64 {
    if x < 4.0 {
        sph_bessel_scaled_series(n, x)
    } else {
        sph_bessel_scaled_direct(n, x)
    }
}

fn sph_bessel_scaled_series(n: usize, x: f64) -> f64 {
    // Σ_k (-x²/2)^k / (k! (2n+2k+1)!!)
    let mut dfact = 1.0;
    for m in (1..=2 * n + 1).step_by(2) {
        dfact *= m as f64;
    }
    let mut term = 1.0 / dfact;
    let mut sum = term;
    let y = -0.5 * x * x;
    for k in 1..40 {
        term *= y / (k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Upward recurrence, stable for x > n.
fn sph_bessel_scaled_direct(n: usize, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    let mut jm = s / x;
    if n == 0 {
        return jm;
    }
    let mut j = s / (x * x) - c / x;
    for l in 1..n {
        let next = (2 * l + 1) as f64 / x * j - jm;
        jm = j;
        j = next;
    }
    j / x.powi(n as i32)
}

/// Real part of the kernel: `(3/4)[A(x) + p q² B(x)]` with `A = (2 j0 - j2)/3`,
/// `B = j2/x²`.
fn kernel_real(rho2_plus_z2: f64, p: f64) -> f64 {
    let x = Q * rho2_plus_z2.sqrt();
    let j0 = sph_bessel_scaled(0, x);
    let j2s = sph_bessel_scaled(2, x);
    let a = (2.0 * j0 - j2s * x * x) / 3.0;
    0.75 * (a + p * Q * Q * j2s)
}

/// Scalar kernel `D_fs` between two dipoles of orientation `e` separated by
/// `(r_perp, dz)`. At zero separation it returns the `γ/2 + 0i` convention.
pub fn kernel_fs_with(r_perp: [f64; 2], dz: f64, e: Dipole) -> C64 {
    let rho2 = r_perp[0] * r_perp[0] + r_perp[1] * r_perp[1];
    let r2 = rho2 + dz * dz;
    if r2 == 0.0 {
        return C64::new(0.5, 0.0);
    }
    let p = e.projection_sq(r_perp);
    let re = kernel_real(r2, p);
    let x = Q * r2.sqrt();
    let i = C64::i();
    let ex = (i * x).exp();
    let phi = ex * (1.0 / x + i / (x * x) - 1.0 / (x * x * x));
    let psi = ex * (-1.0 / x.powi(3) - 3.0 * i / x.powi(4) + 3.0 / x.powi(5));
    // D = -i (3/4)[φ + p q² ψ]
    let im = -0.75 * (phi + psi * (p * Q * Q)).re;
    C64::new(re, im)
}

/// [`kernel_fs_with`] for the default circular polarization.
pub fn kernel_fs(r_perp: [f64; 2], dz: f64) -> C64 {
    kernel_fs_with(r_perp, dz, Dipole::Circular)
}

/// Re ∂²_z D at dz = 0 and vanishing in-plane separation, `-q²γ/5`.
pub const D2Z_ORIGIN_RE: f64 = -Q * Q / 5.0;

/// `∂²_z D_fs` at `dz = 0`. At the origin the real part takes its limit
/// `-q²/5` and the divergent imaginary part is set to zero.
pub fn kernel_fs_d2z_with(r_perp: [f64; 2], e: Dipole) -> C64 {
    let rho2 = r_perp[0] * r_perp[0] + r_perp[1] * r_perp[1];
    if rho2 == 0.0 {
        return C64::new(D2Z_ORIGIN_RE, 0.0);
    }
    let p = e.projection_sq(r_perp);
    let x = Q * rho2.sqrt();
    // ∂²_z F(r)|_{z=0} = F'(ρ)/ρ. For the real part A'/x = -(j0+j2)/3 + j2/x²
    // and B'/x = -j3/x³.
    let j0 = sph_bessel_scaled(0, x);
    let j2s = sph_bessel_scaled(2, x);
    let j3s = sph_bessel_scaled(3, x);
    let da = -(j0 + j2s * x * x) / 3.0 + j2s;
    let db = -j3s;
    let re = 0.75 * Q * Q * (da + p * Q * Q * db);
    let i = C64::i();
    let ex = (i * x).exp();
    let dphi = ex * (i / x - 2.0 / (x * x) - 3.0 * i / x.powi(3) + 3.0 / x.powi(4));
    let dpsi = ex * (-i / x.powi(3) + 6.0 / x.powi(4) + 15.0 * i / x.powi(5) - 15.0 / x.powi(6));
    let im = -0.75 * Q * Q * ((dphi + dpsi * (p * Q * Q)) / x).re;
    C64::new(re, im)
}

/// [`kernel_fs_d2z_with`] for circular polarization.
pub fn kernel_fs_d2z(r_perp: [f64; 2]) -> C64 {
    kernel_fs_d2z_with(r_perp, Dipole::Circular)
}

/// The contraction `e†·F·e` defined by `D'' = -i (3/4) q² e†·F·e`.
pub fn d2z_tensor_contraction(r_perp: [f64; 2], e: Dipole) -> C64 {
    kernel_fs_d2z_with(r_perp, e) * C64::new(0.0, 4.0 / (3.0 * Q * Q))
}

/// Longitudinal wavenumber `√(q² - k²)` on the outgoing/decaying branch.
pub fn k_z(k_perp_sq: f64) -> C64 {
    let d = Q * Q - k_perp_sq;
    if d >= 0.0 {
        C64::new(d.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-d).sqrt())
    }
}

/// Plane-wave component of the kernel at transverse wavevector `k_perp`,
/// so that `D(r, dz) = ∫ d²k/(2π)² e^{ik·r} kernel_fs_momentum(k, dz)`.
pub fn kernel_fs_momentum_with(k_perp: [f64; 2], dz: f64, e: Dipole) -> Result<C64> {
    let k2 = k_perp[0] * k_perp[0] + k_perp[1] * k_perp[1];
    if ((Q * Q - k2) / (Q * Q)).abs() < 1e-13 {
        return Err(Error::Grazing { order: (0, 0) });
    }
    let kz = k_z(k2);
    let weight = 1.0 - e.projection_sq(k_perp) / (Q * Q);
    let prop = (C64::i() * kz * dz.abs()).exp();
    Ok(1.5 * LAMBDA * weight * prop / (2.0 * kz))
}

pub fn kernel_fs_momentum(k_perp: [f64; 2], dz: f64) -> Result<C64> {
    kernel_fs_momentum_with(k_perp, dz, Dipole::Circular)
}
