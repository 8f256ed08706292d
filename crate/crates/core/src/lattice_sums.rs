//! Collective-mode dispersion of the infinite square array.
//!
//! A Bloch mode of in-plane wavevector `k` decays at `γ + Γ_k` and is shifted
//! by `Δ_k`, with
//!
//! ```text
//! Γ_k = Σ_{n≠0} 2 Re D(r_n) e^{-ik·r_n},   Δ_k = Σ_{n≠0} Im D(r_n) e^{-ik·r_n}.
//! ```
//!
//! Two independent routes are provided. The reciprocal route resums the
//! decay exactly over the propagating diffraction orders. The real-space
//! route sums the kernel directly with a smooth radial taper and an
//! exponential damping `e^{-εr}`, extrapolating `ε → 0` from three values.
//! It is the only route for `Δ_k`.

use crate::fft2::Fft2;
use crate::greens::{kernel_fs_with, Dipole};
use crate::{Error, Result, C64, LAMBDA, Q};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Reciprocal,
    RealSpace,
    /// Decay from the reciprocal route, shift from the real-space route.
    Hybrid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Reciprocal => "reciprocal",
            Method::RealSpace => "real_space",
            Method::Hybrid => "hybrid",
        }
    }
}

/// One sample of the band structure. `k_perp` is absolute (rad/λ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub k_perp: [f64; 2],
    pub gamma_k: f64,
    pub delta_k: Option<f64>,
    pub method: Method,
}

impl DispersionPoint {
    /// Total collective decay `γ + Γ_k`.
    pub fn total_decay(&self) -> f64 {
        1.0 + self.gamma_k
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffractionOrder {
    pub m: (i32, i32),
    pub q_vec: [f64; 2],
    pub k_z: C64,
}

impl DiffractionOrder {
    pub fn is_propagating(&self) -> bool {
        self.k_z.im == 0.0 && self.k_z.re > 0.0
    }
}

/// Relative distance of `|k|²` from `q²` below which an order counts as grazing.
const GRAZING_TOL: f64 = 1e-10;

/// All orders `|m_x|, |m_y| ≤ m_max` for the Bloch wavevector `k_perp`.
pub fn diffraction_orders(k_perp: [f64; 2], a: f64, m_max: i32) -> Vec<DiffractionOrder> {
    let g = 2.0 * PI / a;
    let mut out = Vec::with_capacity(((2 * m_max + 1) * (2 * m_max + 1)) as usize);
    for mx in -m_max..=m_max {
        for my in -m_max..=m_max {
            let q_vec = [g * mx as f64, g * my as f64];
            let kx = k_perp[0] + q_vec[0];
            let ky = k_perp[1] + q_vec[1];
            out.push(DiffractionOrder { m: (mx, my), q_vec, k_z: crate::greens::k_z(kx * kx + ky * ky) });
        }
    }
    out
}

/// Decay `Γ_k` from the propagating orders:
/// `γ + Γ_k = (3λ/(2a²)) Σ (1 - |(k+Q)·e|²/q²)/k_z`.
pub fn cooperative_rates_reciprocal(k_perp: [f64; 2], a: f64) -> Result<DispersionPoint> {
    cooperative_rates_reciprocal_with(k_perp, a, Dipole::Circular)
}

pub fn cooperative_rates_reciprocal_with(k_perp: [f64; 2], a: f64, e: Dipole) -> Result<DispersionPoint> {
    check_spacing(a)?;
    let g = 2.0 * PI / a;
    // Orders that can propagate satisfy |k + Q| < q.
    let kmag = (k_perp[0] * k_perp[0] + k_perp[1] * k_perp[1]).sqrt();
    let m_max = ((kmag + Q) / g).ceil() as i32 + 1;
    let mut total = 0.0;
    for order in diffraction_orders(k_perp, a, m_max) {
        let v = [k_perp[0] + order.q_vec[0], k_perp[1] + order.q_vec[1]];
        let kk = v[0] * v[0] + v[1] * v[1];
        if ((Q * Q - kk) / (Q * Q)).abs() < GRAZING_TOL {
            return Err(Error::Grazing { order: order.m });
        }
        if order.is_propagating() {
            total += (1.0 - e.projection_sq(v) / (Q * Q)) / order.k_z.re;
        }
    }
    let decay = 3.0 * LAMBDA / (2.0 * a * a) * total;
    Ok(DispersionPoint { k_perp, gamma_k: decay - 1.0, delta_k: None, method: Method::Reciprocal })
}

fn check_spacing(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lattice constant {a} outside (0, 1]")))
    }
}

/// Controls for the real-space route.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSpaceOptions {
    /// Cutoff radius in λ.
    pub radius: f64,
    /// Damping constants, extrapolated to zero.
    pub eps: [f64; 3],
    /// Width of the radial taper as a fraction of the radius.
    pub taper: f64,
    /// Largest accepted extrapolation residual (units γ).
    pub tolerance: f64,
    pub dipole: Dipole,
}

impl Default for RealSpaceOptions {
    fn default() -> Self {
        RealSpaceOptions { radius: 60.0, eps: [0.02, 0.04, 0.08], taper: 0.5, tolerance: 1e-2, dipole: Dipole::Circular }
    }
}

/// C∞ step rising from 0 at t ≤ 0 to 1 at t ≥ 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = (-1.0 / t).exp();
    let g = (-1.0 / (1.0 - t)).exp();
    f / (f + g)
}

/// Lagrange weights extrapolating samples at `eps` to `ε = 0`.
fn extrapolation_weights(eps: &[f64]) -> Vec<f64> {
    (0..eps.len())
        .map(|i| {
            (0..eps.len())
                .filter(|&j| j != i)
                .map(|j| eps[j] / (eps[j] - eps[i]))
                .product()
        })
        .collect()
}

struct Term {
    r: [f64; 2],
    /// Tapered kernel times the damping factors for each ε, doubled for the
    /// inversion partner.
    d: [C64; 3],
}

/// Precomputed real-space lattice sum for one lattice constant; evaluates
/// `Γ_k`, `Δ_k` at arbitrary `k` by a cosine sum over half the lattice.
pub struct RealSpaceSum {
    a: f64,
    terms: Vec<Term>,
    w2: [f64; 3],
    w1: [f64; 2],
    opts: RealSpaceOptions,
}

impl RealSpaceSum {
    pub fn new(a: f64, opts: &RealSpaceOptions) -> Result<Self> {
        check_spacing(a)?;
        if !(opts.radius >= 20.0 * LAMBDA) {
            return Err(Error::InvalidArgument(format!("cutoff radius {} below 20λ", opts.radius)));
        }
        if !(opts.taper > 0.0 && opts.taper <= 1.0) {
            return Err(Error::InvalidArgument("taper fraction must lie in (0, 1]".into()));
        }
        let e = opts.eps;
        if !(e[0] > 0.0 && e[0] < e[1] && e[1] < e[2]) {
            return Err(Error::InvalidArgument("damping constants must be positive and increasing".into()));
        }
        let n = (opts.radius / a).floor() as i64 + 1;
        // Half lattice: i > 0, or i = 0 and j > 0.
        let mut sites = Vec::new();
        for i in 0..=n {
            let j0 = if i == 0 { 1 } else { -n };
            for j in j0..=n {
                let r = [i as f64 * a, j as f64 * a];
                let rr = (r[0] * r[0] + r[1] * r[1]).sqrt();
                if rr < opts.radius {
                    sites.push((r, rr));
                }
            }
        }
        let dipole = opts.dipole;
        let terms = sites
            .par_iter()
            .map(|&(r, rr)| {
                let w = smooth_step((opts.radius - rr) / (opts.taper * opts.radius));
                let d = kernel_fs_with(r, 0.0, dipole) * (2.0 * w);
                Term { r, d: [d * (-e[0] * rr).exp(), d * (-e[1] * rr).exp(), d * (-e[2] * rr).exp()] }
            })
            .collect();
        let w2 = extrapolation_weights(&e);
        let w1 = extrapolation_weights(&e[..2]);
        Ok(RealSpaceSum { a, terms, w2: [w2[0], w2[1], w2[2]], w1: [w1[0], w1[1]], opts: opts.clone() })
    }

    pub fn lattice_constant(&self) -> f64 {
        self.a
    }

    /// Extrapolated `S = Σ D e^{-ik·r}` and the extrapolation residuals of
    /// `Γ_k = 2 Re S` and `Δ_k = Im S`.
    pub fn sum(&self, k: [f64; 2]) -> (C64, [f64; 2]) {
        let mut s = [C64::new(0.0, 0.0); 3];
        for t in &self.terms {
            let c = (k[0] * t.r[0] + k[1] * t.r[1]).cos();
            s[0] += t.d[0] * c;
            s[1] += t.d[1] * c;
            s[2] += t.d[2] * c;
        }
        let rich = s[0] * self.w2[0] + s[1] * self.w2[1] + s[2] * self.w2[2];
        let first = s[0] * self.w1[0] + s[1] * self.w1[1];
        let d = rich - first;
        (rich, [2.0 * d.re.abs(), d.im.abs()])
    }

    /// Real-space point; fails when the residual exceeds the tolerance.
    pub fn point(&self, k: [f64; 2]) -> Result<DispersionPoint> {
        let (s, [rg, rd]) = self.sum(k);
        let residual = rg.max(rd);
        if !(residual <= self.opts.tolerance) {
            return Err(Error::NonConvergence { residual, tolerance: self.opts.tolerance });
        }
        Ok(DispersionPoint { k_perp: k, gamma_k: 2.0 * s.re, delta_k: Some(s.im), method: Method::RealSpace })
    }

    /// `Δ_k` on the Brillouin grid `k = 2π (m_x, m_y)/(n_side a)` of a finite
    /// `n_side × n_side` array, index `m_x n_side + m_y`. All points come from
    /// a single FFT of the tapered real-space sum; no residual check is made.
    pub fn shift_grid(&self, n_side: usize) -> Vec<f64> {
        let reach = self.terms.iter().map(|t| (t.r[0].abs().max(t.r[1].abs()) / self.a).round() as usize).max().unwrap_or(0);
        let m = n_side * (2 * reach + 1).div_ceil(n_side);
        let mut buf = vec![C64::new(0.0, 0.0); m * m];
        let wrap = |v: f64| (v / self.a).round() as i64;
        for t in &self.terms {
            let d = (t.d[0] * self.w2[0] + t.d[1] * self.w2[1] + t.d[2] * self.w2[2]) * 0.5;
            let (i, j) = (wrap(t.r[0]), wrap(t.r[1]));
            for (x, y) in [(i, j), (-i, -j)] {
                buf[x.rem_euclid(m as i64) as usize * m + y.rem_euclid(m as i64) as usize] += d;
            }
        }
        Fft2::new(m).forward(&mut buf);
        let step = m / n_side;
        (0..n_side * n_side).map(|idx| buf[(idx / n_side) * step * m + (idx % n_side) * step].im).collect()
    }
}

/// Real-space route at one wavevector.
pub fn cooperative_rates_real_space(k_perp: [f64; 2], a: f64, opts: &RealSpaceOptions) -> Result<DispersionPoint> {
    RealSpaceSum::new(a, opts)?.point(k_perp)
}

/// Decay from the reciprocal route and shift from `sum`.
pub fn cooperative_rates_hybrid(k_perp: [f64; 2], sum: &RealSpaceSum) -> Result<DispersionPoint> {
    let rec = cooperative_rates_reciprocal_with(k_perp, sum.a, sum.opts.dipole)?;
    let (s, [_, residual]) = sum.sum(k_perp);
    if !(residual <= sum.opts.tolerance) {
        return Err(Error::NonConvergence { residual, tolerance: sum.opts.tolerance });
    }
    Ok(DispersionPoint { k_perp, gamma_k: rec.gamma_k, delta_k: Some(s.im), method: Method::Hybrid })
}

/// Shift of the uniform (`k = 0`) mode.
pub fn cooperative_shift(a: f64, opts: &RealSpaceOptions) -> Result<f64> {
    Ok(cooperative_rates_real_space([0.0, 0.0], a, opts)?.delta_k.unwrap_or(0.0))
}

/// High-symmetry points of the square Brillouin zone for spacing `a`.
pub fn symmetry_point(name: &str, a: f64) -> Option<[f64; 2]> {
    let e = PI / a;
    match name {
        "G" | "Γ" | "Gamma" => Some([0.0, 0.0]),
        "X" => Some([e, 0.0]),
        "Y" => Some([0.0, e]),
        "M" => Some([e, e]),
        _ => None,
    }
}

/// Samples a piecewise-linear path evenly in arc length; the first and last
/// samples are exactly the first and last waypoints.
pub fn path_samples(path: &[[f64; 2]], samples: usize) -> Result<Vec<[f64; 2]>> {
    if path.len() < 2 || samples < 2 {
        return Err(Error::InvalidArgument("a path needs at least two waypoints and two samples".into()));
    }
    let seg: Vec<f64> = path.windows(2).map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt()).collect();
    let total: f64 = seg.iter().sum();
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        if i + 1 == samples {
            out.push(*path.last().unwrap());
            continue;
        }
        let mut s = total * i as f64 / (samples - 1) as f64;
        let mut idx = 0;
        while idx + 1 < seg.len() && s > seg[idx] {
            s -= seg[idx];
            idx += 1;
        }
        let t = if seg[idx] > 0.0 { (s / seg[idx]).min(1.0) } else { 0.0 };
        let p = path[idx];
        let q = path[idx + 1];
        out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
    }
    Ok(out)
}

/// Band structure along `path`, decay from the reciprocal route and shift
/// from the real-space route. Samples are evaluated in parallel; the order
/// of the result follows the path.
pub fn dispersion_curve(path: &[[f64; 2]], samples: usize, a: f64, opts: &RealSpaceOptions) -> Result<Vec<DispersionPoint>> {
    let ks = path_samples(path, samples)?;
    let sum = RealSpaceSum::new(a, opts)?;
    ks.par_iter().map(|&k| cooperative_rates_hybrid(k, &sum)).collect()
}

/// `γ + Γ_0 = 3λ²γ/(4πa²)`.
pub fn uniform_mode_decay(a: f64) -> f64 {
    3.0 / (4.0 * PI * a * a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_classification() {
        let o = diffraction_orders([0.0, 0.0], 0.5, 2);
        let prop: Vec<_> = o.iter().filter(|d| d.is_propagating()).collect();
        assert_eq!(prop.len(), 1);
        assert_eq!(prop[0].m, (0, 0));
        assert_eq!(prop[0].k_z.re, Q);
        let first = o.iter().find(|d| d.m == (1, 0)).unwrap();
        assert!((first.q_vec[0] - 2.0 * Q).abs() < 1e-12);
        assert!(first.k_z.re == 0.0 && first.k_z.im > 0.0);

        let o = diffraction_orders([0.0, 0.0], 0.9, 1);
        let first = o.iter().find(|d| d.m == (1, 0)).unwrap();
        assert!((first.q_vec[0] / Q - 1.0 / 0.9).abs() < 1e-12);
        assert!(!first.is_propagating());

        let o = diffraction_orders([1.2 * Q, 0.0], 0.4, 1);
        assert!(!o.iter().find(|d| d.m == (0, 0)).unwrap().is_propagating());
        for d in &o {
            let kk = (1.2 * Q + d.q_vec[0]).powi(2) + d.q_vec[1].powi(2);
            assert!((d.k_z * d.k_z - (Q * Q - kk)).norm() < 1e-9);
            assert!(d.k_z.re == 0.0 || d.k_z.im == 0.0);
        }
    }

    #[test]
    fn reciprocal_uniform_mode() {
        let p = cooperative_rates_reciprocal([0.0, 0.0], 0.2).unwrap();
        assert!((p.gamma_k - 4.9683).abs() < 1e-4);
        let p = cooperative_rates_reciprocal([0.0, 0.0], 0.5).unwrap();
        assert!((p.total_decay() - 3.0 / PI).abs() < 1e-14);
        assert_eq!(p.delta_k, None);
    }

    #[test]
    fn grazing_is_reported() {
        match cooperative_rates_reciprocal([1.5 * Q, 0.0], 0.4) {
            Err(Error::Grazing { order }) => assert_eq!(order, (-1, 0)),
            other => panic!("expected grazing error, got {other:?}"),
        }
        assert!(cooperative_rates_reciprocal([Q, 0.0], 0.7).is_err());
    }

    #[test]
    fn subradiant_band_is_exactly_dark() {
        for kx in [1.1, 1.25, 1.4] {
            let p = cooperative_rates_reciprocal([kx * Q, 0.0], 0.4).unwrap();
            assert_eq!(p.total_decay(), 0.0);
        }
    }

    #[test]
    fn extrapolation_weights_match_closed_form() {
        let w = extrapolation_weights(&[0.02, 0.04, 0.08]);
        for (a, b) in w.iter().zip([8.0 / 3.0, -2.0, 1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = extrapolation_weights(&[0.02, 0.04]);
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn real_space_matches_closed_form() {
        let p = cooperative_rates_real_space([0.0, 0.0], 0.2, &RealSpaceOptions::default()).unwrap();
        assert!((p.gamma_k - 4.9683).abs() < 1e-3, "{}", p.gamma_k);
        assert!(p.delta_k.unwrap().is_finite());
    }

    #[test]
    fn real_space_shift_is_inversion_symmetric() {
        let s = RealSpaceSum::new(0.4, &RealSpaceOptions::default()).unwrap();
        let k = [0.37 * Q, -0.21 * Q];
        let a = s.point(k).unwrap();
        let b = s.point([-k[0], -k[1]]).unwrap();
        assert!((a.delta_k.unwrap() - b.delta_k.unwrap()).abs() < 1e-12);
        assert!((a.gamma_k - b.gamma_k).abs() < 1e-12);
    }

    #[test]
    fn radius_precondition() {
        let opts = RealSpaceOptions { radius: 10.0, ..Default::default() };
        assert!(RealSpaceSum::new(0.5, &opts).is_err());
    }

    #[test]
    fn tight_tolerance_reports_residual() {
        let opts = RealSpaceOptions { tolerance: 0.0, ..Default::default() };
        match cooperative_rates_real_space([0.5 * Q, 0.0], 0.5, &opts) {
            Err(Error::NonConvergence { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn shift_grid_matches_pointwise_sums() {
        let a = 0.4;
        let n = 12;
        let sum = RealSpaceSum::new(a, &RealSpaceOptions { radius: 25.0, ..Default::default() }).unwrap();
        let grid = sum.shift_grid(n);
        for (mx, my) in [(0, 0), (1, 0), (3, 7), (11, 5), (6, 6)] {
            let k = [2.0 * PI * mx as f64 / (n as f64 * a), 2.0 * PI * my as f64 / (n as f64 * a)];
            let direct = sum.sum(k).0.im;
            assert!((grid[mx * n + my] - direct).abs() < 1e-10 * direct.abs().max(1.0), "{mx} {my}");
        }
    }

    #[test]
    fn path_sampling() {
        let a = 0.4;
        let g = symmetry_point("G", a).unwrap();
        let x = symmetry_point("X", a).unwrap();
        let m = symmetry_point("M", a).unwrap();
        let ks = path_samples(&[g, x, m, g], 9).unwrap();
        assert_eq!(ks.len(), 9);
        assert_eq!(ks[0], g);
        assert_eq!(ks[8], g);
        let ks = path_samples(&[g, x], 3).unwrap();
        assert!((ks[1][0] - x[0] / 2.0).abs() < 1e-12);
        assert!(path_samples(&[g], 3).is_err());
    }

    #[test]
    fn curve_endpoints_match_point_calls() {
        let a = 0.4;
        let opts = RealSpaceOptions { radius: 30.0, ..Default::default() };
        let g = symmetry_point("G", a).unwrap();
        let x = symmetry_point("X", a).unwrap();
        let curve = dispersion_curve(&[g, x], 2, a, &opts).unwrap();
        let sum = RealSpaceSum::new(a, &opts).unwrap();
        assert_eq!(curve[0], cooperative_rates_hybrid(g, &sum).unwrap());
        assert_eq!(curve[1], cooperative_rates_hybrid(x, &sum).unwrap());
        assert_eq!(curve[0].method, Method::Hybrid);
    }
}
