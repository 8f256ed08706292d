//! Cavity-profile modes and the confined / projected kernels.
//!
//! The confined kernel `D^c` is the part of the free-space kernel carried
//! by propagating plane waves with `|k⊥| ≤ k_cut`, the channels a paraxial
//! cavity captures:
//!
//! ```text
//! D^c(d) = (3/(8π)) ∫₀^{θc} sinθ dθ ∫₀^{2π} dφ (1 - |k̂·e|² sin²θ) cos(k·d),   k = q sinθ (cosφ, sinφ)
//! ```
//!
//! with `sin θc = k_cut/q`. Only the real (radiative) part is removed; the
//! projected kernel keeps the free-space imaginary part.
//!
//! All kernels between sites of a square lattice in one plane depend only on
//! the displacement, so they are stored as a `(2n-1)²` displacement table
//! and applied with FFTs. Dense storage is used for the Hermite-Gauss oracle.

use crate::cache::{CacheStatus, KernelCache};
use crate::config::{Config, LatticeSpec};
use crate::fft2::ToeplitzOp;
use crate::greens::{kernel_fs_d2z_with, kernel_fs_with, Dipole};
use crate::quad::gauss_legendre;
use crate::{Error, Result, C64, Q};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileLabel {
    CavityGaussian,
    Uniform,
    Custom,
}

/// Site amplitudes `u_n`, normalized on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeProfile {
    pub weights: Vec<C64>,
    pub label: ProfileLabel,
}

impl ModeProfile {
    pub fn normalized(weights: Vec<C64>, label: ProfileLabel) -> Result<Self> {
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("profile has zero or non-finite norm".into()));
        }
        Ok(ModeProfile { weights: weights.into_iter().map(|w| w / norm).collect(), label })
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }
}

fn check_extent(lattice: &LatticeSpec, w: f64) -> Result<()> {
    let required = 4.0 * w;
    if lattice.extent() < required {
        return Err(Error::LatticeTooSmall { extent: lattice.extent(), required });
    }
    Ok(())
}

/// `u_n ∝ e^{-|r_n|²/w²}` normalized on the lattice.
pub fn cavity_profile(lattice: &LatticeSpec, w: f64) -> Result<ModeProfile> {
    check_extent(lattice, w)?;
    let weights = lattice
        .positions()
        .iter()
        .map(|r| C64::new((-(r[0] * r[0] + r[1] * r[1]) / (w * w)).exp(), 0.0))
        .collect();
    ModeProfile::normalized(weights, ProfileLabel::CavityGaussian)
}

/// Continuum-normalized Gaussian weight `Σ (a²/πw²) e^{-2r²/w²}`, which tends
/// to 1/2 rather than 1.
pub fn gaussian_weight_sum(lattice: &LatticeSpec, w: f64) -> f64 {
    let a = lattice.a;
    lattice
        .positions()
        .iter()
        .map(|r| a * a / (PI * w * w) * (-2.0 * (r[0] * r[0] + r[1] * r[1]) / (w * w)).exp())
        .sum()
}

pub fn uniform_profile(lattice: &LatticeSpec) -> ModeProfile {
    let n = lattice.n_sites();
    let v = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    ModeProfile { weights: vec![v; n], label: ProfileLabel::Uniform }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Fs,
    Confined,
    Projected,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Fs => "fs",
            KernelKind::Confined => "confined",
            KernelKind::Projected => "projected",
        }
    }
}

/// Parameters a kernel was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub a: f64,
    pub n_side: usize,
    pub dipole: Dipole,
    /// Second longitudinal derivative `∂²_z` at `dz = 0` rather than the value.
    pub d2z: bool,
    pub z0: Option<f64>,
    /// Confinement cutoff in units of q.
    pub k_cut: Option<f64>,
    pub w: Option<f64>,
    pub p_max: Option<usize>,
    /// Content hashes of the confined kernels subtracted so far.
    pub removed: Vec<String>,
}

impl Provenance {
    /// Provenance of a kernel on `lattice` with no cavity parameters yet.
    pub fn new(lattice: &LatticeSpec, dipole: Dipole, d2z: bool) -> Self {
        Provenance { a: lattice.a, n_side: lattice.n_side, dipole, d2z, z0: None, k_cut: None, w: None, p_max: None, removed: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub enum Storage {
    /// Values on the displacement grid, index `(di + n-1)(2n-1) + (dj + n-1)`.
    Toeplitz(Vec<C64>),
    Dense(DMatrix<C64>),
}

/// A site-space kernel `K_nm` in units of γ.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub provenance: Provenance,
    storage: Storage,
    op: OnceLock<ToeplitzOp>,
}

impl std::fmt::Debug for ToeplitzOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ToeplitzOp")
    }
}

impl KernelMatrix {
    pub fn from_table(kind: KernelKind, provenance: Provenance, table: Vec<C64>) -> Result<Self> {
        let w = 2 * provenance.n_side - 1;
        if table.len() != w * w {
            return Err(Error::Shape(format!("displacement table has {} entries, expected {}", table.len(), w * w)));
        }
        Ok(KernelMatrix { kind, provenance, storage: Storage::Toeplitz(table), op: OnceLock::new() })
    }

    pub fn from_dense(kind: KernelKind, provenance: Provenance, m: DMatrix<C64>) -> Result<Self> {
        let n = provenance.n_side * provenance.n_side;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape(format!("dense kernel is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
        }
        Ok(KernelMatrix { kind, provenance, storage: Storage::Dense(m), op: OnceLock::new() })
    }

    pub fn n_side(&self) -> usize {
        self.provenance.n_side
    }

    pub fn n_sites(&self) -> usize {
        self.provenance.n_side * self.provenance.n_side
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    /// The displacement table, when translation invariant.
    pub fn table(&self) -> Option<&[C64]> {
        match &self.storage {
            Storage::Toeplitz(t) => Some(t),
            Storage::Dense(_) => None,
        }
    }

    /// Value at the lattice displacement `(di, dj)`; Toeplitz storage only.
    pub fn at_displacement(&self, di: isize, dj: isize) -> Option<C64> {
        let n = self.n_side() as isize;
        if di.abs() >= n || dj.abs() >= n {
            return None;
        }
        self.table().map(|t| t[((di + n - 1) * (2 * n - 1) + dj + n - 1) as usize])
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(row, col)],
            Storage::Toeplitz(_) => {
                let n = self.n_side();
                let di = (row / n) as isize - (col / n) as isize;
                let dj = (row % n) as isize - (col % n) as isize;
                self.at_displacement(di, dj).unwrap()
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Toeplitz(_) => {
                let n = self.n_sites();
                DMatrix::from_fn(n, n, |r, c| self.get(r, c))
            }
        }
    }

    fn map_entries(&self, kind: KernelKind, f: impl Fn(C64) -> C64) -> KernelMatrix {
        let storage = match &self.storage {
            Storage::Toeplitz(t) => Storage::Toeplitz(t.iter().map(|&z| f(z)).collect()),
            Storage::Dense(m) => Storage::Dense(m.map(f)),
        };
        KernelMatrix { kind, provenance: self.provenance.clone(), storage, op: OnceLock::new() }
    }

    /// Entrywise real part, the radiative exchange.
    pub fn real_part(&self) -> KernelMatrix {
        self.map_entries(self.kind, |z| C64::new(z.re, 0.0))
    }

    /// Entrywise imaginary part (as a real-valued kernel).
    pub fn imag_part(&self) -> KernelMatrix {
        self.map_entries(self.kind, |z| C64::new(z.im, 0.0))
    }

    /// `y = K x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n_sites());
        match &self.storage {
            Storage::Dense(m) => {
                let v = nalgebra::DVector::from_column_slice(x);
                (m * v).as_slice().to_vec()
            }
            Storage::Toeplitz(t) => self.op.get_or_init(|| ToeplitzOp::new(self.n_side(), t)).apply(x),
        }
    }

    /// `u† K v`.
    pub fn form(&self, u: &[C64], v: &[C64]) -> C64 {
        self.apply(v).iter().zip(u).map(|(kv, uu)| uu.conj() * kv).sum()
    }

    /// SHA-256 over the kind, shape and entries.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.name().as_bytes());
        h.update([self.provenance.d2z as u8]);
        h.update((self.n_side() as u64).to_le_bytes());
        h.update(self.provenance.a.to_le_bytes());
        let mut feed = |z: &C64| {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        };
        match &self.storage {
            Storage::Toeplitz(t) => {
                t.iter().for_each(&mut feed);
            }
            Storage::Dense(m) => {
                // Row-major, matching the cache layout.
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        feed(&m[(r, c)]);
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}

fn displacement_table(lattice: &LatticeSpec, f: impl Fn([f64; 2]) -> C64 + Sync) -> Vec<C64> {
    let n = lattice.n_side as isize;
    let w = (2 * n - 1) as usize;
    let a = lattice.a;
    (0..w * w)
        .into_par_iter()
        .map(|idx| {
            let di = (idx / w) as isize - (n - 1);
            let dj = (idx % w) as isize - (n - 1);
            f([di as f64 * a, dj as f64 * a])
        })
        .collect()
}

/// Free-space kernel `D_fs(r_n - r_m)` with the `γ/2` diagonal.
pub fn fs_kernel(lattice: &LatticeSpec, dipole: Dipole) -> KernelMatrix {
    let table = displacement_table(lattice, |d| kernel_fs_with(d, 0.0, dipole));
    KernelMatrix::from_table(KernelKind::Fs, Provenance::new(lattice, dipole, false), table).unwrap()
}

/// Free-space `∂²_z D_fs` at `dz = 0`, with the `-q²/5` diagonal.
pub fn fs_kernel_d2z(lattice: &LatticeSpec, dipole: Dipole) -> KernelMatrix {
    let table = displacement_table(lattice, |d| kernel_fs_d2z_with(d, dipole));
    KernelMatrix::from_table(KernelKind::Fs, Provenance::new(lattice, dipole, true), table).unwrap()
}

/// Product rule for the confined-kernel integral.
struct PolarRule {
    /// `(kx, ky, weight)` per node, weight including the dipole factor.
    nodes: Vec<(f64, f64, f64)>,
}

impl PolarRule {
    fn new(k_cut_q: f64, n_theta: usize, n_phi: usize, dipole: Dipole, d2z: bool) -> Self {
        let theta_c = k_cut_q.asin();
        let (th, wt) = gauss_legendre(n_theta, 0.0, theta_c);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (t, w) in th.iter().zip(&wt) {
            let (s, c) = t.sin_cos();
            let radial = 3.0 / (8.0 * PI) * s * w * dphi * if d2z { -Q * Q * c * c } else { 1.0 };
            for b in 0..n_phi {
                let phi = dphi * b as f64;
                let k = [Q * s * phi.cos(), Q * s * phi.sin()];
                let weight = 1.0 - dipole.projection_sq(k) / (Q * Q);
                nodes.push((k[0], k[1], radial * weight));
            }
        }
        PolarRule { nodes }
    }

    fn eval(&self, d: [f64; 2]) -> f64 {
        self.nodes.iter().map(|&(kx, ky, w)| w * (kx * d[0] + ky * d[1]).cos()).sum()
    }

    /// Values on the displacement quadrant `di, dj ∈ [0, n)` as an `n × n`
    /// matrix, through the separable form `cos(x+y) = cos x cos y - sin x sin y`.
    fn quadrant(&self, n: usize, a: f64) -> DMatrix<f64> {
        let m = self.nodes.len();
        let mut cx = DMatrix::<f64>::zeros(m, n);
        let mut sx = DMatrix::<f64>::zeros(m, n);
        let mut cy = DMatrix::<f64>::zeros(m, n);
        let mut sy = DMatrix::<f64>::zeros(m, n);
        for (r, &(kx, ky, w)) in self.nodes.iter().enumerate() {
            for i in 0..n {
                let (s, c) = (kx * a * i as f64).sin_cos();
                cx[(r, i)] = w * c;
                sx[(r, i)] = w * s;
                let (s, c) = (ky * a * i as f64).sin_cos();
                cy[(r, i)] = c;
                sy[(r, i)] = s;
            }
        }
        cx.transpose() * cy - sx.transpose() * sy
    }
}

/// Node counts for an integrand whose phase spans `x` radians.
fn rule_size(x: f64) -> (usize, usize) {
    (24 + (0.6 * x).ceil() as usize, 32 + 2 * x.ceil() as usize)
}

/// Confined kernel `D^c` for all atoms in the plane `z0`, cutoff `k_cut` in
/// units of q.
pub fn confined_kernel_paraxial(lattice: &LatticeSpec, z0: f64, k_cut: f64) -> Result<KernelMatrix> {
    confined_kernel_paraxial_with(lattice, z0, k_cut, Dipole::Circular, false)
}

/// As [`confined_kernel_paraxial`], optionally for `∂²_z D^c` (the integrand
/// gains `-k_z² = -q² cos²θ`).
pub fn confined_kernel_paraxial_with(lattice: &LatticeSpec, z0: f64, k_cut: f64, dipole: Dipole, d2z: bool) -> Result<KernelMatrix> {
    if !(k_cut > 0.0 && k_cut < 1.0) {
        return Err(Error::InvalidArgument(format!("k_cut = {k_cut} must lie in (0, 1) in units of q")));
    }
    let n = lattice.n_side;
    let a = lattice.a;
    let rho_max = std::f64::consts::SQRT_2 * (n as f64 - 1.0) * a;
    let (nt, np) = rule_size(k_cut * Q * rho_max);
    let rule = PolarRule::new(k_cut, nt, np, dipole, d2z);

    // Spot-check the rule against a finer one at the far corner and along an axis.
    let fine = PolarRule::new(k_cut, nt + nt / 2, np + np / 2, dipole, d2z);
    let scale = rule.eval([0.0, 0.0]).abs();
    let far = (n as f64 - 1.0) * a;
    for d in [[far, far], [far, 0.0], [far, 0.5 * far]] {
        let diff = (rule.eval(d) - fine.eval(d)).abs();
        if diff > 1e-11 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Quadrature(format!(
                "confined kernel quadrature unconverged at displacement {d:?}: change {diff:.3e} on refinement"
            )));
        }
    }

    let quad = rule.quadrant(n, a);
    let w = 2 * n - 1;
    let mut table = vec![C64::new(0.0, 0.0); w * w];
    for di in -(n as isize - 1)..n as isize {
        for dj in -(n as isize - 1)..n as isize {
            let v = quad[(di.unsigned_abs(), dj.unsigned_abs())];
            table[(di + n as isize - 1) as usize * w + (dj + n as isize - 1) as usize] = C64::new(v, 0.0);
        }
    }
    let mut prov = Provenance::new(lattice, dipole, d2z);
    prov.z0 = Some(z0);
    prov.k_cut = Some(k_cut);
    KernelMatrix::from_table(KernelKind::Confined, prov, table)
}

/// Physicists' Hermite polynomials `H_0..=H_p` at `x`.
fn hermite_all(p: usize, x: f64) -> Vec<f64> {
    let mut h = vec![1.0; p + 1];
    if p >= 1 {
        h[1] = 2.0 * x;
    }
    for k in 2..=p {
        h[k] = 2.0 * x * h[k - 1] - 2.0 * (k - 1) as f64 * h[k - 2];
    }
    h
}

/// Confined kernel from an explicit sum over Hermite-Gauss cavity modes of
/// waist `w` with `p + p' ≤ p_max`, both propagation directions:
/// `Re D^c_nm = (3/(4q)) Σ_modes A(n) A(m) cos(θ_n - θ_m)`, where `A` is the
/// normalized mode amplitude at the plane `z0` and `θ = q ρ²/(2R(z0))` the
/// wavefront curvature phase. The imaginary part is left at zero.
pub fn confined_kernel_hg(lattice: &LatticeSpec, z0: f64, w: f64, p_max: usize) -> Result<KernelMatrix> {
    if p_max > 6 {
        return Err(Error::InvalidArgument(format!("p_max = {p_max} exceeds the oracle limit 6")));
    }
    if lattice.n_sites() > 400 {
        return Err(Error::InvalidArgument(format!("{} sites exceed the oracle limit 400", lattice.n_sites())));
    }
    let z_r = PI * w * w;
    let wz = w * (1.0 + (z0 / z_r).powi(2)).sqrt();
    let inv_r = z0 / (z0 * z0 + z_r * z_r);
    let pos = lattice.positions();
    let norm1d: Vec<f64> = (0..=p_max)
        .map(|p| {
            let fact: f64 = (1..=p).map(|k| k as f64).product();
            (2.0 / PI).powf(0.25) / (2f64.powi(p as i32) * fact * wz).sqrt()
        })
        .collect();
    let amp1d = |x: f64| -> Vec<f64> {
        let h = hermite_all(p_max, std::f64::consts::SQRT_2 * x / wz);
        let g = (-x * x / (wz * wz)).exp();
        (0..=p_max).map(|p| norm1d[p] * h[p] * g).collect()
    };
    let ux: Vec<Vec<f64>> = pos.iter().map(|r| amp1d(r[0])).collect();
    let uy: Vec<Vec<f64>> = pos.iter().map(|r| amp1d(r[1])).collect();
    let theta: Vec<f64> = pos.iter().map(|r| Q * (r[0] * r[0] + r[1] * r[1]) * inv_r / 2.0).collect();
    let n = pos.len();
    let mut modes = Vec::new();
    for p in 0..=p_max {
        for pp in 0..=(p_max - p) {
            modes.push((p, pp));
        }
    }
    // Columns: A cosθ and A sinθ per mode, so Re D^c = c (C Cᵀ + S Sᵀ).
    let mut basis = DMatrix::<f64>::zeros(n, 2 * modes.len());
    for (col, &(p, pp)) in modes.iter().enumerate() {
        for s in 0..n {
            let amp = ux[s][p] * uy[s][pp];
            basis[(s, 2 * col)] = amp * theta[s].cos();
            basis[(s, 2 * col + 1)] = amp * theta[s].sin();
        }
    }
    let re = (&basis * basis.transpose()) * (3.0 / (4.0 * Q));
    let mut prov = Provenance::new(lattice, Dipole::Circular, false);
    prov.z0 = Some(z0);
    prov.w = Some(w);
    prov.p_max = Some(p_max);
    KernelMatrix::from_dense(KernelKind::Confined, prov, re.map(|x| C64::new(x, 0.0)))
}

/// `fs - confined` in the real part, free-space imaginary part unchanged.
/// Subtracting a confined kernel that was already removed is a no-op.
pub fn projected_kernel(fs: &KernelMatrix, confined: &KernelMatrix) -> Result<KernelMatrix> {
    if confined.kind != KernelKind::Confined {
        return Err(Error::InvalidArgument("second argument must be a confined kernel".into()));
    }
    if fs.kind == KernelKind::Confined {
        return Err(Error::InvalidArgument("first argument must be a free-space or projected kernel".into()));
    }
    let (pf, pc) = (&fs.provenance, &confined.provenance);
    if pf.n_side != pc.n_side || pf.a != pc.a || pf.d2z != pc.d2z {
        return Err(Error::Shape(format!(
            "kernel mismatch: n_side {} vs {}, a {} vs {}, d2z {} vs {}",
            pf.n_side, pc.n_side, pf.a, pc.a, pf.d2z, pc.d2z
        )));
    }
    let hash = confined.content_hash();
    if pf.removed.contains(&hash) {
        return Ok(fs.clone());
    }
    let mut prov = pf.clone();
    prov.removed.push(hash);
    prov.z0 = pc.z0.or(pf.z0);
    prov.k_cut = pc.k_cut.or(pf.k_cut);
    let sub = |f: C64, c: C64| C64::new(f.re - c.re, f.im);
    match (&fs.storage, &confined.storage) {
        (Storage::Toeplitz(f), Storage::Toeplitz(c)) => {
            KernelMatrix::from_table(KernelKind::Projected, prov, f.iter().zip(c).map(|(&f, &c)| sub(f, c)).collect())
        }
        _ => {
            let f = fs.to_dense();
            let c = confined.to_dense();
            KernelMatrix::from_dense(KernelKind::Projected, prov, f.zip_map(&c, sub))
        }
    }
}

/// Where a kernel used in a run came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelRecord {
    pub kind: &'static str,
    pub d2z: bool,
    pub content_hash: String,
    /// Cache key, with whether the kernel was read from the cache.
    pub cache: Option<(String, bool)>,
}

fn cached(
    cache: Option<&KernelCache>,
    kind: KernelKind,
    prov: Provenance,
    build: impl FnOnce() -> Result<KernelMatrix>,
    log: &mut Vec<KernelRecord>,
) -> Result<KernelMatrix> {
    let (k, entry) = match cache {
        Some(c) => {
            let (k, status) = c.get_or_build(kind, &prov, build)?;
            (k, Some((KernelCache::key(kind, &prov), status == CacheStatus::Hit)))
        }
        None => (build()?, None),
    };
    log.push(KernelRecord { kind: kind.name(), d2z: prov.d2z, content_hash: k.content_hash(), cache: entry });
    Ok(k)
}

/// Projected kernel (or its `∂²_z`) for `config`, reading and filling the
/// cache when one is given. The records list the free-space and confined
/// kernels it was assembled from.
pub fn projected_kernel_for(config: &Config, d2z: bool, cache: Option<&KernelCache>) -> Result<(KernelMatrix, Vec<KernelRecord>)> {
    let lattice = &config.lattice;
    let dipole = config.physical.dipole;
    let cav = &config.cavity;
    let mut log = Vec::new();
    let base = Provenance::new(lattice, dipole, d2z);
    let fs = cached(
        cache,
        KernelKind::Fs,
        base.clone(),
        || Ok(if d2z { fs_kernel_d2z(lattice, dipole) } else { fs_kernel(lattice, dipole) }),
        &mut log,
    )?;
    let mut prov = base;
    prov.z0 = Some(cav.z0);
    prov.k_cut = Some(cav.k_cut);
    let conf = cached(
        cache,
        KernelKind::Confined,
        prov,
        || confined_kernel_paraxial_with(lattice, cav.z0, cav.k_cut, dipole, d2z),
        &mut log,
    )?;
    Ok((projected_kernel(&fs, &conf)?, log))
}

/// Collective emission rate `u† (2 Re K) u` of a normalized profile.
pub fn mode_decay_rate(profile: &ModeProfile, kernel: &KernelMatrix) -> f64 {
    2.0 * kernel.real_part().form(&profile.weights, &profile.weights).re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(a: f64, n: usize) -> LatticeSpec {
        LatticeSpec::new(a, n).unwrap()
    }

    #[test]
    fn cavity_profile_is_normalized() {
        let l = lat(0.5, 32);
        let u = cavity_profile(&l, 4.0).unwrap();
        assert!((u.norm_sq() - 1.0).abs() < 1e-12);
        assert!(matches!(cavity_profile(&l, 5.0), Err(Error::LatticeTooSmall { .. })));
    }

    #[test]
    fn continuum_weight_is_one_half() {
        let s = gaussian_weight_sum(&lat(0.25, 128), 4.0);
        assert!((s - 0.5).abs() < 1e-6, "{s}");
    }

    #[test]
    fn gaussian_centre_to_edge_ratio() {
        let w = 2.0;
        let l = lat(1.0, 9);
        let u = cavity_profile(&l, w).unwrap();
        let centre = u.weights[4 * 9 + 4].re;
        // Site (i, j) = (8, 4) sits at r = 4 = 2w.
        let edge = u.weights[8 * 9 + 4].re;
        assert!((centre / edge - 4f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn fs_table_matches_pointwise_kernel() {
        let l = lat(0.3, 5);
        let k = fs_kernel(&l, Dipole::Circular);
        let p = l.positions();
        for (r, c) in [(0, 0), (3, 17), (24, 0), (12, 7)] {
            let d = [p[r][0] - p[c][0], p[r][1] - p[c][1]];
            assert_eq!(k.get(r, c), kernel_fs_with(d, 0.0, Dipole::Circular));
        }
        assert_eq!(k.get(6, 6), C64::new(0.5, 0.0));
    }

    #[test]
    fn dense_and_fft_products_agree() {
        let l = lat(0.4, 6);
        let k = fs_kernel(&l, Dipole::Circular);
        let x: Vec<C64> = (0..36).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let dense = KernelMatrix::from_dense(KernelKind::Fs, k.provenance.clone(), k.to_dense()).unwrap();
        for (a, b) in k.apply(&x).iter().zip(dense.apply(&x)) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn confined_kernel_limits() {
        let l = lat(0.5, 8);
        let tiny = confined_kernel_paraxial(&l, 0.0, 1e-4).unwrap();
        assert!(tiny.table().unwrap().iter().all(|z| z.norm() < 1e-8));
        let full = confined_kernel_paraxial(&l, 0.0, 0.999999).unwrap();
        assert!((full.at_displacement(0, 0).unwrap().re - 0.5).abs() < 1e-3);
        let k = confined_kernel_paraxial(&l, 0.0, 0.2).unwrap();
        for (r, c) in [(1, 40), (9, 62), (3, 3)] {
            assert_eq!(k.get(r, c), k.get(c, r));
        }
    }

    #[test]
    fn confined_kernel_origin_closed_form() {
        // Circular: (3/4) ∫₀^{θc} sinθ (1 - sin²θ/2) dθ.
        let kc: f64 = 0.3;
        let c = (1.0 - kc * kc).sqrt();
        let exact = 0.75 * ((1.0 - c) - 0.5 * ((1.0 - c) - (1.0 - c * c * c) / 3.0));
        let k = confined_kernel_paraxial(&lat(0.5, 4), 0.0, kc).unwrap();
        assert!((k.at_displacement(0, 0).unwrap().re - exact).abs() < 1e-13);
    }

    #[test]
    fn projection_keeps_free_space_shift() {
        let l = lat(0.5, 8);
        let fs = fs_kernel(&l, Dipole::Circular);
        let c = confined_kernel_paraxial(&l, 0.0, 0.2).unwrap();
        let p = projected_kernel(&fs, &c).unwrap();
        assert_eq!(p.kind, KernelKind::Projected);
        for (a, b) in p.table().unwrap().iter().zip(fs.table().unwrap()) {
            assert_eq!(a.im, b.im);
        }
        let again = projected_kernel(&p, &c).unwrap();
        assert_eq!(again.table(), p.table());
        let zero = KernelMatrix::from_table(KernelKind::Confined, c.provenance.clone(), vec![C64::new(0.0, 0.0); 15 * 15]).unwrap();
        assert_eq!(projected_kernel(&fs, &zero).unwrap().table(), fs.table());
        assert!(projected_kernel(&fs, &confined_kernel_paraxial(&lat(0.5, 6), 0.0, 0.2).unwrap()).is_err());
    }

    #[test]
    fn hg_fundamental_has_rank_two_at_most() {
        let l = lat(0.5, 12);
        for z0 in [0.0, 0.3] {
            let k = confined_kernel_hg(&l, z0, 2.0, 0).unwrap();
            let re = k.to_dense().map(|z| z.re);
            let ev = re.symmetric_eigenvalues();
            let top = ev.iter().cloned().fold(0.0, f64::max);
            let significant = ev.iter().filter(|&&e| e.abs() > 1e-8 * top).count();
            assert!(significant <= if z0 == 0.0 { 1 } else { 2 }, "{significant}");
        }
    }

    #[test]
    fn hg_trace_grows_with_order() {
        let l = lat(0.5, 12);
        let mut last = 0.0;
        for p in 0..=4 {
            let k = confined_kernel_hg(&l, 0.1, 2.0, p).unwrap();
            let tr: f64 = (0..l.n_sites()).map(|n| k.get(n, n).re).sum();
            assert!(tr > last);
            last = tr;
        }
        assert!(confined_kernel_hg(&l, 0.0, 2.0, 7).is_err());
        assert!(confined_kernel_hg(&lat(0.5, 21), 0.0, 2.0, 1).is_err());
    }

    #[test]
    fn cavity_profile_under_fs_kernel_samples_uniform_mode() {
        let l = lat(0.5, 32);
        let u = cavity_profile(&l, 4.0).unwrap();
        let rate = mode_decay_rate(&u, &fs_kernel(&l, Dipole::Circular));
        let target = 3.0 / PI;
        assert!((rate / target - 1.0).abs() < 0.02, "{rate}");
    }
}
