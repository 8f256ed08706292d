//! Motionless cavity-array dynamics in the frame of the drive laser.
//!
//! The site-resolved model couples the cavity amplitude `a` to the atomic
//! coherences `σ_n` through the cavity profile `u_n`:
//!
//! ```text
//! ȧ   = (iδ_c − κ_c/2) a − iΩ − i g Σ_n u_n σ_n
//! σ̇_n = iδ σ_n − i g u_n a − Σ_m D_nm σ_m
//! ```
//!
//! Projecting onto the profile and using `D ≈ iΔ` on it gives the two-mode
//! model of the cavity and one undamped collective dipole with detuning
//! `δ − Δ`.

use crate::config::Config;
use crate::confined::{cavity_profile, KernelMatrix, ModeProfile};
use crate::lattice_sums::DispersionPoint;
use crate::ode::{integrate, Tolerances};
use crate::regime::{validate_regime, MOTIONLESS_CHECKS};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

const I: C64 = C64::new(0.0, 1.0);

/// Coherence amplitude above which the linear (non-saturated) model is suspect.
pub const SATURATION_WARNING: f64 = 0.1;

/// Cavity amplitude and atomic coherences at time `t`. The two-mode model
/// stores its single collective dipole as `sigma[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub a: C64,
    pub sigma: Vec<C64>,
}

impl SystemState {
    pub fn atomic_excitation(&self) -> f64 {
        self.sigma.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn total_excitation(&self) -> f64 {
        self.a.norm_sqr() + self.atomic_excitation()
    }

    pub fn saturation_warning(&self) -> Option<String> {
        let peak = self.sigma.iter().map(|s| s.norm()).fold(0.0, f64::max);
        (peak > SATURATION_WARNING).then(|| format!("max |sigma_n| = {peak:.3} exceeds {SATURATION_WARNING}; linear response is questionable"))
    }
}

/// Effective cavity-dipole coupling `2|sin qz0| √((γ+Γ)(c/l)/4)`.
pub fn collective_coupling(qz0: f64, l_fsr: f64, total_decay: f64) -> f64 {
    2.0 * qz0.sin().abs() * (total_decay * l_fsr / 4.0).sqrt()
}

/// Cavity mode coupled to the undamped collective dipole.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoModeModel {
    pub g_eff: f64,
    pub delta_c: f64,
    pub delta_minus_shift: f64,
    pub kappa_c: f64,
    pub omega: f64,
}

/// Builds the two-mode model for `config`, with `dispersion` the uniform mode
/// (its decay sets the coupling, its shift the dipole detuning).
pub fn build_two_mode(config: &Config, dispersion: &DispersionPoint) -> Result<TwoModeModel> {
    validate_regime(config).require(MOTIONLESS_CHECKS)?;
    let shift = dispersion
        .delta_k
        .ok_or_else(|| Error::InvalidArgument("the uniform-mode dispersion point carries no shift".into()))?;
    let cav = &config.cavity;
    Ok(TwoModeModel {
        g_eff: collective_coupling(cav.qz0(), cav.l_fsr, dispersion.total_decay()),
        delta_c: config.drive.delta_c,
        delta_minus_shift: config.drive.delta_minus_shift(shift),
        kappa_c: cav.kappa_c,
        omega: config.drive.omega,
    })
}

impl TwoModeModel {
    /// Dispersive cavity shift `g²/(δ−Δ)` far from the atomic resonance.
    pub fn dispersive_shift(&self) -> f64 {
        self.g_eff * self.g_eff / self.delta_minus_shift
    }

    pub fn with_delta_c(&self, delta_c: f64) -> Self {
        TwoModeModel { delta_c, ..*self }
    }
}

/// Steady state of the two-mode model. On the dipole resonance `δ = Δ` the
/// undamped dipole absorbs the drive exactly: `a = 0`, `σ = −Ω/g`.
pub fn steady_state_two_mode(m: &TwoModeModel) -> Result<SystemState> {
    let omega = C64::new(m.omega, 0.0);
    if m.delta_minus_shift == 0.0 {
        if m.g_eff == 0.0 {
            return Err(Error::Singular("undamped dipole on resonance with no cavity coupling has no steady state".into()));
        }
        return Ok(SystemState { t: f64::INFINITY, a: C64::new(0.0, 0.0), sigma: vec![-omega / m.g_eff] });
    }
    let denom = I * m.delta_c - m.kappa_c / 2.0 - I * m.dispersive_shift();
    if denom.norm() == 0.0 {
        return Err(Error::Singular("lossless cavity driven on its dressed resonance".into()));
    }
    let a = I * omega / denom;
    Ok(SystemState { t: f64::INFINITY, a, sigma: vec![a * (m.g_eff / m.delta_minus_shift)] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub delta_c: f64,
    pub abs_a2: f64,
    pub phase: f64,
}

impl SpectrumPoint {
    fn from_amplitude(delta_c: f64, a: C64) -> Self {
        SpectrumPoint { delta_c, abs_a2: a.norm_sqr(), phase: if a.norm() == 0.0 { 0.0 } else { a.arg() } }
    }
}

/// Evenly spaced cavity detunings from `lo` to `hi` inclusive.
pub fn detuning_grid(lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidArgument("a scan needs a finite ascending range and at least two samples".into()));
    }
    Ok((0..samples).map(|i| if i + 1 == samples { hi } else { lo + (hi - lo) * i as f64 / (samples - 1) as f64 }).collect())
}

/// Steady-state intracavity intensity and phase across a δ_c scan.
pub fn spectrum_scan(m: &TwoModeModel, lo: f64, hi: f64, samples: usize) -> Result<Vec<SpectrumPoint>> {
    detuning_grid(lo, hi, samples)?
        .into_par_iter()
        .map(|dc| steady_state_two_mode(&m.with_delta_c(dc)).map(|s| SpectrumPoint::from_amplitude(dc, s.a)))
        .collect()
}

/// The site-resolved model with a given kernel (usually the projected one).
#[derive(Clone, Debug)]
pub struct FullModel {
    pub kernel: KernelMatrix,
    pub profile: ModeProfile,
    pub g_eff: f64,
    /// Bare atomic detuning δ (not δ − Δ).
    pub delta: f64,
    pub delta_c: f64,
    pub kappa_c: f64,
    pub omega: f64,
}

/// Largest system solved with dense factorizations.
pub const DENSE_LIMIT: usize = 4096;

impl FullModel {
    /// Model for `config` with the cavity profile on its lattice. `shift` and
    /// `total_decay` describe the uniform mode of the infinite array.
    pub fn new(config: &Config, kernel: KernelMatrix, shift: f64, total_decay: f64) -> Result<Self> {
        if kernel.n_side() != config.lattice.n_side || kernel.provenance.a != config.lattice.a {
            return Err(Error::Shape("kernel was built for a different lattice".into()));
        }
        let cav = &config.cavity;
        Ok(FullModel {
            profile: cavity_profile(&config.lattice, cav.w)?,
            kernel,
            g_eff: collective_coupling(cav.qz0(), cav.l_fsr, total_decay),
            delta: config.drive.delta(shift),
            delta_c: config.drive.delta_c,
            kappa_c: cav.kappa_c,
            omega: config.drive.omega,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.kernel.n_sites()
    }

    /// Right-hand side on the packed state `[a, σ_0, …, σ_{N-1}]`.
    pub fn rhs(&self, y: &[C64], dy: &mut [C64]) {
        let a = y[0];
        let sigma = &y[1..];
        let u = &self.profile.weights;
        let overlap: C64 = u.iter().zip(sigma).map(|(u, s)| u.conj() * s).sum();
        dy[0] = (I * self.delta_c - self.kappa_c / 2.0) * a - I * self.omega - I * self.g_eff * overlap;
        let ds = self.kernel.apply(sigma);
        for n in 0..sigma.len() {
            dy[n + 1] = I * self.delta * sigma[n] - I * self.g_eff * u[n] * a - ds[n];
        }
    }

    /// Dense generator `L` and drive `b` with `ẏ = L y + b`.
    pub fn generator(&self) -> Result<(DMatrix<C64>, DVector<C64>)> {
        let n = self.n_sites();
        if n > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!("{n} sites exceed the dense limit {DENSE_LIMIT}")));
        }
        let u = &self.profile.weights;
        let k = self.kernel.to_dense();
        let mut l = DMatrix::<C64>::zeros(n + 1, n + 1);
        l[(0, 0)] = I * self.delta_c - self.kappa_c / 2.0;
        for i in 0..n {
            l[(0, i + 1)] = -I * self.g_eff * u[i].conj();
            l[(i + 1, 0)] = -I * self.g_eff * u[i];
            for j in 0..n {
                l[(i + 1, j + 1)] = -k[(i, j)];
            }
            l[(i + 1, i + 1)] += I * self.delta;
        }
        let mut b = DVector::<C64>::zeros(n + 1);
        b[0] = -I * self.omega;
        Ok((l, b))
    }

    /// Collective response `χ = u† (D − iδ)⁻¹ u`, independent of the cavity.
    pub fn susceptibility(&self) -> Result<C64> {
        let n = self.n_sites();
        if n > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!("{n} sites exceed the dense limit {DENSE_LIMIT}")));
        }
        let mut m = self.kernel.to_dense();
        for i in 0..n {
            m[(i, i)] -= I * self.delta;
        }
        let u = DVector::from_column_slice(&self.profile.weights);
        let x = m.lu().solve(&u).ok_or_else(|| Error::Singular("atomic block has an undamped mode at the drive frequency".into()))?;
        let chi = u.dotc(&x);
        if !chi.is_finite() {
            return Err(Error::Singular("atomic block is numerically singular".into()));
        }
        Ok(chi)
    }

    fn amplitude(&self, chi: C64, delta_c: f64) -> Result<C64> {
        let denom = I * delta_c - self.kappa_c / 2.0 - self.g_eff * self.g_eff * chi;
        if denom.norm() == 0.0 {
            return Err(Error::Singular("full model has no steady state at this detuning".into()));
        }
        Ok(I * self.omega / denom)
    }

    /// Exact linear steady state.
    pub fn steady_state(&self) -> Result<SystemState> {
        let n = self.n_sites();
        let mut m = self.kernel.to_dense();
        for i in 0..n {
            m[(i, i)] -= I * self.delta;
        }
        let u = DVector::from_column_slice(&self.profile.weights);
        let x = m.lu().solve(&u).ok_or_else(|| Error::Singular("atomic block has an undamped mode at the drive frequency".into()))?;
        let a = self.amplitude(u.dotc(&x), self.delta_c)?;
        // σ = −i g a (D − iδ)⁻¹ u
        let sigma = x.iter().map(|v| -I * self.g_eff * a * v).collect();
        Ok(SystemState { t: f64::INFINITY, a, sigma })
    }

    /// Steady-state spectrum; one factorization serves every detuning.
    pub fn spectrum(&self, lo: f64, hi: f64, samples: usize) -> Result<Vec<SpectrumPoint>> {
        let grid = detuning_grid(lo, hi, samples)?;
        let chi = self.susceptibility()?;
        grid.into_iter().map(|dc| self.amplitude(chi, dc).map(|a| SpectrumPoint::from_amplitude(dc, a))).collect()
    }

    /// State with the cavity empty and the atoms in `amplitude × profile`.
    pub fn profile_state(&self, amplitude: C64) -> SystemState {
        SystemState { t: 0.0, a: C64::new(0.0, 0.0), sigma: self.profile.weights.iter().map(|u| u * amplitude).collect() }
    }
}

/// Output times `0, dt, 2dt, …` up to and including `t_final`.
pub fn output_times(t0: f64, t_final: f64, dt_out: f64) -> Result<Vec<f64>> {
    if !(dt_out > 0.0) || !(t_final >= t0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument("need dt_out > 0 and a finite t_final >= t0".into()));
    }
    let steps = ((t_final - t0) / dt_out + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * dt_out).collect();
    if t_final - times[steps] > 1e-9 * dt_out {
        times.push(t_final);
    }
    Ok(times)
}

/// Integrates the site-resolved model from `initial`.
pub fn evolve_full(model: &FullModel, initial: &SystemState, t_final: f64, dt_out: f64, tol: &Tolerances) -> Result<Vec<SystemState>> {
    if initial.sigma.len() != model.n_sites() {
        return Err(Error::Shape(format!("initial state has {} sites, model {}", initial.sigma.len(), model.n_sites())));
    }
    let times = output_times(initial.t, t_final, dt_out)?;
    let mut y0 = Vec::with_capacity(model.n_sites() + 1);
    y0.push(initial.a);
    y0.extend_from_slice(&initial.sigma);
    let (ys, _) = integrate(|_, y, dy| model.rhs(y, dy), initial.t, &y0, &times, tol)?;
    Ok(times.into_iter().zip(ys).map(|(t, y)| SystemState { t, a: y[0], sigma: y[1..].to_vec() }).collect())
}
