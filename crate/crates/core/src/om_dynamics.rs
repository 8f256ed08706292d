//! Mean-field dynamics of the cavity coupled to the array's motion.
//!
//! With `x_ν = b_ν + b_ν*` the multimode equations read
//!
//! ```text
//! ȧ   = [i(δ_c − Δ_AC) − κ_c/2] a − i g x₀ a + Σ C_νν' x_ν x_ν' a − iΩ
//! ḃ_ν = −iω_m b_ν − i g δ_ν0 |a|² + 2i Σ Im C_νν' x_ν' |a|²
//! ```
//!
//! and the reduced single-mode model keeps `ν = 0` with the other modes
//! traced out into `κ_sc` and `g₂`.

use crate::cavity_dynamics::output_times;
use crate::config::{Config, NoiseContract};
use crate::ode::{integrate, Tolerances};
use crate::optomech::OmParams;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::Serialize;

const I: C64 = C64::new(0.0, 1.0);

/// Largest number of mechanical modes integrated explicitly.
pub const MODE_LIMIT: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct OmState {
    pub t: f64,
    pub a: C64,
    /// `⟨b_ν⟩`; a single entry for the reduced model.
    pub b: Vec<C64>,
}

impl OmState {
    pub fn empty(n_modes: usize) -> Self {
        OmState { t: 0.0, a: C64::new(0.0, 0.0), b: vec![C64::new(0.0, 0.0); n_modes] }
    }

    fn pack(&self) -> Vec<C64> {
        std::iter::once(self.a).chain(self.b.iter().copied()).collect()
    }

    fn unpack(t: f64, y: Vec<C64>) -> Self {
        OmState { t, a: y[0], b: y[1..].to_vec() }
    }
}

/// Cavity drive and loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OmDrive {
    pub delta_c: f64,
    pub kappa_c: f64,
    pub omega: f64,
}

impl OmDrive {
    pub fn from_config(config: &Config) -> Self {
        OmDrive { delta_c: config.drive.delta_c, kappa_c: config.cavity.kappa_c, omega: config.drive.omega }
    }
}

fn run<F>(initial: &OmState, t_final: f64, dt_out: f64, tol: &Tolerances, f: F) -> Result<Vec<OmState>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let times = output_times(initial.t, t_final, dt_out)?;
    let (ys, _) = integrate(f, initial.t, &initial.pack(), &times, tol)?;
    let out: Vec<OmState> = times.into_iter().zip(ys).map(|(t, y)| OmState::unpack(t, y)).collect();
    if out.iter().any(|s| !s.a.is_finite() || s.b.iter().any(|b| !b.is_finite())) {
        return Err(Error::Integrator("non-finite state".into()));
    }
    Ok(out)
}

/// Integrates the multimode equations with mode couplings `c`.
pub fn evolve_multimode(
    params: &OmParams,
    drive: &OmDrive,
    c: &DMatrix<C64>,
    initial: &OmState,
    t_final: f64,
    dt_out: f64,
    tol: &Tolerances,
) -> Result<Vec<OmState>> {
    let nu = c.nrows();
    if c.ncols() != nu || initial.b.len() != nu {
        return Err(Error::Shape(format!("C is {}x{}, initial state has {} modes", c.nrows(), c.ncols(), initial.b.len())));
    }
    if nu > MODE_LIMIT {
        return Err(Error::InvalidArgument(format!("{nu} modes exceed the limit {MODE_LIMIT}")));
    }
    let im_c = c.map(|z| z.im);
    let lin = I * (drive.delta_c - params.delta_ac) - drive.kappa_c / 2.0;
    let (g, wm) = (params.g, params.omega_m);
    let mut x = vec![0.0; nu];
    run(initial, t_final, dt_out, tol, move |_, y, dy| {
        let a = y[0];
        let n = a.norm_sqr();
        for (xv, b) in x.iter_mut().zip(&y[1..]) {
            *xv = 2.0 * b.re;
        }
        let mut quad = C64::new(0.0, 0.0);
        for v in 0..nu {
            let mut cx = C64::new(0.0, 0.0);
            let mut imx = 0.0;
            for w in 0..nu {
                cx += c[(v, w)] * x[w];
                imx += im_c[(v, w)] * x[w];
            }
            quad += cx * x[v];
            dy[1 + v] = -I * wm * y[1 + v] + 2.0 * I * imx * n;
        }
        if nu > 0 {
            dy[1] -= I * g * n;
        }
        let x0 = x.first().copied().unwrap_or(0.0);
        dy[0] = lin * a - I * g * x0 * a + quad * a - I * drive.omega;
    })
}

/// Integrates the reduced single-mode model.
pub fn evolve_reduced(params: &OmParams, drive: &OmDrive, initial: &OmState, t_final: f64, dt_out: f64, tol: &Tolerances) -> Result<Vec<OmState>> {
    if initial.b.len() != 1 {
        return Err(Error::Shape(format!("the reduced model has one mode, initial state has {}", initial.b.len())));
    }
    let lin = I * (drive.delta_c - params.delta_ac) - (drive.kappa_c + params.kappa_sc) / 2.0;
    let (g, g2, wm) = (params.g, params.g2, params.omega_m);
    run(initial, t_final, dt_out, tol, move |_, y, dy| {
        let (a, b) = (y[0], y[1]);
        let n = a.norm_sqr();
        let x = 2.0 * b.re;
        dy[0] = lin * a - I * g * x * a - I * g2 * x * x * a - I * drive.omega;
        dy[1] = -I * wm * b - I * g * n - 2.0 * I * g2 * x * n;
    })
}

/// Energy of the conservative part of the multimode equations (no loss, no
/// drive, `C` replaced by `i Im C`).
pub fn multimode_energy(params: &OmParams, drive: &OmDrive, c: &DMatrix<C64>, state: &OmState) -> f64 {
    let n = state.a.norm_sqr();
    let x: Vec<f64> = state.b.iter().map(|b| 2.0 * b.re).collect();
    let mut form = 0.0;
    for (v, xv) in x.iter().enumerate() {
        for (w, xw) in x.iter().enumerate() {
            form += c[(v, w)].im * xv * xw;
        }
    }
    -(drive.delta_c - params.delta_ac) * n
        + params.omega_m * state.b.iter().map(|b| b.norm_sqr()).sum::<f64>()
        + params.g * n * x.first().copied().unwrap_or(0.0)
        - form * n
}

/// The conservative part `i Im C` of the mode couplings.
pub fn conservative_couplings(c: &DMatrix<C64>) -> DMatrix<C64> {
    c.map(|z| C64::new(0.0, z.im))
}

/// Parameters of the equivalent standard optomechanical system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StandardModel {
    /// `ω_c' − ω_c`.
    pub cavity_shift: f64,
    pub kappa: f64,
    pub kappa_c: f64,
    pub kappa_sc: f64,
    pub g: f64,
    pub g2: f64,
    pub omega_m: f64,
    /// Rate of the delta-correlated input noise `⟨F F†⟩`.
    pub noise_rate: f64,
    pub noise_channels: Vec<(String, f64)>,
    pub g_over_kappa_sc: f64,
    /// `κ_sc / g` from its closed form, independent of `κ_sc` and `g` above.
    pub kappa_sc_over_g_closed: f64,
    /// Where the array sits in the standing wave: `node` (purely quadratic,
    /// as for a membrane at a node), `antinode`, or `slope` (linear).
    pub membrane_position: &'static str,
}

pub fn standard_model_report(params: &OmParams, kappa_c: f64) -> Result<StandardModel> {
    let noise = NoiseContract::new(kappa_c, params.kappa_sc)?;
    let kappa = kappa_c + params.kappa_sc;
    let s2 = params.qz0.sin().powi(2);
    let membrane_position = if s2 < 1e-12 {
        "node"
    } else if 1.0 - s2 < 1e-12 {
        "antinode"
    } else {
        "slope"
    };
    Ok(StandardModel {
        cavity_shift: params.delta_ac,
        kappa,
        kappa_c,
        kappa_sc: params.kappa_sc,
        g: params.g,
        g2: params.g2,
        omega_m: params.omega_m,
        noise_rate: noise.rate("F_total").unwrap_or(kappa),
        noise_channels: noise.correlators.iter().map(|(k, v)| (k.clone(), v.0)).collect(),
        g_over_kappa_sc: params.g / params.kappa_sc,
        kappa_sc_over_g_closed: params.favorable_ratio_closed(),
        membrane_position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AtomDetuning;
    use crate::optomech::closed_form_params;

    fn params() -> OmParams {
        let mut c = Config::default();
        c.drive.detuning = AtomDetuning::FromShift(100.0);
        closed_form_params(&c, 0.4, 0.955).unwrap()
    }

    fn tight() -> Tolerances {
        Tolerances::new(1e-11, 1e-14)
    }

    #[test]
    fn decoupled_cavity_relaxes_to_lorentzian() {
        let p = OmParams { g: 0.0, ..params() };
        let drive = OmDrive { delta_c: 0.7, kappa_c: 1.0, omega: 0.02 };
        let c = DMatrix::<C64>::zeros(3, 3);
        let out = evolve_multimode(&p, &drive, &c, &OmState::empty(3), 60.0, 60.0, &tight()).unwrap();
        let expect = -I * drive.omega / (drive.kappa_c / 2.0 - I * (drive.delta_c - p.delta_ac));
        assert!((out.last().unwrap().a - expect).norm() < 1e-10);
    }

    #[test]
    fn undriven_modes_precess_freely() {
        let p = params();
        let drive = OmDrive { delta_c: 0.0, kappa_c: 1.0, omega: 0.0 };
        let c = DMatrix::from_fn(4, 4, |r, k| C64::new(-1e-4 * (r + k) as f64, 1e-4 * (r * k) as f64));
        let b0: Vec<C64> = (0..4).map(|i| C64::new(0.1 * i as f64, -0.05)).collect();
        let init = OmState { t: 0.0, a: C64::new(0.0, 0.0), b: b0.clone() };
        let out = evolve_multimode(&p, &drive, &c, &init, 50.0, 10.0, &tight()).unwrap();
        for s in &out {
            for (b, b0) in s.b.iter().zip(&b0) {
                assert!((b - b0 * (-I * p.omega_m * s.t).exp()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn conservative_energy_is_constant() {
        let p = OmParams { omega_m: 0.3, g: 0.02, ..params() };
        let drive = OmDrive { delta_c: 0.5, kappa_c: 0.0, omega: 0.0 };
        let c = conservative_couplings(&DMatrix::from_fn(3, 3, |r, k| C64::new(-0.01, 0.003 * (1 + r + k) as f64)));
        let init = OmState { t: 0.0, a: C64::new(1.0, 0.5), b: vec![C64::new(0.2, 0.1), C64::new(-0.1, 0.0), C64::new(0.0, 0.3)] };
        let e0 = multimode_energy(&p, &drive, &c, &init);
        let out = evolve_multimode(&p, &drive, &c, &init, 100.0, 0.1, &tight()).unwrap();
        for s in &out {
            assert!(((multimode_energy(&p, &drive, &c, s) - e0) / e0).abs() < 1e-8);
        }
    }

    #[test]
    fn reduced_without_coupling_is_a_lossier_cavity() {
        let p = OmParams { g: 0.0, g2: 0.0, kappa_sc: 0.3, ..params() };
        let drive = OmDrive { delta_c: 0.0, kappa_c: 1.0, omega: 0.01 };
        let out = evolve_reduced(&p, &drive, &OmState::empty(1), 80.0, 80.0, &tight()).unwrap();
        let expect = -I * drive.omega / (1.3 / 2.0 + I * p.delta_ac);
        assert!((out[1].a - expect).norm() < 1e-10);
    }

    #[test]
    fn standard_model_fields() {
        let p = params();
        let r = standard_model_report(&p, 0.8).unwrap();
        assert_eq!(r.kappa, 0.8 + p.kappa_sc);
        assert_eq!(r.noise_rate, r.kappa);
        assert!((1.0 / r.g_over_kappa_sc - r.kappa_sc_over_g_closed).abs() < 1e-12 * r.kappa_sc_over_g_closed);
        assert_eq!(r.membrane_position, "slope");
    }

    #[test]
    fn mode_count_guard() {
        let c = DMatrix::<C64>::zeros(MODE_LIMIT + 1, MODE_LIMIT + 1);
        let r = evolve_multimode(&params(), &OmDrive { delta_c: 0.0, kappa_c: 1.0, omega: 0.0 }, &c, &OmState::empty(MODE_LIMIT + 1), 1.0, 1.0, &tight());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
