//! Validity conditions of the model, each reported as `lhs ≫ rhs` with the
//! ratio and a pass flag.

use crate::config::Config;
use crate::lattice_sums::{cooperative_rates_reciprocal_with, cooperative_shift, RealSpaceOptions};
use crate::{Error, Result, Q};
use serde::Serialize;
use std::f64::consts::PI;

/// Ratio required for "much greater than".
pub const MARGIN: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub name: &'static str,
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Failure is reported but does not invalidate a run.
    pub advisory: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    /// `Γ` of the uniform mode, `NaN` if it could not be evaluated.
    pub gamma_coop: f64,
    /// `Δ` of the uniform mode, `NaN` if it could not be evaluated.
    pub delta_coop: f64,
    pub checks: Vec<RegimeCheck>,
}

impl RegimeReport {
    pub fn get(&self, name: &str) -> Option<&RegimeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when every non-advisory check passes.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.advisory)
    }

    /// Fails with a regime error naming the first failing check in `names`.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        for n in names {
            match self.get(n) {
                Some(c) if c.pass => {}
                Some(c) => {
                    return Err(Error::Regime(format!(
                        "{} ({}): ratio {:.3e} below {}",
                        c.name, c.condition, c.ratio, c.threshold
                    )))
                }
                None => return Err(Error::InvalidArgument(format!("unknown regime check {n}"))),
            }
        }
        Ok(())
    }
}

/// Checks needed by the motionless cavity models.
pub const MOTIONLESS_CHECKS: &[&str] =
    &["markov_optical", "markov_retardation", "single_mode", "paraxial_waist", "subwavelength", "near_focus"];

/// Checks needed by the optomechanical models.
pub const OPTOMECH_CHECKS: &[&str] = &[
    "markov_optical",
    "markov_retardation",
    "single_mode",
    "paraxial_waist",
    "subwavelength",
    "near_focus",
    "small_motion",
    "large_detuning",
];

fn check(name: &'static str, condition: &'static str, lhs: f64, rhs: f64, threshold: f64, advisory: bool) -> RegimeCheck {
    let ratio = if rhs == 0.0 { f64::INFINITY } else { lhs / rhs };
    RegimeCheck { name, condition, lhs, rhs, ratio, threshold, pass: ratio >= threshold, advisory }
}

/// Evaluates every validity condition. Never fails: quantities that cannot
/// be computed come out as `NaN` and the checks using them fail.
pub fn validate_regime(config: &Config) -> RegimeReport {
    let lat = &config.lattice;
    let cav = &config.cavity;
    let drive = &config.drive;
    let dipole = config.physical.dipole;

    let gamma_coop = cooperative_rates_reciprocal_with([0.0, 0.0], lat.a, dipole).map(|p| p.gamma_k).unwrap_or(f64::NAN);
    let opts = RealSpaceOptions { dipole, tolerance: f64::INFINITY, ..Default::default() };
    let delta_coop = cooperative_shift(lat.a, &opts).unwrap_or(f64::NAN);

    let total = 1.0 + gamma_coop;
    let detuning = drive.delta_minus_shift(delta_coop).abs();
    let delta = drive.delta(delta_coop).abs();
    let g_eff = 2.0 * (Q * cav.z0).sin().abs() * (total * cav.l_fsr / 4.0).sqrt();
    // Fastest rate of the slowly varying envelopes.
    let fastest = [total, delta, detuning, drive.delta_c.abs(), cav.kappa_c, g_eff, config.trap.omega_m, drive.omega.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let c_light = config.physical.omega_over_gamma / Q;
    let array_size = std::f64::consts::SQRT_2 * lat.extent();
    let cavity_rates = [cav.kappa_c, drive.delta_c.abs(), g_eff].into_iter().fold(0.0, f64::max);
    let slowest_other = [total, config.trap.omega_m, cav.kappa_c].into_iter().fold(0.0, f64::max);

    let checks = vec![
        check("markov_optical", "optical frequency >> envelope rates", config.physical.omega_over_gamma, fastest, MARGIN, false),
        check("markov_retardation", "c / fastest rate >> array size", c_light / fastest, array_size, MARGIN, false),
        check("single_mode", "pi c/l >> cavity rates", PI * cav.l_fsr, cavity_rates, MARGIN, false),
        check("paraxial_waist", "w >> lambda", cav.w, config.physical.lambda, 2.0, false),
        check("subwavelength", "lambda > a", config.physical.lambda, lat.a, 1.0, false),
        check("near_focus", "z_R >> |z0|", cav.rayleigh_range(), cav.z0.abs(), MARGIN, false),
        check("small_motion", "1 >> eta", 1.0, config.trap.eta, MARGIN, false),
        check("large_detuning", "|delta - Delta| >> max(gamma + Gamma, omega_m, kappa_c)", detuning, slowest_other, MARGIN, false),
        check("array_covers_mode", "n_side a >= 4 w", lat.extent(), 4.0 * cav.w, 1.0, true),
    ];
    RegimeReport { gamma_coop, delta_coop, checks }
}
