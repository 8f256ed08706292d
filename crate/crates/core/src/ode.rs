//! Adaptive Dormand-Prince 5(4) integrator for complex ODE systems.
//!
//! Steps are clipped so that every requested output time is hit exactly,
//! which keeps results independent of the output grid's interpolation.

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12, max_steps: 10_000_000 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol, ..Default::default() }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integration statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` and returns the state at each
/// of the ascending `times` (all `≥ t0`).
pub fn integrate<F>(mut f: F, t0: f64, y0: &[C64], times: &[f64], tol: &Tolerances) -> Result<(Vec<Vec<C64>>, Stats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidArgument("output times must be ascending and not before t0".into()));
    }
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 7];
    let mut y = y0.to_vec();
    let mut ytmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut t = t0;
    let mut stats = Stats::default();
    let mut out = Vec::with_capacity(times.len());

    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k[0], tol, &mut stats);

    for &target in times {
        while t < target {
            if stats.accepted + stats.rejected >= tol.max_steps {
                return Err(Error::Integrator(format!("step limit {} reached at t = {t}", tol.max_steps)));
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = zero;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += kj[i] * A[s][j];
                    }
                    ytmp[i] = y[i] + acc * step;
                }
                f(t + C[s] * step, &ytmp, &mut k[s]);
                stats.evaluations += 1;
                if s == 6 {
                    ynew.copy_from_slice(&ytmp);
                }
            }
            // The seventh stage is evaluated at the fifth-order solution.
            f(t + step, &ynew, &mut k[6]);
            stats.evaluations += 1;

            let mut err = 0.0;
            for i in 0..n {
                let mut e = zero;
                for (j, kj) in k.iter().enumerate() {
                    e += kj[i] * E[j];
                }
                let sc = tol.atol + tol.rtol * y[i].norm().max(ynew[i].norm());
                err += ((e * step).norm() / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integrator(format!("non-finite error estimate at t = {t}")));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut ynew);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integrator(format!("step size underflow at t = {t}")));
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step<F>(f: &mut F, t: f64, y: &[C64], f0: &[C64], tol: &Tolerances, stats: &mut Stats) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len().max(1) as f64;
    let sc: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.norm()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
    f(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let d2 = (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b).norm() / s).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}
