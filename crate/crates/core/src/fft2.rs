//! Square 2D FFTs and the circulant embedding of 2D Toeplitz operators.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward/inverse transforms on an `n × n` row-major grid.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
    }

    /// Unnormalized forward transform `X_k = Σ x_j e^{-2πi jk/n}`.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/n²` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|x| *x *= s);
    }
}

fn transpose(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Operator `y_n = Σ_m T(r_n - r_m) x_m` on an `n_side × n_side` grid, with
/// `T` given on the `(2 n_side - 1)²` displacement table, applied in
/// `O(N log N)` by embedding into a `2 n_side` circulant.
#[derive(Clone)]
pub struct ToeplitzOp {
    n_side: usize,
    spectrum: Vec<C64>,
    fft: Fft2,
}

impl ToeplitzOp {
    pub fn new(n_side: usize, table: &[C64]) -> Self {
        let w = 2 * n_side - 1;
        assert_eq!(table.len(), w * w);
        let m = 2 * n_side;
        let mut c = vec![C64::new(0.0, 0.0); m * m];
        let off = n_side as isize - 1;
        for di in -off..=off {
            for dj in -off..=off {
                let src = (di + off) as usize * w + (dj + off) as usize;
                let dst = di.rem_euclid(m as isize) as usize * m + dj.rem_euclid(m as isize) as usize;
                c[dst] = table[src];
            }
        }
        let fft = Fft2::new(m);
        fft.forward(&mut c);
        ToeplitzOp { n_side, spectrum: c, fft }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n_side;
        let m = 2 * n;
        assert_eq!(x.len(), n * n);
        let mut buf = vec![C64::new(0.0, 0.0); m * m];
        for i in 0..n {
            buf[i * m..i * m + n].copy_from_slice(&x[i * n..i * n + n]);
        }
        self.fft.forward(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(b, s)| *b *= s);
        self.fft.inverse(&mut buf);
        let mut y = Vec::with_capacity(n * n);
        for i in 0..n {
            y.extend_from_slice(&buf[i * m..i * m + n]);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = Fft2::new(6);
        let x: Vec<C64> = (0..36).map(|i| C64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut y = x.clone();
        f.forward(&mut y);
        f.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn toeplitz_matches_direct_product() {
        let n = 5;
        let w = 2 * n - 1;
        let table: Vec<C64> = (0..w * w).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let x: Vec<C64> = (0..n * n).map(|k| C64::new(k as f64 * 0.2 - 1.0, (k % 3) as f64)).collect();
        let y = ToeplitzOp::new(n, &table).apply(&x);
        for a in 0..n * n {
            let mut s = C64::new(0.0, 0.0);
            for b in 0..n * n {
                let di = (a / n) as isize - (b / n) as isize + n as isize - 1;
                let dj = (a % n) as isize - (b % n) as isize + n as isize - 1;
                s += table[di as usize * w + dj as usize] * x[b];
            }
            assert!((s - y[a]).norm() < 1e-10);
        }
    }
}
