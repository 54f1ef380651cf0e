//! Periodic Fourier differentiation on uniform grids.
//!
//! First derivatives multiply mode `k` by `ik`, with the Nyquist mode sent to
//! zero so that the differentiation matrix stays real and skew-symmetric.
//! Second derivatives are the square of that operator, which keeps the
//! discrete identities `div = -grad^T` and `hess = grad grad` exact.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Spectral {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `k` for each FFT index, Nyquist mapped to 0.
    wavenumber: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .finish()
    }
}

impl Spectral {
    pub(crate) fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumber = (0..n)
            .map(|j| {
                if 2 * j < n {
                    j as f64
                } else if 2 * j == n {
                    0.0
                } else {
                    j as f64 - n as f64
                }
            })
            .collect();
        Self {
            n,
            dim,
            forward,
            inverse,
            wavenumber,
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        match self.dim {
            1 => plan.process(data),
            _ => {
                for row in data.chunks_exact_mut(n) {
                    plan.process(row);
                }
                let mut column = vec![Complex64::new(0.0, 0.0); n];
                for ix in 0..n {
                    for iy in 0..n {
                        column[iy] = data[iy * n + ix];
                    }
                    plan.process(&mut column);
                    for iy in 0..n {
                        data[iy * n + ix] = column[iy];
                    }
                }
            }
        }
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    pub(crate) fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    /// Wavenumbers `(kx, ky)` of flat index `idx` (ky = 0 in 1D).
    fn modes(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.wavenumber[idx], 0.0],
            _ => [self.wavenumber[idx % self.n], self.wavenumber[idx / self.n]],
        }
    }

    /// Apply the multiplier `(i k_a)` for each axis in `axes` to `hat`.
    fn multiply(&self, hat: &[Complex64], axes: &[usize]) -> Vec<Complex64> {
        hat.iter()
            .enumerate()
            .map(|(idx, &c)| {
                let k = self.modes(idx);
                let mut factor = Complex64::new(1.0, 0.0);
                for &a in axes {
                    factor *= Complex64::new(0.0, k[a]);
                }
                c * factor
            })
            .collect()
    }

    pub(crate) fn derivative(&self, hat: &[Complex64], axes: &[usize]) -> Vec<f64> {
        self.inverse(self.multiply(hat, axes))
    }

    /// Sum of first derivatives `sum_a d_a comps[a]`, one inverse transform.
    pub(crate) fn divergence(&self, comps: &[&[f64]]) -> Vec<f64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); comps[0].len()];
        for (a, comp) in comps.iter().enumerate() {
            let hat = self.multiply(&self.forward(comp), &[a]);
            for (s, h) in acc.iter_mut().zip(hat) {
                *s += h;
            }
        }
        self.inverse(acc)
    }

    /// Pseudo-inverse of `-scale * sum_a d_a d_a`; modes in the kernel map to 0.
    pub(crate) fn inverse_neg_laplacian(&self, values: &[f64], scale: f64) -> Vec<f64> {
        let hat = self.forward(values);
        let out = hat
            .into_iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = self.modes(idx);
                let symbol = k[0] * k[0] + k[1] * k[1];
                if symbol == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c / (scale * symbol)
                }
            })
            .collect();
        self.inverse(out)
    }

    /// Zero every mode with some `|k_a| > cutoff`; the Nyquist index counts
    /// as `N/2`.
    pub(crate) fn low_pass(&self, values: &[f64], cutoff: f64) -> Vec<f64> {
        let n = self.n;
        let index_k = |j: usize| if 2 * j <= n { j } else { n - j } as f64;
        let hat = self.forward(values);
        let out = hat
            .into_iter()
            .enumerate()
            .map(|(idx, c)| {
                let (jx, jy) = match self.dim {
                    1 => (idx, 0),
                    _ => (idx % n, idx / n),
                };
                if index_k(jx) > cutoff || index_k(jy) > cutoff {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect();
        self.inverse(out)
    }

    /// Remove the components in the kernel of the discrete gradient.
    pub(crate) fn remove_kernel(&self, values: &[f64]) -> Vec<f64> {
        let hat = self.forward(values);
        let out = hat
            .into_iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = self.modes(idx);
                if k[0] == 0.0 && k[1] == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect();
        self.inverse(out)
    }
}
