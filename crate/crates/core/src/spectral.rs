//! Fourier calculus on uniformly sampled periodic data.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{GeomError, Result};

pub const MIN_SAMPLES: usize = 4;

/// Forward/inverse FFT pair for one sample count.
#[derive(Clone)]
pub struct SpectralPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.n).finish()
    }
}

impl SpectralPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_SAMPLES {
            return Err(GeomError::GridTooSmall { n, min: MIN_SAMPLES });
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed wavenumber of bin `k`.
    #[inline]
    fn wavenumber(&self, k: usize) -> f64 {
        if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        }
    }

    /// Complex Fourier coefficients `c_k` with `x_j = Σ c_k e^{i k t_j}`.
    pub fn coefficients(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.n, "sample count does not match plan");
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    /// Derivative in `t ∈ [0, 2π)`. The Nyquist mode of an even grid is dropped.
    pub fn derivative(&self, samples: &[f64]) -> Vec<f64> {
        let mut c = self.coefficients(samples);
        for (k, ck) in c.iter_mut().enumerate() {
            let m = self.wavenumber(k);
            if self.n.is_multiple_of(2) && k == self.n / 2 {
                *ck = Complex64::new(0.0, 0.0);
            } else {
                *ck *= Complex64::new(0.0, m);
            }
        }
        self.inverse.process(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }
}

/// Spectral derivative along a fiber of samples taken at `t_k = 2πk/n`.
pub fn fiber_derivative(samples: &[f64]) -> Result<Vec<f64>> {
    Ok(SpectralPlan::new(samples.len())?.derivative(samples))
}

/// Trapezoidal mean `(1/2π) ∫ x dt` of periodic samples.
pub fn periodic_mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Trigonometric interpolant of periodic real samples.
///
/// The Nyquist mode of an even grid is split evenly between `±n/2`, so the
/// interpolant is real and passes through every sample.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    /// `(wavenumber, coefficient)` pairs with wavenumber `>= 0`; negative
    /// wavenumbers are the conjugates.
    modes: Vec<(f64, Complex64)>,
}

impl TrigInterpolant {
    pub fn new(plan: &SpectralPlan, samples: &[f64]) -> Self {
        let n = plan.len();
        let c = plan.coefficients(samples);
        let mut modes = Vec::with_capacity(n / 2 + 1);
        modes.push((0.0, c[0]));
        for (k, ck) in c.iter().enumerate().take(n.div_ceil(2)).skip(1) {
            modes.push((k as f64, *ck * 2.0));
        }
        if n.is_multiple_of(2) {
            modes.push(((n / 2) as f64, c[n / 2]));
        }
        Self { modes }
    }

    /// Value and first derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let step = Complex64::from_polar(1.0, t);
        let mut e = Complex64::new(1.0, 0.0);
        let (mut v, mut d) = (0.0, 0.0);
        for (k, c) in &self.modes {
            let term = c * e;
            v += term.re;
            d -= k * term.im;
            e *= step;
        }
        (v, d)
    }
}

/// Uniform grid `t_k = 2πk/n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_has_zero_derivative() {
        let d = fiber_derivative(&[3.5; 16]).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn sin_two_t() {
        for n in [8, 16, 64, 65] {
            let t = uniform_grid(n);
            let s: Vec<f64> = t.iter().map(|t| (2.0 * t).sin()).collect();
            let d = fiber_derivative(&s).unwrap();
            for (dk, tk) in d.iter().zip(&t) {
                assert_abs_diff_eq!(*dk, 2.0 * (2.0 * tk).cos(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cos_two_t_against_finite_differences() {
        // Dense sixth-order central differences of the continuous function.
        let f = |t: f64| (2.0 * t).cos() + 0.3 * (5.0 * t).sin();
        let h = 1e-3;
        let fd = |t: f64| {
            (-f(t - 3.0 * h) + 9.0 * f(t - 2.0 * h) - 45.0 * f(t - h) + 45.0 * f(t + h) - 9.0 * f(t + 2.0 * h)
                + f(t + 3.0 * h))
                / (60.0 * h)
        };
        let t = uniform_grid(32);
        let s: Vec<f64> = t.iter().map(|&t| f(t)).collect();
        let d = fiber_derivative(&s).unwrap();
        for (dk, &tk) in d.iter().zip(&t) {
            assert!((dk - fd(tk)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_tiny_grids() {
        assert_eq!(fiber_derivative(&[1.0, 2.0, 3.0]), Err(GeomError::GridTooSmall { n: 3, min: 4 }));
    }

    #[test]
    fn interpolant_passes_through_samples_and_differentiates() {
        let f = |t: f64| 0.5 + (3.0 * t).cos() - 0.25 * (t).sin() + 0.1 * (7.0 * t).cos();
        let df = |t: f64| -3.0 * (3.0 * t).sin() - 0.25 * t.cos() - 0.7 * (7.0 * t).sin();
        for n in [16, 17, 32] {
            let plan = SpectralPlan::new(n).unwrap();
            let t = uniform_grid(n);
            let s: Vec<f64> = t.iter().map(|&t| f(t)).collect();
            let interp = TrigInterpolant::new(&plan, &s);
            for (&tk, &sk) in t.iter().zip(&s) {
                assert_abs_diff_eq!(interp.eval(tk).0, sk, epsilon = 1e-13);
            }
            for k in 0..50 {
                let x = 0.123 + k as f64 * 0.1;
                let (v, d) = interp.eval(x);
                assert_abs_diff_eq!(v, f(x), epsilon = 1e-12);
                assert_abs_diff_eq!(d, df(x), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn nyquist_interpolant_is_real_and_exact_at_nodes() {
        let n = 8;
        let plan = SpectralPlan::new(n).unwrap();
        let s: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let interp = TrigInterpolant::new(&plan, &s);
        for (k, sk) in s.iter().enumerate() {
            assert_abs_diff_eq!(interp.eval(TAU * k as f64 / n as f64).0, *sk, epsilon = 1e-13);
        }
    }
}
