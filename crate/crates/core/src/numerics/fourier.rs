use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Coefficients below this fraction of the largest one are treated as FFT
/// round-off and dropped. Without the cut, differentiating four times turns
/// 1e-17 noise at high wavenumbers into visible garbage.
const NOISE_FLOOR: f64 = 1e-14;

/// Real trigonometric interpolant of a periodic function sampled on a uniform
/// grid, `f(x) = c₀ + 2 Re Σ_{k≥1} c_k e^{iωkx}` with `ω = 2π / period`.
///
/// The Nyquist mode is discarded, so derivatives of every order are real and
/// unambiguous.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    period: f64,
    n_samples: usize,
    mean: f64,
    /// Nonzero positive-frequency coefficients `(k, c_k)`.
    modes: Vec<(usize, Complex64)>,
}

impl TrigSeries {
    pub fn from_samples(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        assert!(n >= 4, "need at least four samples");
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let kmax = (n - 1) / 2;
        let largest = buf
            .iter()
            .take(kmax + 1)
            .map(|c| c.norm() * scale)
            .fold(0.0, f64::max);
        let cut = NOISE_FLOOR * largest;
        let mean = buf[0].re * scale;
        let modes = (1..=kmax)
            .map(|k| (k, buf[k] * scale))
            .filter(|(_, c)| c.norm() > cut)
            .collect();
        Self { period, n_samples: n, mean, modes }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    pub fn derivative(&self, x: f64, order: u32) -> f64 {
        let w = 2.0 * PI / self.period;
        let mut acc = if order == 0 { self.mean } else { 0.0 };
        for &(k, c) in &self.modes {
            let wk = w * k as f64;
            let phase = Complex64::from_polar(1.0, wk * x);
            let factor = Complex64::new(0.0, wk).powu(order);
            acc += 2.0 * (c * factor * phase).re;
        }
        acc
    }

    /// Value and the first four derivatives at `x`.
    pub fn jet(&self, x: f64) -> [f64; 5] {
        let w = 2.0 * PI / self.period;
        let mut out = [self.mean, 0.0, 0.0, 0.0, 0.0];
        for &(k, c) in &self.modes {
            let wk = w * k as f64;
            let mut term = c * Complex64::from_polar(1.0, wk * x);
            let ik = Complex64::new(0.0, wk);
            for slot in out.iter_mut() {
                *slot += 2.0 * term.re;
                term *= ik;
            }
        }
        out
    }

    /// Periodic part of the antiderivative (zero-mean component integrated).
    /// The full integral is `mean * x + periodic_antiderivative(x) - periodic_antiderivative(0)`.
    pub fn periodic_antiderivative(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        let mut acc = 0.0;
        for &(k, c) in &self.modes {
            let wk = w * k as f64;
            let phase = Complex64::from_polar(1.0, wk * x);
            acc += 2.0 * (c * phase / Complex64::new(0.0, wk)).re;
        }
        acc
    }

    /// `∫₀ˣ f`.
    pub fn integral_from_zero(&self, x: f64) -> f64 {
        self.mean * x + self.periodic_antiderivative(x) - self.periodic_antiderivative(0.0)
    }

    /// Number of retained (non-noise) modes.
    pub fn active_modes(&self) -> usize {
        self.modes.len()
    }
}

/// Spectral derivative of uniformly sampled periodic data, returned on the
/// same grid.
pub fn spectral_derivative(samples: &[f64], period: f64) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let w = 2.0 * PI / period;
    for (idx, c) in buf.iter_mut().enumerate() {
        let k = if idx <= (n - 1) / 2 {
            idx as f64
        } else if n % 2 == 0 && idx == n / 2 {
            0.0
        } else {
            idx as f64 - n as f64
        };
        *c *= Complex64::new(0.0, w * k);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}
