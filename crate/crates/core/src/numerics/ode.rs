use crate::{Error, Result};

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 2_000_000 }
    }
}

impl Dopri5 {
    pub fn with_tolerance(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-2, ..Self::default() }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
    ///
    /// `observe` runs after every accepted step and may rescale the state in
    /// place (used for overflow control and sign-change counting).
    pub fn integrate<const N: usize>(
        &self,
        f: impl Fn(f64, &[f64; N]) -> [f64; N],
        t0: f64,
        y0: [f64; N],
        t1: f64,
        mut observe: impl FnMut(f64, &mut [f64; N]),
    ) -> Result<[f64; N]> {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = initial_step(&k1, &y, span.abs(), self.rtol, self.atol) * dir;
        let mut steps = 0usize;
        let mut rejected_last = false;
        while (t1 - t) * dir > 0.0 {
            if steps >= self.max_steps {
                return Err(Error::Numerical(format!(
                    "ODE integration exceeded {} steps at t = {t}",
                    self.max_steps
                )));
            }
            steps += 1;
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            let mut k = [[0.0; N]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for (i, yi) in ys.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    *yi += h * acc;
                }
                k[s] = f(t + C[s] * h, &ys);
            }
            let mut y5 = y;
            let mut err = 0.0;
            for i in 0..N {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] = y[i] + h * d5;
                let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                let e = h * (d5 - d4) / sc;
                err += e * e;
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                rejected_last = true;
                if h.abs() < 1e-300 {
                    return Err(Error::Numerical("ODE step size underflow".into()));
                }
                continue;
            }
            if err <= 1.0 {
                t += h;
                y = y5;
                observe(t, &mut y);
                k1 = f(t, &y);
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                if rejected_last {
                    fac = fac.min(1.0);
                }
                h *= fac.clamp(0.2, 5.0);
                rejected_last = false;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                rejected_last = true;
                if h.abs() < 1e-300 {
                    return Err(Error::Numerical("ODE step size underflow".into()));
                }
            }
        }
        Ok(y)
    }
}

fn initial_step<const N: usize>(dy: &[f64; N], y: &[f64; N], span: f64, rtol: f64, atol: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let d0 = (d0 / N as f64).sqrt();
    let d1 = (d1 / N as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span * 0.1).max(span * 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let solver = Dopri5::with_tolerance(1e-12);
        let y = solver
            .integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 2.0 * std::f64::consts::PI, |_, _| {})
            .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn backward_integration_of_exponential() {
        let solver = Dopri5::with_tolerance(1e-12);
        let y = solver.integrate(|_, y: &[f64; 1]| [y[0]], 1.0, [1f64.exp()], 0.0, |_, _| {}).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn observer_can_rescale() {
        let solver = Dopri5::with_tolerance(1e-10);
        let mut log_scale = 0.0;
        let y = solver
            .integrate(
                |_, y: &[f64; 1]| [10.0 * y[0]],
                0.0,
                [1.0],
                100.0,
                |_, y| {
                    if y[0] > 1e50 {
                        y[0] *= 1e-50;
                        log_scale += 50.0 * std::f64::consts::LN_10;
                    }
                },
            )
            .unwrap();
        let total = log_scale + y[0].ln();
        assert!((total - 1000.0).abs() < 1e-6);
    }
}
