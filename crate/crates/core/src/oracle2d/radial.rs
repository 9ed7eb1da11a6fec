//! Angular-momentum channels of the full operator for a circle of radius `R`
//! centred at the flux line.
//!
//! In channel `m` with `ν = m − c₀` the radial equation
//! `−f'' − f'/r + (ν − Br²/2)² f / r² = λ f` becomes `f_tt = Q f` in
//! `t = ln r`, `Q = (ν − Br²/2)² − λr²`, and the δ-interaction is the jump
//! `f_t(R⁺) − f_t(R⁻) = −βR f(R)`. The far end carries a Dirichlet condition.
//!
//! Eigenvalues are counted with a Prüfer angle (Sturm oscillation) and then
//! located by Brent's method on the matching determinant at `r = R`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::ModelParams;
use crate::numerics::ode::Dopri5;
use crate::numerics::roots::brent;
use crate::spectral1d::Spectrum;
use crate::{Error, Result};

const FINE_TOL: f64 = 1e-12;
const COARSE_TOL: f64 = 1e-10;
/// Required WKB decay exponent between the last turning point and `R_max`.
const DECAY_EXPONENT: f64 = 40.0;
/// Required margin of `B²R_max²/4` over a positive target eigenvalue.
const CONFINEMENT_MARGIN: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub radius: f64,
    pub params: ModelParams,
    pub m: i64,
    pub r_max: f64,
}

impl RadialProblem {
    /// Channel problem with `R_max` adequate for eigenvalues up to
    /// `lambda_cap`.
    pub fn new(radius: f64, params: ModelParams, m: i64, lambda_cap: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParams(format!("radius {radius} must be positive")));
        }
        if !(params.b > 0.0) {
            return Err(Error::InvalidParams("radial oracle needs B > 0 for confinement".into()));
        }
        let r_max = truncation_radius(radius, params, m, lambda_cap);
        Ok(Self { radius, params, m, r_max })
    }

    pub fn nu(&self) -> f64 {
        self.m as f64 - self.params.c0
    }

    /// Upper bound for the `k`-th (0-based) eigenvalue of the channel: the
    /// δ-free level `B(2k + 1 + |ν| − ν)`.
    pub fn free_level(&self, k: usize) -> f64 {
        free_level(self.params.b, self.nu(), k)
    }

    fn start(&self, lambda: f64) -> (f64, [f64; 2]) {
        let mu = self.nu().abs();
        let c = -(self.nu() * self.params.b + lambda) / (4.0 * (mu + 1.0));
        let mut r0 = 1e-3 * self.radius.min(1.0 / self.params.b.sqrt());
        if c != 0.0 {
            r0 = r0.min((1e-10 / c.abs()).sqrt());
        }
        let cr2 = c * r0 * r0;
        (r0.ln(), [1.0 + cr2, mu * (1.0 + cr2) + 2.0 * cr2])
    }

    fn q(&self, t: f64, lambda: f64) -> f64 {
        let r2 = (2.0 * t).exp();
        let w = self.nu() - 0.5 * self.params.b * r2;
        w * w - lambda * r2
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> Result<usize> {
        let solver = Dopri5::with_tolerance(1e-9);
        let (t0, y0) = self.start(lambda);
        let phi0 = y0[0].atan2(y0[1]);
        let rhs = |t: f64, y: &[f64; 1]| {
            let (s, c) = y[0].sin_cos();
            [c * c - self.q(t, lambda) * s * s]
        };
        let t_r = self.radius.ln();
        let phi = solver.integrate(rhs, t0, [phi0], t_r, |_, _| {})?[0];
        let k = (phi / std::f64::consts::PI).floor();
        let local = phi - k * std::f64::consts::PI;
        let (s, c) = local.sin_cos();
        let jumped = k * std::f64::consts::PI + s.atan2(c - self.params.beta * self.radius * s);
        let phi_end = solver.integrate(rhs, t_r, [jumped], self.r_max.ln(), |_, _| {})?[0];
        Ok((phi_end / std::f64::consts::PI).floor().max(0.0) as usize)
    }

    fn linear_rhs(&self, lambda: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
        move |t, y| [y[1], self.q(t, lambda) * y[0]]
    }

    /// Left (regular) and right (decaying) solutions at `r = R`, each
    /// normalized to unit Euclidean norm of `(f, f_t)`.
    fn matched_pair(&self, lambda: f64, rtol: f64) -> Result<([f64; 2], [f64; 2])> {
        let solver = Dopri5::with_tolerance(rtol);
        let renorm = |_: f64, y: &mut [f64; 2]| {
            let n = y[0].hypot(y[1]);
            if n > 1e100 || n < 1e-100 {
                y[0] /= n;
                y[1] /= n;
            }
        };
        let (t0, y0) = self.start(lambda);
        let t_r = self.radius.ln();
        let mut left = solver.integrate(self.linear_rhs(lambda), t0, y0, t_r, renorm)?;
        let mut right = solver.integrate(self.linear_rhs(lambda), self.r_max.ln(), [0.0, -1.0], t_r, renorm)?;
        for v in [&mut left, &mut right] {
            let n = v[0].hypot(v[1]);
            v[0] /= n;
            v[1] /= n;
        }
        Ok((left, right))
    }

    /// Matching determinant `f_R' f_L − f_L' f_R + βR f_L f_R` at `r = R`.
    pub fn determinant(&self, lambda: f64, rtol: f64) -> Result<f64> {
        let (l, r) = self.matched_pair(lambda, rtol)?;
        Ok(r[1] * l[0] - l[1] * r[0] + self.params.beta * self.radius * l[0] * r[0])
    }

    /// Relative residual of the jump condition for the eigenfunction
    /// reconstructed at `lambda`.
    pub fn jump_residual(&self, lambda: f64) -> Result<f64> {
        let (l, r) = self.matched_pair(lambda, FINE_TOL)?;
        // scale the right solution so that f is continuous
        let scale = l[0] / r[0];
        let (fr_t, f) = (r[1] * scale, l[0]);
        let br = self.params.beta * self.radius;
        Ok((fr_t - l[1] + br * f).abs() / (fr_t.abs() + l[1].abs() + br * f.abs()))
    }

    fn lower_bound(&self) -> Result<f64> {
        let beta = self.params.beta;
        let mut lo = -0.25 * beta * beta - 2.0 * beta / self.radius - 10.0;
        for _ in 0..60 {
            if self.count_below(lo)? == 0 {
                return Ok(lo);
            }
            lo = 2.0 * lo - 1.0;
        }
        Err(Error::Numerical("no lower bound for the radial spectrum".into()))
    }

    fn refine(&self, lo: f64, hi: f64, rtol: f64) -> Result<f64> {
        let failure = std::cell::RefCell::new(None);
        let f = |l: f64| match self.determinant(l, rtol) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let flo = f(lo);
        let fhi = f(hi);
        if flo.signum() == fhi.signum() && failure.borrow().is_none() {
            return Err(Error::Numerical(format!("matching determinant has no sign change on [{lo}, {hi}] (m = {})", self.m)));
        }
        let root = brent(f, lo, hi, 1e-14 * hi.abs().max(1.0));
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(root),
        }
    }

    /// All channel eigenvalues below `cap` (at most `max_count`), each with
    /// an error estimate from two integrator tolerances.
    pub fn eigenvalues_below(&self, cap: f64, max_count: usize) -> Result<Vec<(f64, f64)>> {
        let lo = self.lower_bound()?;
        let n_cap = self.count_below(cap)?.min(max_count);
        if n_cap == 0 {
            return Ok(Vec::new());
        }
        let mut brackets = Vec::new();
        let mut stack = vec![(lo, 0usize, cap, self.count_below(cap)?)];
        while let Some((a, ca, b, cb)) = stack.pop() {
            if cb <= ca || ca >= n_cap {
                continue;
            }
            if cb - ca == 1 || (b - a) <= 1e-13 * b.abs().max(1.0) {
                brackets.push((a, b));
                continue;
            }
            let mid = 0.5 * (a + b);
            let cm = self.count_below(mid)?;
            stack.push((mid, cm, b, cb));
            stack.push((a, ca, mid, cm));
        }
        brackets.sort_by(|x, y| x.0.total_cmp(&y.0));
        brackets.truncate(n_cap);
        brackets
            .into_iter()
            .map(|(a, b)| {
                let fine = self.refine(a, b, FINE_TOL)?;
                let coarse = self.refine(a, b, COARSE_TOL)?;
                Ok((fine, (fine - coarse).abs() + 1e-13 * fine.abs().max(1.0)))
            })
            .collect()
    }

    /// The lowest `count` channel eigenvalues.
    pub fn lowest(&self, count: usize) -> Result<Vec<(f64, f64)>> {
        let cap = self.free_level(count.saturating_sub(1)) + 1e-6 * self.free_level(count).abs().max(1.0);
        self.eigenvalues_below(cap, count)
    }
}

/// δ-free channel level `B(2k + 1 + |ν| − ν)`.
pub fn free_level(b: f64, nu: f64, k: usize) -> f64 {
    b * (2.0 * k as f64 + 1.0 + nu.abs() - nu)
}

/// `R_max` from a WKB decay exponent of at least 40 beyond the last turning
/// point of `lambda_cap`, and for positive caps also `B²R_max²/4 ≥ λ + 25`.
pub fn truncation_radius(radius: f64, params: ModelParams, m: i64, lambda_cap: f64) -> f64 {
    let nu = m as f64 - params.c0;
    let b = params.b;
    let u = |r: f64| {
        let w = nu - 0.5 * b * r * r;
        w * w / (r * r)
    };
    let cap = lambda_cap.max(0.0);
    // outer turning point of U(r) = cap, beyond the potential minimum
    let r_min_pot = (2.0 * nu.abs() / b).sqrt();
    let mut r = radius.max(r_min_pot);
    while u(r) < cap {
        r *= 1.05;
    }
    let dr = 1e-3 * r.max(1.0);
    let mut acc = 0.0;
    while acc < DECAY_EXPONENT {
        acc += (u(r) - cap).max(0.0).sqrt() * dr;
        r += dr;
    }
    let confinement = if lambda_cap > 0.0 { 2.0 * (lambda_cap + CONFINEMENT_MARGIN).sqrt() / b } else { 0.0 };
    r.max(confinement).max(radius * 1.5)
}

/// Merged multi-channel spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialSolution {
    pub spectrum: Spectrum,
    /// Angular momentum of each returned eigenvalue.
    pub channels: Vec<i64>,
    pub m_range: (i64, i64),
    /// Lowest eigenvalue of every channel in the range.
    pub channel_ground_states: Vec<(i64, f64)>,
}

/// Default angular-momentum window centred on `round(c₀ + BR²/2)`.
pub fn default_m_range(radius: f64, params: ModelParams, n: usize) -> (i64, i64) {
    let centre = (params.c0 + 0.5 * params.b * radius * radius).round() as i64;
    let w = n.max(3) as i64 + 2;
    (centre - w, centre + w)
}

/// Lowest `n` eigenvalues of the full operator on the circle of radius `R`
/// centred at the flux line, merged over `m ∈ m_range`.
pub fn radial_solve(radius: f64, params: ModelParams, n: usize, m_range: Option<(i64, i64)>) -> Result<RadialSolution> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be positive".into()));
    }
    let (lo, hi) = m_range.unwrap_or_else(|| default_m_range(radius, params, n));
    if hi < lo {
        return Err(Error::InvalidParams("empty angular momentum range".into()));
    }
    let ms: Vec<i64> = (lo..=hi).collect();
    let problems: Vec<RadialProblem> = ms
        .iter()
        .map(|&m| {
            let nu = m as f64 - params.c0;
            RadialProblem::new(radius, params, m, free_level(params.b, nu, n))
        })
        .collect::<Result<_>>()?;
    let grounds: Vec<(f64, f64)> = problems
        .par_iter()
        .map(|p| p.lowest(1).map(|v| v[0]))
        .collect::<Result<_>>()?;
    let mut sorted: Vec<f64> = grounds.iter().map(|g| g.0).collect();
    sorted.sort_by(f64::total_cmp);
    let cap = sorted[(n - 1).min(sorted.len() - 1)];
    let cap = cap + 1e-6 * cap.abs().max(1.0);
    let per_channel: Vec<Vec<(f64, f64)>> = problems.par_iter().map(|p| p.eigenvalues_below(cap, n)).collect::<Result<_>>()?;
    let mut all: Vec<(f64, f64, i64)> = per_channel
        .iter()
        .zip(&ms)
        .flat_map(|(v, &m)| v.iter().map(move |&(l, e)| (l, e, m)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
    all.truncate(n);
    if all.len() < n {
        return Err(Error::Numerical(format!("found {} of {n} radial eigenvalues", all.len())));
    }
    let top = all.last().map(|x| x.0).unwrap_or(f64::NEG_INFINITY);
    let boundary_hit = grounds.first().is_some_and(|g| g.0 <= top) || grounds.last().is_some_and(|g| g.0 <= top);
    if boundary_hit {
        return Err(Error::MRangeInsufficient { lo, hi });
    }
    let spectrum = Spectrum {
        operator: "H".into(),
        params: serde_json::json!({ "radius": radius, "c0": params.c0, "B": params.b, "beta": params.beta }),
        grid: 0,
        eigenvalues: all.iter().map(|x| x.0).collect(),
        error_estimates: all.iter().map(|x| x.1).collect(),
        max_residual: 0.0,
    };
    Ok(RadialSolution {
        spectrum,
        channels: all.iter().map(|x| x.2).collect(),
        m_range: (lo, hi),
        channel_ground_states: ms.iter().zip(&grounds).map(|(&m, g)| (m, g.0)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landau_levels_with_flux() {
        for c0 in [0.25, 0.5, 0.75] {
            let p = ModelParams::degenerate(c0, 1.0, 0.0).unwrap();
            for m in -2..=2 {
                let prob = RadialProblem::new(1.0, p, m, free_level(1.0, m as f64 - c0, 5)).unwrap();
                let got = prob.lowest(3).unwrap();
                for (k, (l, _)) in got.iter().enumerate() {
                    let exact = prob.free_level(k);
                    assert!((l - exact).abs() < 1e-8, "c0={c0} m={m} k={k}: {l} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn counting_matches_levels() {
        let p = ModelParams::degenerate(0.5, 1.0, 0.0).unwrap();
        let prob = RadialProblem::new(1.0, p, 0, 20.0).unwrap();
        // levels 2, 4, 6, ...
        assert_eq!(prob.count_below(1.9).unwrap(), 0);
        assert_eq!(prob.count_below(2.1).unwrap(), 1);
        assert_eq!(prob.count_below(7.0).unwrap(), 3);
    }

    #[test]
    fn deep_bound_state_satisfies_jump() {
        let p = ModelParams::new(0.3, 1.0, 30.0).unwrap();
        let prob = RadialProblem::new(1.0, p, 1, free_level(1.0, 0.7, 2)).unwrap();
        let ev = prob.lowest(1).unwrap();
        let l = ev[0].0;
        assert!((l + 225.0).abs() < 1.0, "{l}");
        assert!(prob.jump_residual(l).unwrap() < 1e-9);
    }

    #[test]
    fn merged_circle_spectrum() {
        let p = ModelParams::new(0.3, 1.0, 30.0).unwrap();
        let sol = radial_solve(1.0, p, 3, None).unwrap();
        let shifted: Vec<f64> = sol.spectrum.eigenvalues.iter().map(|l| l + 225.0).collect();
        assert_eq!(sol.spectrum.eigenvalues.len(), 3);
        assert_eq!(sol.channels, vec![1, 0, 2]);
        assert!(shifted[0] > -0.3 && shifted[0] < -0.1, "{shifted:?}");
        assert!(shifted.windows(2).all(|w| w[0] <= w[1]));
    }
}
