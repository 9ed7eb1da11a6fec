//! Periodic one-dimensional Schrödinger operators `−p d²/ds² + q(s)` on a loop
//! of length `L`, discretized by trigonometric collocation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::coefficients::{fit_linear, CoefficientModel, ModelParams, SupNorms};
use crate::geometry::LoopCurve;
use crate::{Error, Result};

/// Relative threshold under which neighbouring eigenvalues count as one
/// degenerate level.
pub const CLUSTER_TOL: f64 = 1e-8;

type PotentialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `−p d²/ds² + q(s)` with periodic conditions on `[0, L)`.
#[derive(Clone)]
pub struct Periodic1DOperator {
    name: String,
    period: f64,
    p: f64,
    shift: f64,
    q: PotentialFn,
}

impl fmt::Debug for Periodic1DOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Periodic1DOperator")
            .field("name", &self.name)
            .field("period", &self.period)
            .field("p", &self.p)
            .field("shift", &self.shift)
            .finish()
    }
}

impl Periodic1DOperator {
    pub fn new(name: &str, period: f64, p: f64, q: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidParams(format!("kinetic coefficient p = {p} must be positive")));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidParams(format!("period {period} must be positive")));
        }
        Ok(Self { name: name.to_string(), period, p, shift: 0.0, q: Arc::new(q) })
    }

    /// Potential given by uniform periodic samples, extended by trigonometric
    /// interpolation.
    pub fn from_samples(name: &str, period: f64, p: f64, samples: &[f64]) -> Result<Self> {
        let series = crate::numerics::TrigSeries::from_samples(samples, period);
        Self::new(name, period, p, move |s| series.eval(s))
    }

    /// `S = −d²/ds² − γ(s)²/4`.
    pub fn comparison(curve: &LoopCurve) -> Self {
        let c = curve.clone();
        Self::new("S", curve.length(), 1.0, move |s| -0.25 * c.signed_curvature(s).powi(2)).unwrap()
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift += c;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn kinetic(&self) -> f64 {
        self.p
    }

    pub fn potential(&self, s: f64) -> f64 {
        (self.q)(s) + self.shift
    }

    /// Collocation matrix on `grid` uniform points (grid even).
    pub fn matrix(&self, grid: usize) -> DMatrix<f64> {
        let n = grid;
        let h = 2.0 * PI / n as f64;
        let scale = (2.0 * PI / self.period).powi(2);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let d2 = if i == j {
                    -PI * PI / (3.0 * h * h) - 1.0 / 6.0
                } else {
                    let k = i as isize - j as isize;
                    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    -sign / (2.0 * (0.5 * k as f64 * h).sin().powi(2))
                };
                a[(i, j)] = -self.p * scale * d2;
            }
            a[(i, i)] += self.potential(i as f64 * self.period / n as f64);
        }
        a
    }

    fn eigen_at(&self, grid: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
        let a = self.matrix(grid);
        let eig = SymmetricEigen::new(a.clone());
        let mut idx: Vec<usize> = (0..grid).collect();
        idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let vals = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = DMatrix::from_fn(grid, grid, |r, c| eig.eigenvectors[(r, idx[c])]);
        (vals, vecs, a)
    }

    /// Lowest `n` eigenvalues, with an error estimate from one grid doubling.
    pub fn spectrum(&self, n: usize, grid: usize) -> Result<Spectrum> {
        let min = min_grid(n);
        if n == 0 || grid < min {
            return Err(Error::GridTooSmall { got: grid, min });
        }
        let grid = grid + grid % 2;
        let (coarse, _, _) = self.eigen_at(grid);
        let (fine, vecs, a) = self.eigen_at(2 * grid);
        let eigenvalues: Vec<f64> = fine[..n].to_vec();
        let error_estimates = (0..n)
            .map(|k| (fine[k] - coarse[k]).abs() + 1e-13 * fine[k].abs().max(1.0))
            .collect();
        let residual = (0..n)
            .map(|k| {
                let v = vecs.column(k);
                (&a * v - v * fine[k]).norm()
            })
            .fold(0.0, f64::max);
        Ok(Spectrum {
            operator: self.name.clone(),
            params: serde_json::json!({ "period": self.period, "p": self.p, "shift": self.shift }),
            grid: 2 * grid,
            eigenvalues,
            error_estimates,
            max_residual: residual,
        })
    }
}

/// Smallest admissible collocation grid for `n` eigenvalues.
pub fn min_grid(n: usize) -> usize {
    64.max(8 * n)
}

/// Ascending finite list of eigenvalues with error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub operator: String,
    pub params: serde_json::Value,
    pub grid: usize,
    pub eigenvalues: Vec<f64>,
    pub error_estimates: Vec<f64>,
    #[serde(default)]
    pub max_residual: f64,
}

impl Spectrum {
    pub fn from_values(operator: &str, mut eigenvalues: Vec<f64>, error: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let error_estimates = vec![error; eigenvalues.len()];
        Self {
            operator: operator.to_string(),
            params: serde_json::Value::Null,
            grid: 0,
            eigenvalues,
            error_estimates,
            max_residual: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// 1-based access.
    pub fn get(&self, j: usize) -> Option<f64> {
        self.eigenvalues.get(j.checked_sub(1)?).copied()
    }

    /// Distinct levels `(value, multiplicity)`.
    pub fn levels(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.eigenvalues {
            match out.last_mut() {
                Some((w, m)) if (v - *w).abs() <= CLUSTER_TOL * v.abs().max(1.0) => *m += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Lowest `n` eigenvalues `μ_j` of `S = −d²/ds² − γ²/4`.
pub fn effective_spectrum(curve: &LoopCurve, n: usize, grid: usize) -> Result<Spectrum> {
    Periodic1DOperator::comparison(curve).spectrum(n, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "+",
            Side::Minus => "-",
        })
    }
}

/// `U± = −[(1 ∓ aγ₊)⁻² ± N/2] d²/ds² − γ²/4 ± (N/2 + M)`.
pub fn bracket_operator(curve: &LoopCurve, a: f64, side: Side, norms: &SupNorms) -> Result<Periodic1DOperator> {
    let gp = curve.gamma_plus();
    let max = 0.5 / gp;
    if !(a > 0.0 && a < max) {
        return Err(Error::WidthOutOfRange { a, max });
    }
    let sg = side.sign();
    let p = (1.0 - sg * a * gp).powi(-2) + sg * 0.5 * norms.n;
    if !(p > 0.0) {
        return Err(Error::InvalidParams(format!("kinetic coefficient of U{side} is not positive (N = {})", norms.n)));
    }
    let shift = sg * (0.5 * norms.n + norms.m);
    let c = curve.clone();
    let name = format!("U{side}");
    Ok(Periodic1DOperator::new(&name, curve.length(), p, move |s| -0.25 * c.signed_curvature(s).powi(2))?.with_shift(shift))
}

/// Lowest `n` eigenvalues `μ_j±(a)` of `U±`.
pub fn bracket_operator_spectrum(
    curve: &LoopCurve,
    a: f64,
    side: Side,
    norms: &SupNorms,
    n: usize,
    grid: usize,
) -> Result<Spectrum> {
    bracket_operator(curve, a, side, norms)?.spectrum(n, grid)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Est1Row {
    pub a: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub gap_minus: f64,
    pub gap_plus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Est1Report {
    pub j: usize,
    pub mu_j: f64,
    pub rows: Vec<Est1Row>,
    /// Gap ratios between consecutive half-widths.
    pub ratios_minus: Vec<f64>,
    pub ratios_plus: Vec<f64>,
    /// Fitted `C(j)` in `gap ≈ C a` (through the origin).
    pub slope_minus: f64,
    pub slope_plus: f64,
    pub pass: bool,
}

/// Acceptance window for a gap ratio when `a` is halved.
pub const EST1_RATIO_WINDOW: (f64, f64) = (0.4, 0.6);

/// Linear-scaling table from precomputed sup-norms (one entry per half-width).
pub fn est1_from_norms(curve: &LoopCurve, j: usize, norms: &[SupNorms], grid: usize) -> Result<Est1Report> {
    if j == 0 {
        return Err(Error::InvalidParams("eigenvalue index is 1-based".into()));
    }
    let grid = grid.max(min_grid(j));
    let mu = effective_spectrum(curve, j, grid)?.eigenvalues[j - 1];
    let mut rows = Vec::with_capacity(norms.len());
    for nm in norms {
        let lo = bracket_operator_spectrum(curve, nm.a, Side::Minus, nm, j, grid)?.eigenvalues[j - 1];
        let hi = bracket_operator_spectrum(curve, nm.a, Side::Plus, nm, j, grid)?.eigenvalues[j - 1];
        rows.push(Est1Row { a: nm.a, n: nm.n, m: nm.m, mu_minus: lo, mu_plus: hi, gap_minus: (lo - mu).abs(), gap_plus: (hi - mu).abs() });
    }
    let ratios = |f: fn(&Est1Row) -> f64| -> Vec<f64> { rows.windows(2).map(|w| f(&w[1]) / f(&w[0])).collect() };
    let ratios_minus = ratios(|r| r.gap_minus);
    let ratios_plus = ratios(|r| r.gap_plus);
    let a: Vec<f64> = rows.iter().map(|r| r.a).collect();
    let gm: Vec<f64> = rows.iter().map(|r| r.gap_minus).collect();
    let gp: Vec<f64> = rows.iter().map(|r| r.gap_plus).collect();
    let halving = a.windows(2).all(|w| (w[1] / w[0] - 0.5).abs() < 1e-12);
    let (lo, hi) = EST1_RATIO_WINDOW;
    let in_window = |r: &f64| (lo..=hi).contains(r);
    let pass = halving && ratios_minus.iter().all(in_window) && ratios_plus.iter().all(in_window);
    Ok(Est1Report {
        j,
        mu_j: mu,
        ratios_minus,
        ratios_plus,
        slope_minus: fit_linear(&a, &gm).2,
        slope_plus: fit_linear(&a, &gp).2,
        rows,
        pass,
    })
}

/// Linear-scaling probe: `|μ_j±(a) − μ_j|` over a halving sequence of `a`.
pub fn est1_check(
    curve: &LoopCurve,
    params: ModelParams,
    j: usize,
    a_sequence: &[f64],
    field_grid: (usize, usize),
    grid: usize,
) -> Result<Est1Report> {
    use rayon::prelude::*;
    let norms = a_sequence
        .par_iter()
        .map(|&a| CoefficientModel::new(curve, params, a)?.sup_norms(field_grid.0, field_grid.1))
        .collect::<Result<Vec<_>>>()?;
    est1_from_norms(curve, j, &norms, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveSpec;

    #[test]
    fn free_periodic_laplacian() {
        let op = Periodic1DOperator::new("free", 2.0 * PI, 1.0, |_| 0.0).unwrap();
        let sp = op.spectrum(5, 64).unwrap();
        for (v, e) in sp.eigenvalues.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
            assert!((v - e).abs() < 1e-10);
        }
        assert_eq!(sp.levels(), vec![(sp.eigenvalues[0], 1), (sp.eigenvalues[1], 2), (sp.eigenvalues[3], 2)]);
    }

    #[test]
    fn unit_circle_comparison_spectrum() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let sp = effective_spectrum(&c, 5, 64).unwrap();
        for (v, e) in sp.eigenvalues.iter().zip([-0.25, 0.75, 0.75, 3.75, 3.75]) {
            assert!((v - e).abs() < 1e-10, "{v} vs {e}");
        }
        assert!(sp.max_residual < 1e-8);
        let c2 = CurveSpec::Circle { radius: 2.0, center: [0.0, 0.0] }.build(256).unwrap();
        let sp2 = effective_spectrum(&c2, 1, 64).unwrap();
        assert!((sp2.eigenvalues[0] + 1.0 / 16.0).abs() < 1e-10);
    }

    #[test]
    fn grid_requirements() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        assert!(matches!(effective_spectrum(&c, 10, 64), Err(Error::GridTooSmall { .. })));
        assert!(effective_spectrum(&c, 10, 80).is_ok());
    }

    #[test]
    fn ellipse_spectrum_converges() {
        let c = CurveSpec::Ellipse { semi_x: 2.0, semi_y: 1.0, center: [0.0, 0.0] }.build(1024).unwrap();
        let a = effective_spectrum(&c, 6, 64).unwrap();
        let b = effective_spectrum(&c, 6, 128).unwrap();
        for k in 0..6 {
            assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() <= a.error_estimates[k] + 1e-12);
        }
    }

    #[test]
    fn bracket_operators_reduce_to_comparison() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let s = effective_spectrum(&c, 3, 64).unwrap();
        let zero = SupNorms::zero(1e-12);
        for side in [Side::Plus, Side::Minus] {
            let u = bracket_operator_spectrum(&c, 1e-12, side, &zero, 3, 64).unwrap();
            for k in 0..3 {
                assert!((u.eigenvalues[k] - s.eigenvalues[k]).abs() < 1e-9);
            }
        }
        assert!(bracket_operator_spectrum(&c, 0.5, Side::Plus, &zero, 3, 64).is_err());
    }

    #[test]
    fn synthetic_linear_norms_give_linear_gap() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let t = 2.0;
        let norms: Vec<SupNorms> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&a| SupNorms { a, n: t * a, m: t * a, n_argmax: [0.0; 2], m_argmax: [0.0; 2] })
            .collect();
        let rep = est1_from_norms(&c, 1, &norms, 64).unwrap();
        for r in &rep.rows {
            // k = 0 mode: only the constant shift N/2 + M acts
            assert!((r.gap_plus - 1.5 * t * r.a).abs() < 1e-10);
            assert!((r.gap_minus - 1.5 * t * r.a).abs() < 1e-10);
        }
        assert!(rep.pass);
    }

    #[test]
    fn circle_est1_ratios() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let p = ModelParams::new(0.3, 1.0, 10.0).unwrap();
        for j in [1, 2, 3] {
            let rep = est1_check(&c, p, j, &[0.2, 0.1, 0.05, 0.025], (256, 65), 64).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }
}
