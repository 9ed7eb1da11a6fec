//! Two-sided eigenvalue enclosures from the tensor sums `U± ⊗ 1 + 1 ⊗ T±`
//! on a strip of half-width `a(β) = 6 ln β / β`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, ModelParams, SupNorms};
use crate::geometry::LoopCurve;
use crate::spectral1d::{bracket_operator_spectrum, effective_spectrum, min_grid, Side, Spectrum};
use crate::transverse::{transverse_low_spectrum, TransverseProblem, TransverseSpectrum};
use crate::{Error, Result};

/// Fraction of the injectivity half-width used when `6 ln β / β` is too wide.
pub const CLAMP_FACTOR: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSchedule {
    pub beta: f64,
    /// Unclamped `6 ln β / β`.
    pub raw: f64,
    pub a: f64,
    pub clamped: bool,
}

/// `a(β) = 6 ln β / β`, clamped below `CLAMP_FACTOR` times `max_width`.
pub fn width_schedule(beta: f64, max_width: f64) -> Result<WidthSchedule> {
    if !(beta > 1.0) {
        return Err(Error::InvalidParams(format!("width schedule needs beta > 1, got {beta}")));
    }
    let raw = 6.0 * beta.ln() / beta;
    let cap = CLAMP_FACTOR * max_width;
    let clamped = raw > cap;
    Ok(WidthSchedule { beta, raw, a: if clamped { cap } else { raw }, clamped })
}

/// The lowest `n` values of `{ξ_i + μ_k}`, certified against the truncation
/// of both factor lists: every omitted sum is at least
/// `min(ξ_last + μ_1, ξ_1 + μ_last)`.
pub fn tensor_sums(xi: &[f64], mu: &[f64], n: usize) -> Result<Vec<f64>> {
    if xi.is_empty() || mu.is_empty() || n == 0 || n > xi.len() * mu.len() {
        return Err(Error::UncertifiedTensorSum { n });
    }
    let mut xi = xi.to_vec();
    let mut mu = mu.to_vec();
    xi.sort_by(f64::total_cmp);
    mu.sort_by(f64::total_cmp);
    let mut sums: Vec<f64> = xi.iter().flat_map(|x| mu.iter().map(move |m| x + m)).collect();
    sums.sort_by(f64::total_cmp);
    sums.truncate(n);
    let bound = (xi[xi.len() - 1] + mu[0]).min(xi[0] + mu[mu.len() - 1]);
    if sums[n - 1] > bound {
        return Err(Error::UncertifiedTensorSum { n });
    }
    Ok(sums)
}

/// Tensor-sum spectrum of `U ⊗ 1 + 1 ⊗ T`.
pub fn tensor_sum_spectrum(one_d: &Spectrum, transverse: &TransverseSpectrum, n: usize) -> Result<Spectrum> {
    let sums = tensor_sums(&transverse.values(), &one_d.eigenvalues, n)?;
    let err = one_d.error_estimates.iter().cloned().fold(0.0, f64::max);
    let mut out = Spectrum::from_values(&format!("{}+T", one_d.operator), sums, err);
    out.params = serde_json::json!({ "one_d": one_d.params, "transverse": transverse.problem });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnclosureOptions {
    pub field_ns: usize,
    pub field_nu: usize,
    pub grid: usize,
    /// Extra eigenvalues of each factor beyond `n`, used for certification.
    pub extra: usize,
}

impl Default for EnclosureOptions {
    fn default() -> Self {
        Self { field_ns: 256, field_nu: 65, grid: 64, extra: 4 }
    }
}

/// Proof-side ordering conditions, rechecked numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnclosureFlags {
    pub width_clamped: bool,
    /// `τ⁻_j ≤ τ⁺_j`.
    pub ordered: bool,
    /// `τ⁺_j < 0`.
    pub tau_plus_negative: bool,
    /// `ξ±₂ ≥ 0`.
    pub xi2_nonnegative: bool,
    /// Exactly one negative transverse eigenvalue on each side.
    pub unique_transverse: bool,
    /// `τ±_j < ξ±₂ + μ±₁`, so `τ±_j` is the j-th tensor sum.
    pub separated: bool,
}

impl EnclosureFlags {
    pub fn verified(&self) -> bool {
        !self.width_clamped && self.ordered && self.tau_plus_negative && self.xi2_nonnegative && self.unique_transverse && self.separated
    }

    pub fn describe(&self) -> String {
        let mut out = Vec::new();
        for (ok, name) in [
            (!self.width_clamped, "clamped"),
            (self.ordered, "unordered"),
            (self.tau_plus_negative, "tau_plus_nonnegative"),
            (self.xi2_nonnegative, "xi2_negative"),
            (self.unique_transverse, "transverse_not_unique"),
            (self.separated, "not_separated"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        if out.is_empty() {
            "ok".into()
        } else {
            out.join("|")
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnclosureEntry {
    pub j: usize,
    pub tau_minus: f64,
    pub tau_plus: f64,
    /// Numerical error attached to `τ±` (from the 1D eigen-solves).
    pub error: f64,
    pub mu_j: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub flags: EnclosureFlags,
}

impl EnclosureEntry {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.tau_minus + self.tau_plus)
    }

    pub fn width(&self) -> f64 {
        self.tau_plus - self.tau_minus
    }

    pub fn contains(&self, x: f64, eps: f64) -> bool {
        self.tau_minus - eps <= x && x <= self.tau_plus + eps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketEnclosure {
    pub beta: f64,
    pub params: ModelParams,
    pub schedule: WidthSchedule,
    pub norms: SupNorms,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    /// Offsets `ζ± + β²/4`.
    pub zeta_plus_offset: f64,
    pub zeta_minus_offset: f64,
    pub entries: Vec<EnclosureEntry>,
    /// Lowest tensor sums of each side (length `n`).
    pub sums_minus: Vec<f64>,
    pub sums_plus: Vec<f64>,
    /// Factor spectra used for the sums.
    pub mu_minus: Vec<f64>,
    pub mu_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    pub xi_plus: Vec<f64>,
}

impl BracketEnclosure {
    pub fn entry(&self, j: usize) -> Option<&EnclosureEntry> {
        self.entries.get(j.checked_sub(1)?)
    }

    pub fn write_csv(&self, mut out: impl Write, header: bool) -> Result<()> {
        if header {
            writeln!(out, "beta,a,j,tau_minus,tau_plus,mu_j,zeta_plus,zeta_minus,flags")?;
        }
        for e in &self.entries {
            writeln!(
                out,
                "{},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                self.beta,
                self.schedule.a,
                e.j,
                e.tau_minus,
                e.tau_plus,
                e.mu_j,
                self.zeta_plus,
                self.zeta_minus,
                e.flags.describe()
            )?;
        }
        Ok(())
    }
}

fn first_negative(t: &TransverseSpectrum, a: f64, beta: f64) -> Result<(f64, f64)> {
    let l = t.negative().next().ok_or(Error::MissingTransverseEigenvalue { a, beta })?;
    Ok((l.value, l.offset))
}

/// Enclosures `[τ⁻_j, τ⁺_j]`, `j = 1..n`, at coupling `β`.
pub fn enclosure(curve: &LoopCurve, params: ModelParams, beta: f64, n: usize, opts: &EnclosureOptions) -> Result<BracketEnclosure> {
    let params = params.with_beta(beta)?;
    let gp = curve.gamma_plus();
    let max_width = curve.injectivity_halfwidth().min(curve.distance_to([0.0, 0.0]) * CLAMP_FACTOR);
    let schedule = width_schedule(beta, max_width)?;
    let a = schedule.a;
    let norms = CoefficientModel::new(curve, params, a)?.sup_norms(opts.field_ns, opts.field_nu)?;
    enclosure_with_norms(curve, params, schedule, norms, gp, n, opts)
}

/// Assembly step of [`enclosure`] with the sup-norms supplied.
pub fn enclosure_with_norms(
    curve: &LoopCurve,
    params: ModelParams,
    schedule: WidthSchedule,
    norms: SupNorms,
    gamma_plus: f64,
    n: usize,
    opts: &EnclosureOptions,
) -> Result<BracketEnclosure> {
    let (a, beta) = (schedule.a, schedule.beta);
    let count = n + opts.extra;
    let grid = opts.grid.max(min_grid(count));
    let mu = effective_spectrum(curve, n, grid)?;
    let u_minus = bracket_operator_spectrum(curve, a, Side::Minus, &norms, count, grid)?;
    let u_plus = bracket_operator_spectrum(curve, a, Side::Plus, &norms, count, grid)?;
    let t_minus = transverse_low_spectrum(&TransverseProblem::new(a, beta, gamma_plus, Side::Minus)?, count)?;
    let t_plus = transverse_low_spectrum(&TransverseProblem::new(a, beta, gamma_plus, Side::Plus)?, count)?;
    let (zm, zm_off) = first_negative(&t_minus, a, beta)?;
    let (zp, zp_off) = first_negative(&t_plus, a, beta)?;
    let sums_minus = tensor_sum_spectrum(&u_minus, &t_minus, n)?.eigenvalues;
    let sums_plus = tensor_sum_spectrum(&u_plus, &t_plus, n)?.eigenvalues;
    let xi2_m = t_minus.xi2().unwrap_or(f64::INFINITY);
    let xi2_p = t_plus.xi2().unwrap_or(f64::INFINITY);
    let entries = (1..=n)
        .map(|j| {
            let mm = u_minus.eigenvalues[j - 1];
            let mp = u_plus.eigenvalues[j - 1];
            let tau_minus = zm + mm;
            let tau_plus = zp + mp;
            let flags = EnclosureFlags {
                width_clamped: schedule.clamped,
                ordered: tau_minus <= tau_plus,
                tau_plus_negative: tau_plus < 0.0,
                xi2_nonnegative: xi2_m >= 0.0 && xi2_p >= 0.0,
                unique_transverse: t_minus.negative_count() == 1 && t_plus.negative_count() == 1,
                separated: tau_minus < xi2_m + u_minus.eigenvalues[0] && tau_plus < xi2_p + u_plus.eigenvalues[0],
            };
            EnclosureEntry {
                j,
                tau_minus,
                tau_plus,
                error: u_minus.error_estimates[j - 1].max(u_plus.error_estimates[j - 1]),
                mu_j: mu.eigenvalues[j - 1],
                mu_minus: mm,
                mu_plus: mp,
                flags,
            }
        })
        .collect();
    Ok(BracketEnclosure {
        beta,
        params,
        schedule,
        norms,
        zeta_plus: zp,
        zeta_minus: zm,
        zeta_plus_offset: zp_off,
        zeta_minus_offset: zm_off,
        entries,
        sums_minus,
        sums_plus,
        mu_minus: u_minus.eigenvalues,
        mu_plus: u_plus.eigenvalues,
        xi_minus: t_minus.values(),
        xi_plus: t_plus.values(),
    })
}

/// Enclosures over a β-grid, evaluated in parallel and returned in input
/// order.
pub fn enclosure_sweep(curve: &LoopCurve, params: ModelParams, betas: &[f64], n: usize, opts: &EnclosureOptions) -> Result<Vec<BracketEnclosure>> {
    betas.par_iter().map(|&b| enclosure(curve, params, b, n, opts)).collect()
}

/// Least-squares fit `y(β) ≈ L + C ln β / β`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub betas: Vec<f64>,
    /// Point estimates of `λ_j + β²/4`.
    pub shifted: Vec<f64>,
    pub limit: f64,
    pub c: f64,
    pub residuals: Vec<f64>,
    /// `‖residual‖ / ‖y − L‖`.
    pub relative_residual: f64,
    /// `y − L`.
    pub corrections: Vec<f64>,
    /// `|y − L|` is strictly decreasing along the β-grid.
    pub decreasing: bool,
    /// Reference comparison value (the flux-free `μ_j`) and its gap to `L`.
    pub reference: Option<f64>,
    pub reference_gap: Option<f64>,
}

pub fn fit_log_over_beta(betas: &[f64], shifted: &[f64], reference: Option<f64>) -> Result<AsymptoticFit> {
    if betas.len() < 4 || betas.len() != shifted.len() {
        return Err(Error::InvalidParams("asymptotic fit needs at least four beta points".into()));
    }
    let x: Vec<f64> = betas.iter().map(|b| b.ln() / b).collect();
    let (c, limit, _) = crate::coefficients::fit_linear(&x, shifted);
    let residuals: Vec<f64> = x.iter().zip(shifted).map(|(x, y)| y - (limit + c * x)).collect();
    let corrections: Vec<f64> = shifted.iter().map(|y| y - limit).collect();
    let norm = |v: &[f64]| v.iter().map(|r| r * r).sum::<f64>().sqrt();
    let relative_residual = norm(&residuals) / norm(&corrections).max(f64::MIN_POSITIVE);
    let decreasing = corrections.windows(2).all(|w| w[1].abs() < w[0].abs());
    Ok(AsymptoticFit {
        betas: betas.to_vec(),
        shifted: shifted.to_vec(),
        limit,
        c,
        residuals,
        relative_residual,
        corrections,
        decreasing,
        reference,
        reference_gap: reference.map(|r| limit - r),
    })
}

/// Fits the enclosure midpoints of index `j`.
pub fn asymptotic_fit(enclosures: &[BracketEnclosure], j: usize) -> Result<AsymptoticFit> {
    let mut betas = Vec::new();
    let mut shifted = Vec::new();
    let mut reference = None;
    for e in enclosures {
        let entry = e.entry(j).ok_or_else(|| Error::InvalidParams(format!("index {j} missing from enclosure")))?;
        betas.push(e.beta);
        shifted.push(entry.midpoint() + 0.25 * e.beta * e.beta);
        reference = Some(entry.mu_j);
    }
    fit_log_over_beta(&betas, &shifted, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveSpec;

    #[test]
    fn schedule_values() {
        let s = width_schedule(50.0, 1.0).unwrap();
        assert!((s.a - 0.469_442_8).abs() < 1e-6 && !s.clamped);
        let s = width_schedule(1000.0, 1.0).unwrap();
        assert!((s.a - 0.041_446_5).abs() < 1e-6);
        let s = width_schedule(std::f64::consts::E, 0.5).unwrap();
        assert!((s.raw - 6.0 / std::f64::consts::E).abs() < 1e-12);
        assert!(s.clamped && (s.a - 0.495).abs() < 1e-12);
        assert!(width_schedule(1.0, 1.0).is_err());
    }

    #[test]
    fn merge_example() {
        let s = tensor_sums(&[-25.0, 9.8], &[-0.25, 0.75, 0.75], 3).unwrap();
        assert_eq!(s, vec![-25.25, -24.25, -24.25]);
        assert_eq!(tensor_sums(&[1.0], &[2.0], 1).unwrap(), vec![3.0]);
        assert!(tensor_sums(&[-25.0, -24.0], &[0.0, 0.5], 3).is_err());
    }

    #[test]
    fn tensor_shift() {
        let xi = [-30.0, 2.0, 5.0];
        let mu = [-0.2, 0.6, 0.6, 3.1];
        let a = tensor_sums(&xi, &mu, 4).unwrap();
        let shifted: Vec<f64> = xi.iter().map(|x| x + 1.5).collect();
        let b = tensor_sums(&shifted, &mu, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_fit() {
        let betas = [50.0, 100.0, 200.0, 400.0];
        let y: Vec<f64> = betas.iter().map(|b: &f64| 0.7 + 3.0 * b.ln() / b).collect();
        let f = fit_log_over_beta(&betas, &y, Some(0.5)).unwrap();
        assert!((f.c - 3.0).abs() < 1e-6);
        assert!((f.limit - 0.7).abs() < 1e-8);
        assert!(f.relative_residual < 1e-6 && f.decreasing);
        assert!((f.reference_gap.unwrap() - 0.2).abs() < 1e-8);
    }

    #[test]
    fn circle_enclosure_is_consistent() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let p = ModelParams::new(0.3, 1.0, 50.0).unwrap();
        let e = enclosure(&c, p, 400.0, 3, &EnclosureOptions::default()).unwrap();
        for entry in &e.entries {
            assert!(entry.flags.ordered);
            assert!(entry.tau_plus < 0.0);
            assert!(entry.contains(entry.mu_j - 0.25 * 400.0f64.powi(2), 1e-9));
        }
        assert!(e.entries[0].flags.verified(), "{:?}", e.entries[0].flags);
        for j in 0..3 {
            assert!((e.sums_minus[j] - e.entries[j].tau_minus).abs() < 1e-9);
            assert!((e.sums_plus[j] - e.entries[j].tau_plus).abs() < 1e-9);
        }
    }
}
