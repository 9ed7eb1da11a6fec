//! Transverse operators `T±` on `(−a, a)`: an attractive δ-well of strength
//! `β` at `u = 0`, with Dirichlet ends (`+`) or the Robin ends
//! `f'(±a) = ±γ₊ f(±a)` produced by the boundary term `−γ₊(|f(a)|² + |f(−a)|²)`
//! (`−`).
//!
//! Eigenvalues come from the parity-split matching conditions. Negative
//! eigenvalues `−k²` are returned together with their offset `ζ + β²/4`,
//! computed in a cancellation-free form because it is exponentially small
//! for large `βa`.

use serde::{Deserialize, Serialize};

use crate::numerics::roots::{bisect, brent};
use crate::spectral1d::Side;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseProblem {
    pub a: f64,
    pub beta: f64,
    pub gamma_plus: f64,
    pub side: Side,
}

impl TransverseProblem {
    pub fn new(a: f64, beta: f64, gamma_plus: f64, side: Side) -> Result<Self> {
        if !(a > 0.0) || !(beta >= 0.0) || !(gamma_plus >= 0.0) {
            return Err(Error::InvalidParams(format!("transverse problem needs a > 0, beta >= 0, gamma+ >= 0 (a={a}, beta={beta}, gamma+={gamma_plus})")));
        }
        Ok(Self { a, beta, gamma_plus, side })
    }

    /// Robin coefficient, `None` for Dirichlet ends.
    fn robin(&self) -> Option<f64> {
        match self.side {
            Side::Plus => None,
            Side::Minus => Some(self.gamma_plus),
        }
    }
}

/// One eigenvalue of `T±`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseLevel {
    pub value: f64,
    pub parity: Parity,
    /// `k = √(−ζ)` for negative levels, `q = √ζ` for positive ones.
    pub wavenumber: f64,
    /// `ζ + β²/4`, accurate even when it is below the resolution of `ζ`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseSpectrum {
    pub problem: TransverseProblem,
    pub levels: Vec<TransverseLevel>,
}

impl TransverseSpectrum {
    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.value).collect()
    }

    pub fn negative(&self) -> impl Iterator<Item = &TransverseLevel> {
        self.levels.iter().filter(|l| l.value < 0.0)
    }

    pub fn negative_count(&self) -> usize {
        self.negative().count()
    }

    /// `ξ₂`, the second eigenvalue.
    pub fn xi2(&self) -> Option<f64> {
        self.levels.get(1).map(|l| l.value)
    }
}

/// `1 − tanh(x)` without cancellation.
fn one_minus_tanh(x: f64) -> f64 {
    2.0 / ((2.0 * x).exp() + 1.0)
}

fn tanh_over_k(k: f64, a: f64) -> f64 {
    if k * a < 1e-4 {
        let x = k * a;
        a * (1.0 - x * x / 3.0)
    } else {
        (k * a).tanh() / k
    }
}

/// Even-mode matching function for a negative eigenvalue `−k²`; with
/// Dirichlet ends this is `tanh(ka) − 2k/β` up to a positive factor.
fn even_negative(k: f64, a: f64, beta: f64, robin: Option<f64>) -> f64 {
    let Some(g) = robin else {
        return (k * a).tanh() - 2.0 * k / beta;
    };
    let t = (k * a).tanh();
    2.0 * (k * t - g) - beta * (1.0 - g * tanh_over_k(k, a))
}

/// Solves the fixed point for `δ = k − β/2` once `ka` is large, where the
/// raw root cannot resolve `ζ + β²/4`.
fn refine_offset(k0: f64, a: f64, beta: f64, robin: Option<f64>) -> (f64, f64) {
    let half = 0.5 * beta;
    let Some(g) = robin else {
        // tanh(ka) = 2k/β  ⇒  k = (β/2)(1 − ε)
        let mut k = k0;
        for _ in 0..50 {
            let next = half * (1.0 - one_minus_tanh(k * a));
            if next == k {
                break;
            }
            k = next;
        }
        let eps = one_minus_tanh(k * a);
        return (k, half * half * eps * (2.0 - eps));
    };
    let mut delta = k0 - half;
    for _ in 0..50 {
        let k = half + delta;
        let eps = one_minus_tanh(k * a);
        let next = eps * (2.0 * k * k + g * beta) / (2.0 * (k - g));
        if next == delta {
            break;
        }
        delta = next;
    }
    (half + delta, -delta * (beta + delta))
}

/// All negative even-mode roots, ascending in `ζ`.
fn even_negative_roots(a: f64, beta: f64, robin: Option<f64>) -> Vec<f64> {
    let kmax = 0.5 * beta + robin.unwrap_or(0.0) + 2.0 + 10.0 / a;
    let f = |k: f64| even_negative(k, a, beta, robin);
    let mut roots = Vec::new();
    if robin.is_none() {
        // seeds around β/2, widened geometrically
        if beta * a <= 2.0 {
            return roots;
        }
        let hi = 0.5 * beta * 1.1;
        let mut lo = 0.5 * beta * 0.9;
        while f(lo) <= 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return roots;
            }
        }
        roots.push(bisect(f, lo, hi, 0.0));
        return roots;
    }
    let steps = 4000;
    let mut prev_k = 1e-9 * kmax;
    let mut prev = f(prev_k);
    for i in 1..=steps {
        let k = kmax * i as f64 / steps as f64;
        let v = f(k);
        if v == 0.0 {
            roots.push(k);
        } else if prev != 0.0 && (v < 0.0) != (prev < 0.0) {
            roots.push(bisect(f, prev_k, k, 0.0));
        }
        prev_k = k;
        prev = v;
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    roots
}

/// Odd negative roots `γ tanh(ka) = k` (only for Robin ends with `γa > 1`).
fn odd_negative_root(a: f64, robin: Option<f64>) -> Option<f64> {
    let g = robin?;
    if g * a <= 1.0 {
        return None;
    }
    let f = |k: f64| g * (k * a).tanh() - k;
    Some(bisect(f, 1e-12 * g, g * 1.0001, 0.0))
}

/// Negative eigenvalue of `T⁺`, if any (exists iff `βa > 2`).
pub fn zeta_plus(a: f64, beta: f64) -> Option<TransverseLevel> {
    negative_levels(&TransverseProblem { a, beta, gamma_plus: 0.0, side: Side::Plus }).into_iter().next()
}

/// Lowest negative eigenvalue of `T⁻`, plus the number of negative
/// eigenvalues found (uniqueness is only guaranteed for `β > 8`,
/// `β > 8γ₊/3`).
pub fn zeta_minus(a: f64, beta: f64, gamma_plus: f64) -> Result<(TransverseLevel, usize)> {
    let levels = negative_levels(&TransverseProblem { a, beta, gamma_plus, side: Side::Minus });
    let first = *levels.first().ok_or(Error::MissingTransverseEigenvalue { a, beta })?;
    Ok((first, levels.len()))
}

fn negative_levels(p: &TransverseProblem) -> Vec<TransverseLevel> {
    let robin = p.robin();
    if p.beta <= 0.0 && robin.unwrap_or(0.0) == 0.0 {
        return Vec::new();
    }
    let g = robin.unwrap_or(0.0);
    let mut out: Vec<TransverseLevel> = even_negative_roots(p.a, p.beta, robin)
        .into_iter()
        .map(|k| {
            let (k, offset) = if k * p.a > 3.0 && (k - g) > 0.25 * p.beta { refine_offset(k, p.a, p.beta, robin) } else { (k, 0.25 * p.beta * p.beta - k * k) };
            TransverseLevel { value: -k * k, parity: Parity::Even, wavenumber: k, offset }
        })
        .collect();
    if let Some(k) = odd_negative_root(p.a, robin) {
        out.push(TransverseLevel { value: -k * k, parity: Parity::Odd, wavenumber: k, offset: 0.25 * p.beta * p.beta - k * k });
    }
    out.sort_by(|x, y| x.value.total_cmp(&y.value));
    out
}

fn even_positive(q: f64, a: f64, beta: f64, robin: Option<f64>) -> f64 {
    let (s, c) = (q * a).sin_cos();
    if let Some(g) = robin {
        let sinc = if q * a < 1e-6 { a } else { s / q };
        2.0 * (q * s + g * c) + beta * (c - g * sinc)
    } else {
        2.0 * q * c - beta * s
    }
}

fn odd_positive(q: f64, a: f64, robin: Option<f64>) -> f64 {
    let (s, c) = (q * a).sin_cos();
    match robin {
        Some(g) => q * c - g * s,
        None => s,
    }
}

/// The lowest `count` eigenvalues of `T±`, ascending, with parity tags.
pub fn transverse_low_spectrum(problem: &TransverseProblem, count: usize) -> Result<TransverseSpectrum> {
    if count < 2 {
        return Err(Error::InvalidParams("transverse spectrum needs count >= 2".into()));
    }
    let (a, beta, g) = (problem.a, problem.beta, problem.robin());
    let mut levels = negative_levels(problem);
    let dq = std::f64::consts::PI / a / 64.0;
    let mut q_lo = 1e-9 * dq;
    let mut fe = even_positive(q_lo, a, beta, g);
    let mut fo = odd_positive(q_lo, a, g);
    let mut positives = Vec::new();
    // odd Dirichlet modes are exactly nπ/a
    let exact_odd = g.is_none();
    let mut n_odd = 1;
    while positives.len() + levels.len() < count + 2 {
        let q_hi = q_lo + dq;
        let ve = even_positive(q_hi, a, beta, g);
        if ve != fe && (ve < 0.0) != (fe < 0.0) {
            let q = brent(|q| even_positive(q, a, beta, g), q_lo, q_hi, 1e-15 * q_hi);
            positives.push(TransverseLevel { value: q * q, parity: Parity::Even, wavenumber: q, offset: q * q + 0.25 * beta * beta });
        }
        fe = ve;
        if exact_odd {
            let q = n_odd as f64 * std::f64::consts::PI / a;
            if q <= q_hi {
                positives.push(TransverseLevel { value: q * q, parity: Parity::Odd, wavenumber: q, offset: q * q + 0.25 * beta * beta });
                n_odd += 1;
            }
        } else {
            let vo = odd_positive(q_hi, a, g);
            if vo != fo && (vo < 0.0) != (fo < 0.0) {
                let q = brent(|q| odd_positive(q, a, g), q_lo, q_hi, 1e-15 * q_hi);
                positives.push(TransverseLevel { value: q * q, parity: Parity::Odd, wavenumber: q, offset: q * q + 0.25 * beta * beta });
            }
            fo = vo;
        }
        q_lo = q_hi;
    }
    levels.extend(positives);
    levels.sort_by(|x, y| x.value.total_cmp(&y.value));
    levels.truncate(count);
    Ok(TransverseSpectrum { problem: *problem, levels })
}

/// Bounds on the lowest transverse levels. Each envelope is evaluated with the
/// literal exponent `e^{−β/2}` and with `e^{−βa/2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Est2Report {
    pub a: f64,
    pub beta: f64,
    pub gamma_plus: f64,
    pub zeta_plus: Option<f64>,
    pub zeta_plus_offset: Option<f64>,
    pub zeta_minus: Option<f64>,
    pub zeta_minus_offset: Option<f64>,
    pub negative_count_minus: usize,
    /// `βa > 8/3`.
    pub regime_a: bool,
    /// `β > 8` and `β > 8γ₊/3`.
    pub regime_b: bool,
    /// `−β²/4 < ζ⁺`.
    pub lower_plus: bool,
    /// `ζ⁻ < −β²/4`.
    pub upper_minus: bool,
    /// `ζ⁺ < −β²/4 + 2β² e^{−β/2}` (literal) and with `e^{−βa/2}` (scaled).
    pub upper_plus_literal: bool,
    pub upper_plus_scaled: bool,
    /// `ζ⁻ > −β²/4 − (2205/16) β² e^{−β/2}` and the scaled variant.
    pub lower_minus_literal: bool,
    pub lower_minus_scaled: bool,
}

impl Est2Report {
    /// Strict bounds that do not involve the exponential envelopes.
    pub fn strict_bounds_hold(&self) -> bool {
        self.lower_plus && self.upper_minus
    }

    pub fn records(&self) -> Vec<Est2Record> {
        vec![
            Est2Record {
                a: self.a,
                beta: self.beta,
                gamma_plus: self.gamma_plus,
                side: Side::Plus,
                zeta: self.zeta_plus,
                bound_literal_pass: self.lower_plus && self.upper_plus_literal,
                bound_scaled_pass: self.lower_plus && self.upper_plus_scaled,
            },
            Est2Record {
                a: self.a,
                beta: self.beta,
                gamma_plus: self.gamma_plus,
                side: Side::Minus,
                zeta: self.zeta_minus,
                bound_literal_pass: self.upper_minus && self.lower_minus_literal,
                bound_scaled_pass: self.upper_minus && self.lower_minus_scaled,
            },
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Est2Record {
    pub a: f64,
    #[serde(rename = "β")]
    pub beta: f64,
    #[serde(rename = "γ₊")]
    pub gamma_plus: f64,
    pub side: Side,
    pub zeta: Option<f64>,
    pub bound_literal_pass: bool,
    pub bound_scaled_pass: bool,
}

pub fn est2_check(a: f64, beta: f64, gamma_plus: f64) -> Est2Report {
    let zp = zeta_plus(a, beta);
    let zm = zeta_minus(a, beta, gamma_plus).ok();
    let b2 = beta * beta;
    let lit = (-0.5 * beta).exp();
    let scaled = (-0.5 * beta * a).exp();
    let zp_off = zp.map(|l| l.offset);
    let zm_off = zm.map(|(l, _)| l.offset);
    Est2Report {
        a,
        beta,
        gamma_plus,
        zeta_plus: zp.map(|l| l.value),
        zeta_plus_offset: zp_off,
        zeta_minus: zm.map(|(l, _)| l.value),
        zeta_minus_offset: zm_off,
        negative_count_minus: zm.map_or(0, |(_, n)| n),
        regime_a: beta * a > 8.0 / 3.0,
        regime_b: beta > 8.0 && beta > 8.0 * gamma_plus / 3.0,
        lower_plus: zp_off.is_some_and(|o| o > 0.0),
        upper_minus: zm_off.is_some_and(|o| o < 0.0),
        upper_plus_literal: zp_off.is_some_and(|o| o < 2.0 * b2 * lit),
        upper_plus_scaled: zp_off.is_some_and(|o| o < 2.0 * b2 * scaled),
        lower_minus_literal: zm_off.is_some_and(|o| o > -2205.0 / 16.0 * b2 * lit),
        lower_minus_scaled: zm_off.is_some_and(|o| o > -2205.0 / 16.0 * b2 * scaled),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_well_reference_value() {
        let z = zeta_plus(1.0, 20.0).unwrap();
        let k = z.wavenumber;
        assert!(((k * 1.0).tanh() - 2.0 * k / 20.0).abs() < 1e-14);
        assert!(z.value > -100.0 && z.value < -99.99);
        assert!(z.offset > 0.0 && (z.value + 100.0 - z.offset).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_threshold() {
        assert!(zeta_plus(1.0, 2.0).is_none());
        assert!(zeta_plus(1.0, 1.5).is_none());
        assert!(zeta_plus(1.0, 2.01).is_some());
    }

    #[test]
    fn offset_matches_asymptotics_for_large_coupling() {
        let z = zeta_plus(1.0, 80.0).unwrap();
        // ζ + β²/4 ≈ β² e^{−βa}
        let approx = 80.0f64.powi(2) * (-80.0f64).exp();
        assert!((z.offset / approx - 1.0).abs() < 1e-6);
    }

    #[test]
    fn robin_root_and_ordering() {
        let (z1, count) = zeta_minus(1.0, 20.0, 1.0).unwrap();
        assert_eq!(count, 1);
        assert!(z1.offset < 0.0);
        let (z0, _) = zeta_minus(1.0, 20.0, 0.0).unwrap();
        let zp = zeta_plus(1.0, 20.0).unwrap();
        assert!(z0.value <= zp.value);
        assert!(z1.value < z0.value);
        let margin = 2205.0 / 16.0 * 400.0 * (-10.0f64).exp();
        assert!(z1.value > -100.0 - margin);
    }

    #[test]
    fn parity_split_dirichlet_spectrum() {
        let p = TransverseProblem::new(1.0, 20.0, 0.0, Side::Plus).unwrap();
        let sp = transverse_low_spectrum(&p, 5).unwrap();
        assert_eq!(sp.negative_count(), 1);
        let odd: Vec<f64> = sp.levels.iter().filter(|l| l.parity == Parity::Odd).map(|l| l.value).collect();
        for (n, v) in odd.iter().enumerate() {
            let q = (n + 1) as f64 * std::f64::consts::PI;
            assert!((v - q * q).abs() < 1e-12 * q * q);
        }
        assert!(sp.xi2().unwrap() >= 0.0);
    }

    #[test]
    fn box_spectrum_without_coupling() {
        let p = TransverseProblem::new(0.5, 0.0, 0.0, Side::Plus).unwrap();
        let sp = transverse_low_spectrum(&p, 6).unwrap();
        for (k, v) in sp.values().iter().enumerate() {
            let e = ((k + 1) as f64 * std::f64::consts::PI / 1.0).powi(2);
            assert!((v - e).abs() < 1e-10 * e, "{v} vs {e}");
        }
    }

    #[test]
    fn est2_reference_pair() {
        let r = est2_check(1.0, 20.0, 1.0);
        assert!(r.regime_a && r.regime_b);
        assert!(r.strict_bounds_hold());
        assert!(r.upper_plus_literal && r.upper_plus_scaled);
        assert_eq!(r.records().len(), 2);
    }
}
