//! Coefficient fields of the magnetic quadratic form written in the tubular
//! coordinates `(s, u)` of a loop, with the Aharonov–Bohm flux line at the
//! coordinate origin.
//!
//! Field names follow their role in the form:
//!
//! * `theta = 1/|Ψ(s,u)|²` (inverse squared distance to the flux line),
//! * `alpha1 = θ⁻¹ (c₀θ + B/2)²` (the `|A|²` term),
//! * `alpha2 = (2c₀θ + B)(Γ₂ + uΓ₁')`, `alpha3 = (2c₀θ + B)(Γ₁ − uΓ₂')`,
//! * `omega1`, `omega2`: coefficients of `Im ḡ∂_s g` and `Im ḡ∂_u g`,
//! * `k`: gauge phase removing the `∂_u` cross term, `k_u = omega2 / 2`,
//! * `v`: curvature-induced potential, `w`: total effective scalar potential.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{CurveJet, LoopCurve};
use crate::numerics::fourier::spectral_derivative;
use crate::numerics::quadrature::integrate_composite;
use crate::numerics::roots::golden_max;
use crate::numerics::TrigSeries;
use crate::{Error, Result};

/// Model parameters `(c₀, B, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c0: f64,
    pub b: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl ModelParams {
    /// Admissible parameters: `c₀ ∈ (0,1)`, `B > 0`, `β > 0`.
    pub fn new(c0: f64, b: f64, beta: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::InvalidParams(format!("c0 = {c0} must lie in (0, 1)")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParams(format!("B = {b} must be positive")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta = {beta} must be positive")));
        }
        Ok(Self { c0, b, beta, degenerate: false })
    }

    /// Relaxed constructor allowing the limits `c₀ = 0`, `B = 0` or `β = 0`.
    /// Only meant for regression anchors against the pure-field and pure-flux
    /// cases.
    pub fn degenerate(c0: f64, b: f64, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c0) || !(b >= 0.0) || !(beta >= 0.0) {
            return Err(Error::InvalidParams(format!("degenerate parameters out of range: c0={c0}, B={b}, beta={beta}")));
        }
        Ok(Self { c0, b, beta, degenerate: true })
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        if self.degenerate {
            Self::degenerate(self.c0, self.b, beta)
        } else {
            Self::new(self.c0, self.b, beta)
        }
    }

    pub fn with_c0(self, c0: f64) -> Result<Self> {
        if self.degenerate {
            Self::degenerate(c0, self.b, self.beta)
        } else {
            Self::new(c0, self.b, self.beta)
        }
    }
}

/// Tensor grid `s_i = iL/ns` (periodic) × `u_j = −a + 2aj/(nu−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub length: f64,
    pub a: f64,
    pub ns: usize,
    pub nu: usize,
}

impl StripGrid {
    pub const MIN_NS: usize = 64;
    pub const MIN_NU: usize = 33;

    pub fn new(length: f64, a: f64, ns: usize, nu: usize) -> Result<Self> {
        if ns < Self::MIN_NS || nu < Self::MIN_NU {
            return Err(Error::GridTooSmall { got: ns.min(nu), min: Self::MIN_NU });
        }
        Ok(Self { length, a, ns, nu })
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.length / self.ns as f64
    }

    pub fn u(&self, j: usize) -> f64 {
        -self.a + 2.0 * self.a * j as f64 / (self.nu - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.ns * self.nu
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Real scalar field on a [`StripGrid`], row-major in `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripField {
    pub name: String,
    pub grid: StripGrid,
    pub values: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 4] = b"SFLD";
const BINARY_VERSION: u32 = 1;

impl StripField {
    fn from_values(name: &str, grid: StripGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { name: name.to_string(), grid, values }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nu + j]
    }

    /// Values along `s` at fixed `u_j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.grid.ns).map(|i| self.at(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn argmax_abs(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, -1.0);
        for i in 0..self.grid.ns {
            for j in 0..self.grid.nu {
                let v = self.at(i, j).abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }

    /// Largest variation along `s` over all `u`-columns.
    pub fn max_s_variation(&self) -> f64 {
        (0..self.grid.nu)
            .map(|j| {
                let col = self.column(j);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// CSV with header `s,u,value`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "s,u,{}", self.name)?;
        for i in 0..self.grid.ns {
            for j in 0..self.grid.nu {
                writeln!(out, "{:.17e},{:.17e},{:.17e}", self.grid.s(i), self.grid.u(j), self.at(i, j))?;
            }
        }
        Ok(())
    }

    /// Compact little-endian binary grid:
    /// `b"SFLD"`, `u32` version, `u32` ns, `u32` nu, `f64` L, `f64` a,
    /// `u32` name length, name bytes (UTF-8), then `ns·nu` `f64` values
    /// row-major in `s`.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&(self.grid.ns as u32).to_le_bytes())?;
        out.write_all(&(self.grid.nu as u32).to_le_bytes())?;
        out.write_all(&self.grid.length.to_le_bytes())?;
        out.write_all(&self.grid.a.to_le_bytes())?;
        let name = self.name.as_bytes();
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name)?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("strip field binary: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let chunk = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(chunk)
        };
        if take(4)? != BINARY_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != BINARY_VERSION {
            return Err(bad("unsupported version"));
        }
        let ns = u32_at(take(4)?) as usize;
        let nu = u32_at(take(4)?) as usize;
        let length = f64_at(take(8)?);
        let a = f64_at(take(8)?);
        let name_len = u32_at(take(4)?) as usize;
        let name = String::from_utf8(take(name_len)?.to_vec()).map_err(|_| bad("name is not UTF-8"))?;
        let mut values = Vec::with_capacity(ns * nu);
        for _ in 0..ns * nu {
            values.push(f64_at(take(8)?));
        }
        Ok(Self { name, grid: StripGrid { length, a, ns, nu }, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(file)
        } else {
            self.write_binary(file)
        }
    }
}

/// `θ(s,u) = (Γ₁² + Γ₂² + u² − 2u(Γ₁Γ₂' − Γ₂Γ₁'))⁻¹`.
pub fn theta(curve: &LoopCurve, s: f64, u: f64) -> Result<f64> {
    let jet = curve.jet(s);
    theta_from_jet(&jet, u)
}

fn theta_from_jet(jet: &CurveJet, u: f64) -> Result<f64> {
    let [g1, g2] = jet.position;
    let [t1, t2] = jet.tangent;
    let denom = g1 * g1 + g2 * g2 + u * u - 2.0 * u * (g1 * t2 - g2 * t1);
    if !(denom > 1e-24) {
        return Err(Error::OriginPlacement(format!("flux origin lies on the strip at s = {}, u = {u}", jet.s)));
    }
    Ok(1.0 / denom)
}

/// Pointwise values of the local (non-gauge) fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFields {
    pub theta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub v: f64,
    /// Jacobian factor `1 + uγ(s)`.
    pub jacobian: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy)]
struct RowData {
    jet: CurveJet,
    cos_h: f64,
    sin_h: f64,
}

/// All coefficient fields sampled on one grid.
#[derive(Debug, Clone)]
pub struct CoefficientFields {
    pub grid: StripGrid,
    pub theta: StripField,
    pub alpha1: StripField,
    pub alpha2: StripField,
    pub alpha3: StripField,
    pub omega1: StripField,
    pub omega2: StripField,
    pub k: StripField,
    pub k_s: StripField,
    pub k_u: StripField,
    pub v: StripField,
    pub w: StripField,
    /// `Ω₁ + 2K_s(1+uγ)⁻²`, whose sup is `N(a)`.
    pub residual_tangential: StripField,
    /// `W + γ²/4`, whose sup is `M(a)`.
    pub residual_potential: StripField,
}

/// Sup-norm pair `(N(a), M(a))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNorms {
    pub a: f64,
    pub n: f64,
    pub m: f64,
    pub n_argmax: [f64; 2],
    pub m_argmax: [f64; 2],
}

impl SupNorms {
    /// Zero norms (the `a → 0` degenerate limit used to compare against the
    /// bare comparison operator).
    pub fn zero(a: f64) -> Self {
        Self { a, n: 0.0, m: 0.0, n_argmax: [0.0; 2], m_argmax: [0.0; 2] }
    }
}

/// Evaluator for the coefficient fields of one `(curve, params, a)` triple.
///
/// Construction validates that the flux origin is enclosed by the loop with
/// clearance larger than `a` and that `a` does not exceed the injectivity
/// half-width.
#[derive(Debug, Clone)]
pub struct CoefficientModel<'a> {
    curve: &'a LoopCurve,
    params: ModelParams,
    a: f64,
}

impl<'a> CoefficientModel<'a> {
    pub fn new(curve: &'a LoopCurve, params: ModelParams, a: f64) -> Result<Self> {
        let max = curve.injectivity_halfwidth();
        if !(a > 0.0 && a <= max) {
            return Err(Error::WidthOutOfRange { a, max });
        }
        if curve.winding_number([0.0, 0.0]) != 1 {
            return Err(Error::OriginPlacement("flux origin is not enclosed by the loop".into()));
        }
        let clearance = curve.distance_to([0.0, 0.0]);
        if clearance <= a {
            return Err(Error::OriginPlacement(format!("origin clearance {clearance} does not exceed a = {a}")));
        }
        Ok(Self { curve, params, a })
    }

    pub fn curve(&self) -> &LoopCurve {
        self.curve
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    fn row(&self, s: f64) -> RowData {
        let jet = self.curve.jet(s);
        let h = self.curve.tangent_angle(s);
        RowData { jet, cos_h: h.cos(), sin_h: h.sin() }
    }

    fn point_in_row(&self, row: &RowData, u: f64) -> PointFields {
        let jet = &row.jet;
        let ModelParams { c0, b, .. } = self.params;
        let th = theta_from_jet(jet, u).expect("origin clearance validated at construction");
        let [g1, g2] = jet.position;
        let [t1, t2] = jet.tangent;
        let alpha1 = (c0 * th + 0.5 * b).powi(2) / th;
        let f = 2.0 * c0 * th + b;
        let alpha2 = f * (g2 + u * t1);
        let alpha3 = f * (g1 - u * t2);
        let jac = 1.0 + u * jet.gamma;
        let omega1 = (alpha2 * row.cos_h - alpha3 * row.sin_h) / jac;
        let omega2 = (alpha3 * row.cos_h + alpha2 * row.sin_h) / jac;
        let g = jet.gamma;
        let v = 0.5 * u * jet.d2gamma / jac.powi(3) - 1.25 * u * u * jet.dgamma.powi(2) / jac.powi(4) - 0.25 * g * g / jac.powi(2);
        PointFields { theta: th, alpha1, alpha2, alpha3, omega1, omega2, v, jacobian: jac, gamma: g }
    }

    /// Local fields at `(s, u)`.
    pub fn point(&self, s: f64, u: f64) -> PointFields {
        self.point_in_row(&self.row(s), u)
    }

    fn gauge_phase_in_row(&self, row: &RowData, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        0.5 * integrate_composite(|v| self.point_in_row(row, v).omega2, 0.0, u, 4)
    }

    /// `K(s, u) = ½∫₀ᵘ Ω₂(s, v) dv`.
    pub fn gauge_phase_at(&self, s: f64, u: f64) -> f64 {
        self.gauge_phase_in_row(&self.row(s), u)
    }

    /// Full residual values at `(s_i, u)` for arbitrary `u`, with `K_s` from
    /// spectral differentiation over the periodic `s`-grid of `rows`.
    fn residuals_at_u(&self, rows: &[RowData], u: f64) -> (Vec<f64>, Vec<f64>) {
        let length = self.curve.length();
        let k: Vec<f64> = rows.iter().map(|r| self.gauge_phase_in_row(r, u)).collect();
        let k_s = spectral_derivative(&k, length);
        let mut n_res = Vec::with_capacity(rows.len());
        let mut m_res = Vec::with_capacity(rows.len());
        for (row, &ks) in rows.iter().zip(&k_s) {
            let p = self.point_in_row(row, u);
            let ku = 0.5 * p.omega2;
            let w = assemble_w(&p, ks, ku);
            n_res.push(p.omega1 + 2.0 * ks / (p.jacobian * p.jacobian));
            m_res.push(w + 0.25 * p.gamma * p.gamma);
        }
        (n_res, m_res)
    }

    /// Evaluates every field on `grid`.
    pub fn evaluate(&self, ns: usize, nu: usize) -> Result<CoefficientFields> {
        let grid = StripGrid::new(self.curve.length(), self.a, ns, nu)?;
        let rows: Vec<RowData> = (0..ns).map(|i| self.row(grid.s(i))).collect();

        // column-wise: K and K_s need the whole periodic s-row
        let columns: Vec<Vec<[f64; 13]>> = (0..nu)
            .into_par_iter()
            .map(|j| {
                let u = grid.u(j);
                let k: Vec<f64> = rows.iter().map(|r| self.gauge_phase_in_row(r, u)).collect();
                let k_s = spectral_derivative(&k, grid.length);
                rows.iter()
                    .zip(k.iter().zip(&k_s))
                    .map(|(row, (&kv, &ks))| {
                        let p = self.point_in_row(row, u);
                        let ku = 0.5 * p.omega2;
                        let w = assemble_w(&p, ks, ku);
                        [
                            p.theta,
                            p.alpha1,
                            p.alpha2,
                            p.alpha3,
                            p.omega1,
                            p.omega2,
                            kv,
                            ks,
                            ku,
                            p.v,
                            w,
                            p.omega1 + 2.0 * ks / (p.jacobian * p.jacobian),
                            w + 0.25 * p.gamma * p.gamma,
                        ]
                    })
                    .collect()
            })
            .collect();

        let field = |idx: usize, name: &str| {
            let mut values = vec![0.0; grid.len()];
            for (j, col) in columns.iter().enumerate() {
                for (i, vals) in col.iter().enumerate() {
                    values[i * nu + j] = vals[idx];
                }
            }
            StripField::from_values(name, grid, values)
        };
        let out = CoefficientFields {
            grid,
            theta: field(0, "theta"),
            alpha1: field(1, "alpha1"),
            alpha2: field(2, "alpha2"),
            alpha3: field(3, "alpha3"),
            omega1: field(4, "omega1"),
            omega2: field(5, "omega2"),
            k: field(6, "K"),
            k_s: field(7, "K_s"),
            k_u: field(8, "K_u"),
            v: field(9, "V"),
            w: field(10, "W"),
            residual_tangential: field(11, "N_integrand"),
            residual_potential: field(12, "M_integrand"),
        };
        if !out.w.all_finite() || !out.residual_tangential.all_finite() {
            return Err(Error::Numerical("non-finite coefficient field".into()));
        }
        Ok(out)
    }

    pub fn alpha_fields(&self, ns: usize, nu: usize) -> Result<(StripField, StripField, StripField)> {
        let f = self.evaluate(ns, nu)?;
        Ok((f.alpha1, f.alpha2, f.alpha3))
    }

    pub fn omega_fields(&self, ns: usize, nu: usize) -> Result<(StripField, StripField)> {
        let f = self.evaluate(ns, nu)?;
        Ok((f.omega1, f.omega2))
    }

    /// `(K, K_s, K_u)`.
    pub fn gauge_phase(&self, ns: usize, nu: usize) -> Result<(StripField, StripField, StripField)> {
        let f = self.evaluate(ns, nu)?;
        Ok((f.k, f.k_s, f.k_u))
    }

    pub fn effective_potential_v(&self, ns: usize, nu: usize) -> Result<StripField> {
        Ok(self.evaluate(ns, nu)?.v)
    }

    pub fn w_field(&self, ns: usize, nu: usize) -> Result<StripField> {
        Ok(self.evaluate(ns, nu)?.w)
    }

    /// `N(a)` and `M(a)`: grid maxima plus one golden-section refinement in
    /// `s` (spectral interpolation of the argmax column) and, for interior
    /// argmax, in `u`.
    pub fn sup_norms(&self, ns: usize, nu: usize) -> Result<SupNorms> {
        const MIN_NS: usize = 256;
        const MIN_NU: usize = 65;
        let ns = ns.max(MIN_NS);
        let nu = nu.max(MIN_NU);
        let fields = self.evaluate(ns, nu)?;
        let grid = fields.grid;
        let rows: Vec<RowData> = (0..ns).map(|i| self.row(grid.s(i))).collect();
        let (n, n_arg) = self.refine_sup(&fields.residual_tangential, &rows, 0);
        let (m, m_arg) = self.refine_sup(&fields.residual_potential, &rows, 1);
        Ok(SupNorms { a: self.a, n, m, n_argmax: n_arg, m_argmax: m_arg })
    }

    fn refine_sup(&self, field: &StripField, rows: &[RowData], which: usize) -> (f64, [f64; 2]) {
        let grid = field.grid;
        let (i, j, grid_max) = field.argmax_abs();
        let mut best = grid_max;
        let mut arg = [grid.s(i), grid.u(j)];
        if grid_max == 0.0 {
            return (0.0, arg);
        }
        let h = grid.length / grid.ns as f64;
        let col = TrigSeries::from_samples(&field.column(j), grid.length);
        let (s_star, v) = golden_max(|s| col.eval(s).abs(), grid.s(i) - h, grid.s(i) + h, 50);
        if v > best {
            best = v;
            arg = [s_star.rem_euclid(grid.length), grid.u(j)];
        }
        if j > 0 && j + 1 < grid.nu {
            let (u_star, v) = golden_max(
                |u| {
                    let (nr, mr) = self.residuals_at_u(rows, u);
                    let r = if which == 0 { nr } else { mr };
                    r[i].abs()
                },
                grid.u(j - 1),
                grid.u(j + 1),
                40,
            );
            if v > best {
                best = v;
                arg = [grid.s(i), u_star];
            }
        }
        (best, arg)
    }
}

fn assemble_w(p: &PointFields, k_s: f64, k_u: f64) -> f64 {
    p.v + p.alpha1 + k_s * k_s / (p.jacobian * p.jacobian) + k_u * k_u + k_s * p.omega1 - k_u * p.omega2
}

/// Result of probing `N(a) + M(a)` for linear behaviour in `a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub norms: Vec<SupNorms>,
    /// Least-squares slope of the fit through the origin.
    pub slope_through_origin: f64,
    /// Affine least-squares fit `N + M ≈ slope·a + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Successive ratios `(N+M)(a_{k+1}) / (N+M)(a_k)`.
    pub ratios: Vec<f64>,
    /// Raised when `|intercept|` exceeds 10% of the range of `N + M`.
    pub intercept_flag: bool,
}

/// JSON record for one half-width of a scaling probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupNormRecord {
    pub a: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "T_fit")]
    pub t_fit: f64,
}

impl ScalingProbe {
    pub fn records(&self) -> Vec<SupNormRecord> {
        self.norms
            .iter()
            .map(|s| SupNormRecord { a: s.a, n: s.n, m: s.m, t_fit: self.slope_through_origin })
            .collect()
    }
}

/// Fits `y ≈ slope·a + intercept` and `y ≈ slope₀·a`.
pub fn fit_linear(a: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let sa: f64 = a.iter().sum();
    let sy: f64 = y.iter().sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let say: f64 = a.iter().zip(y).map(|(x, v)| x * v).sum();
    let det = n * saa - sa * sa;
    let slope = if det.abs() > 0.0 { (n * say - sa * sy) / det } else { 0.0 };
    let intercept = (sy - slope * sa) / n;
    let slope0 = if saa > 0.0 { say / saa } else { 0.0 };
    (slope, intercept, slope0)
}

/// Builds the scaling probe from precomputed sup-norms.
pub fn probe_from_norms(norms: Vec<SupNorms>) -> ScalingProbe {
    let a: Vec<f64> = norms.iter().map(|s| s.a).collect();
    let y: Vec<f64> = norms.iter().map(|s| s.n + s.m).collect();
    let (slope, intercept, slope0) = fit_linear(&a, &y);
    let residuals = a.iter().zip(&y).map(|(x, v)| v - (slope * x + intercept)).collect();
    let ratios = y.windows(2).map(|w| w[1] / w[0]).collect();
    let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let intercept_flag = intercept.abs() > 0.1 * range;
    ScalingProbe { norms, slope_through_origin: slope0, slope, intercept, residuals, ratios, intercept_flag }
}

/// Evaluates `N(a) + M(a)` over a decreasing sequence of half-widths and fits
/// it against `a`.
pub fn scaling_probe(curve: &LoopCurve, params: ModelParams, a_sequence: &[f64], ns: usize, nu: usize) -> Result<ScalingProbe> {
    if a_sequence.len() < 2 {
        return Err(Error::Config("scaling probe needs at least two half-widths".into()));
    }
    let norms = a_sequence
        .par_iter()
        .map(|&a| CoefficientModel::new(curve, params, a)?.sup_norms(ns, nu))
        .collect::<Result<Vec<_>>>()?;
    Ok(probe_from_norms(norms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveSpec;

    fn unit_circle() -> LoopCurve {
        CurveSpec::unit_circle().build(256).unwrap()
    }

    fn params() -> ModelParams {
        ModelParams::new(0.3, 1.0, 10.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 1.0, -1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::degenerate(0.0, 0.0, 0.0).unwrap().degenerate);
    }

    #[test]
    fn theta_on_circles() {
        let c = unit_circle();
        for s in [0.0, 1.1, 4.0] {
            for u in [-0.3, 0.0, 0.2] {
                let t = theta(&c, s, u).unwrap();
                assert!((t - (1.0 - u).powi(-2)).abs() < 1e-12);
            }
        }
        let c2 = CurveSpec::Circle { radius: 2.0, center: [0.0, 0.0] }.build(256).unwrap();
        assert!((theta(&c2, 0.3, 0.0).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn origin_must_be_enclosed_with_clearance() {
        let shifted = CurveSpec::Circle { radius: 1.0, center: [3.0, 0.0] }.build(256).unwrap();
        assert!(matches!(CoefficientModel::new(&shifted, params(), 0.1), Err(Error::OriginPlacement(_))));
        let off = CurveSpec::Circle { radius: 1.0, center: [0.85, 0.0] }.build(256).unwrap();
        assert!(matches!(CoefficientModel::new(&off, params(), 0.2), Err(Error::OriginPlacement(_))));
        assert!(CoefficientModel::new(&off, params(), 0.1).is_ok());
        let c = unit_circle();
        assert!(matches!(CoefficientModel::new(&c, params(), 0.6), Err(Error::WidthOutOfRange { .. })));
    }

    #[test]
    fn alpha_and_omega_at_seam_point() {
        let c = unit_circle();
        let p = params();
        let model = CoefficientModel::new(&c, p, 0.2).unwrap();
        let f = model.point(0.0, 0.0);
        assert!((f.alpha1 - (p.c0 + 0.5 * p.b).powi(2)).abs() < 1e-13);
        assert!(f.alpha2.abs() < 1e-13);
        assert!((f.alpha3 - (2.0 * p.c0 + p.b)).abs() < 1e-13);
        assert!((f.omega1 - f.alpha2).abs() < 1e-13);
        assert!((f.omega2 - f.alpha3).abs() < 1e-13);
        assert!((f.v + 0.25).abs() < 1e-13);
    }

    #[test]
    fn potential_v_on_circle_and_collapse_at_zero_offset() {
        let c = unit_circle();
        let model = CoefficientModel::new(&c, params(), 0.3).unwrap();
        for u in [-0.3, -0.1, 0.15, 0.3] {
            let v = model.point(0.7, u).v;
            assert!((v + 0.25 * (1.0 - u).powi(-2)).abs() < 1e-10);
        }
        let ell = CurveSpec::Ellipse { semi_x: 2.0, semi_y: 1.0, center: [0.0, 0.0] }.build(1024).unwrap();
        let model = CoefficientModel::new(&ell, params(), 0.2).unwrap();
        for s in [0.0, 0.9, 3.3] {
            let p = model.point(s, 0.0);
            assert_eq!(p.v + 0.25 * p.gamma * p.gamma, 0.0);
        }
    }

    #[test]
    fn circle_fields_are_rotation_invariant() {
        let c = unit_circle();
        let model = CoefficientModel::new(&c, params(), 0.25).unwrap();
        let f = model.evaluate(64, 33).unwrap();
        for field in [&f.theta, &f.alpha1, &f.omega1, &f.omega2, &f.k, &f.k_s, &f.v, &f.w] {
            assert!(field.max_s_variation() < 1e-8, "{} varies along s", field.name);
        }
        assert!(f.k_s.max_abs() < 1e-8);
    }

    #[test]
    fn gauge_phase_defining_relation() {
        let ell = CurveSpec::Ellipse { semi_x: 2.0, semi_y: 1.0, center: [0.0, 0.0] }.build(1024).unwrap();
        let model = CoefficientModel::new(&ell, params(), 0.2).unwrap();
        for s in [0.0, 1.3, 5.0] {
            assert_eq!(model.gauge_phase_at(s, 0.0), 0.0);
            // finite difference of K in u against Ω₂/2
            let u = 0.07;
            let h = 1e-4;
            let dk = (model.gauge_phase_at(s, u + h) - model.gauge_phase_at(s, u - h)) / (2.0 * h);
            assert!((dk - 0.5 * model.point(s, u).omega2).abs() < 1e-7);
        }
    }

    #[test]
    fn theta_matches_tubular_distance() {
        let ell = CurveSpec::Ellipse { semi_x: 2.0, semi_y: 1.0, center: [0.0, 0.0] }.build(1024).unwrap();
        let model = CoefficientModel::new(&ell, params(), 0.2).unwrap();
        let f = model.evaluate(64, 33).unwrap();
        for i in 0..64 {
            for j in 0..33 {
                let p = ell.tubular_map_unchecked(f.grid.s(i), f.grid.u(j));
                let prod = f.theta.at(i, j) * (p[0] * p[0] + p[1] * p[1]);
                assert!((prod - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let c = unit_circle();
        let model = CoefficientModel::new(&c, params(), 0.1).unwrap();
        let v = model.effective_potential_v(64, 33).unwrap();
        let mut buf = Vec::new();
        v.write_binary(&mut buf).unwrap();
        assert_eq!(StripField::read_binary(&buf).unwrap(), v);
        assert!(StripField::read_binary(&buf[..20]).is_err());
    }

    #[test]
    fn linear_fit_recovers_synthetic_slope() {
        let a = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = a.iter().map(|x| 3.7 * x).collect();
        let (slope, intercept, slope0) = fit_linear(&a, &y);
        assert!((slope - 3.7).abs() < 1e-8);
        assert!(intercept.abs() < 1e-8);
        assert!((slope0 - 3.7).abs() < 1e-8);
    }
}
