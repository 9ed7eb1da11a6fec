//! Arc-length parametrized closed loops and their differential geometry.
//!
//! Curvature follows the convention `γ = Γ₁''Γ₂' − Γ₂''Γ₁'`, which is
//! negative on a counter-clockwise circle (`γ = −1/R`). The tangent angle is
//! `H(t) = −∫₀ᵗ γ`, and the tubular map is
//! `Ψ(s, u) = (Γ₁(s) − uΓ₂'(s), Γ₂(s) + uΓ₁'(s))`, so positive `u` points
//! into the region enclosed by a counter-clockwise loop.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::fourier::spectral_derivative;
use crate::numerics::roots::golden_max;
use crate::numerics::TrigSeries;
use crate::{Error, Result};

/// A closed planar curve `t ↦ (x(t), y(t))` on `[0, period]`.
pub trait ParametricCurve: Sync {
    fn period(&self) -> f64;
    fn point(&self, t: f64) -> [f64; 2];
}

/// Closure-backed parametric curve.
pub struct FnCurve<F> {
    pub period: f64,
    pub f: F,
}

impl<F: Fn(f64) -> [f64; 2] + Sync> ParametricCurve for FnCurve<F> {
    fn period(&self) -> f64 {
        self.period
    }
    fn point(&self, t: f64) -> [f64; 2] {
        (self.f)(t)
    }
}

/// Curve description as read from a curve specification file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Ellipse {
        semi_x: f64,
        semi_y: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Uniformly spaced samples `(t, x, y)` over one period, last point excluded.
    Tabulated { period: f64, samples: Vec<[f64; 3]> },
}

impl CurveSpec {
    pub fn unit_circle() -> Self {
        CurveSpec::Circle { radius: 1.0, center: [0.0, 0.0] }
    }

    /// Parses the key–value curve format:
    ///
    /// ```text
    /// # comment
    /// kind = ellipse
    /// semi_x = 2
    /// semi_y = 1
    /// ```
    ///
    /// Tabulated curves use `kind = tabulated`, `period = <T>` and one
    /// `sample <t> <x> <y>` line per point.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut radius = None;
        let mut semi_x = None;
        let mut semi_y = None;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut period = None;
        let mut samples = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}: `{raw}`", lineno + 1));
            if let Some(rest) = line.strip_prefix("sample") {
                let vals: Vec<f64> = rest
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("malformed sample"))?;
                if vals.len() != 3 {
                    return Err(bad("sample needs t x y"));
                }
                samples.push([vals[0], vals[1], vals[2]]);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            let num = || value.parse::<f64>().map_err(|_| bad("expected a number"));
            match key {
                "kind" => kind = Some(value.to_ascii_lowercase()),
                "radius" => radius = Some(num()?),
                "semi_x" => semi_x = Some(num()?),
                "semi_y" => semi_y = Some(num()?),
                "center_x" => cx = num()?,
                "center_y" => cy = num()?,
                "period" => period = Some(num()?),
                _ => return Err(bad("unknown key")),
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing key `{k}`"));
        let spec = match kind.as_deref() {
            Some("circle") => CurveSpec::Circle { radius: radius.ok_or_else(|| missing("radius"))?, center: [cx, cy] },
            Some("ellipse") => CurveSpec::Ellipse {
                semi_x: semi_x.ok_or_else(|| missing("semi_x"))?,
                semi_y: semi_y.ok_or_else(|| missing("semi_y"))?,
                center: [cx, cy],
            },
            Some("tabulated") => {
                if samples.len() < 16 {
                    return Err(Error::Parse("tabulated curve needs at least 16 samples".into()));
                }
                CurveSpec::Tabulated { period: period.ok_or_else(|| missing("period"))?, samples }
            }
            Some(other) => return Err(Error::Parse(format!("unknown curve kind `{other}`"))),
            None => return Err(missing("kind")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CurveSpec::Circle { radius, .. } if !(*radius > 0.0) => {
                Err(Error::Parse(format!("circle radius must be positive, got {radius}")))
            }
            CurveSpec::Ellipse { semi_x, semi_y, .. } if !(*semi_x > 0.0 && *semi_y > 0.0) => {
                Err(Error::Parse("ellipse semi-axes must be positive".into()))
            }
            CurveSpec::Tabulated { period, samples } => {
                if !(*period > 0.0) {
                    return Err(Error::Parse("tabulated period must be positive".into()));
                }
                let h = period / samples.len() as f64;
                for (i, s) in samples.iter().enumerate() {
                    if (s[0] - i as f64 * h).abs() > 1e-9 * period {
                        return Err(Error::Parse(format!("sample {i} is not on the uniform t-grid")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Default grid size used when building the arc-length curve.
    pub fn default_grid(&self) -> usize {
        match self {
            CurveSpec::Circle { .. } => 256,
            CurveSpec::Ellipse { .. } => 1024,
            CurveSpec::Tabulated { samples, .. } => samples.len().next_power_of_two().max(256),
        }
    }

    pub fn build(&self, grid_size: usize) -> Result<LoopCurve> {
        match self {
            CurveSpec::Tabulated { period, samples } => {
                let xs: Vec<f64> = samples.iter().map(|s| s[1]).collect();
                let ys: Vec<f64> = samples.iter().map(|s| s[2]).collect();
                let curve = TabulatedCurve {
                    x: TrigSeries::from_samples(&xs, *period),
                    y: TrigSeries::from_samples(&ys, *period),
                };
                build_arclength_curve(&curve, grid_size)
            }
            _ => build_arclength_curve(self, grid_size),
        }
    }
}

impl ParametricCurve for CurveSpec {
    fn period(&self) -> f64 {
        match self {
            CurveSpec::Tabulated { period, .. } => *period,
            _ => 2.0 * PI,
        }
    }

    fn point(&self, t: f64) -> [f64; 2] {
        match self {
            CurveSpec::Circle { radius, center } => [center[0] + radius * t.cos(), center[1] + radius * t.sin()],
            CurveSpec::Ellipse { semi_x, semi_y, center } => [center[0] + semi_x * t.cos(), center[1] + semi_y * t.sin()],
            CurveSpec::Tabulated { period, samples } => {
                let xs: Vec<f64> = samples.iter().map(|s| s[1]).collect();
                let ys: Vec<f64> = samples.iter().map(|s| s[2]).collect();
                [TrigSeries::from_samples(&xs, *period).eval(t), TrigSeries::from_samples(&ys, *period).eval(t)]
            }
        }
    }
}

struct TabulatedCurve {
    x: TrigSeries,
    y: TrigSeries,
}

impl ParametricCurve for TabulatedCurve {
    fn period(&self) -> f64 {
        self.x.period()
    }
    fn point(&self, t: f64) -> [f64; 2] {
        [self.x.eval(t), self.y.eval(t)]
    }
}

/// Local differential data at one arc-length position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub s: f64,
    pub position: [f64; 2],
    pub tangent: [f64; 2],
    pub second: [f64; 2],
    /// Signed curvature `Γ₁''Γ₂' − Γ₂''Γ₁'`.
    pub gamma: f64,
    pub dgamma: f64,
    pub d2gamma: f64,
}

/// Closed counter-clockwise loop parametrized by arc length.
#[derive(Debug, Clone)]
pub struct LoopCurve {
    length: f64,
    x: TrigSeries,
    y: TrigSeries,
    gamma: TrigSeries,
    gamma_plus: f64,
    halfwidth: f64,
}

/// Reparametrizes `spec` by arc length on a uniform grid of `grid_size`
/// points and validates closure, simplicity, speed and orientation.
pub fn build_arclength_curve(spec: &dyn ParametricCurve, grid_size: usize) -> Result<LoopCurve> {
    const MIN_GRID: usize = 64;
    if grid_size < MIN_GRID {
        return Err(Error::GridTooSmall { got: grid_size, min: MIN_GRID });
    }
    let n = grid_size;
    let period = spec.period();
    let ts: Vec<f64> = (0..n).map(|i| i as f64 * period / n as f64).collect();
    let pts: Vec<[f64; 2]> = ts.iter().map(|&t| spec.point(t)).collect();

    let diameter = pts
        .iter()
        .flat_map(|p| pts.iter().step_by(n / 16).map(move |q| dist(*p, *q)))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let end = spec.point(period);
    let gap = dist(end, pts[0]);
    if gap > 1e-8 * diameter {
        return Err(Error::NotClosed { gap });
    }

    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let dx = spectral_derivative(&xs, period);
    let dy = spectral_derivative(&ys, period);
    let speed: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
    let mean_speed = speed.iter().sum::<f64>() / n as f64;
    for (i, &v) in speed.iter().enumerate() {
        if v < 1e-9 * mean_speed || !v.is_finite() {
            return Err(Error::DegenerateSpeed { t: ts[i], speed: v });
        }
    }
    let speed_series = TrigSeries::from_samples(&speed, period);
    let length = speed_series.mean() * period;

    // invert s(t) on the uniform arc-length grid
    let mut t_of_s = Vec::with_capacity(n);
    let mut t_guess = 0.0;
    for i in 0..n {
        let target = i as f64 * length / n as f64;
        let t = invert_arclength(&speed_series, target, t_guess, period);
        t_of_s.push(t);
        t_guess = t + period / n as f64;
    }
    let gx: Vec<f64> = t_of_s.iter().map(|&t| spec.point(t)[0]).collect();
    let gy: Vec<f64> = t_of_s.iter().map(|&t| spec.point(t)[1]).collect();

    if let Some((i, j)) = find_self_intersection(&gx, &gy) {
        return Err(Error::SelfIntersection { t1: t_of_s[i], t2: t_of_s[j] });
    }

    let x = TrigSeries::from_samples(&gx, length);
    let y = TrigSeries::from_samples(&gy, length);

    let h = length / n as f64;
    let mut area = 0.0;
    let mut gamma_samples = Vec::with_capacity(n);
    for i in 0..n {
        let s = i as f64 * h;
        let jx = x.jet(s);
        let jy = y.jet(s);
        area += 0.5 * (jx[0] * jy[1] - jy[0] * jx[1]) * h;
        gamma_samples.push(jx[2] * jy[1] - jy[2] * jx[1]);
    }
    if area <= 0.0 {
        return Err(Error::Clockwise);
    }
    let gamma = TrigSeries::from_samples(&gamma_samples, length);

    let mut curve = LoopCurve { length, x, y, gamma, gamma_plus: 0.0, halfwidth: 0.0 };
    curve.gamma_plus = curve.compute_gamma_plus(&gamma_samples);
    curve.halfwidth = curve.compute_halfwidth(&gx, &gy);
    Ok(curve)
}

fn invert_arclength(speed: &TrigSeries, target: f64, guess: f64, period: f64) -> f64 {
    if target == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, period);
    let mut t = guess.clamp(lo, hi);
    for _ in 0..100 {
        let f = speed.integral_from_zero(t) - target;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = f / speed.eval(t);
        let mut next = t - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * period {
            return next;
        }
        t = next;
    }
    t
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn find_self_intersection(xs: &[f64], ys: &[f64]) -> Option<(usize, usize)> {
    let n = xs.len();
    let seg = |i: usize| ([xs[i], ys[i]], [xs[(i + 1) % n], ys[(i + 1) % n]]);
    let bbox = |(p, q): ([f64; 2], [f64; 2])| (p[0].min(q[0]), p[0].max(q[0]), p[1].min(q[1]), p[1].max(q[1]));
    let boxes: Vec<_> = (0..n).map(|i| bbox(seg(i))).collect();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = (boxes[i], boxes[j]);
            if a.1 < b.0 || b.1 < a.0 || a.3 < b.2 || b.3 < a.2 {
                continue;
            }
            if segments_cross(seg(i), seg(j)) {
                return Some((i, j));
            }
        }
    }
    None
}

fn segments_cross((p1, p2): ([f64; 2], [f64; 2]), (q1, q2): ([f64; 2], [f64; 2])) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

impl LoopCurve {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn grid_size(&self) -> usize {
        self.x.n_samples()
    }

    /// Arc-length sample points `s_i = i L / n`.
    pub fn s_grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * self.length / n as f64).collect()
    }

    fn wrap(&self, s: f64) -> f64 {
        s.rem_euclid(self.length)
    }

    pub fn position(&self, s: f64) -> [f64; 2] {
        [self.x.eval(s), self.y.eval(s)]
    }

    pub fn tangent(&self, s: f64) -> [f64; 2] {
        [self.x.derivative(s, 1), self.y.derivative(s, 1)]
    }

    pub fn jet(&self, s: f64) -> CurveJet {
        let jx = self.x.jet(s);
        let jy = self.y.jet(s);
        let gamma = jx[2] * jy[1] - jy[2] * jx[1];
        let dgamma = jx[3] * jy[1] - jy[3] * jx[1];
        let d2gamma = jx[4] * jy[1] + jx[3] * jy[2] - jy[4] * jx[1] - jy[3] * jx[2];
        CurveJet {
            s,
            position: [jx[0], jy[0]],
            tangent: [jx[1], jy[1]],
            second: [jx[2], jy[2]],
            gamma,
            dgamma,
            d2gamma,
        }
    }

    /// `Γ₁''(s)Γ₂'(s) − Γ₂''(s)Γ₁'(s)`; equals `−1/R` on a counter-clockwise circle.
    pub fn signed_curvature(&self, s: f64) -> f64 {
        let jx = self.x.jet(s);
        let jy = self.y.jet(s);
        jx[2] * jy[1] - jy[2] * jx[1]
    }

    /// Curvature with the usual sign (`+1/R` on a counter-clockwise circle).
    pub fn conventional_curvature(&self, s: f64) -> f64 {
        -self.signed_curvature(s)
    }

    /// `H(t) = −∫₀ᵗ γ(u) du`, by spectral integration of the curvature.
    pub fn tangent_angle(&self, t: f64) -> f64 {
        -self.gamma.integral_from_zero(t)
    }

    /// `Ψ(s, u)`, checked against the validated injectivity half-width.
    pub fn tubular_map(&self, s: f64, u: f64) -> Result<[f64; 2]> {
        if u.abs() > self.halfwidth {
            return Err(Error::OffsetTooLarge { u, halfwidth: self.halfwidth });
        }
        Ok(self.tubular_map_unchecked(s, u))
    }

    pub fn tubular_map_unchecked(&self, s: f64, u: f64) -> [f64; 2] {
        let p = self.position(s);
        let t = self.tangent(s);
        [p[0] - u * t[1], p[1] + u * t[0]]
    }

    /// `γ₊ = max |γ|`.
    pub fn gamma_plus(&self) -> f64 {
        self.gamma_plus
    }

    /// Conservative half-width on which the tubular map is injective; never
    /// exceeds `1 / (2γ₊)`.
    pub fn injectivity_halfwidth(&self) -> f64 {
        self.halfwidth
    }

    /// Signed area enclosed by the loop (positive for counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let n = self.grid_size();
        let h = self.length / n as f64;
        (0..n)
            .map(|i| {
                let s = i as f64 * h;
                let p = self.position(s);
                let t = self.tangent(s);
                0.5 * (p[0] * t[1] - p[1] * t[0]) * h
            })
            .sum()
    }

    /// Winding number of the loop around `point`.
    pub fn winding_number(&self, point: [f64; 2]) -> i64 {
        let n = self.grid_size().max(256);
        let mut total = 0.0;
        let mut prev = self.position(0.0);
        for i in 1..=n {
            let cur = self.position(self.wrap(i as f64 * self.length / n as f64));
            let a = (prev[1] - point[1]).atan2(prev[0] - point[0]);
            let b = (cur[1] - point[1]).atan2(cur[0] - point[0]);
            let mut d = b - a;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            total += d;
            prev = cur;
        }
        (total / (2.0 * PI)).round() as i64
    }

    /// Minimal distance from `point` to the loop (dense sampling plus local
    /// golden-section refinement).
    pub fn distance_to(&self, point: [f64; 2]) -> f64 {
        let n = self.grid_size().max(256);
        let h = self.length / n as f64;
        let (i_best, _) = (0..n)
            .map(|i| (i, dist(self.position(i as f64 * h), point)))
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        let s0 = i_best as f64 * h;
        let (_, neg) = golden_max(|s| -dist(self.position(s), point), s0 - h, s0 + h, 60);
        -neg
    }

    fn compute_gamma_plus(&self, samples: &[f64]) -> f64 {
        let n = samples.len();
        let h = self.length / n as f64;
        let (imax, vmax) = samples
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let s0 = imax as f64 * h;
        let (_, refined) = golden_max(|s| self.signed_curvature(s).abs(), s0 - h, s0 + h, 60);
        refined.max(vmax)
    }

    fn compute_halfwidth(&self, gx: &[f64], gy: &[f64]) -> f64 {
        let n = gx.len();
        let h = self.length / n as f64;
        let local = if self.gamma_plus > 0.0 { 0.5 / self.gamma_plus } else { f64::INFINITY };
        // global bottleneck: points far apart along the curve
        let min_sep = if self.gamma_plus > 0.0 { PI / self.gamma_plus } else { 0.0 };
        let mut bottleneck = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d_idx = (j - i).min(n - (j - i));
                if (d_idx as f64) * h <= min_sep {
                    continue;
                }
                bottleneck = bottleneck.min((gx[i] - gx[j]).hypot(gy[i] - gy[j]));
            }
        }
        let mut a = local.min(0.5 * bottleneck);
        if !a.is_finite() {
            a = self.length / (2.0 * PI);
        }
        for _ in 0..40 {
            if self.tube_is_injective(a, gx, gy) {
                return a;
            }
            a *= 0.8;
        }
        a
    }

    /// Collision scan: every strip point `Ψ(s, u)` must have no curve sample
    /// closer than `|u|`.
    fn tube_is_injective(&self, a: f64, gx: &[f64], gy: &[f64]) -> bool {
        let n = gx.len();
        let stride = (n / 256).max(1);
        let fractions = [-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0];
        for i in (0..n).step_by(stride) {
            let s = i as f64 * self.length / n as f64;
            for &fr in &fractions {
                let u = fr * a;
                let p = self.tubular_map_unchecked(s, u);
                let limit = u.abs() * (1.0 - 1e-9) - 1e-12;
                for k in 0..n {
                    if k == i {
                        continue;
                    }
                    if (p[0] - gx[k]).hypot(p[1] - gy[k]) < limit {
                        return false;
                    }
                }
            }
        }
        true
    }
}
