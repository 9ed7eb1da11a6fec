//! Conforming P1 finite elements for the magnetic form
//! `∫|(−i∇ − A)f|² − β∫_Γ|f|² ds` with complex degrees of freedom.
//!
//! Meshes for a star-shaped loop are built on rays through the flux origin:
//! node `(i, j)` sits at `η_i · Γ(φ_j)`, so the ring `η = 1` is exactly the
//! polygon inscribed in `Γ` and the line integral is assembled exactly on its
//! edges. A small disk around the origin is excised with a Dirichlet
//! condition, as is the far ring.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::ModelParams;
use crate::geometry::LoopCurve;
use crate::numerics::banded::{BandedCholesky, BandedHermitian};
use crate::numerics::roots::bisect;
use crate::spectral1d::Spectrum;
use crate::{Error, Result};

/// Triangulation with marked loop edges and Dirichlet nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Edges lying on the loop (carry the δ term).
    pub loop_edges: Vec<[usize; 2]>,
    pub dirichlet: Vec<bool>,
}

/// Ray-mesh resolution. `n_inner`/`n_outer` count radial intervals between the
/// core and the loop and between the loop and the far ring. Each side is
/// graded as `|η − 1| = D sinh(σξ)/sinh σ` with uniform `ξ` and `σ` chosen so
/// that the spacing stays nearly uniform within `layer` of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshControl {
    pub n_theta: usize,
    pub n_inner: usize,
    pub n_outer: usize,
    /// Radius of the excised core as a fraction of the loop (`η_core`).
    pub core: f64,
    /// Far ring as a multiple of the loop (`η_max`).
    pub outer: f64,
    pub layer: f64,
}

impl Default for MeshControl {
    fn default() -> Self {
        Self { n_theta: 64, n_inner: 60, n_outer: 60, core: 0.15, outer: 2.2, layer: 2.0 / 30.0 }
    }
}

impl MeshControl {
    /// Defaults with the layer matched to the `2/β` decay length of the
    /// bound state.
    pub fn for_beta(beta: f64) -> Self {
        Self { layer: if beta > 0.0 { (2.0 / beta).min(1.0) } else { 1.0 }, ..Self::default() }
    }

    pub fn refined(&self) -> Self {
        Self { n_theta: 2 * self.n_theta, n_inner: 2 * self.n_inner, n_outer: 2 * self.n_outer, ..*self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_theta < 8 || self.n_inner < 2 || self.n_outer < 2 {
            return Err(Error::Mesh("mesh control too coarse".into()));
        }
        if !(self.core > 0.0 && self.core < 1.0 && self.outer > 1.0 && self.layer > 0.0) {
            return Err(Error::Mesh("need 0 < core < 1 < outer and layer > 0".into()));
        }
        Ok(())
    }

    /// Radial levels `η`, ascending, with the loop at index `n_inner`.
    fn levels(&self) -> Vec<f64> {
        let graded = |xi: f64, d: f64| {
            let sigma = (d / self.layer).asinh();
            if sigma < 1e-3 {
                d * xi
            } else {
                d * (sigma * xi).sinh() / sigma.sinh()
            }
        };
        let mut out = Vec::with_capacity(self.n_inner + self.n_outer + 1);
        for i in 0..self.n_inner {
            let xi = 1.0 - i as f64 / self.n_inner as f64;
            out.push(1.0 - graded(xi, 1.0 - self.core));
        }
        for i in 0..=self.n_outer {
            out.push(1.0 + graded(i as f64 / self.n_outer as f64, self.outer - 1.0));
        }
        out
    }
}

fn polar_angle_from(p: [f64; 2], origin_angle: f64) -> f64 {
    (p[1].atan2(p[0]) - origin_angle).rem_euclid(2.0 * std::f64::consts::PI)
}

impl Mesh {
    /// Ray mesh for a loop that is star-shaped with respect to the origin.
    pub fn star_shaped(curve: &LoopCurve, control: &MeshControl) -> Result<Self> {
        control.validate()?;
        if curve.winding_number([0.0, 0.0]) != 1 {
            return Err(Error::OriginPlacement("flux origin is not enclosed by the loop".into()));
        }
        let l = curve.length();
        let check = 16 * control.n_theta.max(64);
        for k in 0..check {
            let j = curve.jet(k as f64 * l / check as f64);
            let cross = j.position[0] * j.tangent[1] - j.position[1] * j.tangent[0];
            if !(cross > 0.0) {
                return Err(Error::Mesh("loop is not star-shaped with respect to the flux origin".into()));
            }
        }
        let p0 = curve.position(0.0);
        let a0 = p0[1].atan2(p0[0]);
        let nt = control.n_theta;
        let ray_points: Vec<[f64; 2]> = (0..nt)
            .map(|j| {
                if j == 0 {
                    return p0;
                }
                let target = 2.0 * std::f64::consts::PI * j as f64 / nt as f64;
                let s = bisect(|s| polar_angle_from(curve.position(s), a0) - target, 0.0, l * (1.0 - 1e-12), 1e-15 * l);
                curve.position(s)
            })
            .collect();
        let levels = control.levels();
        let nr = levels.len();
        let mut nodes = Vec::with_capacity(nr * nt);
        let mut dirichlet = Vec::with_capacity(nr * nt);
        for (i, &eta) in levels.iter().enumerate() {
            for p in &ray_points {
                nodes.push([eta * p[0], eta * p[1]]);
                dirichlet.push(i == 0 || i == nr - 1);
            }
        }
        let id = |i: usize, j: usize| i * nt + j % nt;
        let mut triangles = Vec::with_capacity(2 * (nr - 1) * nt);
        for i in 0..nr - 1 {
            for j in 0..nt {
                triangles.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
            }
        }
        let ring = control.n_inner;
        let loop_edges = (0..nt).map(|j| [id(ring, j), id(ring, j + 1)]).collect();
        Ok(Self { nodes, triangles, loop_edges, dirichlet })
    }

    pub fn check(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.dirichlet.len() != n {
            return Err(Error::Mesh("dirichlet flags do not match node count".into()));
        }
        for t in &self.triangles {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Mesh("triangle references a missing node".into()));
            }
            if triangle_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]).abs() < 1e-300 {
                return Err(Error::Mesh("degenerate triangle".into()));
            }
        }
        for p in &self.nodes {
            if p[0] == 0.0 && p[1] == 0.0 {
                return Err(Error::Mesh("flux origin coincides with a mesh vertex".into()));
            }
        }
        // loop edges must be element edges
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        for e in &self.loop_edges {
            if !edges.contains(&(e[0].min(e[1]), e[0].max(e[1]))) {
                return Err(Error::Mesh("loop edge is not an element edge (mesh does not conform to the loop)".into()));
            }
        }
        Ok(())
    }

    /// Plain-text element list:
    ///
    /// ```text
    /// nodes <N>
    /// <x> <y> <dirichlet 0|1>      (N lines)
    /// triangles <T>
    /// <i> <j> <k>                  (T lines, 0-based)
    /// loop_edges <E>
    /// <i> <j>                      (E lines)
    /// ```
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "nodes {}", self.nodes.len())?;
        for (p, d) in self.nodes.iter().zip(&self.dirichlet) {
            writeln!(out, "{:.17e} {:.17e} {}", p[0], p[1], u8::from(*d))?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "loop_edges {}", self.loop_edges.len())?;
        for e in &self.loop_edges {
            writeln!(out, "{} {}", e[0], e[1])?;
        }
        Ok(())
    }

    pub fn read_text(input: impl BufRead) -> Result<Self> {
        let mut lines = Vec::new();
        for l in input.lines() {
            let l = l?;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                lines.push(t.to_string());
            }
        }
        let mut it = lines.iter();
        let mut section = |name: &str, width: usize| -> Result<Vec<Vec<String>>> {
            let line = it.next().ok_or_else(|| Error::Parse(format!("missing '{name}' section")))?;
            let mut h = line.split_whitespace();
            if h.next() != Some(name) {
                return Err(Error::Parse(format!("expected '{name}' header, got '{line}'")));
            }
            let count: usize = h.next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("bad count in '{line}'")))?;
            (0..count)
                .map(|_| {
                    let line = it.next().ok_or_else(|| Error::Parse("truncated mesh file".into()))?;
                    let v: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                    if v.len() != width {
                        return Err(Error::Parse(format!("expected {width} fields in '{line}'")));
                    }
                    Ok(v)
                })
                .collect()
        };
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'"))) };
        let idx = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad index '{s}'"))) };
        let mut nodes = Vec::new();
        let mut dirichlet = Vec::new();
        for r in section("nodes", 3)? {
            nodes.push([num(&r[0])?, num(&r[1])?]);
            dirichlet.push(idx(&r[2])? != 0);
        }
        let triangles = section("triangles", 3)?
            .iter()
            .map(|r| Ok([idx(&r[0])?, idx(&r[1])?, idx(&r[2])?]))
            .collect::<Result<Vec<_>>>()?;
        let loop_edges = section("loop_edges", 2)?.iter().map(|r| Ok([idx(&r[0])?, idx(&r[1])?])).collect::<Result<Vec<_>>>()?;
        let mesh = Self { nodes, triangles, loop_edges, dirichlet };
        mesh.check()?;
        Ok(mesh)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_text(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_text(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn free_count(&self) -> usize {
        self.dirichlet.iter().filter(|d| !**d).count()
    }
}

fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

// Degree-5 seven-point rule on the reference triangle (barycentric, weights
// summing to one).
const QUAD: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

/// Vector potential `c₀(−y, x)/r² + (B/2)(−y, x) + κ(y, x)`; the last term is
/// the gradient of the gauge function `κxy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorPotential {
    pub c0: f64,
    pub b: f64,
    pub gauge_kappa: f64,
}

impl VectorPotential {
    pub fn new(params: &ModelParams) -> Self {
        Self { c0: params.c0, b: params.b, gauge_kappa: 0.0 }
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        let r2 = x * x + y * y;
        let s = self.c0 / r2 + 0.5 * self.b;
        [-y * s + self.gauge_kappa * y, x * s + self.gauge_kappa * x]
    }
}

/// Free-node numbering and assembled banded matrices.
struct Discretization {
    n: usize,
    k: BandedHermitian,
    m: BandedHermitian,
}

fn assemble(mesh: &Mesh, potential: &VectorPotential, beta: f64) -> Result<Discretization> {
    let mut dof: Vec<Option<usize>> = vec![None; mesh.nodes.len()];
    let mut n = 0;
    for (i, d) in mesh.dirichlet.iter().enumerate() {
        if !d {
            dof[i] = Some(n);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Mesh("mesh has no free nodes".into()));
    }
    let mut bw = 0usize;
    for t in &mesh.triangles {
        for a in t {
            for b in t {
                if let (Some(i), Some(j)) = (dof[*a], dof[*b]) {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
    }
    let mut k = BandedHermitian::zeros(n, bw);
    let mut m = BandedHermitian::zeros(n, bw);
    for t in &mesh.triangles {
        let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
        let area2 = 2.0 * triangle_area(p[0], p[1], p[2]);
        let area = area2.abs() * 0.5;
        // gradients of barycentric coordinates
        let grad = [
            [(p[1][1] - p[2][1]) / area2, (p[2][0] - p[1][0]) / area2],
            [(p[2][1] - p[0][1]) / area2, (p[0][0] - p[2][0]) / area2],
            [(p[0][1] - p[1][1]) / area2, (p[1][0] - p[0][0]) / area2],
        ];
        let mut ke = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (a, ga) in grad.iter().enumerate() {
            for (b, gb) in grad.iter().enumerate() {
                ke[a][b].re += area * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
        for (bary, w) in QUAD {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let av = potential.eval(x);
            let a2 = av[0] * av[0] + av[1] * av[1];
            let adg: Vec<f64> = grad.iter().map(|g| av[0] * g[0] + av[1] * g[1]).collect();
            let wa = w * area;
            for a in 0..3 {
                for b in 0..3 {
                    let cross = bary[a] * adg[b] - bary[b] * adg[a];
                    ke[a][b] += Complex64::new(wa * a2 * bary[a] * bary[b], wa * cross);
                }
            }
        }
        for a in 0..3 {
            let Some(i) = dof[t[a]] else { continue };
            for b in 0..3 {
                let Some(j) = dof[t[b]] else { continue };
                if j <= i {
                    k.add(i, j, ke[a][b]);
                    let mass = if a == b { area / 6.0 } else { area / 12.0 };
                    m.add(i, j, Complex64::new(mass, 0.0));
                }
            }
        }
    }
    for e in &mesh.loop_edges {
        let (pa, pb) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let c = -beta * len / 6.0;
        let ids = [dof[e[0]], dof[e[1]]];
        for (x, ia) in ids.iter().enumerate() {
            let Some(i) = ia else { continue };
            for (y, ib) in ids.iter().enumerate() {
                let Some(j) = ib else { continue };
                if j <= i {
                    let v = if x == y { 2.0 * c } else { c };
                    k.add(*i, *j, Complex64::new(v, 0.0));
                }
            }
        }
    }
    Ok(Discretization { n, k, m })
}

fn hermitian_products(a: &BandedHermitian, y: &[Vec<Complex64>]) -> DMatrix<Complex64> {
    let p = y.len();
    let ay: Vec<Vec<Complex64>> = y.iter().map(|v| a.mul_vec(v)).collect();
    let mut out = DMatrix::zeros(p, p);
    for r in 0..p {
        for c in 0..p {
            out[(r, c)] = y[r].iter().zip(&ay[c]).map(|(u, v)| u.conj() * v).sum();
        }
    }
    // symmetrize round-off
    let h = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
    h
}

/// Rayleigh–Ritz on span(y): returns ascending Ritz values and the
/// M-orthonormal Ritz vectors.
fn rayleigh_ritz(k: &BandedHermitian, m: &BandedHermitian, y: &[Vec<Complex64>]) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let p = y.len();
    let kr = hermitian_products(k, y);
    let mr = hermitian_products(m, y);
    let chol = mr.cholesky().ok_or_else(|| Error::Numerical("Ritz basis lost independence".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Numerical("singular Ritz mass matrix".into()))?;
    let reduced = &linv * kr * linv.adjoint();
    let reduced = (&reduced + reduced.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let coeffs = linv.adjoint() * &eig.eigenvectors;
    let nn = y[0].len();
    let vals = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let vecs = order
        .iter()
        .map(|&c| {
            let mut v = vec![Complex64::new(0.0, 0.0); nn];
            for (r, yr) in y.iter().enumerate() {
                let w = coeffs[(r, c)];
                for (vi, yi) in v.iter_mut().zip(yr) {
                    *vi += w * yi;
                }
            }
            v
        })
        .collect();
    Ok((vals, vecs))
}

fn factor_shifted(k: &BandedHermitian, m: &BandedHermitian, mut sigma: f64, step: f64) -> Result<(f64, BandedCholesky)> {
    let mut step = step.max(1.0);
    for _ in 0..40 {
        if let Some(c) = k.axpy(-sigma, m).cholesky() {
            return Ok((sigma, c));
        }
        sigma -= step;
        step *= 2.0;
    }
    Err(Error::Numerical("no positive definite shift found".into()))
}

/// Eigen-solve of one mesh: lowest `n` eigenvalues with maximal relative
/// residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshSpectrum {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub dofs: usize,
    pub bandwidth: usize,
}

/// Shift-invert block subspace iteration with Rayleigh–Ritz.
pub fn solve_mesh(mesh: &Mesh, potential: &VectorPotential, beta: f64, n: usize, sigma: f64) -> Result<MeshSpectrum> {
    let Discretization { n: dim, k, m, .. } = assemble(mesh, potential, beta)?;
    let block = (n + 6).min(dim);
    if n > dim {
        return Err(Error::Mesh(format!("mesh has only {dim} free nodes")));
    }
    let (_, chol) = factor_shifted(&k, &m, sigma, 0.1 * sigma.abs())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Vec<Complex64>> = (0..block)
        .map(|_| (0..dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
        .collect();
    let mut prev: Vec<f64> = vec![f64::INFINITY; block];
    let mut iterations = 0;
    let mut vals = Vec::new();
    for it in 1..=500 {
        iterations = it;
        let mut y: Vec<Vec<Complex64>> = x
            .iter()
            .map(|v| {
                let mut w = m.mul_vec(v);
                chol.solve_in_place(&mut w);
                let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                w.iter_mut().for_each(|c| *c /= norm);
                w
            })
            .collect();
        let (v, vecs) = rayleigh_ritz(&k, &m, &y)?;
        y.clear();
        x = vecs;
        let change = (0..n).map(|i| ((v[i] - prev[i]) / v[i].abs().max(1.0)).abs()).fold(0.0, f64::max);
        prev = v.clone();
        vals = v;
        if change < 1e-13 {
            break;
        }
    }
    let residuals = (0..n)
        .map(|i| {
            let kx = k.mul_vec(&x[i]);
            let mx = m.mul_vec(&x[i]);
            let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - b * vals[i]).norm_sqr()).sum::<f64>().sqrt();
            let s: f64 = kx.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            r / s.max(f64::MIN_POSITIVE)
        })
        .collect();
    Ok(MeshSpectrum { eigenvalues: vals[..n].to_vec(), residuals, iterations, dofs: dim, bandwidth: k.bandwidth() })
}

/// General-loop solution from two nested ray meshes (`h`, `h/2`). The
/// reported eigenvalue is their Richardson value; the error estimate is the
/// size of the Richardson correction, which bounds the `h/2` error and is
/// conservative for the extrapolated value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralSolution {
    pub spectrum: Spectrum,
    pub levels: Vec<MeshSpectrum>,
    pub control: MeshControl,
}

/// Shift below the spectrum: the δ-loop ground state is above
/// `−β²/4 − γ₊² − 10` for the loops and fields handled here, and the
/// Cholesky fallback lowers it further when needed.
fn default_shift(curve: &LoopCurve, beta: f64) -> f64 {
    -0.25 * beta * beta - curve.gamma_plus().powi(2) - 10.0
}

pub fn general_solve_with(curve: &LoopCurve, params: ModelParams, potential: VectorPotential, n: usize, control: &MeshControl) -> Result<GeneralSolution> {
    if curve.winding_number([0.0, 0.0]) != 1 {
        return Err(Error::OriginPlacement("flux origin is not enclosed by the loop".into()));
    }
    let sigma = default_shift(curve, params.beta);
    let controls = [*control, control.refined()];
    let levels: Vec<MeshSpectrum> = controls
        .par_iter()
        .map(|c| solve_mesh(&Mesh::star_shaped(curve, c)?, &potential, params.beta, n, sigma))
        .collect::<Result<_>>()?;
    let richardson = |c: &MeshSpectrum, f: &MeshSpectrum| -> Vec<f64> { c.eigenvalues.iter().zip(&f.eigenvalues).map(|(c, f)| (4.0 * f - c) / 3.0).collect() };
    let extrapolated = richardson(&levels[0], &levels[1]);
    let fine = &levels[1];
    let errors = extrapolated.iter().zip(&fine.eigenvalues).map(|(e, f)| (e - f).abs()).collect();
    let spectrum = Spectrum {
        operator: "H_fem".into(),
        params: serde_json::json!({ "c0": params.c0, "B": params.b, "beta": params.beta, "gauge_kappa": potential.gauge_kappa, "mesh": control }),
        grid: fine.dofs,
        eigenvalues: extrapolated,
        error_estimates: errors,
        max_residual: fine.residuals.iter().cloned().fold(0.0, f64::max),
    };
    Ok(GeneralSolution { spectrum, levels, control: *control })
}

/// Lowest `n` eigenvalues of the full operator for a star-shaped loop.
pub fn general_solve(curve: &LoopCurve, params: ModelParams, n: usize, control: &MeshControl) -> Result<GeneralSolution> {
    general_solve_with(curve, params, VectorPotential::new(&params), n, control)
}

/// Same solve after adding `∇(κxy)` to the vector potential.
pub fn gauge_shifted_solve(curve: &LoopCurve, params: ModelParams, n: usize, control: &MeshControl, kappa: f64) -> Result<GeneralSolution> {
    let potential = VectorPotential { gauge_kappa: kappa, ..VectorPotential::new(&params) };
    general_solve_with(curve, params, potential, n, control)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveSpec;

    fn small() -> MeshControl {
        MeshControl { n_theta: 16, n_inner: 6, n_outer: 6, ..MeshControl::default() }
    }

    #[test]
    fn ray_mesh_conforms_to_loop() {
        let c = CurveSpec::Ellipse { semi_x: 1.5, semi_y: 1.0, center: [0.0, 0.0] }.build(512).unwrap();
        let mesh = Mesh::star_shaped(&c, &small()).unwrap();
        mesh.check().unwrap();
        let len: f64 = mesh
            .loop_edges
            .iter()
            .map(|e| {
                let (a, b) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum();
        assert!(len < c.length() && len > 0.98 * c.length());
        for e in &mesh.loop_edges {
            let p = mesh.nodes[e[0]];
            assert!(c.distance_to(p) < 1e-9);
        }
    }

    #[test]
    fn mesh_text_round_trip() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let mesh = Mesh::star_shaped(&c, &small()).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.loop_edges, mesh.loop_edges);
        for (a, b) in back.nodes.iter().zip(&mesh.nodes) {
            assert_eq!(a, b);
        }
        assert!(Mesh::read_text(std::io::Cursor::new("nodes 1\n0 0 0\ntriangles 0\nloop_edges 0\n")).is_err());
    }

    #[test]
    fn origin_outside_is_rejected() {
        let c = CurveSpec::Circle { radius: 1.0, center: [3.0, 0.0] }.build(256).unwrap();
        assert!(Mesh::star_shaped(&c, &small()).is_err());
    }

    #[test]
    fn laplacian_on_annulus_is_positive_and_hermitian() {
        let c = CurveSpec::unit_circle().build(256).unwrap();
        let mesh = Mesh::star_shaped(&c, &small()).unwrap();
        let p = ModelParams::new(0.3, 1.0, 5.0).unwrap();
        let disc = assemble(&mesh, &VectorPotential::new(&p), 0.0).unwrap();
        for i in 0..disc.n {
            assert!(disc.k.get(i, i).re > 0.0);
            assert!(disc.k.get(i, i).im.abs() < 1e-14);
        }
        assert!(disc.k.cholesky().is_some());
    }
}
