//! Flux dependence of the circle spectrum (persistent currents).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::radial::radial_solve;
use crate::coefficients::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurrentRow {
    pub c0: f64,
    pub levels: Vec<f64>,
    pub errors: Vec<f64>,
    /// `∂λ₁/∂c₀` by finite differences on the grid.
    pub dlambda1_dc0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurrentReport {
    pub radius: f64,
    pub b: f64,
    pub beta: f64,
    pub rows: Vec<CurrentRow>,
    /// `max − min` of `λ₁` over the grid.
    pub variation: f64,
    /// Largest error estimate of `λ₁` over the grid.
    pub max_error: f64,
    pub detected: bool,
}

pub const DETECTION_FACTOR: f64 = 10.0;

/// Tabulates the lowest `n` circle eigenvalues over `c0_grid`. `β = 0` is
/// accepted but the infinitely degenerate Landau levels make the angular
/// truncation fail.
pub fn persistent_current(radius: f64, b: f64, beta: f64, c0_grid: &[f64], n: usize) -> Result<CurrentReport> {
    if c0_grid.len() < 5 {
        return Err(Error::InvalidParams("c0 grid needs at least 5 points".into()));
    }
    if c0_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("c0 grid must be strictly increasing".into()));
    }
    let params: Vec<ModelParams> = c0_grid
        .iter()
        .map(|&c0| if beta == 0.0 { ModelParams::degenerate(c0, b, 0.0) } else { ModelParams::new(c0, b, beta) })
        .collect::<Result<_>>()?;
    if params.iter().any(|p| p.c0 == 0.0) {
        return Err(Error::InvalidParams("c0 grid must lie in (0, 1)".into()));
    }
    let solved: Vec<_> = params.par_iter().map(|&p| radial_solve(radius, p, n, None)).collect::<Result<_>>()?;
    let l1: Vec<f64> = solved.iter().map(|s| s.spectrum.eigenvalues[0]).collect();
    let k = c0_grid.len();
    let x = c0_grid;
    let derivative = |i: usize| -> f64 {
        if i == 0 {
            (l1[1] - l1[0]) / (x[1] - x[0])
        } else if i == k - 1 {
            (l1[k - 1] - l1[k - 2]) / (x[k - 1] - x[k - 2])
        } else {
            // three-point centred formula, exact for quadratics on uneven grids
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            (h0 * h0 * l1[i + 1] - h1 * h1 * l1[i - 1] + (h1 * h1 - h0 * h0) * l1[i]) / (h0 * h1 * (h0 + h1))
        }
    };
    let rows: Vec<CurrentRow> = solved
        .iter()
        .enumerate()
        .map(|(i, s)| CurrentRow {
            c0: x[i],
            levels: s.spectrum.eigenvalues.clone(),
            errors: s.spectrum.error_estimates.clone(),
            dlambda1_dc0: derivative(i),
        })
        .collect();
    let max = l1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = l1.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_error = rows.iter().map(|r| r.errors[0]).fold(0.0, f64::max);
    let variation = max - min;
    Ok(CurrentReport { radius, b, beta, rows, variation, max_error, detected: variation > DETECTION_FACTOR * max_error })
}

impl CurrentReport {
    /// Columns `c0,lambda_1..lambda_n,dlambda1_dc0`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let n = self.rows.first().map_or(0, |r| r.levels.len());
        let mut header = vec!["c0".to_string()];
        header.extend((1..=n).map(|j| format!("lambda_{j}")));
        header.push("dlambda1_dc0".into());
        writeln!(out, "{}", header.join(","))?;
        for r in &self.rows {
            let mut cells = vec![format!("{}", r.c0)];
            cells.extend(r.levels.iter().map(|v| format!("{v:.15e}")));
            cells.push(format!("{:.15e}", r.dlambda1_dc0));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (1..=9).map(|k| k as f64 / 10.0).collect()
    }

    #[test]
    fn landau_degeneracy_cannot_be_truncated() {
        // every channel with m ≥ c₀ carries the level B
        let err = persistent_current(1.0, 1.0, 0.0, &grid(), 1).unwrap_err();
        assert!(matches!(err, Error::MRangeInsufficient { .. }), "{err}");
    }

    #[test]
    fn strong_coupling_current_is_detected() {
        let r = persistent_current(1.0, 1.0, 20.0, &grid(), 2).unwrap();
        assert!(r.detected, "{r:?}");
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "c0,lambda_1,lambda_2,dlambda1_dc0");
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn short_grid_is_rejected() {
        assert!(persistent_current(1.0, 1.0, 20.0, &[0.2, 0.4], 1).is_err());
    }
}
