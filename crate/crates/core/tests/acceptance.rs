//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use deltaloop::bracketing::{enclosure, fit_log_over_beta, EnclosureOptions};
use deltaloop::coefficients::ModelParams;
use deltaloop::geometry::CurveSpec;
use deltaloop::oracle2d::radial::{free_level, RadialProblem};
use deltaloop::oracle2d::{gauge_shifted_solve, general_solve, persistent_current, radial_solve, MeshControl};
use deltaloop::spectral1d::{effective_spectrum, est1_check};
use deltaloop::transverse::est2_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn criterion(id: u32, title: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let result = body();
    let elapsed = t.elapsed();
    let in_time = elapsed <= limit;
    let (ok, detail) = match result {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    println!(
        "criterion {id} {:<4} {title}: {detail} [{:.2}s / limit {}s{}]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    ok
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn effective_exactness() -> Outcome {
    const TOL: f64 = 1e-10;
    let mut worst: f64 = 0.0;
    for r in [1.0, 2.0] {
        let c = CurveSpec::Circle { radius: r, center: [0.0, 0.0] }.build(256).map_err(err)?;
        let sp = effective_spectrum(&c, 7, 64).map_err(err)?;
        let l = 2.0 * PI * r;
        let mut exact: Vec<f64> = (-3i32..=3).map(|k| (2.0 * PI * k as f64 / l).powi(2) - 0.25 / (r * r)).collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in sp.eigenvalues.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= TOL, format!("max deviation {worst:.2e} (tol {TOL:.0e})"))
}

fn transverse_bounds() -> Outcome {
    let mut pairs = Vec::new();
    for a in [0.1, 0.25, 0.5, 1.0] {
        for beta in [30.0, 40.0, 60.0, 100.0, 200.0] {
            pairs.push((a, beta));
        }
    }
    assert_eq!(pairs.len(), 20);
    let mut held = 0;
    let (mut lit, mut scaled) = (0, 0);
    for &(a, beta) in &pairs {
        if beta * a <= 8.0 / 3.0 {
            return Err(format!("pair a={a} β={beta} outside βa > 8/3"));
        }
        let r = est2_check(a, beta, 1.0);
        if r.strict_bounds_hold() {
            held += 1;
        }
        lit += usize::from(r.upper_plus_literal && r.lower_minus_literal);
        scaled += usize::from(r.upper_plus_scaled && r.lower_minus_scaled);
    }
    check(held == pairs.len(), format!("{held}/20 strict bounds; envelopes e^(-β/2): {lit}/20, e^(-βa/2): {scaled}/20"))
}

fn est1_scaling() -> Outcome {
    let c = CurveSpec::unit_circle().build(256).map_err(err)?;
    let p = ModelParams::new(0.3, 1.0, 1.0).map_err(err)?;
    let a = [0.2, 0.1, 0.05, 0.025];
    let mut ratios = Vec::new();
    let mut ok = true;
    for j in [1, 2] {
        let r = est1_check(&c, p, j, &a, (256, 65), 64).map_err(err)?;
        ok &= r.pass;
        ratios.extend(r.ratios_minus.iter().chain(&r.ratios_plus).copied());
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    check(ok, format!("gap ratios in [{lo:.4}, {hi:.4}] (window [0.4, 0.6])"))
}

fn brute_force(xi: &[f64], mu: &[f64], n: usize) -> Vec<f64> {
    let mut all: Vec<f64> = xi.iter().flat_map(|x| mu.iter().map(move |m| x + m)).collect();
    all.sort_by(f64::total_cmp);
    all.truncate(n);
    all
}

fn tensor_sums_exact() -> Outcome {
    // candidates are drawn deterministically; the first ten whose enclosure
    // preconditions hold (positive bracketing kinetic coefficients, one
    // negative transverse level per side) are the admissible sample
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let candidates: Vec<(f64, f64, f64, f64, f64)> = (0..24)
        .map(|_| (rng.random_range(0.9..1.3), rng.random_range(0.9..1.3), rng.random_range(0.05..0.95), rng.random_range(0.2..2.0), rng.random_range(20.0..80.0)))
        .collect();
    let results: Vec<Option<bool>> = candidates
        .par_iter()
        .map(|&(sx, sy, c0, b, beta)| {
            let c = CurveSpec::Ellipse { semi_x: sx, semi_y: sy, center: [0.0, 0.0] }.build(512).ok()?;
            let p = ModelParams::new(c0, b, beta).ok()?;
            let e = enclosure(&c, p, beta, 5, &EnclosureOptions::default()).ok()?;
            Some(brute_force(&e.xi_minus, &e.mu_minus, 5) == e.sums_minus && brute_force(&e.xi_plus, &e.mu_plus, 5) == e.sums_plus)
        })
        .collect();
    let admissible: Vec<bool> = results.into_iter().flatten().take(10).collect();
    if admissible.len() < 10 {
        return Err(format!("only {} admissible configurations among 24 candidates", admissible.len()));
    }
    let equal = admissible.iter().filter(|e| **e).count();
    check(equal == 10, format!("{equal}/10 admissible configurations identical on both sides"))
}

fn sandwich() -> Outcome {
    let c = CurveSpec::unit_circle().build(256).map_err(err)?;
    let mut lines = Vec::new();
    let mut ok = true;
    for beta in [30.0, 50.0] {
        let p = ModelParams::new(0.3, 1.0, beta).map_err(err)?;
        let e = enclosure(&c, p, beta, 2, &EnclosureOptions::default()).map_err(err)?;
        let r = radial_solve(1.0, p, 2, None).map_err(err)?;
        for j in 1..=2 {
            let x = e.entry(j).unwrap();
            let lam = r.spectrum.eigenvalues[j - 1];
            let eps = x.error + r.spectrum.error_estimates[j - 1];
            let inside = x.contains(lam, eps);
            ok &= inside;
            let s = 0.25 * beta * beta;
            lines.push(format!("β={beta} j={j}: {:.4} ≤ {:.4} ≤ {:.4}", x.tau_minus + s, lam + s, x.tau_plus + s));
        }
    }
    check(ok, format!("shifted by β²/4, {}", lines.join("; ")))
}

fn asymptotic_trend() -> Outcome {
    let c = CurveSpec::unit_circle().build(256).map_err(err)?;
    let mu = effective_spectrum(&c, 2, 64).map_err(err)?;
    let betas = [50.0, 100.0, 200.0, 400.0];
    let sols: Vec<_> = betas
        .par_iter()
        .map(|&beta| radial_solve(1.0, ModelParams::new(0.3, 1.0, beta).map_err(err)?, 2, None).map_err(err))
        .collect::<Result<_, _>>()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for j in 1..=2 {
        let shifted: Vec<f64> = sols.iter().zip(&betas).map(|(s, b)| s.spectrum.eigenvalues[j - 1] + 0.25 * b * b).collect();
        let f = fit_log_over_beta(&betas, &shifted, mu.get(j)).map_err(err)?;
        ok &= f.decreasing && f.relative_residual < 0.3;
        parts.push(format!(
            "j={j}: decreasing={} residual={:.3} limit={:.5} gap to μ_j={:+.5} (informational)",
            f.decreasing,
            f.relative_residual,
            f.limit,
            f.reference_gap.unwrap_or(f64::NAN)
        ));
    }
    check(ok, parts.join("; "))
}

fn persistent_currents() -> Outcome {
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let r = persistent_current(1.0, 1.0, 50.0, &grid, 1).map_err(err)?;
    check(r.detected, format!("variation {:.4e} vs 10 × error {:.2e}", r.variation, 10.0 * r.max_error))
}

fn oracle_cross_validation() -> Outcome {
    let beta = 30.0;
    let c = CurveSpec::unit_circle().build(1024).map_err(err)?;
    let p = ModelParams::new(0.3, 1.0, beta).map_err(err)?;
    let mesh = MeshControl::for_beta(beta);
    let radial = radial_solve(1.0, p, 1, None).map_err(err)?;
    let (plain, gauged) = rayon::join(|| general_solve(&c, p, 1, &mesh), || gauge_shifted_solve(&c, p, 1, &mesh, 0.25));
    let (plain, gauged) = (plain.map_err(err)?.spectrum, gauged.map_err(err)?.spectrum);
    let s = 0.25 * beta * beta;
    let (lr, lf, lg) = (radial.spectrum.eigenvalues[0] + s, plain.eigenvalues[0] + s, gauged.eigenvalues[0] + s);
    let rel = (lf - lr).abs() / lr.abs();
    let tol = plain.error_estimates[0] + gauged.error_estimates[0];
    let gauge_ok = (lf - lg).abs() <= tol;
    check(
        rel <= 0.01 && gauge_ok,
        format!("λ₁+β²/4: radial {lr:.6}, FEM {lf:.6} (rel {rel:.2e}, limit 1e-2); gauge shift |Δ|={:.2e} ≤ mesh tol {tol:.2e}: {gauge_ok}", (lf - lg).abs()),
    )
}

fn landau_closed_form() -> Outcome {
    const TOL: f64 = 1e-8;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for c0 in [0.25, 0.5, 0.75] {
        let p = ModelParams::degenerate(c0, 1.0, 0.0).map_err(err)?;
        for m in -3..=3 {
            let nu = m as f64 - c0;
            let prob = RadialProblem::new(1.0, p, m, free_level(1.0, nu, 5)).map_err(err)?;
            let got = prob.lowest(5).map_err(err)?;
            if got.len() != 5 {
                return Err(format!("c0={c0} m={m}: {} levels", got.len()));
            }
            for (k, (l, _)) in got.iter().enumerate() {
                worst = worst.max((l - free_level(1.0, nu, k)).abs());
                count += 1;
            }
        }
    }
    check(worst <= TOL, format!("{count} channel levels, max deviation {worst:.2e} (tol {TOL:.0e})"))
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "effective-operator exactness", secs(1), effective_exactness),
        criterion(2, "transverse bounds", secs(1), transverse_bounds),
        criterion(3, "loop-operator linear scaling", secs(10), est1_scaling),
        criterion(4, "tensor-sum equivalence", secs(5), tensor_sums_exact),
        criterion(5, "sandwich", secs(120), sandwich),
        criterion(6, "asymptotic trend", secs(600), asymptotic_trend),
        criterion(7, "persistent currents", secs(300), persistent_currents),
        criterion(8, "oracle cross-validation", secs(600), oracle_cross_validation),
        criterion(9, "β = 0 Landau/Aharonov–Bohm levels", secs(10), landau_closed_form),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
