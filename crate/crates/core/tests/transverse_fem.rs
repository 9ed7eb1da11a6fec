//! Independent P1 finite-element check of the transverse spectra.

use deltaloop::spectral1d::Side;
use deltaloop::transverse::{transverse_low_spectrum, TransverseProblem};
use nalgebra::{DMatrix, SymmetricEigen};

/// Lowest eigenvalues of `∫|f'|² − β|f(0)|² − g(|f(a)|² + |f(−a)|²)` with P1
/// elements on a uniform mesh of `2m` cells; Dirichlet ends when `g` is None.
fn p1_levels(a: f64, beta: f64, g: Option<f64>, m: usize, count: usize) -> Vec<f64> {
    let cells = 2 * m;
    let h = a / m as f64;
    let nodes = cells + 1;
    let mut k = DMatrix::<f64>::zeros(nodes, nodes);
    let mut mm = DMatrix::<f64>::zeros(nodes, nodes);
    for e in 0..cells {
        let (i, j) = (e, e + 1);
        k[(i, i)] += 1.0 / h;
        k[(j, j)] += 1.0 / h;
        k[(i, j)] -= 1.0 / h;
        k[(j, i)] -= 1.0 / h;
        mm[(i, i)] += h / 3.0;
        mm[(j, j)] += h / 3.0;
        mm[(i, j)] += h / 6.0;
        mm[(j, i)] += h / 6.0;
    }
    k[(m, m)] -= beta;
    let free: Vec<usize> = match g {
        Some(g) => {
            k[(0, 0)] -= g;
            k[(cells, cells)] -= g;
            (0..nodes).collect()
        }
        None => (1..cells).collect(),
    };
    let k = k.select_rows(&free).select_columns(&free);
    let mm = mm.select_rows(&free).select_columns(&free);
    let l = mm.cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let eig = SymmetricEigen::new(&li * k * li.transpose());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

fn compare(side: Side, gamma: f64) {
    let (a, beta) = (1.0, 10.0);
    let exact = transverse_low_spectrum(&TransverseProblem::new(a, beta, gamma, side).unwrap(), 4).unwrap().values();
    let g = (side == Side::Minus).then_some(gamma);
    let coarse = p1_levels(a, beta, g, 100, 4);
    let fine = p1_levels(a, beta, g, 200, 4);
    for k in 0..4 {
        let rich = (4.0 * fine[k] - coarse[k]) / 3.0;
        let tol = 1e-5 * exact[k].abs().max(1.0);
        assert!((rich - exact[k]).abs() < tol, "{side:?} level {k}: FEM {rich} vs {}", exact[k]);
        assert!(fine[k] >= exact[k] - 1e-9, "P1 values are upper bounds");
    }
}

#[test]
fn dirichlet_side_matches_p1_elements() {
    compare(Side::Plus, 1.0);
}

#[test]
fn robin_side_matches_p1_elements() {
    compare(Side::Minus, 1.0);
    compare(Side::Minus, 2.5);
    compare(Side::Minus, 0.0);
}
