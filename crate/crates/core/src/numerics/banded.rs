use num_complex::Complex64;

/// Hermitian matrix stored by its lower band: entry `(i, j)` with
/// `i - bw <= j <= i`.
#[derive(Debug, Clone)]
pub struct BandedHermitian {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl BandedHermitian {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![Complex64::new(0.0, 0.0); n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Adds `v` at `(i, j)`; the mirrored entry is implied. Entries above the
    /// diagonal are conjugated into the lower band.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        if j <= i {
            let k = self.idx(i, j);
            self.data[k] += v;
        } else {
            let k = self.idx(j, i);
            self.data[k] += v.conj();
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j <= i {
            if i - j > self.bw {
                return Complex64::new(0.0, 0.0);
            }
            self.data[self.idx(i, j)]
        } else {
            self.get(j, i).conj()
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw - (i - j0);
            for (t, j) in (j0..i).enumerate() {
                let a = row[off + t];
                y[i] += a * x[j];
                y[j] += a.conj() * x[i];
            }
            y[i] += row[self.bw] * x[i];
        }
        y
    }

    /// `self + alpha * other` (same shape).
    pub fn axpy(&self, alpha: f64, other: &BandedHermitian) -> BandedHermitian {
        assert_eq!(self.n, other.n);
        assert_eq!(self.bw, other.bw);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b * alpha).collect();
        BandedHermitian { n: self.n, bw: self.bw, data }
    }

    /// Banded Cholesky `A = L Lᴴ`. Returns `None` when `A` is not positive
    /// definite.
    pub fn cholesky(&self) -> Option<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + (bw - (i - j))];
                // row i entries k in [k0, j), row j entries k in [k0, j)
                let ri = i * w + bw - (i - k0);
                let rj = j * w + bw - (j - k0);
                let len = j - k0;
                let (li, lj) = (&l[ri..ri + len], &l[rj..rj + len]);
                for (a, b) in li.iter().zip(lj) {
                    s -= a * b.conj();
                }
                if i == j {
                    if !(s.re > 0.0) || !s.re.is_finite() {
                        return None;
                    }
                    l[i * w + bw] = Complex64::new(s.re.sqrt(), 0.0);
                } else {
                    let d = l[j * w + bw].re;
                    l[i * w + (bw - (i - j))] = s / d;
                }
            }
        }
        Some(BandedCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<Complex64>,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let w = self.bw + 1;
        let bw = self.bw;
        // forward: L y = b
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            let row = &self.l[i * w..(i + 1) * w];
            let mut s = b[i];
            for (t, j) in (j0..i).enumerate() {
                s -= row[bw - (i - j0) + t] * b[j];
            }
            b[i] = s / row[bw].re;
        }
        // backward: Lᴴ x = y
        for i in (0..self.n).rev() {
            let row = &self.l[i * w..(i + 1) * w];
            b[i] /= row[bw].re;
            let xi = b[i];
            let j0 = i.saturating_sub(bw);
            for (t, j) in (j0..i).enumerate() {
                b[j] -= row[bw - (i - j0) + t].conj() * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cholesky_solves_hermitian_band_system() {
        let n = 12;
        let bw = 3;
        let mut a = BandedHermitian::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, c(6.0 + i as f64 * 0.1, 0.0));
            for d in 1..=bw {
                if i >= d {
                    a.add(i, i - d, c(0.5 / d as f64, 0.3 * (i as f64 - d as f64).sin()));
                }
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64 * 0.2)).collect();
        let mut b = a.mul_vec(&x);
        let chol = a.cholesky().expect("positive definite");
        chol.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = BandedHermitian::zeros(2, 1);
        a.add(0, 0, c(1.0, 0.0));
        a.add(1, 1, c(1.0, 0.0));
        a.add(1, 0, c(2.0, 0.0));
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn upper_entries_are_conjugated() {
        let mut a = BandedHermitian::zeros(3, 2);
        a.add(0, 2, c(1.0, 2.0));
        assert_eq!(a.get(2, 0), c(1.0, -2.0));
        assert_eq!(a.get(0, 2), c(1.0, 2.0));
    }
}
