//! Banded matrices with LU factorization (partial pivoting).
//!
//! Storage follows the LAPACK band convention: an `n x n` matrix with `kl`
//! sub-diagonals and `ku` super-diagonals is held column-major in a
//! `(2*kl + ku + 1) x n` array, the extra `kl` top rows being fill space for
//! pivoting. Entry `A(i, j)` lives at `ab[j * ldab + kl + ku + i - j]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl);
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            0.0
        } else {
            self.ab[j * self.ldab + self.kl + self.ku + i - j]
        }
    }

    /// In-place LU factorization with row partial pivoting (dgbtf2-style).
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku; // super-diagonals of U in storage
        let mut ipiv = vec![0usize; n];

        for j in 0..n {
            // pivot among rows j ..= j+km within the band
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv; // A(j, j)
            let mut jp = 0usize;
            let mut pmax = self.ab[col].abs();
            for i in 1..=km {
                let v = self.ab[col + i].abs();
                if v > pmax {
                    pmax = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            let piv = self.ab[col + jp];
            if piv == 0.0 {
                return Err(Error::LinearSolveFailure(format!(
                    "singular band matrix at column {j}"
                )));
            }
            // last column touched by this elimination step
            let ju = (j + ku + jp).min(n - 1).max(j);
            if jp != 0 {
                // swap rows j and j+jp over columns j..=ju
                for c in j..=ju {
                    let a = c * ldab + kv + j - c;
                    let b = a + jp;
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let d = self.ab[col];
                for i in 1..=km {
                    self.ab[col + i] /= d;
                }
                for c in (j + 1)..=ju {
                    let up = c * ldab + kv + j - c; // A(j, c)
                    let ajc = self.ab[up];
                    if ajc != 0.0 {
                        for i in 1..=km {
                            self.ab[up + i] -= self.ab[col + i] * ajc;
                        }
                    }
                }
            }
        }

        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::LinearSolveFailure(format!(
                "rhs length {} != {}",
                b.len(),
                n
            )));
        }
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku;

        // forward: apply L (unit lower, with pivots)
        if kl > 0 {
            for j in 0..n.saturating_sub(1) {
                let p = self.ipiv[j];
                if p != j {
                    b.swap(j, p);
                }
                let km = kl.min(n - 1 - j);
                let col = j * ldab + kv;
                let bj = b[j];
                if bj != 0.0 {
                    for i in 1..=km {
                        b[j + i] -= self.ab[col + i] * bj;
                    }
                }
            }
        }
        // backward: U x = y
        for j in (0..n).rev() {
            let d = self.ab[j * ldab + kv];
            if d == 0.0 {
                return Err(Error::LinearSolveFailure(format!(
                    "zero pivot in back-substitution at {j}"
                )));
            }
            let xj = b[j] / d;
            b[j] = xj;
            if xj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.ab[j * ldab + kv + i - j] * xj;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    // plain dense GE reference, test-only
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for j in 0..n {
            let mut p = j;
            for i in j + 1..n {
                if a[i][j].abs() > a[p][j].abs() {
                    p = i;
                }
            }
            a.swap(j, p);
            b.swap(j, p);
            let d = a[j][j];
            assert!(d.abs() > 1e-300, "singular test matrix");
            for i in j + 1..n {
                let m = a[i][j] / d;
                if m != 0.0 {
                    for c in j..n {
                        a[i][c] -= m * a[j][c];
                    }
                    b[i] -= m * b[j];
                }
            }
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for c in j + 1..n {
                s -= a[j][c] * b[c];
            }
            b[j] = s / a[j][j];
        }
        b
    }

    #[test]
    fn tridiagonal_poisson() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0 -> u = x(1-x)/2
        let n = 50;
        let h = 1.0 / (n as f64 + 1.0);
        let mut m = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, 2.0 / (h * h));
            if i > 0 {
                m.set(i, i - 1, -1.0 / (h * h));
            }
            if i + 1 < n {
                m.set(i, i + 1, -1.0 / (h * h));
            }
        }
        let lu = m.factor().unwrap();
        let mut b = vec![1.0; n];
        lu.solve(&mut b).unwrap();
        for i in 0..n {
            let x = (i as f64 + 1.0) * h;
            assert!((b[i] - 0.5 * x * (1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_band_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(12usize, 1usize, 1usize), (30, 4, 2), (25, 3, 6), (40, 7, 7)] {
            for _ in 0..5 {
                let mut band = BandMatrix::zeros(n, kl, ku);
                let mut dense = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        if i + ku >= j && j + kl >= i {
                            let v: f64 = rng.gen_range(-1.0..1.0);
                            band.set(i, j, v);
                            dense[i][j] = v;
                        }
                    }
                    // keep it comfortably nonsingular without killing pivoting paths
                    let bump: f64 = rng.gen_range(2.0..4.0);
                    band.add(i, i, bump * (kl + ku) as f64 * 0.3);
                    dense[i][i] += bump * (kl + ku) as f64 * 0.3;
                }
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let xref = dense_solve(dense, b.clone());
                let lu = band.factor().unwrap();
                let mut x = b;
                lu.solve(&mut x).unwrap();
                for i in 0..n {
                    assert!((x[i] - xref[i]).abs() < 1e-9, "mismatch at {i}");
                }
            }
        }
    }

    #[test]
    fn pivoting_handles_weak_diagonal() {
        // first diagonal entry tiny: without pivoting this explodes
        let n = 6;
        let mut band = BandMatrix::zeros(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        let vals = [
            (0, 0, 1e-14),
            (1, 0, 2.0),
            (0, 1, 1.0),
            (1, 1, 1.0),
            (2, 1, -1.0),
            (1, 2, 0.5),
            (2, 2, 3.0),
            (3, 2, 1.0),
            (2, 3, -0.7),
            (3, 3, 2.0),
            (4, 3, 0.3),
            (3, 4, 1.1),
            (4, 4, -2.5),
            (5, 4, 1.0),
            (4, 5, 0.4),
            (5, 5, 1.9),
            (2, 0, 0.8),
            (0, 2, -0.6),
        ];
        for &(i, j, v) in &vals {
            band.set(i, j, v);
            dense[i][j] = v;
        }
        let b = vec![1.0, -2.0, 0.5, 3.0, -1.0, 2.0];
        let xref = dense_solve(dense, b.clone());
        let lu = band.factor().unwrap();
        let mut x = b;
        lu.solve(&mut x).unwrap();
        for i in 0..n {
            assert!((x[i] - xref[i]).abs() < 1e-8 * (1.0 + xref[i].abs()));
        }
    }

    #[test]
    fn singular_reports_failure() {
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.set(0, 0, 1.0);
        m.set(1, 1, 0.0);
        m.set(2, 2, 1.0);
        assert!(m.factor().is_err());
    }
}
