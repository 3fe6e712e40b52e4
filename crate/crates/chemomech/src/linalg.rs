//! Banded linear algebra for the Jacobian systems of the implicit solver.
//!
//! Storage follows the LAPACK general-band convention: an n-column matrix
//! with `kl` subdiagonals and `ku` superdiagonals is held column-major with
//! leading dimension `2 kl + ku + 1`; entry (i, j) lives at
//! `data[j * ldab + kl + ku + i - j]`. The extra `kl` rows above the band
//! absorb fill-in from partial pivoting, so factorization happens in place.

use crate::{ModelError, Result};

/// General banded matrix with pivoting headroom preallocated.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zero(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0);
        let ldab = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; n * ldab],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    /// Whether (i, j) lies inside the declared band.
    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    /// Entry (i, j); zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn zero_all(&mut self) {
        self.data.fill(0.0);
    }

    /// self = a X + b Z entrywise; all three matrices must share shape.
    pub fn set_combination(&mut self, a: f64, x: &BandedMatrix, b: f64, z: &BandedMatrix) {
        assert!(
            self.n == x.n && self.kl == x.kl && self.ku == x.ku,
            "shape mismatch with X"
        );
        assert!(
            self.n == z.n && self.kl == z.kl && self.ku == z.ku,
            "shape mismatch with Z"
        );
        for (dst, (&xv, &zv)) in self.data.iter_mut().zip(x.data.iter().zip(z.data.iter())) {
            *dst = a * xv + b * zv;
        }
    }

    /// Clears row i within the band (essential boundary conditions).
    pub fn zero_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let k = self.idx(i, j);
            self.data[k] = 0.0;
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let base = j * self.ldab + self.kl + self.ku;
            for i in lo..=hi {
                y[i] += self.data[base + i - j] * xj;
            }
        }
    }

    /// LU factorization with partial pivoting (band variant of dgbtrf).
    /// Fill-in widens the effective upper bandwidth to `kl + ku`.
    pub fn lu_factor(&self) -> Result<BandedLu> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let mut a = self.data.clone();
        let mut ipiv = vec![0usize; n];
        let at = |i: usize, j: usize| j * ldab + kl + ku + i - j;

        for j in 0..n {
            let i_end = (j + kl).min(n - 1);
            let mut piv = j;
            let mut piv_val = a[at(j, j)].abs();
            for i in (j + 1)..=i_end {
                let v = a[at(i, j)].abs();
                if v > piv_val {
                    piv = i;
                    piv_val = v;
                }
            }
            if piv_val == 0.0 || !piv_val.is_finite() {
                return Err(ModelError::SingularMatrix(j));
            }
            ipiv[j] = piv;
            let col_end = (j + ku + kl).min(n - 1);
            if piv != j {
                for c in j..=col_end {
                    a.swap(at(j, c), at(piv, c));
                }
            }
            let diag = a[at(j, j)];
            for i in (j + 1)..=i_end {
                let l = a[at(i, j)] / diag;
                a[at(i, j)] = l;
                if l != 0.0 {
                    for c in (j + 1)..=col_end {
                        a[at(i, c)] -= l * a[at(j, c)];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            data: a,
            ipiv,
        })
    }
}

/// Factored form of a [`BandedMatrix`]; solves by forward/back substitution.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let at = |i: usize, j: usize| j * ldab + kl + ku + i - j;

        for j in 0..n {
            let piv = self.ipiv[j];
            if piv != j {
                b.swap(j, piv);
            }
            let bj = b[j];
            if bj != 0.0 {
                let i_end = (j + kl).min(n - 1);
                for i in (j + 1)..=i_end {
                    b[i] -= self.data[at(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.data[at(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                let i_start = j.saturating_sub(ku + kl);
                for i in i_start..j {
                    b[i] -= self.data[at(i, j)] * bj;
                }
            }
        }
    }
}
