//! Second-order tensors in three dimensions with the symmetric spectral
//! machinery needed by the Hencky strain and the exponential map.

use crate::{ModelError, Result};

/// 3x3 second-order tensor, row-major.
///
/// Deformation gradients must keep det F > 0; symmetric quantities (strains,
/// stresses) are constructed symmetric and stay symmetric under the provided
/// operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor2 {
    pub m: [[f64; 3]; 3],
}

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2 { m: [[0.0; 3]; 3] };

    pub fn identity() -> Tensor2 {
        Tensor2::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Tensor2 {
        Tensor2 {
            m: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]],
        }
    }

    pub fn from_rows(m: [[f64; 3]; 3]) -> Tensor2 {
        Tensor2 { m }
    }

    /// Builds the symmetric tensor with the given diagonal and off-diagonal
    /// entries (a01, a02, a12 mirrored below the diagonal).
    pub fn symmetric(d: [f64; 3], off: [f64; 3]) -> Tensor2 {
        Tensor2 {
            m: [
                [d[0], off[0], off[1]],
                [off[0], d[1], off[2]],
                [off[1], off[2], d[2]],
            ],
        }
    }

    pub fn transpose(&self) -> Tensor2 {
        let mut t = Tensor2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Tensor2) -> Tensor2 {
        let mut r = Tensor2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.m[i][k] * rhs.m[k][j];
                }
                r.m[i][j] = s;
            }
        }
        r
    }

    pub fn add(&self, rhs: &Tensor2) -> Tensor2 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += rhs.m[i][j];
            }
        }
        r
    }

    pub fn sub(&self, rhs: &Tensor2) -> Tensor2 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] -= rhs.m[i][j];
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] *= s;
            }
        }
        r
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; errors if |det| is not safely nonzero.
    pub fn inverse(&self) -> Result<Tensor2> {
        let d = self.det();
        if !d.is_finite() || d.abs() < 1e-300 {
            return Err(ModelError::PlasticSingularity);
        }
        let m = &self.m;
        let inv = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Ok(Tensor2 { m: inv }.scale(1.0 / d))
    }

    /// Frobenius inner product A : B.
    pub fn ddot(&self, rhs: &Tensor2) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.m[i][j] * rhs.m[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Deviatoric part A - (tr A / 3) Id.
    pub fn dev(&self) -> Tensor2 {
        let p = self.trace() / 3.0;
        let mut r = *self;
        for i in 0..3 {
            r.m[i][i] -= p;
        }
        r
    }

    pub fn sym(&self) -> Tensor2 {
        self.add(&self.transpose()).scale(0.5)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.m[0][1] - self.m[1][0]).abs() <= tol
            && (self.m[0][2] - self.m[2][0]).abs() <= tol
            && (self.m[1][2] - self.m[2][1]).abs() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v = v.max(self.m[i][j].abs());
            }
        }
        v
    }

    /// Eigenpairs of a symmetric tensor, ascending eigenvalues; columns of
    /// the returned matrix are the orthonormal eigenvectors.
    ///
    /// Closed-form (Cardano) eigenvalues with eigenvectors from cross
    /// products; falls back to cyclic Jacobi when the residual indicates a
    /// near-degenerate spectrum the analytic branch resolved poorly.
    pub fn eig_sym(&self) -> Result<([f64; 3], [[f64; 3]; 3])> {
        let scale = self.max_abs();
        if !scale.is_finite() {
            return Err(ModelError::SpectralFailure("non-finite entries".into()));
        }
        if scale == 0.0 {
            return Ok(([0.0; 3], IDENTITY_COLS));
        }
        let off = self.m[0][1].abs() + self.m[0][2].abs() + self.m[1][2].abs();
        if off <= 1e-14 * scale {
            // Diagonal fast path: sort entries, permute basis vectors.
            let mut idx = [0usize, 1, 2];
            let d = [self.m[0][0], self.m[1][1], self.m[2][2]];
            idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
            let vals = [d[idx[0]], d[idx[1]], d[idx[2]]];
            let mut vecs = [[0.0; 3]; 3];
            for (col, &i) in idx.iter().enumerate() {
                vecs[i][col] = 1.0;
            }
            return Ok((vals, vecs));
        }

        if let Some((vals, vecs)) = self.eig_cardano() {
            if self.eig_residual(&vals, &vecs) <= 1e-12 * scale {
                return Ok((vals, vecs));
            }
        }
        self.eig_jacobi()
    }

    /// Analytic symmetric eigendecomposition. Returns None when the
    /// eigenvector construction is ill-conditioned.
    fn eig_cardano(&self) -> Option<([f64; 3], [[f64; 3]; 3])> {
        let m = &self.m;
        let q = self.trace() / 3.0;
        let mut b = *self;
        for i in 0..3 {
            b.m[i][i] -= q;
        }
        let p2 = b.ddot(&b) / 6.0;
        if p2 <= 0.0 {
            // A = q Id up to roundoff.
            return Some(([q, q, q], IDENTITY_COLS));
        }
        let p = p2.sqrt();
        let detb = b.det();
        let r = (detb / (2.0 * p * p * p)).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        // Ordered: eig3 >= eig2 >= eig1.
        let eig3 = q + 2.0 * p * phi.cos();
        let eig1 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
        let eig2 = 3.0 * q - eig1 - eig3;
        let vals = [eig1, eig2, eig3];

        // Eigenvector for the most separated eigenvalue first, via the
        // column-space of (A - l2)(A - l3); remaining vectors by deflation.
        let mut vecs = [[0.0; 3]; 3];
        let v0 = eigvec_from_product(m, vals[1], vals[2])?;
        let v2 = eigvec_from_product(m, vals[0], vals[1])?;
        // Orthonormalize: v1 = v2 x v0.
        let v1 = cross(&v2, &v0);
        let n1 = norm3(&v1);
        if n1 < 1e-8 {
            return None;
        }
        let v1 = [v1[0] / n1, v1[1] / n1, v1[2] / n1];
        for i in 0..3 {
            vecs[i][0] = v0[i];
            vecs[i][1] = v1[i];
            vecs[i][2] = v2[i];
        }
        Some((vals, vecs))
    }

    /// Cyclic Jacobi iteration; unconditionally convergent for symmetric
    /// input. Off-diagonal tolerance 1e-14 relative to the largest entry.
    fn eig_jacobi(&self) -> Result<([f64; 3], [[f64; 3]; 3])> {
        let mut a = self.m;
        let mut v = IDENTITY_COLS;
        let scale = self.max_abs();
        for _ in 0..64 {
            let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
            if off <= 1e-14 * scale {
                break;
            }
            for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..3 {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off > 1e-10 * scale {
            return Err(ModelError::SpectralFailure(format!(
                "jacobi iteration stalled, off-diagonal {off:e}"
            )));
        }
        // Sort ascending.
        let mut idx = [0usize, 1, 2];
        let d = [a[0][0], a[1][1], a[2][2]];
        idx.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap());
        let vals = [d[idx[0]], d[idx[1]], d[idx[2]]];
        let mut vecs = [[0.0; 3]; 3];
        for i in 0..3 {
            for (col, &j) in idx.iter().enumerate() {
                vecs[i][col] = v[i][j];
            }
        }
        Ok((vals, vecs))
    }

    fn eig_residual(&self, vals: &[f64; 3], vecs: &[[f64; 3]; 3]) -> f64 {
        let mut worst: f64 = 0.0;
        for col in 0..3 {
            for i in 0..3 {
                let mut av = 0.0;
                for j in 0..3 {
                    av += self.m[i][j] * vecs[j][col];
                }
                worst = worst.max((av - vals[col] * vecs[i][col]).abs());
            }
        }
        worst
    }
}

const IDENTITY_COLS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Unit vector spanning the (generically 1D) column space of
/// (A - l1 Id)(A - l2 Id); None when the product is numerically rank-0.
fn eigvec_from_product(a: &[[f64; 3]; 3], l1: f64, l2: f64) -> Option<[f64; 3]> {
    let mut b = [[0.0; 3]; 3];
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = a[i][j];
            c[i][j] = a[i][j];
        }
        b[i][i] -= l1;
        c[i][i] -= l2;
    }
    let mut best = [0.0; 3];
    let mut best_norm = 0.0;
    for col in 0..3 {
        let mut v = [0.0; 3];
        for i in 0..3 {
            for k in 0..3 {
                v[i] += b[i][k] * c[k][col];
            }
        }
        let n = norm3(&v);
        if n > best_norm {
            best_norm = n;
            best = v;
        }
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if best_norm <= 1e-12 * scale.max(1.0) {
        return None;
    }
    Some([
        best[0] / best_norm,
        best[1] / best_norm,
        best[2] / best_norm,
    ])
}

/// Applies a scalar function to a symmetric tensor through its spectrum:
/// f(S) = sum_a f(eta_a) r_a (x) r_a.
///
/// Well-defined under eigenvalue degeneracy (the projector sum is basis
/// independent). exp/log form an inverse pair within 1e-12 for ||S|| <= 1.
pub fn spectral_apply(s: &Tensor2, f: impl Fn(f64) -> f64) -> Result<Tensor2> {
    let (vals, vecs) = s.eig_sym()?;
    let mut out = Tensor2::ZERO;
    for (col, &v) in vals.iter().enumerate() {
        let fv = f(v);
        if !fv.is_finite() {
            return Err(ModelError::SpectralFailure(format!(
                "f({v}) is not finite"
            )));
        }
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += fv * vecs[i][col] * vecs[j][col];
            }
        }
    }
    // Symmetrize to scrub roundoff from the projector sum.
    Ok(out.sym())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn det_and_inverse_roundtrip() {
        let f = Tensor2::from_rows([[1.2, 0.1, 0.0], [0.05, 0.9, 0.2], [0.0, -0.1, 1.1]]);
        let inv = f.inverse().unwrap();
        let id = f.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                approx(id.m[i][j], if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
        approx(f.det() * inv.det(), 1.0, 1e-12);
    }

    #[test]
    fn eig_diagonal_and_hydrostatic() {
        let (vals, _) = Tensor2::diag(3.0, 1.0, 2.0).eig_sym().unwrap();
        assert_eq!(vals, [1.0, 2.0, 3.0]);
        let (vals, vecs) = Tensor2::diag(2.0, 2.0, 2.0).eig_sym().unwrap();
        assert_eq!(vals, [2.0, 2.0, 2.0]);
        // Eigenvectors orthonormal even for a triple eigenvalue.
        for c in 0..3 {
            let n: f64 = (0..3).map(|i| vecs[i][c] * vecs[i][c]).sum();
            approx(n, 1.0, 1e-14);
        }
    }

    #[test]
    fn spectral_exp_diagonal() {
        let s = Tensor2::diag(0.3, -0.1, 0.0);
        let e = spectral_apply(&s, f64::exp).unwrap();
        approx(e.m[0][0], 0.3f64.exp(), 1e-14);
        approx(e.m[1][1], (-0.1f64).exp(), 1e-14);
        approx(e.m[2][2], 1.0, 1e-14);
        let zero = spectral_apply(&Tensor2::ZERO, f64::exp).unwrap();
        approx(zero.sub(&Tensor2::identity()).norm(), 0.0, 1e-15);
    }

    fn sym_strategy(mag: f64) -> impl Strategy<Value = Tensor2> {
        let e = move || -mag..mag;
        (e(), e(), e(), e(), e(), e()).prop_map(|(a, b, c, x, y, z)| {
            Tensor2::symmetric([a, b, c], [x, y, z])
        })
    }

    proptest! {
        #[test]
        fn eig_reconstructs(s in sym_strategy(2.0)) {
            let (vals, vecs) = s.eig_sym().unwrap();
            let mut rec = Tensor2::ZERO;
            for c in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        rec.m[i][j] += vals[c] * vecs[i][c] * vecs[j][c];
                    }
                }
            }
            prop_assert!(rec.sub(&s).norm() <= 1e-10 * (1.0 + s.norm()));
            // Orthonormality of the eigenbasis.
            for a in 0..3 {
                for b in 0..3 {
                    let dot: f64 = (0..3).map(|i| vecs[i][a] * vecs[i][b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn exp_log_inverse_pair(s in sym_strategy(0.55)) {
            // ||S|| <= 1 regime of the stated contract.
            let e = spectral_apply(&s, f64::exp).unwrap();
            let back = spectral_apply(&e, f64::ln).unwrap();
            prop_assert!(back.sub(&s).norm() <= 1e-12 * (1.0 + s.norm()));
        }

        #[test]
        fn det_exp_tracefree(s in sym_strategy(0.5)) {
            let d = s.dev();
            let e = spectral_apply(&d, f64::exp).unwrap();
            prop_assert!((e.det() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn near_degenerate_spectra(base in -1.0f64..1.0, eps in 0.0f64..1e-9) {
            let s = Tensor2::symmetric([base, base + eps, base - eps], [eps, 0.0, eps / 2.0]);
            let (vals, vecs) = s.eig_sym().unwrap();
            let mut rec = Tensor2::ZERO;
            for c in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        rec.m[i][j] += vals[c] * vecs[i][c] * vecs[j][c];
                    }
                }
            }
            prop_assert!(rec.sub(&s).norm() <= 1e-9);
        }
    }
}
