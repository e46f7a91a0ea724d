//! Small dense complex linear algebra: Hermitian Jacobi eigendecomposition and
//! a one-sided Jacobi SVD. Matrices here are at most 8x8, so simplicity and
//! accuracy win over asymptotics. The one-sided SVD returns singular values
//! with absolute error O(eps * ||A||), which the concurrence computation
//! relies on for near-rank-deficient states.

use num_complex::Complex64;

/// Row-major dense complex matrix of order `n`.
#[derive(Clone, Debug)]
pub(crate) struct CMat {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            for (j, v) in r.iter().enumerate() {
                m.a[i * n + j] = *v;
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and
/// eigenvectors as columns of the returned matrix.
pub(crate) fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.n;
    let mut a = m.clone();
    // Enforce exact Hermiticity of the working copy.
    for i in 0..n {
        let d = a.get(i, i);
        a.set(i, i, Complex64::new(d.re, 0.0));
        for j in (i + 1)..n {
            let v = (a.get(i, j) + a.get(j, i).conj()) * 0.5;
            a.set(i, j, v);
            a.set(j, i, v.conj());
        }
    }
    let mut v = CMat::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let napq = apq.norm();
                if napq <= tol {
                    continue;
                }
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                // Unitary 2x2 rotation [[c, s],[ -s*, c]] * phase bookkeeping:
                // choose c real, s = c * t * e^{i arg(apq)}.
                let theta = (aqq - app) / (2.0 * napq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = apq / napq * (t * c);
                // Update rows/columns p and q: A <- J^H A J with
                // J[p][p]=c, J[p][q]=s, J[q][p]=-conj(s), J[q][q]=c.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * s.conj());
                    a.set(k, q, akp * s + akq * c);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * s);
                    a.set(q, k, apk * s.conj() + aqk * c);
                }
                // Clean the annihilated pair and keep the diagonal real.
                let app2 = a.get(p, p).re;
                let aqq2 = a.get(q, q).re;
                a.set(p, p, Complex64::new(app2, 0.0));
                a.set(q, q, Complex64::new(aqq2, 0.0));
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * s.conj());
                    v.set(k, q, vkp * s + vkq * c);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.partial_cmp(&a.get(j, j).re).unwrap());
    let eig: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
    let mut vs = CMat::zeros(n);
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vs.set(r, newc, v.get(r, oldc));
        }
    }
    (eig, vs)
}

/// Smallest eigenvalue of a real symmetric matrix (given row-major).
pub(crate) fn min_symmetric_eigenvalue(n: usize, rows: &[f64]) -> f64 {
    let mut m = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, Complex64::new(rows[i * n + j], 0.0));
        }
    }
    let (eig, _) = hermitian_eigen(&m);
    eig[0]
}

/// Singular values of a square complex matrix by one-sided Jacobi
/// orthogonalization of the columns, sorted descending.
pub(crate) fn singular_values(m: &CMat) -> Vec<f64> {
    let n = m.n;
    let mut a = m.clone();
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let tol = 1e-15;

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                let mut apq = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let cp = a.get(k, p);
                    let cq = a.get(k, q);
                    app += cp.norm_sqr();
                    aqq += cq.norm_sqr();
                    apq += cp.conj() * cq;
                }
                if apq.norm() <= tol * (app.sqrt() * aqq.sqrt()).max(tol * scale * scale) {
                    continue;
                }
                rotated = true;
                let napq = apq.norm();
                let theta = (aqq - app) / (2.0 * napq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = apq / napq * (t * c);
                for k in 0..n {
                    let cp = a.get(k, p);
                    let cq = a.get(k, q);
                    a.set(k, p, cp * c - cq * s.conj());
                    a.set(k, q, cp * s + cq * c);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|k| a.get(k, j).norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(
                    i,
                    j,
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                );
            }
        }
        m
    }

    fn hermitize(m: &CMat) -> CMat {
        let n = m.n;
        let mut h = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                h.set(i, j, (m.get(i, j) + m.get(j, i).conj()) * 0.5);
            }
        }
        h
    }

    #[test]
    fn eigen_reconstructs_hermitian_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2usize, 4, 6] {
            let h = hermitize(&random_cmat(n, &mut rng));
            let (eig, v) = hermitian_eigen(&h);
            // Check A v_i = lambda_i v_i.
            for i in 0..n {
                let mut resid = 0.0f64;
                for r in 0..n {
                    let mut av = Complex64::new(0.0, 0.0);
                    for k in 0..n {
                        av += h.get(r, k) * v.get(k, i);
                    }
                    resid = resid.max((av - v.get(r, i) * eig[i]).norm());
                }
                assert!(resid < 1e-12, "residual {resid} at n={n}");
            }
            // Eigenvalues ascending.
            for i in 1..n {
                assert!(eig[i] >= eig[i - 1]);
            }
        }
    }

    #[test]
    fn eigen_diagonal_matrix() {
        let mut m = CMat::zeros(3);
        m.set(0, 0, Complex64::new(3.0, 0.0));
        m.set(1, 1, Complex64::new(-1.0, 0.0));
        m.set(2, 2, Complex64::new(2.0, 0.0));
        let (eig, _) = hermitian_eigen(&m);
        assert_eq!(eig, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_cmat(4, &mut rng);
            let sv = singular_values(&a);
            // Gram route: eigenvalues of A^H A.
            let mut g = CMat::zeros(4);
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for k in 0..4 {
                        s += a.get(k, i).conj() * a.get(k, j);
                    }
                    g.set(i, j, s);
                }
            }
            let (eig, _) = hermitian_eigen(&g);
            for (i, &sg) in eig.iter().rev().enumerate() {
                assert!(
                    (sv[i] - sg.max(0.0).sqrt()).abs() < 1e-7 * (1.0 + sv[0]),
                    "sv {} vs gram {}",
                    sv[i],
                    sg.max(0.0).sqrt()
                );
            }
            // Frobenius identity.
            let fro2: f64 = a.a.iter().map(|z| z.norm_sqr()).sum();
            let sum2: f64 = sv.iter().map(|s| s * s).sum();
            assert!((fro2 - sum2).abs() < 1e-12 * fro2.max(1.0));
        }
    }

    #[test]
    fn singular_values_rank_one_are_exact() {
        // Outer product u v^H has singular values (|u||v|, 0, 0, 0); the
        // one-sided sweep must resolve the zeros to machine precision.
        let u = [1.0, 0.5, -0.25, 2.0];
        let v = [0.5, -1.5, 1.0, 0.75];
        let mut m = CMat::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                m.set(i, j, Complex64::new(u[i] * v[j], 0.0));
            }
        }
        let sv = singular_values(&m);
        let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((sv[0] - nu * nv).abs() < 1e-13 * nu * nv);
        assert!(sv[1] < 1e-14 * nu * nv);
        assert!(sv[3] < 1e-14 * nu * nv);
    }

    #[test]
    fn min_eigenvalue_of_indefinite_matrix() {
        // [[1, 2],[2, 1]] has eigenvalues {-1, 3}.
        let rows = [1.0, 2.0, 2.0, 1.0];
        let e = min_symmetric_eigenvalue(2, &rows);
        assert!((e + 1.0).abs() < 1e-12);
    }
}
