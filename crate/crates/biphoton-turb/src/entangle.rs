//! Entanglement quantification: Wootters concurrence of two-qubit states and
//! the closed-form single-phase-screen (SPS) concurrence curves.
//!
//! The concurrence is defined through the eigenvalues of
//! `R = rho (sigma_y x sigma_y) rho* (sigma_y x sigma_y)`: with `sqrt(lambda_i)`
//! sorted descending, `C = max(sqrt(l1) - sqrt(l2) - sqrt(l3) - sqrt(l4), 0)`.
//! Here the roots are computed as the singular values of `L^H Y L*` with
//! `L = sqrt(rho)` and `Y = sigma_y x sigma_y`, which is algebraically
//! identical (eig(R) = eig(W W^H) for W = L^H Y L*) but keeps absolute
//! accuracy O(eps) even when several roots vanish; a general eigensolver
//! followed by square roots loses half the digits exactly where the clamp
//! matters. The spectrum identity is still asserted through trace moments
//! of `R`.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, singular_values, CMat};
use crate::project::QubitState;
use num_complex::Complex64;

/// Coefficient of `chi = 0.456 W^{5/3}` for uncorrelated media.
pub const CHI_COEFF_UNCORRELATED: f64 = 0.456;

/// Coefficient of `chi = 0.912 W^{5/3}` for correlated media (twice the
/// uncorrelated value).
pub const CHI_COEFF_CORRELATED: f64 = 0.912;

/// Result of a concurrence computation.
#[derive(Clone, Copy, Debug)]
pub struct ConcurrenceResult {
    /// `max(roots[0] - roots[1] - roots[2] - roots[3], 0)`.
    pub value: f64,
    /// The four Wootters roots `sqrt(lambda_i)`, sorted descending.
    pub eigenvalue_roots: [f64; 4],
    /// Whether the `max(..., 0)` clamp engaged.
    pub clamped: bool,
}

/// `sigma_y (x) sigma_y` in the computational basis (real symmetric).
fn spin_flip_matrix() -> CMat {
    let mut y = CMat::zeros(4);
    let one = Complex64::new(1.0, 0.0);
    y.set(0, 3, -one);
    y.set(3, 0, -one);
    y.set(1, 2, one);
    y.set(2, 1, one);
    y
}

fn matmul(a: &CMat, b: &CMat) -> CMat {
    let n = a.n;
    let mut c = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                s += a.get(i, k) * b.get(k, j);
            }
            c.set(i, j, s);
        }
    }
    c
}

fn adjoint(a: &CMat) -> CMat {
    let mut c = CMat::zeros(a.n);
    for i in 0..a.n {
        for j in 0..a.n {
            c.set(i, j, a.get(j, i).conj());
        }
    }
    c
}

fn conjugate(a: &CMat) -> CMat {
    let mut c = CMat::zeros(a.n);
    for i in 0..a.n {
        for j in 0..a.n {
            c.set(i, j, a.get(i, j).conj());
        }
    }
    c
}

fn to_cmat(rho: &[[Complex64; 4]; 4]) -> CMat {
    let mut m = CMat::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            m.set(i, j, rho[i][j]);
        }
    }
    m
}

/// Wootters concurrence of a two-qubit state.
///
/// Fails with an invalid-state error if the density matrix has an eigenvalue
/// below `-1e-8`, or if the spectrum of `R` reconstructed from the computed
/// roots disagrees with its trace moments beyond `1e-8` (which would signal
/// complex or negative `R`-eigenvalues).
pub fn concurrence(state: &QubitState) -> Result<ConcurrenceResult> {
    let rho = to_cmat(state.matrix());
    let y = spin_flip_matrix();

    // L = sqrt(rho) from the Hermitian eigendecomposition, clamping the
    // tolerated negative dust.
    let (eig, vecs) = hermitian_eigen(&rho);
    let mut sqrt_eig = [0.0f64; 4];
    for (i, &l) in eig.iter().enumerate() {
        if l < -1e-8 {
            return Err(Error::InvalidState(format!(
                "density-matrix eigenvalue {l:.3e} below -1e-8"
            )));
        }
        sqrt_eig[i] = l.max(0.0).sqrt();
    }
    let mut l_mat = CMat::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..4 {
                s += vecs.get(i, k) * sqrt_eig[k] * vecs.get(j, k).conj();
            }
            l_mat.set(i, j, s);
        }
    }

    // W = L^H Y L*; its singular values are the Wootters roots.
    let w = matmul(&matmul(&adjoint(&l_mat), &y), &conjugate(&l_mat));
    let sv = singular_values(&w);
    let roots = [sv[0], sv[1], sv[2], sv[3]];

    // Validate against the trace moments of R = rho Y rho* Y.
    let r = matmul(&matmul(&matmul(&rho, &y), &conjugate(&rho)), &y);
    let tr1: Complex64 = (0..4).map(|i| r.get(i, i)).sum();
    let r2 = matmul(&r, &r);
    let tr2: Complex64 = (0..4).map(|i| r2.get(i, i)).sum();
    let m1: f64 = roots.iter().map(|s| s * s).sum();
    let m2: f64 = roots.iter().map(|s| s.powi(4)).sum();
    if tr1.im.abs() > 1e-8
        || tr2.im.abs() > 1e-8
        || (tr1.re - m1).abs() > 1e-8
        || (tr2.re - m2).abs() > 1e-8
    {
        return Err(Error::InvalidState(format!(
            "spectrum of rho(YxY)rho*(YxY) is not real non-negative: \
             moment residues {:.3e}, {:.3e}",
            (tr1.re - m1).abs().max(tr1.im.abs()),
            (tr2.re - m2).abs().max(tr2.im.abs()),
        )));
    }

    let spread = roots[0] - roots[1] - roots[2] - roots[3];
    Ok(ConcurrenceResult {
        value: spread.max(0.0),
        eigenvalue_roots: roots,
        clamped: spread < 0.0,
    })
}

/// Closed-form single-phase-screen concurrence for qubits built from LG
/// modes with azimuthal magnitude `q` in {1, 2, 3}.
pub fn sps_concurrence(q: u32, chi: f64) -> Result<f64> {
    if !(chi >= 0.0) || !chi.is_finite() {
        return Err(Error::Domain(format!(
            "chi must be non-negative, got {chi}"
        )));
    }
    let x = chi;
    match q {
        1 => Ok((x + 1.0) / (x * x + x + 1.0)),
        2 => Ok(2.0 * (x + 1.0) * (3.0 * x * x + 2.0 * x + 2.0)
            / (3.0 * x.powi(4) + 6.0 * x.powi(3) + 10.0 * x * x + 8.0 * x + 4.0)),
        3 => Ok(
            (x + 1.0) * (15.0 * x.powi(4) + 24.0 * x.powi(3) + 32.0 * x * x + 16.0 * x + 8.0)
                / (5.0 * x.powi(6)
                    + 15.0 * x.powi(5)
                    + 39.0 * x.powi(4)
                    + 56.0 * x.powi(3)
                    + 48.0 * x * x
                    + 24.0 * x
                    + 8.0),
        ),
        other => Err(Error::Domain(format!(
            "sps_concurrence supports q in {{1,2,3}}, got {other}"
        ))),
    }
}

/// Single-phase-screen turbulence parameter `chi` as a function of
/// `W = w0/r0`: `0.456 W^{5/3}` for uncorrelated media, `0.912 W^{5/3}` for
/// correlated media.
pub fn chi(w_ratio: f64, correlated: bool) -> f64 {
    let c = if correlated {
        CHI_COEFF_CORRELATED
    } else {
        CHI_COEFF_UNCORRELATED
    };
    c * w_ratio.powf(5.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::QubitState;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn pure_state(amps: [Complex64; 4]) -> QubitState {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let a: Vec<Complex64> = amps.iter().map(|&x| x / norm).collect();
        let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = a[i] * a[j].conj();
            }
        }
        QubitState::new(rho).unwrap()
    }

    #[test]
    fn bell_state_concurrence_is_one() {
        let c = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let state = pure_state([zero, c, c, zero]);
        let r = concurrence(&state).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert!(!r.clamped);
        assert!(r.eigenvalue_roots[1] < 1e-12);
    }

    #[test]
    fn maximally_mixed_state_is_separable_with_clamp() {
        let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            rho[i][i] = Complex64::new(0.25, 0.0);
        }
        let r = concurrence(&QubitState::new(rho).unwrap()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.clamped);
        for root in r.eigenvalue_roots {
            assert_abs_diff_eq!(root, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn pure_superposition_concurrence_is_2ab() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let alpha = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let beta = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if alpha.norm() < 1e-3 || beta.norm() < 1e-3 {
                continue;
            }
            let zero = Complex64::new(0.0, 0.0);
            let state = pure_state([zero, alpha, beta, zero]);
            let n2 = alpha.norm_sqr() + beta.norm_sqr();
            let expected = 2.0 * alpha.norm() * beta.norm() / n2;
            let r = concurrence(&state).unwrap();
            assert_abs_diff_eq!(r.value, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn separable_product_state_has_zero_concurrence() {
        let c = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let r = concurrence(&pure_state([c, zero, zero, zero])).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
    }

    fn random_unitary_2x2(rng: &mut ChaCha8Rng) -> [[Complex64; 2]; 2] {
        let phase = |r: &mut ChaCha8Rng| {
            let p: f64 = r.gen_range(0.0..std::f64::consts::TAU);
            Complex64::new(p.cos(), p.sin())
        };
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
        let (c, s) = (theta.cos(), theta.sin());
        let (a, b, g) = (phase(rng), phase(rng), phase(rng));
        [
            [a * b * c, a * g * s],
            [-a * g.conj() * s, a * b.conj() * c],
        ]
    }

    fn kron2(u: &[[Complex64; 2]; 2], v: &[[Complex64; 2]; 2]) -> [[Complex64; 4]; 4] {
        let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[2 * i + k][2 * j + l] = u[i][j] * v[k][l];
                    }
                }
            }
        }
        out
    }

    fn apply_local_unitary(state: &QubitState, u: &[[Complex64; 4]; 4]) -> QubitState {
        let mut tmp = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    s += u[i][k] * state.element(k, j);
                }
                tmp[i][j] = s;
            }
        }
        let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    s += tmp[i][k] * u[j][k].conj();
                }
                out[i][j] = s;
            }
        }
        QubitState::new(out).unwrap()
    }

    #[test]
    fn concurrence_is_invariant_under_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            // Random mixed two-qubit state: convex mix of two pure states.
            let amps1: [Complex64; 4] = std::array::from_fn(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let amps2: [Complex64; 4] = std::array::from_fn(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let p: f64 = rng.gen_range(0.0..1.0);
            let s1 = pure_state(amps1);
            let s2 = pure_state(amps2);
            let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    rho[i][j] = s1.element(i, j) * p + s2.element(i, j) * (1.0 - p);
                }
            }
            let state = QubitState::new(rho).unwrap();
            let base = concurrence(&state).unwrap().value;
            let u = kron2(&random_unitary_2x2(&mut rng), &random_unitary_2x2(&mut rng));
            let rotated = apply_local_unitary(&state, &u);
            let rot = concurrence(&rotated).unwrap().value;
            assert_abs_diff_eq!(base, rot, epsilon = 1e-9);
        }
    }

    #[test]
    fn sps_reference_points() {
        assert_relative_eq!(sps_concurrence(1, 0.0).unwrap(), 1.0);
        assert_relative_eq!(sps_concurrence(2, 0.0).unwrap(), 1.0);
        assert_relative_eq!(sps_concurrence(3, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            sps_concurrence(1, 1.0).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-15
        );
        // Independent evaluation of C1 at chi = 0.456.
        assert_relative_eq!(
            sps_concurrence(1, 0.456).unwrap(),
            0.8750336551405823,
            max_relative = 1e-14
        );
        assert!(sps_concurrence(4, 0.5).is_err());
        assert!(sps_concurrence(0, 0.5).is_err());
        assert!(sps_concurrence(1, -0.1).is_err());
    }

    #[test]
    fn sps_curves_decrease_monotonically() {
        for q in 1..=3u32 {
            let mut prev = f64::INFINITY;
            for i in 0..=2000 {
                let x = 20.0 * i as f64 / 2000.0;
                let c = sps_concurrence(q, x).unwrap();
                assert!(c < prev + 1e-15, "q={q} not monotone at chi={x}");
                prev = c;
            }
        }
    }

    #[test]
    fn sps_curves_never_reach_zero() {
        for q in 1..=3u32 {
            let mut x = 0.01;
            while x < 1e3 {
                assert!(
                    sps_concurrence(q, x).unwrap() > 0.0,
                    "q={q} died at chi={x}"
                );
                x *= 1.3;
            }
        }
    }

    #[test]
    fn evolved_state_sweep_has_valid_spectra() {
        // The trace-moment validation inside concurrence() asserts that the
        // spectrum of rho(YxY)rho*(YxY) stays real non-negative (residues
        // below 1e-8) across evolved states; any violation would surface as
        // an invalid-state error here.
        use crate::evolve::{evolve_spdc, Scenario};
        use crate::project::project_qubit;
        for &k in &[0.3, 1.0, 5.0] {
            for &t in &[0.2, 1.0, 4.0] {
                for scenario in [Scenario::Correlated, Scenario::Uncorrelated] {
                    let kernel = evolve_spdc(scenario, k, t, 1.0).unwrap();
                    let state = project_qubit(&kernel, 1, t).unwrap();
                    let r = concurrence(&state).unwrap();
                    assert!(r.value >= 0.0 && r.value <= 1.0 + 1e-12);
                    assert!(r.eigenvalue_roots.iter().all(|&s| s >= 0.0));
                }
            }
        }
    }

    #[test]
    fn chi_reference_values() {
        assert_eq!(chi(1.0, false), 0.456);
        assert_eq!(chi(1.0, true), 0.912);
        // chi(W, correlated) = chi(2^{3/5} W, uncorrelated).
        let w = 1.37;
        assert_relative_eq!(
            chi(w, true),
            chi(2f64.powf(3.0 / 5.0) * w, false),
            max_relative = 1e-12
        );
        assert_eq!(chi(0.0, false), 0.0);
    }
}
