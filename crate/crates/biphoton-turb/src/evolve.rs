//! Evolution of biphoton kernels through Kolmogorov turbulence under the
//! quadratic structure-function approximation.
//!
//! Two channels are supported: both photons in the same medium (correlated)
//! and each photon in its own statistically independent medium
//! (uncorrelated). For the thin-crystal SPDC input the evolved kernels have
//! closed forms with polynomial coefficients `N0..N4` (uncorrelated) and
//! `H0..H3` (correlated); [`propagate_general`] evolves an arbitrary Gaussian
//! kernel by assembling the propagation integrand on an extended variable set
//! and marginalizing the convolution variables. The closed forms are
//! recovered from the general path in the `beta -> 0` limit, which the tests
//! use as double-entry bookkeeping against transcription errors.

use crate::error::{Error, Result};
use crate::kernel::{
    spdc_kernel, DotProductKernel, ExtendedKernel, Var, EXTERNAL_SLOTS, SLOT_SIGN,
};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Below this value of `K*t` the convolution weight degenerates to a delta
/// function and the analytic free-propagation branch is used instead.
const FREE_BRANCH_THRESHOLD: f64 = 1e-12;

/// Which turbulence channel the photon pair traverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Both photons through the same medium (correlation tag = 1).
    Correlated,
    /// Each photon through its own uncorrelated medium (correlation tag = 0).
    Uncorrelated,
}

/// Named coefficients of the closed-form thin-crystal solutions.
#[derive(Clone, Debug)]
pub enum EvolvedCoefficients {
    Uncorrelated {
        n0: f64,
        n1: Complex64,
        n2: Complex64,
        n3: f64,
        n4: f64,
    },
    Correlated {
        h0: f64,
        h1: Complex64,
        h2: Complex64,
        h3: f64,
    },
}

/// Evaluate the closed-form coefficient block for a channel at `(K, t)`.
pub fn evolved_coefficients(
    scenario: Scenario,
    strength: f64,
    t: f64,
) -> Result<EvolvedCoefficients> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::Domain(format!(
            "K must be non-negative, got {strength}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    let k = strength;
    Ok(match scenario {
        Scenario::Uncorrelated => EvolvedCoefficients::Uncorrelated {
            n0: 8.0 * k * t + 1.0,
            n1: Complex64::new(
                2.0 * (10.0 * k * k * t.powi(4) + 2.0 * k * t.powi(3) + 12.0 * k * t + 3.0),
                -6.0 * t * (6.0 * k * t + 1.0),
            ),
            n2: Complex64::new(
                2.0 * k * k * t.powi(4) - 4.0 * k * t - 1.0,
                -2.0 * k * t * t,
            ),
            n3: 2.0 * (5.0 * k * t.powi(3) + t * t + 6.0),
            n4: k * t.powi(3) - 2.0,
        },
        Scenario::Correlated => {
            let shared = 2.0 * (8.0 * k * k * t.powi(4) + 2.0 * k * t.powi(3) + 24.0 * k * t + 3.0);
            EvolvedCoefficients::Correlated {
                h0: 16.0 * k * t + 1.0,
                h1: Complex64::new(shared, -6.0 * t * (12.0 * k * t + 1.0)),
                h2: Complex64::new(shared, 24.0 * k * t * t),
                h3: 4.0 * k * t.powi(3) + t * t + 12.0,
            }
        }
    })
}

/// Thin-crystal SPDC kernel evolved through uncorrelated media.
///
/// Prefactor `8 pi^2 w_p^4 / N0`; the exponent couples the slots through
/// `N1/6` on the squares, `-2 N2` on the ket pair, `-2Kt N3 / 3` on the
/// intra-photon ket-bra pairs and `4Kt N4` on the cross pairs.
pub fn evolve_spdc_uncorrelated(
    strength: f64,
    t: f64,
    pump_waist: f64,
) -> Result<DotProductKernel> {
    let coeffs = evolved_coefficients(Scenario::Uncorrelated, strength, t)?;
    let EvolvedCoefficients::Uncorrelated { n0, n1, n2, n3, n4 } = coeffs else {
        unreachable!()
    };
    if !(pump_waist > 0.0) {
        return Err(Error::Domain(format!(
            "pump_waist must be positive, got {pump_waist}"
        )));
    }
    let k = strength;
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[zero; 4]; 4];
    let diag_ket = n1 / (6.0 * n0);
    let diag_bra = n1.conj() / (6.0 * n0);
    m[0][0] = diag_ket;
    m[2][2] = diag_ket;
    m[1][1] = diag_bra;
    m[3][3] = diag_bra;
    // -2 N2 (a1.a3) and conjugate on the bra side.
    m[0][2] = -n2 / n0;
    m[2][0] = m[0][2];
    m[1][3] = -n2.conj() / n0;
    m[3][1] = m[1][3];
    // -(2 K t N3 / 3)(a1.a2 + a3.a4).
    let intra = Complex64::new(-k * t * n3 / (3.0 * n0), 0.0);
    m[0][1] = intra;
    m[1][0] = intra;
    m[2][3] = intra;
    m[3][2] = intra;
    // +4 K t N4 (a1.a4 + a3.a2).
    let cross = Complex64::new(2.0 * k * t * n4 / n0, 0.0);
    m[0][3] = cross;
    m[3][0] = cross;
    m[1][2] = cross;
    m[2][1] = cross;
    let prefactor = Complex64::new(8.0 * PI * PI * pump_waist.powi(4) / n0, 0.0);
    DotProductKernel::new(prefactor, pump_waist, m)
}

/// Thin-crystal SPDC kernel evolved through the same correlated medium.
pub fn evolve_spdc_correlated(strength: f64, t: f64, pump_waist: f64) -> Result<DotProductKernel> {
    let coeffs = evolved_coefficients(Scenario::Correlated, strength, t)?;
    let EvolvedCoefficients::Correlated { h0, h1, h2, h3 } = coeffs else {
        unreachable!()
    };
    if !(pump_waist > 0.0) {
        return Err(Error::Domain(format!(
            "pump_waist must be positive, got {pump_waist}"
        )));
    }
    let k = strength;
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[zero; 4]; 4];
    let diag_ket = h1 / (6.0 * h0);
    let diag_bra = h1.conj() / (6.0 * h0);
    m[0][0] = diag_ket;
    m[2][2] = diag_ket;
    m[1][1] = diag_bra;
    m[3][3] = diag_bra;
    // +(H2/3)(a1.a3) and conjugate.
    m[0][2] = h2 / (6.0 * h0);
    m[2][0] = m[0][2];
    m[1][3] = h2.conj() / (6.0 * h0);
    m[3][1] = m[1][3];
    // -(4 K t H3 / 3)(a1 + a3).(a2 + a4): every ket-bra pair gets the same
    // coefficient.
    let kb = Complex64::new(-2.0 * k * t * h3 / (3.0 * h0), 0.0);
    for (i, j) in [(0, 1), (0, 3), (2, 1), (2, 3)] {
        m[i][j] = kb;
        m[j][i] = kb;
    }
    let prefactor = Complex64::new(8.0 * PI * PI * pump_waist.powi(4) / h0, 0.0);
    DotProductKernel::new(prefactor, pump_waist, m)
}

/// Thin-crystal SPDC kernel evolved through the chosen channel.
pub fn evolve_spdc(
    scenario: Scenario,
    strength: f64,
    t: f64,
    pump_waist: f64,
) -> Result<DotProductKernel> {
    match scenario {
        Scenario::Correlated => evolve_spdc_correlated(strength, t, pump_waist),
        Scenario::Uncorrelated => evolve_spdc_uncorrelated(strength, t, pump_waist),
    }
}

/// Free-propagation phases only: `M_ii -> M_ii - i t s_i` with ket slots
/// advancing and bra slots retarding.
fn free_propagation(input: &DotProductKernel, t: f64) -> Result<DotProductKernel> {
    let mut m = *input.coeff();
    for i in 0..4 {
        m[i][i] += Complex64::new(0.0, -t * SLOT_SIGN[i]);
    }
    DotProductKernel::new(input.prefactor(), input.scale(), m)
}

/// Evolve an arbitrary Gaussian kernel through distance `t` of turbulence of
/// strength `K`, for either channel.
///
/// Builds the full propagation integrand, i.e. the input shifted by the
/// convolution variable(s), the free-space phases, the cross phases, the
/// cubic-in-`t` damping and the `1/(2Kt)` Gaussian weight, on an extended
/// variable set and integrates the convolution variables out. The beam
/// radius of the propagation kernels is identified with the input kernel's
/// scale. At `K*t < 1e-12` the convolution weight degenerates and the
/// analytic free-propagation branch is returned instead.
///
/// Note that this map is not a semigroup in `t`: the damping carries `t^3`
/// terms, so composing two propagations of `t/2` does not equal one
/// propagation of `t`. Do not refactor sweeps to reuse intermediate kernels.
pub fn propagate_general(
    input: &DotProductKernel,
    strength: f64,
    t: f64,
    scenario: Scenario,
) -> Result<DotProductKernel> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::Domain(format!(
            "K must be non-negative, got {strength}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    let kt = strength * t;
    if kt < FREE_BRANCH_THRESHOLD {
        return free_propagation(input, t);
    }
    let k = strength;
    let w = input.scale();
    let m0 = input.coeff();

    let mut ek = ExtendedKernel::from_kernel(input);
    // Free-space phase on the diagonal.
    for (i, &slot) in EXTERNAL_SLOTS.iter().enumerate() {
        ek.add_coeff(slot, slot, Complex64::new(0.0, -t * SLOT_SIGN[i]));
    }

    match scenario {
        Scenario::Correlated => {
            // Damping (K t^3 / 6) |a1 - a2 + a3 - a4|^2.
            let d = k * t.powi(3) / 6.0;
            for i in 0..4 {
                for j in i..4 {
                    let add = Complex64::new(d * SLOT_SIGN[i] * SLOT_SIGN[j], 0.0);
                    ek.add_coeff(EXTERNAL_SLOTS[i], EXTERNAL_SLOTS[j], add);
                }
            }
            // Convolution variable u with weight 1/(2Kt) plus the input's
            // total coupling, shift couplings and the cross phase.
            let sigma: Complex64 = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| m0[i][j])
                .sum();
            ek.add_variable(Var::U, sigma + 1.0 / (2.0 * kt));
            for i in 0..4 {
                let row_sum: Complex64 = (0..4).map(|j| m0[i][j]).sum();
                let coupling = -row_sum + Complex64::new(0.0, t * SLOT_SIGN[i] / 2.0);
                ek.add_coeff(EXTERNAL_SLOTS[i], Var::U, coupling);
            }
            ek.scale_prefactor(Complex64::new(PI * w * w / (2.0 * kt), 0.0));
            ek.marginalize(&[Var::U])?.into_dot_product()
        }
        Scenario::Uncorrelated => {
            // Damping (K t^3 / 6)(|a1 - a2|^2 + |a3 - a4|^2).
            let d = k * t.powi(3) / 6.0;
            let p = [1.0, -1.0, 0.0, 0.0];
            let q = [0.0, 0.0, 1.0, -1.0];
            for i in 0..4 {
                for j in i..4 {
                    let add = Complex64::new(d * (p[i] * p[j] + q[i] * q[j]), 0.0);
                    ek.add_coeff(EXTERNAL_SLOTS[i], EXTERNAL_SLOTS[j], add);
                }
            }
            // Photon A's slots shift by u1, photon B's by u2.
            let sum_block = |rows: [usize; 2], cols: [usize; 2]| -> Complex64 {
                rows.iter()
                    .flat_map(|&i| cols.iter().map(move |&j| m0[i][j]))
                    .sum()
            };
            ek.add_variable(Var::U1, sum_block([0, 1], [0, 1]) + 1.0 / (2.0 * kt));
            ek.add_variable(Var::U2, sum_block([2, 3], [2, 3]) + 1.0 / (2.0 * kt));
            ek.add_coeff(Var::U1, Var::U2, sum_block([0, 1], [2, 3]));
            for i in 0..4 {
                let to_u1 = -(m0[i][0] + m0[i][1]) + Complex64::new(0.0, t * p[i] / 2.0);
                let to_u2 = -(m0[i][2] + m0[i][3]) + Complex64::new(0.0, t * q[i] / 2.0);
                ek.add_coeff(EXTERNAL_SLOTS[i], Var::U1, to_u1);
                ek.add_coeff(EXTERNAL_SLOTS[i], Var::U2, to_u2);
            }
            let w4 = w * w * w * w;
            ek.scale_prefactor(Complex64::new(PI * PI * w4 / (4.0 * kt * kt), 0.0));
            ek.marginalize(&[Var::U1, Var::U2])?.into_dot_product()
        }
    }
}

/// Convenience: evolve a finite-`beta` SPDC input through the general path.
pub fn propagate_spdc(
    pump_waist: f64,
    beta: f64,
    strength: f64,
    t: f64,
    scenario: Scenario,
) -> Result<DotProductKernel> {
    let input = spdc_kernel(pump_waist, beta)?;
    propagate_general(&input, strength, t, scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn max_coeff_diff(a: &DotProductKernel, b: &DotProductKernel) -> f64 {
        let mut d = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                d = d.max((a.coeff_at(i, j) - b.coeff_at(i, j)).norm());
            }
        }
        d
    }

    #[test]
    fn coefficient_block_reference_points() {
        let EvolvedCoefficients::Uncorrelated { n0, n1, n2, .. } =
            evolved_coefficients(Scenario::Uncorrelated, 1.0, 0.5).unwrap()
        else {
            panic!()
        };
        assert_eq!(n0, 5.0); // 8*1*0.5 + 1
        let EvolvedCoefficients::Correlated { h0, h1, h2, h3 } =
            evolved_coefficients(Scenario::Correlated, 1.0, 0.5).unwrap()
        else {
            panic!()
        };
        assert_eq!(h0, 9.0); // 16*1*0.5 + 1
                             // Re(H1) = Re(H2) identically.
        assert_eq!(h1.re, h2.re);
        assert!(h3 > 0.0);
        // At t=0 the blocks reduce to the thin-crystal values.
        let EvolvedCoefficients::Uncorrelated {
            n1: n1_0, n2: n2_0, ..
        } = evolved_coefficients(Scenario::Uncorrelated, 3.0, 0.0).unwrap()
        else {
            panic!()
        };
        assert_eq!(n1_0, Complex64::new(6.0, 0.0));
        assert_eq!(n2_0, Complex64::new(-1.0, 0.0));
        let EvolvedCoefficients::Correlated {
            h1: h1_0,
            h2: h2_0,
            h3: h3_0,
            ..
        } = evolved_coefficients(Scenario::Correlated, 3.0, 0.0).unwrap()
        else {
            panic!()
        };
        assert_eq!(h1_0, Complex64::new(6.0, 0.0));
        assert_eq!(h2_0, Complex64::new(6.0, 0.0));
        assert_eq!(h3_0, 12.0);
        assert!(n1.im < 0.0);
        assert!(n2.im < 0.0);
    }

    #[test]
    fn evolved_kernels_reduce_to_spdc_at_t_zero() {
        let thin = spdc_kernel(1.0, 0.0).unwrap();
        for kernel in [
            evolve_spdc_uncorrelated(2.5, 0.0, 1.0).unwrap(),
            evolve_spdc_correlated(2.5, 0.0, 1.0).unwrap(),
        ] {
            assert!(max_coeff_diff(&kernel, &thin) < 1e-15);
            assert_relative_eq!(
                kernel.prefactor().re,
                thin.prefactor().re,
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn evolved_kernels_are_hermitian_on_grid() {
        for i in 0..5 {
            for j in 0..5 {
                let k = 2.5 * i as f64;
                let t = 2.5 * j as f64;
                let u = evolve_spdc_uncorrelated(k, t, 1.0).unwrap();
                let c = evolve_spdc_correlated(k, t, 1.0).unwrap();
                assert!(
                    u.hermiticity_defect() < 1e-12,
                    "uncorr defect at K={k} t={t}"
                );
                assert!(c.hermiticity_defect() < 1e-12, "corr defect at K={k} t={t}");
            }
        }
    }

    #[test]
    fn negative_arguments_rejected() {
        assert!(evolve_spdc_uncorrelated(-1.0, 0.5, 1.0).is_err());
        assert!(evolve_spdc_correlated(1.0, -0.5, 1.0).is_err());
        assert!(propagate_spdc(1.0, 0.1, -1.0, 0.5, Scenario::Correlated).is_err());
    }

    #[test]
    fn thin_crystal_limit_converges_linearly() {
        // The beta -> 0 limit of the general path must approach the printed
        // closed forms with error shrinking linearly in beta.
        for (k, t) in [(1.0, 0.5), (10.0, 1.0)] {
            for scenario in [Scenario::Uncorrelated, Scenario::Correlated] {
                let closed = evolve_spdc(scenario, k, t, 1.0).unwrap();
                let mut errs = Vec::new();
                for &beta in &[1e-3, 1e-4] {
                    let general = propagate_spdc(1.0, beta, k, t, scenario).unwrap();
                    let coeff_err = max_coeff_diff(&general, &closed);
                    let pref_err = (general.prefactor() / beta - closed.prefactor()).norm()
                        / closed.prefactor().norm();
                    errs.push(coeff_err.max(pref_err));
                }
                let ratio = errs[0] / errs[1];
                assert!(
                    (6.0..16.0).contains(&ratio),
                    "expected ~10x error reduction, got {ratio} at K={k} t={t} {scenario:?}"
                );
            }
        }
    }

    #[test]
    fn channel_preserves_trace() {
        for &(k, t) in &[
            (0.1, 0.1),
            (0.1, 10.0),
            (1.0, 1.0),
            (10.0, 0.1),
            (10.0, 10.0),
        ] {
            let input = spdc_kernel(1.0, 1e-2).unwrap();
            let tr_in = input.trace().unwrap();
            for scenario in [Scenario::Correlated, Scenario::Uncorrelated] {
                let out = propagate_general(&input, k, t, scenario).unwrap();
                let tr_out = out.trace().unwrap();
                assert!(
                    (tr_out - tr_in).norm() / tr_in.norm() < 1e-8,
                    "trace drift at K={k} t={t} {scenario:?}: {tr_out} vs {tr_in}"
                );
            }
        }
    }

    #[test]
    fn propagation_preserves_hermiticity() {
        let input = spdc_kernel(1.0, 0.05).unwrap();
        assert_eq!(input.hermiticity_defect(), 0.0);
        for scenario in [Scenario::Correlated, Scenario::Uncorrelated] {
            let out = propagate_general(&input, 3.0, 1.7, scenario).unwrap();
            assert!(out.hermiticity_defect() < 1e-10);
        }
    }

    #[test]
    fn free_branch_applies_phases_only() {
        let input = spdc_kernel(1.0, 0.2).unwrap();
        let out = propagate_general(&input, 0.0, 0.7, Scenario::Correlated).unwrap();
        assert_eq!(out.prefactor(), input.prefactor());
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j {
                    input.coeff_at(i, j) + Complex64::new(0.0, -0.7 * SLOT_SIGN[i])
                } else {
                    input.coeff_at(i, j)
                };
                assert_abs_diff_eq!((out.coeff_at(i, j) - expected).norm(), 0.0, epsilon = 1e-15);
            }
        }
        // K -> 0+ at fixed t approaches the same free branch.
        let near = propagate_general(&input, 1e-14, 0.7, Scenario::Uncorrelated).unwrap();
        assert!(max_coeff_diff(&near, &out) < 1e-12);
    }

    #[test]
    fn correlated_and_uncorrelated_channels_differ() {
        // Guards against accidentally aliasing the two code paths.
        let input = spdc_kernel(1.0, 0.1).unwrap();
        let corr = propagate_general(&input, 1.0, 1.0, Scenario::Correlated).unwrap();
        let uncorr = propagate_general(&input, 1.0, 1.0, Scenario::Uncorrelated).unwrap();
        assert!(max_coeff_diff(&corr, &uncorr) > 1e-3);
    }

    #[test]
    fn uncorrelated_phases_split_per_photon() {
        // In the uncorrelated closed form the intra-photon couplings carry
        // the imaginary structure while the cross couplings stay real: the
        // phases split per photon pair.
        let k = evolve_spdc_uncorrelated(2.0, 0.8, 1.0).unwrap();
        assert_abs_diff_eq!(k.coeff_at(0, 1).im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.coeff_at(0, 3).im, 0.0, epsilon = 1e-15);
        assert!(k.coeff_at(0, 0).im.abs() > 0.0);
        assert!(k.coeff_at(0, 2).im.abs() > 0.0);
    }
}
