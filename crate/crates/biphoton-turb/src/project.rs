//! Projection of evolved biphoton kernels onto the two-photon OAM qubit
//! subspace spanned by Laguerre-Gaussian modes with azimuthal index ±q and
//! zero radial index.
//!
//! Instead of integrating against each LG mode, the overlap is computed once
//! against the mode *generating functions*
//!
//! ```text
//! G±(a, t; mu) = pi w0 exp[ i pi w0 (a_x ± i a_y) mu - pi^2 w0^2 |a|^2 (1 - i t) ]
//! ```
//!
//! whose mu-derivatives at zero produce the angular spectra of the LG modes.
//! The eight-dimensional Gaussian overlap integral then closes into a pure
//! quadratic form in the four generating parameters ([`MuQuadraticForm`]);
//! matrix elements follow by exact truncated-series differentiation.

use crate::error::{Error, Result};
use crate::kernel::{DotProductKernel, ExtendedKernel, Var, EXTERNAL_SLOTS};
use crate::linalg::{hermitian_eigen, CMat};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Azimuthal sign of an LG mode in the qubit basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OamSign {
    Plus,
    Minus,
}

impl OamSign {
    /// +1.0 or -1.0.
    pub fn signum(self) -> f64 {
        match self {
            OamSign::Plus => 1.0,
            OamSign::Minus => -1.0,
        }
    }
}

/// Two-photon qubit basis order: [(+q,+q), (+q,-q), (-q,+q), (-q,-q)].
pub const QUBIT_BASIS: [(OamSign, OamSign); 4] = [
    (OamSign::Plus, OamSign::Plus),
    (OamSign::Plus, OamSign::Minus),
    (OamSign::Minus, OamSign::Plus),
    (OamSign::Minus, OamSign::Minus),
];

/// One overlap-integral configuration: the azimuthal sign carried by each of
/// the four tensor slots (1, 3 ket; 2, 4 bra), the azimuthal magnitude, the
/// detection-mode waist and the propagation parameter of the modes.
#[derive(Clone, Copy, Debug)]
pub struct LgOverlapSpec {
    /// Signs for slots (a1, a2, a3, a4); slots 1 and 3 enter conjugated.
    pub signs: [OamSign; 4],
    /// Azimuthal magnitude `q >= 1` (`p = 0` always).
    pub q: u32,
    /// Detection-mode waist.
    pub waist: f64,
    /// Normalized propagation distance of the detection modes.
    pub t: f64,
}

/// The overlap generating function: `H(mu) = constant * exp(sum B_ij mu_i mu_j)`
/// with `B` complex symmetric and no linear term.
#[derive(Clone, Debug)]
pub struct MuQuadraticForm {
    constant: Complex64,
    quad: [[Complex64; 4]; 4],
}

impl MuQuadraticForm {
    pub fn new(constant: Complex64, quad: [[Complex64; 4]; 4]) -> Self {
        Self { constant, quad }
    }

    pub fn constant(&self) -> Complex64 {
        self.constant
    }

    pub fn quad(&self) -> &[[Complex64; 4]; 4] {
        &self.quad
    }

    /// Norm of the antisymmetric part of `B` (zero by construction).
    pub fn asymmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                d += (self.quad[i][j] - self.quad[j][i]).norm_sqr();
            }
        }
        d.sqrt()
    }

    /// Value of the generating function at a concrete `mu` (constant included).
    pub fn value_at(&self, mu: [f64; 4]) -> Complex64 {
        let mut e = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                e += self.quad[i][j] * mu[i] * mu[j];
            }
        }
        self.constant * e.exp()
    }
}

/// Compute the overlap generating function of a kernel against four LG
/// generating functions with the given slot signs.
///
/// Ket slots (1, 3) contribute conjugated envelopes `(1 + i t)` and sources
/// `-i pi w0 (a_x ∓ i a_y) mu`; bra slots (2, 4) contribute `(1 - i t)` and
/// `+i pi w0 (a_x ± i a_y) mu`. The four external slots are then integrated
/// out, leaving the quadratic form in the generating parameters.
pub fn overlap_generating(
    kernel: &DotProductKernel,
    spec: &LgOverlapSpec,
) -> Result<MuQuadraticForm> {
    if spec.q == 0 {
        return Err(Error::Domain("q must be at least 1".into()));
    }
    if !(spec.waist > 0.0) {
        return Err(Error::Domain(format!(
            "mode waist must be positive, got {}",
            spec.waist
        )));
    }
    let w = kernel.scale();
    let ratio = spec.waist / w;
    let rho2 = ratio * ratio;
    let t = spec.t;

    let mut ek = ExtendedKernel::from_kernel(kernel);
    // Mode prefactors (pi w0)^4.
    ek.scale_prefactor(Complex64::new((PI * spec.waist).powi(4), 0.0));

    // Envelopes: conjugated on ket slots.
    let env_ket = Complex64::new(rho2, rho2 * t);
    let env_bra = Complex64::new(rho2, -rho2 * t);
    ek.add_coeff(Var::A1, Var::A1, env_ket);
    ek.add_coeff(Var::A3, Var::A3, env_ket);
    ek.add_coeff(Var::A2, Var::A2, env_bra);
    ek.add_coeff(Var::A4, Var::A4, env_bra);

    // Sources, in units of pi * kernel-scale. For a ket slot with sign s the
    // conjugated generating function couples mu to (a_x - s i a_y): the abar
    // chirality when s = +, alpha when s = -. Bra slots couple with +i to
    // (a_x + s i a_y).
    let ket_coeff = Complex64::new(0.0, -ratio);
    let bra_coeff = Complex64::new(0.0, ratio);
    for (slot, mu_index, is_ket) in [
        (Var::A1, 0usize, true),
        (Var::A2, 1, false),
        (Var::A3, 2, true),
        (Var::A4, 3, false),
    ] {
        let sign = spec.signs[mu_index];
        match (is_ket, sign) {
            (true, OamSign::Plus) => ek.add_source_abar(slot, mu_index, ket_coeff),
            (true, OamSign::Minus) => ek.add_source_alpha(slot, mu_index, ket_coeff),
            (false, OamSign::Plus) => ek.add_source_alpha(slot, mu_index, bra_coeff),
            (false, OamSign::Minus) => ek.add_source_abar(slot, mu_index, bra_coeff),
        }
    }

    let reduced = ek.marginalize(&EXTERNAL_SLOTS)?;
    debug_assert!(reduced.vars().is_empty());
    let mut quad = [[Complex64::new(0.0, 0.0); 4]; 4];
    let b = reduced.mu_quadratic();
    for i in 0..4 {
        for j in 0..4 {
            quad[i][j] = (b[i][j] + b[j][i]) * 0.5;
        }
    }
    Ok(MuQuadraticForm::new(reduced.prefactor(), quad))
}

// ---------------------------------------------------------------------------
// Truncated multivariate series in the four generating parameters
// ---------------------------------------------------------------------------

/// Dense polynomial in (mu1..mu4) with per-variable degree capped at `cap`.
struct MuSeries {
    cap: usize,
    c: Vec<Complex64>,
}

impl MuSeries {
    fn zeros(cap: usize) -> Self {
        let n = (cap + 1).pow(4);
        Self {
            cap,
            c: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    #[inline]
    fn idx(&self, d: [usize; 4]) -> usize {
        let s = self.cap + 1;
        ((d[0] * s + d[1]) * s + d[2]) * s + d[3]
    }

    fn one(cap: usize) -> Self {
        let mut p = Self::zeros(cap);
        p.c[0] = Complex64::new(1.0, 0.0);
        p
    }

    fn add_term(&mut self, d: [usize; 4], v: Complex64) {
        if d.iter().all(|&x| x <= self.cap) {
            let i = self.idx(d);
            self.c[i] += v;
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let cap = self.cap;
        let mut out = Self::zeros(cap);
        let s = cap + 1;
        for i0 in 0..s {
            for i1 in 0..s {
                for i2 in 0..s {
                    for i3 in 0..s {
                        let a = self.c[((i0 * s + i1) * s + i2) * s + i3];
                        if a.norm_sqr() == 0.0 {
                            continue;
                        }
                        for j0 in 0..(s - i0) {
                            for j1 in 0..(s - i1) {
                                for j2 in 0..(s - i2) {
                                    for j3 in 0..(s - i3) {
                                        let b = other.c[((j0 * s + j1) * s + j2) * s + j3];
                                        if b.norm_sqr() == 0.0 {
                                            continue;
                                        }
                                        let k = (((i0 + j0) * s + (i1 + j1)) * s + (i2 + j2)) * s
                                            + (i3 + j3);
                                        out.c[k] += a * b;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn scaled(&self, f: f64) -> Self {
        Self {
            cap: self.cap,
            c: self.c.iter().map(|&v| v * f).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += *b;
        }
    }

    fn coeff(&self, d: [usize; 4]) -> Complex64 {
        self.c[self.idx(d)]
    }
}

/// Modal normalization constant `N_LG = (2^{1+q} / (pi q!))^{1/2}` of the
/// `p = 0` LG mode with azimuthal magnitude `q`.
pub fn lg_normalization(q: u32) -> f64 {
    let mut fact = 1.0f64;
    for i in 1..=q {
        fact *= i as f64;
    }
    (2f64.powi(1 + q as i32) / (PI * fact)).sqrt()
}

/// Extract the qubit matrix element from a generating form:
/// `N_LG^4 [∂^q_{mu1} ∂^q_{mu2} ∂^q_{mu3} ∂^q_{mu4} exp(sum B mu mu)]_{mu=0}`
/// (the form's constant is *not* included).
///
/// `order` is the total-degree budget of the series; it must be at least
/// `4q`, and is exact there (the target monomial has degree exactly `4q`,
/// so any larger order changes nothing).
pub fn extract_element_with_order(
    form: &MuQuadraticForm,
    q: u32,
    order: usize,
) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Domain("q must be at least 1".into()));
    }
    let needed = 4 * q as usize;
    if order < needed {
        return Err(Error::Capacity { order, needed });
    }
    let cap = q as usize;
    // Quadratic exponent as a truncated polynomial; symmetric cross entries
    // are folded into a single monomial with doubled coefficient.
    let mut x = MuSeries::zeros(cap);
    for i in 0..4 {
        for j in i..4 {
            let v = if i == j {
                form.quad[i][j]
            } else {
                form.quad[i][j] * 2.0
            };
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let mut d = [0usize; 4];
            d[i] += 1;
            d[j] += 1;
            x.add_term(d, v);
        }
    }
    // exp(x) truncated: powers above order/2 cannot reach the target degree.
    let n_max = order / 2;
    let mut result = MuSeries::one(cap);
    let mut term = MuSeries::one(cap);
    for n in 1..=n_max {
        term = term.mul(&x).scaled(1.0 / n as f64);
        result.add_assign(&term);
    }
    let coeff = result.coeff([cap, cap, cap, cap]);
    // N_LG^4 (q!)^4 = (2^{1+q}/pi)^2 (q!)^2.
    let mut fact = 1.0f64;
    for i in 1..=q {
        fact *= i as f64;
    }
    let norm = (2f64.powi(1 + q as i32) / PI).powi(2) * fact * fact;
    Ok(coeff * norm)
}

/// [`extract_element_with_order`] at the exact order `4q`.
pub fn extract_element(form: &MuQuadraticForm, q: u32) -> Result<Complex64> {
    extract_element_with_order(form, q, 4 * q as usize)
}

// ---------------------------------------------------------------------------
// Qubit states
// ---------------------------------------------------------------------------

/// Hermiticity tolerance for projected states.
const HERMITICITY_TOL: f64 = 1e-10;
/// Positivity tolerance (eigenvalues may dip this far below zero).
const PSD_TOL: f64 = -1e-9;

/// A normalized two-qubit density matrix on the ±q OAM subspace, in the
/// basis order of [`QUBIT_BASIS`].
#[derive(Clone, Debug)]
pub struct QubitState {
    rho: [[Complex64; 4]; 4],
}

impl QubitState {
    /// Validate Hermiticity, unit trace and positivity (within tolerances).
    pub fn new(rho: [[Complex64; 4]; 4]) -> Result<Self> {
        let state = Self { rho };
        let h = state.hermiticity_defect();
        if h > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {h:.3e}")));
        }
        let tr = state.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = state.min_eigenvalue();
        if min_eig < PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(state)
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.rho[row][col]
    }

    pub fn matrix(&self) -> &[[Complex64; 4]; 4] {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        (0..4).map(|i| self.rho[i][i]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                d += (self.rho[i][j] - self.rho[j][i].conj()).norm_sqr();
            }
        }
        d.sqrt() / 2.0
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = CMat::from_rows(
            &(0..4)
                .map(|i| (0..4).map(|j| self.rho[i][j]).collect())
                .collect::<Vec<_>>(),
        );
        let (eig, _) = hermitian_eigen(&m);
        eig[0]
    }

    /// Serialize as a row-major 4x4 block, `re,im` entries with 17
    /// significant digits, one row per line.
    pub fn to_matrix_block(&self) -> String {
        let mut out = String::new();
        for row in &self.rho {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:.16e},{:.16e}", z.re, z.im))
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse a block produced by [`Self::to_matrix_block`].
    pub fn from_matrix_block(text: &str) -> Result<Self> {
        let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.len() != 4 {
            return Err(Error::Config(format!(
                "expected 4 rows, got {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<&str> = row.split_whitespace().collect();
            if cells.len() != 4 {
                return Err(Error::Config(format!(
                    "expected 4 entries in row {i}, got {}",
                    cells.len()
                )));
            }
            for (j, cell) in cells.iter().enumerate() {
                let (re, im) = cell
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("bad complex entry '{cell}'")))?;
                rho[i][j] = Complex64::new(
                    re.parse()
                        .map_err(|e| Error::Config(format!("bad real part: {e}")))?,
                    im.parse()
                        .map_err(|e| Error::Config(format!("bad imaginary part: {e}")))?,
                );
            }
        }
        Self::new(rho)
    }
}

/// Project a kernel onto the ±q OAM qubit subspace at propagation parameter
/// `t`, with the detection-mode waist equal to the kernel scale.
pub fn project_qubit(kernel: &DotProductKernel, q: u32, t: f64) -> Result<QubitState> {
    project_qubit_with_mode_waist(kernel, q, t, kernel.scale())
}

/// [`project_qubit`] with an explicit detection-mode waist.
///
/// Element (row, col) takes its ket slot signs from `QUBIT_BASIS[row]` and
/// its bra slot signs from `QUBIT_BASIS[col]`; the result is divided by its
/// trace.
pub fn project_qubit_with_mode_waist(
    kernel: &DotProductKernel,
    q: u32,
    t: f64,
    mode_waist: f64,
) -> Result<QubitState> {
    let mut raw = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (r, &(k1, k2)) in QUBIT_BASIS.iter().enumerate() {
        for (c, &(b1, b2)) in QUBIT_BASIS.iter().enumerate() {
            let spec = LgOverlapSpec {
                signs: [k1, b1, k2, b2],
                q,
                waist: mode_waist,
                t,
            };
            let form = overlap_generating(kernel, &spec)?;
            raw[r][c] = form.constant() * extract_element(&form, q)?;
        }
    }
    let trace: Complex64 = (0..4).map(|i| raw[i][i]).sum();
    if trace.norm() < 1e-300 {
        return Err(Error::DegenerateProjection);
    }
    if trace.im.abs() > 1e-8 * trace.norm() {
        return Err(Error::InvalidState(format!(
            "pre-normalization trace {trace} is not real"
        )));
    }
    let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = raw[i][j] / trace;
        }
    }
    // Round off the numerically-forced exact-unit trace.
    let resid: Complex64 = (0..4).map(|i| rho[i][i]).sum::<Complex64>() - 1.0;
    rho[0][0] -= resid;
    QubitState::new(rho)
}
