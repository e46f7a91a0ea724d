//! Gaussian biphoton kernels and the marginalization engine.
//!
//! A biphoton density matrix in the transverse plane-wave basis is carried as
//!
//! ```text
//! R(a1, a2, a3, a4) = prefactor * exp(-pi^2 w^2 sum_ij M_ij a_i . a_j)
//! ```
//!
//! with `a_i` two-dimensional spatial-frequency vectors, slots 1, 3 on the ket
//! side and 2, 4 on the bra side, and `M` a complex symmetric 4x4 matrix.
//! Everything the propagation and projection steps need (convolution against
//! Gaussian weights, mode envelopes, generating-function sources) reduces to
//! completing squares on an enlarged variable set. [`ExtendedKernel`] holds
//! that enlarged quadratic form plus per-variable chiral sources and performs
//! the Gaussian integrals one 2D variable at a time via Schur pivots, which
//! keeps complex determinant phases continuous (no principal-branch square
//! roots of a final determinant).

use crate::error::{Error, Result};
use crate::linalg::min_symmetric_eigenvalue;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

/// Variables an extended kernel can range over: the four external
/// spatial-frequency slots and up to two convolution variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    A1,
    A2,
    A3,
    A4,
    U,
    U1,
    U2,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Var::A1 => "a1",
            Var::A2 => "a2",
            Var::A3 => "a3",
            Var::A4 => "a4",
            Var::U => "u",
            Var::U1 => "u1",
            Var::U2 => "u2",
        };
        f.write_str(s)
    }
}

/// The four external slots in storage order.
pub const EXTERNAL_SLOTS: [Var; 4] = [Var::A1, Var::A2, Var::A3, Var::A4];

/// Sign of each slot in the free-propagation phase
/// `|a1|^2 - |a2|^2 + |a3|^2 - |a4|^2` (ket +, bra -).
pub(crate) const SLOT_SIGN: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

/// A biphoton density matrix as a Gaussian kernel over dot products.
#[derive(Clone, Debug)]
pub struct DotProductKernel {
    prefactor: Complex64,
    scale: f64,
    coeff: [[Complex64; 4]; 4],
}

impl DotProductKernel {
    /// Build a kernel from a symmetric coefficient matrix.
    pub fn new(prefactor: Complex64, scale: f64, coeff: [[Complex64; 4]; 4]) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let mut norm = 0.0f64;
        for row in &coeff {
            for v in row {
                norm = norm.max(v.norm());
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if (coeff[i][j] - coeff[j][i]).norm() > 1e-12 * norm.max(1.0) {
                    return Err(Error::Domain(format!(
                        "coefficient matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            prefactor,
            scale,
            coeff,
        })
    }

    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coeff(&self) -> &[[Complex64; 4]; 4] {
        &self.coeff
    }

    pub fn coeff_at(&self, i: usize, j: usize) -> Complex64 {
        self.coeff[i][j]
    }

    /// Pointwise evaluation `prefactor * exp(-pi^2 w^2 sum M_ij a_i.a_j)`.
    pub fn evaluate(&self, points: &[[f64; 2]; 4]) -> Complex64 {
        let gamma = PI * PI * self.scale * self.scale;
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let dot = points[i][0] * points[j][0] + points[i][1] * points[j][1];
                q += self.coeff[i][j] * dot;
            }
        }
        self.prefactor * (-gamma * q).exp()
    }

    /// Same value computed through the tensored 8x8 component form; the x and
    /// y components factorize, so this must agree with [`Self::evaluate`].
    pub fn evaluate_componentwise(&self, points: &[[f64; 2]; 4]) -> Complex64 {
        let gamma = PI * PI * self.scale * self.scale;
        let mut qx = Complex64::new(0.0, 0.0);
        let mut qy = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                qx += self.coeff[i][j] * (points[i][0] * points[j][0]);
                qy += self.coeff[i][j] * (points[i][1] * points[j][1]);
            }
        }
        self.prefactor * (-gamma * qx).exp() * (-gamma * qy).exp()
    }

    /// Deviation from Hermiticity: matrix norm of `P conj(M) P - M` under the
    /// ket/bra swap `P = (1<->2)(3<->4)`, plus the relative imaginary part of
    /// the prefactor.
    pub fn hermiticity_defect(&self) -> f64 {
        const P: [usize; 4] = [1, 0, 3, 2];
        let mut defect = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let mirrored = self.coeff[P[i]][P[j]].conj();
                defect += (mirrored - self.coeff[i][j]).norm_sqr();
            }
        }
        let mut d = defect.sqrt();
        if self.prefactor.norm() > 0.0 {
            d += self.prefactor.im.abs() / self.prefactor.norm();
        }
        d
    }

    /// Trace `∫∫ R(a, a, b, b) d²a d²b` in closed form.
    ///
    /// Identifying the ket and bra slots restricts the quadratic form to a
    /// 2x2 complex symmetric matrix `A`; the Gaussian integral then gives
    /// `prefactor / (pi^2 w^4 det A)`. Fails when the restricted form is not
    /// integrable (e.g. the thin-crystal kernel, whose trace diverges).
    pub fn trace(&self) -> Result<Complex64> {
        let m = &self.coeff;
        let a11 = m[0][0] + m[1][1] + m[0][1] * 2.0;
        let a22 = m[2][2] + m[3][3] + m[2][3] * 2.0;
        let a12 = m[0][2] + m[0][3] + m[1][2] + m[1][3];
        let norm = a11.norm().max(a22.norm()).max(a12.norm());
        let re = [a11.re, a12.re, a12.re, a22.re];
        let min_eig = min_symmetric_eigenvalue(2, &re);
        if min_eig <= 1e-10 * norm.max(1e-300) {
            return Err(Error::DivergentTrace);
        }
        let det = a11 * a22 - a12 * a12;
        if det.norm() <= 1e-12 * norm * norm {
            return Err(Error::DivergentTrace);
        }
        let w2 = self.scale * self.scale;
        Ok(self.prefactor / (PI * PI * w2 * w2 * det))
    }

    /// Serialize to a plain-text record: one `key=value` line per field,
    /// complex values as `re,im` with 17 significant digits.
    pub fn to_record(&self) -> String {
        let fmt_c = |z: Complex64| format!("{:.16e},{:.16e}", z.re, z.im);
        let mut out = String::new();
        out.push_str(&format!("prefactor={}\n", fmt_c(self.prefactor)));
        out.push_str(&format!("scale={:.16e}\n", self.scale));
        for i in 0..4 {
            for j in i..4 {
                out.push_str(&format!(
                    "m{}{}={}\n",
                    i + 1,
                    j + 1,
                    fmt_c(self.coeff[i][j])
                ));
            }
        }
        out
    }

    /// Parse a record produced by [`Self::to_record`].
    pub fn from_record(text: &str) -> Result<Self> {
        let mut prefactor = None;
        let mut scale = None;
        let mut coeff = [[Complex64::new(0.0, 0.0); 4]; 4];
        let mut seen = [[false; 4]; 4];
        let parse_c = |v: &str| -> Result<Complex64> {
            let (re, im) = v
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("expected re,im pair, got '{v}'")))?;
            let re: f64 = re
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad real part '{re}': {e}")))?;
            let im: f64 = im
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad imaginary part '{im}': {e}")))?;
            Ok(Complex64::new(re, im))
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{line}'")))?;
            match key.trim() {
                "prefactor" => prefactor = Some(parse_c(value)?),
                "scale" => {
                    scale = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|e| Error::Config(format!("bad scale: {e}")))?,
                    )
                }
                k if k.len() == 3 && k.starts_with('m') => {
                    let i = k.as_bytes()[1] - b'1';
                    let j = k.as_bytes()[2] - b'1';
                    if i > 3 || j > 3 {
                        return Err(Error::Config(format!("bad matrix key '{k}'")));
                    }
                    let v = parse_c(value)?;
                    coeff[i as usize][j as usize] = v;
                    coeff[j as usize][i as usize] = v;
                    seen[i as usize][j as usize] = true;
                    seen[j as usize][i as usize] = true;
                }
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        let prefactor = prefactor.ok_or_else(|| Error::Config("missing prefactor".into()))?;
        let scale = scale.ok_or_else(|| Error::Config("missing scale".into()))?;
        for i in 0..4 {
            for j in i..4 {
                if !seen[i][j] {
                    return Err(Error::Config(format!("missing entry m{}{}", i + 1, j + 1)));
                }
            }
        }
        Self::new(prefactor, scale, coeff)
    }
}

/// SPDC biphoton kernel `psi(a1,a3) psi*(a2,a4)` for a Gaussian pump of
/// radius `pump_waist` and phase-matching ratio `beta`.
///
/// The prefactor is `8 pi^2 w_p^4 beta`; `beta = 0` is allowed (thin-crystal
/// kernel with the `beta` factor removed from the normalization), but such a
/// kernel has a divergent trace.
pub fn spdc_kernel(pump_waist: f64, beta: f64) -> Result<DotProductKernel> {
    if !(pump_waist > 0.0) || !pump_waist.is_finite() {
        return Err(Error::Domain(format!(
            "pump_waist must be positive, got {pump_waist}"
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let diag = one * (1.0 + beta / 2.0);
    let cross = one * (1.0 - beta / 2.0);
    let zero = Complex64::new(0.0, 0.0);
    let coeff = [
        [diag, zero, cross, zero],
        [zero, diag, zero, cross],
        [cross, zero, diag, zero],
        [zero, cross, zero, diag],
    ];
    let w4 = pump_waist.powi(4);
    let prefactor = if beta > 0.0 {
        Complex64::new(8.0 * PI * PI * w4 * beta, 0.0)
    } else {
        Complex64::new(8.0 * PI * PI * w4, 0.0)
    };
    DotProductKernel::new(prefactor, pump_waist, coeff)
}

/// Per-variable chiral source coefficients over the four generating
/// parameters mu_1..mu_4, in units of `pi * scale` (so that completing the
/// square never reintroduces the Gaussian width).
///
/// A term `p * alpha + q * abar` in the exponent uses `alpha = a_x + i a_y`
/// and `abar = a_x - i a_y`; pairing an alpha coefficient with an abar
/// coefficient is what survives the Gaussian integral.
#[derive(Clone, Copy, Debug, Default)]
struct ChiralSource {
    alpha: [Complex64; 4],
    abar: [Complex64; 4],
}

impl ChiralSource {
    fn is_zero(&self) -> bool {
        self.alpha
            .iter()
            .chain(self.abar.iter())
            .all(|c| c.norm() == 0.0)
    }
}

/// A Gaussian quadratic form over an arbitrary variable list, with optional
/// generating-parameter sources and an accumulated quadratic form in mu.
#[derive(Clone, Debug)]
pub struct ExtendedKernel {
    prefactor: Complex64,
    scale: f64,
    vars: Vec<Var>,
    coeff: Vec<Complex64>,
    sources: Vec<ChiralSource>,
    mu_quad: [[Complex64; 4]; 4],
}

impl ExtendedKernel {
    /// Start from a plain four-slot kernel.
    pub fn from_kernel(kernel: &DotProductKernel) -> Self {
        let vars = EXTERNAL_SLOTS.to_vec();
        let mut ek = Self {
            prefactor: kernel.prefactor(),
            scale: kernel.scale(),
            vars,
            coeff: vec![Complex64::new(0.0, 0.0); 16],
            sources: vec![ChiralSource::default(); 4],
            mu_quad: [[Complex64::new(0.0, 0.0); 4]; 4],
        };
        for i in 0..4 {
            for j in 0..4 {
                ek.coeff[i * 4 + j] = kernel.coeff_at(i, j);
            }
        }
        ek
    }

    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coeff(&self) -> &[[Complex64; 4]; 4] {
        &self.coeff
    }

    pub fn coeff_at(&self, i: usize, j: usize) -> Complex64 {
        self.coeff[i][j]
    }

    /// Pointwise evaluation `prefactor * exp(-pi^2 w^2 sum M_ij a_i.a_j)`.
    pub fn evaluate(&self, points: &[[f64; 2]; 4]) -> Complex64 {
        let gamma = PI * PI * self.scale * self.scale;
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let dot = points[i][0] * points[j][0] + points[i][1] * points[j][1];
                q += self.coeff[i][j] * dot;
            }
        }
        self.prefactor * (-gamma * q).exp()
    }

    /// Same value computed through the tensored 8x8 component form; the x and
    /// y components factorize, so this must agree with [`Self::evaluate`].
    pub fn evaluate_componentwise(&self, points: &[[f64; 2]; 4]) -> Complex64 {
        let gamma = PI * PI * self.scale * self.scale;
        let mut qx = Complex64::new(0.0, 0.0);
        let mut qy = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                qx += self.coeff[i][j] * (points[i][0] * points[j][0]);
                qy += self.coeff[i][j] * (points[i][1] * points[j][1]);
            }
        }
        self.prefactor * (-gamma * qx).exp() * (-gamma * qy).exp()
    }

    /// Deviation from Hermiticity: matrix norm of `P conj(M) P - M` under the
    /// ket/bra swap `P = (1<->2)(3<->4)`, plus the relative imaginary part of
    /// the prefactor.
    pub fn hermiticity_defect(&self) -> f64 {
        const P: [usize; 4] = [1, 0, 3, 2];
        let mut defect = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let mirrored = self.coeff[P[i]][P[j]].conj();
                defect += (mirrored - self.coeff[i][j]).norm_sqr();
            }
        }
        let mut d = defect.sqrt();
        if self.prefactor.norm() > 0.0 {
            d += self.prefactor.im.abs() / self.prefactor.norm();
        }
        d
    }

    /// Trace `∫∫ R(a, a, b, b) d²a d²b` in closed form.
    ///
    /// Identifying the ket and bra slots restricts the quadratic form to a
    /// 2x2 complex symmetric matrix `A`; the Gaussian integral then gives
    /// `prefactor / (pi^2 w^4 det A)`. Fails when the restricted form is not
    /// integrable (e.g. the thin-crystal kernel, whose trace diverges).
    pub fn trace(&self) -> Result<Complex64> {
        let m = &self.coeff;
        let a11 = m[0][0] + m[1][1] + m[0][1] * 2.0;
        let a22 = m[2][2] + m[3][3] + m[2][3] * 2.0;
        let a12 = m[0][2] + m[0][3] + m[1][2] + m[1][3];
        let norm = a11.norm().max(a22.norm()).max(a12.norm());
        let re = [a11.re, a12.re, a12.re, a22.re];
        let min_eig = min_symmetric_eigenvalue(2, &re);
        if min_eig <= 1e-10 * norm.max(1e-300) {
            return Err(Error::DivergentTrace);
        }
        let det = a11 * a22 - a12 * a12;
        if det.norm() <= 1e-12 * norm * norm {
            return Err(Error::DivergentTrace);
        }
        let w2 = self.scale * self.scale;
        Ok(self.prefactor / (PI * PI * w2 * w2 * det))
    }

    /// Serialize to a plain-text record: one `key=value` line per field,
    /// complex values as `re,im` with 17 significant digits.
    pub fn to_record(&self) -> String {
        let fmt_c = |z: Complex64| format!("{:.16e},{:.16e}", z.re, z.im);
        let mut out = String::new();
        out.push_str(&format!("prefactor={}\n", fmt_c(self.prefactor)));
        out.push_str(&format!("scale={:.16e}\n", self.scale));
        for i in 0..4 {
            for j in i..4 {
                out.push_str(&format!(
                    "m{}{}={}\n",
                    i + 1,
                    j + 1,
                    fmt_c(self.coeff[i][j])
                ));
            }
        }
        out
    }

    /// Parse a record produced by [`Self::to_record`].
    pub fn from_record(text: &str) -> Result<Self> {
        let mut prefactor = None;
        let mut scale = None;
        let mut coeff = [[Complex64::new(0.0, 0.0); 4]; 4];
        let mut seen = [[false; 4]; 4];
        let parse_c = |v: &str| -> Result<Complex64> {
            let (re, im) = v
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("expected re,im pair, got '{v}'")))?;
            let re: f64 = re
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad real part '{re}': {e}")))?;
            let im: f64 = im
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad imaginary part '{im}': {e}")))?;
            Ok(Complex64::new(re, im))
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{line}'")))?;
            match key.trim() {
                "prefactor" => prefactor = Some(parse_c(value)?),
                "scale" => {
                    scale = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|e| Error::Config(format!("bad scale: {e}")))?,
                    )
                }
                k if k.len() == 3 && k.starts_with('m') => {
                    let i = k.as_bytes()[1] - b'1';
                    let j = k.as_bytes()[2] - b'1';
                    if i > 3 || j > 3 {
                        return Err(Error::Config(format!("bad matrix key '{k}'")));
                    }
                    let v = parse_c(value)?;
                    coeff[i as usize][j as usize] = v;
                    coeff[j as usize][i as usize] = v;
                    seen[i as usize][j as usize] = true;
                    seen[j as usize][i as usize] = true;
                }
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        let prefactor = prefactor.ok_or_else(|| Error::Config("missing prefactor".into()))?;
        let scale = scale.ok_or_else(|| Error::Config("missing scale".into()))?;
        for i in 0..4 {
            for j in i..4 {
                if !seen[i][j] {
                    return Err(Error::Config(format!("missing entry m{}{}", i + 1, j + 1)));
                }
            }
        }
        Self::new(prefactor, scale, coeff)
    }
}

/// SPDC biphoton kernel `psi(a1,a3) psi*(a2,a4)` for a Gaussian pump of
/// radius `pump_waist` and phase-matching ratio `beta`.
///
/// The prefactor is `8 pi^2 w_p^4 beta`; `beta = 0` is allowed (thin-crystal
/// kernel with the `beta` factor removed from the normalization), but such a
/// kernel has a divergent trace.
pub fn spdc_kernel(pump_waist: f64, beta: f64) -> Result<DotProductKernel> {
    if !(pump_waist > 0.0) || !pump_waist.is_finite() {
        return Err(Error::Domain(format!(
            "pump_waist must be positive, got {pump_waist}"
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let diag = one * (1.0 + beta / 2.0);
    let cross = one * (1.0 - beta / 2.0);
    let zero = Complex64::new(0.0, 0.0);
    let coeff = [
        [diag, zero, cross, zero],
        [zero, diag, zero, cross],
        [cross, zero, diag, zero],
        [zero, cross, zero, diag],
    ];
    let w4 = pump_waist.powi(4);
    let prefactor = if beta > 0.0 {
        Complex64::new(8.0 * PI * PI * w4 * beta, 0.0)
    } else {
        Complex64::new(8.0 * PI * PI * w4, 0.0)
    };
    DotProductKernel::new(prefactor, pump_waist, coeff)
}

/// Per-variable chiral source coefficients over the four generating
/// parameters mu_1..mu_4, in units of `pi * scale` (so that completing the
/// square never reintroduces the Gaussian width).
///
/// A term `p * alpha + q * abar` in the exponent uses `alpha = a_x + i a_y`
/// and `abar = a_x - i a_y`; pairing an alpha coefficient with an abar
/// coefficient is what survives the Gaussian integral.
#[derive(Clone, Copy, Debug, Default)]
struct ChiralSource {
    alpha: [Complex64; 4],
    abar: [Complex64; 4],
}

impl ChiralSource {
    fn is_zero(&self) -> bool {
        self.alpha
            .iter()
            .chain(self.abar.iter())
            .all(|c| c.norm() == 0.0)
    }
}

/// A Gaussian quadratic form over an arbitrary variable list, with optional
/// generating-parameter sources and an accumulated quadratic form in mu.
#[derive(Clone, Debug)]
pub struct ExtendedKernel {
    prefactor: Complex64,
    scale: f64,
    vars: Vec<Var>,
    coeff: Vec<Complex64>,
    sources: Vec<ChiralSource>,
    mu_quad: [[Complex64; 4]; 4],
}

impl ExtendedKernel {
    /// Start from a plain four-slot kernel.
    pub fn from_kernel(kernel: &DotProductKernel) -> Self {
        let vars = EXTERNAL_SLOTS.to_vec();
        let mut ek = Self {
            prefactor: kernel.prefactor(),
            scale: kernel.scale(),
            vars,
            coeff: vec![Complex64::new(0.0, 0.0); 16],
            sources: vec![ChiralSource::default(); 4],
            mu_quad: [[Complex64::new(0.0, 0.0); 4]; 4],
        };
        for i in 0..4 {
            for j in 0..4 {
                ek.coeff[i * 4 + j] = kernel.coeff_at(i, j);
            }
        }
        ek
    }

    /// Start from an empty form with the given scale and prefactor.
    pub fn with_scale(prefactor: Complex64, scale: f64) -> Self {
        Self {
            prefactor,
            scale,
            vars: Vec::new(),
            coeff: Vec::new(),
            sources: Vec::new(),
            mu_quad: [[Complex64::new(0.0, 0.0); 4]; 4],
        }
    }

    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn scale_prefactor(&mut self, f: Complex64) {
        self.prefactor *= f;
    }

    fn index_of(&self, var: Var) -> usize {
        self.vars
            .iter()
            .position(|&v| v == var)
            .unwrap_or_else(|| panic!("variable {var} not present"))
    }

    /// Append a new 2D variable with the given diagonal coefficient.
    pub fn add_variable(&mut self, var: Var, diag: Complex64) {
        assert!(!self.vars.contains(&var), "variable {var} already present");
        let n = self.vars.len();
        let mut coeff = vec![Complex64::new(0.0, 0.0); (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                coeff[i * (n + 1) + j] = self.coeff[i * n + j];
            }
        }
        coeff[n * (n + 1) + n] = diag;
        self.coeff = coeff;
        self.vars.push(var);
        self.sources.push(ChiralSource::default());
    }

    pub fn coeff(&self, a: Var, b: Var) -> Complex64 {
        let (i, j) = (self.index_of(a), self.index_of(b));
        self.coeff[i * self.vars.len() + j]
    }

    /// Add `delta` to the symmetric coefficient pair (a, b).
    pub fn add_coeff(&mut self, a: Var, b: Var, delta: Complex64) {
        let (i, j) = (self.index_of(a), self.index_of(b));
        let n = self.vars.len();
        self.coeff[i * n + j] += delta;
        if i != j {
            self.coeff[j * n + i] += delta;
        }
    }

    /// Add a chiral source `c * mu_k * alpha_var` (`alpha = a_x + i a_y`),
    /// with `c` in units of `pi * scale`.
    pub fn add_source_alpha(&mut self, var: Var, mu_index: usize, c: Complex64) {
        let i = self.index_of(var);
        self.sources[i].alpha[mu_index] += c;
    }

    /// Add a chiral source `c * mu_k * abar_var` (`abar = a_x - i a_y`).
    pub fn add_source_abar(&mut self, var: Var, mu_index: usize, c: Complex64) {
        let i = self.index_of(var);
        self.sources[i].abar[mu_index] += c;
    }

    /// Accumulated quadratic form in the generating parameters (the exponent
    /// is `sum_{mn} B_mn mu_m mu_n`).
    pub fn mu_quadratic(&self) -> &[[Complex64; 4]; 4] {
        &self.mu_quad
    }

    /// Integrate out the listed 2D variables by completing the square.
    ///
    /// The real part of the quadratic-form block over `targets` must be
    /// positive definite (checked via its minimum eigenvalue against a scaled
    /// tolerance); the integration itself proceeds by sequential Schur pivots
    /// so determinant phases accumulate continuously.
    pub fn marginalize(&self, targets: &[Var]) -> Result<ExtendedKernel> {
        let mut out = self.clone();
        // Upfront positive-definiteness check of the real part of the block.
        let idx: Vec<usize> = targets.iter().map(|&v| out.index_of(v)).collect();
        let nb = idx.len();
        if nb > 0 {
            let n = out.vars.len();
            let mut block = vec![0.0f64; nb * nb];
            let mut norm = 0.0f64;
            for (bi, &i) in idx.iter().enumerate() {
                for (bj, &j) in idx.iter().enumerate() {
                    let re = out.coeff[i * n + j].re;
                    block[bi * nb + bj] = re;
                    norm = norm.max(out.coeff[i * n + j].norm());
                }
            }
            let min_eig = min_symmetric_eigenvalue(nb, &block);
            if min_eig <= 1e-10 * norm.max(1e-300) {
                // Identify the first offending variable by its pivot sign.
                let worst = targets
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let pa = out.coeff[out.index_of(a) * n + out.index_of(a)].re;
                        let pb = out.coeff[out.index_of(b) * n + out.index_of(b)].re;
                        pa.partial_cmp(&pb).unwrap()
                    })
                    .unwrap();
                let pivot = out.coeff[out.index_of(worst) * n + out.index_of(worst)].re;
                return Err(Error::NotIntegrable {
                    variable: worst,
                    pivot: pivot.min(min_eig),
                });
            }
        }
        for &var in targets {
            out = out.marginalize_one(var)?;
        }
        Ok(out)
    }

    fn marginalize_one(&self, var: Var) -> Result<ExtendedKernel> {
        let k = self.index_of(var);
        let n = self.vars.len();
        let gamma = PI * PI * self.scale * self.scale;
        let pivot = self.coeff[k * n + k];
        if pivot.re <= 0.0 {
            return Err(Error::NotIntegrable {
                variable: var,
                pivot: pivot.re,
            });
        }

        let keep: Vec<usize> = (0..n).filter(|&j| j != k).collect();
        let mut out = ExtendedKernel {
            prefactor: self.prefactor * PI / (gamma * pivot),
            scale: self.scale,
            vars: keep.iter().map(|&j| self.vars[j]).collect(),
            coeff: vec![Complex64::new(0.0, 0.0); keep.len() * keep.len()],
            sources: Vec::with_capacity(keep.len()),
            mu_quad: self.mu_quad,
        };

        // Schur complement of the surviving quadratic form.
        let m = keep.len();
        for (bi, &i) in keep.iter().enumerate() {
            for (bj, &j) in keep.iter().enumerate() {
                out.coeff[bi * m + bj] =
                    self.coeff[i * n + j] - self.coeff[k * n + i] * self.coeff[k * n + j] / pivot;
            }
        }

        // Fold the pivot's sources: the alpha/abar pairing contributes a
        // rank-one mu-quadratic and shifts the surviving sources.
        let sk = self.sources[k];
        if !sk.is_zero() {
            for mi in 0..4 {
                for mj in 0..4 {
                    let add =
                        (sk.alpha[mi] * sk.abar[mj] + sk.alpha[mj] * sk.abar[mi]) / (pivot * 2.0);
                    out.mu_quad[mi][mj] += add;
                }
            }
        }
        for &j in &keep {
            let ratio = self.coeff[k * n + j] / pivot;
            let mut s = self.sources[j];
            if !sk.is_zero() && ratio.norm() > 0.0 {
                for mi in 0..4 {
                    s.alpha[mi] -= ratio * sk.alpha[mi];
                    s.abar[mi] -= ratio * sk.abar[mi];
                }
            }
            out.sources.push(s);
        }
        Ok(out)
    }

    /// Collapse to a plain four-slot kernel; requires exactly the external
    /// slots to remain, with no unconsumed sources.
    pub fn into_dot_product(self) -> Result<DotProductKernel> {
        if self.vars != EXTERNAL_SLOTS {
            return Err(Error::Domain(format!(
                "expected the four external slots to remain, have {:?}",
                self.vars
            )));
        }
        if self.sources.iter().any(|s| !s.is_zero()) {
            return Err(Error::Domain(
                "unconsumed generating-parameter sources".into(),
            ));
        }
        let mut coeff = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                coeff[i][j] = (self.coeff[i * 4 + j] + self.coeff[j * 4 + i]) * 0.5;
            }
        }
        DotProductKernel::new(self.prefactor, self.scale, coeff)
    }

}
