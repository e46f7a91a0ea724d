//! Physical and dimensionless turbulence/beam parameters.
//!
//! All quantities follow the Kolmogorov model with a pure -11/3 power
//! spectrum (no inner or outer scale). The dimensionless bundle used by the
//! evolution kernels is
//!
//! - `t = z λ / (π w₀²)`, the propagation distance in Rayleigh ranges,
//! - `K = 2π³ S C_n² w₀^{11/3} / λ³`, the turbulence strength (`S` = 1.457),
//! - `W = w₀ / r₀`, beam radius over Fried parameter,
//! - `σ_R² = 1.23 C_n² k^{7/6} z^{11/6}`, the Rytov variance,
//!
//! together with the phase-matching ratio `β = n_o L λ / (π w_p²)`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Structure-function constant of the Kolmogorov spectrum,
/// `∫ Φ₀(u) [1 - cos(2π u·x̂)] d²u = S C_n² |x|^{5/3}`.
pub const STRUCTURE_CONSTANT: f64 = 1.457;

/// Coefficient of the Fried parameter, `r₀ = 0.185 (λ²/(C_n² z))^{3/5}`.
pub const FRIED_COEFF: f64 = 0.185;

/// Coefficient of the Rytov variance, `σ_R² = 1.23 C_n² k^{7/6} z^{11/6}`.
pub const RYTOV_COEFF: f64 = 1.23;

/// Coefficient of the Rytov variance in (W, K) form, `σ_R² = 2.57 W^{55/18} / K^{5/6}`.
pub const RYTOV_WK_COEFF: f64 = 2.57;

/// Coefficient of the weak-scintillation substitution `t = 1.72 W^{5/3} / K`.
pub const WEAK_SCINT_COEFF: f64 = 1.72;

/// Kolmogorov spectral amplitude at zero axial wavenumber, in spatial-frequency
/// units: `Φ₀(u) = 0.033 (2π)^{-2/3} C_n² |u|^{-11/3}`.
const PHI0_COEFF: f64 = 0.033;

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!(
            "{name} must be non-negative, got {v}"
        )));
    }
    Ok(())
}

/// Fried parameter `r₀ = 0.185 (λ²/(C_n² z))^{3/5}` in metres.
pub fn fried_parameter(cn2: f64, wavelength: f64, distance: f64) -> Result<f64> {
    require_positive("cn2", cn2)?;
    require_positive("wavelength", wavelength)?;
    require_positive("distance", distance)?;
    Ok(FRIED_COEFF * (wavelength * wavelength / (cn2 * distance)).powf(3.0 / 5.0))
}

/// Rytov variance `σ_R² = 1.23 C_n² k^{7/6} z^{11/6}` (dimensionless).
///
/// `cn2 = 0` is allowed and gives zero (no turbulence).
pub fn rytov_variance(cn2: f64, wavenumber: f64, distance: f64) -> Result<f64> {
    require_nonnegative("cn2", cn2)?;
    require_positive("wavenumber", wavenumber)?;
    require_positive("distance", distance)?;
    Ok(RYTOV_COEFF * cn2 * wavenumber.powf(7.0 / 6.0) * distance.powf(11.0 / 6.0))
}

/// Rytov variance from the dimensionless pair, `σ_R² = 2.57 W^{55/18} / K^{5/6}`.
pub fn rytov_from_wk(w_ratio: f64, strength: f64) -> Result<f64> {
    require_nonnegative("W", w_ratio)?;
    require_positive("K", strength)?;
    Ok(RYTOV_WK_COEFF * w_ratio.powf(55.0 / 18.0) / strength.powf(5.0 / 6.0))
}

/// Dimensionless turbulence strength `K = 2π³ S C_n² w₀^{11/3} / λ³`.
///
/// `cn2 = 0` is allowed and gives zero.
pub fn turbulence_strength(cn2: f64, waist: f64, wavelength: f64) -> Result<f64> {
    require_nonnegative("cn2", cn2)?;
    require_positive("waist", waist)?;
    require_positive("wavelength", wavelength)?;
    Ok(2.0 * PI.powi(3) * STRUCTURE_CONSTANT * cn2 * waist.powf(11.0 / 3.0) / wavelength.powi(3))
}

/// Weak-scintillation substitution `t = 1.72 W^{5/3} / K`.
pub fn weak_scint_t(w_ratio: f64, strength: f64) -> Result<f64> {
    require_nonnegative("W", w_ratio)?;
    require_positive("K", strength)?;
    Ok(WEAK_SCINT_COEFF * w_ratio.powf(5.0 / 3.0) / strength)
}

/// Physical beam/turbulence parameter set with derived dimensionless scales.
///
/// `waist` doubles as the SPDC pump radius `w_p` when a crystal is attached.
#[derive(Clone, Debug)]
pub struct TurbulenceScales {
    cn2: f64,
    wavelength: f64,
    waist: f64,
    distance: f64,
    crystal_length: Option<f64>,
    ordinary_index: Option<f64>,
}

impl TurbulenceScales {
    pub fn new(cn2: f64, wavelength: f64, waist: f64, distance: f64) -> Result<Self> {
        require_positive("cn2", cn2)?;
        require_positive("wavelength", wavelength)?;
        require_positive("waist", waist)?;
        require_positive("distance", distance)?;
        Ok(Self {
            cn2,
            wavelength,
            waist,
            distance,
            crystal_length: None,
            ordinary_index: None,
        })
    }

    /// Attach the nonlinear crystal parameters needed for `β`.
    pub fn with_crystal(mut self, length: f64, ordinary_index: f64) -> Result<Self> {
        require_positive("crystal_length", length)?;
        require_positive("ordinary_index", ordinary_index)?;
        self.crystal_length = Some(length);
        self.ordinary_index = Some(ordinary_index);
        Ok(self)
    }

    pub fn cn2(&self) -> f64 {
        self.cn2
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn waist(&self) -> f64 {
        self.waist
    }
    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Wavenumber `k = 2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Normalized propagation distance `t = z λ / (π w₀²)`.
    pub fn normalized_distance(&self) -> f64 {
        self.distance * self.wavelength / (PI * self.waist * self.waist)
    }

    /// Dimensionless turbulence strength `K`.
    pub fn strength(&self) -> f64 {
        turbulence_strength(self.cn2, self.waist, self.wavelength).expect("validated fields")
    }

    /// Fried parameter `r₀`.
    pub fn fried(&self) -> f64 {
        fried_parameter(self.cn2, self.wavelength, self.distance).expect("validated fields")
    }

    /// `W = w₀ / r₀`.
    pub fn w_ratio(&self) -> f64 {
        self.waist / self.fried()
    }

    /// Rytov variance from the physical formula.
    pub fn rytov_direct(&self) -> f64 {
        rytov_variance(self.cn2, self.wavenumber(), self.distance).expect("validated fields")
    }

    /// Rytov variance from the (W, K) combination; agrees with
    /// [`Self::rytov_direct`] to about 1% (printed-constant rounding).
    pub fn rytov_from_ratio(&self) -> f64 {
        rytov_from_wk(self.w_ratio(), self.strength()).expect("validated fields")
    }

    /// Quadratic structure-function coefficient `ζ = S C_n² / w₀^{1/3}`.
    pub fn zeta(&self) -> f64 {
        STRUCTURE_CONSTANT * self.cn2 / self.waist.powf(1.0 / 3.0)
    }

    /// Crystal-to-Rayleigh ratio `β = n_o L λ / (π w_p²)`, when the crystal is set.
    pub fn beta(&self) -> Option<f64> {
        match (self.crystal_length, self.ordinary_index) {
            (Some(l), Some(no)) => Some(no * l * self.wavelength / (PI * self.waist * self.waist)),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Structure-constant verification
// ---------------------------------------------------------------------------

/// Radial quadrature window for [`verify_structure_constant`].
#[derive(Clone, Copy, Debug)]
pub struct StructureQuadrature {
    /// Lower radial cutoff (spatial frequency, units of 1/|x|).
    pub u_min: f64,
    /// Upper radial cutoff.
    pub u_max: f64,
    /// Gauss-Legendre node budget for the oscillatory region.
    pub nodes: usize,
}

impl Default for StructureQuadrature {
    fn default() -> Self {
        Self {
            u_min: 1e-4,
            u_max: 1e4,
            nodes: 1024,
        }
    }
}

/// Radial integrand `2π Φ₀(u)/C_n² · u · [1 - J₀(2πu)]` of the structure
/// integral at `|x| = 1` (the angular average of `1 - cos(2π u·x̂)` is
/// `1 - J₀(2πu)`).
fn structure_radial_integrand(u: f64) -> f64 {
    2.0 * PI
        * PHI0_COEFF
        * (2.0 * PI).powf(-2.0 / 3.0)
        * u.powf(-8.0 / 3.0)
        * one_minus_j0(2.0 * PI * u)
}

/// Two-dimensional integrand `Φ₀(|u|)[1 - cos(2π u·x̂)]/C_n²` at `|x̂| = 1`;
/// kept for oracle-style checks of the angular reduction.
pub fn structure_integrand_2d(u: [f64; 2]) -> f64 {
    let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    PHI0_COEFF * (2.0 * PI).powf(-2.0 / 3.0) * r.powf(-11.0 / 3.0) * (1.0 - (2.0 * PI * u[0]).cos())
}

/// Numerically estimate the structure-function constant `S` from the
/// Kolmogorov spectral density.
///
/// The window `[u_min, u_max]` is a numerical regulator: below `u_min` the
/// regular `1 - J₀ ≈ (πu)²·...` expansion is integrated in closed form, and
/// above the oscillation cutoff the `-8/3` power-law tail is integrated
/// analytically while the decaying Bessel remainder is folded into the
/// residual estimate. Converges to 1.457 as the window widens; a window too
/// narrow for these completions fails with a residual estimate.
pub fn verify_structure_constant(spec: &StructureQuadrature) -> Result<f64> {
    if !(spec.u_min > 0.0 && spec.u_min < spec.u_max) {
        return Err(Error::Domain(format!(
            "require 0 < u_min < u_max, got [{}, {}]",
            spec.u_min, spec.u_max
        )));
    }
    if spec.nodes < 16 {
        return Err(Error::Domain("need at least 16 nodes".into()));
    }
    let c0 = 2.0 * PI * PHI0_COEFF * (2.0 * PI).powf(-2.0 / 3.0);

    // Small-u completion from the 1 - J0 power series; valid for 2*pi*u_min < 1.
    let x = spec.u_min;
    let tp = 2.0 * PI;
    let comp1 = 3.0 * PI * PI * x.powf(1.0 / 3.0);
    let comp2 = -(3.0 / 7.0) * tp.powi(4) / 64.0 * x.powf(7.0 / 3.0);
    let comp3 = (3.0 / 13.0) * tp.powi(6) / 2304.0 * x.powf(13.0 / 3.0);
    let completion = c0 * (comp1 + comp2 + comp3);
    let completion_residual = c0 * comp3.abs() + if tp * x < 1.0 { 0.0 } else { f64::INFINITY };

    // Above u_c the Bessel term is a decaying oscillation; integrate the
    // power law exactly and bound the remainder by |J0(z)| <= sqrt(2/(pi z)).
    let u_c = 32.0f64.min(spec.u_max).max(spec.u_min * (1.0 + 1e-12));
    let tail = c0 * (3.0 / 5.0) * u_c.powf(-5.0 / 3.0);
    let tail_residual = c0 * (6.0 / 13.0) / PI * u_c.powf(-13.0 / 6.0);

    // Oscillatory region: log panels below u = 1, linear panels above.
    let quad = |panels_scale: usize| -> f64 {
        let mut total = 0.0;
        let (gx, gw) = crate::oracle::gauss_legendre(16);
        let mut edges: Vec<f64> = Vec::new();
        let mut u = spec.u_min;
        edges.push(u);
        let log_hi = 1.0f64.min(u_c);
        while u < log_hi {
            let next = (u * 10.0f64.powf(1.0 / (4.0 * panels_scale as f64))).min(log_hi);
            edges.push(next);
            u = next;
        }
        if u_c > 1.0 {
            let width = 0.5 / panels_scale as f64;
            while u < u_c {
                let next = (u + width).min(u_c);
                edges.push(next);
                u = next;
            }
        }
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut panel = 0.0;
            for (xi, wi) in gx.iter().zip(gw.iter()) {
                panel += wi * structure_radial_integrand(mid + half * xi);
            }
            total += panel * half;
        }
        total
    };

    let scale = (spec.nodes / 1024).max(1);
    let coarse = quad(scale);
    let fine = quad(2 * scale);
    let refine_residual = (fine - coarse).abs();

    let residual = completion_residual + tail_residual + refine_residual;
    if residual > 5e-3 {
        return Err(Error::Convergence { residual });
    }
    Ok(completion + fine + tail)
}

// ---------------------------------------------------------------------------
// Bessel J0
// ---------------------------------------------------------------------------

/// `1 - J₀(x)` with full relative accuracy at small arguments (power series)
/// and ~1e-8 absolute accuracy at large arguments (Abramowitz-Stegun 9.4.3).
pub(crate) fn one_minus_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 12.0 {
        // 1 - J0(x) = sum_{k>=1} (-1)^{k+1} (x^2/4)^k / (k!)^2
        let q = 0.25 * ax * ax;
        let mut term = q;
        let mut sum = q;
        let mut k = 1.0f64;
        while term.abs() > 1e-17 * sum.abs().max(1e-300) {
            k += 1.0;
            term *= -q / (k * k);
            sum += term;
        }
        sum
    } else {
        1.0 - bessel_j0_large(ax)
    }
}

/// A&S 9.4.3 asymptotic form, valid for x >= 3 (|error| < 2e-8).
#[allow(clippy::approx_constant)] // tabulated coefficients include pi/4 truncated to 8 digits
fn bessel_j0_large(x: f64) -> f64 {
    let z = 3.0 / x;
    let f0 = 0.79788456
        + z * (-0.00000077
            + z * (-0.00552740
                + z * (-0.00009512 + z * (0.00137237 + z * (-0.00072805 + z * 0.00014476)))));
    let t0 = x - 0.78539816
        + z * (-0.04166397
            + z * (-0.00003954
                + z * (0.00262573 + z * (-0.00054125 + z * (-0.00029333 + z * 0.00013558)))));
    f0 * t0.cos() / x.sqrt()
}
