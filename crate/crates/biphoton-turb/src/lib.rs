//! Biphoton spatial density matrices in Kolmogorov turbulence.
//!
//! This crate evolves the Gaussian density matrix of an SPDC photon pair
//! through atmospheric turbulence under the quadratic structure-function
//! approximation, for two channel geometries: both photons in the same
//! (correlated) medium or in independent (uncorrelated) media. The evolved
//! state is projected onto the two-photon qubit subspace spanned by
//! Laguerre-Gaussian modes with azimuthal index ±q, and the remaining
//! entanglement is quantified by the Wootters concurrence.
//!
//! The crate is organized around the closed Gaussian algebra of the problem:
//!
//! - [`params`]: physical and dimensionless turbulence/beam parameters
//!   (Fried parameter, Rytov variance, dimensionless strength `K`, distance
//!   `t`), and a numerical verification of the Kolmogorov structure constant;
//! - [`kernel`]: Gaussian kernels over the four plane-wave slots and the
//!   Schur-complement marginalization engine;
//! - [`evolve`]: the closed-form evolved thin-crystal kernels and the
//!   general finite-`beta` propagation path;
//! - [`project`]: LG generating-function overlaps and qubit projection;
//! - [`entangle`]: Wootters concurrence and the closed-form
//!   single-phase-screen curves;
//! - [`oracle`]: independent brute-force quadrature and finite-difference
//!   verification paths;
//! - [`cli`]: parameter sweeps producing deterministic CSV datasets.

// Index loops over fixed 4x4 coefficient matrices read better than iterator
// chains here; `!(x > 0.0)` comparisons are deliberate NaN guards.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod entangle;
pub mod error;
pub mod evolve;
pub mod kernel;
mod linalg;
pub mod oracle;
pub mod params;
pub mod project;

pub use entangle::{chi, concurrence, sps_concurrence, ConcurrenceResult};
pub use error::{Error, Result};
pub use evolve::{
    evolve_spdc, evolve_spdc_correlated, evolve_spdc_uncorrelated, evolved_coefficients,
    propagate_general, propagate_spdc, EvolvedCoefficients, Scenario,
};
pub use kernel::{spdc_kernel, DotProductKernel, ExtendedKernel, Var};
pub use params::{
    fried_parameter, rytov_from_wk, rytov_variance, turbulence_strength, verify_structure_constant,
    weak_scint_t, StructureQuadrature, TurbulenceScales,
};
pub use project::{
    extract_element, overlap_generating, project_qubit, project_qubit_with_mode_waist,
    LgOverlapSpec, MuQuadraticForm, OamSign, QubitState, QUBIT_BASIS,
};
