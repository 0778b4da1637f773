//! Numerical workbench for pseudo-differential operators whose symbols carry
//! an oscillating factor `exp(i*phi)` with a phase of sublinear growth in the
//! frequency variable.
//!
//! The crate is organized around the objects of that calculus:
//!
//! * [`symbols`] - phases, symbols and amplitudes with exact derivative
//!   oracles, plus seminorm probes for their symbol classes.
//! * [`pdo`] - grids, discrete Fourier quadrature, operator application,
//!   Schwartz kernels, materialized matrices and singular-value probes.
//! * [`calculus`] - asymptotic expansions (amplitude reduction, products of
//!   operators with a shared phase) and the Taylor remainder identity behind
//!   them.
//! * [`stationary`] - stationary-point solvers for the amplitude reduction
//!   and for the action on oscillating exponents.
//! * [`fock`] - symmetric tensor algebra: ladder maps against a direction
//!   and the explicit right inverse used by the phase construction.
//! * [`weyl`] - the polynomial phase construction and the circle-coverage
//!   spectral experiments.
//! * [`direct_integral`] - diffeomorphism transport of amplitudes, conormal
//!   masks, kernel slices on level surfaces and mollifier sandwich forms.
//! * [`report`] - CSV/plot-data emission shared by experiments and the CLI.

pub mod calculus;
pub mod direct_integral;
pub mod error;
pub mod field;
pub mod fock;
pub mod grid;
pub mod multi;
pub mod pdo;
pub mod quad;
pub mod report;
pub mod slope;
pub mod smooth;
pub mod stationary;
pub mod symbols;
pub mod weyl;

pub use error::{Error, Result};
pub use fock::{DirectionVector, SymTensor};
pub use grid::{Axis, GridFunction, GridSpec};
pub use multi::MultiIndex;
pub use symbols::{
    OscillatingAmplitude, OscillatingSymbol, PhaseFunction, ProbePlan, SymbolClass,
};
