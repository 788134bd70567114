//! Multi-wavelength phase ranging.
//!
//! Range is measured by observing the wrapped phase of several sinusoidal
//! signals of different wavelengths. This crate implements:
//!
//! * the least-squares range estimator, computed by solving a closest-point
//!   problem in the dual of the lattice of integer vectors orthogonal to the
//!   reciprocal-wavelength vector ([`estimator`], [`lattice`]);
//! * closed-form accuracy predictions: the mean-square error under correct
//!   phase unwrapping and chi-square bounds on the probability that
//!   unwrapping is correct ([`analysis`]);
//! * a depth-first search that selects wavelength sets minimizing a
//!   mean-square-error criterion under bandwidth and identifiable-range
//!   constraints ([`select`]);
//! * a deterministic Monte-Carlo harness sweeping the noise variance and
//!   recording sample MSE and correct-unwrap rates ([`sim`]).
//!
//! Wavelengths, their least common multiple and the derived integer vectors
//! are kept in exact arbitrary-precision rational arithmetic ([`exact`]);
//! floating-point enters only where a metric decision is made (sphere
//! decoding, objective values, simulation). Numeric kernels are generic over
//! the scalar type via [`real::Real`]; the aliases below fix `f64`.

pub mod analysis;
pub mod estimator;
pub mod exact;
pub mod lattice;
pub mod real;
pub mod select;
pub mod sim;

pub use exact::{gcd_all, lcm_ints, parse_rational, rational_lcm, Integer, Rational};
pub use lattice::{DualLattice, LatticeContext, WavelengthSet};
pub use real::Real;

/// Concrete `f64` instantiations used by the CLI and the simulation harness.
pub type DualLattice64 = lattice::DualLattice<f64>;
pub type LatticeContext64 = lattice::LatticeContext<f64>;
pub type PhaseVector64 = estimator::PhaseVector<f64>;
pub type RangeEstimate64 = estimator::RangeEstimate<f64>;
pub type ErrorPrediction64 = analysis::ErrorPrediction<f64>;
