//! Matrix-weighted dyadic harmonic analysis on finite trees.
//!
//! The library works over the unit interval [0, 1) cut into a dyadic tree of
//! depth N. Functions are piecewise-constant vector fields at leaf
//! resolution; weights are piecewise-constant symmetric positive definite
//! matrix fields. On top of the Haar transform it computes, exactly at finite
//! scale, the quantities that weighted-norm inequalities are about:
//!
//! - the matrix A2 characteristic of a weight,
//! - two-sided constants for the weighted square function,
//! - weighted operator norms of the dyadic shift and of Haar multipliers,
//! - embedding sums, Carleson embedding vs. testing constants, and the
//!   weighted testing ratio,
//! - eigenvalue truncations of a weight and the dyadic weighted maximal
//!   function.
//!
//! `experiments` sweeps weight families against these quantities and fits
//! empirical growth exponents; `verify` bundles the self-check suite that the
//! command-line front end exposes.

pub mod bounds;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod matlin;
pub mod operators;
pub mod scalar;
pub mod verify;
pub mod weights;

pub use bounds::{BoundsReport, CarlesonSequence, Method, OperatorKind};
pub use dyadic::{DyadicIndex, HaarSpectrum, VectorField};
pub use error::{Error, Result};
pub use matlin::{EigenDecomp, Matrix, SymMatrix};
pub use operators::{DisbalancedBasis, MultiplierSymbol};
pub use weights::{AveragesTree, WeightFamily, WeightField};
