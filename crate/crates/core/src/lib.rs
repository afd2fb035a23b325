//! Numerical toolkit for the one-dimensional nonlinear stochastic heat
//! equation driven by space-time white noise, with signed Borel measures as
//! initial data (the parabolic Anderson model being the central case).
//!
//! The crate provides four layers that cross-validate each other:
//!
//! * closed-form second moments, two-point correlations and p-th moment
//!   bounds ([`moments`]), built on the scalar kernels of [`kernels`] and the
//!   special functions of [`special`];
//! * independent adaptive-quadrature evaluators for the same quantities
//!   ([`quad`], [`moments::second_moment_quadrature`]);
//! * a deterministic Picard fixed-point iteration for the second moment on a
//!   space-time grid ([`picard`]), which doubles as a divergence detector for
//!   initial data rougher than a measure;
//! * a lattice Monte Carlo simulator with a counter-based RNG ([`sim`],
//!   [`rng`]) for statistical validation and Hölder-exponent estimation.
//!
//! Growth indices and moment Lyapunov exponents live in [`growth`].
//!
//! The crate is `no_std`-compatible (allocation required); enable the `libm`
//! feature when building without `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
// `!(x > 0.0)` guards reject NaN along with the out-of-range values;
// rewriting them per the lint would silently admit NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_is_multiple_of)]
// Coefficient tables (Cody, AS 241, QUADPACK) keep their published digits.
#![allow(clippy::excessive_precision)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature");

extern crate alloc;

pub mod growth;
pub mod kernels;
pub(crate) mod math;
pub mod measure;
pub mod moments;
pub mod picard;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;

pub use kernels::{GrowthEnvelope, KernelParams};
pub use measure::InitialMeasure;
pub use moments::MomentRequest;
pub use sim::{LatticeField, MomentEstimate, RhoSpec, SimConfig};
