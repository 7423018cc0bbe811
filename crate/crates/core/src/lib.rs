//! Noise semigroups and orthogonal decompositions on finite product
//! probability spaces.
//!
//! A [`ProductSpace`] is an ordered list of finite probability spaces
//! (factors). Complex-valued random variables on the product carry the usual
//! L2 inner product, and every subset `A` of factor indices induces a
//! conditional-expectation projection `E_A` onto the functions measurable in
//! the factors of `A`. These projections commute and diagonalize jointly:
//! L2 splits into the orthogonal sum of spaces `H_A`, one per subset, where
//! `H_A` holds the part of a function that depends on exactly the factors in
//! `A` (the Efron-Stein decomposition, [`efron_stein`]).
//!
//! On top of the decomposition sits the noise semigroup `U_t` ([`noise`]),
//! which damps the level-`n` part of a function by `e^{-nt}`; equivalently it
//! averages `E_A` over a Bernoulli-distributed random subset `A` with
//! per-atom retention probability `p = e^{-t}`. Both computations are
//! implemented and cross-checked. The semigroup's generator, Monte-Carlo
//! resampling estimators for the noise quadratic form, coarse semigroups over
//! partitions of the factors with their monotonicity relations ([`towers`]),
//! and the random-walk-on-`Z_p` example with its closed-form sensitivity
//! decay ([`zp_walk`]) complete the toolkit.
//!
//! The crate is `no_std` (requires `alloc`); all types are immutable after
//! construction and every operation is a pure function of its inputs.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod efron_stein;
mod error;
pub mod noise;
pub mod rng;
pub mod space;
pub mod towers;
pub mod zp_walk;

pub use error::Error;
pub use space::{FactorSpace, ProductSpace, RandomVariable, SubsetIndex};

pub use num_complex::Complex64;

/// Default hard cap on `total_states` of a [`ProductSpace`].
///
/// Every operation in this crate is dense over the state space, so spaces
/// beyond desk scale are refused at construction. Use
/// [`ProductSpace::with_max_states`] to override.
pub const MAX_STATES: usize = 1 << 24;

/// Default tolerance for operator-identity checks (relative scale).
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default absolute tolerance on the defect norm for H1 membership.
pub const H1_DEFAULT_TOL: f64 = 1e-8;
