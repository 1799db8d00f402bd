//! Exact solvers for bilateral trade with an informed seller.
//!
//! The seller privately knows `x`, the buyer privately knows `y`, and both
//! valuations are additively separable in the two types. Every quantity is an
//! exact rational.

pub mod benchmarks;
pub mod catalog;
pub mod checks;
pub mod env;
pub mod lp;
pub mod rational;
pub mod refine;
pub mod rsw;

mod program;

pub use rational::Rational;
