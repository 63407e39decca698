//! Constructive polynomial approximation in weighted spaces of smooth functions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod config;
pub mod conjugate;
pub mod error;
pub mod fleet;
pub mod flt;
pub mod kernel;
pub mod poly;
pub mod quad;
pub mod report;
pub mod seqspace;
pub mod smoothfn;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};
pub use fleet::{Fleet, FleetFunction};
pub use poly::MultiPoly;
pub use smoothfn::{GridSpec, SharedFn, SmoothFunction};
pub use weights::{Cube, WeightFamily, WeightKind};
