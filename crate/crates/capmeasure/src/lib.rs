//! Numerical toolkit for smoothness capacities and generalized Hausdorff
//! contents on finite metric measure spaces.
//!
//! A space is a finite point set with an explicit metric and strictly positive
//! point weights.  On top of it the crate provides:
//!
//! * weighted `gamma`-medians and their calculus ([`median`]),
//! * fractional `s`-gradient sequences indexed by dyadic distance shells,
//!   together with product rules and a Poincaré-type scale transform
//!   ([`gradient`]),
//! * an upper solver for the Triebel–Lizorkin-type capacity
//!   `cap(E) = inf { ||u||^p : u >= 1 on E }` ([`capacity`]),
//! * gauge functions, exact and greedy covering contents, and the `5B`
//!   covering lemma ([`hausdorff`]),
//! * end-to-end experiments tying capacity to content and median convergence
//!   ([`verify`]),
//! * a deterministic command line front end ([`cli`]).
//!
//! All randomized routines take explicit seeds and all serialized output is
//! byte-deterministic for a fixed configuration.

#![forbid(unsafe_code)]

pub mod capacity;
pub mod cli;
pub mod error;
pub mod gradient;
pub mod hausdorff;
pub mod jsonio;
pub mod median;
#[doc(hidden)]
pub mod reference;
pub mod space;
pub mod verify;

pub use error::{Error, Result};
pub use space::{MetricMeasureSpace, Params, ScaleWindow};
