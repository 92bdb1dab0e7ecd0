//! Core algorithms for detecting causal drivers of a target under hidden
//! confounding by measuring how stable the regression coefficients of the
//! candidate causes are across many selections of background features.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. The `std` feature adds classical OLS p-values; `parallel` runs
//! permutation replicates on rayon.
//!
//! Index convention: every feature index in this crate is 0-based.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod permtest;
pub mod pipeline;
pub mod regression;
pub mod rng;
pub mod selection;
pub mod sem;
pub mod stability;

pub use data::{Dataset, SubsetFamily};
pub use error::{Error, Result};
pub use permtest::{permutation_test, PermutationTestResult};
pub use stability::{stability_statistic, CoefficientSet};
