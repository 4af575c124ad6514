//! Weak values, ABL probabilities and Gaussian-pointer meters for
//! pre- and post-selected finite-dimensional quantum systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsl;
pub mod hilbert;
pub mod measure;
pub mod meter;
pub mod par;
pub mod scenarios;

mod eigen;
