//! Shadow of balls centered on a prolate ellipsoid: predicates, certificates
//! and the search for the smallest axis ratio admitting three-ball shadow.

// `!(x > y)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod rng;
pub mod scene;
pub mod tangent;
pub mod verifier;
pub mod optimizer;
