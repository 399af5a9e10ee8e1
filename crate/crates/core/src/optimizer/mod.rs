//! Constrained search for the smallest prolate ellipsoid on which three
//! non-overlapping balls can shadow the center.

mod family;
mod feasibility;
mod nelder_mead;
mod search;

use thiserror::Error;

pub use family::{family_config, FamilyParams};
pub use feasibility::{feasibility_check, Violation, OVERLAP_TOL};
pub use nelder_mead::{minimize as nelder_mead, Minimum};
pub use search::{
    best_config_for_d, best_config_with_warm_starts, family_warm_start, min_axis_ratio, shadow_margin,
    stretch_scene, thorough_effort, BestConfig, OptimizationResult, Probe, SearchOptions, RADIUS_GAP, THETA_MIN,
};

use crate::geometry::GeometryError;
use crate::scene::SceneError;
use crate::verifier::VerifyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("{0}")]
    OutOfDomain(String),
    #[error("{0}")]
    InvalidOptions(String),
    #[error(
        "bracket ({low}, {high}) does not straddle the threshold: margins {margin_low:e} at the low end, {margin_high:e} at the high end"
    )]
    BadBracket {
        low: f64,
        high: f64,
        margin_low: f64,
        margin_high: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}
