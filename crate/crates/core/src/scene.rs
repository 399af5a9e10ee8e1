use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Ball, EllipsoidMetric, HitSemantics, Vector3};

/// Ball centers must lie on the ellipsoid surface to within this distance.
pub const SURFACE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("center of ball {index} is off the ellipsoid surface by {deviation:e}")]
    OffSurface { index: usize, deviation: f64 },
}

/// Balls centered on a prolate ellipsoid, plus the hit semantics used to
/// decide whether a line meets them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneConfig {
    ellipsoid: EllipsoidMetric,
    balls: Vec<Ball>,
    semantics: HitSemantics,
}

impl SceneConfig {
    pub fn new(ellipsoid: EllipsoidMetric, balls: Vec<Ball>, semantics: HitSemantics) -> Result<Self, SceneError> {
        for (index, b) in balls.iter().enumerate() {
            let deviation = ellipsoid.surface_deviation(b.center());
            if !(deviation <= SURFACE_TOL) {
                return Err(SceneError::OffSurface { index, deviation });
            }
        }
        Ok(SceneConfig {
            ellipsoid,
            balls,
            semantics,
        })
    }

    pub fn ellipsoid(&self) -> EllipsoidMetric {
        self.ellipsoid
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn semantics(&self) -> HitSemantics {
        self.semantics
    }

    pub fn with_semantics(mut self, semantics: HitSemantics) -> Self {
        self.semantics = semantics;
        self
    }

    /// `max_i m_i(u)` over the balls; `-inf` for an empty scene.
    pub fn max_margin(&self, u: Vector3) -> f64 {
        max_margin(&self.balls, u)
    }

    /// Per-ball margins of the line spanned by the unit direction `u`.
    pub fn margins(&self, u: Vector3) -> Vec<f64> {
        self.balls.iter().map(|b| b.line_margin(u)).collect()
    }
}

#[inline]
pub fn max_margin(balls: &[Ball], u: Vector3) -> f64 {
    balls
        .iter()
        .map(|b| b.line_margin(u))
        .fold(f64::NEG_INFINITY, f64::max)
}
