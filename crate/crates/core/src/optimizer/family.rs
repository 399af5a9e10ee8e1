//! The three-parameter family of configurations on the prolate ellipsoid
//! with axis ratio `z`.
//!
//! `B1` sits at the pole `(0, 0, 1)` of the unit minor circle, `B2` on the
//! same circle at distance `x + y` from it, and `B3` at the tip `(z, 0, 0)`
//! of the major axis with the largest radius that keeps it off `B1` and `B2`
//! for every `x, y <= 1`.

use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::geometry::{Ball, EllipsoidMetric, HitSemantics, Vector3};
use crate::scene::SceneConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FamilyParams {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, OptimizeError> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(unit(x) && unit(y) && z >= 1.0 && z.is_finite()) {
            return Err(OptimizeError::OutOfDomain(format!(
                "family parameters need x, y in (0, 1] and z >= 1, got ({x}, {y}, {z})"
            )));
        }
        Ok(FamilyParams { x, y, z })
    }

    /// Center of `B2`; `s = x + y` is the chord length from `(0, 0, 1)`.
    pub fn second_center(&self) -> Vector3 {
        let s = self.x + self.y;
        let t = (4.0 - s * s).max(0.0);
        Vector3::new(0.0, 0.5 * s * t.sqrt(), 1.0 - 0.5 * s * s)
    }

    pub fn third_radius(&self) -> f64 {
        self.z.hypot(1.0) - 1.0
    }
}

/// The family scene (closed semantics).
pub fn family_config(p: FamilyParams) -> Result<SceneConfig, OptimizeError> {
    let p = FamilyParams::new(p.x, p.y, p.z)?;
    let ellipsoid = EllipsoidMetric::new(p.z)?;
    let balls = vec![
        Ball::new(Vector3::E3, p.x)?,
        Ball::new(p.second_center(), p.y)?,
        Ball::new(Vector3::new(p.z, 0.0, 0.0), p.third_radius())?,
    ];
    Ok(SceneConfig::new(ellipsoid, balls, HitSemantics::Closed)?)
}
