use serde::Serialize;

use crate::geometry::HitSemantics;
use crate::scene::{SceneConfig, SURFACE_TOL};

/// Slack allowed on `|a_i - a_j| >= r_i + r_j` so exactly tangent balls pass.
pub const OVERLAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    OffSurface { ball: usize, deviation: f64 },
    Overlap { first: usize, second: usize, depth: f64 },
    CenterExclusion { ball: usize, center_norm: f64, radius: f64 },
}

impl Violation {
    /// Size of the violation, used as a penalty.
    pub fn magnitude(&self) -> f64 {
        match *self {
            Violation::OffSurface { deviation, .. } => deviation,
            Violation::Overlap { depth, .. } => depth,
            Violation::CenterExclusion { center_norm, radius, .. } => (radius - center_norm).max(0.0),
        }
    }
}

/// Every constraint the configuration breaks; empty means feasible.
pub fn feasibility_check(cfg: &SceneConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let balls = cfg.balls();
    for (i, b) in balls.iter().enumerate() {
        let deviation = cfg.ellipsoid().surface_deviation(b.center());
        if !(deviation <= SURFACE_TOL) {
            out.push(Violation::OffSurface { ball: i, deviation });
        }
    }
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let gap = (balls[i].center() - balls[j].center()).norm() - balls[i].radius() - balls[j].radius();
            if gap < -OVERLAP_TOL {
                out.push(Violation::Overlap {
                    first: i,
                    second: j,
                    depth: -gap,
                });
            }
        }
    }
    for (i, b) in balls.iter().enumerate() {
        let (center_norm, radius) = (b.center().norm(), b.radius());
        let excluded = match cfg.semantics() {
            HitSemantics::Closed => center_norm > radius,
            HitSemantics::Open => center_norm >= radius,
        };
        if !excluded {
            out.push(Violation::CenterExclusion { ball: i, center_norm, radius });
        }
    }
    out
}
