//! Deciding whether a set of balls casts shadow on the origin.

mod mesh;
mod minimax;
mod sampling;
mod sign_system;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use mesh::{
    adaptive_cover, certified_cover_mesh, mesh_certificate, AdaptiveOptions, AdaptiveReport, Icosphere, MeshReport,
};
pub use minimax::{
    critical_directions, descend, find_missing_line, minimax_search, qualifies_as_witness, MinimaxOptions,
    MinimaxPoint, Witness, CLOSED_WITNESS_MARGIN,
};
pub use sampling::{
    fibonacci_point, sample_coverage, sample_margins, sample_obstacles, CoverageSample, Lattice, LineObstacle,
    Rotation,
};
pub use sign_system::{
    cone_cover_certificate, solve_all_patterns, solve_sign_system, ConeIntersection, ConeSystemSolution,
    SignPattern, SINGULAR_TOL, TANGENCY_TOL,
};

use crate::geometry::{Ball, HitSemantics, Vector3};
use crate::scene::SceneConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("the scene has no balls")]
    EmptyScene,
    #[error("at least one sample direction is required")]
    NoSamples,
    #[error("the ball centers are coplanar with the origin")]
    SingularSystem,
    #[error("ball {0} contains the origin")]
    BallContainsCenter(usize),
    #[error("the sign-pattern certificate needs exactly 3 balls, got {0}")]
    NeedThreeBalls(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateMethod {
    SignPattern,
    Mesh,
}

impl fmt::Display for CertificateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateMethod::SignPattern => "sign-pattern",
            CertificateMethod::Mesh => "mesh",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedShadow {
        method: CertificateMethod,
    },
    CertifiedNoShadow {
        witness: Witness,
    },
    Undecided {
        best_margin: f64,
        best_direction: Vector3,
    },
}

impl Verdict {
    pub fn is_shadow(&self) -> bool {
        matches!(self, Verdict::CertifiedShadow { .. })
    }

    pub fn is_no_shadow(&self) -> bool {
        matches!(self, Verdict::CertifiedNoShadow { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::CertifiedNoShadow { witness } => Some(witness),
            _ => None,
        }
    }

    /// Same decision, ignoring witnesses and margins.
    pub fn same_kind(&self, other: &Verdict) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::CertifiedShadow { method } => write!(f, "certified shadow ({method})"),
            Verdict::CertifiedNoShadow { witness } => write!(f, "certified no shadow (witness {})", witness.direction),
            Verdict::Undecided { best_margin, .. } => write!(f, "undecided (best margin {best_margin:e})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Uniform mesh levels `0..=mesh_max_level` are tried in turn.
    pub mesh_max_level: u32,
    /// Local refinement after the uniform levels; `None` skips it.
    pub adaptive: Option<AdaptiveOptions>,
    pub witness_starts: usize,
    pub witness_iters: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            mesh_max_level: 5,
            adaptive: Some(AdaptiveOptions::default()),
            witness_starts: 32,
            witness_iters: 300,
            seed: 0,
        }
    }
}

impl VerifyOptions {
    /// Certificates and witness search without the expensive refinement.
    pub fn fast() -> Self {
        VerifyOptions {
            mesh_max_level: 3,
            adaptive: None,
            ..VerifyOptions::default()
        }
    }
}

fn sign_pattern_holds(balls: &[Ball]) -> bool {
    let Ok(three) = <&[Ball; 3]>::try_from(balls) else {
        return false;
    };
    // a ball holding the origin or coplanar centers leave the decision to the mesh
    cone_cover_certificate(three).unwrap_or(false)
}

/// Full decision pipeline: sign-pattern certificate, mesh certificate,
/// witness search.
pub fn verify(cfg: &SceneConfig, opts: &VerifyOptions) -> Result<Verdict, VerifyError> {
    let balls = cfg.balls();
    if balls.is_empty() {
        return Err(VerifyError::EmptyScene);
    }
    let shadow = |method| Ok(Verdict::CertifiedShadow { method });
    if cfg.semantics() == HitSemantics::Closed && sign_pattern_holds(balls) {
        return shadow(CertificateMethod::SignPattern);
    }

    let mut vertex_witness = None;
    for level in 0..=opts.mesh_max_level {
        let rep = mesh_certificate(cfg, level)?;
        if rep.certified {
            return shadow(CertificateMethod::Mesh);
        }
        if let Some(v) = rep.uncovered_vertex {
            vertex_witness = Some(v);
            break;
        }
    }
    if vertex_witness.is_none() {
        if let Some(adaptive) = &opts.adaptive {
            let rep = adaptive_cover(cfg, adaptive)?;
            if rep.certified {
                return shadow(CertificateMethod::Mesh);
            }
            vertex_witness = rep.uncovered_vertex;
        }
    }

    let search = MinimaxOptions {
        starts: opts.witness_starts.max(1),
        iters: opts.witness_iters,
        seed: Some(opts.seed),
        probes: 0,
        critical: true,
    };
    let mut best = minimax_search(balls, &search)?;
    if let Some(v) = vertex_witness {
        let value = cfg.max_margin(v);
        if value < best.value {
            best = MinimaxPoint { direction: v, value };
        }
    }
    if qualifies_as_witness(best.value, cfg.semantics()) {
        if let Some(witness) = Witness::verify(best.direction, balls, cfg.semantics()) {
            return Ok(Verdict::CertifiedNoShadow { witness });
        }
    }
    Ok(Verdict::Undecided {
        best_margin: best.value,
        best_direction: best.direction,
    })
}
