//! Fibonacci-lattice sampling of line directions: the brute-force oracle
//! every certificate is checked against.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::VerifyError;
use crate::geometry::{Ball, HitSemantics, MappedBall, Vector3};
use crate::rng;
use crate::scene::SceneConfig;

const CHUNK: usize = 1 << 14;

/// Anything whose intersection with a line through the origin is decided by
/// the sign of a margin.
pub trait LineObstacle: Sync {
    fn line_margin(&self, u: Vector3) -> f64;
}

impl LineObstacle for Ball {
    fn line_margin(&self, u: Vector3) -> f64 {
        Ball::line_margin(self, u)
    }
}

impl LineObstacle for MappedBall {
    fn line_margin(&self, u: Vector3) -> f64 {
        MappedBall::line_margin(self, u)
    }
}

/// A rotation of the direction sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Uniformly random rotation drawn from `seed` (Shoemake's quaternion method).
    pub fn random(seed: u64) -> Rotation {
        let mut g = rng::stream(seed, 0x5eed);
        let (u1, u2, u3): (f64, f64, f64) = (g.random(), g.random(), g.random());
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (w, x, y, z) = (
            a * (2.0 * PI * u2).sin(),
            a * (2.0 * PI * u2).cos(),
            b * (2.0 * PI * u3).sin(),
            b * (2.0 * PI * u3).cos(),
        );
        Rotation([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    pub fn apply(&self, v: Vector3) -> Vector3 {
        let m = &self.0;
        Vector3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

/// Point `i` of the `n`-point Fibonacci lattice on the unit sphere.
pub fn fibonacci_point(i: usize, n: usize) -> Vector3 {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
    let rho = ((1.0 - z) * (1.0 + z)).sqrt();
    let (s, c) = (golden_angle * i as f64).sin_cos();
    Vector3::new(rho * c, rho * s, z)
}

/// The `n`-point lattice, rotated when a jitter seed is given.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    n: usize,
    rotation: Rotation,
}

impl Lattice {
    pub fn new(n: usize, jitter: Option<u64>) -> Self {
        Lattice {
            n,
            rotation: jitter.map_or(Rotation::IDENTITY, Rotation::random),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> Vector3 {
        self.rotation.apply(fibonacci_point(i, self.n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageSample {
    pub samples: usize,
    pub covered: usize,
    pub fraction_covered: f64,
    /// `min_u max_i m_i(u)` over the sampled directions.
    pub min_margin: f64,
    pub argmin_direction: Vector3,
}

#[derive(Debug, Clone, Copy)]
struct Partial {
    covered: usize,
    min_margin: f64,
    argmin: usize,
}

impl Partial {
    const EMPTY: Partial = Partial {
        covered: 0,
        min_margin: f64::INFINITY,
        argmin: usize::MAX,
    };

    fn merge(self, o: Partial) -> Partial {
        let keep_self = (self.min_margin, self.argmin) <= (o.min_margin, o.argmin);
        let (min_margin, argmin) = if keep_self {
            (self.min_margin, self.argmin)
        } else {
            (o.min_margin, o.argmin)
        };
        Partial {
            covered: self.covered + o.covered,
            min_margin,
            argmin,
        }
    }
}

fn max_margin<O: LineObstacle>(obstacles: &[O], u: Vector3) -> f64 {
    obstacles
        .iter()
        .map(|o| o.line_margin(u))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Samples `n` directions and reports coverage for arbitrary obstacles.
pub fn sample_obstacles<O: LineObstacle>(
    obstacles: &[O],
    semantics: HitSemantics,
    n: usize,
    jitter: Option<u64>,
) -> Result<CoverageSample, VerifyError> {
    if obstacles.is_empty() {
        return Err(VerifyError::EmptyScene);
    }
    if n == 0 {
        return Err(VerifyError::NoSamples);
    }
    let lattice = Lattice::new(n, jitter);
    let total = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut p = Partial::EMPTY;
            for i in chunk * CHUNK..((chunk + 1) * CHUNK).min(n) {
                let m = max_margin(obstacles, lattice.point(i));
                if semantics.accepts(m) {
                    p.covered += 1;
                }
                if m < p.min_margin {
                    p.min_margin = m;
                    p.argmin = i;
                }
            }
            p
        })
        .reduce(|| Partial::EMPTY, Partial::merge);
    Ok(CoverageSample {
        samples: n,
        covered: total.covered,
        fraction_covered: total.covered as f64 / n as f64,
        min_margin: total.min_margin,
        argmin_direction: lattice.point(total.argmin),
    })
}

pub fn sample_coverage(cfg: &SceneConfig, n: usize, jitter: Option<u64>) -> Result<CoverageSample, VerifyError> {
    sample_obstacles(cfg.balls(), cfg.semantics(), n, jitter)
}

/// Every sampled direction with its max margin, in lattice order.
pub fn sample_margins(cfg: &SceneConfig, n: usize, jitter: Option<u64>) -> Result<Vec<(Vector3, f64)>, VerifyError> {
    if cfg.balls().is_empty() {
        return Err(VerifyError::EmptyScene);
    }
    let lattice = Lattice::new(n, jitter);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let u = lattice.point(i);
            (u, cfg.max_margin(u))
        })
        .collect())
}
