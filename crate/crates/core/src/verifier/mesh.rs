//! Rigorous cap-covering certificate on an icosphere mesh.
//!
//! Each ball covers the two antipodal caps of angular radius `alpha_i` around
//! `±c_i/|c_i|`. The slack `s(v) = max_i (alpha_i - dist(v, ±axis_i))` is
//! 1-Lipschitz in geodesic distance, so a spherical triangle lying inside a
//! cap of radius `R` around `p` is covered as soon as `s(p) >= R`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::VerifyError;
use crate::geometry::{angle_to_line, Ball, HitSemantics, Vector3, PREDICATE_TOL};
use crate::scene::SceneConfig;

/// Inflation of every covering radius, absorbing rounding in the angles.
const RADIUS_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Cap {
    axis: Vector3,
    alpha: f64,
}

#[derive(Debug, Clone)]
struct Caps {
    caps: Vec<Cap>,
    /// Some ball covers every direction on its own.
    everything: bool,
}

impl Caps {
    fn new(balls: &[Ball], semantics: HitSemantics) -> Caps {
        let everything = balls.iter().any(|b| {
            let h2 = b.tangent_length_squared();
            match semantics {
                HitSemantics::Closed => h2 <= 0.0,
                HitSemantics::Open => h2 < -PREDICATE_TOL,
            }
        });
        let caps = balls
            .iter()
            .map(|b| Cap {
                axis: b.center().normalized(),
                alpha: b.radius().atan2(b.tangent_length_squared().max(0.0).sqrt()),
            })
            .collect();
        Caps { caps, everything }
    }

    fn slack(&self, v: Vector3) -> f64 {
        self.caps
            .iter()
            .map(|c| c.alpha - angle_to_line(v, c.axis))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn covers(slack: f64, radius: f64, semantics: HitSemantics) -> bool {
    match semantics {
        HitSemantics::Closed => slack >= radius,
        HitSemantics::Open => slack > radius,
    }
}

/// Geodesic circumcenter and circumradius of a spherical triangle.
fn circumcap(a: Vector3, b: Vector3, c: Vector3) -> (Vector3, f64) {
    let mut n = (b - a).cross(c - a).normalized();
    if n.dot(a + b + c) < 0.0 {
        n = -n;
    }
    let dist = |v: Vector3| n.cross(v).norm().atan2(n.dot(v));
    let r = dist(a).max(dist(b)).max(dist(c));
    (n, r * (1.0 + 1e-12) + RADIUS_GUARD)
}

#[derive(Debug, Clone)]
pub struct Icosphere {
    pub vertices: Vec<Vector3>,
    pub triangles: Vec<[u32; 3]>,
}

impl Icosphere {
    pub fn new(level: u32) -> Icosphere {
        let t = 0.5 * (1.0 + 5f64.sqrt());
        let vertices: Vec<Vector3> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .into_iter()
        .map(|p| Vector3::from(p).normalized())
        .collect();
        let triangles = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let mut mesh = Icosphere { vertices, triangles };
        for _ in 0..level {
            mesh.subdivide();
        }
        mesh
    }

    fn subdivide(&mut self) {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        let vertices = &mut self.vertices;
        let mut mid = |a: u32, b: u32| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push((vertices[a as usize] + vertices[b as usize]).normalized());
                (vertices.len() - 1) as u32
            })
        };
        for &[a, b, c] in &self.triangles {
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            triangles.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        self.triangles = triangles;
    }

    /// Largest triangle circumradius (inflated): every point of the sphere
    /// lies within this distance of some vertex.
    pub fn covering_radius(&self) -> f64 {
        self.triangles
            .par_iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                circumcap(a, b, c).1
            })
            .reduce(|| 0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    pub level: u32,
    pub vertices: usize,
    pub covering_radius: f64,
    /// `min_v slack(v) - h`; the certificate holds when this is nonnegative
    /// (positive under open semantics).
    pub min_excess: f64,
    pub certified: bool,
    /// A vertex whose line misses every cap, if one was met.
    pub uncovered_vertex: Option<Vector3>,
}

/// Uniform icosphere test at one subdivision level.
pub fn mesh_certificate(cfg: &SceneConfig, level: u32) -> Result<MeshReport, VerifyError> {
    if cfg.balls().is_empty() {
        return Err(VerifyError::EmptyScene);
    }
    let caps = Caps::new(cfg.balls(), cfg.semantics());
    let mesh = Icosphere::new(level);
    let h = mesh.covering_radius();
    if caps.everything {
        return Ok(MeshReport {
            level,
            vertices: mesh.vertices.len(),
            covering_radius: h,
            min_excess: f64::INFINITY,
            certified: true,
            uncovered_vertex: None,
        });
    }
    let (slack, index) = mesh
        .vertices
        .par_iter()
        .enumerate()
        .map(|(i, &v)| (caps.slack(v), i))
        .reduce(|| (f64::INFINITY, usize::MAX), |a, b| if b < a { b } else { a });
    let v = mesh.vertices[index];
    Ok(MeshReport {
        level,
        vertices: mesh.vertices.len(),
        covering_radius: h,
        min_excess: slack - h,
        certified: covers(slack, h, cfg.semantics()),
        uncovered_vertex: (slack < 0.0).then_some(v),
    })
}

/// `true` certifies that every line through the origin meets a ball.
pub fn certified_cover_mesh(cfg: &SceneConfig, level: u32) -> Result<bool, VerifyError> {
    Ok(mesh_certificate(cfg, level)?.certified)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Icosphere level the refinement starts from.
    pub base_level: u32,
    /// Subdivisions allowed below the base level.
    pub max_depth: u32,
    /// Total triangles that may be examined.
    pub max_triangles: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            base_level: 3,
            max_depth: 40,
            max_triangles: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveReport {
    pub certified: bool,
    pub triangles_examined: usize,
    pub deepest_level: u32,
    /// Smallest circumradius among covered triangles.
    pub finest_radius: f64,
    pub uncovered_vertex: Option<Vector3>,
    /// The budget or the depth limit ran out before a decision.
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
struct Subtree {
    examined: usize,
    deepest: u32,
    finest: f64,
    uncovered: Option<Vector3>,
    exhausted: bool,
}

fn refine(caps: &Caps, root: [Vector3; 3], semantics: HitSemantics, max_depth: u32, budget: usize) -> Subtree {
    let mut out = Subtree {
        examined: 0,
        deepest: 0,
        finest: f64::INFINITY,
        uncovered: None,
        exhausted: false,
    };
    let mut stack = vec![(root, 0u32)];
    while let Some(([a, b, c], depth)) = stack.pop() {
        if out.examined >= budget {
            out.exhausted = true;
            return out;
        }
        out.examined += 1;
        out.deepest = out.deepest.max(depth);
        let (p, r) = circumcap(a, b, c);
        if covers(caps.slack(p), r, semantics) {
            out.finest = out.finest.min(r);
            continue;
        }
        for v in [a, b, c] {
            if caps.slack(v) < 0.0 {
                out.uncovered = Some(v);
                return out;
            }
        }
        if depth >= max_depth || !(r > 1e-15) {
            out.exhausted = true;
            return out;
        }
        let (ab, bc, ca) = ((a + b).normalized(), (b + c).normalized(), (c + a).normalized());
        stack.extend([
            ([a, ab, ca], depth + 1),
            ([b, bc, ab], depth + 1),
            ([c, ca, bc], depth + 1),
            ([ab, bc, ca], depth + 1),
        ]);
    }
    out
}

/// Covering test with per-triangle refinement where the slack is thin.
pub fn adaptive_cover(cfg: &SceneConfig, opts: &AdaptiveOptions) -> Result<AdaptiveReport, VerifyError> {
    if cfg.balls().is_empty() {
        return Err(VerifyError::EmptyScene);
    }
    let caps = Caps::new(cfg.balls(), cfg.semantics());
    if caps.everything {
        return Ok(AdaptiveReport {
            certified: true,
            triangles_examined: 0,
            deepest_level: opts.base_level,
            finest_radius: f64::INFINITY,
            uncovered_vertex: None,
            exhausted: false,
        });
    }
    let mesh = Icosphere::new(opts.base_level);
    let budget = (opts.max_triangles / mesh.triangles.len()).max(1);
    let subtrees: Vec<Subtree> = mesh
        .triangles
        .par_iter()
        .map(|t| {
            let tri = t.map(|i| mesh.vertices[i as usize]);
            refine(&caps, tri, cfg.semantics(), opts.max_depth, budget)
        })
        .collect();
    let uncovered_vertex = subtrees.iter().find_map(|s| s.uncovered);
    let exhausted = subtrees.iter().any(|s| s.exhausted);
    Ok(AdaptiveReport {
        certified: uncovered_vertex.is_none() && !exhausted,
        triangles_examined: subtrees.iter().map(|s| s.examined).sum(),
        deepest_level: opts.base_level + subtrees.iter().map(|s| s.deepest).max().unwrap_or(0),
        finest_radius: subtrees.iter().map(|s| s.finest).fold(f64::INFINITY, f64::min),
        uncovered_vertex,
        exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EllipsoidMetric;

    fn orthogonal(r: f64, sem: HitSemantics) -> SceneConfig {
        let balls = [Vector3::E1, Vector3::E2, Vector3::E3]
            .map(|c| Ball::new(c, r).unwrap())
            .to_vec();
        SceneConfig::new(EllipsoidMetric::SPHERE, balls, sem).unwrap()
    }

    #[test]
    fn icosphere_counts_and_radius() {
        for level in 0..5 {
            let m = Icosphere::new(level);
            assert_eq!(m.triangles.len(), 20 * 4usize.pow(level));
            assert_eq!(m.vertices.len(), 10 * 4usize.pow(level) + 2);
        }
        // the icosahedron's circumradius: the angle between a face center and a vertex
        let h0 = Icosphere::new(0).covering_radius();
        assert!((h0 - 0.652_358_139_784_368_2).abs() < 1e-9, "{h0}");
        let h5 = Icosphere::new(5).covering_radius();
        assert!(h5 < h0 / 20.0);
    }

    #[test]
    fn single_ball_is_never_certified() {
        let cfg = SceneConfig::new(
            EllipsoidMetric::SPHERE,
            vec![Ball::new(Vector3::E3, 0.9).unwrap()],
            HitSemantics::Closed,
        )
        .unwrap();
        for level in 0..6 {
            let rep = mesh_certificate(&cfg, level).unwrap();
            assert!(!rep.certified);
            assert!(rep.uncovered_vertex.is_some());
        }
        let rep = adaptive_cover(&cfg, &AdaptiveOptions::default()).unwrap();
        assert!(!rep.certified && rep.uncovered_vertex.is_some());
    }

    #[test]
    fn large_orthogonal_balls_are_certified_and_monotone() {
        let cfg = orthogonal(0.9, HitSemantics::Closed);
        let first = (0..7).find(|&l| certified_cover_mesh(&cfg, l).unwrap()).unwrap();
        for level in first..first + 2 {
            assert!(certified_cover_mesh(&cfg, level).unwrap());
        }
        assert!(adaptive_cover(&cfg, &AdaptiveOptions::default()).unwrap().certified);
    }

    #[test]
    fn exact_tangency_cannot_be_certified_by_a_mesh() {
        let cfg = orthogonal((2.0f64 / 3.0).sqrt(), HitSemantics::Closed);
        assert!(!certified_cover_mesh(&cfg, 4).unwrap());
        let opts = AdaptiveOptions {
            max_triangles: 200_000,
            ..AdaptiveOptions::default()
        };
        let rep = adaptive_cover(&cfg, &opts).unwrap();
        assert!(!rep.certified);
    }

    #[test]
    fn ball_holding_the_center_covers_everything() {
        let mut balls = orthogonal(0.3, HitSemantics::Closed).balls().to_vec();
        balls.push(Ball::new(Vector3::new(0.0, -1.0, 0.0), 1.2).unwrap());
        let cfg = SceneConfig::new(EllipsoidMetric::SPHERE, balls, HitSemantics::Closed).unwrap();
        assert!(certified_cover_mesh(&cfg, 0).unwrap());
    }
}
