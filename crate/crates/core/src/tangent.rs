//! Common tangent lines of two tangent balls centered on the unit sphere.
//!
//! Ball `B1` sits at `a = (0, 0, 1)` and ball `B2` at `b = (0, b2, b3)` with
//! `|a - b| = r1 + r2`. The unit vector `x = (x1, x2, x3)` along one of the
//! two lines through the origin that touch both balls satisfies
//! `a.x = sqrt(1 - r1^2)` and `b.x = sqrt(1 - r2^2)`. The projections of
//! the two tangent lines onto the `x1 x2` plane enclose the angle
//! `2 atan(x1 / x2)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::Vector3;

/// Squared tangent components down to this negative value are rounding noise
/// (equal radii give exactly zero).
const X1_SQUARED_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TangentError {
    #[error("radii ({r1}, {r2}) must both lie in the open interval (0, 1)")]
    InvalidPair { r1: f64, r2: f64 },
    #[error("cones under balls with radii ({r1}, {r2}) share no tangent line (x1^2 = {x1_squared:e})")]
    NoCommonTangent { r1: f64, r2: f64, x1_squared: f64 },
    #[error("projection angle undefined for x2 = {0} <= 0")]
    NonPositiveX2(f64),
    #[error("theta = {0} is outside the open interval (pi/3, pi)")]
    OutOfDomain(f64),
    #[error("grid size {0} is below the minimum of 16")]
    GridTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentPair {
    r1: f64,
    r2: f64,
}

impl TangentPair {
    pub fn new(r1: f64, r2: f64) -> Result<Self, TangentError> {
        let ok = |r: f64| r > 0.0 && r < 1.0;
        if ok(r1) && ok(r2) {
            Ok(TangentPair { r1, r2 })
        } else {
            Err(TangentError::InvalidPair { r1, r2 })
        }
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentSolution {
    pub b2: f64,
    pub b3: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl TangentSolution {
    pub fn direction(&self) -> Vector3 {
        Vector3::new(self.x1, self.x2, self.x3)
    }

    pub fn ratio(&self) -> f64 {
        self.x1 / self.x2
    }
}

/// Center `(0, b2, b3)` of the second ball, `b3 = 1 - (r1 + r2)^2 / 2`.
pub fn second_center(p: TangentPair) -> (f64, f64) {
    let s = p.r1 + p.r2;
    let b3 = 1.0 - 0.5 * s * s;
    // 1 - b3^2 = s^2 - s^4 / 4, evaluated without cancellation near b3 = -1
    let b2 = (s * s * (1.0 - 0.25 * s * s)).max(0.0).sqrt();
    (b2, b3)
}

/// `sqrt(1 - r^2)` without cancellation for `r` close to one.
fn cos_from_sin(r: f64) -> f64 {
    ((1.0 - r) * (1.0 + r)).sqrt()
}

/// The common tangent direction with `x1 >= 0`; its mirror image in the
/// plane `x1 = 0` is the other one.
pub fn common_tangent_direction(p: TangentPair) -> Result<TangentSolution, TangentError> {
    let (b2, b3) = second_center(p);
    let (r1, r2) = (p.r1, p.r2);
    let (c1, c2) = (cos_from_sin(r1), cos_from_sin(r2));
    let (s, delta) = (r1 + r2, r1 - r2);
    let root = ((2.0 - s) * (2.0 + s)).sqrt();
    // both x2 and r1 - x2 written so the difference of radii factors out
    let x2 = (2.0 * delta / (c1 + c2) + s * c1) / root;
    let gap = delta * ((2.0 * r1 + s) / (r1 * root + s * c1) - 2.0 / (c1 + c2)) / root;
    let x3 = c1;
    let x1_squared = gap * (r1 + x2);
    if x1_squared < -X1_SQUARED_TOL || !x1_squared.is_finite() {
        return Err(TangentError::NoCommonTangent {
            r1: p.r1,
            r2: p.r2,
            x1_squared,
        });
    }
    Ok(TangentSolution {
        b2,
        b3,
        x1: x1_squared.max(0.0).sqrt(),
        x2,
        x3,
    })
}

/// `2 atan(x1 / x2)`, the angle between the projections of the two common
/// tangent lines.
pub fn projection_angle(s: &TangentSolution) -> Result<f64, TangentError> {
    if !(s.x2 > 0.0) {
        return Err(TangentError::NonPositiveX2(s.x2));
    }
    Ok(2.0 * s.ratio().atan())
}

/// Result of scanning `x1 / x2` over the open unit square of radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioScan {
    pub max_ratio: f64,
    pub argmax: (f64, f64),
    /// Largest angle `2 atan(max_ratio)`.
    pub max_angle: f64,
    /// Grid points (coarse and refined) where the ratio was evaluated.
    pub evaluated: u64,
    /// Points skipped because the cones have no common tangent.
    pub no_common_tangent: u64,
    /// Points skipped because `x2 <= 0`.
    pub nonpositive_x2: u64,
    /// Evaluated points with `x1 / x2 >= 1`.
    pub ratio_at_least_one: u64,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    ratio: f64,
    r1: f64,
    r2: f64,
}

impl Cell {
    const NONE: Cell = Cell {
        ratio: f64::NEG_INFINITY,
        r1: f64::INFINITY,
        r2: f64::INFINITY,
    };

    // larger ratio wins; ties go to the lexicographically smallest pair
    fn better(self, other: Cell) -> Cell {
        let key = |c: &Cell| (c.ratio, -c.r1, -c.r2);
        if key(&other).partial_cmp(&key(&self)) == Some(std::cmp::Ordering::Greater) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tally {
    best: Cell,
    evaluated: u64,
    no_tangent: u64,
    nonpositive: u64,
    at_least_one: u64,
}

impl Tally {
    const EMPTY: Tally = Tally {
        best: Cell::NONE,
        evaluated: 0,
        no_tangent: 0,
        nonpositive: 0,
        at_least_one: 0,
    };

    fn merge(self, o: Tally) -> Tally {
        Tally {
            best: self.best.better(o.best),
            evaluated: self.evaluated + o.evaluated,
            no_tangent: self.no_tangent + o.no_tangent,
            nonpositive: self.nonpositive + o.nonpositive,
            at_least_one: self.at_least_one + o.at_least_one,
        }
    }

    fn visit(&mut self, r1: f64, r2: f64) {
        let Ok(pair) = TangentPair::new(r1, r2) else {
            return;
        };
        match common_tangent_direction(pair) {
            Err(_) => self.no_tangent += 1,
            Ok(s) if s.x2 <= 0.0 => self.nonpositive += 1,
            Ok(s) => {
                let ratio = s.ratio();
                self.evaluated += 1;
                if ratio >= 1.0 {
                    self.at_least_one += 1;
                }
                self.best = self.best.better(Cell { ratio, r1, r2 });
            }
        }
    }
}

fn scan_window(n: usize, lo: (f64, f64), hi: (f64, f64)) -> Tally {
    let coord = |k: usize, a: f64, b: f64| {
        if n == 1 {
            0.5 * (a + b)
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    };
    (0..n)
        .into_par_iter()
        .map(|i| {
            let r1 = coord(i, lo.0, hi.0);
            let mut t = Tally::EMPTY;
            for j in 0..n {
                t.visit(r1, coord(j, lo.1, hi.1));
            }
            t
        })
        .reduce(|| Tally::EMPTY, Tally::merge)
}

/// Maximizes `x1 / x2` over the open square `(0, 1)^2`.
///
/// The coarse pass visits the cell centers `(k + 1/2) / grid_n`; each
/// refinement pass re-samples a `grid_n x grid_n` window around the current
/// best point whose width shrinks by a factor of ten per pass. Points without
/// a common tangent or with `x2 <= 0` are skipped and counted.
pub fn max_projection_ratio(grid_n: usize, refine_iters: usize) -> Result<RatioScan, TangentError> {
    if grid_n < 16 {
        return Err(TangentError::GridTooSmall(grid_n));
    }
    let step = 1.0 / grid_n as f64;
    let (lo, hi) = (0.5 * step, 1.0 - 0.5 * step);
    let mut tally = scan_window(grid_n, (lo, lo), (hi, hi));
    let mut half_width = 0.5 * (hi - lo);
    for _ in 0..refine_iters {
        if !tally.best.ratio.is_finite() {
            break;
        }
        half_width *= 0.1;
        let c = (tally.best.r1, tally.best.r2);
        let wlo = ((c.0 - half_width).max(lo), (c.1 - half_width).max(lo));
        let whi = ((c.0 + half_width).min(hi), (c.1 + half_width).min(hi));
        tally = tally.merge(scan_window(grid_n, wlo, whi));
    }
    let best = tally.best;
    Ok(RatioScan {
        max_ratio: best.ratio,
        argmax: (best.r1, best.r2),
        max_angle: 2.0 * best.ratio.atan(),
        evaluated: tally.evaluated,
        no_common_tangent: tally.no_tangent,
        nonpositive_x2: tally.nonpositive,
        ratio_at_least_one: tally.at_least_one,
    })
}

/// Angular width of the equatorial line directions met by a ball centered at
/// `(0, sin t, cos t)` with radius `2 sin(t/2) - 1`, i.e. tangent to the
/// unit ball at `(0, 0, 1)`.
pub fn equator_arc_width(theta: f64) -> Result<f64, TangentError> {
    if !(theta > FRAC_PI_3 && theta < PI) {
        return Err(TangentError::OutOfDomain(theta));
    }
    let half_sin = (0.5 * theta).sin();
    // 1 - r^2 = (1 - r)(1 + r) with 1 - sin(t/2) = 2 sin^2((pi - t) / 4)
    let q = ((PI - theta) * 0.25).sin();
    let one_minus_r_squared = 8.0 * half_sin * q * q;
    let k = one_minus_r_squared.sqrt() / (PI - theta).sin();
    if k >= 1.0 {
        return Ok(0.0);
    }
    Ok(PI - 2.0 * k.asin())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquatorLimit {
    /// `(pi - theta, width)` for a decreasing sequence of offsets.
    pub samples: Vec<(f64, f64)>,
    /// Richardson extrapolation of the last two samples (error is `O(eps^2)`).
    pub extrapolated: f64,
    pub analytic: f64,
}

/// Approaches `theta -> pi` where the width itself is undefined.
pub fn equator_arc_limit(steps: usize) -> EquatorLimit {
    let samples: Vec<(f64, f64)> = (1..=steps.max(2))
        .map(|k| {
            let eps = 10f64.powi(-(k as i32));
            (eps, equator_arc_width(PI - eps).expect("offset inside the domain"))
        })
        .collect();
    let (w_coarse, w_fine) = (samples[samples.len() - 2].1, samples[samples.len() - 1].1);
    EquatorLimit {
        extrapolated: (100.0 * w_fine - w_coarse) / 99.0,
        samples,
        analytic: FRAC_PI_2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(r1: f64, r2: f64) -> TangentPair {
        TangentPair::new(r1, r2).unwrap()
    }

    fn residuals(p: TangentPair, s: &TangentSolution) -> (f64, f64, f64) {
        let a = Vector3::E3;
        let b = Vector3::new(0.0, s.b2, s.b3);
        let x = s.direction();
        (
            (x.dot(a) - cos_from_sin(p.r1())).abs(),
            (x.dot(b) - cos_from_sin(p.r2())).abs(),
            (x.norm() - 1.0).abs(),
        )
    }

    #[test]
    fn second_center_examples() {
        let (b2, b3) = second_center(pair(0.5, 0.5));
        assert!((b3 - 0.5).abs() < 1e-15);
        assert!((b2 - 0.86603).abs() < 1e-5);

        let (b2, b3) = second_center(TangentPair { r1: 1.0, r2: 1.0 });
        assert_eq!((b2, b3), (0.0, -1.0));

        let (b2, b3) = second_center(pair(0.8, 0.5));
        assert!((b3 - 0.155).abs() < 1e-15);
        assert!((b2 - 0.98791).abs() < 1e-5);
        assert!((b2 * b2 + b3 * b3 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_pairs() {
        assert!(TangentPair::new(0.0, 0.5).is_err());
        assert!(TangentPair::new(0.5, 1.0).is_err());
        assert!(TangentPair::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn equal_radii_tangent_lies_in_symmetry_plane() {
        let s = common_tangent_direction(pair(0.6, 0.6)).unwrap();
        assert!(s.x1.abs() < 1e-9);
        assert!((s.x2 - 0.6).abs() < 1e-12);
        assert!((s.x3 - 0.8).abs() < 1e-12);
        assert_eq!(projection_angle(&s).unwrap(), 2.0 * s.ratio().atan());
        assert!(projection_angle(&s).unwrap().abs() < 1e-8);
    }

    #[test]
    fn unequal_radii_tangent() {
        let p = pair(0.8, 0.5);
        let s = common_tangent_direction(p).unwrap();
        assert!((s.x1 - 0.16651).abs() < 1e-4, "{s:?}");
        assert!((s.x2 - 0.78248).abs() < 1e-4);
        assert!((s.x3 - 0.6).abs() < 1e-15);
        let (ra, rb, rn) = residuals(p, &s);
        assert!(ra <= 1e-9 && rb <= 1e-9 && rn <= 1e-9);
        let phi = projection_angle(&s).unwrap();
        assert!((phi - 0.41934).abs() < 1e-4, "{phi}");
    }

    #[test]
    fn small_ball_inside_large_cone_has_no_tangent() {
        let err = common_tangent_direction(pair(0.05, 0.9)).unwrap_err();
        match err {
            TangentError::NoCommonTangent { x1_squared, .. } => {
                assert!((x1_squared - (0.0025 - 0.13418f64.powi(2))).abs() < 1e-4)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn witness_angle_below_right_angle() {
        let s = common_tangent_direction(pair(0.9, 0.3)).unwrap();
        assert!((s.x2 - 0.86655).abs() < 1e-4);
        assert!((s.x1 - 0.24308).abs() < 1e-4);
        assert!((s.ratio() - 0.28052).abs() < 1e-4);
        let phi = projection_angle(&s).unwrap();
        assert!((phi - 0.546_968_54).abs() < 1e-7, "{phi}");
        assert!(phi < FRAC_PI_2);
    }

    #[test]
    fn moderate_radii_exceed_unit_ratio() {
        let s = common_tangent_direction(pair(0.3, 0.9)).unwrap();
        assert!((s.ratio() - 1.382_547_317).abs() < 1e-8, "{}", s.ratio());
        assert!(projection_angle(&s).unwrap() > FRAC_PI_2);
    }

    #[test]
    fn nonpositive_x2_is_reported() {
        let s = TangentSolution {
            b2: 1.0,
            b3: 0.0,
            x1: 0.5,
            x2: -0.1,
            x3: 0.8,
        };
        assert_eq!(projection_angle(&s), Err(TangentError::NonPositiveX2(-0.1)));
    }

    #[test]
    fn ratio_scan_small_grid() {
        // x2 -> 0+ near the NonPositiveX2 boundary, so the ratio is unbounded
        let scan = max_projection_ratio(100, 3).unwrap();
        assert!(scan.max_ratio > 100.0, "{scan:?}");
        assert!(scan.ratio_at_least_one > 0);
        assert!(scan.no_common_tangent > 0);
        assert!(max_projection_ratio(8, 0).is_err());
    }

    #[test]
    fn ratio_scan_is_deterministic() {
        let a = max_projection_ratio(64, 2).unwrap();
        let b = max_projection_ratio(64, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equator_examples() {
        let w = equator_arc_width(2.0 * PI / 3.0).unwrap();
        assert!((w - 1.330_897_546).abs() < 1e-8, "{w}");
        assert_eq!(equator_arc_width(FRAC_PI_3 + 1e-9).unwrap(), 0.0);
        let near = equator_arc_width(PI - 1e-4).unwrap();
        assert!((FRAC_PI_2 - 1e-3..=FRAC_PI_2).contains(&near));
        assert!(equator_arc_width(FRAC_PI_3).is_err());
        assert!(equator_arc_width(PI).is_err());
    }

    #[test]
    fn equator_width_matches_plane_section() {
        // width = 2 asin(sqrt(r^2 - cos^2 t) / sin t) when the ball meets the plane
        for t in [1.7f64, 2.0, 2.5, 3.0] {
            let r = 2.0 * (0.5 * t).sin() - 1.0;
            let direct = 2.0 * ((r * r - t.cos().powi(2)).sqrt() / t.sin()).asin();
            assert!((equator_arc_width(t).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn equator_limit_extrapolates_to_right_angle() {
        let lim = equator_arc_limit(6);
        assert!((lim.extrapolated - FRAC_PI_2).abs() < 1e-9);
        assert!(lim.samples.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
