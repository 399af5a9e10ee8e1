//! The sign-pattern certificate for three balls.
//!
//! For a sign pattern `s` the linear system `(a_i, x) = s_i sqrt(|a_i|^2 - r_i^2)`
//! has a unique solution when the centers are linearly independent. If
//! `|x| <= 1` the nappes `s_1 K_1, s_2 K_2, s_3 K_3` of the three cones share
//! the ray through `x`; when this holds for all eight patterns the six nappes
//! cover every direction.

use std::fmt;

use serde::Serialize;

use super::VerifyError;
use crate::geometry::{det3, inverse3, Ball, Vector3};

/// Tolerance on `|x| - 1` separating the three classes.
pub const TANGENCY_TOL: f64 = 1e-9;

/// Relative determinant below which the centers count as coplanar with the origin.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SignPattern(pub [i8; 3]);

impl SignPattern {
    /// All eight patterns; pattern `k` and `7 - k` are negations of each other.
    pub fn all() -> [SignPattern; 8] {
        let mut out = [SignPattern([1; 3]); 8];
        for (k, p) in out.iter_mut().enumerate() {
            for bit in 0..3 {
                p.0[bit] = if k >> (2 - bit) & 1 == 1 { -1 } else { 1 };
            }
        }
        out
    }

    pub fn negated(self) -> SignPattern {
        SignPattern(self.0.map(|s| -s))
    }

    pub fn sign(self, i: usize) -> f64 {
        f64::from(self.0[i])
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |s: i8| if s > 0 { '+' } else { '-' };
        write!(f, "({},{},{})", c(self.0[0]), c(self.0[1]), c(self.0[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeIntersection {
    /// `|x| = 1`: `x` lies on a line tangent to all three cones.
    TangentLine,
    /// `|x| < 1`: the three nappes share the ray through `x`.
    CommonRay,
    /// `|x| > 1`: the nappes meet only at the origin.
    TrivialIntersection,
    /// The centers are coplanar with the origin.
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeSystemSolution {
    pub pattern: SignPattern,
    /// Zero when the system is singular.
    pub x: Vector3,
    /// `NaN` when the system is singular.
    pub norm_x: f64,
    pub class: ConeIntersection,
    /// Max-norm residual of the linear system.
    pub residual: f64,
}

fn require_outside(balls: &[Ball; 3]) -> Result<[f64; 3], VerifyError> {
    let mut rhs = [0.0; 3];
    for (i, b) in balls.iter().enumerate() {
        let t = b.tangent_length_squared();
        if !(t > 0.0) {
            return Err(VerifyError::BallContainsCenter(i));
        }
        rhs[i] = t.sqrt();
    }
    Ok(rhs)
}

pub fn solve_sign_system(balls: &[Ball; 3], s: SignPattern) -> Result<ConeSystemSolution, VerifyError> {
    let tangents = require_outside(balls)?;
    let rows = balls.map(|b| b.center().to_array());
    let scale: f64 = balls.iter().map(|b| b.center().norm()).product();
    let det = det3(&rows);
    let singular = ConeSystemSolution {
        pattern: s,
        x: Vector3::ZERO,
        norm_x: f64::NAN,
        class: ConeIntersection::Singular,
        residual: f64::NAN,
    };
    if det.abs() <= SINGULAR_TOL * scale {
        return Ok(singular);
    }
    let Some((inv, _)) = inverse3(&rows) else {
        return Ok(singular);
    };
    let rhs = [0, 1, 2].map(|i| s.sign(i) * tangents[i]);
    let x = Vector3::new(
        inv[0][0] * rhs[0] + inv[0][1] * rhs[1] + inv[0][2] * rhs[2],
        inv[1][0] * rhs[0] + inv[1][1] * rhs[1] + inv[1][2] * rhs[2],
        inv[2][0] * rhs[0] + inv[2][1] * rhs[1] + inv[2][2] * rhs[2],
    );
    let residual = (0..3)
        .map(|i| (balls[i].center().dot(x) - rhs[i]).abs())
        .fold(0.0, f64::max);
    let norm_x = x.norm();
    let class = if (norm_x - 1.0).abs() <= TANGENCY_TOL {
        ConeIntersection::TangentLine
    } else if norm_x < 1.0 {
        ConeIntersection::CommonRay
    } else {
        ConeIntersection::TrivialIntersection
    };
    Ok(ConeSystemSolution {
        pattern: s,
        x,
        norm_x,
        class,
        residual,
    })
}

/// All eight sign-pattern solutions, in [`SignPattern::all`] order.
pub fn solve_all_patterns(balls: &[Ball; 3]) -> Result<Vec<ConeSystemSolution>, VerifyError> {
    SignPattern::all()
        .into_iter()
        .map(|s| solve_sign_system(balls, s))
        .collect()
}

/// `true` certifies shadow for closed balls: every pattern has `|x| <= 1`
/// within [`TANGENCY_TOL`]. `false` is not a proof of the opposite.
pub fn cone_cover_certificate(balls: &[Ball; 3]) -> Result<bool, VerifyError> {
    let mut all_meet = true;
    for sol in solve_all_patterns(balls)? {
        match sol.class {
            ConeIntersection::Singular => return Err(VerifyError::SingularSystem),
            ConeIntersection::TrivialIntersection => all_meet = false,
            ConeIntersection::TangentLine | ConeIntersection::CommonRay => {}
        }
    }
    Ok(all_meet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthogonal(r: f64) -> [Ball; 3] {
        [Vector3::E1, Vector3::E2, Vector3::E3].map(|c| Ball::new(c, r).unwrap())
    }

    #[test]
    fn patterns_are_complete_and_paired() {
        let all = SignPattern::all();
        for (k, p) in all.iter().enumerate() {
            assert_eq!(all[7 - k], p.negated());
            assert_eq!(all.iter().filter(|q| *q == p).count(), 1);
        }
        assert_eq!(all[0].to_string(), "(+,+,+)");
    }

    #[test]
    fn large_orthogonal_balls_share_a_ray() {
        let sol = solve_sign_system(&orthogonal(0.9), SignPattern([1, 1, 1])).unwrap();
        let c = 0.19f64.sqrt();
        assert!((sol.x - Vector3::new(c, c, c)).norm() < 1e-15);
        assert!((sol.x.x - 0.43589).abs() < 1e-5);
        assert!((sol.norm_x - 0.75498).abs() < 1e-5);
        assert_eq!(sol.class, ConeIntersection::CommonRay);
        assert!(cone_cover_certificate(&orthogonal(0.9)).unwrap());
    }

    #[test]
    fn small_orthogonal_balls_meet_only_at_origin() {
        let sol = solve_sign_system(&orthogonal(0.7), SignPattern([1, 1, 1])).unwrap();
        assert!((sol.norm_x - 1.23694).abs() < 1e-5);
        assert_eq!(sol.class, ConeIntersection::TrivialIntersection);
        assert!(!cone_cover_certificate(&orthogonal(0.7)).unwrap());
    }

    #[test]
    fn tangent_radius_is_a_tangent_line() {
        let balls = orthogonal((2.0f64 / 3.0).sqrt());
        for sol in solve_all_patterns(&balls).unwrap() {
            assert_eq!(sol.class, ConeIntersection::TangentLine, "{sol:?}");
        }
        assert!(cone_cover_certificate(&balls).unwrap());
    }

    #[test]
    fn coplanar_centers_are_singular() {
        let third = Vector3::new(1.0, 1.0, 0.0).normalized();
        let balls = [Vector3::E1, Vector3::E2, third].map(|c| Ball::new(c, 0.5).unwrap());
        let sol = solve_sign_system(&balls, SignPattern([1, -1, 1])).unwrap();
        assert_eq!(sol.class, ConeIntersection::Singular);
        assert_eq!(cone_cover_certificate(&balls), Err(VerifyError::SingularSystem));
    }

    #[test]
    fn negated_pattern_negates_solution() {
        let balls = [
            Ball::new(Vector3::new(0.3, 0.1, 0.9).normalized(), 0.6).unwrap(),
            Ball::new(Vector3::new(-0.7, 0.5, 0.2).normalized(), 0.4).unwrap(),
            Ball::new(Vector3::new(0.1, -0.8, 0.4).normalized(), 0.7).unwrap(),
        ];
        for s in SignPattern::all() {
            let a = solve_sign_system(&balls, s).unwrap();
            let b = solve_sign_system(&balls, s.negated()).unwrap();
            assert!((a.x + b.x).norm() < 1e-14);
            assert_eq!(a.class, b.class);
            assert!(a.residual < 1e-12);
        }
    }

    #[test]
    fn ball_holding_center_is_rejected() {
        let mut balls = orthogonal(0.5);
        balls[1] = Ball::new(Vector3::E2, 1.0).unwrap();
        assert_eq!(
            solve_sign_system(&balls, SignPattern([1, 1, 1])),
            Err(VerifyError::BallContainsCenter(1))
        );
    }
}
