//! Exact geometric primitives: vectors, balls, the cones of directions they
//! shadow, and line hit predicates for balls and their linear images.
//!
//! Every line considered here passes through the origin, so a line is fully
//! described by a unit direction `u` and `-u` describes the same line. The
//! central quantity is the hit margin of a ball with center `c` and radius
//! `r`,
//!
//! ```text
//! m(u) = (c . u)^2 - (|c|^2 - r^2)
//! ```
//!
//! which is `r^2` minus the squared distance from `c` to the line. The line
//! meets the closed ball iff `m >= 0` and the open ball iff `m > 0`.

use std::fmt;
use std::ops::{Add, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when a margin is compared against zero.
pub const PREDICATE_TOL: f64 = 1e-12;

/// Accepted deviation of an input direction from unit length.
pub const UNIT_TOL: f64 = 1e-9;

/// Smallest accepted `|det|` of a linear map.
pub const DET_TOL: f64 = 1e-12;

/// Largest accepted condition number (Frobenius) of a linear map.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ball radius {0} is not a positive finite number")]
    InvalidRadius(f64),
    #[error("ball center must be finite and different from the origin")]
    InvalidCenter,
    #[error("ball of radius {radius} holds the center (|center| = {center_norm})")]
    BallContainsCenter { radius: f64, center_norm: f64 },
    #[error("direction is not a unit vector (|u| = {0})")]
    NotUnit(f64),
    #[error("linear map is singular or ill-conditioned (det = {det:e}, condition = {condition:e})")]
    SingularMap { det: f64, condition: f64 },
    #[error("axis ratio {0} must be a finite number >= 1")]
    InvalidAxisRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3::new(0.0, 0.0, 0.0);
    pub const E1: Vector3 = Vector3::new(1.0, 0.0, 0.0);
    pub const E2: Vector3 = Vector3::new(0.0, 1.0, 0.0);
    pub const E3: Vector3 = Vector3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z }
    }

    pub fn dot(self, other: Vector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vector3) -> Vector3 {
        Vector3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    /// Returns `self / |self|`; the zero vector is returned unchanged.
    pub fn normalized(self) -> Vector3 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthonormal(self) -> Vector3 {
        let a = self.normalized();
        let helper = if a.x.abs() <= a.y.abs() && a.x.abs() <= a.z.abs() {
            Vector3::E1
        } else if a.y.abs() <= a.z.abs() {
            Vector3::E2
        } else {
            Vector3::E3
        };
        a.cross(helper).normalized()
    }
}

impl From<[f64; 3]> for Vector3 {
    fn from(v: [f64; 3]) -> Self {
        Vector3::new(v[0], v[1], v[2])
    }
}

impl From<Vector3> for [f64; 3] {
    fn from(v: Vector3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vector3 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vector3 index {i} out of range"),
        }
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, s: f64) -> Vector3 {
        Vector3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vector3> for f64 {
    type Output = Vector3;
    fn mul(self, v: Vector3) -> Vector3 {
        v * self
    }
}

impl Div<f64> for Vector3 {
    type Output = Vector3;
    fn div(self, s: f64) -> Vector3 {
        Vector3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl fmt::Display for Vector3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Geodesic angle between the direction `u` and the nearer of `±axis`.
///
/// Both arguments need not be normalized. Uses `atan2` so that angles near
/// zero keep full relative precision.
pub fn angle_to_line(u: Vector3, axis: Vector3) -> f64 {
    u.cross(axis).norm().atan2(u.dot(axis).abs())
}

/// Closed or open balls. Closed balls are hit by tangent lines, open ones
/// are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitSemantics {
    #[default]
    Closed,
    Open,
}

impl HitSemantics {
    /// Decides a hit from a raw margin.
    pub fn accepts(self, margin: f64) -> bool {
        match self {
            HitSemantics::Closed => margin >= -PREDICATE_TOL,
            HitSemantics::Open => margin > PREDICATE_TOL,
        }
    }
}

impl fmt::Display for HitSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HitSemantics::Closed => f.write_str("closed"),
            HitSemantics::Open => f.write_str("open"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: Vector3,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector3, radius: f64) -> Result<Ball, GeometryError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        if !center.is_finite() || center.norm_squared() == 0.0 {
            return Err(GeometryError::InvalidCenter);
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> Vector3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `|c|^2 - r^2`, the squared length of a tangent from the origin.
    /// Negative when the ball holds the origin.
    pub fn tangent_length_squared(&self) -> f64 {
        (self.center.norm() - self.radius) * (self.center.norm() + self.radius)
    }

    pub fn holds_center(&self) -> bool {
        self.radius >= self.center.norm()
    }

    /// Raw hit margin `(c.u)^2 - (|c|^2 - r^2)` of the line spanned by `u`.
    ///
    /// `u` is assumed to be a unit vector; no check is made.
    #[inline]
    pub fn line_margin(&self, u: Vector3) -> f64 {
        let p = self.center.dot(u);
        p * p - self.tangent_length_squared()
    }

    fn require_center_outside(&self) -> Result<(), GeometryError> {
        if self.holds_center() {
            Err(GeometryError::BallContainsCenter {
                radius: self.radius,
                center_norm: self.center.norm(),
            })
        } else {
            Ok(())
        }
    }
}

/// The double cone of directions whose lines meet a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowCone {
    pub axis: Vector3,
    pub cos_half: f64,
}

impl ShadowCone {
    /// Whether the line spanned by the unit direction `u` lies in the closed cone.
    pub fn contains(&self, u: Vector3) -> bool {
        self.axis.dot(u).abs() >= self.cos_half - PREDICATE_TOL
    }
}

pub fn cone_under_ball(b: &Ball) -> Result<ShadowCone, GeometryError> {
    b.require_center_outside()?;
    let n = b.center.norm();
    Ok(ShadowCone {
        axis: b.center / n,
        cos_half: b.tangent_length_squared().sqrt() / n,
    })
}

/// Half-angle of the cone under `b`: each ball covers two antipodal caps of
/// this angular radius on the sphere of directions.
pub fn cap_angular_radius(b: &Ball) -> Result<f64, GeometryError> {
    b.require_center_outside()?;
    Ok(b.radius.atan2(b.tangent_length_squared().sqrt()))
}

/// Outcome of a line hit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineHit {
    pub hit: bool,
    /// Raw margin; see the module docs.
    pub margin: f64,
    /// Set when the input direction was renormalized before evaluation.
    pub renormalized: bool,
}

fn checked_unit(u: Vector3) -> Result<(Vector3, bool), GeometryError> {
    let n = u.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(GeometryError::NotUnit(n));
    }
    if n == 1.0 {
        Ok((u, false))
    } else {
        Ok((u / n, true))
    }
}

pub fn line_hits_ball(u: Vector3, b: &Ball, sem: HitSemantics) -> Result<LineHit, GeometryError> {
    let (u, renormalized) = checked_unit(u)?;
    let margin = b.line_margin(u);
    Ok(LineHit {
        hit: sem.accepts(margin),
        margin,
        renormalized,
    })
}

/// Prolate ellipsoid `|M x| = 1` with `M = diag(1/d, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidMetric {
    d: f64,
}

impl EllipsoidMetric {
    pub const SPHERE: EllipsoidMetric = EllipsoidMetric { d: 1.0 };

    pub fn new(d: f64) -> Result<Self, GeometryError> {
        if !(d.is_finite() && d >= 1.0) {
            return Err(GeometryError::InvalidAxisRatio(d));
        }
        Ok(EllipsoidMetric { d })
    }

    pub fn axis_ratio(&self) -> f64 {
        self.d
    }

    /// `M v`
    pub fn apply(&self, v: Vector3) -> Vector3 {
        Vector3::new(v.x / self.d, v.y, v.z)
    }

    /// `| |M v| - 1 |`
    pub fn surface_deviation(&self, v: Vector3) -> f64 {
        (self.apply(v).norm() - 1.0).abs()
    }

    /// Radial projection of a non-zero point onto the surface.
    pub fn project(&self, v: Vector3) -> Vector3 {
        v / self.apply(v).norm()
    }

    /// Surface point `(d cos t, sin t cos p, sin t sin p)`.
    pub fn surface_point(&self, theta: f64, psi: f64) -> Vector3 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        Vector3::new(self.d * ct, st * cp, st * sp)
    }

    /// The map taking this ellipsoid onto the unit sphere.
    pub fn to_sphere(&self) -> LinearMap {
        LinearMap::diagonal(1.0 / self.d, 1.0, 1.0).expect("diagonal of an ellipsoid metric is invertible")
    }
}

impl Default for EllipsoidMetric {
    fn default() -> Self {
        EllipsoidMetric::SPHERE
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_vec(m: &Mat3, v: Vector3) -> Vector3 {
    Vector3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse by the adjugate; `None` when the determinant vanishes.
pub(crate) fn inverse3(m: &Mat3) -> Option<(Mat3, f64)> {
    let det = det3(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            // cofactor of m[j][i]
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *out = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some((inv, det))
}

/// An invertible linear map of space, stored with its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    forward: Mat3,
    inverse: Mat3,
}

impl LinearMap {
    pub fn new(forward: Mat3) -> Result<Self, GeometryError> {
        let singular = |det: f64, condition: f64| GeometryError::SingularMap { det, condition };
        if !forward.iter().flatten().all(|x| x.is_finite()) {
            return Err(singular(f64::NAN, f64::INFINITY));
        }
        let (inverse, det) = inverse3(&forward).ok_or_else(|| singular(0.0, f64::INFINITY))?;
        let condition = frobenius(&forward) * frobenius(&inverse);
        if det.abs() <= DET_TOL || !(condition <= MAX_CONDITION) {
            return Err(singular(det, condition));
        }
        Ok(LinearMap { forward, inverse })
    }

    pub fn identity() -> Self {
        LinearMap::diagonal(1.0, 1.0, 1.0).expect("identity is invertible")
    }

    pub fn diagonal(a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        LinearMap::new([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn matrix(&self) -> Mat3 {
        self.forward
    }

    pub fn apply(&self, v: Vector3) -> Vector3 {
        mat_vec(&self.forward, v)
    }

    pub fn apply_inverse(&self, v: Vector3) -> Vector3 {
        mat_vec(&self.inverse, v)
    }
}

/// The image `{ y : |T^-1 y - c| <= r }` of a ball under a linear map `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedBall {
    pub ball: Ball,
    pub map: LinearMap,
}

impl MappedBall {
    pub fn new(ball: Ball, map: LinearMap) -> Self {
        MappedBall { ball, map }
    }

    /// Hit margin of the line spanned by `u` against the mapped ball.
    ///
    /// With `w = T^-1 u` the squared distance from the center to the
    /// preimage line is `|c|^2 - (c.w)^2 / |w|^2`, so the margin equals the
    /// plain ball margin at the normalized preimage direction.
    #[inline]
    pub fn line_margin(&self, u: Vector3) -> f64 {
        let w = self.map.apply_inverse(u);
        let q = self.ball.center();
        let p = q.dot(w);
        p * p / w.norm_squared() - self.ball.tangent_length_squared()
    }
}

pub fn line_hits_mapped_ball(u: Vector3, mb: &MappedBall, sem: HitSemantics) -> Result<LineHit, GeometryError> {
    let (u, renormalized) = checked_unit(u)?;
    let margin = mb.line_margin(u);
    Ok(LineHit {
        hit: sem.accepts(margin),
        margin,
        renormalized,
    })
}
