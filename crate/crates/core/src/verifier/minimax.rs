//! Minimization of `f(u) = max_i m_i(u)` over the sphere of line directions.
//!
//! A direction with `f(u) < 0` spans a line that misses every ball, which is
//! an exact certificate that the balls do not generate shadow.
//!
//! Two candidate sources are combined and every candidate is re-evaluated
//! exactly:
//!
//! * multistart projected descent on the log-sum-exp smoothing of `f`, with
//!   the temperature annealed from `1e-2` to `1e-6` (relative to `max |c|^2`);
//! * critical directions. Each `m_i(u) = u^T (c_i c_i^T - h_i^2 I) u` with
//!   `h_i^2 = |c_i|^2 - r_i^2`, and a local minimum of `f` on the sphere
//!   either lies on a great circle `u . c_i = 0` (where `m_i` is minimal)
//!   or has three equal active margins `t`. The latter satisfy
//!   `c_k . u = s_k sqrt(h_k^2 + t)`, a one-parameter family of linear
//!   systems in which `|u| = 1` is solved for `t`.

use rayon::prelude::*;
use serde::Serialize;

use super::sampling::Lattice;
use super::VerifyError;
use crate::geometry::{det3, inverse3, line_hits_ball, Ball, HitSemantics, Vector3};
use crate::scene::{max_margin, SceneConfig};

/// A closed-semantics witness must clear every ball by this margin.
pub const CLOSED_WITNESS_MARGIN: f64 = -1e-10;

const T_START: f64 = 1e-2;
const T_END: f64 = 1e-6;
const ROOT_SAMPLES: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimaxPoint {
    pub direction: Vector3,
    /// `f(direction)`, evaluated exactly.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxOptions {
    /// Descent starts, taken from a Fibonacci lattice.
    pub starts: usize,
    /// Descent iterations per start.
    pub iters: usize,
    /// Rotates the start lattice; `None` keeps the canonical lattice.
    pub seed: Option<u64>,
    /// Extra lattice directions evaluated without descent.
    pub probes: usize,
    /// Include the critical-direction enumeration.
    pub critical: bool,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions {
            starts: 32,
            iters: 300,
            seed: None,
            probes: 0,
            critical: true,
        }
    }
}

/// A line through the origin that misses every ball, with the per-ball
/// margins it was verified with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub direction: Vector3,
    pub margins: Vec<f64>,
}

impl Witness {
    /// Re-evaluates the witness against `balls` from scratch.
    pub fn verify(direction: Vector3, balls: &[Ball], semantics: HitSemantics) -> Option<Witness> {
        let u = direction.normalized();
        let mut margins = Vec::with_capacity(balls.len());
        for b in balls {
            let hit = line_hits_ball(u, b, semantics).ok()?;
            if hit.hit {
                return None;
            }
            margins.push(hit.margin);
        }
        Some(Witness { direction: u, margins })
    }
}

fn smoothed(balls: &[Ball], u: Vector3, temp: f64) -> (f64, Vector3) {
    let mmax = max_margin(balls, u);
    let mut sum = 0.0;
    let mut grad = Vector3::ZERO;
    for b in balls {
        let c = b.center();
        let p = c.dot(u);
        let w = ((p * p - b.tangent_length_squared() - mmax) / temp).exp();
        sum += w;
        grad = grad + c * (2.0 * p * w);
    }
    let grad = grad / sum;
    (mmax + temp * sum.ln(), grad - u * grad.dot(u))
}

/// Annealed projected descent from `start`; returns the best exact point seen.
pub fn descend(balls: &[Ball], start: Vector3, iters: usize) -> MinimaxPoint {
    let mut u = start.normalized();
    let mut best = MinimaxPoint {
        direction: u,
        value: max_margin(balls, u),
    };
    if balls.is_empty() {
        return best;
    }
    let scale = balls.iter().map(|b| b.center().norm_squared()).fold(1.0, f64::max);
    let mut step: f64 = 0.1;
    for k in 0..iters {
        let frac = if iters > 1 { k as f64 / (iters - 1) as f64 } else { 1.0 };
        let temp = scale * T_START * (T_END / T_START).powf(frac);
        let (value, grad) = smoothed(balls, u, temp);
        let gnorm = grad.norm();
        if !(gnorm > 1e-300) {
            break;
        }
        let dir = grad / -gnorm;
        step = (2.0 * step).min(0.5);
        let mut moved = false;
        while step > 1e-16 {
            let (s, c) = step.sin_cos();
            let cand = (u * c + dir * s).normalized();
            let (cand_value, _) = smoothed(balls, cand, temp);
            if cand_value <= value - 1e-4 * step * gnorm {
                u = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        let exact = max_margin(balls, u);
        if exact < best.value {
            best = MinimaxPoint { direction: u, value: exact };
        }
        if !moved && step <= 1e-16 && frac >= 1.0 {
            break;
        }
    }
    best
}

fn circle_candidates(balls: &[Ball], i: usize, out: &mut Vec<Vector3>) {
    let axis = balls[i].center().normalized();
    let e1 = axis.any_orthonormal();
    let e2 = axis.cross(e1);
    let at = |phi: f64| {
        let (s, c) = phi.sin_cos();
        e1 * c + e2 * s
    };
    out.push(e1);
    // (A cos + B sin)^2 - h^2 for every other ball
    let coeffs: Vec<(f64, f64, f64)> = balls
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, b)| (b.center().dot(e1), b.center().dot(e2), b.tangent_length_squared()))
        .collect();
    for (k, &(a, b, _)) in coeffs.iter().enumerate() {
        out.push(at(a.atan2(-b)));
        for &(a2, b2, h2) in &coeffs[k + 1..] {
            let h1 = coeffs[k].2;
            // m_j - m_k = P cos 2phi + Q sin 2phi - R
            let p = 0.5 * (a * a - b * b - a2 * a2 + b2 * b2);
            let q = a * b - a2 * b2;
            let r = -(0.5 * (a * a + b * b) - h1 - 0.5 * (a2 * a2 + b2 * b2) + h2);
            let rho = p.hypot(q);
            if rho > 0.0 && r.abs() <= rho * (1.0 + 1e-12) {
                let base = q.atan2(p);
                let delta = (r / rho).clamp(-1.0, 1.0).acos();
                out.push(at(0.5 * (base + delta)));
                out.push(at(0.5 * (base - delta)));
            }
        }
    }
}

struct TripleSystem {
    inv: [[f64; 3]; 3],
    h2: [f64; 3],
}

impl TripleSystem {
    fn point(&self, signs: [f64; 3], t: f64) -> Vector3 {
        let v = [0, 1, 2].map(|k| signs[k] * (self.h2[k] + t).max(0.0).sqrt());
        let m = &self.inv;
        Vector3::new(
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        )
    }

    fn excess(&self, signs: [f64; 3], t: f64) -> f64 {
        self.point(signs, t).norm_squared() - 1.0
    }

    fn bisect(&self, signs: [f64; 3], mut a: f64, mut b: f64) -> f64 {
        let fa = self.excess(signs, a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if (self.excess(signs, mid) <= 0.0) == (fa <= 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Golden-section search for the point of smallest `|excess|`.
    fn closest_approach(&self, signs: [f64; 3], mut a: f64, mut b: f64) -> f64 {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |t: f64| self.excess(signs, t).abs();
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..120 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
            if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    }
}

fn triple_candidates(balls: [&Ball; 3], out: &mut Vec<Vector3>) {
    let h2 = balls.map(|b| b.tangent_length_squared());
    if h2.iter().any(|&h| !(h > 0.0)) {
        return;
    }
    let rows = balls.map(|b| b.center().to_array());
    let scale: f64 = balls.iter().map(|b| b.center().norm()).product();
    if det3(&rows).abs() <= 1e-12 * scale {
        return;
    }
    let Some((inv, _)) = inverse3(&rows) else {
        return;
    };
    let sys = TripleSystem { inv, h2 };
    let t_lo = -h2.iter().copied().fold(f64::INFINITY, f64::min);
    let t_hi = balls.iter().map(|b| b.radius() * b.radius()).fold(f64::INFINITY, f64::min);
    if !(t_hi > t_lo) {
        return;
    }
    let span = t_hi - t_lo;
    let mut ts: Vec<f64> = (0..=ROOT_SAMPLES)
        .map(|j| {
            let s = j as f64 / ROOT_SAMPLES as f64;
            t_lo + span * s * s
        })
        .collect();
    let zero_scale = h2.iter().copied().fold(0.0, f64::max);
    for k in 1..=16 {
        let e = 10f64.powi(-k);
        ts.push(t_lo + span * e);
        ts.push(t_hi - span * e);
        ts.push(zero_scale * e);
        ts.push(-zero_scale * e);
    }
    ts.push(0.0);
    ts.retain(|t| *t >= t_lo && *t <= t_hi);
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    for pattern in [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [1.0, -1.0, -1.0]] {
        let values: Vec<f64> = ts.iter().map(|&t| sys.excess(pattern, t)).collect();
        let mut push_at = |t: f64| {
            let u = sys.point(pattern, t);
            if u.norm() > 0.0 {
                out.push(u.normalized());
            }
        };
        for j in 0..ts.len() {
            if values[j] == 0.0 {
                push_at(ts[j]);
            }
            if j + 1 < ts.len() && values[j] * values[j + 1] < 0.0 {
                push_at(sys.bisect(pattern, ts[j], ts[j + 1]));
            }
            // |excess| dips without a sign change: possible double root
            if j > 0 && j + 1 < ts.len() {
                let (a, b, c) = (values[j - 1], values[j], values[j + 1]);
                if a * b > 0.0 && b * c > 0.0 && b.abs() < a.abs() && b.abs() < c.abs() {
                    let t = sys.closest_approach(pattern, ts[j - 1], ts[j + 1]);
                    push_at(t);
                    let v = sys.excess(pattern, t);
                    if v * b < 0.0 {
                        push_at(sys.bisect(pattern, ts[j - 1], t));
                        push_at(sys.bisect(pattern, t, ts[j + 1]));
                    }
                }
            }
        }
    }
}

/// Directions among which the global minimum of `f` is attained (up to the
/// accuracy of the one-dimensional root finding and excluding the
/// non-generic case of three centers coplanar with the origin).
pub fn critical_directions(balls: &[Ball]) -> Vec<Vector3> {
    let mut out = Vec::new();
    for i in 0..balls.len() {
        circle_candidates(balls, i, &mut out);
    }
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            for k in j + 1..balls.len() {
                triple_candidates([&balls[i], &balls[j], &balls[k]], &mut out);
            }
        }
    }
    out
}

fn best_of(points: impl IntoIterator<Item = MinimaxPoint>) -> Option<MinimaxPoint> {
    // first strictly smaller value wins, so ties resolve to the earliest candidate
    points.into_iter().fold(None, |acc, p| match acc {
        Some(a) if !(p.value < a.value) => Some(a),
        _ if p.value.is_nan() => acc,
        _ => Some(p),
    })
}

/// Smallest `f` found by descent, lattice probes and critical directions.
pub fn minimax_search(balls: &[Ball], opts: &MinimaxOptions) -> Result<MinimaxPoint, VerifyError> {
    if balls.is_empty() {
        return Err(VerifyError::EmptyScene);
    }
    let eval = |u: Vector3| MinimaxPoint {
        direction: u,
        value: max_margin(balls, u),
    };
    let mut candidates: Vec<MinimaxPoint> = Vec::new();
    if opts.critical {
        candidates.extend(critical_directions(balls).into_iter().map(eval));
    }
    if opts.probes > 0 {
        let lattice = Lattice::new(opts.probes, opts.seed);
        let probed: Vec<MinimaxPoint> = (0..opts.probes).into_par_iter().map(|i| eval(lattice.point(i))).collect();
        candidates.extend(probed);
    }
    if opts.starts > 0 {
        let lattice = Lattice::new(opts.starts, opts.seed);
        let descended: Vec<MinimaxPoint> = (0..opts.starts)
            .into_par_iter()
            .map(|i| descend(balls, lattice.point(i), opts.iters))
            .collect();
        candidates.extend(descended);
    }
    Ok(best_of(candidates).unwrap_or_else(|| eval(Vector3::E3)))
}

/// Whether `value = f(u)` is low enough for `u` to be offered as a witness.
pub fn qualifies_as_witness(value: f64, semantics: HitSemantics) -> bool {
    match semantics {
        HitSemantics::Closed => value < CLOSED_WITNESS_MARGIN,
        HitSemantics::Open => !semantics.accepts(value),
    }
}

/// Searches for a line through the origin that misses every ball.
///
/// Returns `None` when no witness is found; that is not a proof of shadow.
pub fn find_missing_line(cfg: &SceneConfig, starts: usize, iters: usize, seed: u64) -> Option<Witness> {
    let opts = MinimaxOptions {
        starts: starts.max(1),
        iters,
        seed: Some(seed),
        probes: 0,
        critical: true,
    };
    let best = match minimax_search(cfg.balls(), &opts) {
        Ok(best) => best,
        Err(_) => return Some(Witness {
            direction: Vector3::E3,
            margins: Vec::new(),
        }),
    };
    if !qualifies_as_witness(best.value, cfg.semantics()) {
        return None;
    }
    Witness::verify(best.direction, cfg.balls(), cfg.semantics())
}
