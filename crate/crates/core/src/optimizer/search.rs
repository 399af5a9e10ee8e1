//! Smallest axis ratio admitting a feasible three-ball shadow.
//!
//! For fixed `d` the shadow margin is maximized over nine parameters, two
//! surface angles and one radius per ball, by penalized Nelder–Mead from
//! several starts; an outer bisection on `d` locates the threshold.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::family::{family_config, FamilyParams};
use super::feasibility::feasibility_check;
use super::nelder_mead;
use super::OptimizeError;
use crate::geometry::{Ball, EllipsoidMetric, HitSemantics, Vector3};
use crate::rng;
use crate::scene::{max_margin, SceneConfig};
use crate::verifier::{critical_directions, minimax_search, MinimaxOptions, VerifyError};

/// Radii stay at least this far below `|a_i|`, keeping the center excluded.
pub const RADIUS_GAP: f64 = 1e-9;

/// Polar angles are kept this far from the major-axis tips.
pub const THETA_MIN: f64 = 1e-6;

const PENALTY_WEIGHT: f64 = 1e3;
const ROUNDS: usize = 3;
/// `ln(1 - rho)` bounds: `rho` ranges over `[1e-6, 1]`.
const TAU_MIN: f64 = -80.0;
const TAU_MAX: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub bracket: (f64, f64),
    pub d_tol: f64,
    pub multistarts: usize,
    pub seed: u64,
    /// Objective evaluations per start.
    pub inner_iters: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            bracket: (2.0, 4.0),
            d_tol: 0.02,
            multistarts: 64,
            seed: 0,
            inner_iters: 3000,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<(), OptimizeError> {
        let (lo, hi) = self.bracket;
        if !(lo >= 1.0 && lo < hi && hi.is_finite()) {
            return Err(OptimizeError::InvalidOptions(format!(
                "bracket must satisfy 1 <= low < high, got ({lo}, {hi})"
            )));
        }
        if !(self.d_tol > 0.0) {
            return Err(OptimizeError::InvalidOptions(format!("d_tol must be positive, got {}", self.d_tol)));
        }
        if self.multistarts == 0 || self.inner_iters == 0 {
            return Err(OptimizeError::InvalidOptions("multistarts and inner_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub d: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub d_estimate: f64,
    /// Final bracket: the low end had no shadow configuration, the high end did.
    pub bracket: (f64, f64),
    pub best_scene: SceneConfig,
    pub margin_at_best: f64,
    /// Probes in evaluation order.
    pub history: Vec<Probe>,
}

/// Shadow margin `min_u max_i m_i(u)` estimated with the given effort;
/// nonnegative means shadow (closed semantics).
pub fn shadow_margin(cfg: &SceneConfig, effort: &MinimaxOptions) -> Result<f64, VerifyError> {
    Ok(minimax_search(cfg.balls(), effort)?.value)
}

/// Effort used for margins that decide feasibility of a probe.
pub fn thorough_effort(seed: u64) -> MinimaxOptions {
    MinimaxOptions {
        starts: 24,
        iters: 400,
        seed: Some(seed),
        probes: 20_000,
        critical: true,
    }
}

fn critical_margin(balls: &[Ball]) -> f64 {
    critical_directions(balls)
        .into_iter()
        .map(|u| max_margin(balls, u))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
struct Chart {
    metric: EllipsoidMetric,
}

impl Chart {
    fn ball_parts(&self, p: &[f64]) -> (Vector3, f64) {
        let theta = p[0].clamp(THETA_MIN, std::f64::consts::PI - THETA_MIN);
        let center = self.metric.surface_point(theta, p[1]);
        let rho = 1.0 - p[2].clamp(TAU_MIN, TAU_MAX).exp();
        (center, rho * (center.norm() - RADIUS_GAP))
    }

    fn decode(&self, p: &[f64]) -> [(Vector3, f64); 3] {
        [0, 1, 2].map(|k| self.ball_parts(&p[3 * k..3 * k + 3]))
    }

    fn encode(&self, balls: &[Ball]) -> Vec<f64> {
        let d = self.metric.axis_ratio();
        let mut out = Vec::with_capacity(9);
        let mut tips = Vec::new();
        for (k, b) in balls.iter().enumerate() {
            let c = b.center();
            let rest = c.y.hypot(c.z);
            if rest == 0.0 {
                tips.push(k);
            }
            let ratio = b.radius() / (c.norm() - RADIUS_GAP);
            out.extend([rest.atan2(c.x / d), c.z.atan2(c.y), (1.0 - ratio).max(1e-300).ln()]);
        }
        // at a tip the azimuth is free, but the polar clamp moves the center
        // along it: point it where the nudge creates the least overlap
        for k in tips {
            let mut best = (f64::INFINITY, 0.0);
            for j in 0..16 {
                let psi = -FRAC_PI_2 + j as f64 * std::f64::consts::PI / 8.0;
                out[3 * k + 1] = psi;
                let o = overlap(&self.decode(&out));
                if o < best.0 {
                    best = (o, psi);
                }
            }
            out[3 * k + 1] = best.1;
        }
        out
    }

    fn balls(&self, p: &[f64]) -> Vec<Ball> {
        self.decode(p)
            .into_iter()
            .map(|(c, r)| Ball::new(c, r.max(f64::MIN_POSITIVE)).expect("decoded ball is valid"))
            .collect()
    }
}

fn overlap(parts: &[(Vector3, f64); 3]) -> f64 {
    let mut total = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            let depth = parts[i].1 + parts[j].1 - (parts[i].0 - parts[j].0).norm();
            total += depth.max(0.0);
        }
    }
    total
}

/// Shrinks overlapping pairs until the balls are pairwise disjoint.
fn repair(mut parts: [(Vector3, f64); 3]) -> [(Vector3, f64); 3] {
    for _ in 0..16 {
        let mut changed = false;
        for i in 0..3 {
            for j in i + 1..3 {
                let dist = (parts[i].0 - parts[j].0).norm();
                let sum = parts[i].1 + parts[j].1;
                if sum > dist {
                    let scale = dist / sum * (1.0 - 4.0 * f64::EPSILON);
                    parts[i].1 *= scale;
                    parts[j].1 *= scale;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    parts
}

fn scene_from(metric: EllipsoidMetric, parts: &[(Vector3, f64); 3]) -> SceneConfig {
    let balls = parts
        .iter()
        .map(|&(c, r)| Ball::new(c, r.max(f64::MIN_POSITIVE)).expect("radius is positive"))
        .collect();
    SceneConfig::new(metric, balls, HitSemantics::Closed).expect("decoded centers lie on the surface")
}

/// Local search from one start: penalized simplex rounds, weight doubled
/// while the penalty stays active, then radius repair.
fn polish(chart: Chart, start: Vec<f64>, evals: usize) -> (SceneConfig, f64) {
    let steps = [0.1, 0.3, 1.0].repeat(3);
    let mut x = start;
    let mut weight = PENALTY_WEIGHT;
    let per_round = (evals / ROUNDS).max(20);
    for _ in 0..ROUNDS {
        let objective = |p: &[f64]| {
            let parts = chart.decode(p);
            let balls = chart.balls(p);
            -critical_margin(&balls) + weight * overlap(&parts)
        };
        let m = nelder_mead::minimize(objective, &x, &steps, per_round, 1e-15);
        x = m.x;
        if overlap(&chart.decode(&x)) > 0.0 {
            weight *= 2.0;
        }
    }
    let scene = scene_from(chart.metric, &repair(chart.decode(&x)));
    let margin = critical_margin(scene.balls());
    (scene, margin)
}

fn random_start(seed: u64, index: usize) -> Vec<f64> {
    let mut g = rng::stream(seed, index as u64);
    let mut out = Vec::with_capacity(9);
    for _ in 0..3 {
        let cos_theta: f64 = g.random_range(-1.0..1.0);
        let psi: f64 = g.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rho: f64 = g.random_range(0.3..1.0);
        out.extend([cos_theta.acos(), psi, (1.0 - rho).ln()]);
    }
    out
}

/// Best family member on the ellipsoid `d`: `x` just below one, `y` by a
/// golden-section search on `ln(1 - y)`.
pub fn family_warm_start(d: f64) -> Result<SceneConfig, OptimizeError> {
    let scene = |x: f64, y: f64| family_config(FamilyParams::new(x, y, d)?);
    let margin = |x: f64, t: f64| -> f64 {
        scene(x, 1.0 - t.exp()).map_or(f64::NEG_INFINITY, |s| critical_margin(s.balls()))
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for k in [9, 8, 7, 6, 5, 4] {
        let x = 1.0 - 10f64.powi(-k);
        let (mut a, mut b) = ((RADIUS_GAP).ln(), 0.5f64.ln());
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut e) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fe) = (margin(x, c), margin(x, e));
        for _ in 0..60 {
            if fc > fe {
                b = e;
                e = c;
                fe = fc;
                c = b - g * (b - a);
                fc = margin(x, c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + g * (b - a);
                fe = margin(x, e);
            }
        }
        let t = 0.5 * (a + b);
        let m = margin(x, t);
        if best.is_none_or(|(bm, _, _)| m > bm) {
            best = Some((m, x, 1.0 - t.exp()));
        }
    }
    let (_, x, y) = best.expect("at least one candidate");
    scene(x, y)
}

/// Maps a configuration onto the ellipsoid `d` by stretching the first
/// coordinate; radii are capped so each ball still excludes the center.
pub fn stretch_scene(cfg: &SceneConfig, d: f64) -> Result<SceneConfig, OptimizeError> {
    let metric = EllipsoidMetric::new(d)?;
    let factor = d / cfg.ellipsoid().axis_ratio();
    let balls = cfg
        .balls()
        .iter()
        .map(|b| {
            let c = b.center();
            let c = Vector3::new(c.x * factor, c.y, c.z);
            Ball::new(c, b.radius().min(c.norm() - RADIUS_GAP))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SceneConfig::new(metric, balls, cfg.semantics())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestConfig {
    pub scene: SceneConfig,
    /// Thoroughly searched shadow margin of `scene`.
    pub margin: f64,
    /// Index of the start that produced `scene`.
    pub start: usize,
}

/// Maximizes the shadow margin over feasible three-ball configurations on
/// the ellipsoid `d`.
pub fn best_config_for_d(d: f64, opts: &SearchOptions) -> Result<(SceneConfig, f64), OptimizeError> {
    let best = best_config_with_warm_starts(d, opts, &[])?;
    Ok((best.scene, best.margin))
}

/// As [`best_config_for_d`], with extra starting configurations placed
/// right after the family start.
pub fn best_config_with_warm_starts(
    d: f64,
    opts: &SearchOptions,
    warm: &[SceneConfig],
) -> Result<BestConfig, OptimizeError> {
    if !(d >= 1.0) {
        return Err(OptimizeError::OutOfDomain(format!("axis ratio must be >= 1, got {d}")));
    }
    if opts.multistarts == 0 {
        return Err(OptimizeError::InvalidOptions("multistarts must be positive".into()));
    }
    let chart = Chart {
        metric: EllipsoidMetric::new(d)?,
    };
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.multistarts);
    if d >= 2.0 {
        starts.push(chart.encode(family_warm_start(d)?.balls()));
    }
    for w in warm {
        if w.balls().len() == 3 {
            starts.push(chart.encode(stretch_scene(w, d)?.balls()));
        }
    }
    starts.truncate(opts.multistarts);
    let fixed = starts.len();
    starts.extend((fixed..opts.multistarts).map(|i| random_start(opts.seed, i)));

    let polished: Vec<(SceneConfig, f64)> = starts
        .into_par_iter()
        .map(|s| polish(chart, s, opts.inner_iters))
        .collect();
    let mut best_index = 0;
    for (i, (scene, margin)) in polished.iter().enumerate() {
        debug_assert!(feasibility_check(scene).is_empty());
        if *margin > polished[best_index].1 {
            best_index = i;
        }
    }
    let scene = polished[best_index].0.clone();
    let margin = shadow_margin(&scene, &thorough_effort(opts.seed))?;
    Ok(BestConfig {
        scene,
        margin,
        start: best_index,
    })
}

/// Bisection on `d` for the smallest axis ratio with a shadow configuration.
pub fn min_axis_ratio(opts: &SearchOptions) -> Result<OptimizationResult, OptimizeError> {
    opts.validate()?;
    let (mut lo, mut hi) = opts.bracket;
    let mut history = Vec::new();
    let low = best_config_with_warm_starts(lo, opts, &[])?;
    history.push(Probe { d: lo, margin: low.margin });
    let high = best_config_with_warm_starts(hi, opts, &[])?;
    history.push(Probe { d: hi, margin: high.margin });
    if low.margin >= 0.0 || high.margin < 0.0 {
        return Err(OptimizeError::BadBracket {
            low: lo,
            high: hi,
            margin_low: low.margin,
            margin_high: high.margin,
        });
    }
    let (mut feasible, mut infeasible) = (high, low);
    while hi - lo > opts.d_tol {
        let mid = 0.5 * (lo + hi);
        let warm = [feasible.scene.clone(), infeasible.scene.clone()];
        let probe = best_config_with_warm_starts(mid, opts, &warm)?;
        history.push(Probe { d: mid, margin: probe.margin });
        if probe.margin >= 0.0 {
            hi = mid;
            feasible = probe;
        } else {
            lo = mid;
            infeasible = probe;
        }
    }
    Ok(OptimizationResult {
        d_estimate: 0.5 * (lo + hi),
        bracket: (lo, hi),
        best_scene: feasible.scene,
        margin_at_best: feasible.margin,
        history,
    })
}
