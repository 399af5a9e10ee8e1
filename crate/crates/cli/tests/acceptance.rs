//! One test per acceptance criterion; each prints a `PASS`/`FAIL` line to
//! stderr (uncaptured) before asserting.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use umbra_core::geometry::{
    line_hits_ball, line_hits_mapped_ball, Ball, EllipsoidMetric, HitSemantics, LinearMap, MappedBall, Vector3,
};
use umbra_core::optimizer::{family_config, feasibility_check, FamilyParams, Violation};
use umbra_core::rng::stream;
use umbra_core::scene::SceneConfig;
use umbra_core::tangent::{common_tangent_direction, equator_arc_width, TangentPair};
use umbra_core::verifier::{
    certified_cover_mesh, cone_cover_certificate, find_missing_line, sample_coverage, verify, CertificateMethod,
    Verdict, VerifyOptions,
};

const BIN: &str = env!("CARGO_BIN_EXE_umbra");

fn announce(criterion: u32, pass: bool, summary: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {criterion}: {status} — {summary}");
}

fn umbra_json(args: &[&str]) -> (i32, Value) {
    let out = Command::new(BIN)
        .arg("--format")
        .arg("json")
        .args(args)
        .env_remove("UMBRA_THREADS")
        .output()
        .expect("binary runs");
    let v = serde_json::from_slice(&out.stdout).expect("json report");
    (out.status.code().expect("exit code"), v)
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Three balls centered on the ellipsoid `d`, each excluding the origin.
fn random_balls(rng: &mut ChaCha8Rng, d: f64, min_fraction: f64, max_fraction: f64) -> Vec<Ball> {
    let metric = EllipsoidMetric::new(d).unwrap();
    (0..3)
        .map(|_| {
            let c = metric.project(unit(rng));
            Ball::new(c, rng.random_range(min_fraction..max_fraction) * c.norm()).unwrap()
        })
        .collect()
}

/// Random radii shrunk pairwise until the balls are disjoint.
fn random_feasible_sphere_scene(rng: &mut ChaCha8Rng) -> SceneConfig {
    let centers: Vec<Vector3> = (0..3).map(|_| unit(rng)).collect();
    let mut radii: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.999)).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let dist = (centers[i] - centers[j]).norm();
            let sum = radii[i] + radii[j];
            if sum > dist {
                let k = dist / sum * (1.0 - 1e-9);
                radii[i] *= k;
                radii[j] *= k;
            }
        }
    }
    let balls = centers.iter().zip(&radii).map(|(&c, &r)| Ball::new(c, r).unwrap()).collect();
    SceneConfig::new(EllipsoidMetric::SPHERE, balls, HitSemantics::Closed).unwrap()
}

#[test]
fn criterion_1_tangent_angle_bound() {
    let t = Instant::now();
    let (code, report) = umbra_json(&["tangent-scan", "--grid", "500", "--refine", "3"]);
    let elapsed = t.elapsed();
    let details = &report["details"];
    let max_ratio = details["max_ratio"].as_f64().unwrap();
    let at_least_one = details["ratio_at_least_one"].as_u64().unwrap();

    let s = common_tangent_direction(TangentPair::new(0.9, 0.3).unwrap()).unwrap();
    let x = s.direction();
    let residual = [
        x.norm() - 1.0,
        x.z - (1.0f64 - 0.81).sqrt(),
        s.b2 * x.y + s.b3 * x.z - (1.0f64 - 0.09).sqrt(),
    ]
    .iter()
    .fold(0.0f64, |m, r| m.max(r.abs()));
    let witness_ok = (s.ratio() - 0.28052).abs() <= 1e-4 && residual <= 1e-9;
    let every_point_below_one = at_least_one == 0 && max_ratio < 1.0;

    let pass = code == 0 && every_point_below_one && witness_ok && elapsed < Duration::from_secs(10);
    let counter = common_tangent_direction(TangentPair::new(0.3, 0.9).unwrap()).unwrap();
    announce(
        1,
        pass,
        &format!(
            "max ratio {max_ratio:.6e}, {at_least_one} grid points with ratio >= 1, ratio(0.9, 0.3) = {:.6} \
             (residual {residual:.1e}), ratio(0.3, 0.9) = {:.6}, {elapsed:.2?}",
            s.ratio(),
            counter.ratio()
        ),
    );
    assert!(pass, "the ratio x1/x2 is not below one on the whole square");
}

#[test]
fn criterion_2_equatorial_limit() {
    let t = Instant::now();
    let pi = std::f64::consts::PI;
    let w = equator_arc_width(pi - 1e-4).unwrap();
    let in_window = (pi / 2.0 - 1e-3..=pi / 2.0).contains(&w);
    let (lo, hi) = (pi / 3.0, pi);
    let widths: Vec<f64> = (0..1000)
        .map(|k| equator_arc_width(lo + (hi - lo) * (k as f64 + 0.5) / 1000.0).unwrap())
        .collect();
    let monotone = widths.windows(2).all(|p| p[1] >= p[0]);
    let elapsed = t.elapsed();
    let pass = in_window && monotone && elapsed < Duration::from_secs(1);
    announce(2, pass, &format!("width(pi - 1e-4) = {w:.9}, monotone {monotone}, {elapsed:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_3_three_balls_do_not_suffice_on_the_sphere() {
    let t = Instant::now();
    let opts = VerifyOptions::default();
    let mut failures = Vec::new();
    for i in 0..200u64 {
        let cfg = random_feasible_sphere_scene(&mut stream(3, i));
        assert!(feasibility_check(&cfg).is_empty());
        let verdict = verify(&cfg, &opts).unwrap();
        let ok = match &verdict {
            Verdict::CertifiedNoShadow { witness } => cfg
                .balls()
                .iter()
                .all(|b| !line_hits_ball(witness.direction, b, HitSemantics::Closed).unwrap().hit),
            _ => false,
        };
        if !ok {
            failures.push((i, verdict.to_string()));
        }
    }
    let elapsed = t.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    announce(3, pass, &format!("{} of 200 scenes lacked a verified witness, {elapsed:.2?}", failures.len()));
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_4_minimal_axis_ratio() {
    let t = Instant::now();
    let (code, report) = umbra_json(&[
        "optimize",
        "--bracket",
        "2,4",
        "--tol",
        "0.02",
        "--multistarts",
        "64",
        "--seed",
        "7",
    ]);
    let elapsed = t.elapsed();
    let d = report["details"]["d_estimate"].as_f64().unwrap_or(f64::NAN);
    let target = 2.8284;
    let pass = code == 0 && (d - target).abs() <= 0.05 && elapsed < Duration::from_secs(600);
    announce(
        4,
        pass,
        &format!("d estimate {d:.5} (|d - {target}| = {:.5}), bracket {}, {elapsed:.2?}", (d - target).abs(), report["details"]["bracket"]),
    );
    assert!(pass);
}

#[test]
fn criterion_5_family_behavior() {
    let n = 50;
    let mut worst = 0.0f64;
    let mut feasibility_ok = true;
    for i in 1..=n {
        for j in 1..=n {
            for k in 0..n {
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                let z = 1.0 + 4.0 * k as f64 / (n - 1) as f64;
                let cfg = family_config(FamilyParams::new(x, y, z).unwrap()).unwrap();
                let [a1, a2, a3] = [0, 1, 2].map(|i| cfg.balls()[i].center());
                let diag = z.hypot(1.0);
                for e in [
                    a2.norm() - 1.0,
                    (a1 - a2).norm() - (x + y),
                    (a3 - a1).norm() - diag,
                    (a3 - a2).norm() - diag,
                ] {
                    worst = worst.max(e.abs());
                }
                for a in [a1, a2, a3] {
                    worst = worst.max(cfg.ellipsoid().surface_deviation(a));
                }
                let v = feasibility_check(&cfg);
                let boundary = i == n || j == n;
                let expected = if boundary {
                    !v.is_empty() && v.iter().all(|v| matches!(v, Violation::CenterExclusion { .. }))
                } else {
                    v.is_empty()
                };
                feasibility_ok &= expected;
            }
        }
    }
    let algebra_ok = worst <= 1e-9;

    let pinned = family_config(FamilyParams::new(0.99, 0.99, 2.9).unwrap()).unwrap();
    let sampled = sample_coverage(&pinned, 1_000_000, None).unwrap();
    let balls: &[Ball; 3] = pinned.balls().try_into().unwrap();
    let sign = cone_cover_certificate(balls).unwrap_or(false);
    let mesh = certified_cover_mesh(&pinned, 5).unwrap();
    let verdict = verify(&pinned, &VerifyOptions::default()).unwrap();
    let pinned_ok = sampled.min_margin >= 0.0 && sign && mesh && verdict.is_shadow();

    let pass = algebra_ok && feasibility_ok && pinned_ok;
    let u = sampled.argmin_direction;
    announce(
        5,
        pass,
        &format!(
            "algebra max error {worst:.1e}, feasibility pattern {feasibility_ok}; family(0.99, 0.99, 2.9): sampled \
             min margin {:.4e} at [{:.5}, {:.5}, {:.5}], sign-pattern {sign}, mesh {mesh}, verdict {verdict}",
            sampled.min_margin, u.x, u.y, u.z
        ),
    );
    assert!(algebra_ok && feasibility_ok, "family invariants");
    assert!(pinned_ok, "the pinned scene has a missing line: {verdict:?}");
}

#[test]
fn criterion_6_sign_pattern_soundness() {
    let t = Instant::now();
    let (mut certified, mut false_certificates, mut worst_margin) = (0usize, 0usize, f64::INFINITY);
    let mut i = 0u64;
    while certified < 500 {
        let rng = &mut stream(6, i);
        i += 1;
        let d = rng.random_range(1.0..4.0);
        let balls = random_balls(rng, d, 0.75, 0.999);
        let cfg = SceneConfig::new(EllipsoidMetric::new(d).unwrap(), balls, HitSemantics::Closed).unwrap();
        let arr: &[Ball; 3] = cfg.balls().try_into().unwrap();
        if cone_cover_certificate(arr).unwrap_or(false) {
            certified += 1;
            let s = sample_coverage(&cfg, 1_000_000, None).unwrap();
            worst_margin = worst_margin.min(s.min_margin);
            if s.covered != s.samples || s.min_margin < -1e-9 {
                false_certificates += 1;
            }
        }
    }
    let drawn_for_certificates = i;
    let (mut witnesses, mut false_witnesses) = (0usize, 0usize);
    let mut j = 0u64;
    while witnesses < 500 {
        let rng = &mut stream(60, j);
        j += 1;
        let d = rng.random_range(1.0..4.0);
        let balls = random_balls(rng, d, 0.05, 0.9);
        let cfg = SceneConfig::new(EllipsoidMetric::new(d).unwrap(), balls, HitSemantics::Closed).unwrap();
        if let Some(w) = find_missing_line(&cfg, 16, 200, j) {
            witnesses += 1;
            if !cfg.balls().iter().all(|b| b.line_margin(w.direction) < 0.0) {
                false_witnesses += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    let pass = false_certificates == 0 && false_witnesses == 0;
    announce(
        6,
        pass,
        &format!(
            "500 certificates from {drawn_for_certificates} scenes, {false_certificates} false (worst sampled margin \
             {worst_margin:.2e}); 500 witnesses from {j} scenes, {false_witnesses} false; {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_affine_invariance() {
    let t = Instant::now();
    let (mut comparisons, mut disagreements, mut worst_gap) = (0usize, 0usize, 0.0f64);
    for s in 0..50u64 {
        let rng = &mut stream(7, s);
        let d = rng.random_range(1.0..4.0);
        let balls = random_balls(rng, d, 0.05, 0.99);
        for m in 0..50u64 {
            let rng = &mut stream(70 + s, m);
            let map = loop {
                let rows = [(); 3].map(|_| [(); 3].map(|_| rng.random_range(-2.0..2.0)));
                if let Ok(map) = LinearMap::new(rows) {
                    break map;
                }
            };
            let mapped: Vec<MappedBall> = balls.iter().map(|&b| MappedBall::new(b, map)).collect();
            for _ in 0..10_000 {
                let u = unit(rng);
                let v = map.apply(u).normalized();
                for (b, mb) in balls.iter().zip(&mapped) {
                    let before = line_hits_ball(u, b, HitSemantics::Closed).unwrap();
                    let after = line_hits_mapped_ball(v, mb, HitSemantics::Closed).unwrap();
                    comparisons += 1;
                    let gap = (before.margin - after.margin).abs();
                    worst_gap = worst_gap.max(gap);
                    if gap > 1e-9 || (before.hit != after.hit && before.margin.abs() > 1e-9) {
                        disagreements += 1;
                    }
                }
            }
        }
    }
    let elapsed = t.elapsed();
    let pass = disagreements == 0;
    announce(
        7,
        pass,
        &format!("{comparisons} comparisons, {disagreements} disagreements, max margin gap {worst_gap:.2e}, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_boundary_semantics() {
    let r = (2.0f64 / 3.0).sqrt();
    let balls: Vec<Ball> = [Vector3::E1, Vector3::E2, Vector3::E3]
        .map(|c| Ball::new(c, r).unwrap())
        .to_vec();
    let closed = SceneConfig::new(EllipsoidMetric::SPHERE, balls.clone(), HitSemantics::Closed).unwrap();
    let open = closed.clone().with_semantics(HitSemantics::Open);
    let vc = verify(&closed, &VerifyOptions::default()).unwrap();
    let vo = verify(&open, &VerifyOptions::default()).unwrap();
    let closed_ok = vc == Verdict::CertifiedShadow { method: CertificateMethod::SignPattern };
    let open_ok = match &vo {
        Verdict::CertifiedNoShadow { witness } => balls
            .iter()
            .all(|b| !line_hits_ball(witness.direction, b, HitSemantics::Open).unwrap().hit),
        _ => false,
    };
    let pass = closed_ok && open_ok;
    announce(8, pass, &format!("closed: {vc}; open: {vo}"));
    assert!(pass);
}
