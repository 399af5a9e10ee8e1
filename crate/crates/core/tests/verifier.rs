use umbra_core::geometry::{Ball, EllipsoidMetric, HitSemantics, Vector3};
use umbra_core::optimizer::{family_config, FamilyParams};
use umbra_core::scene::SceneConfig;
use umbra_core::verifier::{
    adaptive_cover, certified_cover_mesh, find_missing_line, mesh_certificate, sample_coverage, verify,
    AdaptiveOptions, CertificateMethod, Verdict, VerifyError, VerifyOptions,
};

fn sphere(balls: Vec<Ball>, sem: HitSemantics) -> SceneConfig {
    SceneConfig::new(EllipsoidMetric::SPHERE, balls, sem).unwrap()
}

fn orthogonal(r: f64, sem: HitSemantics) -> SceneConfig {
    sphere([Vector3::E1, Vector3::E2, Vector3::E3].map(|c| Ball::new(c, r).unwrap()).to_vec(), sem)
}

#[test]
fn sampling_examples() {
    let one = sphere(vec![Ball::new(Vector3::E3, 0.8).unwrap()], HitSemantics::Closed);
    let s = sample_coverage(&one, 1_000_000, None).unwrap();
    assert!((s.fraction_covered - 0.4).abs() <= 0.002);
    let pair = sphere(
        vec![Ball::new(Vector3::E3, 0.999).unwrap(), Ball::new(-Vector3::E3, 0.999).unwrap()],
        HitSemantics::Closed,
    );
    let s = sample_coverage(&pair, 1_000_000, Some(1)).unwrap();
    assert!((s.fraction_covered - 0.955_28).abs() <= 0.002, "{s:?}");
    assert_eq!(sample_coverage(&sphere(vec![], HitSemantics::Closed), 10, None), Err(VerifyError::EmptyScene));
}

#[test]
fn single_ball_witness_is_equatorial() {
    let cfg = sphere(vec![Ball::new(Vector3::E3, 0.9).unwrap()], HitSemantics::Closed);
    let w = find_missing_line(&cfg, 4, 100, 0).unwrap();
    assert!(w.direction.z.abs() < 1e-9);
    for level in 0..5 {
        assert!(!certified_cover_mesh(&cfg, level).unwrap());
    }
}

#[test]
fn orthogonal_tangency() {
    let r = (2.0f64 / 3.0).sqrt();
    let closed = verify(&orthogonal(r, HitSemantics::Closed), &VerifyOptions::default()).unwrap();
    assert_eq!(closed, Verdict::CertifiedShadow { method: CertificateMethod::SignPattern });
    let open = verify(&orthogonal(r, HitSemantics::Open), &VerifyOptions::default()).unwrap();
    let w = open.witness().expect("open balls leave the tangent line free");
    let d = w.direction;
    assert!((d.x.abs() - d.y.abs()).abs() < 1e-9 && (d.y.abs() - d.z.abs()).abs() < 1e-9);
}

#[test]
fn mesh_certificate_agrees_with_oracle() {
    let cfg = orthogonal(0.9, HitSemantics::Closed);
    let level = (0..8).find(|&l| certified_cover_mesh(&cfg, l).unwrap()).expect("certified at some level");
    assert!(certified_cover_mesh(&cfg, level + 1).unwrap());
    let s = sample_coverage(&cfg, 1_000_000, None).unwrap();
    assert_eq!(s.fraction_covered, 1.0);
    assert!(s.min_margin >= -1e-9);
}

#[test]
fn near_limit_family_scene_is_certified_both_ways() {
    let cfg = family_config(FamilyParams::new(1.0 - 1e-8, 0.99, 2.9).unwrap()).unwrap();
    let s = sample_coverage(&cfg, 1_000_000, None).unwrap();
    assert!(s.min_margin >= 0.0 && s.fraction_covered == 1.0, "{s:?}");
    let balls: &[Ball; 3] = cfg.balls().try_into().unwrap();
    assert!(umbra_core::verifier::cone_cover_certificate(balls).unwrap());
    let rep = adaptive_cover(&cfg, &AdaptiveOptions::default()).unwrap();
    assert!(rep.certified, "{rep:?}");
    assert!(verify(&cfg, &VerifyOptions::default()).unwrap().is_shadow());
}

#[test]
fn family_099_099_29_has_a_missing_line() {
    let cfg = family_config(FamilyParams::new(0.99, 0.99, 2.9).unwrap()).unwrap();
    let s = sample_coverage(&cfg, 1_000_000, None).unwrap();
    assert!(s.min_margin < -9e-3, "{s:?}");
    let v = verify(&cfg, &VerifyOptions::default()).unwrap();
    let w = v.witness().expect("no-shadow witness");
    assert!(w.margins.iter().all(|&m| m < -9e-3));
    assert!(!mesh_certificate(&cfg, 5).unwrap().certified);
}

#[test]
fn verify_is_thread_count_independent() {
    let cfg = orthogonal(0.75, HitSemantics::Closed);
    let opts = VerifyOptions { seed: 5, ..VerifyOptions::default() };
    let a = verify(&cfg, &opts).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| verify(&cfg, &opts).unwrap());
    assert_eq!(a, b);
}
