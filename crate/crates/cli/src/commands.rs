use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as _;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use umbra_core::geometry::{line_hits_ball, line_hits_mapped_ball, HitSemantics, LinearMap, MappedBall};
use umbra_core::optimizer::{
    family_config, feasibility_check, min_axis_ratio, FamilyParams, OptimizeError, SearchOptions,
};
use umbra_core::scene::SceneConfig;
use umbra_core::tangent::{
    common_tangent_direction, equator_arc_limit, equator_arc_width, max_projection_ratio, TangentPair,
};
use umbra_core::verifier::{
    adaptive_cover, sample_coverage, sample_margins, sample_obstacles, verify, AdaptiveOptions, Lattice, Verdict,
    VerifyOptions,
};

use crate::report::{Exit, Report};
use crate::scene_file::{parse_scene, EllipsoidFile, LoadedScene, SceneFile, SceneFileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "umbra", version, about = "Shadow of balls centered on a prolate ellipsoid")]
pub struct Cli {
    /// Report format written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify shadow or no-shadow for a scene file.
    Verify {
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Highest uniform mesh level tried.
        #[arg(long, default_value_t = 5)]
        mesh_level: u32,
        /// Skip local mesh refinement.
        #[arg(long)]
        no_refine: bool,
        /// Lattice directions used for the reported covered fraction.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
    /// Evaluate a Fibonacci lattice of line directions.
    Oracle {
        scene: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Rotates the lattice; omitted means the canonical lattice.
        #[arg(long)]
        seed: Option<u64>,
        /// Write u1,u2,u3,maxMargin for every direction.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Scan x1/x2 for two tangent balls over the unit square of radii.
    TangentScan {
        #[arg(long, default_value_t = 500)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        refine: usize,
    },
    /// Equatorial width covered by a ball tangent to the unit ball at the pole.
    Equator {
        #[arg(long, required_unless_present = "limit", conflicts_with = "limit", allow_hyphen_values = true)]
        theta: Option<f64>,
        /// Approach theta -> pi instead.
        #[arg(long)]
        limit: bool,
    },
    /// Build the three-parameter family scene.
    Family {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        z: f64,
        /// Write the scene file here.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Search for the smallest axis ratio with a three-ball shadow.
    Optimize {
        #[arg(long, value_parser = parse_bracket, default_value = "2,4")]
        bracket: (f64, f64),
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, default_value_t = 64)]
        multistarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Objective evaluations per start.
        #[arg(long, default_value_t = 3000)]
        inner_iters: usize,
        /// Write the best configuration as a scene file.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Stretch the first axis by SCALE and check that the verdict carries over.
    Transform {
        scene: PathBuf,
        #[arg(long)]
        scale: f64,
        /// Write the mapped-ball scene here.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Directions compared between the two scenes.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

/// A failed command: its exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Failure {
        Failure {
            exit: Exit::Usage,
            error: error.into(),
        }
    }

    fn numeric(error: impl Into<anyhow::Error>) -> Failure {
        Failure {
            exit: Exit::Numeric,
            error: error.into(),
        }
    }
}

impl From<SceneFileError> for Failure {
    fn from(e: SceneFileError) -> Failure {
        Failure::usage(e)
    }
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Failure {
        match e {
            OptimizeError::OutOfDomain(_) | OptimizeError::InvalidOptions(_) | OptimizeError::BadBracket { .. } => {
                Failure::usage(e)
            }
            _ => Failure::numeric(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(path: &Path, report: &mut Report) -> Result<SceneConfig, Failure> {
    let LoadedScene {
        config,
        warnings,
        digest,
    } = parse_scene(path)?;
    report.input_digest = Some(digest);
    report.warnings.extend(warnings);
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::usage)
}

/// Runs one command; the report always comes back, failures included.
pub fn run(command: &Command) -> Report {
    let started = Instant::now();
    let name = match command {
        Command::Verify { .. } => "verify",
        Command::Oracle { .. } => "oracle",
        Command::TangentScan { .. } => "tangent-scan",
        Command::Equator { .. } => "equator",
        Command::Family { .. } => "family",
        Command::Optimize { .. } => "optimize",
        Command::Transform { .. } => "transform",
    };
    let mut report = Report::new(name);
    let outcome = match command {
        Command::Verify {
            scene,
            seed,
            mesh_level,
            no_refine,
            samples,
        } => run_verify(&mut report, scene, *seed, *mesh_level, *no_refine, *samples),
        Command::Oracle {
            scene,
            samples,
            seed,
            csv,
        } => run_oracle(&mut report, scene, *samples, *seed, csv.as_deref()),
        Command::TangentScan { grid, refine } => run_tangent_scan(&mut report, *grid, *refine),
        Command::Equator { theta, limit } => run_equator(&mut report, *theta, *limit),
        Command::Family { x, y, z, emit } => run_family(&mut report, *x, *y, *z, emit.as_deref()),
        Command::Optimize {
            bracket,
            tol,
            multistarts,
            seed,
            inner_iters,
            emit,
        } => {
            let opts = SearchOptions {
                bracket: *bracket,
                d_tol: *tol,
                multistarts: *multistarts,
                seed: *seed,
                inner_iters: *inner_iters,
            };
            run_optimize(&mut report, &opts, emit.as_deref())
        }
        Command::Transform {
            scene,
            scale,
            emit,
            samples,
            seed,
        } => run_transform(&mut report, scene, *scale, emit.as_deref(), *samples, *seed),
    };
    if let Err(f) = outcome {
        report.exit_code = f.exit;
        report.error = Some(format!("{:#}", f.error));
    }
    report.elapsed_seconds = started.elapsed().as_secs_f64();
    report
}

/// Re-checks a no-shadow witness against the scene before it is reported.
fn checked(verdict: Verdict, cfg: &SceneConfig) -> Result<Verdict, Failure> {
    if let Verdict::CertifiedNoShadow { witness } = &verdict {
        for b in cfg.balls() {
            let hit = line_hits_ball(witness.direction, b, cfg.semantics()).map_err(Failure::numeric)?;
            if hit.hit {
                return Err(Failure::numeric(anyhow::anyhow!(
                    "witness {} failed re-verification",
                    witness.direction
                )));
            }
        }
    }
    Ok(verdict)
}

fn run_verify(report: &mut Report, path: &Path, seed: u64, mesh_level: u32, no_refine: bool, samples: usize) -> Outcome {
    let cfg = load(path, report)?;
    let opts = VerifyOptions {
        mesh_max_level: mesh_level,
        adaptive: (!no_refine).then(AdaptiveOptions::default),
        seed,
        ..VerifyOptions::default()
    };
    let verdict = checked(verify(&cfg, &opts).map_err(Failure::usage)?, &cfg)?;
    report.exit_code = Exit::for_verdict(&verdict);
    if samples > 0 {
        let s = sample_coverage(&cfg, samples, None).map_err(Failure::numeric)?;
        report.fraction_covered = Some(s.fraction_covered);
        report.detail("samples", s.samples);
        report.detail("min_sampled_margin", s.min_margin);
    }
    report.detail("balls", cfg.balls().len());
    report.detail("axis_ratio", cfg.ellipsoid().axis_ratio());
    report.detail("semantics", cfg.semantics());
    report.verdict = Some(verdict);
    Ok(())
}

fn run_oracle(report: &mut Report, path: &Path, samples: usize, seed: Option<u64>, csv: Option<&Path>) -> Outcome {
    let cfg = load(path, report)?;
    let s = sample_coverage(&cfg, samples, seed).map_err(Failure::usage)?;
    report.fraction_covered = Some(s.fraction_covered);
    report.detail("samples", s.samples);
    report.detail("covered", s.covered);
    report.detail("min_margin", s.min_margin);
    report.detail("argmin_direction", s.argmin_direction);
    report.detail("seed", seed);
    if let Some(csv) = csv {
        let rows = sample_margins(&cfg, samples, seed).map_err(Failure::usage)?;
        let file = std::fs::File::create(csv)
            .with_context(|| format!("cannot create {}", csv.display()))
            .map_err(Failure::usage)?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "u1,u2,u3,maxMargin")?;
            for (u, m) in &rows {
                writeln!(w, "{:?},{:?},{:?},{:?}", u.x, u.y, u.z, m)?;
            }
            w.flush()
        };
        write().with_context(|| format!("cannot write {}", csv.display())).map_err(Failure::usage)?;
        report.detail("csv", csv.display().to_string());
    }
    Ok(())
}

fn run_tangent_scan(report: &mut Report, grid: usize, refine: usize) -> Outcome {
    let scan = max_projection_ratio(grid, refine).map_err(Failure::usage)?;
    report.detail("grid", grid);
    report.detail("refine", refine);
    report.detail("max_ratio", scan.max_ratio);
    report.detail("max_angle", scan.max_angle);
    report.detail("argmax", scan.argmax);
    report.detail("evaluated", scan.evaluated);
    report.detail("no_common_tangent", scan.no_common_tangent);
    report.detail("nonpositive_x2", scan.nonpositive_x2);
    report.detail("ratio_at_least_one", scan.ratio_at_least_one);
    report.detail("ratio_below_one_everywhere", scan.ratio_at_least_one == 0 && scan.max_ratio < 1.0);
    let probe = common_tangent_direction(TangentPair::new(0.9, 0.3).expect("valid pair")).map_err(Failure::numeric)?;
    report.detail("ratio_at_0.9_0.3", probe.ratio());
    Ok(())
}

fn run_equator(report: &mut Report, theta: Option<f64>, limit: bool) -> Outcome {
    match theta {
        Some(t) if !limit => {
            let w = equator_arc_width(t).map_err(Failure::usage)?;
            report.detail("theta", t);
            report.detail("width", w);
        }
        _ => {
            let l = equator_arc_limit(8);
            report.detail("samples", l.samples);
            report.detail("extrapolated", l.extrapolated);
            report.detail("analytic", l.analytic);
        }
    }
    Ok(())
}

fn run_family(report: &mut Report, x: f64, y: f64, z: f64, emit: Option<&Path>) -> Outcome {
    let cfg = family_config(FamilyParams { x, y, z })?;
    let file = SceneFile::from_config(&cfg);
    report.detail("scene", &file);
    report.detail("violations", feasibility_check(&cfg));
    if let Some(path) = emit {
        write_file(path, &file.to_json())?;
        report.detail("emitted", path.display().to_string());
    }
    Ok(())
}

fn run_optimize(report: &mut Report, opts: &SearchOptions, emit: Option<&Path>) -> Outcome {
    let result = min_axis_ratio(opts)?;
    let cert = adaptive_cover(&result.best_scene, &AdaptiveOptions::default()).map_err(Failure::numeric)?;
    report.detail("d_estimate", result.d_estimate);
    report.detail("bracket", result.bracket);
    report.detail("margin_at_best", result.margin_at_best);
    report.detail("best_scene_mesh_certified", cert.certified);
    report.detail("best_scene", SceneFile::from_config(&result.best_scene));
    report.detail("history", &result.history);
    report.detail("multistarts", opts.multistarts);
    report.detail("seed", opts.seed);
    if let Some(path) = emit {
        write_file(path, &SceneFile::from_config(&result.best_scene).to_json())?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MappedBallFile {
    center: [f64; 3],
    source_center: [f64; 3],
    radius: f64,
}

#[derive(Debug, Serialize)]
struct MappedScene {
    map: [[f64; 3]; 3],
    ellipsoid: EllipsoidFile,
    mapped_balls: Vec<MappedBallFile>,
    semantics: HitSemantics,
}

fn run_transform(report: &mut Report, path: &Path, scale: f64, emit: Option<&Path>, samples: usize, seed: u64) -> Outcome {
    let cfg = load(path, report)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Failure::usage(anyhow::anyhow!("--scale must be positive, got {scale}")));
    }
    if samples == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--samples must be positive")));
    }
    let map = LinearMap::diagonal(scale, 1.0, 1.0).map_err(Failure::usage)?;
    let mapped: Vec<MappedBall> = cfg.balls().iter().map(|&b| MappedBall::new(b, map)).collect();
    let sem = cfg.semantics();

    // every direction must be decided identically before and after the map
    let lattice = Lattice::new(samples, Some(seed));
    let mut disagreements = 0usize;
    let mut max_margin_gap: f64 = 0.0;
    for i in 0..samples {
        let u = lattice.point(i);
        let v = map.apply(u).normalized();
        for (b, mb) in cfg.balls().iter().zip(&mapped) {
            let before = line_hits_ball(u, b, sem).map_err(Failure::numeric)?;
            let after = line_hits_mapped_ball(v, mb, sem).map_err(Failure::numeric)?;
            if before.hit != after.hit {
                disagreements += 1;
            }
            max_margin_gap = max_margin_gap.max((before.margin - after.margin).abs());
        }
    }

    let verdict = checked(verify(&cfg, &VerifyOptions::default()).map_err(Failure::usage)?, &cfg)?;
    // the verdict carried to the mapped scene, checked there directly
    let carried = match &verdict {
        Verdict::CertifiedNoShadow { witness } => {
            let v = map.apply(witness.direction).normalized();
            let mut misses = true;
            for mb in &mapped {
                misses &= !line_hits_mapped_ball(v, mb, sem).map_err(Failure::numeric)?.hit;
            }
            misses
        }
        Verdict::CertifiedShadow { .. } => {
            let s = sample_obstacles(&mapped, sem, samples, Some(seed)).map_err(Failure::numeric)?;
            s.covered == s.samples
        }
        Verdict::Undecided { .. } => true,
    };

    let file = MappedScene {
        map: map.matrix(),
        ellipsoid: EllipsoidFile {
            d: cfg.ellipsoid().axis_ratio() * scale,
        },
        mapped_balls: cfg
            .balls()
            .iter()
            .map(|b| MappedBallFile {
                center: map.apply(b.center()).to_array(),
                source_center: b.center().to_array(),
                radius: b.radius(),
            })
            .collect(),
        semantics: sem,
    };
    if let Some(path) = emit {
        let mut s = serde_json::to_string_pretty(&file).expect("mapped scene serializes");
        s.push('\n');
        write_file(path, &s)?;
    }
    report.detail("scale", scale);
    report.detail("mapped_scene", &file);
    report.detail("directions_compared", samples);
    report.detail("disagreements", disagreements);
    report.detail("max_margin_difference", max_margin_gap);
    report.detail("verdict_carried_over", carried);
    report.exit_code = Exit::for_verdict(&verdict);
    report.verdict = Some(verdict);
    if disagreements > 0 || max_margin_gap > 1e-9 || !carried {
        return Err(Failure::numeric(anyhow::anyhow!(
            "affine invariance check failed: {disagreements} disagreements, margin gap {max_margin_gap:e}, verdict carried: {carried}"
        )));
    }
    Ok(())
}
