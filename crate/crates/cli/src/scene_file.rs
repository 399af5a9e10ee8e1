//! The on-disk scene format.
//!
//! ```json
//! {
//!   "ellipsoid": { "d": 2.9 },
//!   "balls": [ { "center": [0, 0, 1], "radius": 0.99 } ],
//!   "semantics": "closed"
//! }
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use umbra_core::geometry::{Ball, EllipsoidMetric, HitSemantics, Vector3};
use umbra_core::scene::{SceneConfig, SURFACE_TOL};

/// Centers farther than this from the surface are rejected; closer ones
/// (but beyond the scene tolerance) are projected back onto it.
pub const SURFACE_REJECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipsoidFile {
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallFile {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub ellipsoid: EllipsoidFile,
    pub balls: Vec<BallFile>,
    pub semantics: HitSemantics,
}

impl SceneFile {
    pub fn from_config(cfg: &SceneConfig) -> SceneFile {
        SceneFile {
            ellipsoid: EllipsoidFile {
                d: cfg.ellipsoid().axis_ratio(),
            },
            balls: cfg
                .balls()
                .iter()
                .map(|b| BallFile {
                    center: b.center().to_array(),
                    radius: b.radius(),
                })
                .collect(),
            semantics: cfg.semantics(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene files serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneFileError {
    Io { path: String, message: String },
    /// Malformed document; `path` locates the offending field.
    Parse { path: String, message: String },
    Validation { message: String, deviation: Option<f64> },
}

impl fmt::Display for SceneFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneFileError::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            SceneFileError::Parse { path, message } => write!(f, "parse error at {path}: {message}"),
            SceneFileError::Validation { message, .. } => write!(f, "invalid scene: {message}"),
        }
    }
}

impl std::error::Error for SceneFileError {}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScene {
    pub config: SceneConfig,
    pub warnings: Vec<String>,
    /// Hex SHA-256 of the raw input bytes.
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    Some(&rest[..rest.find('`')?])
}

pub fn parse_scene_str(text: &str) -> Result<LoadedScene, SceneFileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SceneFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let message = e.inner().to_string();
        let mut path = e.path().to_string();
        // serde reports a missing field at its parent
        if let Some(field) = missing_field(&message) {
            path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
        }
        SceneFileError::Parse { path, message }
    })?;
    let mut loaded = validate(&file)?;
    loaded.digest = sha256_hex(text.as_bytes());
    Ok(loaded)
}

pub fn parse_scene(path: &Path) -> Result<LoadedScene, SceneFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| SceneFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scene_str(&text)
}

fn invalid(message: String, deviation: Option<f64>) -> SceneFileError {
    SceneFileError::Validation { message, deviation }
}

pub fn validate(file: &SceneFile) -> Result<LoadedScene, SceneFileError> {
    let d = file.ellipsoid.d;
    let metric =
        EllipsoidMetric::new(d).map_err(|_| invalid(format!("ellipsoid.d must be a finite number >= 1, got {d}"), None))?;
    let mut warnings = Vec::new();
    let mut balls = Vec::with_capacity(file.balls.len());
    for (i, b) in file.balls.iter().enumerate() {
        if !(b.radius.is_finite() && b.radius > 0.0) {
            return Err(invalid(format!("balls[{i}].radius must be positive, got {}", b.radius), None));
        }
        let mut center = Vector3::from(b.center);
        if !center.is_finite() {
            return Err(invalid(format!("balls[{i}].center must be finite"), None));
        }
        let deviation = metric.surface_deviation(center);
        if deviation.is_nan() || deviation > SURFACE_REJECT_TOL {
            return Err(invalid(
                format!("balls[{i}].center is off the ellipsoid surface by {deviation}"),
                Some(deviation),
            ));
        }
        if deviation > SURFACE_TOL {
            center = metric.project(center);
            warnings.push(format!(
                "balls[{i}].center was {deviation:e} off the surface and has been projected onto it"
            ));
        }
        if b.radius >= center.norm() {
            warnings.push(format!("balls[{i}] contains the ellipsoid center (radius {} >= |center| {})", b.radius, center.norm()));
        }
        balls.push(Ball::new(center, b.radius).map_err(|e| invalid(format!("balls[{i}]: {e}"), None))?);
    }
    let config = SceneConfig::new(metric, balls, file.semantics).map_err(|e| invalid(e.to_string(), None))?;
    Ok(LoadedScene {
        config,
        warnings,
        digest: String::new(),
    })
}
