//! Command-line front end: scene files, reports and the subcommands.

pub mod commands;
pub mod report;
pub mod scene_file;

pub use commands::{run, Cli, Command, Format};
pub use report::{Exit, Report, SCHEMA_VERSION};
pub use scene_file::{parse_scene, parse_scene_str, LoadedScene, SceneFile, SceneFileError};

/// Worker threads requested through `UMBRA_THREADS`; `Ok(None)` means
/// unset or zero (one per core).
pub fn thread_limit(value: Option<&str>) -> Result<Option<usize>, String> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(format!("UMBRA_THREADS must be a non-negative integer, got {v:?}")),
        },
    }
}
