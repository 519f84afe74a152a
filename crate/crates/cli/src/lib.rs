//! Configuration files, golden presets and run artifacts for the `tropism`
//! command-line tool.

pub mod config;
pub mod output;
pub mod presets;
pub mod verify;

use std::path::{Path, PathBuf};

use tropism_core::sim::{run, RunOutcome, RunStatus, SimConfig};

pub use config::{parse_config, ConfigFile};
pub use output::{render_svg, write_frames, Summary, SvgOptions};
pub use presets::preset;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BREAKDOWN: i32 = 2;
pub const EXIT_PUSH_FAILURE: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

pub fn exit_code(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::Breakdown { .. } => EXIT_BREAKDOWN,
        RunStatus::PushFailure { .. } => EXIT_PUSH_FAILURE,
    }
}

/// Paths of the artifacts written by [`run_to_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub frames: PathBuf,
    pub summary: PathBuf,
    pub figure: Option<PathBuf>,
}

/// Runs `cfg` and writes frames.csv, summary.json and, for planar runs,
/// figure.svg into `out`.
pub fn run_to_dir(cfg: &SimConfig, out: &Path) -> Result<(RunOutcome, Artifacts), CliError> {
    let outcome = run(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let artifacts = Artifacts {
        frames: out.join("frames.csv"),
        summary: out.join("summary.json"),
        figure: outcome
            .log
            .frames
            .iter()
            .all(|f| f.positions.iter().all(|p| p.z == 0.0))
            .then(|| out.join("figure.svg")),
    };
    write_frames(&outcome.log, cfg, &artifacts.frames)?;
    output::write_atomic(&artifacts.summary, Summary::of(&outcome).to_json().as_bytes())?;
    if let Some(path) = &artifacts.figure {
        render_svg(&outcome.log, cfg, path, &SvgOptions::default())?;
    }
    Ok((outcome, artifacts))
}
