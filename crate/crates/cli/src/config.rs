//! The JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdl_core::model::{validate_params, Grid, InitialSpec, ProblemParams, RawParams};
use sdl_core::regularization::MAX_MOLLIFIER_DELTA;
use sdl_core::solver::StepConfig;

use crate::CliError;

/// Environment variable that replaces `outputs.directory`.
pub const OUTDIR_ENV: &str = "SDL_OUTDIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Solve,
    Verify,
    Converge,
    Depend,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Converge => "converge",
            Command::Depend => "depend",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
}

fn default_stride() -> usize {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub run_id: String,
    /// Snapshot every `stride` accepted steps.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_true")]
    pub emit_plots: bool,
}

/// Parameter axes for `sweep`; each cell keeps `M` and `T` from `params`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub m: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub params: RawParams,
    pub initial: InitialSpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub stepping: StepConfig,
    /// Mollification widths, coarse to fine; used when the data touches zero.
    #[serde(default)]
    pub schedule: Vec<f64>,
    pub outputs: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// A configuration whose every block has been validated.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: RunConfig,
    pub params: ProblemParams,
    pub grid: Grid,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `outputs.directory`, unless `SDL_OUTDIR` is set.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUTDIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.outputs.directory.clone(),
        }
    }

    pub fn validate(self) -> Result<Validated, CliError> {
        let params = validate_params(&self.params).map_err(CliError::from_core)?;
        let grid = Grid::new(self.grid.n).map_err(CliError::from_core)?;
        self.stepping.validate().map_err(CliError::from_core)?;
        sdl_core::make_initial(&self.initial, grid, &params).map_err(CliError::from_core)?;
        if let Some(bad) = self.schedule.iter().find(|d| !(**d > 0.0 && **d < MAX_MOLLIFIER_DELTA)) {
            return Err(CliError::Config(format!(
                "schedule entry {bad} outside (0, {MAX_MOLLIFIER_DELTA:.6})"
            )));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config("schedule must be strictly decreasing".into()));
        }
        if self.outputs.run_id.is_empty() || self.outputs.run_id.contains(['/', '\\']) {
            return Err(CliError::Config(format!("invalid run_id {:?}", self.outputs.run_id)));
        }
        if self.outputs.stride == 0 {
            return Err(CliError::Config("outputs.stride must be at least 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.m.is_empty() || sweep.p.is_empty() || sweep.alpha.is_empty() {
                return Err(CliError::Config("sweep axes must be nonempty".into()));
            }
        }
        Ok(Validated { config: self, params, grid })
    }
}
