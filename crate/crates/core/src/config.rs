//! Run configuration: one JSON document covering grid, noise, code, RUS
//! loop, boundary targets, calibration search and output paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::BoundaryTargets;
use crate::error::{DomainError, Error};
use crate::injection::{BranchPolicy, ErasureLocations, OutputNoiseOrder, RusConfig};
use crate::noise::NoiseParams;
use crate::outer_code::OuterCodeParams;
use crate::qmath::PureState;
use crate::sweep::GridSpec;

pub const SEED_ENV: &str = "LIDMAS_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` has the wrong type: {msg}")]
    Type { key: String, msg: String },
    #[error("config key `{key}` violates {constraint}")]
    Invalid { key: String, constraint: String },
}

impl ConfigError {
    fn invalid(section: &str, e: DomainError) -> Self {
        ConfigError::Invalid {
            key: format!("{section}.{}", e.name),
            constraint: format!("{} (got {})", e.constraint, e.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputState {
    Zero,
    One,
    Plus,
    Minus,
    Magic,
    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    Bloch { theta: f64, phi: f64 },
}

impl InputState {
    pub fn state(&self) -> PureState {
        match *self {
            InputState::Zero => PureState::zero(),
            InputState::One => PureState::one(),
            InputState::Plus => PureState::plus(),
            InputState::Minus => PureState::minus(),
            InputState::Magic => PureState::magic(),
            InputState::Bloch { theta, phi } => PureState::from_bloch_angles(theta, phi),
        }
    }
}

/// Serializable form of [`RusConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RusSection {
    pub r_max: u32,
    pub branch_policy: BranchPolicy,
    pub input_state: InputState,
    pub erasure_locations: ErasureLocations,
    pub output_noise: OutputNoiseOrder,
}

impl Default for RusSection {
    fn default() -> Self {
        let d = RusConfig::default();
        Self {
            r_max: d.r_max,
            branch_policy: d.branch_policy,
            input_state: InputState::Plus,
            erasure_locations: d.erasure_locations,
            output_noise: d.output_noise,
        }
    }
}

impl RusSection {
    pub fn to_config(&self) -> RusConfig {
        RusConfig {
            r_max: self.r_max,
            branch_policy: self.branch_policy,
            input_state: self.input_state.state(),
            erasure_locations: self.erasure_locations,
            output_noise: self.output_noise,
        }
    }
}

/// Calibration search space and acceptance brackets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSpec {
    pub alpha_s: Vec<f64>,
    pub beta: Vec<f64>,
    pub p_dep_out: Vec<f64>,
    pub p_branch_fail: Vec<f64>,
    /// Coordinate sweeps over all four parameters.
    pub passes: u32,
    /// Trials per grid point while searching; the final check uses the grid's.
    pub search_trials: u64,
    /// Mid-grid `(P_succ, ⟨R⟩, F_log)` the search aims for.
    pub target_mid: [f64; 3],
    pub p_succ_min: f64,
    pub rounds_band: [f64; 2],
    pub rounds_mid_band: [f64; 2],
    pub f_log_band: [f64; 2],
    /// Weight of squared bracket violations in the objective.
    pub penalty: f64,
}

fn steps(lo: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((lo + step * i as f64) * 1e6).round() / 1e6).collect()
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            alpha_s: steps(0.05, 0.025, 19),
            beta: steps(0.10, 0.025, 17),
            p_dep_out: steps(0.0, 0.01, 41),
            p_branch_fail: steps(0.0, 0.005, 41),
            passes: 3,
            search_trials: 2000,
            target_mid: [0.95, 1.175, 0.785],
            p_succ_min: 0.94,
            rounds_band: [1.10, 1.25],
            rounds_mid_band: [1.15, 1.20],
            f_log_band: [0.76, 0.81],
            penalty: 100.0,
        }
    }
}

impl CalibrationSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, constraint: &str| {
            Err(ConfigError::Invalid {
                key: format!("calibration.{key}"),
                constraint: constraint.into(),
            })
        };
        for (key, v) in [
            ("alpha_s", &self.alpha_s),
            ("beta", &self.beta),
            ("p_dep_out", &self.p_dep_out),
            ("p_branch_fail", &self.p_branch_fail),
        ] {
            if v.is_empty() {
                return bad(key, "candidate list is non-empty");
            }
        }
        if self.search_trials < 1 {
            return bad("search_trials", "search_trials >= 1");
        }
        for (key, b) in [
            ("rounds_band", self.rounds_band),
            ("rounds_mid_band", self.rounds_mid_band),
            ("f_log_band", self.f_log_band),
        ] {
            if !(b[0] <= b[1]) {
                return bad(key, "lower bound <= upper bound");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub sweep_csv: String,
    /// Sensitivity files are `<prefix><d>.csv`.
    pub sensitivity_prefix: String,
    pub boundary_csv: String,
    pub manifest: String,
    pub calibrated: String,
    pub calibration_report: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            sweep_csv: "sweep.csv".into(),
            sensitivity_prefix: "sensitivity_d".into(),
            boundary_csv: "boundary.csv".into(),
            manifest: "manifest.txt".into(),
            calibrated: "calibrated.json".into(),
            calibration_report: "calibration_report.txt".into(),
        }
    }
}

impl OutputSpec {
    pub fn sweep_path(&self) -> PathBuf {
        self.dir.join(&self.sweep_csv)
    }

    pub fn sensitivity_path(&self, d: u32) -> PathBuf {
        self.dir.join(format!("{}{d}.csv", self.sensitivity_prefix))
    }

    pub fn boundary_path(&self) -> PathBuf {
        self.dir.join(&self.boundary_csv)
    }

    /// Manifest of one subcommand, e.g. `sweep.manifest.txt`.
    pub fn manifest_path(&self, command: &str) -> PathBuf {
        self.dir.join(format!("{command}.{}", self.manifest))
    }

    pub fn calibrated_path(&self) -> PathBuf {
        self.dir.join(&self.calibrated)
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(&self.calibration_report)
    }
}

/// The `noise` section's `s_db` and `p_base` are overridden by the grid axes
/// in sweeps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub noise: NoiseParams,
    pub code: OuterCodeParams,
    pub rus: RusSection,
    pub targets: BoundaryTargets,
    pub calibration: CalibrationSpec,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Err(Error::Spec(msg)) = self.grid.validate() {
            let key = [("n_trials", "n_trials"), ("s_db v", "s_db"), ("p_base", "p_base"), ("distance ", "distances")]
                .into_iter()
                .find(|(prefix, _)| msg.starts_with(prefix))
                .map_or("axes", |(_, key)| key);
            return Err(ConfigError::Invalid {
                key: format!("grid.{key}"),
                constraint: msg,
            });
        }
        self.noise.validate().map_err(|e| ConfigError::invalid("noise", e))?;
        for &d in &self.grid.distances {
            self.code
                .with_distance(d)
                .validate()
                .map_err(|e| ConfigError::invalid("code", e))?;
        }
        self.code.validate().map_err(|e| ConfigError::invalid("code", e))?;
        self.rus.to_config().validate().map_err(|e| ConfigError::invalid("rus", e))?;
        self.targets.validate().map_err(|e| ConfigError::invalid("targets", e))?;
        self.calibration.validate()?;
        Ok(())
    }

    pub fn rus_config(&self) -> RusConfig {
        self.rus.to_config()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A parsed config plus whether it pinned the master seed itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub seed_in_file: bool,
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let config: RunConfig = {
        let mut record = |path: serde_ignored::Path| unknown.push(path.to_string());
        let ignoring = serde_ignored::Deserializer::new(&mut de, &mut record);
        serde_path_to_error::deserialize(ignoring).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                ConfigError::Parse(inner.to_string())
            } else {
                ConfigError::Type {
                    key,
                    msg: inner.to_string(),
                }
            }
        })?
    };
    de.end().map_err(|e| ConfigError::Parse(e.to_string()))?;
    if let Some(key) = unknown.into_iter().next() {
        return Err(ConfigError::UnknownKey(key));
    }
    config.validate()?;

    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let seed_in_file = value.pointer("/grid/master_seed").is_some();
    Ok(LoadedConfig { config, seed_in_file })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub trials: Option<u64>,
}

/// Seed precedence: flag, then file, then `LIDMAS_SEED`, then the default.
pub fn apply_overrides(
    loaded: LoadedConfig,
    overrides: &Overrides,
    env_seed: Option<&str>,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = loaded.config;
    if let Some(seed) = overrides.seed {
        cfg.grid.master_seed = seed;
    } else if !loaded.seed_in_file {
        if let Some(raw) = env_seed {
            cfg.grid.master_seed = raw.trim().parse().map_err(|_| ConfigError::Invalid {
                key: SEED_ENV.into(),
                constraint: format!("an unsigned 64-bit integer (got {raw:?})"),
            })?;
        }
    }
    if let Some(dir) = &overrides.out_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(n) = overrides.trials {
        cfg.grid.n_trials = n;
    }
    cfg.validate()?;
    Ok(cfg)
}
