use std::fs;
use std::path::{Path, PathBuf};

use catsynth::analytics::{AncillaQubit, PnrdOutcome, SchemeParams};
use catsynth::fock::DetectorModel;
use catsynth::protocols::{HomodyneWindow, LeafSource};
use catsynth::wigner::GridSpec;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Fock,
    Gaussian,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Daokw,
    Pnrd,
    Onoff,
    Amplify,
    Cascade,
}

/// Efficiency and dark parameter of one on/off detector. The displacement in
/// front of the second detector comes from `params.beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub eta: f64,
    pub nu: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { eta: 1.0, nu: 0.0 }
    }
}

impl DetectorConfig {
    pub fn model(&self, displacement: C64) -> catsynth::Result<DetectorModel> {
        DetectorModel::new(self.eta, self.nu, displacement)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detectors {
    #[serde(default)]
    pub b: DetectorConfig,
    #[serde(default)]
    pub c: DetectorConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    pub alpha: f64,
    /// Phases of the two input cats, radians.
    pub phases: [f64; 2],
    pub window: HomodyneWindow,
}

impl Default for AmplifierConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            phases: [0.0, std::f64::consts::PI],
            window: HomodyneWindow::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub target_amplitude: f64,
    /// Radians.
    pub target_phase: f64,
    pub base_amplitude: f64,
    pub window: HomodyneWindow,
    pub leaves: LeafSource,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            target_amplitude: 1.4,
            target_phase: 0.0,
            base_amplitude: 0.7,
            window: HomodyneWindow {
                x0: 0.0,
                epsilon: 0.1,
            },
            leaves: LeafSource::ExactCat,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Onoff
}

fn default_params() -> SchemeParams {
    SchemeParams::new(0.3, 0.95)
}

fn default_engine() -> EngineChoice {
    EngineChoice::Fock
}

fn default_dim() -> usize {
    32
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_photons() -> usize {
    1
}

fn default_outcome() -> PnrdOutcome {
    PnrdOutcome::ZeroTwo
}

/// Fully resolved experiment description; every output JSON embeds it.
/// Quadrature units follow `x = a + a^dag`; phases are radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_params")]
    pub params: SchemeParams,
    /// Replace `params.beta` by the closed-form optimal displacement.
    #[serde(default)]
    pub optimal_beta: bool,
    #[serde(default)]
    pub detectors: Detectors,
    #[serde(default = "default_engine")]
    pub engine: EngineChoice,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Wigner grid written next to the result when present.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Photon number heralded in the number-resolving subtraction scheme.
    #[serde(default = "default_photons")]
    pub photons: usize,
    #[serde(default = "default_outcome")]
    pub outcome: PnrdOutcome,
    /// Ancilla for the number-resolving scheme; derived from the target if absent.
    #[serde(default)]
    pub ancilla: Option<AncillaQubit>,
    #[serde(default)]
    pub amplifier: AmplifierConfig,
    #[serde(default)]
    pub cascade: CascadeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: key `{key}` (line {line}, column {column}): {message}")]
    Parse {
        path: PathBuf,
        key: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                path: path.to_path_buf(),
                key,
                line: inner.line(),
                column: inner.column(),
                message: strip_position(&inner.to_string()),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: catsynth::Error| ConfigError::Invalid(e.to_string());
        self.params.validate().map_err(invalid)?;
        self.detectors
            .b
            .model(C64::new(0.0, 0.0))
            .map_err(invalid)?;
        self.detectors.c.model(self.params.beta).map_err(invalid)?;
        if self.dim < 4 {
            return Err(ConfigError::Invalid(format!("dim {} is below 4", self.dim)));
        }
        if let Some(grid) = &self.grid {
            grid.validate().map_err(invalid)?;
        }
        if self.photons == 0 {
            return Err(ConfigError::Invalid("photons must be at least 1".into()));
        }
        if let Some(a) = &self.ancilla {
            AncillaQubit::new(a.b0, a.b1).map_err(invalid)?;
        }
        let amp = &self.amplifier;
        if !(amp.alpha >= 0.0 && amp.alpha.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "amplifier.alpha {} must be non-negative",
                amp.alpha
            )));
        }
        HomodyneWindow::new(amp.window.x0, amp.window.epsilon).map_err(invalid)?;
        HomodyneWindow::new(self.cascade.window.x0, self.cascade.window.epsilon)
            .map_err(invalid)?;
        Ok(())
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}
