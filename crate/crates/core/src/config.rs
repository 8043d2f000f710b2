//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//! nt = 4
//! nr = 4
//! snr_db = [4.0, 5.0, 6.0]
//! receiver = "joint-ml-sdr"    # disjoint-ml-sdr | joint-ml-sdr | turbo-multi
//!                              # turbo-single | full-list-turbo | ml-oracle
//! extraction = "direct"        # direct | rank1 | randomized
//! decoder = "spa"              # none | bf | spa
//!
//! [code]
//! n = 256
//! checks = 128
//! column_weight = 3
//! seed = 1
//! # alist = "code.alist"       # overrides the construction
//!
//! [trials]
//! max_codewords = 2000
//! max_bit_errors = 200
//!
//! [turbo]
//! max_turbo_iters = 3
//! radius = 2
//! clip = 8.0
//!
//! [exit]
//! detector = "joint-map-sdr"   # joint-map-sdr | full-list
//! i_a = [0.0, 0.25, 0.5, 0.75]
//! codewords = 20
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::MAX_EXHAUSTIVE_DIM;
use crate::extraction::DEFAULT_RANDOMIZATION_TRIALS;
use crate::ldpc::{build_regular_code, read_alist, CodeDefinition, LdpcError};
use crate::turbo::{TurboConfig, TurboError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Code(#[from] LdpcError),
    #[error(transparent)]
    Turbo(#[from] TurboError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    DisjointMlSdr,
    JointMlSdr,
    TurboMulti,
    TurboSingle,
    FullListTurbo,
    MlOracle,
}

impl ReceiverKind {
    pub fn is_turbo(self) -> bool {
        matches!(self, Self::TurboMulti | Self::TurboSingle | Self::FullListTurbo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extraction {
    #[default]
    Direct,
    Rank1,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    None,
    Bf,
    #[default]
    Spa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitDetector {
    #[default]
    JointMapSdr,
    FullList,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSpec {
    pub n: usize,
    pub checks: usize,
    pub column_weight: usize,
    pub seed: u64,
    pub alist: Option<PathBuf>,
}

impl Default for CodeSpec {
    fn default() -> Self {
        Self { n: 256, checks: 128, column_weight: 3, seed: 1, alist: None }
    }
}

impl CodeSpec {
    pub fn build(&self) -> Result<CodeDefinition, ConfigError> {
        match &self.alist {
            Some(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                Ok(read_alist(std::io::BufReader::new(file))?)
            }
            None => Ok(build_regular_code(
                self.n,
                self.checks,
                self.column_weight,
                &mut ChaCha8Rng::seed_from_u64(self.seed),
            )?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub max_codewords: usize,
    /// The SNR point ends once this many bit errors are collected...
    pub max_bit_errors: usize,
    /// ...and at least this many codewords were simulated.
    pub min_codewords: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { max_codewords: 1000, max_bit_errors: 200, min_codewords: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExitSettings {
    pub detector: ExitDetector,
    pub i_a: Vec<f64>,
    pub codewords: usize,
}

impl Default for ExitSettings {
    fn default() -> Self {
        Self { detector: ExitDetector::JointMapSdr, i_a: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9], codewords: 20 }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_antennas() -> usize {
    4
}

fn default_randomization_trials() -> usize {
    DEFAULT_RANDOMIZATION_TRIALS
}

fn default_bf_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_antennas")]
    pub nt: usize,
    #[serde(default = "default_antennas")]
    pub nr: usize,
    pub snr_db: Vec<f64>,
    pub receiver: ReceiverKind,
    #[serde(default)]
    pub extraction: Extraction,
    #[serde(default)]
    pub decoder: DecoderKind,
    #[serde(default = "default_randomization_trials")]
    pub randomization_trials: usize,
    #[serde(default = "default_bf_iters")]
    pub bf_iters: usize,
    #[serde(default)]
    pub code: CodeSpec,
    #[serde(default)]
    pub trials: TrialConfig,
    #[serde(default)]
    pub turbo: TurboConfig,
    #[serde(default)]
    pub exit: ExitSettings,
}

impl ExperimentConfig {
    /// A configuration with every optional field at its default.
    pub fn new(receiver: ReceiverKind, snr_db: Vec<f64>) -> Self {
        Self {
            seed: default_seed(),
            nt: default_antennas(),
            nr: default_antennas(),
            snr_db,
            receiver,
            extraction: Extraction::default(),
            decoder: DecoderKind::default(),
            randomization_trials: default_randomization_trials(),
            bf_iters: default_bf_iters(),
            code: CodeSpec::default(),
            trials: TrialConfig::default(),
            turbo: TurboConfig::default(),
            exit: ExitSettings::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.snr_db.is_empty() {
            return bad("snr_db must list at least one point".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db values must be finite".into());
        }
        if self.nt == 0 || self.nr == 0 {
            return bad("nt and nr must be positive".into());
        }
        if 2 * self.nt > MAX_EXHAUSTIVE_DIM {
            return bad(format!("nt = {} exceeds the enumeration limit", self.nt));
        }
        if self.trials.max_codewords == 0 || self.trials.max_bit_errors == 0 {
            return bad("trial limits must be positive".into());
        }
        if self.randomization_trials == 0 {
            return bad("randomization_trials must be positive".into());
        }
        if self.code.alist.is_none() && !self.code.n.is_multiple_of(2 * self.nt) {
            return bad(format!("code length {} is not a multiple of 2*nt", self.code.n));
        }
        if self.extraction == Extraction::Randomized
            && self.decoder == DecoderKind::Spa
            && matches!(self.receiver, ReceiverKind::DisjointMlSdr | ReceiverKind::JointMlSdr)
        {
            return bad("randomized extraction yields hard symbols only; use decoder none or bf".into());
        }
        if self.exit.codewords == 0 {
            return bad("exit.codewords must be positive".into());
        }
        if let Some(v) = self.exit.i_a.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return bad(format!("exit.i_a value {v} outside [0, 1)"));
        }
        self.turbo.validate()?;
        Ok(())
    }
}
