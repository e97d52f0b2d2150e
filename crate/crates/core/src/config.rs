//! Run configuration: a TOML file plus flag overrides, resolved into a
//! [`RunSpec`] and an event stream.
//!
//! ```toml
//! mode = "single"        # single | universal | dimension
//! horizon = 200
//! seed = 7
//! shift = 2
//! output = "out"
//!
//! [stream]
//! profile = "injurious"  # empty | benign | injurious, or replay = "file"
//! max_len = 8
//!
//! [[functions]]
//! default = { kind = "length", scale = 1, offset = 0 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::function::FunctionSpec;
use crate::generator::{generate_adversarial_stream, generate_dimension_stream, GeneratorProfile, Pressure};
use crate::oracle::{EventStream, StreamError};

pub const DEFAULT_SHIFT: u64 = 2;
pub const MAX_HORIZON: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Single,
    Universal,
    Dimension,
}

impl std::str::FromStr for RunMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(RunMode::Single),
            "universal" => Ok(RunMode::Universal),
            "dimension" => Ok(RunMode::Dimension),
            _ => Err(ConfigError::Invalid(format!(
                "unknown mode {s:?}; expected single, universal or dimension"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub profile: Option<Pressure>,
    /// Stream file to replay, relative to the config file.
    pub replay: Option<PathBuf>,
    pub max_len: Option<usize>,
    pub events: Option<usize>,
    pub window: Option<u64>,
    pub targets: Option<u64>,
    pub per_stage: Option<usize>,
    /// Dimension mode: number of random sequences and prefix lengths.
    pub reals: Option<usize>,
    pub max_n: Option<usize>,
}

fn default_shift() -> u64 {
    DEFAULT_SHIFT
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shift")]
    pub shift: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("replay stream {}", source)]
    Stream {
        #[source]
        source: StreamError,
    },
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<RunMode>,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub profile: Option<Pressure>,
    pub shift: Option<u64>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(mode: RunMode, horizon: u64) -> Self {
        Self {
            mode,
            horizon,
            seed: 0,
            shift: DEFAULT_SHIFT,
            output: None,
            stream: StreamConfig::default(),
            functions: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|err| {
            let line = err
                .span()
                .map_or(1, |span| text[..span.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                line,
                message: err.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|err| ConfigError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        })?;
        let mut config = Self::parse(&text)?;
        if let (Some(replay), Some(dir)) = (&config.stream.replay, path.parent()) {
            config.stream.replay = Some(dir.join(replay));
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = o.profile {
            self.stream.profile = Some(p);
            self.stream.replay = None;
        }
        if let Some(s) = o.shift {
            self.shift = s;
        }
        if let Some(out) = &o.output {
            self.output = Some(out.clone());
        }
    }

    /// The functions this run uses, with mode defaults filled in.
    pub fn resolved_functions(&self) -> Vec<FunctionSpec> {
        if !self.functions.is_empty() {
            return self.functions.clone();
        }
        match self.mode {
            RunMode::Single => vec![FunctionSpec::length(1, 0)],
            RunMode::Dimension => vec![FunctionSpec::floor_log2()],
            RunMode::Universal => vec![FunctionSpec::length(8, 0)],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return bad(format!("horizon must be in 1..={MAX_HORIZON}"));
        }
        if self.shift > 32 {
            return bad("shift must be at most 32".into());
        }
        if self.stream.replay.is_some() && self.stream.profile.is_some() {
            return bad("stream.profile and stream.replay are exclusive".into());
        }
        if self.stream.max_len.is_some_and(|l| l > 40) {
            return bad("stream.max_len must be at most 40".into());
        }
        if self.stream.max_n.is_some_and(|n| n == 0 || n > 20) {
            return bad("stream.max_n must be in 1..=20".into());
        }
        let functions = self.resolved_functions();
        match self.mode {
            RunMode::Single | RunMode::Dimension if functions.len() != 1 => {
                return bad(format!("{:?} mode takes exactly one function", self.mode));
            }
            _ => {}
        }
        if functions.len() > 16 {
            return bad("at most 16 functions".into());
        }
        for (k, f) in functions.iter().enumerate() {
            f.validate()
                .map_err(|err| ConfigError::Invalid(format!("functions[{k}]: {err}")))?;
        }
        Ok(())
    }

    /// Validate, then produce the run's spec and stream.
    pub fn resolve(&self) -> Result<(RunSpec, EventStream), ConfigError> {
        self.validate()?;
        let functions = self.resolved_functions();
        let mut samples = Vec::new();
        let stream = if let Some(path) = &self.stream.replay {
            let text = std::fs::read_to_string(path).map_err(|err| ConfigError::Io {
                path: path.display().to_string(),
                message: err.to_string(),
            })?;
            let stream = EventStream::parse(&text).map_err(|source| ConfigError::Stream { source })?;
            stream.replay().map_err(|source| ConfigError::Stream { source })?;
            stream
        } else if self.mode == RunMode::Dimension {
            let reals = self.stream.reals.unwrap_or(6);
            let max_n = self.stream.max_n.unwrap_or(9);
            let (stream, sequences) = generate_dimension_stream(self.seed, reals, max_n);
            for s in &sequences {
                for n in 1..=max_n {
                    samples.push(SampleSpec {
                        sequence: s.to_token(),
                        n,
                    });
                }
            }
            stream
        } else {
            let pressure = self.stream.profile.unwrap_or(Pressure::Empty);
            let mut p = GeneratorProfile::preset(pressure, self.horizon, self.stream.max_len.unwrap_or(8));
            if pressure != Pressure::Empty {
                p.events = self.stream.events.unwrap_or(p.events);
                p.window = self.stream.window.unwrap_or(p.window);
                p.targets = self.stream.targets.unwrap_or(p.targets);
                p.per_stage = self.stream.per_stage.or(p.per_stage);
            }
            generate_adversarial_stream(self.seed, &p)
        };
        let spec = RunSpec {
            mode: self.mode,
            horizon: self.horizon,
            shift: self.shift,
            seed: self.seed,
            functions,
            samples,
            provenance: stream.provenance.clone(),
        };
        Ok((spec, stream))
    }
}

/// A dimension sample: the prefix of length `n` of `sequence`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub sequence: String,
    pub n: usize,
}

impl SampleSpec {
    pub fn bits(&self) -> Result<BitString, ConfigError> {
        BitString::from_token(&self.sequence)
            .map_err(|err| ConfigError::Invalid(format!("sample sequence: {err}")))
    }
}

/// Everything needed to re-run a construction from its event stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub mode: RunMode,
    pub horizon: u64,
    pub shift: u64,
    pub seed: u64,
    pub functions: Vec<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<SampleSpec>,
    #[serde(default)]
    pub provenance: String,
}
