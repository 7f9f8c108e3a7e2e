//! Run configuration: a JSON file plus `--set key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use srcsel_core::dataset::SynthConfig;
use srcsel_core::folds::CvConfig;
use srcsel_core::predictor::TrainConfig;
use srcsel_core::rpa::RpaConfig;
use srcsel_core::selection::Method;

use crate::error::CliError;

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the subject folds and of the Random method.
    pub seed: u64,
    pub synth: SynthConfig,
    pub cv: CvConfig,
    pub rpa: RpaConfig,
    pub train: TrainConfig,
    /// Number of leave-groups-out folds over subjects.
    pub subject_folds: usize,
    /// Candidates per method for `compare`.
    pub candidates: usize,
    /// Candidate counts for `sweep`.
    pub sweep_candidates: Vec<usize>,
    pub methods: Vec<Method>,
    /// Subjects whose intra-subject accuracy is below this are dropped at load.
    pub filter_intra: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            synth: SynthConfig::default(),
            cv: CvConfig::default(),
            rpa: RpaConfig::default(),
            train: TrainConfig::default(),
            subject_folds: 10,
            candidates: 6,
            sweep_candidates: (1..=10).collect(),
            methods: Method::ALL.to_vec(),
            filter_intra: None,
        }
    }
}

/// Seeds of every stage, as recorded in output metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub experiment: u64,
    pub synth: u64,
    pub cv: u64,
    pub rpa: u64,
    pub train: u64,
}

impl RunConfig {
    /// Loads `path` (defaults when `None`) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses `seed` for every stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self.cv.seed = seed;
        self.rpa.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            experiment: self.seed,
            synth: self.synth.seed,
            cv: self.cv.seed,
            rpa: self.rpa.seed,
            train: self.train.seed,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.synth.validate()?;
        self.cv.validate()?;
        self.rpa.validate()?;
        self.train.validate()?;
        if self.subject_folds < 2 {
            return Err(CliError::Usage("subject_folds must be at least 2".into()));
        }
        if self.candidates == 0 {
            return Err(CliError::Usage("candidates must be at least 1".into()));
        }
        validate_counts(&self.sweep_candidates)?;
        if self.methods.is_empty() {
            return Err(CliError::Usage("methods must not be empty".into()));
        }
        if let Some(t) = self.filter_intra {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::Usage(format!("filter_intra must lie in [0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

fn validate_counts(counts: &[usize]) -> Result<(), CliError> {
    if counts.is_empty() || counts[0] == 0 || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(
            "candidate counts must be positive and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Sets the dotted `key` of `doc` to `value`, read as JSON when it parses and
/// as a string otherwise. Missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {item:?} is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Usage(format!("override {item:?} has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            _ => {
                return Err(CliError::Usage(format!(
                    "override {item:?}: {} is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split yields at least one part")
}

/// Parses `a..b` or `a..=b` (both inclusive) or a comma-separated list.
pub fn parse_counts(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse candidate counts {text:?}"));
    let counts: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    validate_counts(&counts)?;
    Ok(counts)
}
