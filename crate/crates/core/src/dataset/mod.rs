//! Subjects, the covset file format and the synthetic benchmark generator.

mod covset;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::spd::{Label, Trial};

pub use covset::{covset_from_str, covset_read, covset_to_string, covset_write, COVSET_VERSION};
pub use synth::{synth_generate, SynthConfig, TransferStructure};

/// One user's labeled trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: String,
    pub trials: Vec<Trial>,
    /// Free-form key/value information carried through files untouched.
    pub metadata: Map<String, Value>,
}

impl SubjectData {
    pub fn new(id: impl Into<String>, trials: Vec<Trial>) -> Self {
        SubjectData {
            id: id.into(),
            trials,
            metadata: Map::new(),
        }
    }

    /// Matrix dimension, `None` for a subject without trials.
    pub fn dim(&self) -> Option<usize> {
        self.trials.first().map(|t| t.cov.dim())
    }

    /// Label of every trial, in trial order.
    pub fn labels(&self) -> Vec<Label> {
        self.trials.iter().map(|t| t.label).collect()
    }

    pub fn classes(&self) -> BTreeSet<Label> {
        self.trials.iter().map(|t| t.label).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.trials {
            *counts.entry(t.label).or_insert(0) += 1;
        }
        counts
    }

    /// Trials at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Vec<Trial> {
        indices.iter().map(|&i| self.trials[i].clone()).collect()
    }

    /// Errors unless the subject has exactly two classes.
    pub fn require_two_classes(&self) -> Result<(Label, Label)> {
        let classes = self.classes();
        match classes.iter().copied().collect::<Vec<_>>()[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::input(format!(
                "subject {:?} has classes {classes:?}, expected exactly two",
                self.id
            ))),
        }
    }
}

/// Errors if two subjects share an id.
pub fn check_unique_ids(subjects: &[SubjectData]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for s in subjects {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::input(format!("duplicate subject id {:?}", s.id)));
        }
    }
    Ok(())
}
