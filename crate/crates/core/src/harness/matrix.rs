use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_unique_ids, SubjectData};
use crate::error::{Error, Result};
use crate::features::intra_accuracy;
use crate::folds::{cv_splits, CvConfig};
use crate::mdm::MdmModel;
use crate::rpa::{PreparedSource, PreparedTarget, RpaConfig};
use crate::spd::Trial;

/// Cross-subject accuracies, rows are targets and columns sources. Where a row
/// and a column name the same subject the entry is its intra-subject accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyMatrix {
    pub target_ids: Vec<String>,
    pub source_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Intra-subject accuracy of each target.
    pub intra: Vec<f64>,
    /// Rows by descending off-diagonal sum, ties by index.
    pub row_order: Vec<usize>,
    /// Columns by descending off-diagonal sum, ties by index.
    pub col_order: Vec<usize>,
}

fn descending_order(sums: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]));
    order
}

impl AccuracyMatrix {
    pub fn new(
        target_ids: Vec<String>,
        source_ids: Vec<String>,
        values: Vec<Vec<f64>>,
        intra: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != target_ids.len() || intra.len() != target_ids.len() {
            return Err(Error::input(
                "accuracy matrix needs one row and one intra value per target",
            ));
        }
        if values.iter().any(|r| r.len() != source_ids.len()) {
            return Err(Error::input("accuracy matrix rows must have one value per source"));
        }
        if values.iter().flatten().chain(&intra).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("accuracies must lie in [0, 1]"));
        }
        let mut m = AccuracyMatrix {
            target_ids,
            source_ids,
            values,
            intra,
            row_order: Vec::new(),
            col_order: Vec::new(),
        };
        let row_sums: Vec<f64> = (0..m.target_ids.len()).map(|r| m.row_sum(r)).collect();
        let col_sums: Vec<f64> = (0..m.source_ids.len()).map(|c| m.column_sum(c)).collect();
        m.row_order = descending_order(&row_sums);
        m.col_order = descending_order(&col_sums);
        Ok(m)
    }

    pub fn is_diagonal(&self, row: usize, col: usize) -> bool {
        self.target_ids[row] == self.source_ids[col]
    }

    pub fn target_index(&self, id: &str) -> Option<usize> {
        self.target_ids.iter().position(|t| t == id)
    }

    pub fn source_index(&self, id: &str) -> Option<usize> {
        self.source_ids.iter().position(|s| s == id)
    }

    /// Transfer accuracy from `source_id` to `target_id`.
    pub fn get(&self, target_id: &str, source_id: &str) -> Result<f64> {
        let r = self
            .target_index(target_id)
            .ok_or_else(|| Error::input(format!("target {target_id:?} not in accuracy matrix")))?;
        let c = self
            .source_index(source_id)
            .ok_or_else(|| Error::input(format!("source {source_id:?} not in accuracy matrix")))?;
        Ok(self.values[r][c])
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        (0..self.source_ids.len())
            .filter(|&c| !self.is_diagonal(row, c))
            .map(|c| self.values[row][c])
            .sum()
    }

    pub fn column_sum(&self, col: usize) -> f64 {
        (0..self.target_ids.len())
            .filter(|&r| !self.is_diagonal(r, col))
            .map(|r| self.values[r][col])
            .sum()
    }

    /// Mean off-diagonal accuracy of a source column (`-inf` when it has none).
    pub fn column_mean(&self, col: usize) -> f64 {
        let n = (0..self.target_ids.len())
            .filter(|&r| !self.is_diagonal(r, col))
            .count();
        if n == 0 {
            f64::NEG_INFINITY
        } else {
            self.column_sum(col) / n as f64
        }
    }

    /// Square sub-matrix over `ids`, which must all be both targets and sources.
    pub fn restrict(&self, ids: &[String]) -> Result<AccuracyMatrix> {
        let rows = ids
            .iter()
            .map(|id| {
                self.target_index(id)
                    .ok_or_else(|| Error::input(format!("{id:?} is not a target")))
            })
            .collect::<Result<Vec<_>>>()?;
        let cols = ids
            .iter()
            .map(|id| {
                self.source_index(id)
                    .ok_or_else(|| Error::input(format!("{id:?} is not a source")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| self.values[r][c]).collect())
            .collect();
        let intra = rows.iter().map(|&r| self.intra[r]).collect();
        AccuracyMatrix::new(ids.to_vec(), ids.to_vec(), values, intra)
    }

    /// CSV with a `target_id` column followed by one column per source.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "target_id,{}", self.source_ids.join(","))?;
        for (id, row) in self.target_ids.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{id},{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::input(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: AccuracyMatrix = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let m = AccuracyMatrix::new(raw.target_ids, raw.source_ids, raw.values, raw.intra)?;
        if m.row_order != raw.row_order || m.col_order != raw.col_order {
            return Err(Error::input("stored row/column orders do not match the values"));
        }
        Ok(m)
    }
}

/// A target's side of every cross-validation round: the prepared training
/// split and the test split mapped into the aligned frame.
#[derive(Debug, Clone)]
pub struct TargetRounds {
    target_id: String,
    rounds: Vec<(PreparedTarget, Vec<Trial>)>,
}

impl TargetRounds {
    pub fn new(target: &SubjectData, cv: &CvConfig) -> Result<Self> {
        target.require_two_classes()?;
        let rounds = cv_splits(&target.labels(), cv)?
            .into_iter()
            .map(|(train, test)| {
                let prepared = PreparedTarget::new(&target.select(&train))?;
                let test = prepared.transform(&target.select(&test))?;
                Ok((prepared, test))
            })
            .collect::<Result<_>>()?;
        Ok(TargetRounds {
            target_id: target.id.clone(),
            rounds,
        })
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

/// Mean over the cross-validation rounds of the accuracy on the target's test
/// split of MDM trained on the source aligned to the target's training split.
///
/// The classifier is built from the rotated source class means, which equal
/// the class means of the rotated source trials. A rotation search that
/// converges from no start falls back to its best iterate with a warning.
pub fn transfer_accuracy_prepared(source: &PreparedSource, target: &TargetRounds, rpa: &RpaConfig) -> Result<f64> {
    let mut total = 0.0;
    for (prepared, test) in &target.rounds {
        let rot = source.rotation_to(prepared, rpa, true)?;
        if !rot.converged {
            log::warn!(
                "rotation search for target {} did not converge; using best iterate (objective {:.3e})",
                target.target_id,
                rot.objective
            );
        }
        total += MdmModel::from_means(rot.class_means)?.accuracy(test)?;
    }
    Ok(total / target.rounds.len() as f64)
}

/// Cross-subject accuracy of `source` on `target`.
pub fn transfer_accuracy(source: &SubjectData, target: &SubjectData, cv: &CvConfig, rpa: &RpaConfig) -> Result<f64> {
    source.require_two_classes()?;
    let rounds = TargetRounds::new(target, cv)?;
    transfer_accuracy_prepared(&PreparedSource::new(&source.trials)?, &rounds, rpa)
}

/// Every ordered pair of distinct subjects, plus intra-subject accuracies on the
/// diagonal. Pairs are evaluated in parallel; the result does not depend on the
/// number of threads.
pub fn build_accuracy_matrix(subjects: &[SubjectData], cv: &CvConfig, rpa: &RpaConfig) -> Result<AccuracyMatrix> {
    if subjects.len() < 2 {
        return Err(Error::input("an accuracy matrix needs at least 2 subjects"));
    }
    check_unique_ids(subjects)?;
    cv.validate()?;
    rpa.validate()?;
    let prepared = subjects
        .par_iter()
        .map(|s| {
            s.require_two_classes()?;
            PreparedSource::new(&s.trials)
        })
        .collect::<Result<Vec<_>>>()?;
    let rounds = subjects
        .par_iter()
        .map(|s| TargetRounds::new(s, cv))
        .collect::<Result<Vec<_>>>()?;
    let intra = subjects
        .par_iter()
        .map(|s| intra_accuracy(s, cv))
        .collect::<Result<Vec<_>>>()?;
    let n = subjects.len();
    let cells = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let (t, s) = (i / n, i % n);
            if t == s {
                Ok(intra[t])
            } else {
                transfer_accuracy_prepared(&prepared[s], &rounds[t], rpa)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = subjects.iter().map(|s| s.id.clone()).collect();
    let values = cells.chunks(n).map(<[f64]>::to_vec).collect();
    AccuracyMatrix::new(ids.clone(), ids, values, intra)
}
