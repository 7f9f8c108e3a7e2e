use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::AccuracyMatrix;
use super::wilcoxon::wilcoxon_signed_rank;
use crate::dataset::{check_unique_ids, SubjectData};
use crate::error::{Error, Result};
use crate::features::{intra_accuracy, recentered_summary, FeatureRow, PairFeatures};
use crate::folds::{cv_splits, CvConfig};
use crate::predictor::{TppModel, TrainConfig};
use crate::selection::{run_method, Method, PoolEntry, SelectionContext};

/// p-value at or above which two methods are reported as not distinguishable.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// One fold of the leave-groups-out protocol over subjects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupFold {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Partitions subjects into `n_folds` test groups (seeded shuffle, then
/// round-robin). Ids keep their input order inside each list.
pub fn leave_groups_out_folds(ids: &[String], n_folds: usize, seed: u64) -> Result<Vec<GroupFold>> {
    if n_folds < 2 {
        return Err(Error::Fold(format!("need at least 2 subject folds, got {n_folds}")));
    }
    if ids.len() < n_folds {
        return Err(Error::Fold(format!(
            "{} subjects cannot fill {n_folds} subject folds",
            ids.len()
        )));
    }
    if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
        return Err(Error::Fold("subject ids must be unique".into()));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut group = vec![0; ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        group[i] = pos % n_folds;
    }
    Ok((0..n_folds)
        .map(|f| {
            let (test, train): (Vec<_>, Vec<_>) = ids.iter().zip(&group).partition(|(_, g)| **g == f);
            GroupFold {
                train_ids: train.into_iter().map(|(id, _)| id.clone()).collect(),
                test_ids: test.into_iter().map(|(id, _)| id.clone()).collect(),
            }
        })
        .collect())
}

/// Features of every ordered pair of distinct subjects. The target side uses the
/// training split of the first cross-validation round, the source side all of
/// the source's trials. Accuracies are filled in from `matrix` when given.
pub fn pair_feature_rows(
    subjects: &[SubjectData],
    cv: &CvConfig,
    matrix: Option<&AccuracyMatrix>,
) -> Result<Vec<FeatureRow>> {
    check_unique_ids(subjects)?;
    let summaries = subjects
        .par_iter()
        .map(|s| {
            s.require_two_classes()?;
            let (train, _) = cv_splits(&s.labels(), cv)?.swap_remove(0);
            Ok((
                recentered_summary(&s.trials)?,
                recentered_summary(&s.select(&train))?,
                intra_accuracy(s, cv)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(subjects.len() * subjects.len().saturating_sub(1));
    for (t, target) in subjects.iter().enumerate() {
        for (s, source) in subjects.iter().enumerate() {
            if s == t {
                continue;
            }
            let (source_all, _, source_intra) = &summaries[s];
            let features = PairFeatures::from_summaries(&summaries[t].1, source_all, *source_intra)?;
            let accuracy = matrix.map(|m| m.get(&target.id, &source.id)).transpose()?;
            rows.push(FeatureRow {
                source_id: source.id.clone(),
                target_id: target.id.clone(),
                features,
                accuracy,
            });
        }
    }
    Ok(rows)
}

/// Pair features keyed by `(source_id, target_id)`.
pub type FeatureTable = BTreeMap<(String, String), PairFeatures>;

pub fn feature_table(rows: &[FeatureRow]) -> FeatureTable {
    rows.iter()
        .map(|r| ((r.source_id.clone(), r.target_id.clone()), r.features))
        .collect()
}

/// Rows usable for training within a fold: both ends are training subjects.
pub fn fold_training_rows<'a>(rows: &'a [FeatureRow], fold: &GroupFold) -> Vec<&'a FeatureRow> {
    let train: BTreeSet<&str> = fold.train_ids.iter().map(String::as_str).collect();
    rows.iter()
        .filter(|r| train.contains(r.source_id.as_str()) && train.contains(r.target_id.as_str()))
        .collect()
}

/// One predictor per fold, each trained only on pairs of that fold's training
/// subjects with the same hyperparameters.
pub fn train_fold_predictors(rows: &[FeatureRow], folds: &[GroupFold], cfg: &TrainConfig) -> Result<Vec<TppModel>> {
    folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let selected = fold_training_rows(rows, fold);
            let features: Vec<PairFeatures> = selected.iter().map(|r| r.features).collect();
            let accuracies = selected
                .iter()
                .map(|r| {
                    r.accuracy.ok_or_else(|| {
                        Error::input(format!(
                            "pair ({}, {}) has no accuracy to train on",
                            r.source_id, r.target_id
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            TppModel::fit(&features, &accuracies, cfg).map_err(|e| Error::Training(format!("subject fold {f}: {e}")))
        })
        .collect()
}

/// Everything needed to run the selection methods for every target.
#[derive(Debug, Clone)]
pub struct Benchmark<'a> {
    pub matrix: &'a AccuracyMatrix,
    pub features: &'a FeatureTable,
    pub folds: &'a [GroupFold],
    /// Predictor of each fold, aligned with `folds`.
    pub models: &'a [TppModel],
    /// Seed of the Random method.
    pub seed: u64,
}

/// Per-target outcome of each method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodAccuracies {
    pub methods: Vec<Method>,
    pub target_ids: Vec<String>,
    /// `accuracy[m][t]` for `methods[m]` and `target_ids[t]`.
    pub accuracy: Vec<Vec<f64>>,
    /// Chosen source, `None` for Intra-subject.
    pub sources: Vec<Vec<Option<String>>>,
}

impl<'a> Benchmark<'a> {
    pub fn new(
        matrix: &'a AccuracyMatrix,
        features: &'a FeatureTable,
        folds: &'a [GroupFold],
        models: &'a [TppModel],
        seed: u64,
    ) -> Result<Self> {
        if folds.len() != models.len() {
            return Err(Error::Config(format!(
                "{} subject folds but {} predictors",
                folds.len(),
                models.len()
            )));
        }
        let mut tested = BTreeSet::new();
        for fold in folds {
            for id in &fold.test_ids {
                if !tested.insert(id.as_str()) {
                    return Err(Error::Fold(format!("subject {id} is tested in two folds")));
                }
                if fold.train_ids.contains(id) {
                    return Err(Error::Fold(format!("subject {id} is both training and test")));
                }
            }
        }
        for id in &matrix.target_ids {
            if !tested.contains(id.as_str()) {
                return Err(Error::Fold(format!("subject {id} is not tested in any fold")));
            }
        }
        Ok(Benchmark {
            matrix,
            features,
            folds,
            models,
            seed,
        })
    }

    fn intra_of(&self, id: &str) -> Result<f64> {
        let r = self
            .matrix
            .target_index(id)
            .ok_or_else(|| Error::input(format!("subject {id:?} not in accuracy matrix")))?;
        Ok(self.matrix.intra[r])
    }

    /// Runs `methods` with `k` candidates for every target of the matrix.
    pub fn achieved(&self, methods: &[Method], k: usize) -> Result<MethodAccuracies> {
        let n_targets = self.matrix.target_ids.len();
        let mut accuracy = vec![vec![f64::NAN; n_targets]; methods.len()];
        let mut sources = vec![vec![None; n_targets]; methods.len()];
        for (fold, model) in self.folds.iter().zip(self.models) {
            let training_matrix = self.matrix.restrict(&fold.train_ids)?;
            for target_id in &fold.test_ids {
                let Some(t) = self.matrix.target_index(target_id) else {
                    continue;
                };
                let pool = fold
                    .train_ids
                    .iter()
                    .map(|s| {
                        let features = *self
                            .features
                            .get(&(s.clone(), target_id.clone()))
                            .ok_or_else(|| Error::input(format!("no features for pair ({s}, {target_id})")))?;
                        Ok(PoolEntry {
                            id: s.clone(),
                            intra_accuracy: self.intra_of(s)?,
                            features,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let ctx = SelectionContext {
                    target_id,
                    target_intra: self.matrix.intra[t],
                    pool,
                    training_matrix: Some(&training_matrix),
                    predictor: Some(model),
                    seed: self.seed,
                };
                for (m, &method) in methods.iter().enumerate() {
                    let sel = run_method(method, &ctx, k, self.matrix)?;
                    accuracy[m][t] = sel.accuracy;
                    sources[m][t] = sel.source_id;
                }
            }
        }
        Ok(MethodAccuracies {
            methods: methods.to_vec(),
            target_ids: self.matrix.target_ids.clone(),
            accuracy,
            sources,
        })
    }
}

impl MethodAccuracies {
    pub fn method_index(&self, method: Method) -> Option<usize> {
        self.methods.iter().position(|m| *m == method)
    }

    pub fn mean(&self, m: usize) -> f64 {
        self.accuracy[m].iter().sum::<f64>() / self.accuracy[m].len() as f64
    }

    /// Mean over targets of Oracle's accuracy minus method `m`'s.
    pub fn gap_to_oracle(&self, m: usize) -> Result<f64> {
        let o = self
            .method_index(Method::Oracle)
            .ok_or_else(|| Error::Config("gap to Oracle needs the Oracle method".into()))?;
        let diffs = self.accuracy[o].iter().zip(&self.accuracy[m]).map(|(a, b)| a - b);
        Ok(diffs.sum::<f64>() / self.target_ids.len() as f64)
    }

    /// CSV of the chosen source and its accuracy per target and method.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "target_id,method,source_id,accuracy")?;
        for (t, target) in self.target_ids.iter().enumerate() {
            for (m, method) in self.methods.iter().enumerate() {
                let source = self.sources[m][t].as_deref().unwrap_or("");
                writeln!(out, "{target},{method},{source},{}", self.accuracy[m][t])?;
            }
        }
        Ok(())
    }
}

/// Pairwise comparison of methods over the same targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodComparison {
    pub methods: Vec<Method>,
    /// `mean_diff[i][j]` = mean over targets of `acc_i − acc_j`.
    pub mean_diff: Vec<Vec<f64>>,
    /// Wilcoxon signed-rank p-values of the paired per-target accuracies.
    pub p_values: Vec<Vec<f64>>,
    /// `p ≥ SIGNIFICANCE_LEVEL`: the two methods are not distinguishable.
    pub indistinguishable: Vec<Vec<bool>>,
}

/// Only the upper triangle is computed; the lower one is its negation (mean
/// differences) or mirror (p-values).
pub fn compare_accuracies(acc: &MethodAccuracies) -> MethodComparison {
    let n = acc.methods.len();
    let n_targets = acc.target_ids.len() as f64;
    let mut mean_diff = vec![vec![0.0; n]; n];
    let mut p_values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let diffs: Vec<f64> = acc.accuracy[i]
                .iter()
                .zip(&acc.accuracy[j])
                .map(|(a, b)| a - b)
                .collect();
            let d = diffs.iter().sum::<f64>() / n_targets;
            mean_diff[i][j] = d;
            mean_diff[j][i] = -d;
            let p = wilcoxon_signed_rank(&diffs);
            p_values[i][j] = p;
            p_values[j][i] = p;
        }
    }
    let indistinguishable = p_values
        .iter()
        .map(|row| row.iter().map(|p| *p >= SIGNIFICANCE_LEVEL).collect())
        .collect();
    MethodComparison {
        methods: acc.methods.clone(),
        mean_diff,
        p_values,
        indistinguishable,
    }
}

/// Runs every method with `k` candidates and compares them pairwise.
pub fn compare_methods(
    bench: &Benchmark,
    methods: &[Method],
    k: usize,
) -> Result<(MethodAccuracies, MethodComparison)> {
    let acc = bench.achieved(methods, k)?;
    let cmp = compare_accuracies(&acc);
    Ok((acc, cmp))
}

fn write_square<T>(
    mut out: impl Write,
    methods: &[Method],
    rows: &[Vec<T>],
    cell: impl Fn(&T) -> String,
) -> Result<()> {
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    writeln!(out, "method,{}", names.join(","))?;
    for (m, row) in methods.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(&cell).collect();
        writeln!(out, "{m},{}", cells.join(","))?;
    }
    Ok(())
}

impl MethodComparison {
    pub fn write_mean_diff_csv(&self, out: impl Write) -> Result<()> {
        write_square(out, &self.methods, &self.mean_diff, |v| format!("{v}"))
    }

    pub fn write_p_values_csv(&self, out: impl Write) -> Result<()> {
        write_square(out, &self.methods, &self.p_values, |v| format!("{v}"))
    }

    /// 1 marks pairs that are not distinguishable at the significance level.
    pub fn write_significance_csv(&self, out: impl Write) -> Result<()> {
        write_square(out, &self.methods, &self.indistinguishable, |v| {
            u8::from(*v).to_string()
        })
    }
}

/// Mean gap to Oracle per method and candidate count.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub methods: Vec<Method>,
    pub k_values: Vec<usize>,
    /// `gaps[m][i]` for `k_values[i]`; `None` where the method is not run
    /// (Max of methods at counts that are not multiples of 3).
    pub gaps: Vec<Vec<Option<f64>>>,
}

/// Gap to Oracle for every method at every `k` in ascending `k_values`.
pub fn candidate_sweep(bench: &Benchmark, methods: &[Method], k_values: &[usize]) -> Result<Sweep> {
    if k_values.is_empty() || k_values.windows(2).any(|w| w[0] >= w[1]) || k_values[0] == 0 {
        return Err(Error::Config(
            "candidate counts must be positive and strictly ascending".into(),
        ));
    }
    let mut with_oracle = methods.to_vec();
    if !with_oracle.contains(&Method::Oracle) {
        with_oracle.push(Method::Oracle);
    }
    let mut gaps = vec![Vec::with_capacity(k_values.len()); methods.len()];
    for &k in k_values {
        let acc = bench.achieved(&with_oracle, k)?;
        for (m, &method) in methods.iter().enumerate() {
            let gap = if method == Method::MaxOfMethods && k % 3 != 0 {
                None
            } else {
                Some(acc.gap_to_oracle(m)?)
            };
            gaps[m].push(gap);
        }
    }
    Ok(Sweep {
        methods: methods.to_vec(),
        k_values: k_values.to_vec(),
        gaps,
    })
}

impl Sweep {
    /// Long-format CSV `method,k,gap`; skipped cells are omitted.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "method,k,gap")?;
        for (method, row) in self.methods.iter().zip(&self.gaps) {
            for (k, gap) in self.k_values.iter().zip(row) {
                if let Some(g) = gap {
                    writeln!(out, "{method},{k},{g}")?;
                }
            }
        }
        Ok(())
    }
}
