//! Per-subject statistics and the 18 (source, target) pair features.
//!
//! Features are computed on data recentered about its own overall mean, before
//! any rotation. Class 1 is the smaller label, class 2 the larger.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::dataset::SubjectData;
use crate::error::{Error, Result};
use crate::folds::{cv_splits, CvConfig};
use crate::mdm::mdm_fit;
use crate::rpa::recenter;
use crate::spd::{airm_distance_sq, class_means, dispersion, karcher_mean, KarcherConfig, Label, SpdMatrix, Trial};

pub const N_FEATURES: usize = 18;

/// Column names in feature order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "dist_t1_t2",
    "dist_s1_s2",
    "dist_t1_s1",
    "dist_t1_s2",
    "dist_t2_s1",
    "dist_t2_s2",
    "disp_t",
    "disp_t1",
    "disp_t2",
    "disp_s",
    "disp_s1",
    "disp_s2",
    "acc_s_intra",
    "diff_dist_t12_s12",
    "diff_dist_t1s2_t1s1",
    "diff_dist_t2s1_t2s2",
    "diff_disp_s1_t1",
    "diff_disp_s2_t2",
];

/// Summary of one subject's full data set.
#[derive(Debug, Clone)]
pub struct SubjectStats {
    pub subject_id: String,
    pub overall_mean: SpdMatrix,
    pub class_means: BTreeMap<Label, SpdMatrix>,
    pub overall_dispersion: f64,
    pub class_dispersions: BTreeMap<Label, f64>,
    /// Mean MDM accuracy over the cross-validation rounds of [`CvConfig`].
    pub intra_accuracy: f64,
}

/// Serializable form of [`SubjectStats`]; matrices are row-major.
#[derive(Debug, Clone, Serialize)]
pub struct SubjectStatsRecord {
    pub subject_id: String,
    pub dim: usize,
    pub overall_mean: Vec<f64>,
    pub class_means: BTreeMap<Label, Vec<f64>>,
    pub overall_dispersion: f64,
    pub class_dispersions: BTreeMap<Label, f64>,
    pub intra_accuracy: f64,
}

fn row_major(m: &SpdMatrix) -> Vec<f64> {
    m.matrix().transpose().iter().copied().collect()
}

impl SubjectStats {
    pub fn to_record(&self) -> SubjectStatsRecord {
        SubjectStatsRecord {
            subject_id: self.subject_id.clone(),
            dim: self.overall_mean.dim(),
            overall_mean: row_major(&self.overall_mean),
            class_means: self.class_means.iter().map(|(l, m)| (*l, row_major(m))).collect(),
            overall_dispersion: self.overall_dispersion,
            class_dispersions: self.class_dispersions.clone(),
            intra_accuracy: self.intra_accuracy,
        }
    }
}

fn covs(trials: &[Trial]) -> Vec<SpdMatrix> {
    trials.iter().map(|t| t.cov.clone()).collect()
}

fn class_dispersions(trials: &[Trial], means: &BTreeMap<Label, SpdMatrix>) -> Result<BTreeMap<Label, f64>> {
    means
        .iter()
        .map(|(label, m)| {
            let members: Vec<SpdMatrix> = trials
                .iter()
                .filter(|t| t.label == *label)
                .map(|t| t.cov.clone())
                .collect();
            Ok((*label, dispersion(&members, m)?))
        })
        .collect()
}

/// Mean accuracy of MDM trained on each round's training split and tested on
/// the rest of the subject's own trials.
pub fn intra_accuracy(subject: &SubjectData, cv: &CvConfig) -> Result<f64> {
    let splits = cv_splits(&subject.labels(), cv)?;
    let mut total = 0.0;
    for (train, test) in &splits {
        let model = mdm_fit(&subject.select(train))?;
        total += model.accuracy(&subject.select(test))?;
    }
    Ok(total / splits.len() as f64)
}

pub fn subject_stats(subject: &SubjectData, cv: &CvConfig) -> Result<SubjectStats> {
    subject.require_two_classes()?;
    let karcher = KarcherConfig::default();
    let overall_mean = karcher_mean(&covs(&subject.trials), &karcher)?;
    let means = class_means(&subject.trials, &karcher)?;
    Ok(SubjectStats {
        subject_id: subject.id.clone(),
        overall_dispersion: dispersion(&covs(&subject.trials), &overall_mean)?,
        class_dispersions: class_dispersions(&subject.trials, &means)?,
        overall_mean,
        class_means: means,
        intra_accuracy: intra_accuracy(subject, cv)?,
    })
}

/// Class means and dispersions of a trial set after recentering it about its own
/// mean.
#[derive(Debug, Clone)]
pub struct RecenteredSummary {
    pub class_means: [SpdMatrix; 2],
    /// Dispersion about the identity, the mean of the recentered set.
    pub dispersion: f64,
    pub class_dispersions: [f64; 2],
}

pub fn recentered_summary(trials: &[Trial]) -> Result<RecenteredSummary> {
    let labels: Vec<Label> = trials
        .iter()
        .map(|t| t.label)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.len() != 2 {
        return Err(Error::input(format!(
            "features need exactly two classes, got {labels:?}"
        )));
    }
    let karcher = KarcherConfig::default();
    let mean = karcher_mean(&covs(trials), &karcher)?;
    let recentered = recenter(trials, &mean)?;
    let means = class_means(&recentered, &karcher)?;
    let disps = class_dispersions(&recentered, &means)?;
    let identity = SpdMatrix::identity(mean.dim());
    Ok(RecenteredSummary {
        dispersion: dispersion(&covs(&recentered), &identity)?,
        class_dispersions: [disps[&labels[0]], disps[&labels[1]]],
        class_means: [means[&labels[0]].clone(), means[&labels[1]].clone()],
    })
}

/// The 18 features of one (source, target) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures(pub [f64; N_FEATURES]);

impl PairFeatures {
    /// Assembles the features from both recentered summaries and the source's
    /// intra-subject accuracy.
    pub fn from_summaries(target: &RecenteredSummary, source: &RecenteredSummary, source_intra: f64) -> Result<Self> {
        let [t1, t2] = &target.class_means;
        let [s1, s2] = &source.class_means;
        let d_t12 = airm_distance_sq(t1, t2)?;
        let d_s12 = airm_distance_sq(s1, s2)?;
        let d_t1s1 = airm_distance_sq(t1, s1)?;
        let d_t1s2 = airm_distance_sq(t1, s2)?;
        let d_t2s1 = airm_distance_sq(t2, s1)?;
        let d_t2s2 = airm_distance_sq(t2, s2)?;
        let [dt1, dt2] = target.class_dispersions;
        let [ds1, ds2] = source.class_dispersions;
        Ok(PairFeatures([
            d_t12,
            d_s12,
            d_t1s1,
            d_t1s2,
            d_t2s1,
            d_t2s2,
            target.dispersion,
            dt1,
            dt2,
            source.dispersion,
            ds1,
            ds2,
            source_intra,
            d_t12 - d_s12,
            d_t1s2 - d_t1s1,
            d_t2s1 - d_t2s2,
            ds1 - dt1,
            ds2 - dt2,
        ]))
    }

    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }

    /// Squared distance between the target's and the source's class-1 means.
    pub fn dist_t1_s1(&self) -> f64 {
        self.0[2]
    }

    /// Squared distance between the target's and the source's class-2 means.
    pub fn dist_t2_s2(&self) -> f64 {
        self.0[5]
    }

    pub fn source_intra_accuracy(&self) -> f64 {
        self.0[12]
    }
}

/// Features of `source` (all trials) against `target_train`.
pub fn pair_features(
    source: &SubjectData,
    target_train: &[Trial],
    source_stats: &SubjectStats,
) -> Result<PairFeatures> {
    let target = recentered_summary(target_train)?;
    let src = recentered_summary(&source.trials)?;
    PairFeatures::from_summaries(&target, &src, source_stats.intra_accuracy)
}

/// One CSV row of the feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub source_id: String,
    pub target_id: String,
    pub features: PairFeatures,
    /// Measured transfer accuracy, when known.
    pub accuracy: Option<f64>,
}

/// Writes rows with a header; the `accuracy` column is present iff every row
/// carries one.
pub fn write_feature_csv(mut out: impl Write, rows: &[FeatureRow]) -> Result<()> {
    let with_accuracy = !rows.is_empty() && rows.iter().all(|r| r.accuracy.is_some());
    let mut header = vec!["source_id", "target_id"];
    header.extend(FEATURE_NAMES);
    if with_accuracy {
        header.push("accuracy");
    }
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let mut fields = vec![r.source_id.clone(), r.target_id.clone()];
        fields.extend(r.features.0.iter().map(|v| format!("{v}")));
        if with_accuracy {
            fields.push(format!("{}", r.accuracy.expect("checked above")));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn csv_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Reads a table written by [`write_feature_csv`].
pub fn read_feature_csv(input: impl BufRead) -> Result<Vec<FeatureRow>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| csv_error(1, 1, "empty feature file"))??;
    let columns: Vec<&str> = header.trim_end().split(',').collect();
    let expected: Vec<&str> = ["source_id", "target_id"].into_iter().chain(FEATURE_NAMES).collect();
    if columns.len() < expected.len() || columns[..expected.len()] != expected[..] {
        return Err(csv_error(1, 1, "unexpected feature header"));
    }
    let with_accuracy = match &columns[expected.len()..] {
        [] => false,
        ["accuracy"] => true,
        _ => return Err(csv_error(1, 1, "unexpected trailing header columns")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != columns.len() {
            return Err(csv_error(
                line_no,
                1,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let number = |k: usize| -> Result<f64> {
            fields[k].parse::<f64>().map_err(|e| {
                let column = fields[..k].iter().map(|f| f.len() + 1).sum::<usize>() + 1;
                csv_error(line_no, column, format!("{}: {e}", columns[k]))
            })
        };
        let mut values = [0.0; N_FEATURES];
        for (k, v) in values.iter_mut().enumerate() {
            *v = number(k + 2)?;
        }
        rows.push(FeatureRow {
            source_id: fields[0].to_string(),
            target_id: fields[1].to_string(),
            features: PairFeatures(values),
            accuracy: if with_accuracy {
                Some(number(N_FEATURES + 2)?)
            } else {
                None
            },
        });
    }
    Ok(rows)
}
