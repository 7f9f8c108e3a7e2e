//! Source-selection strategies and the k-candidate protocol.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PairFeatures;
use crate::harness::AccuracyMatrix;
use crate::predictor::TppModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// No transfer: MDM on the target's own training split.
    IntraSubject,
    Random,
    /// Smallest mean squared distance between same-class means.
    Distance,
    /// Highest intra-subject accuracy.
    BestSource,
    /// Best source for the most training targets.
    BestTeacher,
    /// Round-robin union of Best source, Best teacher and TPP.
    MaxOfMethods,
    /// Highest predicted transfer accuracy.
    Tpp,
    /// Every source evaluated.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::IntraSubject,
        Method::Random,
        Method::Distance,
        Method::BestSource,
        Method::BestTeacher,
        Method::MaxOfMethods,
        Method::Tpp,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::IntraSubject => "intra-subject",
            Method::Random => "random",
            Method::Distance => "distance",
            Method::BestSource => "best-source",
            Method::BestTeacher => "best-teacher",
            Method::MaxOfMethods => "max-of-methods",
            Method::Tpp => "tpp",
            Method::Oracle => "oracle",
        }
    }

    /// Methods that produce a full ordering of the pool.
    pub fn is_ranking(self) -> bool {
        matches!(
            self,
            Method::Random | Method::Distance | Method::BestSource | Method::BestTeacher | Method::Tpp
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// A candidate source as seen from one target.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub id: String,
    pub intra_accuracy: f64,
    /// Features of this source against the target's training data.
    pub features: PairFeatures,
}

/// Everything a method may look at when ranking sources for one target.
#[derive(Debug, Clone)]
pub struct SelectionContext<'a> {
    pub target_id: &'a str,
    /// Intra-subject accuracy of the target (its own training split only).
    pub target_intra: f64,
    pub pool: Vec<PoolEntry>,
    /// Accuracy matrix over training users only, for Best teacher.
    pub training_matrix: Option<&'a AccuracyMatrix>,
    pub predictor: Option<&'a TppModel>,
    pub seed: u64,
}

/// Sources in preference order, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidates {
    pub method: Method,
    pub ids: Vec<String>,
    /// Method score per id, where the method has one.
    pub scores: Option<Vec<f64>>,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Pool indices sorted by `key` (ties keep pool order).
fn order_by(pool: &[PoolEntry], key: impl Fn(&PoolEntry) -> f64, descending: bool) -> Vec<usize> {
    let keys: Vec<f64> = pool.iter().map(&key).collect();
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = keys[a].total_cmp(&keys[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    idx
}

fn ranked(method: Method, pool: &[PoolEntry], order: Vec<usize>, scores: Option<Vec<f64>>) -> RankedCandidates {
    RankedCandidates {
        method,
        ids: order.iter().map(|&i| pool[i].id.clone()).collect(),
        scores: scores.map(|s| order.iter().map(|&i| s[i]).collect()),
    }
}

/// Best-teacher score per pool entry: the number of training targets whose
/// off-diagonal row maximum is attained by that source alone, and the source's
/// mean off-diagonal column accuracy. Rows with a tied maximum credit nobody.
pub fn teacher_scores(pool: &[PoolEntry], matrix: &AccuracyMatrix) -> Vec<(usize, f64)> {
    let n_rows = matrix.target_ids.len();
    let mut wins = vec![0usize; matrix.source_ids.len()];
    for r in 0..n_rows {
        let mut best: Option<(f64, usize)> = None;
        let mut tied = false;
        for c in 0..matrix.source_ids.len() {
            if matrix.is_diagonal(r, c) {
                continue;
            }
            let v = matrix.values[r][c];
            match best {
                Some((b, _)) if v < b => {}
                Some((b, _)) if v == b => tied = true,
                _ => {
                    best = Some((v, c));
                    tied = false;
                }
            }
        }
        if let (Some((_, c)), false) = (best, tied) {
            wins[c] += 1;
        }
    }
    pool.iter()
        .map(|p| match matrix.source_index(&p.id) {
            Some(c) => (wins[c], matrix.column_mean(c)),
            None => (0, f64::NEG_INFINITY),
        })
        .collect()
}

/// Full ordering of the pool by `method`.
pub fn rank_sources(method: Method, ctx: &SelectionContext) -> Result<RankedCandidates> {
    let pool = &ctx.pool;
    match method {
        Method::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            rng.set_stream(fnv1a(ctx.target_id));
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut rng);
            Ok(ranked(method, pool, order, None))
        }
        Method::Distance => {
            let score = |p: &PoolEntry| (p.features.dist_t1_s1() + p.features.dist_t2_s2()) / 2.0;
            let scores = pool.iter().map(score).collect();
            Ok(ranked(method, pool, order_by(pool, score, false), Some(scores)))
        }
        Method::BestSource => {
            let scores = pool.iter().map(|p| p.intra_accuracy).collect();
            Ok(ranked(
                method,
                pool,
                order_by(pool, |p| p.intra_accuracy, true),
                Some(scores),
            ))
        }
        Method::BestTeacher => {
            let matrix = ctx
                .training_matrix
                .ok_or_else(|| Error::Config("Best teacher needs a training accuracy matrix".into()))?;
            let scores = teacher_scores(pool, matrix);
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by(|&a, &b| scores[b].0.cmp(&scores[a].0).then(scores[b].1.total_cmp(&scores[a].1)));
            let counts = scores.iter().map(|s| s.0 as f64).collect();
            Ok(ranked(method, pool, order, Some(counts)))
        }
        Method::Tpp => {
            let model = ctx
                .predictor
                .ok_or_else(|| Error::Config("TPP needs a trained predictor".into()))?;
            let scores: Vec<f64> = pool.iter().map(|p| model.predict(&p.features)).collect();
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            Ok(ranked(method, pool, order, Some(scores)))
        }
        Method::Oracle => Ok(ranked(method, pool, (0..pool.len()).collect(), None)),
        Method::MaxOfMethods => Err(Error::Config(
            "max-of-methods has no full ordering; use max_of_methods".into(),
        )),
        Method::IntraSubject => Ok(RankedCandidates {
            method,
            ids: Vec::new(),
            scores: None,
        }),
    }
}

/// Top `per_method_count` of Best source, Best teacher and TPP, interleaved in
/// that order and deduplicated, then topped up from TPP's ranking until
/// `3 · per_method_count` distinct ids (or the pool is exhausted).
pub fn max_of_methods(ctx: &SelectionContext, per_method_count: usize) -> Result<RankedCandidates> {
    let lists = [
        rank_sources(Method::BestSource, ctx)?.ids,
        rank_sources(Method::BestTeacher, ctx)?.ids,
        rank_sources(Method::Tpp, ctx)?.ids,
    ];
    let wanted = 3 * per_method_count;
    let mut ids: Vec<String> = Vec::with_capacity(wanted);
    for i in 0..per_method_count {
        for list in &lists {
            if let Some(id) = list.get(i) {
                if !ids.contains(id) {
                    ids.push(id.clone());
                }
            }
        }
    }
    for id in &lists[2] {
        if ids.len() >= wanted {
            break;
        }
        if !ids.contains(id) {
            ids.push(id.clone());
        }
    }
    Ok(RankedCandidates {
        method: Method::MaxOfMethods,
        ids,
        scores: None,
    })
}

/// The sources a method evaluates when `k` candidates are allowed: the whole pool
/// for Oracle, none for Intra-subject, `max_of_methods(⌈k/3⌉)` cut to `k` for Max
/// of methods, and the top `k` of the ranking otherwise.
pub fn candidates(method: Method, ctx: &SelectionContext, k: usize) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Config("number of candidates must be at least 1".into()));
    }
    let mut ids = match method {
        Method::Oracle => return Ok(ctx.pool.iter().map(|p| p.id.clone()).collect()),
        Method::IntraSubject => return Ok(Vec::new()),
        Method::MaxOfMethods => max_of_methods(ctx, k.div_ceil(3))?.ids,
        _ => rank_sources(method, ctx)?.ids,
    };
    ids.truncate(k);
    Ok(ids)
}

/// Transfer accuracy of a (target, source) pair.
pub trait Evaluator {
    fn evaluate(&self, target_id: &str, source_id: &str) -> Result<f64>;
}

/// Evaluator backed by a precomputed accuracy matrix whose entries are the
/// transfer accuracies for the same folds.
impl Evaluator for AccuracyMatrix {
    fn evaluate(&self, target_id: &str, source_id: &str) -> Result<f64> {
        self.get(target_id, source_id)
    }
}

/// Outcome of one method for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// `None` for Intra-subject.
    pub source_id: Option<String>,
    pub accuracy: f64,
}

/// Evaluates the first `k` of `candidates` and returns the most accurate (ties to
/// the earlier rank). Failed evaluations are skipped with a warning.
pub fn select_best(target_id: &str, candidates: &[String], k: usize, evaluator: &dyn Evaluator) -> Result<Selection> {
    let mut best: Option<Selection> = None;
    for id in candidates.iter().take(k) {
        match evaluator.evaluate(target_id, id) {
            Ok(acc) => {
                if best.as_ref().is_none_or(|b| acc > b.accuracy) {
                    best = Some(Selection {
                        source_id: Some(id.clone()),
                        accuracy: acc,
                    });
                }
            }
            Err(e) => log::warn!("skipping source {id} for target {target_id}: {e}"),
        }
    }
    best.ok_or_else(|| Error::input(format!("no candidate source could be evaluated for {target_id}")))
}

/// What `method` achieves for the target of `ctx` with `k` candidates.
pub fn run_method(method: Method, ctx: &SelectionContext, k: usize, evaluator: &dyn Evaluator) -> Result<Selection> {
    if method == Method::IntraSubject {
        return Ok(Selection {
            source_id: None,
            accuracy: ctx.target_intra,
        });
    }
    let ids = candidates(method, ctx, k)?;
    select_best(ctx.target_id, &ids, ids.len(), evaluator)
}
