//! Seeded, class-stratified k-fold splits of one subject's trials.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::Label;

/// Cross-validation layout. Each fold in turn provides the training split
/// (`train_folds` consecutive folds starting at it); the rest is the test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub n_folds: usize,
    /// Folds used for training in each round. The default of 1 keeps the target
    /// training data small, as during a real calibration session.
    pub train_folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            n_folds: 5,
            train_folds: 1,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::Config(format!(
                "n_folds must be at least 2, got {}",
                self.n_folds
            )));
        }
        if self.train_folds == 0 || self.train_folds >= self.n_folds {
            return Err(Error::Config(format!(
                "train_folds must be in 1..{}, got {}",
                self.n_folds, self.train_folds
            )));
        }
        Ok(())
    }
}

/// Fold index of every item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    assignment: Vec<usize>,
    n_folds: usize,
}

/// Splits items by label so every fold receives `⌊count/n⌋` or `⌈count/n⌉` items of
/// each class. Within a class the order is a seeded shuffle.
pub fn stratified_folds(labels: &[Label], n_folds: usize, seed: u64) -> Result<Folds> {
    if n_folds == 0 {
        return Err(Error::Fold("number of folds must be positive".into()));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for (label, mut idx) in by_class {
        if idx.len() < n_folds {
            return Err(Error::Fold(format!(
                "class {label} has {} trials, fewer than {n_folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.iter().enumerate() {
            assignment[*i] = (offset + k) % n_folds;
        }
        offset += idx.len();
    }
    Ok(Folds { assignment, n_folds })
}

impl Folds {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Item indices in fold `f`, ascending.
    pub fn fold(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == f)
            .collect()
    }

    /// `(train, test)` indices for round `round`: training takes folds
    /// `round, round + 1, ..., round + train_folds - 1` (mod `n_folds`).
    pub fn split(&self, round: usize, train_folds: usize) -> (Vec<usize>, Vec<usize>) {
        let in_train = |f: usize| (f + self.n_folds - round % self.n_folds) % self.n_folds < train_folds;
        (0..self.assignment.len()).partition(|&i| in_train(self.assignment[i]))
    }
}

/// The `(train, test)` splits of every round for `labels` under `cv`.
pub fn cv_splits(labels: &[Label], cv: &CvConfig) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    cv.validate()?;
    let folds = stratified_folds(labels, cv.n_folds, cv.seed)?;
    Ok((0..cv.n_folds).map(|r| folds.split(r, cv.train_folds)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_balanced() {
        let labels: Vec<Label> = (0..23).map(|i| if i < 12 { 1 } else { 2 }).collect();
        let folds = stratified_folds(&labels, 5, 3).unwrap();
        for f in 0..5 {
            let idx = folds.fold(f);
            let ones = idx.iter().filter(|&&i| labels[i] == 1).count();
            let twos = idx.len() - ones;
            assert!((2..=3).contains(&ones), "fold {f}: {ones}");
            assert!((2..=3).contains(&twos), "fold {f}: {twos}");
        }
        let total: usize = (0..5).map(|f| folds.fold(f).len()).sum();
        assert_eq!(total, 23);
    }

    #[test]
    fn split_covers_everything_once() {
        let labels: Vec<Label> = (0..20).map(|i| (i % 2) as Label).collect();
        let folds = stratified_folds(&labels, 5, 0).unwrap();
        for r in 0..5 {
            let (train, test) = folds.split(r, 1);
            assert_eq!(train, folds.fold(r));
            assert_eq!(train.len() + test.len(), 20);
            assert!(train.iter().all(|i| !test.contains(i)));
        }
        let (train, _) = folds.split(4, 2);
        let mut expected = folds.fold(4);
        expected.extend(folds.fold(0));
        expected.sort();
        assert_eq!(train, expected);
    }

    #[test]
    fn seeded_and_deterministic() {
        let labels: Vec<Label> = (0..30).map(|i| (i % 2) as Label).collect();
        assert_eq!(
            stratified_folds(&labels, 5, 9).unwrap(),
            stratified_folds(&labels, 5, 9).unwrap()
        );
        assert_ne!(
            stratified_folds(&labels, 5, 9).unwrap(),
            stratified_folds(&labels, 5, 10).unwrap()
        );
    }

    #[test]
    fn too_few_trials_per_class() {
        let labels = [1, 1, 1, 1, 2, 2, 2, 2, 2];
        assert!(matches!(stratified_folds(&labels, 5, 0), Err(Error::Fold(_))));
    }
}
