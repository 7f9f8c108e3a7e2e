//! Minimum-distance-to-mean classification.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spd::{airm_distance_sq, class_means, KarcherConfig, Label, SpdMatrix, Trial};

/// Class means of a fitted MDM classifier, ordered by ascending label.
#[derive(Debug, Clone)]
pub struct MdmModel {
    labels: Vec<Label>,
    means: Vec<SpdMatrix>,
}

impl MdmModel {
    /// Builds a model from precomputed class means.
    pub fn from_means(means: BTreeMap<Label, SpdMatrix>) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::input(format!(
                "MDM needs at least two classes, got {}",
                means.len()
            )));
        }
        let dim = means.values().next().map(SpdMatrix::dim).unwrap_or(0);
        if means.values().any(|m| m.dim() != dim) {
            return Err(Error::input("class means have different dimensions"));
        }
        let (labels, means) = means.into_iter().unzip();
        Ok(MdmModel { labels, means })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn mean(&self, label: Label) -> Option<&SpdMatrix> {
        self.labels.iter().position(|&l| l == label).map(|i| &self.means[i])
    }

    pub fn means(&self) -> impl Iterator<Item = (Label, &SpdMatrix)> {
        self.labels.iter().copied().zip(self.means.iter())
    }

    pub fn dim(&self) -> usize {
        self.means[0].dim()
    }

    /// Label of the nearest class mean; exact ties go to the smallest label.
    pub fn predict(&self, c: &SpdMatrix) -> Result<Label> {
        if c.dim() != self.dim() {
            return Err(Error::input(format!(
                "trial has dimension {}, model expects {}",
                c.dim(),
                self.dim()
            )));
        }
        let mut best = (f64::INFINITY, self.labels[0]);
        for (label, mean) in self.means() {
            let d = airm_distance_sq(mean, c)?;
            if d < best.0 {
                best = (d, label);
            }
        }
        Ok(best.1)
    }

    /// Fraction of trials whose predicted label matches the true one.
    pub fn accuracy(&self, trials: &[Trial]) -> Result<f64> {
        if trials.is_empty() {
            return Err(Error::input("accuracy of an empty trial set"));
        }
        let mut correct = 0usize;
        for t in trials {
            if self.predict(&t.cov)? == t.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / trials.len() as f64)
    }
}

/// Fits class means with the default Karcher settings.
pub fn mdm_fit(trials: &[Trial]) -> Result<MdmModel> {
    mdm_fit_with(trials, &KarcherConfig::default())
}

pub fn mdm_fit_with(trials: &[Trial], cfg: &KarcherConfig) -> Result<MdmModel> {
    MdmModel::from_means(class_means(trials, cfg)?)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spd::karcher_mean;
    use crate::spd::testutil::*;

    #[test]
    fn one_trial_per_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(&mut rng, 3, 1.0);
        let b = random_spd(&mut rng, 3, 1.0);
        let model = mdm_fit(&[Trial::new(a.clone(), 1), Trial::new(b.clone(), 2)]).unwrap();
        assert_eq!(model.mean(1).unwrap(), &a);
        assert_eq!(model.mean(2).unwrap(), &b);
        assert_eq!(model.predict(&a).unwrap(), 1);
        assert_eq!(model.predict(&b).unwrap(), 2);
    }

    #[test]
    fn duplicates_do_not_move_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(&mut rng, 3, 1.0);
        let b = random_spd(&mut rng, 3, 1.0);
        let trials = vec![
            Trial::new(a.clone(), 1),
            Trial::new(a.clone(), 1),
            Trial::new(a.clone(), 1),
            Trial::new(b.clone(), 2),
            Trial::new(b.clone(), 2),
        ];
        let model = mdm_fit(&trials).unwrap();
        assert!(model.mean(1).unwrap().frobenius_distance(&a) < 1e-12);
        assert!(model.mean(2).unwrap().frobenius_distance(&b) < 1e-12);
    }

    #[test]
    fn means_match_per_class_karcher() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials: Vec<Trial> = (0..12)
            .map(|i| Trial::new(random_spd(&mut rng, 4, 0.5), 1 + (i % 2) as Label))
            .collect();
        let model = mdm_fit(&trials).unwrap();
        for label in [1, 2] {
            let set: Vec<_> = trials
                .iter()
                .filter(|t| t.label == label)
                .map(|t| t.cov.clone())
                .collect();
            let m = karcher_mean(&set, &KarcherConfig::default()).unwrap();
            assert_eq!(model.mean(label).unwrap(), &m);
        }
    }

    #[test]
    fn rejects_single_class_and_dimension_mismatch() {
        let c = SpdMatrix::identity(2);
        assert!(mdm_fit(&[Trial::new(c.clone(), 1)]).is_err());
        let model = mdm_fit(&[
            Trial::new(SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap(), 1),
            Trial::new(SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap(), 2),
        ])
        .unwrap();
        assert!(model.predict(&SpdMatrix::identity(3)).is_err());
    }

    #[test]
    fn equidistant_query_goes_to_smaller_label() {
        let model = mdm_fit(&[
            Trial::new(SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap(), 7),
            Trial::new(SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap(), 3),
        ])
        .unwrap();
        assert_eq!(model.predict(&SpdMatrix::identity(2)).unwrap(), 3);
    }

    #[test]
    fn accuracy_on_means_and_swapped_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_spd(&mut rng, 3, 1.0);
        let b = random_spd(&mut rng, 3, 1.0);
        let model = mdm_fit(&[Trial::new(a.clone(), 1), Trial::new(b.clone(), 2)]).unwrap();
        let own = [Trial::new(a.clone(), 1), Trial::new(b.clone(), 2)];
        assert_eq!(model.accuracy(&own).unwrap(), 1.0);
        let swapped = [
            Trial::new(a.clone(), 2),
            Trial::new(a, 2),
            Trial::new(b.clone(), 1),
            Trial::new(b, 1),
        ];
        assert_eq!(model.accuracy(&swapped).unwrap(), 0.0);
        assert!(model.accuracy(&[]).is_err());
    }

    #[test]
    fn accuracy_matches_prediction_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials: Vec<Trial> = (0..30)
            .map(|i| Trial::new(random_spd(&mut rng, 3, 0.8), 1 + (i % 2) as Label))
            .collect();
        let model = mdm_fit(&trials[..10]).unwrap();
        let test = &trials[10..];
        let hits = test
            .iter()
            .filter(|t| model.predict(&t.cov).unwrap() == t.label)
            .count();
        assert_eq!(model.accuracy(test).unwrap(), hits as f64 / test.len() as f64);
    }

    #[test]
    fn prediction_is_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let trials: Vec<Trial> = (0..10)
            .map(|i| Trial::new(random_spd(&mut rng, 4, 0.8), 1 + (i % 2) as Label))
            .collect();
        let model = mdm_fit(&trials).unwrap();
        let a: DMatrix<f64> = random_invertible(&mut rng, 4);
        let moved = MdmModel::from_means(model.means().map(|(l, m)| (l, m.congruence(&a).unwrap())).collect()).unwrap();
        for _ in 0..50 {
            let q = random_spd(&mut rng, 4, 0.8);
            assert_eq!(
                model.predict(&q).unwrap(),
                moved.predict(&q.congruence(&a).unwrap()).unwrap()
            );
        }
    }
}
