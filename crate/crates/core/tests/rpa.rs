//! Alignment recovers planted congruences and rotations.

mod common;

use common::random_invertible;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srcsel_core::dataset::{synth_generate, SubjectData, SynthConfig, TransferStructure};
use srcsel_core::folds::CvConfig;
use srcsel_core::harness::transfer_accuracy;
use srcsel_core::mdm::mdm_fit;
use srcsel_core::rpa::{rpa_align, RpaConfig};
use srcsel_core::spd::Trial;

fn separated(n_subjects: usize, seed: u64, shift: f64) -> Vec<SubjectData> {
    synth_generate(&SynthConfig {
        n_subjects,
        trials_per_class: 30,
        class_separation: 2.0,
        subject_dispersion: 0.1,
        domain_shift_scale: shift,
        transferability_structure: TransferStructure {
            class_shift: 0.0,
            ..Default::default()
        },
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn planted_congruence_is_undone_exactly() {
    for seed in 0..10 {
        let source = separated(1, seed, 1.0).remove(0);
        let a = random_invertible(&mut ChaCha8Rng::seed_from_u64(seed + 100), 9);
        let target: Vec<Trial> = source
            .trials
            .iter()
            .map(|t| Trial::new(t.cov.congruence(&a).unwrap(), t.label))
            .collect();
        let result = rpa_align(&source.trials, &target, &RpaConfig::default()).unwrap();
        assert!(
            result.rotation_objective <= 1e-6,
            "seed {seed}: objective {}",
            result.rotation_objective
        );
        let model = mdm_fit(&result.aligned_source).unwrap();
        let acc = model.accuracy(&result.transform_target(&target).unwrap()).unwrap();
        assert!(acc >= 0.95, "seed {seed}: accuracy {acc}");
    }
}

#[test]
fn same_generator_subjects_transfer_well() {
    let subjects = separated(4, 3, 1.0);
    let cv = CvConfig::default();
    for (s, t) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
        let acc = transfer_accuracy(&subjects[s], &subjects[t], &cv, &RpaConfig::default()).unwrap();
        assert!(acc >= 0.95, "{s} -> {t}: {acc}");
    }
}
