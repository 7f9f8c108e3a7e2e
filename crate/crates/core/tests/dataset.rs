//! Covset persistence and the synthetic generator.

use srcsel_core::dataset::{covset_read, covset_write, synth_generate, SynthConfig, TransferStructure};
use srcsel_core::features::intra_accuracy;
use srcsel_core::folds::CvConfig;
use srcsel_core::spd::{class_means, dispersion, KarcherConfig, SpdMatrix};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 3,
        trials_per_class: 6,
        seed,
        ..Default::default()
    }
}

#[test]
fn covset_round_trip_is_bit_identical() {
    let data = synth_generate(&small(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in ["d.covset.json", "d.covset.json.gz"] {
        let path = dir.path().join(name);
        covset_write(&path, &data).unwrap();
        assert_eq!(covset_read(&path).unwrap(), data, "{name}");
    }
    let plain = std::fs::metadata(dir.path().join("d.covset.json")).unwrap().len();
    let packed = std::fs::metadata(dir.path().join("d.covset.json.gz")).unwrap().len();
    assert!(packed < plain);
}

#[test]
fn generation_is_deterministic_and_seeded() {
    assert_eq!(synth_generate(&small(5)).unwrap(), synth_generate(&small(5)).unwrap());
    assert_ne!(synth_generate(&small(5)).unwrap(), synth_generate(&small(6)).unwrap());
}

#[test]
fn generated_trials_are_valid_spd() {
    for s in synth_generate(&small(2)).unwrap() {
        for t in s.trials {
            SpdMatrix::new(t.cov.matrix().clone()).unwrap();
        }
    }
}

#[test]
fn zero_dispersion_gives_class_means() {
    let cfg = SynthConfig {
        subject_dispersion: 0.0,
        ..small(3)
    };
    for s in synth_generate(&cfg).unwrap() {
        for label in [1, 2] {
            let members: Vec<_> = s.trials.iter().filter(|t| t.label == label).collect();
            assert!(members.iter().all(|t| t.cov == members[0].cov));
        }
    }
}

#[test]
fn zero_shift_gives_shared_class_means() {
    let cfg = SynthConfig {
        subject_dispersion: 0.0,
        domain_shift_scale: 0.0,
        ..small(4)
    };
    let data = synth_generate(&cfg).unwrap();
    for s in &data[1..] {
        for (a, b) in s.trials.iter().zip(&data[0].trials) {
            assert!((a.cov.matrix() - b.cov.matrix()).norm() < 1e-12);
        }
    }
}

/// Tangent noise with diagonal variance σ² and off-diagonal variance σ²/2 has
/// `E‖N‖²_F = dim·σ² + dim(dim−1)/2·σ² = dim(dim+1)/2·σ²`.
#[test]
fn dispersion_matches_tangent_noise_second_moment() {
    let sigma = 0.1;
    let cfg = SynthConfig {
        n_subjects: 1,
        trials_per_class: 200,
        subject_dispersion: sigma,
        transferability_structure: TransferStructure {
            dispersion_spread: 0.0,
            ..Default::default()
        },
        seed: 9,
        ..Default::default()
    };
    let subject = synth_generate(&cfg).unwrap().remove(0);
    let means = class_means(&subject.trials, &KarcherConfig::default()).unwrap();
    let dim = cfg.dim as f64;
    let expected = dim * (dim + 1.0) / 2.0 * sigma * sigma;
    for (label, mean) in means {
        let set: Vec<SpdMatrix> = subject
            .trials
            .iter()
            .filter(|t| t.label == label)
            .map(|t| t.cov.clone())
            .collect();
        let d = dispersion(&set, &mean).unwrap();
        assert!((d / expected - 1.0).abs() < 0.2, "class {label}: {d} vs {expected}");
    }
}

#[test]
fn separation_raises_median_intra_accuracy() {
    let cv = CvConfig::default();
    let median_at = |sep: f64| {
        let mut acc: Vec<f64> = (0..10)
            .map(|seed| {
                let cfg = SynthConfig {
                    n_subjects: 1,
                    trials_per_class: 20,
                    class_separation: sep,
                    subject_dispersion: 0.2,
                    seed,
                    ..Default::default()
                };
                intra_accuracy(&synth_generate(&cfg).unwrap()[0], &cv).unwrap()
            })
            .collect();
        acc.sort_by(f64::total_cmp);
        (acc[4] + acc[5]) / 2.0
    };
    let medians: Vec<f64> = [0.2, 0.4, 0.8].into_iter().map(median_at).collect();
    assert!(medians[0] < medians[1] && medians[1] < medians[2], "{medians:?}");
}
