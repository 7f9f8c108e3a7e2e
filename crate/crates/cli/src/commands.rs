use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use srcsel_core::dataset::{covset_read, covset_write, synth_generate, SubjectData};
use srcsel_core::features::{
    intra_accuracy, read_feature_csv, subject_stats, write_feature_csv, FeatureRow, SubjectStatsRecord,
};
use srcsel_core::harness::{
    build_accuracy_matrix, candidate_sweep, compare_methods, feature_table, leave_groups_out_folds, pair_feature_rows,
    train_fold_predictors, AccuracyMatrix, Benchmark, FeatureTable, GroupFold,
};
use srcsel_core::predictor::TppModel;
use srcsel_core::selection::Method;

use crate::cli::{BenchArgs, Cli, Command};
use crate::config::{parse_counts, RunConfig};
use crate::error::CliError;
use crate::output::{Outputs, RunInfo};

pub const FOLDS_FILE: &str = "folds.json";

pub fn model_file(fold: usize) -> String {
    format!("fold_{fold:02}.json")
}

fn to_bytes(write: impl FnOnce(&mut Vec<u8>) -> srcsel_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn to_json(value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

#[derive(Debug, Clone, Serialize)]
struct Excluded {
    subject_id: String,
    intra_accuracy: f64,
}

/// Reads a covset and drops subjects below the configured intra-subject accuracy.
fn load_data(path: &Path, cfg: &RunConfig) -> Result<(Vec<SubjectData>, Vec<Excluded>), CliError> {
    let subjects = covset_read(path)?;
    let Some(threshold) = cfg.filter_intra else {
        return Ok((subjects, Vec::new()));
    };
    let intra = subjects
        .par_iter()
        .map(|s| intra_accuracy(s, &cfg.cv))
        .collect::<srcsel_core::Result<Vec<_>>>()?;
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (s, acc) in subjects.into_iter().zip(intra) {
        if acc >= threshold {
            kept.push(s);
        } else {
            excluded.push(Excluded {
                subject_id: s.id,
                intra_accuracy: acc,
            });
        }
    }
    Ok((kept, excluded))
}

fn read_matrix(path: &Path) -> Result<AccuracyMatrix, CliError> {
    Ok(AccuracyMatrix::from_json(&fs::read_to_string(path)?)?)
}

fn read_features(path: &Path) -> Result<Vec<FeatureRow>, CliError> {
    Ok(read_feature_csv(BufReader::new(File::open(path)?))?)
}

fn matrix_for(
    subjects: &[SubjectData],
    cfg: &RunConfig,
    reuse: Option<&Path>,
    run: &mut RunInfo,
) -> Result<AccuracyMatrix, CliError> {
    match reuse {
        Some(p) => {
            run.input("matrix", p)?;
            let ids: Vec<String> = subjects.iter().map(|s| s.id.clone()).collect();
            Ok(read_matrix(p)?.restrict(&ids)?)
        }
        None => Ok(build_accuracy_matrix(subjects, &cfg.cv, &cfg.rpa)?),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.overrides)?;
    if let Some(seed) = cli.common.seed {
        cfg = cfg.with_seed(seed);
    }
    match cli.command {
        Command::Synth { out } => synth(&cfg, &out),
        Command::Stats {
            data,
            out,
            filter_intra,
        } => {
            cfg.filter_intra = filter_intra.or(cfg.filter_intra);
            cfg.validate()?;
            stats(&cfg, &data, &out)
        }
        Command::Matrix {
            data,
            out,
            filter_intra,
        } => {
            cfg.filter_intra = filter_intra.or(cfg.filter_intra);
            cfg.validate()?;
            matrix(&cfg, &data, &out)
        }
        Command::Features {
            data,
            out,
            matrix,
            filter_intra,
        } => {
            cfg.filter_intra = filter_intra.or(cfg.filter_intra);
            cfg.validate()?;
            features(&cfg, &data, &out, matrix.as_deref())
        }
        Command::TrainPredictor { features, folds, out } => {
            cfg.subject_folds = folds.unwrap_or(cfg.subject_folds);
            cfg.validate()?;
            train_predictor(&cfg, &features, &out)
        }
        Command::Compare { bench, candidates } => {
            cfg.candidates = candidates.unwrap_or(cfg.candidates);
            cfg.filter_intra = bench.filter_intra.or(cfg.filter_intra);
            cfg.validate()?;
            compare(&cfg, &bench)
        }
        Command::Sweep { bench, candidates } => {
            if let Some(text) = candidates {
                cfg.sweep_candidates = parse_counts(&text)?;
            }
            cfg.filter_intra = bench.filter_intra.or(cfg.filter_intra);
            cfg.validate()?;
            sweep(&cfg, &bench)
        }
    }
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let data = synth_generate(&cfg.synth)?;
    let mut outputs = Outputs::new(RunInfo::new("synth", cfg));
    outputs.write_with(out, |p| Ok(covset_write(p, &data)?))?;
    outputs.commit();
    Ok(())
}

#[derive(Serialize)]
struct StatsFile {
    filter_intra: Option<f64>,
    excluded: Vec<Excluded>,
    subjects: Vec<SubjectStatsRecord>,
}

pub fn stats(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let mut run = RunInfo::new("stats", cfg);
    run.input("data", data)?;
    let (subjects, excluded) = load_data(data, cfg)?;
    let records = subjects
        .par_iter()
        .map(|s| Ok(subject_stats(s, &cfg.cv)?.to_record()))
        .collect::<Result<Vec<_>, CliError>>()?;
    let file = StatsFile {
        filter_intra: cfg.filter_intra,
        excluded,
        subjects: records,
    };
    let mut outputs = Outputs::new(run);
    outputs.write_bytes(out, &to_json(&file)?)?;
    outputs.commit();
    Ok(())
}

pub fn matrix(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let mut run = RunInfo::new("matrix", cfg);
    run.input("data", data)?;
    let (subjects, _) = load_data(data, cfg)?;
    let m = build_accuracy_matrix(&subjects, &cfg.cv, &cfg.rpa)?;
    let mut outputs = Outputs::new(run);
    outputs.create_dir(out)?;
    outputs.write_bytes(&out.join("accuracy_matrix.csv"), &to_bytes(|b| m.write_csv(b))?)?;
    outputs.write_bytes(&out.join("accuracy_matrix.json"), m.to_json()?.as_bytes())?;
    outputs.commit();
    Ok(())
}

pub fn features(cfg: &RunConfig, data: &Path, out: &Path, reuse: Option<&Path>) -> Result<(), CliError> {
    let mut run = RunInfo::new("features", cfg);
    run.input("data", data)?;
    let (subjects, _) = load_data(data, cfg)?;
    let m = matrix_for(&subjects, cfg, reuse, &mut run)?;
    let rows = pair_feature_rows(&subjects, &cfg.cv, Some(&m))?;
    let mut outputs = Outputs::new(run);
    outputs.write_bytes(out, &to_bytes(|b| write_feature_csv(b, &rows))?)?;
    outputs.commit();
    Ok(())
}

/// Subject ids in order of first appearance, targets before sources.
fn subject_ids(rows: &[FeatureRow]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for id in rows
        .iter()
        .map(|r| &r.target_id)
        .chain(rows.iter().map(|r| &r.source_id))
    {
        if !ids.contains(id) {
            ids.push(id.clone());
        }
    }
    ids
}

pub fn train_predictor(cfg: &RunConfig, features: &Path, out: &Path) -> Result<(), CliError> {
    let mut run = RunInfo::new("train-predictor", cfg);
    run.input("features", features)?;
    let rows = read_features(features)?;
    let folds = leave_groups_out_folds(&subject_ids(&rows), cfg.subject_folds, cfg.seed)?;
    let models = train_fold_predictors(&rows, &folds, &cfg.train)?;
    let mut outputs = Outputs::new(run);
    outputs.create_dir(out)?;
    outputs.write_bytes(&out.join(FOLDS_FILE), &to_json(&folds)?)?;
    for (f, model) in models.iter().enumerate() {
        outputs.write_bytes(&out.join(model_file(f)), model.to_json()?.as_bytes())?;
    }
    outputs.commit();
    Ok(())
}

/// Folds and predictors from a `train-predictor` directory.
pub fn read_models(dir: &Path, run: &mut RunInfo) -> Result<(Vec<GroupFold>, Vec<TppModel>), CliError> {
    let folds_path = dir.join(FOLDS_FILE);
    run.input("folds", &folds_path)?;
    let folds: Vec<GroupFold> =
        serde_json::from_str(&fs::read_to_string(&folds_path)?).map_err(|e| srcsel_core::Error::Parse {
            line: e.line(),
            column: e.column(),
            message: format!("{}: {e}", folds_path.display()),
        })?;
    let models = (0..folds.len())
        .map(|f| {
            let path: PathBuf = dir.join(model_file(f));
            run.input(format!("model_{f:02}"), &path)?;
            Ok(TppModel::load(&path)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((folds, models))
}

struct BenchInputs {
    matrix: AccuracyMatrix,
    features: FeatureTable,
    folds: Vec<GroupFold>,
    models: Vec<TppModel>,
}

fn bench_inputs(cfg: &RunConfig, args: &BenchArgs, run: &mut RunInfo) -> Result<BenchInputs, CliError> {
    run.input("data", &args.data)?;
    let (subjects, _) = load_data(&args.data, cfg)?;
    let (folds, models) = read_models(&args.models, run)?;
    let matrix = matrix_for(&subjects, cfg, args.matrix.as_deref(), run)?;
    let rows = match &args.features {
        Some(p) => {
            run.input("features", p)?;
            read_features(p)?
        }
        None => pair_feature_rows(&subjects, &cfg.cv, None)?,
    };
    Ok(BenchInputs {
        matrix,
        features: feature_table(&rows),
        folds,
        models,
    })
}

pub fn compare(cfg: &RunConfig, args: &BenchArgs) -> Result<(), CliError> {
    let mut run = RunInfo::new("compare", cfg);
    let inputs = bench_inputs(cfg, args, &mut run)?;
    let bench = Benchmark::new(
        &inputs.matrix,
        &inputs.features,
        &inputs.folds,
        &inputs.models,
        cfg.seed,
    )?;
    let (acc, cmp) = compare_methods(&bench, &cfg.methods, cfg.candidates)?;
    let oracle = acc.method_index(Method::Oracle);
    let mut summary = String::from("method,mean_accuracy,gap_to_oracle\n");
    for (m, method) in acc.methods.iter().enumerate() {
        let gap = match oracle {
            Some(_) => acc.gap_to_oracle(m)?.to_string(),
            None => String::new(),
        };
        summary.push_str(&format!("{method},{},{gap}\n", acc.mean(m)));
    }
    let out = &args.out;
    let mut outputs = Outputs::new(run);
    outputs.create_dir(out)?;
    outputs.write_bytes(&out.join("mean_diff.csv"), &to_bytes(|b| cmp.write_mean_diff_csv(b))?)?;
    outputs.write_bytes(&out.join("p_values.csv"), &to_bytes(|b| cmp.write_p_values_csv(b))?)?;
    outputs.write_bytes(
        &out.join("significance.csv"),
        &to_bytes(|b| cmp.write_significance_csv(b))?,
    )?;
    outputs.write_bytes(&out.join("selections.csv"), &to_bytes(|b| acc.write_csv(b))?)?;
    outputs.write_bytes(&out.join("summary.csv"), summary.as_bytes())?;
    outputs.commit();
    Ok(())
}

pub fn sweep(cfg: &RunConfig, args: &BenchArgs) -> Result<(), CliError> {
    let mut run = RunInfo::new("sweep", cfg);
    let inputs = bench_inputs(cfg, args, &mut run)?;
    let bench = Benchmark::new(
        &inputs.matrix,
        &inputs.features,
        &inputs.folds,
        &inputs.models,
        cfg.seed,
    )?;
    let sweep = candidate_sweep(&bench, &cfg.methods, &cfg.sweep_candidates)?;
    let mut outputs = Outputs::new(run);
    outputs.create_dir(&args.out)?;
    outputs.write_bytes(&args.out.join("sweep.csv"), &to_bytes(|b| sweep.write_csv(b))?)?;
    outputs.commit();
    Ok(())
}
