//! Experimental machinery: the pairwise transfer-accuracy matrix, per-target
//! method outcomes, pairwise method comparison with a signed-rank test, and the
//! candidate-count sweep, all under leave-groups-out cross-validation over
//! subjects.

mod benchmark;
mod matrix;
mod wilcoxon;

pub use benchmark::{
    candidate_sweep, compare_accuracies, compare_methods, feature_table, fold_training_rows, leave_groups_out_folds,
    pair_feature_rows, train_fold_predictors, Benchmark, FeatureTable, GroupFold, MethodAccuracies, MethodComparison,
    Sweep, SIGNIFICANCE_LEVEL,
};
pub use matrix::{build_accuracy_matrix, transfer_accuracy, transfer_accuracy_prepared, AccuracyMatrix, TargetRounds};
pub use wilcoxon::{average_ranks, exact_p_value, wilcoxon_signed_rank, EXACT_MAX_N};
