//! Labeling, repeated stratified cross-validation, metrics and the report
//! tables, plus the synthetic EEG generator used to check the pipeline.

mod cv;
mod dataset;
mod harness;
mod labels;
mod learners;
mod mapping;
mod metrics;
pub mod report;
mod similarity;
pub mod synth;

pub use cv::{stratified_cv, Fold, FoldPlan};
pub use dataset::{compute_features, DataView, Dataset, FeatureKind};
pub use harness::{evaluate, evaluate_plan, CvConfig, EvalReport, Fitted, Learner, MetricsReport, RunAudit, RunMetrics, SCHEMA_VERSION};
pub use labels::{
    apply_labels, extremum_labels, sub_session_labels, tlx_to_label, tlx_to_label_with, LevelClass, SubSessionKey,
    EXTREMUM_LEVELS, TLX_THRESHOLD,
};
pub use learners::{ClassicalLearner, FusionLearner, NeuralLearner};
pub use mapping::{mapping_accuracy, trial_correct, MappingReport, ParameterAccuracy};
pub use metrics::{Confusion, MeanStd};
pub use similarity::{pairwise_similarity, parameter_pairs, SimilarityConfig, SimilarityReport, SimilarityRow, Verdict, SIMILAR_THRESHOLD};
pub use synth::{synth_dataset, synth_parameter_dataset, SyntheticSpec};
