//! Dataset manifest and fold protocol, cross-validated training and scoring,
//! external feature ingestion, caching and reports.

mod cache;
mod cv;
mod descriptor;
mod features;
mod manifest;
mod report;

pub use cache::FeatureCache;
pub use cv::{
    descriptor_features, evaluate_fold, feature_digest, fold_seed, image_digest, load_images, mean,
    run_descriptor_cv, run_feature_cv, CvResult, FoldAudit,
};
pub use descriptor::{DescriptorKind, DescriptorSpec, Trained};
pub use features::{
    fold_path, import_external_features, is_per_fold, read_feature_csv, write_feature_csv, ExternalFeatureSet,
};
pub use manifest::{DatasetManifest, ManifestEntry, DEFAULT_FOLDS};
pub use report::{run_fusion_experiment, AccuracyRow, FusionResult, ExperimentReport, RESULTS_FILE, TABLES_FILE};
