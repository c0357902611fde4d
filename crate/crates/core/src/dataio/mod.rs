//! Dataset schema, CSV ingestion, harmonization, fold splitting and the
//! planted-structure generator.

mod csvio;
mod folds;
mod harmonize;
mod schema;
mod synth;

pub use csvio::{load_csv, read_csv, read_labels, save_csv, write_csv, write_labels};
pub use folds::{stratified_kfold, FoldPlan};
pub use harmonize::{
    binarize, equipercentile_map, impute, rate_matching_threshold, rescale, Equipercentile,
    ImputeStrategy, Imputer,
};
pub use schema::{
    Dataset, FeatureDescriptor, FeatureKind, FeatureSchema, PatientRecord, TreatmentSet,
    FEATURE_COUNT, RACE_CATEGORIES, STANDARD_TREATMENTS,
};
pub use synth::{
    generate_synthetic, generate_with, ClusterSpec, FeatureDist, StudySpec, SynthConfig,
    CLUSTER_SIZES, REFERENCE_REMISSION, STUDY_SIZES, TREATMENT_COUNTS,
};
