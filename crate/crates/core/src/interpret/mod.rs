//! Cluster derivation and post-hoc interpretation: per-cluster treatment
//! tables, feature histograms, patient similarity, surrogate decision trees,
//! rank-based tests and PCA.

mod cart;
mod clusters;
mod pca;
mod stability;
mod stats;

pub use cart::{best_split, fit_cart, gini, CartNode, CartParams, SplitChoice};
pub use clusters::{
    adjusted_rand_index, assign_clusters, cluster_treatment_table, feature_histograms,
    patient_feature_similarity, patient_latent_similarity, rank_treatments, ClusterProfile,
    FeatureHistogram, FeatureSummary, RankedTreatment, TreatmentCell, DEFAULT_MIN_CELL,
};
pub use pca::{pca, pca_dataset, PcaOptions, PcaResult};
pub use stability::{frequency_table, tree_feature_frequency, FeatureFrequency, TOP_LEVEL_DEPTH};
pub use stats::{dunn_test, kruskal_wallis, DunnPair, DunnTable, KruskalWallis, EXACT_LIMIT};
