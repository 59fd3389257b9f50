//! Per-pixel tissue classification over band-sequential cubes.
//!
//! Supervised probabilities come from one-vs-rest RBF SVMs with Platt calibration,
//! spectral clusters from K-Means, and the two are fused by averaging the
//! probabilities inside each cluster.

mod fusion;
mod kmeans;
mod maps;
mod metrics;
mod svm;
mod train;

pub use fusion::{argmax_labels, colorize, majority_vote};
pub use kmeans::{initial_centroid_indices, kmeans_cluster, KMeansParams};
pub use maps::{ClassInfo, ClusterMap, LabelMap, ProbabilityMap, UNLABELED};
pub use metrics::{accuracy, auc_score, macro_auc};
pub use svm::{svm_predict, BinaryClassifier, CompiledSvm, SvmModel, MODEL_VERSION};
pub use train::{nearest_centroid_accuracy, svm_train_toy, TrainParams};
