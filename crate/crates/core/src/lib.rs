//! Explainable quality ratings for vacation rentals.
//!
//! The pipeline transfers hotel star ratings to vacation rentals through
//! guest co-stays ([`colab`]), trains four ordered binary classifiers with
//! monotone constraints ([`learners`], [`ordinal`]), rates properties with
//! the consistent-labeling rule, and explains ([`explain`]) and improves
//! ([`suggest`]) each rating. [`api`] holds the JSON request/response layer
//! shared by the HTTP service and the browser demo.

pub mod api;
pub mod colab;
pub mod data;
pub mod error;
pub mod explain;
pub mod learners;
pub mod metrics;
pub mod ordinal;
pub mod suggest;
pub mod synth;

pub use colab::{
    build_stay_graph, collaborative_label, label_dataset, star_distribution, StarDistribution, StayGraph, StayTable,
};
pub use data::{
    load_properties, split_dataset, write_properties, Dataset, FeatureKind, FeatureSchema, FeatureSpec, PropertyKind,
    PropertyRecord, RatingClass,
};
pub use error::{Error, Result};
pub use explain::{brute_force_shap, compute_explanation, tree_shap, Explanation};
pub use learners::{
    predict_margin, train_gbt, train_logistic, BinaryScorer, BoostedClassifier, GbtConfig, LogisticConfig,
    LogisticModel, TreeNode,
};
pub use metrics::{accuracy, mamae, mode_classifier, weighted_f1, EvalReport};
pub use ordinal::{
    consistent_label, expand_labels, responsible_classifier, train_ordinal, tune_thresholds, BaseKind, OrdinalModel,
    ResponsibleIndex,
};
pub use suggest::{apply_suggestion, compute_suggestions, Suggestion};
pub use synth::{generate_synthetic, SynthConfig, SynthOutput};
