//! Core reasoning for grasp-action affordances.
//!
//! An object is described by four visual-semantic attributes (shape, texture,
//! categorical, environment). Per-attribute Gaussian classifiers turn feature
//! vectors into posterior distributions over a closed entity vocabulary; a
//! layered knowledge-base graph with stochastic edge weights ranks entity
//! chains into one of seven grasp affordances; a decision tree over the
//! concatenated posteriors acts as the predictive model; and the deduced
//! affordance constrains a grasp region on the object's point cloud.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all IO, file formats,
//! and the command-line front end live in the companion `afford-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attribute_model;
pub mod grasp_region;
pub mod kb_graph;
mod math;
pub mod predictive_tree;

pub use attribute_model::{
    classify_context, AffordanceClass, AttributeKind, EntityId, FeatureVector,
    GaussianAttributeClassifier, ModelError, ObjectContext, PosteriorVector,
};
pub use grasp_region::{
    fit_ellipse, partition_z, select_region, GraspCandidateSet, GraspEllipse, GraspError,
    GraspRegion, PointCloud, SelectionRule, ZPartition,
};
pub use kb_graph::{
    AffordancePath, AffordanceScores, ConcatenatedEvidence, KbError, KnowledgeBaseGraph,
    LayerConfig, LayerRef, WeightMatrix,
};
pub use predictive_tree::{
    infer, DecisionTree, InferError, InferenceResult, LeafPrediction, TrainingRow, TreeConfig,
    TreeError, TreeNode,
};
