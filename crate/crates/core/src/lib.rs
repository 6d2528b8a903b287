//! Hierarchical clustering ensembles with consensus fusion.
//!
//! The pipeline bags the data `L` times, clusters every bag with single
//! linkage, extends each tree's cophenetic matrix to all points, and fuses
//! the resulting matrices into one consensus. Fusion is either a fixed
//! Rényi power mean ([`fusion::renyi_fuse`]) or a weighted sum of the
//! per-pair order statistics whose weights are found by a genetic search
//! maximizing the cophenetic correlation with the Euclidean distances
//! ([`genetic::evolve`]). The consensus is turned back into a tree through
//! its subdominant ultrametric.
//!
//! [`evaluation`] runs repeated trials per dataset and method, compares
//! methods with Welch's t-test and reports winning frequencies.

pub mod cpcc;
pub mod dataset;
pub mod dendrogram;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod genetic;
pub mod linkage;
pub mod matrix;
pub mod stats;
pub mod synthetic;
pub mod ultrametric;

pub use cpcc::cpcc;
pub use dendrogram::{Dendrogram, Merge};
pub use ensemble::{generate_ensemble, BaggedHierarchy, EnsembleConfig};
pub use error::{Error, Result};
pub use evaluation::{ExperimentReport, MethodId, TrialConfig, TrialRecord};
pub use fusion::{
    renyi_fuse, sort_ensemble, weighted_consensus, RenyiFuser, RenyiParameter, SortedEnsemble,
};
pub use genetic::{evolve, genetic_fuse_pipeline, Chromosome, GaConfig, GaResult, GeneticFusion};
pub use linkage::single_linkage;
pub use matrix::{euclidean_dissimilarity, DataMatrix, DissimilarityMatrix};
pub use ultrametric::{dendrogram_from_ultrametric, is_ultrametric, subdominant_ultrametric};
