//! Sparse asymptotic principal components (sparse APCA) for approximate factor
//! models whose latent factors are sparse over the time horizon.
//!
//! The crate is organised around the estimation pipeline:
//!
//! * [`panel`] loads and centres a `T×N` panel and builds the scaled gram
//!   matrix `S = XX'/(NT)`.
//! * [`sparse_eigen`] holds the truncated power iteration, the deflation
//!   state machine and the generalized iteration with pseudo square roots.
//! * [`factor_model`] turns sparse eigenvectors into factors, OLS loadings
//!   with standard errors, factor-count selection and subspace diagnostics.
//! * [`sparsity_selection`] picks the sparsity level by cross-sectional
//!   cross-validation with an information-criterion penalty.
//! * [`simulation`] generates the Monte Carlo designs and evaluates them.
//!
//! Indices are 0-based throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factor_model;
pub mod linalg;
pub mod panel;
pub mod simulation;
pub mod sparse_eigen;
pub mod sparsity_selection;

pub use error::{Error, Result};
pub use factor_model::{
    common_component, estimate, estimate_loadings, select_num_factors_ic, select_num_factors_ratio, subspace_distance,
    subspace_distances, DistanceKind, FactorCountSelection, LoadingMatrix, ModelFit, SparseFactorSet,
    SubspaceDistances,
};
pub use panel::{demean, load_csv, scaled_gram, GramMatrix, Panel, PanelSummary};
pub use sparse_eigen::{
    deflate, generalized_truncated_power, pseudo_sqrt_pair, sparse_eigen_sequence, truncate_top_k, truncated_power,
    DeflationState, SolveOutcome, SolverSettings, SparseVector,
};
pub use sparsity_selection::{
    make_splits, penalty_g, select_sparsity, testing_error, CrossSectionSplit, PenaltyKind, SparsitySelectionReport,
};
