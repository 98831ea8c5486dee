//! Sparse approximation and multi-task feature selection.
//!
//! Single-task selection runs orthogonal matching pursuit or the LASSO on
//! each indicator column independently; multi-task selection finds one
//! support shared by every task, either greedily (simultaneous OMP) or by
//! the row-sparse `l_{1,inf}` relaxation. Selected supports can be refit by
//! ridge regression and scored with per-person ROC analysis.

pub mod convex;
pub mod data;
pub mod error;
pub mod eval;
pub mod gabor;
pub mod greedy;
pub mod linalg;
pub mod linear_model;
pub mod model_file;

pub use error::{Error, Result};
pub use linear_model::{
    build_indicator, mixed_norm, multitask_loss, predict, row_l0, row_l0_eps, squared_error,
    CoefficientMatrix, DataMatrix, IndicatorResponse, SupportSet,
};
