//! Explainable auto-tuning for numerical kernels.
//!
//! The crate generates benchmark data for accurate (error-free split) matrix
//! multiplication variants and for thresholded incomplete-Cholesky CG solves,
//! trains random-forest selection and regression models on that data, and
//! explains their decisions with exact Shapley values.

pub mod data;
pub mod forest;
pub mod kernels;
pub mod matrix;
pub mod ozaki;
pub mod piccg;
pub mod shapley;
