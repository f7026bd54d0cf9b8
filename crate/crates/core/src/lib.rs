//! Structured binary embeddings for angular-distance hashing.
//!
//! A datapoint `x` is hashed to `k` signs by a random linear map whose
//! projection matrix is Psi-regular: every entry is a sum over a subset of a
//! shared pool of gaussians (Toeplitz and circulant matrices are the main
//! examples). The fraction of differing bits between two hashes estimates the
//! angle between the inputs divided by pi.
//!
//! - [`transforms`]: Walsh-Hadamard, sign diagonals, FFT circulant/Toeplitz products.
//! - [`matrix`]: subset structures, validation, sampling, fast multiply.
//! - [`graph`]: row-pair dependency graphs and the P-chromatic number.
//! - [`hashing`]: extended and short pipelines, bit-packed hashes, angle estimates.
//! - [`io`]: PSIH hash files, CSV and raw f64 vector inputs.
//! - [`experiments`]: Monte-Carlo bias/concentration harness and bound evaluation.

pub mod error;
pub mod experiments;
pub mod graph;
pub mod hashing;
pub mod io;
pub mod matrix;
pub mod seeding;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};
pub use graph::{
    build_graph, chromatic_number, p_chromatic_number, ChromaticResult, ColoringMethod,
    ColoringMode, DependencyGraph, PChromaticResult,
};
pub use hashing::{
    build_pipeline, estimate_angle, estimate_angle_radians, estimate_angle_real, normalize,
    AngleEstimate, BinaryHash, HashPipeline, PipelineConfig, Quantizer, Variant,
};
pub use matrix::{
    validate, Constraint, Family, GaussianPool, PsiRegularMatrix, SubsetStructure, ValidationReport,
};
pub use transforms::{
    apply_diagonal, circulant_matvec, dense_matvec, fwht_normalized, toeplitz_matvec,
    CirculantSpec, DenseMatrix, RademacherDiagonal, ToeplitzSpec,
};
