//! Input fixtures shared by the benchmarks.

use psihash::{build_pipeline, Family, HashPipeline, PipelineConfig, Variant};

/// Deterministic, non-sparse test vector of length `n`.
pub fn test_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5)
        .collect()
}

pub fn pipeline(variant: Variant, family: Family, k: usize, n: usize) -> HashPipeline {
    build_pipeline(&PipelineConfig::new(variant, family, k, n, 42)).expect("valid bench config")
}
