//! Hashing pipelines and the normalized approximate angle.
//!
//! The extended pipeline computes `phi(P D H R x)` where `R` and `D` are random
//! sign diagonals, `H` is the normalized Walsh-Hadamard transform and `P` is a
//! Psi-regular projection. The short pipeline drops `R` and `H`: `phi(P D x)`.
//! Inputs to the extended pipeline are zero-padded to the next power of two.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Family, PsiRegularMatrix, SubsetStructure};
use crate::seeding::{stream_rng, PROJECTION_SIGN_STREAM, ROTATION_STREAM};
use crate::transforms::{check_vector, fwht_normalized_in_place, l2_norm, RademacherDiagonal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Extended,
    Short,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Extended => "extended",
            Variant::Short => "short",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extended" => Ok(Variant::Extended),
            "short" => Ok(Variant::Short),
            _ => Err(Error::InvalidConfig(format!("unknown variant {s:?}"))),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toeplitz" => Ok(Family::Toeplitz),
            "circulant" => Ok(Family::Circulant),
            "general" => Ok(Family::General),
            _ => Err(Error::InvalidConfig(format!("unknown family {s:?}"))),
        }
    }
}

/// Pointwise nonlinearity applied to the projected vector.
///
/// Written as `sign`, `tanh:<beta>` or `threshold:<tau>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Quantizer {
    /// `+1` for `x >= 0`, `-1` otherwise.
    Sign,
    /// `tanh(beta * x)`; real valued.
    Tanh { beta: f64 },
    /// `+1` for `x >= tau`, `-1` otherwise.
    Threshold { tau: f64 },
}

impl Quantizer {
    pub fn is_binary(&self) -> bool {
        !matches!(self, Quantizer::Tanh { .. })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Quantizer::Sign => {
                if x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Quantizer::Tanh { beta } => (beta * x).tanh(),
            Quantizer::Threshold { tau } => {
                if x >= tau {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    fn bit(&self, x: f64) -> bool {
        match *self {
            Quantizer::Sign => x >= 0.0,
            Quantizer::Threshold { tau } => x >= tau,
            Quantizer::Tanh { .. } => unreachable!("tanh is not binary"),
        }
    }
}

impl fmt::Display for Quantizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantizer::Sign => f.write_str("sign"),
            Quantizer::Tanh { beta } => write!(f, "tanh:{beta}"),
            Quantizer::Threshold { tau } => write!(f, "threshold:{tau}"),
        }
    }
}

impl FromStr for Quantizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown quantizer {s:?}"));
        let param = |p: &str| -> Result<f64> {
            let v: f64 = p.parse().map_err(|_| bad())?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        match s.split_once(':') {
            None if s == "sign" => Ok(Quantizer::Sign),
            Some(("tanh", beta)) => {
                let beta = param(beta)?;
                if beta <= 0.0 {
                    return Err(Error::InvalidConfig("tanh beta must be positive".into()));
                }
                Ok(Quantizer::Tanh { beta })
            }
            Some(("threshold", tau)) => Ok(Quantizer::Threshold { tau: param(tau)? }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Quantizer {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Quantizer> for String {
    fn from(q: Quantizer) -> Self {
        q.to_string()
    }
}

/// Everything needed to rebuild a pipeline deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub k: usize,
    pub n: usize,
    pub family: Family,
    /// Required when `family` is `general`; its column count must equal the
    /// working dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<SubsetStructure>,
    #[serde(default = "default_quantizer")]
    pub quantizer: Quantizer,
    pub seed: u64,
}

fn default_quantizer() -> Quantizer {
    Quantizer::Sign
}

impl PipelineConfig {
    pub fn new(variant: Variant, family: Family, k: usize, n: usize, seed: u64) -> Self {
        Self {
            variant,
            k,
            n,
            family,
            structure: None,
            quantizer: Quantizer::Sign,
            seed,
        }
    }

    /// Working dimension: `n` rounded up to a power of two for the extended variant.
    pub fn padded_dim(&self) -> usize {
        match self.variant {
            Variant::Extended => self.n.next_power_of_two(),
            Variant::Short => self.n,
        }
    }
}

/// A fully configured hashing transform. Immutable and cheap to share.
#[derive(Debug, Clone)]
pub struct HashPipeline {
    config: Arc<PipelineConfig>,
    n_padded: usize,
    r_diag: Option<RademacherDiagonal>,
    d_diag: RademacherDiagonal,
    matrix: PsiRegularMatrix,
}

pub fn build_pipeline(config: &PipelineConfig) -> Result<HashPipeline> {
    let (k, n) = (config.k, config.n);
    if k == 0 || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "k and n must be positive, got k={k}, n={n}"
        )));
    }
    let n_padded = config.padded_dim();
    if k > n_padded {
        return Err(Error::RowCountExceedsDimension { k, n: n_padded });
    }
    let matrix = match config.family {
        Family::Toeplitz => PsiRegularMatrix::toeplitz(k, n_padded, config.seed)?,
        Family::Circulant => PsiRegularMatrix::circulant(k, n_padded, config.seed)?,
        Family::General => {
            let s = config.structure.clone().ok_or_else(|| {
                Error::InvalidConfig("general family requires a structure".into())
            })?;
            if s.rows() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: s.rows(),
                });
            }
            if s.cols() != n_padded {
                return Err(Error::DimensionMismatch {
                    expected: n_padded,
                    actual: s.cols(),
                });
            }
            PsiRegularMatrix::general(s, config.seed)?
        }
    };
    Ok(HashPipeline::assemble(Arc::new(config.clone()), matrix))
}

impl HashPipeline {
    fn assemble(config: Arc<PipelineConfig>, matrix: PsiRegularMatrix) -> Self {
        let n_padded = config.padded_dim();
        let seed = config.seed;
        let r_diag = (config.variant == Variant::Extended)
            .then(|| RademacherDiagonal::sample(n_padded, &mut stream_rng(seed, ROTATION_STREAM)));
        let d_diag =
            RademacherDiagonal::sample(n_padded, &mut stream_rng(seed, PROJECTION_SIGN_STREAM));
        Self {
            config,
            n_padded,
            r_diag,
            d_diag,
            matrix,
        }
    }

    /// Same configuration with every random component redrawn from `seed`.
    /// Equivalent to `build_pipeline` with the seed replaced, but reuses the
    /// subset structure.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut config = (*self.config).clone();
        config.seed = seed;
        let matrix = self.matrix.resampled(seed);
        Self::assemble(Arc::new(config), matrix)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn n_input(&self) -> usize {
        self.config.n
    }

    pub fn n_padded(&self) -> usize {
        self.n_padded
    }

    pub fn quantizer(&self) -> Quantizer {
        self.config.quantizer
    }

    pub fn r_diag(&self) -> Option<&RademacherDiagonal> {
        self.r_diag.as_ref()
    }

    pub fn d_diag(&self) -> &RademacherDiagonal {
        &self.d_diag
    }

    pub fn matrix(&self) -> &PsiRegularMatrix {
        &self.matrix
    }

    /// The vector fed to `P`: `D H R x` (extended) or `D x` (short).
    pub fn preprocess(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.config.n {
            return Err(Error::DimensionMismatch {
                expected: self.config.n,
                actual: x.len(),
            });
        }
        check_vector(x)?;
        let mut v = x.to_vec();
        v.resize(self.n_padded, 0.0);
        if let Some(r) = &self.r_diag {
            r.apply_in_place(&mut v)?;
            fwht_normalized_in_place(&mut v)?;
        }
        self.d_diag.apply_in_place(&mut v)?;
        Ok(v)
    }

    /// Pre-quantization projection.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(&self.preprocess(x)?)
    }

    pub fn hash(&self, x: &[f64]) -> Result<BinaryHash> {
        let q = self.config.quantizer;
        if !q.is_binary() {
            return Err(Error::NonBinaryQuantizer(q.to_string()));
        }
        let y = self.project(x)?;
        Ok(BinaryHash::from_bits(y.iter().map(|&v| q.bit(v))))
    }

    /// `phi` applied to the projection; works for every quantizer.
    pub fn hash_real(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.config.quantizer;
        Ok(self.project(x)?.into_iter().map(|v| q.apply(v)).collect())
    }

    /// Hashes every row in parallel; output order follows input order.
    pub fn hash_batch<V: AsRef<[f64]> + Sync>(&self, xs: &[V]) -> Result<Vec<BinaryHash>> {
        for (row, x) in xs.iter().enumerate() {
            let x = x.as_ref();
            if x.len() != self.config.n {
                return Err(Error::Row {
                    row,
                    source: Box::new(Error::DimensionMismatch {
                        expected: self.config.n,
                        actual: x.len(),
                    }),
                });
            }
        }
        xs.par_iter()
            .enumerate()
            .map(|(row, x)| {
                self.hash(x.as_ref()).map_err(|e| Error::Row {
                    row,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// Scales `x` to unit L2 norm.
pub fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    check_vector(x)?;
    let norm = l2_norm(x);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

/// A bit-packed sign vector: bit `i` set means `h[i] = +1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryHash {
    len: usize,
    words: Vec<u64>,
}

impl BinaryHash {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        Self { len, words }
    }

    /// From `+1`/`-1` values; anything `>= 0` counts as `+1`.
    pub fn from_signs(signs: &[f64]) -> Self {
        Self::from_bits(signs.iter().map(|&s| s >= 0.0))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit {i} out of range for hash of length {}",
            self.len
        );
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn to_signs(&self) -> Vec<f64> {
        (0..self.len)
            .map(|i| if self.bit(i) { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn complement(&self) -> Self {
        Self::from_bits((0..self.len).map(|i| !self.bit(i)))
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// L1 distance between the `+-1` vectors, i.e. twice the Hamming distance.
    pub fn l1_distance(&self, other: &Self) -> Result<usize> {
        Ok(2 * self.hamming(other)?)
    }

    pub fn byte_len(k: usize) -> usize {
        k.div_ceil(8)
    }

    /// Little-endian bit order: bit `i` is bit `i % 8` of byte `i / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(Self::byte_len(self.len));
        out
    }

    pub fn from_bytes(k: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::byte_len(k) {
            return Err(Error::Format(format!(
                "hash of {k} bits needs {} bytes, got {}",
                Self::byte_len(k),
                bytes.len()
            )));
        }
        if !k.is_multiple_of(8) && bytes[bytes.len() - 1] >> (k % 8) != 0 {
            return Err(Error::Format("padding bits are not zero".into()));
        }
        let words = bytes
            .chunks(8)
            .map(|c| {
                let mut w = [0u8; 8];
                w[..c.len()].copy_from_slice(c);
                u64::from_le_bytes(w)
            })
            .collect();
        Ok(Self { len: k, words })
    }
}

/// Normalized angle estimate: Hamming distance over `k`, an estimate of `theta / pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub value: f64,
    pub k: usize,
}

impl AngleEstimate {
    pub fn radians(&self) -> f64 {
        self.value * std::f64::consts::PI
    }
}

pub fn estimate_angle(h1: &BinaryHash, h2: &BinaryHash) -> Result<AngleEstimate> {
    let d = h1.hamming(h2)?;
    let k = h1.len();
    let value = if k == 0 { 0.0 } else { d as f64 / k as f64 };
    Ok(AngleEstimate { value, k })
}

pub fn estimate_angle_radians(h1: &BinaryHash, h2: &BinaryHash) -> Result<f64> {
    Ok(estimate_angle(h1, h2)?.radians())
}

/// `(1/2k) * ||h1 - h2||_1` for real-valued hashes.
pub fn estimate_angle_real(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch {
            expected: h1.len(),
            actual: h2.len(),
        });
    }
    if h1.is_empty() {
        return Ok(0.0);
    }
    let l1: f64 = h1.iter().zip(h2).map(|(a, b)| (a - b).abs()).sum();
    Ok(l1 / (2.0 * h1.len() as f64))
}
