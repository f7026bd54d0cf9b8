//! Numerical kernels shared by the hashing pipelines.
//!
//! Everything here is a pure function over borrowed inputs. The FFT planner is
//! cached per thread, so the kernels can be called from any number of worker
//! threads without coordination.

use std::cell::RefCell;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Checks the `DenseVector` invariants: non-empty, all entries finite.
pub fn check_vector(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyVector);
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Angle in radians between two non-zero vectors.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let cos = dot(a, b) / (l2_norm(a) * l2_norm(b));
    // atan2 form keeps precision near 0 and pi where acos is ill-conditioned.
    let cross = (1.0 - cos * cos).max(0.0).sqrt();
    cross.atan2(cos)
}

/// In-place Walsh-Hadamard transform scaled by `1/sqrt(n)` (Sylvester ordering).
pub fn fwht_normalized_in_place(x: &mut [f64]) -> Result<()> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NonPowerOfTwoLength(n));
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(())
}

pub fn fwht_normalized(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    fwht_normalized_in_place(&mut out)?;
    Ok(out)
}

/// A diagonal matrix with entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RademacherDiagonal {
    signs: Vec<i8>,
}

impl RademacherDiagonal {
    pub fn from_signs(signs: &[f64]) -> Result<Self> {
        let signs = signs
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                if value == 1.0 {
                    Ok(1)
                } else if value == -1.0 {
                    Ok(-1)
                } else {
                    Err(Error::InvalidSign { index, value })
                }
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Self { signs })
    }

    /// Draws `n` independent fair signs.
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let signs = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self { signs }
    }

    pub fn identity(n: usize) -> Self {
        Self { signs: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.signs[i])
    }

    pub fn signs(&self) -> impl Iterator<Item = f64> + '_ {
        self.signs.iter().map(|&s| f64::from(s))
    }

    pub fn apply_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_len(self.signs.len(), x.len())?;
        for (v, &s) in x.iter_mut().zip(&self.signs) {
            if s < 0 {
                *v = -*v;
            }
        }
        Ok(())
    }
}

/// `output[i] = d[i] * x[i]`.
pub fn apply_diagonal(d: &RademacherDiagonal, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    d.apply_in_place(&mut out)?;
    Ok(out)
}

/// Row-major dense real matrix. Used as the slow path and as a test oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Textbook `O(rows * cols)` matrix-vector product.
pub fn dense_matvec(m: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len(m.cols, x.len())?;
    Ok((0..m.rows).map(|i| dot(m.row(i), x)).collect())
}

/// Explicit `n x n` Sylvester-Hadamard matrix scaled by `1/sqrt(n)`, built by
/// the recursion `H_2n = [[H_n, H_n], [H_n, -H_n]]`.
pub fn sylvester_hadamard(n: usize) -> Result<DenseMatrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NonPowerOfTwoLength(n));
    }
    let mut h = DenseMatrix::identity(1);
    while h.rows < n {
        let m = h.rows;
        let mut next = DenseMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                let v = h.get(i, j);
                next.set(i, j, v);
                next.set(i, j + m, v);
                next.set(i + m, j, v);
                next.set(i + m, j + m, -v);
            }
        }
        h = next;
    }
    let scale = 1.0 / (n as f64).sqrt();
    h.data.iter_mut().for_each(|v| *v *= scale);
    Ok(h)
}

/// Circulant matrix given by its first row; row `i` is the first row shifted
/// right by `i`, i.e. `M[i][j] = first_row[(j - i) mod n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantSpec {
    pub first_row: Vec<f64>,
}

impl CirculantSpec {
    pub fn new(first_row: Vec<f64>) -> Self {
        Self { first_row }
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.first_row[(j + n - i) % n]);
            }
        }
        m
    }
}

/// Toeplitz matrix described by its `2n - 1` diagonals, indexed by `j - i + n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzSpec {
    pub diagonals: Vec<f64>,
}

impl ToeplitzSpec {
    pub fn new(diagonals: Vec<f64>) -> Result<Self> {
        if diagonals.len().is_multiple_of(2) {
            return Err(Error::Format(format!(
                "toeplitz diagonals must have odd length 2n-1, got {}",
                diagonals.len()
            )));
        }
        Ok(Self { diagonals })
    }

    /// Column count `n`.
    pub fn dim(&self) -> usize {
        self.diagonals.len().div_ceil(2)
    }

    pub fn to_dense(&self, k: usize) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(k, n);
        for i in 0..k {
            for j in 0..n {
                m.set(i, j, self.diagonals[j + n - 1 - i]);
            }
        }
        m
    }
}

/// `y[i] = sum_m c[m] * x[(i + m) mod N]`, computed as `ifft(conj(fft(c)) * fft(x))`.
fn cyclic_correlate(c: &[f64], x: &[f64]) -> Vec<f64> {
    let len = c.len();
    let mut cf: Vec<Complex<f64>> = c.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut xf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        fwd.process(&mut cf);
        fwd.process(&mut xf);
        for (a, b) in xf.iter_mut().zip(&cf) {
            *a *= b.conj();
        }
        inv.process(&mut xf);
    });
    let scale = 1.0 / len as f64;
    xf.iter().map(|v| v.re * scale).collect()
}

/// Circulant matrix-vector product in `O(n log n)`.
pub fn circulant_matvec(c: &CirculantSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_len(c.dim(), x.len())?;
    Ok(cyclic_correlate(&c.first_row, x))
}

/// First `k` rows of the Toeplitz product, via embedding in a `2n` circulant.
pub fn toeplitz_matvec(t: &ToeplitzSpec, x: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = t.dim();
    check_len(n, x.len())?;
    if k > n {
        return Err(Error::RowCountExceedsDimension { k, n });
    }
    let mut c = vec![0.0; 2 * n];
    // Non-negative offsets d = j - i fill c[d]; negative offsets wrap to c[2n + d].
    c[..n].copy_from_slice(&t.diagonals[n - 1..]);
    for d in 1..n {
        c[2 * n - d] = t.diagonals[n - 1 - d];
    }
    let mut padded = x.to_vec();
    padded.resize(2 * n, 0.0);
    let mut y = cyclic_correlate(&c, &padded);
    y.truncate(k);
    Ok(y)
}
