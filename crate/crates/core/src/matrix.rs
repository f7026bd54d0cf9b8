//! Psi-regular projection matrices.
//!
//! Entry `(i, j)` of a Psi-regular matrix is the sum of the pool gaussians whose
//! indices lie in the subset `S[i][j]`. A [`SubsetStructure`] holds the subsets,
//! a [`GaussianPool`] holds the gaussians, and [`PsiRegularMatrix`] ties the two
//! together with a fast multiply for the Toeplitz and circulant families.
//!
//! All indices (rows, columns, pool indices) are 0-based, including in the JSON
//! form of a structure.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{stream_rng, POOL_STREAM};
use crate::transforms::{
    circulant_matvec, dense_matvec, toeplitz_matvec, CirculantSpec, DenseMatrix, ToeplitzSpec,
};

/// The `t` standard gaussians backing a matrix, regenerated from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPool {
    seed: u64,
    values: Vec<f64>,
}

impl GaussianPool {
    pub fn sample(t: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, POOL_STREAM);
        let values = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        Self { seed, values }
    }

    /// Pool with explicit values, for tests and hand-built examples.
    pub fn from_values(values: Vec<f64>, seed: u64) -> Self {
        Self { seed, values }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Toeplitz,
    Circulant,
    General,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Toeplitz => "toeplitz",
            Family::Circulant => "circulant",
            Family::General => "general",
        })
    }
}

/// The subsets `S[i][j]` of a `k x n` Psi-regular matrix over a pool of size `t`.
///
/// Stored in compressed row-major form: the sorted pool indices of entry
/// `(i, j)` are `indices[offsets[i*n + j]..offsets[i*n + j + 1]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StructureDoc", into = "StructureDoc")]
pub struct SubsetStructure {
    k: usize,
    n: usize,
    t: usize,
    psi: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

/// Wire form: `{k, n, t, psi, subsets}` with `subsets` listed row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureDoc {
    pub k: usize,
    pub n: usize,
    pub t: usize,
    #[serde(default)]
    pub psi: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl TryFrom<StructureDoc> for SubsetStructure {
    type Error = Error;

    fn try_from(doc: StructureDoc) -> Result<Self> {
        SubsetStructure::new(doc.k, doc.n, doc.t, doc.psi, doc.subsets)
    }
}

impl From<SubsetStructure> for StructureDoc {
    fn from(s: SubsetStructure) -> Self {
        let subsets = (0..s.k)
            .flat_map(|i| (0..s.n).map(move |j| (i, j)))
            .map(|(i, j)| s.subset(i, j).to_vec())
            .collect();
        StructureDoc {
            k: s.k,
            n: s.n,
            t: s.t,
            psi: s.psi,
            subsets,
        }
    }
}

impl SubsetStructure {
    /// Builds a structure from `k * n` row-major subsets. Each subset is sorted;
    /// constraint checking is left to [`validate`].
    pub fn new(k: usize, n: usize, t: usize, psi: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.len() != k * n {
            return Err(Error::Format(format!(
                "expected {} subsets for a {k}x{n} structure, got {}",
                k * n,
                subsets.len()
            )));
        }
        let mut offsets = Vec::with_capacity(k * n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for mut s in subsets {
            s.sort_unstable();
            indices.extend_from_slice(&s);
            offsets.push(indices.len());
        }
        Ok(Self {
            k,
            n,
            t,
            psi,
            offsets,
            indices,
        })
    }

    /// Toeplitz structure: `S[i][j] = {i - j + n - 1}` over `t = n + k - 1`.
    pub fn toeplitz(k: usize, n: usize) -> Result<Self> {
        check_dims(k, n)?;
        let t = n + k - 1;
        let mut indices = Vec::with_capacity(k * n);
        for i in 0..k {
            indices.extend((0..n).map(|j| i + n - 1 - j));
        }
        Ok(Self::singletons(k, n, t, indices))
    }

    /// Circulant structure: `S[i][j] = {(j - i) mod n}` over `t = n`.
    pub fn circulant(k: usize, n: usize) -> Result<Self> {
        check_dims(k, n)?;
        let mut indices = Vec::with_capacity(k * n);
        for i in 0..k {
            indices.extend((0..n).map(|j| (j + n - i) % n));
        }
        Ok(Self::singletons(k, n, n, indices))
    }

    fn singletons(k: usize, n: usize, t: usize, indices: Vec<usize>) -> Self {
        Self {
            k,
            n,
            t,
            psi: 0,
            offsets: (0..=k * n).collect(),
            indices,
        }
    }

    pub fn rows(&self) -> usize {
        self.k
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn pool_size(&self) -> usize {
        self.t
    }

    /// Declared column-multiplicity bound.
    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn subset(&self, i: usize, j: usize) -> &[usize] {
        let e = i * self.n + j;
        &self.indices[self.offsets[e]..self.offsets[e + 1]]
    }

    /// `|S[i][0]|`, the variance of every entry in row `i`.
    pub fn row_cardinality(&self, i: usize) -> usize {
        if self.n == 0 {
            0
        } else {
            self.subset(i, 0).len()
        }
    }

    pub fn total_size(&self) -> usize {
        self.indices.len()
    }

    /// Detects the Toeplitz or circulant pattern exactly; anything else is general.
    pub fn family(&self) -> Family {
        let singletons = self.offsets.windows(2).all(|w| w[1] - w[0] == 1);
        if !singletons || self.k == 0 || self.n == 0 {
            return Family::General;
        }
        let (k, n) = (self.k, self.n);
        let matches = |f: &dyn Fn(usize, usize) -> usize| {
            (0..k).all(|i| (0..n).all(|j| self.indices[i * n + j] == f(i, j)))
        };
        if self.t == n + k - 1 && matches(&|i, j| i + n - 1 - j) {
            Family::Toeplitz
        } else if self.t == n && matches(&|i, j| (j + n - i) % n) {
            Family::Circulant
        } else {
            Family::General
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_dims(k: usize, n: usize) -> Result<()> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "k and n must be positive, got k={k}, n={n}"
        )));
    }
    if k > n {
        return Err(Error::RowCountExceedsDimension { k, n });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Pool indices lie in `0..t` and no subset repeats an index.
    WellFormed,
    /// `k <= n <= t <= k*n`.
    DimensionOrdering,
    EqualRowCardinality,
    RowDisjointness,
    ColumnMultiplicity,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::WellFormed => "well_formed",
            Constraint::DimensionOrdering => "dimension_ordering",
            Constraint::EqualRowCardinality => "equal_row_cardinality",
            Constraint::RowDisjointness => "row_disjointness",
            Constraint::ColumnMultiplicity => "column_multiplicity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_index: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub constraint: Constraint,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub k: usize,
    pub n: usize,
    pub t: usize,
    pub declared_psi: usize,
    /// Largest number of entries of one column that share a pool index.
    pub max_column_multiplicity: usize,
    /// Smallest Psi the structure satisfies; 0 means every pool index appears
    /// at most once per column.
    pub psi_class: usize,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, constraint: Constraint) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.constraint == constraint)
    }

    pub fn failed_constraints(&self) -> Vec<Constraint> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.constraint)
            .collect()
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.checks
            .iter()
            .find_map(|c| c.violation.as_ref().map(|v| v.message.as_str()))
    }
}

/// Column-multiplicity bound implied by a declared Psi (Psi = 0 allows one use).
pub fn multiplicity_bound(psi: usize) -> usize {
    psi.max(1)
}

fn psi_class(max_multiplicity: usize) -> usize {
    if max_multiplicity <= 1 {
        0
    } else {
        max_multiplicity
    }
}

fn outcome(constraint: Constraint, violation: Option<Violation>) -> CheckResult {
    CheckResult {
        constraint,
        passed: violation.is_none(),
        violation,
    }
}

/// Checks every Psi-regularity constraint and reports the first violation of each.
pub fn validate(s: &SubsetStructure) -> ValidationReport {
    let (k, n, t) = (s.k, s.n, s.t);
    let mut checks = Vec::with_capacity(5);

    let mut well_formed = None;
    'outer: for i in 0..k {
        for j in 0..n {
            let subset = s.subset(i, j);
            if let Some(&l) = subset.iter().find(|&&l| l >= t) {
                well_formed = Some(Violation {
                    row: Some(i),
                    column: Some(j),
                    pool_index: Some(l),
                    message: format!("pool index {l} in S[{i}][{j}] is outside 0..{t}"),
                });
                break 'outer;
            }
            if let Some(w) = subset.windows(2).find(|w| w[0] == w[1]) {
                well_formed = Some(Violation {
                    row: Some(i),
                    column: Some(j),
                    pool_index: Some(w[0]),
                    message: format!("pool index {} repeated in S[{i}][{j}]", w[0]),
                });
                break 'outer;
            }
        }
    }
    let indices_in_range = well_formed.is_none();
    checks.push(outcome(Constraint::WellFormed, well_formed));

    let ordering = if k == 0 || n == 0 {
        Some(format!("k and n must be positive, got k={k}, n={n}"))
    } else if k > n {
        Some(format!("k={k} exceeds n={n}"))
    } else if n > t {
        Some(format!("n={n} exceeds t={t}"))
    } else if t > k * n {
        Some(format!("t={t} exceeds k*n={}", k * n))
    } else {
        None
    };
    checks.push(outcome(
        Constraint::DimensionOrdering,
        ordering.map(|message| Violation {
            row: None,
            column: None,
            pool_index: None,
            message,
        }),
    ));

    let mut cardinality = None;
    'rows: for i in 0..k {
        let expected = s.row_cardinality(i);
        for j in 1..n {
            let got = s.subset(i, j).len();
            if got != expected {
                cardinality = Some(Violation {
                    row: Some(i),
                    column: Some(j),
                    pool_index: None,
                    message: format!("|S[{i}][{j}]| = {got} differs from |S[{i}][0]| = {expected}"),
                });
                break 'rows;
            }
        }
    }
    checks.push(outcome(Constraint::EqualRowCardinality, cardinality));

    // Out-of-range indices would overflow the scratch tables below, so the two
    // remaining checks only run on well-formed structures.
    let mut disjoint = None;
    let mut multiplicity = None;
    let mut max_mult = 0;
    if indices_in_range {
        let mut owner = vec![usize::MAX; t];
        'rows: for i in 0..k {
            for j in 0..n {
                for &l in s.subset(i, j) {
                    let prev = owner[l];
                    if prev != usize::MAX && prev / n == i {
                        let u = prev % n;
                        disjoint = Some(Violation {
                            row: Some(i),
                            column: Some(j),
                            pool_index: Some(l),
                            message: format!(
                                "row {i}: pool index {l} appears in both S[{i}][{u}] and S[{i}][{j}]"
                            ),
                        });
                        break 'rows;
                    }
                    owner[l] = i * n + j;
                }
            }
        }

        let bound = multiplicity_bound(s.psi);
        let mut count = vec![0usize; t];
        let mut touched = Vec::new();
        for j in 0..n {
            for i in 0..k {
                for &l in s.subset(i, j) {
                    if count[l] == 0 {
                        touched.push(l);
                    }
                    count[l] += 1;
                    max_mult = max_mult.max(count[l]);
                    if count[l] > bound && multiplicity.is_none() {
                        multiplicity = Some(Violation {
                            row: Some(i),
                            column: Some(j),
                            pool_index: Some(l),
                            message: format!(
                                "column {j}: pool index {l} appears in {} entries, bound is {bound}",
                                count[l]
                            ),
                        });
                    }
                }
            }
            for l in touched.drain(..) {
                count[l] = 0;
            }
        }
    } else {
        let skipped = || Violation {
            row: None,
            column: None,
            pool_index: None,
            message: "not checked: structure is not well formed".to_string(),
        };
        disjoint = Some(skipped());
        multiplicity = Some(skipped());
    }
    checks.push(outcome(Constraint::RowDisjointness, disjoint));
    checks.push(outcome(Constraint::ColumnMultiplicity, multiplicity));

    ValidationReport {
        k,
        n,
        t,
        declared_psi: s.psi,
        max_column_multiplicity: max_mult,
        psi_class: psi_class(max_mult),
        checks,
    }
}

/// A Psi-regular matrix: a validated structure plus a sampled gaussian pool.
#[derive(Debug, Clone)]
pub struct PsiRegularMatrix {
    structure: Arc<SubsetStructure>,
    pool: GaussianPool,
    family: Family,
    row_sigma: Vec<usize>,
    dense: OnceLock<DenseMatrix>,
}

impl PsiRegularMatrix {
    fn assemble(structure: Arc<SubsetStructure>, pool: GaussianPool, family: Family) -> Self {
        let row_sigma = (0..structure.k)
            .map(|i| structure.row_cardinality(i))
            .collect();
        Self {
            structure,
            pool,
            family,
            row_sigma,
            dense: OnceLock::new(),
        }
    }

    /// Validates `structure` and samples its pool from `seed`.
    pub fn general(structure: SubsetStructure, seed: u64) -> Result<Self> {
        let pool = GaussianPool::sample(structure.t, seed);
        Self::with_pool(structure, pool)
    }

    /// Validates `structure` and pairs it with an explicit pool.
    pub fn with_pool(structure: SubsetStructure, pool: GaussianPool) -> Result<Self> {
        let report = validate(&structure);
        if !report.passed() {
            return Err(Error::InvalidStructure(Box::new(report)));
        }
        if pool.len() != structure.t {
            return Err(Error::DimensionMismatch {
                expected: structure.t,
                actual: pool.len(),
            });
        }
        let family = structure.family();
        Ok(Self::assemble(Arc::new(structure), pool, family))
    }

    pub fn toeplitz(k: usize, n: usize, seed: u64) -> Result<Self> {
        let structure = SubsetStructure::toeplitz(k, n)?;
        let pool = GaussianPool::sample(structure.t, seed);
        Ok(Self::assemble(Arc::new(structure), pool, Family::Toeplitz))
    }

    pub fn circulant(k: usize, n: usize, seed: u64) -> Result<Self> {
        let structure = SubsetStructure::circulant(k, n)?;
        let pool = GaussianPool::sample(structure.t, seed);
        let family = structure.family();
        Ok(Self::assemble(Arc::new(structure), pool, family))
    }

    /// Same structure, fresh pool drawn from `seed`.
    pub fn resampled(&self, seed: u64) -> Self {
        let pool = GaussianPool::sample(self.structure.t, seed);
        Self::assemble(Arc::clone(&self.structure), pool, self.family)
    }

    pub fn structure(&self) -> &SubsetStructure {
        &self.structure
    }

    pub fn pool(&self) -> &GaussianPool {
        &self.pool
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rows(&self) -> usize {
        self.structure.k
    }

    pub fn cols(&self) -> usize {
        self.structure.n
    }

    /// Per-row subset cardinality, which is the variance of the row's entries.
    pub fn row_sigma(&self) -> &[usize] {
        &self.row_sigma
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let g = &self.pool.values;
        self.structure.subset(i, j).iter().map(|&l| g[l]).sum()
    }

    pub fn materialize(&self) -> DenseMatrix {
        let (k, n) = (self.rows(), self.cols());
        let mut m = DenseMatrix::zeros(k, n);
        for i in 0..k {
            for j in 0..n {
                m.set(i, j, self.entry(i, j));
            }
        }
        m
    }

    fn toeplitz_spec(&self) -> ToeplitzSpec {
        let (k, n) = (self.rows(), self.cols());
        let g = &self.pool.values;
        // diagonal offset d = j - i sits at d + n - 1 and reads pool index n - 1 - d
        let diagonals = (0..2 * n - 1)
            .map(|m| {
                let l = 2 * n - 2 - m;
                if l < n + k - 1 {
                    g[l]
                } else {
                    0.0
                }
            })
            .collect();
        ToeplitzSpec { diagonals }
    }

    /// `P x`, using the FFT kernels for Toeplitz and circulant structures.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.cols();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        match self.family {
            Family::Toeplitz => toeplitz_matvec(&self.toeplitz_spec(), x, self.rows()),
            Family::Circulant => {
                let spec = CirculantSpec::new(self.pool.values[..n].to_vec());
                let mut y = circulant_matvec(&spec, x)?;
                y.truncate(self.rows());
                Ok(y)
            }
            Family::General => dense_matvec(self.dense.get_or_init(|| self.materialize()), x),
        }
    }

    /// Reference `P x` through the materialized matrix.
    pub fn matvec_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        dense_matvec(&self.materialize(), x)
    }

    pub fn to_doc(&self) -> MatrixDoc {
        MatrixDoc {
            structure: StructureDoc::from((*self.structure).clone()),
            seed: self.pool.seed,
        }
    }
}

/// Serialized matrix: the structure plus the pool seed; pool values are regenerated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDoc {
    #[serde(flatten)]
    pub structure: StructureDoc,
    pub seed: u64,
}

impl TryFrom<MatrixDoc> for PsiRegularMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        PsiRegularMatrix::general(SubsetStructure::try_from(doc.structure)?, doc.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool_of(values: &[f64]) -> GaussianPool {
        GaussianPool::from_values(values.to_vec(), 0)
    }

    #[test]
    fn pool_is_seed_reproducible() {
        let a = GaussianPool::sample(50, 42);
        let b = GaussianPool::sample(50, 42);
        let c = GaussianPool::sample(50, 43);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert!(a.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn toeplitz_1x1() {
        let m = PsiRegularMatrix::toeplitz(1, 1, 7).unwrap();
        assert_eq!(m.structure().pool_size(), 1);
        assert_eq!(m.materialize().get(0, 0), m.pool().values()[0]);
    }

    #[test]
    fn toeplitz_2x3_layout() {
        let s = SubsetStructure::toeplitz(2, 3).unwrap();
        assert_eq!(s.pool_size(), 4);
        let g = [10.0, 20.0, 30.0, 40.0];
        let m = PsiRegularMatrix::with_pool(s, pool_of(&g)).unwrap();
        assert_eq!(m.family(), Family::Toeplitz);
        let d = m.materialize();
        // 1-based [[g3,g2,g1],[g4,g3,g2]]
        assert_eq!(d.row(0), &[30.0, 20.0, 10.0]);
        assert_eq!(d.row(1), &[40.0, 30.0, 20.0]);
        assert_eq!(d.get(0, 0), d.get(1, 1));
        assert_eq!(d.get(0, 1), d.get(1, 2));
    }

    #[test]
    fn circulant_layout() {
        let s = SubsetStructure::circulant(2, 2).unwrap();
        let m = PsiRegularMatrix::with_pool(s, pool_of(&[1.0, 2.0])).unwrap();
        assert_eq!(
            m.materialize().to_rows(),
            vec![vec![1.0, 2.0], vec![2.0, 1.0]]
        );

        let m = PsiRegularMatrix::circulant(4, 4, 3).unwrap();
        let d = m.materialize();
        for j in 0..4 {
            assert_eq!(d.get(1, (j + 1) % 4), d.get(0, j));
        }
    }

    #[test]
    fn constructors_reject_bad_dims() {
        assert!(matches!(
            PsiRegularMatrix::toeplitz(5, 4, 0),
            Err(Error::RowCountExceedsDimension { k: 5, n: 4 })
        ));
        assert!(matches!(
            PsiRegularMatrix::circulant(3, 2, 0),
            Err(Error::RowCountExceedsDimension { .. })
        ));
        assert!(PsiRegularMatrix::toeplitz(0, 4, 0).is_err());
    }

    #[test]
    fn builtin_families_are_0_regular() {
        for (k, n) in [(1, 1), (2, 3), (4, 4), (3, 17), (16, 64)] {
            for s in [
                SubsetStructure::toeplitz(k, n).unwrap(),
                SubsetStructure::circulant(k, n).unwrap(),
            ] {
                let r = validate(&s);
                assert!(r.passed(), "{r:?}");
                assert_eq!(r.psi_class, 0);
                assert_eq!(r.max_column_multiplicity, 1);
            }
        }
    }

    #[test]
    fn row_overlap_fails_disjointness() {
        // S[0][0] = S[0][1] = {0}
        let s = SubsetStructure::new(1, 2, 2, 0, vec![vec![0], vec![0]]).unwrap();
        let r = validate(&s);
        assert_eq!(r.failed_constraints(), vec![Constraint::RowDisjointness]);
        let v = r
            .check(Constraint::RowDisjointness)
            .unwrap()
            .violation
            .clone()
            .unwrap();
        assert_eq!(v.row, Some(0));
        assert_eq!(v.pool_index, Some(0));
    }

    #[test]
    fn k_greater_than_n_fails_ordering() {
        let s = SubsetStructure::new(2, 1, 2, 0, vec![vec![0], vec![1]]).unwrap();
        let r = validate(&s);
        assert_eq!(r.failed_constraints(), vec![Constraint::DimensionOrdering]);
    }

    #[test]
    fn unequal_cardinality_fails() {
        let s = SubsetStructure::new(1, 2, 2, 0, vec![vec![0, 1], vec![]]).unwrap();
        let r = validate(&s);
        assert!(r
            .failed_constraints()
            .contains(&Constraint::EqualRowCardinality));
    }

    #[test]
    fn column_multiplicity_and_psi_class() {
        // Column 0 uses pool index 0 in both rows.
        let subsets = vec![vec![0], vec![1], vec![0], vec![2]];
        let s = SubsetStructure::new(2, 2, 3, 0, subsets.clone()).unwrap();
        let r = validate(&s);
        assert_eq!(r.failed_constraints(), vec![Constraint::ColumnMultiplicity]);
        assert_eq!(r.max_column_multiplicity, 2);
        assert_eq!(r.psi_class, 2);

        let s = SubsetStructure::new(2, 2, 3, 2, subsets).unwrap();
        assert!(validate(&s).passed());
    }

    #[test]
    fn out_of_range_index_is_malformed() {
        let s = SubsetStructure::new(1, 1, 1, 0, vec![vec![3]]).unwrap();
        let r = validate(&s);
        assert!(!r.check(Constraint::WellFormed).unwrap().passed);
        assert!(!r.passed());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(SubsetStructure::new(2, 2, 4, 0, vec![vec![0]]).is_err());
    }

    #[test]
    fn general_with_toeplitz_pattern_matches_make_toeplitz() {
        let subsets = (0..3)
            .flat_map(|i| (0..5).map(move |j| vec![i + 4 - j]))
            .collect();
        let s = SubsetStructure::new(3, 5, 7, 0, subsets).unwrap();
        let general = PsiRegularMatrix::general(s, 99).unwrap();
        let toeplitz = PsiRegularMatrix::toeplitz(3, 5, 99).unwrap();
        assert_eq!(general.family(), Family::Toeplitz);
        assert_eq!(general.materialize(), toeplitz.materialize());
    }

    fn pairs_structure() -> SubsetStructure {
        // k = n = 3, t = 6; S[i][j] = {2m, 2m+1} with m = (i + j) mod 3.
        let subsets = (0..3)
            .flat_map(|i| {
                (0..3).map(move |j| {
                    let m = (i + j) % 3;
                    vec![2 * m, 2 * m + 1]
                })
            })
            .collect();
        SubsetStructure::new(3, 3, 6, 0, subsets).unwrap()
    }

    #[test]
    fn general_pairs_are_hand_summed() {
        let g = [0.5, -1.25, 2.0, 3.5, -0.75, 1.0];
        let m = PsiRegularMatrix::with_pool(pairs_structure(), pool_of(&g)).unwrap();
        assert_eq!(m.family(), Family::General);
        assert_eq!(m.row_sigma(), &[2, 2, 2]);
        let r = validate(m.structure());
        assert!(r.passed());
        assert_eq!(r.psi_class, 0);
        let d = m.materialize();
        let sums = [g[0] + g[1], g[2] + g[3], g[4] + g[5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), sums[(i + j) % 3]);
            }
        }
    }

    #[test]
    fn empty_subsets_give_zero_matrix() {
        let s = SubsetStructure::new(2, 3, 4, 0, vec![vec![]; 6]).unwrap();
        let m = PsiRegularMatrix::general(s, 1).unwrap();
        assert_eq!(m.row_sigma(), &[0, 0]);
        assert_eq!(m.materialize(), DenseMatrix::zeros(2, 3));
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_pattern_circulant_scales_x() {
        let m = PsiRegularMatrix::with_pool(
            SubsetStructure::circulant(4, 4).unwrap(),
            pool_of(&[2.5, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let y = m.matvec(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        for (a, b) in y.iter().zip([2.5, -5.0, 7.5, 1.25]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pool_gives_zero_output() {
        let m = PsiRegularMatrix::with_pool(
            SubsetStructure::toeplitz(3, 5).unwrap(),
            pool_of(&[0.0; 7]),
        )
        .unwrap();
        assert!(m.matvec(&[1.0; 5]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fast_paths_match_dense() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for m in [
            PsiRegularMatrix::toeplitz(16, 64, 5).unwrap(),
            PsiRegularMatrix::circulant(16, 64, 5).unwrap(),
            PsiRegularMatrix::circulant(64, 64, 6).unwrap(),
        ] {
            let fast = m.matvec(&x).unwrap();
            let slow = m.matvec_dense(&x).unwrap();
            let scale = slow.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
        let m = PsiRegularMatrix::toeplitz(4, 8, 1).unwrap();
        assert!(matches!(
            m.matvec(&[1.0; 7]),
            Err(Error::DimensionMismatch {
                expected: 8,
                actual: 7
            })
        ));
    }

    #[test]
    fn json_round_trip_and_seed_only_pool() {
        let m = PsiRegularMatrix::general(pairs_structure(), 1234).unwrap();
        let json = serde_json::to_string(&m.to_doc()).unwrap();
        assert!(json.contains("\"seed\":1234"));
        assert!(!json.contains("values"));
        let back: MatrixDoc = serde_json::from_str(&json).unwrap();
        let back = PsiRegularMatrix::try_from(back).unwrap();
        assert_eq!(back.materialize(), m.materialize());

        let s = SubsetStructure::from_json(&m.structure().to_json().unwrap()).unwrap();
        assert_eq!(&s, m.structure());
    }

    #[test]
    fn invalid_general_structure_is_rejected() {
        let s = SubsetStructure::new(1, 2, 2, 0, vec![vec![0], vec![0]]).unwrap();
        match PsiRegularMatrix::general(s, 0) {
            Err(Error::InvalidStructure(r)) => {
                assert_eq!(r.failed_constraints(), vec![Constraint::RowDisjointness])
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
