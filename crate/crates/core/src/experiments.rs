//! Monte-Carlo harness for the angle estimator.
//!
//! Each trial draws a fresh pipeline (pool, diagonals) from
//! `base_seed + trial_index` and hashes a fixed pair of unit vectors at a
//! known angle. Trials run in parallel and are reduced in trial order, so a
//! report is a pure function of its configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::graph::{p_chromatic_number, ColoringMode};
use crate::hashing::{
    build_pipeline, estimate_angle, HashPipeline, PipelineConfig, Quantizer, Variant,
};
use crate::matrix::{validate, Family, PsiRegularMatrix};
use crate::seeding::{stream_rng, trial_seed, VECTOR_STREAM};
use crate::stats::{summarize, tail_frequency};
use crate::transforms::{dot, fwht_normalized, l2_norm, RademacherDiagonal};

pub const MIN_TRIALS: usize = 100;
pub const SCHEMA_VERSION: u32 = 1;

/// Two unit vectors in `R^n` at exactly `theta` radians: `r = cos(theta) p + sin(theta) q`
/// with `q` a random unit vector orthogonal to `p`.
pub fn make_pair_at_angle(theta: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "a pair at a non-trivial angle needs n >= 2, got {n}"
        )));
    }
    let mut rng = stream_rng(seed, VECTOR_STREAM);
    let mut gaussian =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let unit = |v: Vec<f64>| {
        let norm = l2_norm(&v);
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let p = unit(gaussian(n));
    let q = loop {
        let mut q = gaussian(n);
        // Two Gram-Schmidt passes keep <p, q> at rounding level.
        for _ in 0..2 {
            let c = dot(&p, &q);
            q.iter_mut().zip(&p).for_each(|(x, y)| *x -= c * y);
        }
        if l2_norm(&q) > 1e-8 {
            break unit(q);
        }
    };
    let (s, c) = theta.sin_cos();
    let r = unit(p.iter().zip(&q).map(|(a, b)| c * a + s * b).collect());
    Ok((p, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Bias,
    Concentration,
}

/// Which form of the dependency term to use in the concentration bound: the
/// displayed `exp(-2 a^2 t / f(t)^4)` or the `exp(-2 a^2 n / f(n)^4)` variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentForm {
    #[default]
    PoolSize,
    Dimension,
}

/// Bound parameters supplied by an experiment config. `f(x) = f_scale * sqrt(ln x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub a: f64,
    pub dataset_size: u64,
    pub f_scale: f64,
    #[serde(default)]
    pub exponent_form: ExponentForm,
}

/// Statistical gates evaluated against a finished report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    /// `|mean - theta/pi| <= max_se * se_mean` on every summary row.
    Bias { max_se: f64 },
    /// `Var(k_i) / Var(k_{i+1})` in `[min, max]` for consecutive ks at each theta.
    VarianceRatio { min: f64, max: f64 },
    /// Tail frequencies non-increasing in the threshold within each `(theta, k)`.
    TailMonotone,
    /// Tail frequency at the given `c` is at most `max`.
    TailAtMost { c: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub kind: ExperimentKind,
    pub variant: Variant,
    pub family: Family,
    pub ks: Vec<usize>,
    pub n: usize,
    #[serde(default = "sign_quantizer")]
    pub quantizer: Quantizer,
    /// Radians; strings such as `"pi/6"` or `"3pi/4"` are accepted on input.
    #[serde(deserialize_with = "deserialize_angles")]
    pub angles: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub cs: Vec<f64>,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn sign_quantizer() -> Quantizer {
    Quantizer::Sign
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleValue {
    Radians(f64),
    Expr(String),
}

/// Parses `pi`, `pi/6`, `3pi/4`, `3*pi/4` or a plain number.
pub fn parse_angle(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.to_ascii_lowercase();
    let Some(pos) = s.find("pi") else {
        return s.parse().ok();
    };
    let coeff = s[..pos].trim_end_matches('*');
    let coeff: f64 = if coeff.is_empty() {
        1.0
    } else {
        coeff.parse().ok()?
    };
    let rest = &s[pos + 2..];
    let denom: f64 = match rest.strip_prefix('/') {
        Some(d) => d.parse().ok()?,
        None if rest.is_empty() => 1.0,
        None => return None,
    };
    Some(coeff * PI / denom)
}

fn deserialize_angles<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Vec::<AngleValue>::deserialize(d)?
        .into_iter()
        .map(|v| match v {
            AngleValue::Radians(x) => Ok(x),
            AngleValue::Expr(s) => parse_angle(&s)
                .ok_or_else(|| serde::de::Error::custom(format!("cannot parse angle {s:?}"))),
        })
        .collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.schema != SCHEMA_VERSION {
            return fail(format!("unsupported schema version {}", self.schema));
        }
        if self.trials < MIN_TRIALS {
            return fail(format!(
                "trials must be >= {MIN_TRIALS}, got {}",
                self.trials
            ));
        }
        if self.angles.is_empty() || self.ks.is_empty() {
            return fail("angles and ks must be non-empty".into());
        }
        if let Some(&a) = self.angles.iter().find(|&&a| !(a > 0.0 && a < PI)) {
            return fail(format!("angle {a} outside (0, pi)"));
        }
        if self.kind == ExperimentKind::Concentration
            && self.epsilons.is_empty()
            && self.cs.is_empty()
        {
            return fail("concentration experiments need a non-empty epsilon or c grid".into());
        }
        if self
            .epsilons
            .iter()
            .chain(&self.cs)
            .any(|&e| !(e > 0.0 && e.is_finite()))
        {
            return fail("epsilon and c values must be positive".into());
        }
        if !self.quantizer.is_binary() {
            return fail(format!("quantizer {} is not binary", self.quantizer));
        }
        if self.family == Family::General {
            return fail("experiments support the toeplitz and circulant families".into());
        }
        if self.n < 2 {
            return fail(format!("n must be >= 2, got {}", self.n));
        }
        Ok(())
    }

    fn pipeline_config(&self, k: usize) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(self.variant, self.family, k, self.n, self.base_seed);
        cfg.quantizer = self.quantizer;
        cfg
    }
}

/// One CSV/JSON report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: Variant,
    pub family: Family,
    pub k: usize,
    pub n: usize,
    pub theta: f64,
    pub trials: usize,
    pub mean: f64,
    pub se_mean: f64,
    pub var: f64,
    /// `eps=<value>`, `k^-1/3` or `c=<value>`; empty on summary rows.
    pub epsilon_or_c: Option<String>,
    pub tail_freq: Option<f64>,
    pub bound_value: Option<f64>,
    /// Effective threshold of a tail row.
    #[serde(skip)]
    pub epsilon: Option<f64>,
}

impl ReportRow {
    pub fn is_summary(&self) -> bool {
        self.epsilon_or_c.is_none()
    }

    pub fn c(&self) -> Option<f64> {
        self.epsilon_or_c
            .as_deref()?
            .strip_prefix("c=")?
            .parse()
            .ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckOutcome>,
}

impl ConcentrationReport {
    pub fn summary(&self, theta: f64, k: usize) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.is_summary() && r.theta == theta && r.k == k)
    }

    pub fn tail(&self, theta: f64, k: usize, label: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.theta == theta && r.k == k && r.epsilon_or_c.as_deref() == Some(label))
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Normalized estimates for `trials` independent pipelines, in trial order.
pub fn sample_estimates(
    base: &HashPipeline,
    p: &[f64],
    r: &[f64],
    base_seed: u64,
    trials: usize,
) -> Result<Vec<f64>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let pipe = base.reseeded(trial_seed(base_seed, i));
            let (hp, hr) = (pipe.hash(p)?, pipe.hash(r)?);
            Ok(estimate_angle(&hp, &hr)?.value)
        })
        .collect()
}

/// `c * (sqrt(ln k) / k)^(1/3)`.
pub fn c_threshold(c: f64, k: usize) -> f64 {
    let k = k as f64;
    c * (k.ln().sqrt() / k).cbrt()
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    theta: f64,
    k: usize,
    estimates: Vec<f64>,
}

impl Cell<'_> {
    fn row(&self, label: Option<String>, epsilon: Option<f64>) -> ReportRow {
        let s = summarize(&self.estimates);
        let center = self.theta / PI;
        ReportRow {
            variant: self.cfg.variant,
            family: self.cfg.family,
            k: self.k,
            n: self.cfg.n,
            theta: self.theta,
            trials: self.cfg.trials,
            mean: s.mean,
            se_mean: s.se_mean,
            var: s.variance,
            tail_freq: epsilon.map(|e| tail_frequency(&self.estimates, center, e)),
            epsilon_or_c: label,
            bound_value: None,
            epsilon,
        }
    }
}

fn run_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell<'_>>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &theta in &cfg.angles {
        let (p, r) = make_pair_at_angle(theta, cfg.n, cfg.base_seed)?;
        for &k in &cfg.ks {
            let base = build_pipeline(&cfg.pipeline_config(k))?;
            let estimates = sample_estimates(&base, &p, &r, cfg.base_seed, cfg.trials)?;
            cells.push(Cell {
                cfg,
                theta,
                k,
                estimates,
            });
        }
    }
    Ok(cells)
}

/// Mean and standard error of the estimator for every `(theta, k)`.
pub fn run_bias_experiment(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    let rows = run_cells(cfg)?.iter().map(|c| c.row(None, None)).collect();
    finish(cfg, rows)
}

/// Summary rows plus tail frequencies at every explicit epsilon, at `k^(-1/3)`,
/// and at `c * (sqrt(ln k)/k)^(1/3)` for every `c`.
pub fn run_concentration_experiment(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    let cells = run_cells(cfg)?;
    let mut rows = Vec::new();
    for cell in &cells {
        rows.push(cell.row(None, None));
        let k = cell.k;
        let mut tails: Vec<(String, f64)> = cfg
            .epsilons
            .iter()
            .map(|&e| (format!("eps={}", fmt_num(e)), e))
            .collect();
        tails.push(("k^-1/3".to_string(), (k as f64).powf(-1.0 / 3.0)));
        tails.extend(
            cfg.cs
                .iter()
                .map(|&c| (format!("c={}", fmt_num(c)), c_threshold(c, k))),
        );
        let bound = match &cfg.bound {
            Some(b) if cfg.variant == Variant::Extended => Some(bound_inputs_for(cfg, b, k)?),
            _ => None,
        };
        for (label, eps) in tails {
            let mut row = cell.row(Some(label), Some(eps));
            if let Some(inputs) = &bound {
                let mut inputs = inputs.clone();
                inputs.epsilon = eps;
                row.bound_value = evaluate_concentration_bound(&inputs, cell.theta)?.value;
            }
            rows.push(row);
        }
    }
    finish(cfg, rows)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    match cfg.kind {
        ExperimentKind::Bias => run_bias_experiment(cfg),
        ExperimentKind::Concentration => run_concentration_experiment(cfg),
    }
}

fn bound_inputs_for(cfg: &ExperimentConfig, b: &BoundConfig, k: usize) -> Result<BoundInputs> {
    let n = cfg.pipeline_config(k).padded_dim();
    let matrix = match cfg.family {
        Family::Circulant => PsiRegularMatrix::circulant(k, n, 0)?,
        _ => PsiRegularMatrix::toeplitz(k, n, 0)?,
    };
    let structure = matrix.structure();
    // The greedy chromatic number is an upper bound, which keeps the bound valid.
    let chi = p_chromatic_number(structure, ColoringMode::Greedy)?.chi;
    let psi = validate(structure).psi_class;
    let t = structure.pool_size();
    let f = |x: usize| b.f_scale * (x as f64).ln().sqrt();
    Ok(BoundInputs {
        a: b.a,
        epsilon: 1.0,
        f_of_n: f(n),
        f_of_t: f(t),
        t,
        dataset_size: b.dataset_size,
        k,
        n,
        psi,
        chi,
        exponent_form: b.exponent_form,
    })
}

fn finish(cfg: &ExperimentConfig, rows: Vec<ReportRow>) -> Result<ConcentrationReport> {
    let mut report = ConcentrationReport {
        schema: SCHEMA_VERSION,
        config: cfg.clone(),
        rows,
        checks: Vec::new(),
    };
    report.checks = cfg.checks.iter().map(|c| run_check(&report, c)).collect();
    Ok(report)
}

fn run_check(report: &ConcentrationReport, check: &Check) -> CheckOutcome {
    let mut failures = Vec::new();
    let summaries = || report.rows.iter().filter(|r| r.is_summary());
    match *check {
        Check::Bias { max_se } => {
            for r in summaries() {
                let dev = (r.mean - r.theta / PI).abs();
                if dev > max_se * r.se_mean {
                    failures.push(format!(
                        "theta={} k={}: |mean - theta/pi| = {dev} > {max_se} * {}",
                        r.theta, r.k, r.se_mean
                    ));
                }
            }
        }
        Check::VarianceRatio { min, max } => {
            for &theta in &report.config.angles {
                let mut rows: Vec<&ReportRow> = summaries().filter(|r| r.theta == theta).collect();
                rows.sort_by_key(|r| r.k);
                for w in rows.windows(2) {
                    let ratio = w[0].var / w[1].var;
                    if !(min..=max).contains(&ratio) {
                        failures.push(format!(
                            "theta={theta}: Var(k={}) / Var(k={}) = {ratio} outside [{min}, {max}]",
                            w[0].k, w[1].k
                        ));
                    }
                }
            }
        }
        Check::TailMonotone => {
            for s in summaries() {
                let mut tails: Vec<&ReportRow> = report
                    .rows
                    .iter()
                    .filter(|r| r.theta == s.theta && r.k == s.k && r.epsilon.is_some())
                    .collect();
                tails.sort_by(|a, b| a.epsilon.unwrap().total_cmp(&b.epsilon.unwrap()));
                for w in tails.windows(2) {
                    if w[1].tail_freq > w[0].tail_freq {
                        failures.push(format!(
                            "theta={} k={}: tail rises from {:?} to {:?}",
                            s.theta, s.k, w[0].epsilon_or_c, w[1].epsilon_or_c
                        ));
                    }
                }
            }
        }
        Check::TailAtMost { c, max } => {
            let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.c() == Some(c)).collect();
            if rows.is_empty() {
                failures.push(format!("no tail rows for c={c}"));
            }
            for r in rows {
                let f = r.tail_freq.unwrap_or(f64::NAN);
                if f.is_nan() || f > max {
                    failures.push(format!("theta={} k={}: tail {f} > {max}", r.theta, r.k));
                }
            }
        }
    }
    CheckOutcome {
        check: check.clone(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "ok".to_string()
        } else {
            failures.join("; ")
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 12] = [
    "variant",
    "family",
    "k",
    "n",
    "theta",
    "trials",
    "mean",
    "se_mean",
    "var",
    "epsilon_or_c",
    "tail_freq",
    "bound_value",
];

pub fn report_csv(report: &ConcentrationReport) -> String {
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.variant,
            r.family,
            r.k,
            r.n,
            fmt_num(r.theta),
            r.trials,
            fmt_num(r.mean),
            fmt_num(r.se_mean),
            fmt_num(r.var),
            r.epsilon_or_c.as_deref().unwrap_or(""),
            opt(r.tail_freq),
            opt(r.bound_value),
        );
    }
    out
}

pub fn report_json(report: &ConcentrationReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn emit_report(report: &ConcentrationReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => report_json(report)?,
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Free parameters of the extended-pipeline concentration bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub a: f64,
    pub epsilon: f64,
    pub f_of_n: f64,
    pub f_of_t: f64,
    pub t: usize,
    /// Dataset size `N`.
    pub dataset_size: u64,
    pub k: usize,
    pub n: usize,
    pub psi: usize,
    pub chi: usize,
    #[serde(default)]
    pub exponent_form: ExponentForm,
}

impl BoundInputs {
    /// `a = n^(-1/3)`, `epsilon = k^(-1/3)`, `f(x) = 3 sqrt(ln x)`, `chi = 3`,
    /// `psi = 0`: the Toeplitz instantiation with the `k^(-1/3)` accuracy.
    pub fn toeplitz_cube_root(n: usize, k: usize, t: usize, dataset_size: u64) -> Self {
        let f = |x: usize| 3.0 * (x as f64).ln().sqrt();
        Self {
            a: (n as f64).powf(-1.0 / 3.0),
            epsilon: (k as f64).powf(-1.0 / 3.0),
            f_of_n: f(n),
            f_of_t: f(t),
            t,
            dataset_size,
            k,
            n,
            psi: 0,
            chi: 3,
            exponent_form: ExponentForm::PoolSize,
        }
    }

    /// `a * chi + psi * f(n)^2 / n`.
    pub fn delta(&self) -> f64 {
        self.a * self.chi as f64 + self.psi as f64 * self.f_of_n.powi(2) / self.n as f64
    }

    /// `8 k delta / theta`.
    pub fn mu(&self, theta: f64) -> f64 {
        8.0 * self.k as f64 * self.delta() / theta
    }

    fn check(&self, theta: f64) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidBoundInputs(m.to_string()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.a) || !positive(self.epsilon) {
            return bad("a and epsilon must be positive");
        }
        if !positive(self.f_of_n) || !positive(self.f_of_t) {
            return bad("f(n) and f(t) must be positive");
        }
        if self.t == 0 || self.k == 0 || self.n == 0 || self.dataset_size == 0 {
            return bad("t, k, n and N must be positive");
        }
        if !(theta > 0.0 && theta <= PI) {
            return bad("theta must lie in (0, pi]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub delta: f64,
    pub mu: f64,
    /// `4 C(N,2) exp(-f(n)^2 / 2)`.
    pub dataset_failure: f64,
    /// `4 chi C(k,2) exp(-2 a^2 t / f(t)^4)` (or the `n` form).
    pub dependency_failure: f64,
    /// `None` when `mu >= 1`, where the binomial tail term is undefined.
    pub lambda: Option<f64>,
    /// Lower bound on `P(|estimate - theta/pi| <= epsilon)`, at most 1. When
    /// either factor is non-positive this is the smaller factor (or 0) and
    /// `vacuous` is set.
    pub value: Option<f64>,
    pub vacuous: bool,
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Evaluates the right-hand side of the extended-pipeline concentration bound
/// `(1 - 4 C(N,2) e^{-f(n)^2/2} - 4 chi C(k,2) e^{-2a^2 t/f(t)^4}) (1 - Lambda)`,
/// where `Lambda = (1/pi) sum_{j=ceil(eps k/2)}^{k} j^{-1/2} (ke/j)^j mu^j (1-mu)^{k-j} + 2 e^{-eps^2 k/2}`.
/// The sum is accumulated in log space.
pub fn evaluate_concentration_bound(b: &BoundInputs, theta: f64) -> Result<BoundEvaluation> {
    b.check(theta)?;
    let (k, kf) = (b.k, b.k as f64);
    let delta = b.delta();
    let mu = b.mu(theta);
    let dataset_failure = 4.0 * choose2(b.dataset_size as f64) * (-b.f_of_n.powi(2) / 2.0).exp();
    let (size, f) = match b.exponent_form {
        ExponentForm::PoolSize => (b.t as f64, b.f_of_t),
        ExponentForm::Dimension => (b.n as f64, b.f_of_n),
    };
    let dependency_failure =
        4.0 * b.chi as f64 * choose2(kf) * (-2.0 * b.a * b.a * size / f.powi(4)).exp();
    let first = 1.0 - dataset_failure - dependency_failure;

    if mu >= 1.0 {
        return Ok(BoundEvaluation {
            delta,
            mu,
            dataset_failure,
            dependency_failure,
            lambda: None,
            value: None,
            vacuous: true,
        });
    }

    let start = ((b.epsilon * kf / 2.0).ceil() as usize).max(1);
    let log_terms: Vec<f64> = (start..=k)
        .map(|j| {
            let jf = j as f64;
            let log_mu_term = if mu == 0.0 {
                f64::NEG_INFINITY
            } else {
                jf * mu.ln()
            };
            -0.5 * jf.ln()
                + jf * (kf.ln() + 1.0 - jf.ln())
                + log_mu_term
                + (kf - jf) * (-mu).ln_1p()
        })
        .collect();
    let lambda = log_sum_exp(&log_terms).exp() / PI + 2.0 * (-b.epsilon.powi(2) * kf / 2.0).exp();
    let second = 1.0 - lambda;

    let (value, vacuous) = if first > 0.0 && second > 0.0 {
        ((first * second).min(1.0), false)
    } else {
        (first.min(second).min(0.0), true)
    };
    Ok(BoundEvaluation {
        delta,
        mu,
        dataset_failure,
        dependency_failure,
        lambda: Some(lambda),
        value: Some(value),
        vacuous,
    })
}

/// Coefficients of each pool gaussian in the projection of row `i` of `P D`
/// onto `x`: `s[i][l] = sum_{j : l in S[i][j]} d_j x_j`.
pub fn pool_coefficients(
    matrix: &PsiRegularMatrix,
    d: &RademacherDiagonal,
    x: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let s = matrix.structure();
    if x.len() != s.cols() || d.len() != s.cols() {
        return Err(Error::DimensionMismatch {
            expected: s.cols(),
            actual: x.len(),
        });
    }
    Ok((0..s.rows())
        .map(|i| {
            let mut coeff = vec![0.0; s.pool_size()];
            for (j, &xj) in x.iter().enumerate() {
                for &l in s.subset(i, j) {
                    coeff[l] += d.sign(j) * xj;
                }
            }
            coeff
        })
        .collect())
}

/// Largest `|<s_i1, s_i2>|`, `|<v_i1, v_i2>|` or `|<s_i1, v_i2>|` over row pairs
/// `i1 != i2` for the pipeline's rows, with `x, y` the images under `H R` of an
/// orthonormal basis of the plane spanned by `p` and `r`.
pub fn max_cross_inner_product(pipeline: &HashPipeline, p: &[f64], r: &[f64]) -> Result<f64> {
    let basis_x = normalize_vec(p);
    let mut y: Vec<f64> = r.to_vec();
    let c = dot(&basis_x, &y);
    y.iter_mut().zip(&basis_x).for_each(|(a, b)| *a -= c * b);
    let basis_y = normalize_vec(&y);
    let rotate = |v: &[f64]| -> Result<Vec<f64>> {
        let mut v = v.to_vec();
        v.resize(pipeline.n_padded(), 0.0);
        if let Some(rd) = pipeline.r_diag() {
            rd.apply_in_place(&mut v)?;
            v = fwht_normalized(&v)?;
        }
        Ok(v)
    };
    let (hx, hy) = (rotate(&basis_x)?, rotate(&basis_y)?);
    let s = pool_coefficients(pipeline.matrix(), pipeline.d_diag(), &hx)?;
    let v = pool_coefficients(pipeline.matrix(), pipeline.d_diag(), &hy)?;
    let k = s.len();
    let mut worst: f64 = 0.0;
    for i1 in 0..k {
        for i2 in 0..k {
            if i1 == i2 {
                continue;
            }
            worst = worst
                .max(dot(&s[i1], &s[i2]).abs())
                .max(dot(&v[i1], &v[i2]).abs())
                .max(dot(&s[i1], &v[i2]).abs());
        }
    }
    Ok(worst)
}

fn normalize_vec(v: &[f64]) -> Vec<f64> {
    let norm = l2_norm(v);
    v.iter().map(|x| x / norm).collect()
}

/// `sqrt(n) * max_i |(H R u)_i|` for a fresh sign diagonal drawn from `seed`.
/// For unit `u` this exceeds `f` with probability at most `2 n exp(-f^2 / 2)`.
pub fn hadamard_flatness(u: &[f64], seed: u64) -> Result<f64> {
    let n = u.len();
    let r = RademacherDiagonal::sample(n, &mut stream_rng(seed, crate::seeding::ROTATION_STREAM));
    let mut v = u.to_vec();
    r.apply_in_place(&mut v)?;
    let v = fwht_normalized(&v)?;
    Ok((n as f64).sqrt() * v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}
