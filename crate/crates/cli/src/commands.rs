use std::io::Write;
use std::path::{Path, PathBuf};

use psihash::experiments::{
    emit_report, report_csv, report_json, run_experiment, ExperimentConfig, ReportFormat,
};
use psihash::io::{read_hash_file, read_vectors, sidecar_path, write_hash_file, VectorFormat};
use psihash::{
    build_pipeline, estimate_angle, p_chromatic_number, validate as validate_structure,
    ColoringMode, Family, PipelineConfig, Quantizer, SubsetStructure, Variant,
};
use serde_json::{json, Value};

use crate::config::CliConfig;
use crate::exit::{CliError, ExitCode};

type CmdResult = Result<(), CliError>;

const DEFAULT_EXACT_CAP: usize = 24;

fn malformed(message: impl Into<String>) -> CliError {
    CliError::new(ExitCode::MalformedInput, message)
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, body: &str) -> CmdResult {
    std::fs::write(path, body)
        .map_err(|e| malformed(format!("cannot write {}: {e}", path.display())))
}

/// Writes `body` to `out` when given, otherwise to stdout.
fn emit(out: Option<&Path>, body: &str) -> CmdResult {
    match out {
        Some(p) => write_file(p, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| malformed(format!("cannot write to stdout: {e}")))
        }
    }
}

fn load_structure(path: &Path) -> Result<SubsetStructure, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    SubsetStructure::from_json(&text).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

fn config_value(cfg: &CliConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub fn hash(mut cfg: CliConfig) -> CmdResult {
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| malformed("missing input vector file"))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| malformed("missing --out for the hash file"))?;
    let k = CliConfig::require(&cfg.k, "k")?;
    let n = CliConfig::require(&cfg.n, "n")?;
    let seed = CliConfig::require(&cfg.seed, "seed")?;
    let variant = *cfg.variant.get_or_insert(Variant::Extended);
    let family = *cfg.family.get_or_insert(Family::Toeplitz);
    let quantizer = *cfg.quantizer.get_or_insert(Quantizer::Sign);
    if !quantizer.is_binary() {
        return Err(CliError::new(
            ExitCode::InvalidPipeline,
            format!("quantizer {quantizer} is real valued; hash files need a binary quantizer"),
        ));
    }
    let format = match cfg.input_format.as_deref() {
        None => VectorFormat::detect(&input),
        Some("csv") => VectorFormat::Csv,
        Some("raw_f64") | Some("raw-f64") => VectorFormat::RawF64,
        Some(other) => return Err(malformed(format!("unknown input format {other:?}"))),
    };
    cfg.input_format = Some(
        match format {
            VectorFormat::Csv => "csv",
            VectorFormat::RawF64 => "raw_f64",
        }
        .into(),
    );

    let mut pipeline_cfg = PipelineConfig::new(variant, family, k, n, seed);
    pipeline_cfg.quantizer = quantizer;
    if family == Family::General {
        let path = CliConfig::require(&cfg.structure, "structure")?;
        pipeline_cfg.structure = Some(load_structure(&path)?);
    }
    let pipeline = build_pipeline(&pipeline_cfg).map_err(CliError::pipeline)?;

    let vectors =
        read_vectors(&input, format).map_err(|e| malformed(format!("{}: {e}", input.display())))?;
    let hashes = pipeline
        .hash_batch(&vectors)
        .map_err(|e| malformed(format!("{}: {e}", input.display())))?;
    write_hash_file(&out, k, &hashes)
        .map_err(|e| malformed(format!("cannot write {}: {e}", out.display())))?;

    let summary = json!({
        "count": hashes.len(),
        "k": k,
        "n": n,
        "variant": variant,
        "seed": seed,
        "config": config_value(&cfg),
    });
    let body = to_pretty(&summary);
    write_file(&sidecar_path(&out), &body)?;
    emit(None, &body)
}

pub fn estimate(cfg: CliConfig) -> CmdResult {
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| malformed("missing input hash file"))?;
    let (_, hashes) =
        read_hash_file(&input).map_err(|e| malformed(format!("{}: {e}", input.display())))?;
    let count = hashes.len();
    let mut pairs = cfg.pairs.clone().unwrap_or_default();
    if cfg.all_pairs == Some(true) {
        pairs.extend((0..count).flat_map(|i| (i + 1..count).map(move |j| (i, j))));
    }
    if pairs.is_empty() {
        return Err(malformed(
            "no pairs requested; use --pair i,j or --all-pairs",
        ));
    }
    let mut body = String::from("i,j,normalized,radians\n");
    for &(i, j) in &pairs {
        if let Some(bad) = [i, j].into_iter().find(|&x| x >= count) {
            return Err(malformed(format!(
                "pair ({i},{j}): row index {bad} out of range for {count} hashes"
            )));
        }
        let est = estimate_angle(&hashes[i], &hashes[j]).map_err(CliError::input)?;
        body.push_str(&format!("{i},{j},{},{}\n", est.value, est.radians()));
    }
    let meta = to_pretty(&json!({ "config": config_value(&cfg), "pairs": pairs.len() }));
    match cfg.out.as_deref() {
        Some(out) => {
            write_file(&sidecar_path(out), &meta)?;
            emit(Some(out), &body)
        }
        None => {
            eprint!("{meta}");
            emit(None, &body)
        }
    }
}

pub fn validate(cfg: CliConfig) -> CmdResult {
    let path = cfg
        .structure
        .clone()
        .ok_or_else(|| malformed("missing structure JSON"))?;
    let structure = load_structure(&path)?;
    let report = validate_structure(&structure);
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    doc["config"] = config_value(&cfg);
    emit(cfg.out.as_deref(), &to_pretty(&doc))?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::new(
            ExitCode::ValidationFailed,
            report
                .first_failure()
                .unwrap_or("validation failed")
                .to_string(),
        ))
    }
}

pub fn chroma(mut cfg: CliConfig) -> CmdResult {
    let structure = match (&cfg.structure, cfg.family) {
        (Some(path), None | Some(Family::General)) => load_structure(path)?,
        (None, Some(Family::General)) => {
            return Err(CliError::new(
                ExitCode::InvalidPipeline,
                "general family requires --structure",
            ))
        }
        (Some(_), Some(f)) => {
            return Err(CliError::new(
                ExitCode::InvalidPipeline,
                format!("--structure conflicts with --family {f}"),
            ))
        }
        (None, family) => {
            let family = *cfg.family.get_or_insert(family.unwrap_or(Family::Toeplitz));
            let k = CliConfig::require(&cfg.k, "k")?;
            let n = CliConfig::require(&cfg.n, "n")?;
            match family {
                Family::Circulant => SubsetStructure::circulant(k, n),
                _ => SubsetStructure::toeplitz(k, n),
            }
            .map_err(CliError::pipeline)?
        }
    };
    let report = validate_structure(&structure);
    if !report.passed() {
        return Err(CliError::new(
            ExitCode::InvalidPipeline,
            format!(
                "structure is not valid: {}",
                report.first_failure().unwrap_or("unknown")
            ),
        ));
    }
    let mode = match cfg.mode.get_or_insert_with(|| "exact".into()).as_str() {
        "exact" => ColoringMode::Exact {
            cap: *cfg.cap.get_or_insert(DEFAULT_EXACT_CAP),
        },
        "greedy" => ColoringMode::Greedy,
        other => return Err(malformed(format!("unknown mode {other:?}"))),
    };
    let result = p_chromatic_number(&structure, mode).map_err(CliError::pipeline)?;
    let doc = json!({
        "chi": result.chi,
        "method": result.method,
        "argmax_pair": result.argmax_pair,
        "per_pair": result.per_pair,
        "coloring": result.coloring,
        "config": config_value(&cfg),
    });
    emit(cfg.out.as_deref(), &to_pretty(&doc))
}

/// `out` with any `.csv`/`.json` extension removed.
fn report_base(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => out.with_extension(""),
        _ => out.to_path_buf(),
    }
}

fn with_suffix(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn experiment(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    stdout_format: ReportFormat,
) -> CmdResult {
    let text =
        std::fs::read_to_string(path).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = out {
        cfg.output = Some(out.to_string_lossy().into_owned());
    }
    let base = report_base(Path::new(cfg.output.as_deref().ok_or_else(|| {
        malformed("no report path; set `output` in the config or pass --out")
    })?));
    cfg.validate().map_err(|e| malformed(e.to_string()))?;
    let report = run_experiment(&cfg).map_err(|e| malformed(e.to_string()))?;

    let csv_path = with_suffix(&base, "csv");
    let json_path = with_suffix(&base, "json");
    for (format, p) in [
        (ReportFormat::Csv, &csv_path),
        (ReportFormat::Json, &json_path),
    ] {
        emit_report(&report, format, p)
            .map_err(|e| malformed(format!("cannot write {}: {e}", p.display())))?;
    }
    let body = match stdout_format {
        ReportFormat::Csv => report_csv(&report),
        ReportFormat::Json => report_json(&report).map_err(CliError::input)?,
    };
    emit(None, &body)?;

    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.detail.clone())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            ExitCode::CheckFailed,
            format!("experiment checks failed: {}", failed.join("; ")),
        ))
    }
}
