//! Command-line front end: CSV ingestion, the fit / oracle / simulate
//! subcommands, and result persistence.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. Every output file embeds the manifest digest, a SHA-256 hash
//! of the resolved parameters, so results can be traced back to their
//! exact configuration. Outputs are byte-identical across re-runs with
//! the same seed regardless of thread count; the manifest's wall-clock
//! field is the only run-dependent value anywhere in the output set.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::amp::AmpConfig;
use crate::bcr::BcrConfig;
use crate::combine::MarginalResult;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::ENUMERATION_CAP;
use crate::pipeline::{approximate_all_marginals, Backend, MarginalOptions};
use crate::prior::SpikeSlabPrior;
use crate::sim::{
    bcr_tuned_marginals, box_stats_csv, mse_summary_csv, result_to_json, run_boxplot_study,
    run_mse_study, SimConfig, SimResult, StudyKind,
};

#[derive(Parser, Debug)]
#[command(
    name = "spikeslab",
    version,
    about = "Marginal posterior inclusion probabilities for spike-and-slab regression",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Approximate per-feature inclusion probabilities on a CSV dataset.
    Fit(FitArgs),
    /// Exact per-feature inclusion probabilities by model enumeration
    /// (feasible only for small feature counts).
    Oracle(OracleArgs),
    /// Run a simulation study described by a JSON config file.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Randomized-projection backend.
    Bcr,
    /// Message-passing backend.
    Amp,
}

#[derive(Args, Debug)]
struct IoArgs {
    /// Input CSV file with a header row; '.' decimal separator; missing
    /// values are rejected.
    input: PathBuf,

    /// Name of the response column.
    #[arg(long, default_value = "y")]
    response: String,

    /// 0-based column index of the response (alternative to --response).
    #[arg(long, conflicts_with = "response")]
    response_index: Option<usize>,

    /// Directory for output files (created if absent).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,

    /// Fit on the raw columns instead of standardizing first.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args, Debug)]
struct PriorArgs {
    /// Prior inclusion probability, in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,

    /// Slab variance of nonzero coefficients.
    #[arg(long, default_value_t = 1.0)]
    psi: f64,

    /// Noise variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    io: IoArgs,

    #[command(flatten)]
    prior: PriorArgs,

    /// Approximation backend.
    #[arg(long, value_enum, default_value_t = BackendKind::Bcr)]
    backend: BackendKind,

    /// Tune hyperparameters from the data: the message-passing backend
    /// re-estimates (lambda, sigma2); the projection backend marginalizes
    /// sigma2 and refits lambda iteratively.
    #[arg(long)]
    tune: bool,

    /// Projection dimension (bcr only; default is a fill-rate heuristic).
    #[arg(long = "m", value_name = "M")]
    projection_dim: Option<usize>,

    /// Number of projection draws to average over (bcr only).
    #[arg(long = "K", value_name = "K")]
    num_projections: Option<usize>,

    /// Prior coefficient scale of the compressed model (bcr only;
    /// defaults to psi).
    #[arg(long)]
    kappa: Option<f64>,

    /// Seed for all randomized components.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    io: IoArgs,

    #[command(flatten)]
    prior: PriorArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON study configuration.
    config: PathBuf,

    /// Directory for output files (created if absent).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

/// Entry point used by the binary: parse real process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parse the given arguments and execute; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed;
            // anything else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit-code contract: 1 usage, 2 data, 3 numerical.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::EnumerationTooLarge { .. }
        | Error::IndexOutOfRange { .. }
        | Error::NotStandardized => 1,
        Error::Data(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::DimensionMismatch(_)
        | Error::NonFinite(_)
        | Error::ConstantColumn { .. }
        | Error::ConstantResponse
        | Error::ZeroNormColumn { .. } => 2,
        Error::NotPositiveDefinite { .. }
        | Error::RankDeficientProjection { .. }
        | Error::Diverged { .. }
        | Error::TuningAborted { .. }
        | Error::ZeroSignal => 3,
    }
}

/// Run a closure on a dedicated thread pool when a thread count was
/// requested; otherwise use the process-global pool.
fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

/// A parsed CSV: feature names, response vector, and design matrix.
struct CsvData {
    feature_names: Vec<String>,
    y: Vec<f64>,
    x_rows: Vec<Vec<f64>>,
}

/// Read a headered CSV, splitting off the response column. Cell-level
/// problems are reported with their 1-based data row and column name.
fn read_csv(path: &Path, response: &str, response_index: Option<usize>) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() {
        return Err(Error::Data(format!(
            "{}: no header row found",
            path.display()
        )));
    }
    let resp_col = match response_index {
        Some(idx) => {
            if idx >= headers.len() {
                return Err(Error::Data(format!(
                    "response index {idx} out of range; the file has {} columns",
                    headers.len()
                )));
            }
            idx
        }
        None => headers
            .iter()
            .position(|h| h == response)
            .ok_or_else(|| {
                Error::Data(format!(
                    "response column '{response}' not found; available columns: {}",
                    headers.join(", ")
                ))
            })?,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != resp_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut y = Vec::new();
    let mut x_rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let data_row = row_idx + 1;
        let mut row = Vec::with_capacity(feature_names.len());
        for (col_idx, cell) in record.iter().enumerate() {
            let name = &headers[col_idx];
            if cell.is_empty() {
                return Err(Error::Data(format!(
                    "missing value at data row {data_row}, column '{name}'"
                )));
            }
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "non-numeric value '{cell}' at data row {data_row}, column '{name}'"
                ))
            })?;
            if col_idx == resp_col {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        x_rows.push(row);
    }
    Ok(CsvData {
        feature_names,
        y,
        x_rows,
    })
}

/// Assemble a (possibly standardized) dataset from a parsed CSV, mapping
/// structural problems to data errors that name the offending column.
fn build_dataset(csv: &CsvData, standardize: bool) -> Result<Dataset> {
    if csv.feature_names.is_empty() {
        return Err(Error::InvalidParameter(
            "the input has no feature columns besides the response".into(),
        ));
    }
    let n = csv.y.len();
    let p = csv.feature_names.len();
    let mut flat = Vec::with_capacity(n * p);
    for row in &csv.x_rows {
        flat.extend_from_slice(row);
    }
    let x = ndarray::Array2::from_shape_vec((n, p), flat)
        .map_err(|e| Error::Data(format!("cannot shape design matrix: {e}")))?;
    let y = ndarray::Array1::from_vec(csv.y.clone());
    let data = Dataset::new(y, x).map_err(|e| Error::Data(e.to_string()))?;
    if standardize {
        data.standardize().map_err(|e| match e {
            Error::ConstantColumn { index } => Error::Data(format!(
                "feature column '{}' is constant; drop it or pass --no-standardize",
                csv.feature_names[index]
            )),
            Error::ConstantResponse => {
                Error::Data("the response column is constant".into())
            }
            other => Error::Data(other.to_string()),
        })
    } else {
        Ok(data)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Digest of the resolved parameters: what the run computed is fully
/// determined by this value (plus the input file contents).
fn config_digest<C: Serialize>(command: &str, input: &str, config: &C, seed: u64) -> Result<String> {
    let value = serde_json::json!({
        "command": command,
        "input": input,
        "config": config,
        "seed": seed,
    });
    Ok(sha256_hex(serde_json::to_string(&value)?.as_bytes()))
}

#[derive(Serialize)]
struct Manifest<C: Serialize> {
    command: String,
    input: String,
    config: C,
    seed: u64,
    digest: String,
    /// Timing metadata only; excluded from the digest and expected to
    /// differ between runs.
    wall_clock_ms: u64,
}

fn write_manifest<C: Serialize>(out_dir: &Path, manifest: &Manifest<C>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(())
}

/// Render per-feature marginal results as the output CSV, prefixed with
/// the manifest digest.
fn marginals_csv(
    digest: &str,
    feature_names: &[String],
    results: &[MarginalResult],
    backend_label: &str,
) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(["feature", "lambda_j", "m_j", "psi_j", "converged", "backend"])?;
    for (name, r) in feature_names.iter().zip(results.iter()) {
        writer.write_record([
            name.as_str(),
            &r.inclusion_prob.to_string(),
            &r.slab_mean.to_string(),
            &r.slab_var.to_string(),
            &r.converged.to_string(),
            backend_label,
        ])?;
    }
    let body = String::from_utf8(
        writer
            .into_inner()
            .map_err(|e| Error::Data(format!("csv buffer: {e}")))?,
    )
    .map_err(|e| Error::Data(format!("csv encoding: {e}")))?;
    Ok(format!("# manifest_digest={digest}\n{body}"))
}

/// Resolved fit parameters recorded in the manifest (and hashed).
#[derive(Serialize)]
struct FitManifestConfig {
    backend: Backend,
    prior: PriorFields,
    tune: bool,
    standardize: bool,
    response: String,
}

#[derive(Serialize)]
struct PriorFields {
    lambda: f64,
    psi: f64,
    sigma2: f64,
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let start = Instant::now();
    let csv = read_csv(
        &args.io.input,
        &args.io.response,
        args.io.response_index,
    )?;
    let standardize = !args.io.no_standardize;
    let data = build_dataset(&csv, standardize)?;
    let prior = SpikeSlabPrior::new(args.prior.lambda, args.prior.psi, args.prior.sigma2)?;

    let backend = match args.backend {
        BackendKind::Bcr => Backend::Bcr(BcrConfig {
            kappa: args.kappa,
            projection_dim: args.projection_dim,
            num_projections: args.num_projections.unwrap_or(10),
            seed: args.seed,
            marginalize_sigma2: args.tune,
            ..BcrConfig::default()
        }),
        BackendKind::Amp => Backend::Amp(AmpConfig {
            tune_hyperparams: args.tune,
            seed: args.seed,
            ..AmpConfig::default()
        }),
    };
    let options = MarginalOptions {
        allow_unstandardized: args.io.no_standardize,
    };

    let results = with_pool(args.io.threads, || match (&backend, args.tune) {
        (Backend::Bcr(cfg), true) => {
            bcr_tuned_marginals(&data, prior.psi, prior.lambda, cfg, &options)
        }
        _ => approximate_all_marginals(&data, &prior, &backend, &options),
    })?;

    let config = FitManifestConfig {
        backend: backend.clone(),
        prior: PriorFields {
            lambda: prior.lambda,
            psi: prior.psi,
            sigma2: prior.sigma2,
        },
        tune: args.tune,
        standardize,
        response: args.io.response.clone(),
    };
    let input = args.io.input.display().to_string();
    let digest = config_digest("fit", &input, &config, args.seed)?;

    std::fs::create_dir_all(&args.io.out_dir)?;
    let csv_text = marginals_csv(&digest, &csv.feature_names, &results, backend.name())?;
    std::fs::write(args.io.out_dir.join("inclusion_probs.csv"), csv_text)?;
    write_manifest(
        &args.io.out_dir,
        &Manifest {
            command: "fit".into(),
            input,
            config,
            seed: args.seed,
            digest,
            wall_clock_ms: start.elapsed().as_millis() as u64,
        },
    )?;
    println!(
        "fit ({}): {} features -> {}",
        backend.name(),
        csv.feature_names.len(),
        args.io.out_dir.join("inclusion_probs.csv").display()
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let start = Instant::now();
    let csv = read_csv(
        &args.io.input,
        &args.io.response,
        args.io.response_index,
    )?;
    if csv.feature_names.len() > ENUMERATION_CAP {
        eprintln!(
            "hint: {} features exceed the exact-enumeration cap of {}; \
             use the fit subcommand with an approximate backend",
            csv.feature_names.len(),
            ENUMERATION_CAP
        );
        return Err(Error::EnumerationTooLarge {
            p: csv.feature_names.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let standardize = !args.io.no_standardize;
    let data = build_dataset(&csv, standardize)?;
    let prior = SpikeSlabPrior::new(args.prior.lambda, args.prior.psi, args.prior.sigma2)?;
    let options = MarginalOptions {
        allow_unstandardized: args.io.no_standardize,
    };

    let results = with_pool(args.io.threads, || {
        approximate_all_marginals(&data, &prior, &Backend::ExactMixture, &options)
    })?;

    let config = FitManifestConfig {
        backend: Backend::ExactMixture,
        prior: PriorFields {
            lambda: prior.lambda,
            psi: prior.psi,
            sigma2: prior.sigma2,
        },
        tune: false,
        standardize,
        response: args.io.response.clone(),
    };
    let input = args.io.input.display().to_string();
    let digest = config_digest("oracle", &input, &config, 0)?;

    std::fs::create_dir_all(&args.io.out_dir)?;
    let csv_text = marginals_csv(&digest, &csv.feature_names, &results, "oracle")?;
    std::fs::write(args.io.out_dir.join("inclusion_probs.csv"), csv_text)?;
    write_manifest(
        &args.io.out_dir,
        &Manifest {
            command: "oracle".into(),
            input,
            config,
            seed: 0,
            digest,
            wall_clock_ms: start.elapsed().as_millis() as u64,
        },
    )?;
    println!(
        "oracle: {} features -> {}",
        csv.feature_names.len(),
        args.io.out_dir.join("inclusion_probs.csv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SimOutput<'a> {
    manifest_digest: &'a str,
    result: &'a SimResult,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&args.config)?;
    let config: SimConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("config file: {e}")))?;
    config.validate()?;

    let result = with_pool(args.threads, || match config.study {
        StudyKind::MseCurve => run_mse_study(&config),
        StudyKind::Boxplot => run_boxplot_study(&config),
    })?;

    let input = args.config.display().to_string();
    let digest = config_digest("simulate", &input, &config, config.seed)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let mut result_json = serde_json::to_string_pretty(&SimOutput {
        manifest_digest: &digest,
        result: &result,
    })?;
    result_json.push('\n');
    std::fs::write(args.out_dir.join("sim_result.json"), result_json)?;

    let (summary_name, summary_body) = match config.study {
        StudyKind::MseCurve => ("mse_summary.csv", mse_summary_csv(&result)),
        StudyKind::Boxplot => ("box_summary.csv", box_stats_csv(&result)),
    };
    std::fs::write(
        args.out_dir.join(summary_name),
        format!("# manifest_digest={digest}\n{summary_body}"),
    )?;
    write_manifest(
        &args.out_dir,
        &Manifest {
            command: "simulate".into(),
            input,
            config: config.clone(),
            seed: config.seed,
            digest,
            wall_clock_ms: start.elapsed().as_millis() as u64,
        },
    )?;

    print_study_summary(&config, &result);
    println!(
        "simulate: results -> {} and {}",
        args.out_dir.join("sim_result.json").display(),
        args.out_dir.join(summary_name).display()
    );
    // Keep a reference to the full JSON helper so both emission paths
    // stay exercised and in sync.
    debug_assert!(result_to_json(&result).is_ok());
    Ok(())
}

/// Human-readable run summary on stdout.
fn print_study_summary(config: &SimConfig, result: &SimResult) {
    match config.study {
        StudyKind::MseCurve => {
            println!("{:>6} {:>6} {:>12} {:>12} {:>12} {:>5}", "rho", "method", "mean_mse", "p20", "p80", "fail");
            for s in &result.mse_summaries {
                let fmt = |v: Option<f64>| {
                    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
                };
                println!(
                    "{:>6} {:>6} {:>12} {:>12} {:>12} {:>5}",
                    s.rho,
                    s.method,
                    fmt(s.mean_mse),
                    fmt(s.p20),
                    fmt(s.p80),
                    s.failures
                );
            }
        }
        StudyKind::Boxplot => {
            println!(
                "{:>6} {:>6} {:>6} {:>10} {:>5}",
                "rho", "snr", "method", "extreme", "fail"
            );
            for e in &result.extremeness {
                let fails = result
                    .failures
                    .iter()
                    .filter(|f| f.method == e.method && f.rho == e.rho && f.snr == e.snr)
                    .count();
                println!(
                    "{:>6} {:>6} {:>6} {:>10.4} {:>5}",
                    e.rho, e.snr, e.method, e.fraction, fails
                );
            }
        }
    }
}
