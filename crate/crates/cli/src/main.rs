//! Batch command-line surface: `generate`, `estimate`, `simulate`.
//!
//! Every command is deterministic given its flags and seed (timestamps only
//! appear in the printed manifest). Exit codes are a stable contract:
//! 0 success, 1 I/O failure, 2 usage or schema error, 3 estimator failure.
//!
//! An optional JSON config file may supply defaults for most flags; explicit
//! flags always win. Human-readable tables go to standard output, machine
//! artifacts only to `--out-path`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use robust_ate::{
    bootstrap_propensity_ensemble, clip_scores, estimate_aipw, estimate_hajek,
    estimate_ipwra_with, estimate_jre_with, estimate_or_with, fit_outcome_models_or_with,
    fit_propensity, generate_dataset, load_dataset, run_monte_carlo, seeding, summarize_report,
    validate_dataset, write_dataset, write_ensemble_csv, ATEEstimate, BenchmarkConfig, CsvSchema,
    DgpConfig, Error as CoreError, EstimatorKind, EstimatorSet, FeatureSet, IrlsConfig, JreConfig,
    ReportFormat,
};

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ESTIMATOR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "robust-ate",
    version,
    about = "ATE estimation (OR, Hajek, IPWRA, AIPW, JRE) and its Monte Carlo benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV plus a truth sidecar CSV.
    Generate(GenerateArgs),
    /// Run estimators on a dataset CSV and print one JSON result per estimator.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo benchmark grid and render the report.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Sample size (at least 10).
    #[arg(long)]
    n: usize,
    /// Outcome-model misspecification level in [0, 1].
    #[arg(long)]
    t: f64,
    /// Outcome noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long)]
    seed: u64,
    /// Observed-data CSV path; the truth sidecar lands next to it.
    #[arg(long)]
    out_path: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset CSV with header x1,...,xd,z,y.
    #[arg(long)]
    data_path: PathBuf,
    /// Comma-separated subset of: or, hajek, ipwra, aipw, jre.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Bootstrap worlds for the JRE ensemble.
    #[arg(long)]
    b_count: Option<usize>,
    /// JRE anchor strength; omitted means the scaled default.
    #[arg(long)]
    lambda: Option<f64>,
    /// Propensity-score clip value.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output format: json, csv, or markdown.
    #[arg(long)]
    format: Option<String>,
    /// Outcome-model features: linear, intercept-only, or linear-squares.
    #[arg(long)]
    feature_set: Option<String>,
    /// Optional path to dump the bootstrap ensemble as CSV.
    #[arg(long)]
    dump_ensemble: Option<PathBuf>,
    /// JSON file supplying defaults for the optional flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<usize>,
    /// Comma-separated misspecification levels.
    #[arg(long, value_delimiter = ',')]
    t_list: Vec<f64>,
    /// Replications per grid cell (at least 2).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    b_count: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report format for --out-path: csv, json, or markdown.
    #[arg(long)]
    format: Option<String>,
    /// Report file; CSV reports get a provenance JSON sidecar.
    #[arg(long)]
    out_path: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long)]
    feature_set: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

/// Defaults file: every field optional, explicit flags always win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    estimators: Option<Vec<String>>,
    b_count: Option<usize>,
    lambda: Option<f64>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    format: Option<String>,
    feature_set: Option<String>,
    reps: Option<usize>,
    noise_sd: Option<f64>,
    workers: Option<usize>,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    flags: BTreeMap<String, String>,
    seed: u64,
    version: String,
    timestamp_unix: u64,
}

impl RunManifest {
    fn new(command: &str, flags: BTreeMap<String, String>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            flags,
            seed,
            version: robust_ate::VERSION.to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn print(&self) {
        println!("{}", serde_json::to_string(self).expect("manifest serializes"));
    }
}

enum CliError {
    Usage(String),
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Io(_) | CoreError::Csv(_) => CliError::Io(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

fn io_err(err: std::io::Error) -> CliError {
    CliError::Io(err.to_string())
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config file {}: {e}", p.display())))
        }
    }
}

fn parse_estimators(names: &[String]) -> Result<EstimatorSet, CliError> {
    let mut set = EstimatorSet::new();
    for name in names {
        set.insert(EstimatorKind::from_str(name)?);
    }
    if set.is_empty() {
        return Err(CliError::Usage("no estimators requested".into()));
    }
    Ok(set)
}

fn init_workers(workers: Option<usize>) {
    if let Some(w) = workers {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
}

fn truth_sidecar_path(out_path: &Path) -> PathBuf {
    out_path.with_extension("truth.csv")
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let config = DgpConfig {
        n: args.n,
        t: args.t,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let sim = generate_dataset(&config)?;
    write_dataset(&sim.observed, &args.out_path)?;

    let truth_path = truth_sidecar_path(&args.out_path);
    let mut truth = String::from("y1,y0,true_score\n");
    for i in 0..sim.observed.n() {
        truth.push_str(&format!("{},{},{}\n", sim.y1[i], sim.y0[i], sim.true_scores[i]));
    }
    std::fs::write(&truth_path, truth).map_err(io_err)?;

    let mut flags = BTreeMap::new();
    flags.insert("n".into(), args.n.to_string());
    flags.insert("t".into(), args.t.to_string());
    flags.insert("noise_sd".into(), args.noise_sd.to_string());
    flags.insert("seed".into(), args.seed.to_string());
    flags.insert("out_path".into(), args.out_path.display().to_string());
    flags.insert("truth_path".into(), truth_path.display().to_string());
    RunManifest::new("generate", flags, args.seed).print();
    Ok(())
}

/// Estimate output line: a full estimate or a failure marker.
enum EstimateOutcome {
    Ok(ATEEstimate),
    Failed { estimator: EstimatorKind, error: String },
}

fn render_estimates(outcomes: &[EstimateOutcome], format: ReportFormat) {
    match format {
        ReportFormat::Json => {
            for outcome in outcomes {
                match outcome {
                    EstimateOutcome::Ok(est) => println!("{}", est.to_json()),
                    EstimateOutcome::Failed { estimator, error } => println!(
                        "{}",
                        serde_json::json!({ "estimator": estimator.name(), "error": error })
                    ),
                }
            }
        }
        ReportFormat::Csv => {
            println!("estimator,tau_hat,bias_treated,bias_control,error");
            for outcome in outcomes {
                match outcome {
                    EstimateOutcome::Ok(est) => println!(
                        "{},{},{},{},",
                        est.estimator, est.tau_hat, est.bias_treated, est.bias_control
                    ),
                    EstimateOutcome::Failed { estimator, error } => {
                        println!("{},,,,{}", estimator, error.replace(',', ";"))
                    }
                }
            }
        }
        ReportFormat::Markdown => {
            println!("| estimator | tau_hat | bias_treated | bias_control |");
            println!("|-----------|---------|--------------|--------------|");
            for outcome in outcomes {
                match outcome {
                    EstimateOutcome::Ok(est) => println!(
                        "| {} | {:.6} | {:.3e} | {:.3e} |",
                        est.estimator, est.tau_hat, est.bias_treated, est.bias_control
                    ),
                    EstimateOutcome::Failed { estimator, error } => {
                        println!("| {estimator} | failed: {error} | | |")
                    }
                }
            }
        }
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<bool, CliError> {
    let file_config = load_config(&args.config)?;
    init_workers(args.workers.or(file_config.workers));

    let estimator_names = args
        .estimators
        .clone()
        .or(file_config.estimators)
        .unwrap_or_else(|| EstimatorKind::ALL.iter().map(|k| k.name().to_string()).collect());
    let estimators = parse_estimators(&estimator_names)?;
    let b_count = args.b_count.or(file_config.b_count).unwrap_or(1000);
    let lambda = args.lambda.or(file_config.lambda);
    let epsilon = args.epsilon.or(file_config.epsilon).unwrap_or(0.01);
    let seed = args.seed.or(file_config.seed).unwrap_or(42);
    let format = ReportFormat::from_str(
        &args.format.clone().or(file_config.format).unwrap_or_else(|| "json".into()),
    )?;
    let features = FeatureSet::from_str(
        &args
            .feature_set
            .clone()
            .or(file_config.feature_set)
            .unwrap_or_else(|| "linear".into()),
    )?;

    let dataset = load_dataset(&args.data_path, &CsvSchema::default())?;
    let validation = validate_dataset(&dataset);
    if !validation.is_clean() {
        let issues: Vec<String> = validation.issues.iter().map(|i| i.to_string()).collect();
        eprintln!("warning: dataset issues: {}", issues.join(", "));
    }

    let irls = IrlsConfig::default();
    let jre_config = JreConfig {
        anchor_strength: lambda,
        epsilon,
        b_count,
        seed,
    };
    let mut outcomes = Vec::new();

    let point_scores = if [EstimatorKind::Hajek, EstimatorKind::Ipwra, EstimatorKind::Aipw]
        .iter()
        .any(|k| estimators.contains(k))
    {
        Some(
            fit_propensity(&dataset, &irls)
                .and_then(|fit| clip_scores(fit.scores.view(), epsilon)),
        )
    } else {
        None
    };

    for &kind in &estimators {
        let result = match kind {
            EstimatorKind::Or => estimate_or_with(&dataset, features),
            EstimatorKind::Hajek | EstimatorKind::Ipwra | EstimatorKind::Aipw => {
                match point_scores.as_ref().expect("scores computed") {
                    Ok(scores) => match kind {
                        EstimatorKind::Hajek => estimate_hajek(&dataset, scores.view()),
                        EstimatorKind::Ipwra => {
                            estimate_ipwra_with(&dataset, scores.view(), features).map(|(e, _)| e)
                        }
                        EstimatorKind::Aipw => fit_outcome_models_or_with(&dataset, features)
                            .and_then(|models| estimate_aipw(&dataset, scores.view(), &models)),
                        _ => unreachable!(),
                    },
                    Err(err) => Err(CoreError::InvalidArgument(err.to_string())),
                }
            }
            EstimatorKind::Jre => {
                let ensemble_seed = seeding::ensemble_seed(seed);
                bootstrap_propensity_ensemble(&dataset, b_count, ensemble_seed, &irls, epsilon)
                    .and_then(|ensemble| {
                        if let Some(path) = &args.dump_ensemble {
                            write_ensemble_csv(&ensemble, path)?;
                        }
                        estimate_jre_with(&dataset, &ensemble, &jre_config, features)
                    })
            }
        };
        match result {
            Ok(est) => outcomes.push(EstimateOutcome::Ok(est)),
            Err(err) => outcomes.push(EstimateOutcome::Failed {
                estimator: kind,
                error: err.to_string(),
            }),
        }
    }

    render_estimates(&outcomes, format);

    let mut flags = BTreeMap::new();
    flags.insert("data_path".into(), args.data_path.display().to_string());
    flags.insert("estimators".into(), estimator_names.join(","));
    flags.insert("b_count".into(), b_count.to_string());
    flags.insert(
        "lambda".into(),
        lambda.map(|l| l.to_string()).unwrap_or_else(|| "scaled-default".into()),
    );
    flags.insert("epsilon".into(), epsilon.to_string());
    flags.insert("seed".into(), seed.to_string());
    flags.insert("feature_set".into(), features.name().into());
    RunManifest::new("estimate", flags, seed).print();

    Ok(outcomes.iter().any(|o| matches!(o, EstimateOutcome::Failed { .. })))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file_config = load_config(&args.config)?;
    init_workers(args.workers.or(file_config.workers));

    let estimator_names = args
        .estimators
        .clone()
        .or(file_config.estimators)
        .unwrap_or_else(|| EstimatorKind::ALL.iter().map(|k| k.name().to_string()).collect());
    let estimators = parse_estimators(&estimator_names)?;
    let reps = args.reps.or(file_config.reps).unwrap_or(200);
    let b_count = args.b_count.or(file_config.b_count).unwrap_or(1000);
    let lambda = args.lambda.or(file_config.lambda);
    let epsilon = args.epsilon.or(file_config.epsilon).unwrap_or(0.01);
    let noise_sd = args.noise_sd.or(file_config.noise_sd).unwrap_or(1.0);
    let seed = args.seed.or(file_config.seed).unwrap_or(42);
    let format = ReportFormat::from_str(
        &args.format.clone().or(file_config.format).unwrap_or_else(|| "csv".into()),
    )?;
    let features = FeatureSet::from_str(
        &args
            .feature_set
            .clone()
            .or(file_config.feature_set)
            .unwrap_or_else(|| "linear".into()),
    )?;

    let benchmark = BenchmarkConfig {
        n_values: args.n_list.clone(),
        t_values: args.t_list.clone(),
        reps,
        b_count,
        noise_sd,
        base_seed: seed,
        estimators,
        features,
    };
    let jre_config = JreConfig {
        anchor_strength: lambda,
        epsilon,
        b_count,
        seed,
    };
    let report = run_monte_carlo(&benchmark, &jre_config)?;

    // Humans read the table; files get the machine formats.
    print!("{}", summarize_report(&report, ReportFormat::Markdown));

    if let Some(out_path) = &args.out_path {
        std::fs::write(out_path, summarize_report(&report, format)).map_err(io_err)?;
        if format == ReportFormat::Csv {
            let sidecar = out_path.with_extension("provenance.json");
            let provenance = serde_json::to_string_pretty(&report.provenance)
                .expect("provenance serializes");
            std::fs::write(sidecar, provenance).map_err(io_err)?;
        }
    }

    let mut flags = BTreeMap::new();
    flags.insert(
        "n_list".into(),
        args.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
    );
    flags.insert(
        "t_list".into(),
        args.t_list.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
    );
    flags.insert("reps".into(), reps.to_string());
    flags.insert("b_count".into(), b_count.to_string());
    flags.insert(
        "lambda".into(),
        lambda.map(|l| l.to_string()).unwrap_or_else(|| "scaled-default".into()),
    );
    flags.insert("epsilon".into(), epsilon.to_string());
    flags.insert("noise_sd".into(), noise_sd.to_string());
    flags.insert("seed".into(), seed.to_string());
    flags.insert("estimators".into(), estimator_names.join(","));
    flags.insert("feature_set".into(), features.name().into());
    if let Some(p) = &args.out_path {
        flags.insert("out_path".into(), p.display().to_string());
    }
    RunManifest::new("simulate", flags, seed).print();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(args).map(|()| false),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args).map(|()| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_ESTIMATOR),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
