//! Command-line driver: ingest -> returns -> symbolize -> score ->
//! validate -> export, plus synthetic data generation, lag sweeps and
//! entropy-rate group comparison.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use leadlag::analysis::{self, Bandwidth};
use leadlag::export::{self, ExportFormat};
use leadlag::inference::{
    self, Correction, Method, ScoreConfig, SweepConfig, TestCount,
};
use leadlag::infotheory::lz_entropy_rate;
use leadlag::marketdata::{self, CsvFormat, ReturnMatrix};
use leadlag::symbolize::symbolize_matrix;
use leadlag::synth;
use leadlag::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "leadlag", version, about = "Statistically validated lead-lag networks from return time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score all ordered pairs and export validated networks per lag
    Analyze(AnalyzeArgs),
    /// Count validated links across a range of lags
    Sweep(AnalyzeArgs),
    /// Generate a synthetic market with known ground truth
    Synth(SynthArgs),
    /// Compare entropy rates of validated vs non-validated pairs
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct AnalyzeArgs {
    /// Input price CSV
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input layout: wide (`timestamp,day,SYM1,...`) or long
    /// (`timestamp,day,symbol,price`)
    #[arg(long)]
    format: Option<String>,
    /// Optional JSON config; explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Quantile bin count
    #[arg(long)]
    q: Option<usize>,
    /// Return sampling interval in data steps
    #[arg(long)]
    tau: Option<usize>,
    /// Lags, as a comma list and/or `a..b` inclusive ranges, e.g. `0..10`
    #[arg(long)]
    lambdas: Option<String>,
    /// Nominal p-value before correction
    #[arg(long)]
    p: Option<f64>,
    /// bonferroni | fdr
    #[arg(long)]
    correction: Option<String>,
    /// gamma | shuffle
    #[arg(long)]
    method: Option<String>,
    /// Surrogate count for the shuffle method
    #[arg(long)]
    shuffles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list of network formats: dot,graphml,json
    #[arg(long)]
    export: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// SynthSpec JSON file
    #[arg(long)]
    spec: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: AnalyzeArgs,
    /// Lag at which validated/non-validated groups are formed
    #[arg(long)]
    lambda: Option<usize>,
    /// Permutations for the equality test
    #[arg(long)]
    permutations: Option<usize>,
}

/// Effective run configuration after merging flags over the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    input: PathBuf,
    format: CsvFormat,
    q: usize,
    tau: usize,
    lambdas: Vec<usize>,
    p_nominal: f64,
    correction: Correction,
    method: Method,
    n_shuffles: usize,
    seed: u64,
    out: PathBuf,
    export: Vec<ExportFormat>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    format: Option<String>,
    q: Option<usize>,
    tau: Option<usize>,
    lambdas: Option<String>,
    p: Option<f64>,
    correction: Option<String>,
    method: Option<String>,
    shuffles: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    export: Option<String>,
}

fn usage_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument { msg: msg.into() }
}

fn parse_lambdas(text: &str) -> Result<Vec<usize>, Error> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.parse().map_err(|_| usage_err(format!("bad lag {part:?}")))?;
            let b: usize = b.parse().map_err(|_| usage_err(format!("bad lag {part:?}")))?;
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| usage_err(format!("bad lag {part:?}")))?);
        }
    }
    if out.is_empty() {
        return Err(usage_err("empty lag list"));
    }
    Ok(out)
}

fn parse_format(s: &str) -> Result<CsvFormat, Error> {
    match s {
        "wide" => Ok(CsvFormat::Wide),
        "long" => Ok(CsvFormat::Long),
        other => Err(usage_err(format!("unknown input format {other:?}"))),
    }
}

fn parse_correction(s: &str) -> Result<Correction, Error> {
    match s {
        "bonferroni" => Ok(Correction::Bonferroni),
        "fdr" => Ok(Correction::Fdr),
        "none" => Ok(Correction::None),
        other => Err(usage_err(format!("unknown correction {other:?}"))),
    }
}

fn parse_method(s: &str) -> Result<Method, Error> {
    match s {
        "gamma" => Ok(Method::Gamma),
        "shuffle" => Ok(Method::Shuffle),
        other => Err(usage_err(format!("unknown method {other:?}"))),
    }
}

impl AnalyzeArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let file: FileConfig = match &self.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                serde_json::from_str(&text).map_err(|e| usage_err(format!(
                    "bad config file {}: {e}",
                    path.display()
                )))?
            }
        };
        let input = self
            .input
            .clone()
            .or(file.input)
            .ok_or_else(|| usage_err("--input is required"))?;
        let format = parse_format(
            self.format
                .as_deref()
                .or(file.format.as_deref())
                .unwrap_or("wide"),
        )?;
        let lambdas = parse_lambdas(
            self.lambdas
                .as_deref()
                .or(file.lambdas.as_deref())
                .unwrap_or("0..10"),
        )?;
        let export = self
            .export
            .as_deref()
            .or(file.export.as_deref())
            .unwrap_or("json")
            .split(',')
            .map(|s| s.trim().parse::<ExportFormat>())
            .collect::<Result<Vec<_>, _>>()?;
        let p_nominal = self.p.or(file.p).unwrap_or(0.01);
        if !(0.0 < p_nominal && p_nominal < 1.0) {
            return Err(usage_err(format!("p={p_nominal} must be in (0,1)")));
        }
        Ok(RunConfig {
            input,
            format,
            q: self.q.or(file.q).unwrap_or(4),
            tau: self.tau.or(file.tau).unwrap_or(1),
            lambdas,
            p_nominal,
            correction: parse_correction(
                self.correction
                    .as_deref()
                    .or(file.correction.as_deref())
                    .unwrap_or("bonferroni"),
            )?,
            method: parse_method(
                self.method
                    .as_deref()
                    .or(file.method.as_deref())
                    .unwrap_or("gamma"),
            )?,
            n_shuffles: self.shuffles.or(file.shuffles).unwrap_or(10_000),
            seed: self.seed.or(file.seed).unwrap_or(0),
            out: self.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            export,
        })
    }
}

fn config_hash(cfg: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(cfg).expect("config serializes"));
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn load_returns(cfg: &RunConfig) -> Result<ReturnMatrix, Error> {
    let ingested = marketdata::ingest_csv(&cfg.input, cfg.format)?;
    if !ingested.dropped.is_empty() {
        eprintln!(
            "warning: dropped symbols with incomplete data: {}",
            ingested.dropped.join(", ")
        );
    }
    marketdata::log_returns(&ingested.matrix, cfg.tau)
}

#[derive(Serialize)]
struct RunReport {
    tool_version: String,
    seed: u64,
    config_hash: String,
    config: RunConfig,
    n_assets: usize,
    n_return_rows: usize,
    per_lambda: Vec<LambdaReport>,
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct LambdaReport {
    lambda: usize,
    t_rows: usize,
    corrected_threshold: Option<f64>,
    edge_count_bonferroni: usize,
    edge_count_fdr: usize,
    edge_count_selected: usize,
}

fn cmd_analyze(cfg: &RunConfig) -> Result<(), Error> {
    let started = Instant::now();
    let r = load_returns(cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(cfg.out.display().to_string(), e))?;

    let mut per_lambda = Vec::new();
    let mut score_rows: Vec<inference::PairScore> = Vec::new();
    for &lambda in &cfg.lambdas {
        let score_cfg = ScoreConfig {
            q: cfg.q,
            method: cfg.method,
            n_shuffles: cfg.n_shuffles,
            seed: cfg.seed.wrapping_add(lambda as u64),
        };
        let scores = match inference::score_pairs(&r, lambda, &score_cfg) {
            Ok(s) => s,
            Err(Error::EmptyLaggedPair { .. }) => {
                eprintln!("warning: lag {lambda} infeasible for this data, skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        let pair = marketdata::build_lagged_pair(&r, lambda)?;
        let n_tests = TestCount::NSquared;
        let bonf = inference::validate_links(
            &r.symbols,
            &scores,
            cfg.p_nominal,
            Correction::Bonferroni,
            n_tests,
            lambda,
        );
        let fdr = inference::validate_links(
            &r.symbols,
            &scores,
            cfg.p_nominal,
            Correction::Fdr,
            n_tests,
            lambda,
        );
        if !inference::is_subnetwork(&bonf, &fdr)? {
            return Err(Error::Numerical {
                msg: "Bonferroni network escaped the FDR network".into(),
            });
        }
        let selected = match cfg.correction {
            Correction::Bonferroni => &bonf,
            Correction::Fdr => &fdr,
            Correction::None => &fdr,
        };
        for fmt in &cfg.export {
            let path = cfg.out.join(format!(
                "network_lambda{lambda:03}_{}.{}",
                selected.correction,
                fmt.extension()
            ));
            export::export_network(selected, *fmt, &path)?;
        }
        let corrected_threshold = match cfg.method {
            Method::Gamma => Some(inference::bonferroni_threshold(
                cfg.p_nominal,
                n_tests.count(r.symbols.len()),
            )),
            Method::Shuffle => None,
        };
        per_lambda.push(LambdaReport {
            lambda,
            t_rows: pair.rows(),
            corrected_threshold,
            edge_count_bonferroni: bonf.edges.len(),
            edge_count_fdr: fdr.edges.len(),
            edge_count_selected: selected.edges.len(),
        });
        score_rows.extend(scores);
    }

    let mut wtr = csv::Writer::from_path(cfg.out.join("pair_scores.csv"))
        .map_err(|e| usage_err(format!("cannot write pair_scores.csv: {e}")))?;
    wtr.write_record(["from", "to", "lambda", "statistic", "p_value"])
        .and_then(|_| {
            score_rows.iter().try_for_each(|s| {
                wtr.write_record([
                    s.from.as_str(),
                    s.to.as_str(),
                    &s.lambda.to_string(),
                    &format!("{:e}", s.statistic),
                    &format!("{:e}", s.p_value),
                ])
            })
        })
        .map_err(|e| usage_err(format!("cannot write pair_scores.csv: {e}")))?;

    let report = RunReport {
        tool_version: VERSION.to_string(),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        n_assets: r.symbols.len(),
        n_return_rows: r.returns.nrows(),
        per_lambda,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    let report_path = cfg.out.join("run_report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    println!(
        "analyzed {} assets across {} lags; report at {}",
        r.symbols.len(),
        report.per_lambda.len(),
        report_path.display()
    );
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<(), Error> {
    let r = load_returns(cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(cfg.out.display().to_string(), e))?;
    let sweep = inference::lag_sweep(
        &r,
        &cfg.lambdas,
        &SweepConfig {
            q: cfg.q,
            p_nominal: cfg.p_nominal,
            method: cfg.method,
            n_shuffles: cfg.n_shuffles,
            seed: cfg.seed,
            test_count: TestCount::NSquared,
        },
    )?;
    for &lambda in &sweep.skipped {
        eprintln!("warning: lag {lambda} infeasible for this data, skipped");
    }
    let path = cfg.out.join("lag_sweep.csv");
    let mut out = String::from("lambda,count_bonferroni,count_fdr\n");
    for i in 0..sweep.lambdas.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            sweep.lambdas[i], sweep.count_bonferroni[i], sweep.count_fdr[i]
        ));
    }
    std::fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!("sweep written to {}", path.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| Error::io(args.spec.display().to_string(), e))?;
    let spec: synth::SynthSpec = serde_json::from_str(&text)
        .map_err(|e| usage_err(format!("bad synth spec: {e}")))?;
    let (prices, truth) = synth::gen_coupled(&spec)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;

    let csv_path = args.out.join("prices.csv");
    let mut out = String::from("timestamp,day");
    for s in &prices.symbols {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for row in 0..prices.timestamps.len() {
        out.push_str(&prices.timestamps[row]);
        out.push(',');
        out.push_str(&prices.day_index[row].to_string());
        for c in 0..prices.symbols.len() {
            out.push_str(&format!(",{:e}", prices.prices[[row, c]]));
        }
        out.push('\n');
    }
    std::fs::write(&csv_path, out).map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    let truth_path = args.out.join("ground_truth.json");
    std::fs::write(
        &truth_path,
        serde_json::to_string_pretty(&truth).expect("truth serializes"),
    )
    .map_err(|e| Error::io(truth_path.display().to_string(), e))?;
    println!(
        "wrote {} and {}",
        csv_path.display(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let lambda = args.lambda.unwrap_or(1);
    let n_permutations = args.permutations.unwrap_or(1000);
    let r = load_returns(&cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(cfg.out.display().to_string(), e))?;

    let scores = inference::score_pairs(
        &r,
        lambda,
        &ScoreConfig {
            q: cfg.q,
            method: cfg.method,
            n_shuffles: cfg.n_shuffles,
            seed: cfg.seed,
        },
    )?;
    let net = inference::validate_links(
        &r.symbols,
        &scores,
        cfg.p_nominal,
        cfg.correction,
        TestCount::NSquared,
        lambda,
    );
    let validated = net.edge_set();

    // per-series entropy rate over the whole symbolized return series
    let sym = symbolize_matrix(r.returns.view(), cfg.q)?;
    let rate: Vec<f64> = sym
        .columns
        .iter()
        .map(|c| lz_entropy_rate(c).map(|e| e.value))
        .collect::<Result<_, _>>()?;
    let index: std::collections::HashMap<&str, usize> = r
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut group_validated = Vec::new();
    let mut group_rest = Vec::new();
    for s in &scores {
        if s.from == s.to {
            continue;
        }
        let avg = 0.5 * (rate[index[s.from.as_str()]] + rate[index[s.to.as_str()]]);
        if validated.contains(&(s.from.clone(), s.to.clone())) {
            group_validated.push(avg);
        } else {
            group_rest.push(avg);
        }
    }
    let comparison = analysis::compare_groups(
        &group_validated,
        &group_rest,
        Bandwidth::Auto,
        n_permutations,
        cfg.seed,
    )?;

    let csv_path = cfg.out.join(format!("entropy_rate_lambda{lambda:03}.csv"));
    let mut out = String::from("grid,density_validated,density_nonvalidated,band_lo,band_hi\n");
    for i in 0..comparison.grid.len() {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e}\n",
            comparison.grid[i],
            comparison.kde_a[i],
            comparison.kde_b[i],
            comparison.band_lo[i],
            comparison.band_hi[i]
        ));
    }
    std::fs::write(&csv_path, out).map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    let summary = serde_json::json!({
        "lambda": lambda,
        "perm_p": comparison.perm_p,
        "n_permutations": comparison.n_permutations,
        "seed": comparison.seed,
        "n_validated_pairs": comparison.group_a.len(),
        "n_nonvalidated_pairs": comparison.group_b.len(),
        "mean_validated": comparison.group_a.iter().sum::<f64>() / comparison.group_a.len().max(1) as f64,
        "mean_nonvalidated": comparison.group_b.iter().sum::<f64>() / comparison.group_b.len().max(1) as f64,
    });
    let json_path = cfg.out.join(format!("entropy_rate_lambda{lambda:03}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap())
        .map_err(|e| Error::io(json_path.display().to_string(), e))?;
    println!(
        "comparison written to {} (perm_p = {:.4})",
        csv_path.display(),
        comparison.perm_p
    );
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::NonPositivePrice { .. }
        | Error::DuplicateEntry { .. }
        | Error::EmptyInput
        | Error::InvalidSpec { .. }
        | Error::InvalidArgument { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => args.resolve().and_then(|cfg| cmd_analyze(&cfg)),
        Command::Sweep(args) => args.resolve().and_then(|cfg| cmd_sweep(&cfg)),
        Command::Synth(args) => cmd_synth(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
