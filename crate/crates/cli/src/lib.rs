//! Command-line front end: `fit`, `simulate` and `evaluate`.
//!
//! Exit codes: 0 success, 2 I/O or parse failure, 3 every candidate failed,
//! 64 usage error.

pub mod config;
pub mod io;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use bicluster::metrics::adjusted_rand_index;
use bicluster::selection::{enumerate_candidates, model_search, split_seed};
use bicluster::simulation::{generate_study1, generate_study2};
use bicluster::{assemble_covariance, Error, PartitionStrategy, SearchReport};
use clap::{Args, Parser, Subcommand};

use config::{ConfigFile, ModelList, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Search(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Io(_) => 2,
            CliError::Search(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "error: {m}"),
            CliError::Search(m) => write!(f, "search failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "bicluster", version, about = "Block-diagonal Gaussian mixture biclustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a grid of models to a CSV file and rank them by BIC.
    Fit(FitArgs),
    /// Write replicate datasets from one of the two built-in designs.
    Simulate(SimulateArgs),
    /// Print the adjusted Rand index between two label files.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TOML file with any of the keys below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `all` or a comma-separated list of model codes.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub q_min: Option<usize>,
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Maximum number of candidates.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Scale every column to mean 0 and unit variance.
    #[arg(long)]
    pub standardize: bool,
    /// Fit the fixed-T family (`T = I`) with three-letter codes.
    #[arg(long)]
    pub legacy: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum InitArg {
    Kmeans,
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub study: u8,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub replicates: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub labels_a: PathBuf,
    pub labels_b: PathBuf,
}

impl FitArgs {
    fn flags(&self) -> ConfigFile {
        ConfigFile {
            input: self.input.clone(),
            output: self.output.clone(),
            standardize: self.standardize.then_some(true),
            legacy: self.legacy.then_some(true),
            models: self.models.as_deref().map(ModelList::from_flag),
            k_min: self.k_min,
            k_max: self.k_max,
            q_min: self.q_min,
            q_max: self.q_max,
            cap: self.cap,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            restarts: self.restarts,
            init: self.init.map(|i| match i {
                InitArg::Kmeans => PartitionStrategy::Kmeans,
                InitArg::Random => PartitionStrategy::Random,
            }),
            seed: self.seed,
            workers: self.workers,
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        RunConfig::resolve(self.flags().over(file))
    }
}

/// Result of a `fit` run, with the rendered report.
pub struct FitOutcome {
    pub search: SearchReport<f64>,
    pub report_json: String,
}

/// Runs the search and writes every artifact into `cfg.output`.
pub fn run_fit(cfg: &RunConfig) -> Result<FitOutcome, CliError> {
    let data = io::read_data(&cfg.input, cfg.standardize)?;
    let ks: Vec<usize> = (cfg.k_range.0..=cfg.k_range.1).collect();
    let qs: Vec<usize> = (cfg.q_range.0..=cfg.q_range.1).collect();
    let candidates = enumerate_candidates(&cfg.models, &ks, &qs, data.p(), cfg.cap, cfg.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let search = match model_search(&data, &candidates, &cfg.controls) {
        Ok(s) => s,
        Err(Error::SearchFailed(reasons)) => {
            let lines: Vec<String> = reasons.iter().map(|(c, r)| format!("  {c}: {r}")).collect();
            return Err(CliError::Search(format!("every candidate failed\n{}", lines.join("\n"))));
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let columns = io::column_names(&data);
    let report = report::build(cfg, columns.clone(), data.n(), candidates.len(), &search);
    let mut report_json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    report_json.push('\n');

    std::fs::create_dir_all(&cfg.output).map_err(|e| CliError::Io(format!("{}: {e}", cfg.output.display())))?;
    let out = |name: &str| cfg.output.join(name);
    let best = search.best().expect("non-empty ranking");
    io::write_atomic(&out("report.json"), report_json.as_bytes())?;

    let rows = best
        .fit
        .row_labels
        .iter()
        .enumerate()
        .map(|(i, l)| vec![io::row_name(&data, i), (l + 1).to_string()]);
    io::write_atomic(&out("row_labels.csv"), &io::csv_bytes(&strings(&["id", "label"]), rows)?)?;

    let trace = best
        .fit
        .loglik_trace
        .iter()
        .enumerate()
        .map(|(i, ll)| vec![(i + 1).to_string(), ll.to_string()]);
    io::write_atomic(&out("loglik_trace.csv"), &io::csv_bytes(&strings(&["iteration", "loglik"]), trace)?)?;

    for (k, comp) in best.fit.params.components.iter().enumerate() {
        let cols = columns
            .iter()
            .zip(comp.columns.as_slice())
            .map(|(name, j)| vec![name.clone(), (j + 1).to_string()]);
        io::write_atomic(
            &out(&format!("col_labels_k{}.csv", k + 1)),
            &io::csv_bytes(&strings(&["variable", "cluster"]), cols)?,
        )?;
        let sigma = assemble_covariance(&comp.columns, &comp.t, &comp.d).map_err(|e| CliError::Io(e.to_string()))?;
        let mut header = vec!["variable".to_string()];
        header.extend(columns.iter().cloned());
        let rows = sigma.iter().zip(&columns).map(|(row, name)| {
            let mut r = vec![name.clone()];
            r.extend(row.iter().map(|x| x.to_string()));
            r
        });
        io::write_atomic(&out(&format!("heatmap_sigma_k{}.csv", k + 1)), &io::csv_bytes(&header, rows)?)?;
    }
    Ok(FitOutcome { search, report_json })
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Writes `rep<i>_data.csv` and `rep<i>_truth.csv` for `i = 1..=replicates`.
pub fn run_simulate(study: u8, replicates: u32, seed: u64, output: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(output).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
    let mut written = Vec::new();
    for rep in 1..=replicates {
        let rep_seed = split_seed(seed, &format!("study{study}/rep{rep}"));
        let ds = match study {
            1 => generate_study1::<f64>(rep_seed),
            2 => generate_study2::<f64>(rep_seed),
            other => return Err(CliError::Usage(format!("study must be 1 or 2, got {other}"))),
        };
        let data_path = output.join(format!("rep{rep}_data.csv"));
        io::write_atomic(&data_path, &io::data_csv(&ds.data)?)?;
        let truth_path = output.join(format!("rep{rep}_truth.csv"));
        let rows = ds
            .true_row_labels
            .iter()
            .enumerate()
            .map(|(i, l)| vec![(i + 1).to_string(), (l + 1).to_string()]);
        io::write_atomic(&truth_path, &io::csv_bytes(&strings(&["id", "label"]), rows)?)?;
        written.push(data_path);
        written.push(truth_path);
    }
    Ok(written)
}

/// ARI between two label files, formatted with four decimals.
pub fn run_evaluate(a: &Path, b: &Path) -> Result<String, CliError> {
    let la = io::read_labels(a)?;
    let lb = io::read_labels(b)?;
    if la.len() != lb.len() {
        return Err(CliError::Io(format!("label files have {} and {} entries", la.len(), lb.len())));
    }
    let ari = adjusted_rand_index(&la, &lb).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(format!("{ari:.4}"))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => {
            let cfg = args.resolve()?;
            let outcome = run_fit(&cfg)?;
            let best = outcome.search.best().expect("non-empty ranking");
            println!(
                "best: {} BIC {:.4} ({} fits, {} failed); wrote {}",
                best.candidate.encoding(),
                best.fit.bic,
                outcome.search.ranked.len(),
                outcome.search.failures.len(),
                cfg.output.display()
            );
            Ok(())
        }
        Command::Simulate(args) => {
            let files = run_simulate(args.study, args.replicates, args.seed, &args.output)?;
            println!("wrote {} files to {}", files.len(), args.output.display());
            Ok(())
        }
        Command::Evaluate(args) => {
            println!("{}", run_evaluate(&args.labels_a, &args.labels_b)?);
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
