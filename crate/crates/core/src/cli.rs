//! Command-line front end: `fit`, `select` and `simulate`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::criteria::oos_mse;
use crate::data::{apply_scaler, fit_scaler, load_bundled, load_csv, split, CsvLoad, Dataset};
use crate::error::{Error, Result};
use crate::model::Architecture;
use crate::report::{fmt_f64, render_simulation, ModelReport, RunReport};
use crate::selector::{candidate_seed, Objective, SelectionConfig, Selector, Strategy};
use crate::simlab::{run_replicates, CovariateLaw, SimulationConfig, TrueModelSpec};
use crate::seed;
use crate::trainer::{fit, FitConfig};

#[derive(Debug, Parser)]
#[command(name = "fnnsel", version, about = "Model selection for single-hidden-layer neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one fixed architecture.
    Fit(FitArgs),
    /// Select inputs and hidden nodes, then compare with the full model.
    Select(SelectArgs),
    /// Run the recovery simulation on synthetic data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub data: Option<PathBuf>,
    /// Bundled dataset instead of a file.
    #[arg(long, value_parser = ["boston", "red-wine"])]
    pub dataset: Option<String>,
    /// Response column (bundled datasets have a default).
    #[arg(long)]
    pub response: Option<String>,
    /// Share of rows held out as a test set; 0 disables the split.
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FitterArgs {
    #[arg(long, default_value_t = 10)]
    pub n_init: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 0.7)]
    pub init_range: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 uses every core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 10)]
    pub q_max: usize,
    #[arg(long, default_value = "bic")]
    pub objective: Objective,
    #[arg(long, default_value = "hif")]
    pub strategy: Strategy,
    /// Validation rows as a fraction of training rows (OOS objective only).
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Hidden nodes during the input phase of `ihf`/`ih` (default: q_max).
    #[arg(long)]
    pub input_first_q: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated covariate names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub inputs: Vec<String>,
    /// Hidden nodes.
    #[arg(long)]
    pub q: usize,
    #[command(flatten)]
    pub fitter: FitterArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub fitter: FitterArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the selection trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Covariates {
    Normal,
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Training rows per replicate.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub fitter: FitterArgs,
    #[arg(long, default_value_t = 3)]
    pub p_important: usize,
    #[arg(long, default_value_t = 10)]
    pub p_noise: usize,
    #[arg(long, default_value_t = 3)]
    pub q_true: usize,
    #[arg(long, default_value_t = 0.7)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    pub weight_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub weight_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bias_range: f64,
    #[arg(long, value_enum, default_value_t = Covariates::Normal)]
    pub covariates: Covariates,
    #[arg(long, default_value_t = 0.7)]
    pub max_cosine: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Result of a command: the report text plus where it should go.
#[derive(Debug, Clone)]
pub struct Output {
    pub report: String,
    pub out: Option<PathBuf>,
}

impl FitterArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            n_init: self.n_init,
            max_iterations: self.max_iter,
            gradient_tolerance: self.grad_tol,
            init_range: self.init_range,
            seed: self.seed,
        }
    }

    fn echo(&self, out: &mut Vec<(String, String)>) {
        push(out, "n_init", self.n_init);
        push(out, "max_iter", self.max_iter);
        push(out, "grad_tol", fmt_f64(self.grad_tol));
        push(out, "init_range", fmt_f64(self.init_range));
        push(out, "seed", self.seed);
    }
}

impl SearchArgs {
    fn config(&self, fit_config: FitConfig) -> SelectionConfig {
        SelectionConfig {
            q_max: self.q_max,
            objective: self.objective,
            strategy: self.strategy,
            fit_config,
            validation_fraction: self.val_fraction,
            input_first_q: self.input_first_q,
        }
    }

    fn echo(&self, out: &mut Vec<(String, String)>) {
        push(out, "q_max", self.q_max);
        push(out, "objective", self.objective);
        push(out, "strategy", self.strategy);
        push(out, "val_fraction", fmt_f64(self.val_fraction));
        push(out, "input_first_q", self.input_first_q.unwrap_or(self.q_max));
    }
}

fn push(out: &mut Vec<(String, String)>, key: &str, value: impl ToString) {
    out.push((key.to_string(), value.to_string()));
}

/// Loaded, split and rescaled data for `fit` and `select`.
struct Prepared {
    train: Dataset,
    test: Option<Dataset>,
    echo: Vec<(String, String)>,
}

/// Seed of the train/test split for a run seeded with `seed`.
pub fn split_seed(seed: u64) -> u64 {
    seed::derive(seed, &[seed::SPLIT])
}

fn prepare(args: &DataArgs, seed: u64) -> Result<Prepared> {
    let mut echo = Vec::new();
    let CsvLoad { dataset, rows_read, rows_rejected } = match (&args.data, &args.dataset) {
        (Some(path), _) => {
            let response = args
                .response
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("--response is required with --data".into()))?;
            push(&mut echo, "data", path.display());
            load_csv(path, response)?
        }
        (None, Some(name)) => {
            push(&mut echo, "dataset", name);
            let load = load_bundled(name)?;
            match &args.response {
                Some(r) if r != load.dataset.response_name() => {
                    return Err(Error::InvalidConfig(format!(
                        "bundled dataset `{name}` has response `{}`",
                        load.dataset.response_name()
                    )))
                }
                _ => load,
            }
        }
        (None, None) => return Err(Error::InvalidConfig("either --data or --dataset is required".into())),
    };
    push(&mut echo, "response", dataset.response_name());
    push(&mut echo, "rows_read", rows_read);
    push(&mut echo, "rows_rejected", rows_rejected);
    push(&mut echo, "test_fraction", fmt_f64(args.test_fraction));

    let (train, test) = if args.test_fraction == 0.0 {
        (dataset, None)
    } else {
        let (train, test) = split(&dataset, args.test_fraction, split_seed(seed))?;
        (train, Some(test))
    };
    let scaler = fit_scaler(&train)?;
    let train = apply_scaler(&scaler, &train)?;
    let test = test.map(|t| apply_scaler(&scaler, &t)).transpose()?;
    push(&mut echo, "n_train", train.n());
    push(&mut echo, "n_test", test.as_ref().map_or(0, Dataset::n));
    Ok(Prepared { train, test, echo })
}

fn test_mse(model: &crate::trainer::FittedModel, test: Option<&Dataset>) -> Result<Option<f64>> {
    test.map(|t| oos_mse(model, t)).transpose()
}

pub fn cmd_fit(args: &FitArgs) -> Result<RunReport> {
    let started = Instant::now();
    let prepared = prepare(&args.data, args.fitter.seed)?;
    let names = prepared.train.covariate_names().to_vec();
    let inputs = args
        .inputs
        .iter()
        .map(|name| {
            prepared
                .train
                .covariate_index(name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let arch = Architecture::new(inputs, args.q)?;

    let mut config = prepared.echo;
    push(&mut config, "inputs", args.inputs.join(","));
    push(&mut config, "q", args.q);
    args.fitter.echo(&mut config);

    // same stream as the selector uses for this architecture
    let fit_config = args.fitter.config().with_seed(candidate_seed(args.fitter.seed, &arch));
    let model = fit(&arch, &prepared.train, &fit_config)?;
    let test = test_mse(&model, prepared.test.as_ref())?;
    Ok(RunReport {
        command: "fit".into(),
        config,
        selected: ModelReport::new(&model, &names, None, test),
        full: None,
        trace: None,
        covariate_names: names,
        fits: None,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

pub fn cmd_select(args: &SelectArgs) -> Result<RunReport> {
    let started = Instant::now();
    let prepared = prepare(&args.data, args.fitter.seed)?;
    let names = prepared.train.covariate_names().to_vec();
    let selection = args.search.config(args.fitter.config());

    let mut config = prepared.echo;
    args.search.echo(&mut config);
    args.fitter.echo(&mut config);

    let mut selector = Selector::new(&prepared.train, selection)?;
    let full_arch = Architecture::full(prepared.train.p(), selection.q_max)?;
    let full = selector.candidate(&full_arch)?;
    let outcome = selector.run()?;

    let test = prepared.test.as_ref();
    let selected = ModelReport::new(&outcome.model, &names, Some(outcome.objective), test_mse(&outcome.model, test)?);
    let full = ModelReport::new(&full.model, &names, Some(full.objective), test_mse(&full.model, test)?);
    Ok(RunReport {
        command: "select".into(),
        config,
        selected,
        full: Some(full),
        trace: Some(outcome.trace),
        covariate_names: names,
        fits: Some(outcome.fits),
        wall_time: started.elapsed().as_secs_f64(),
    })
}

impl SimulateArgs {
    pub fn config(&self) -> SimulationConfig {
        SimulationConfig {
            n: self.n,
            replicates: self.replicates,
            seed: self.fitter.seed,
            generator: TrueModelSpec {
                p_important: self.p_important,
                p_noise: self.p_noise,
                q_true: self.q_true,
                weight_min: self.weight_min,
                weight_max: self.weight_max,
                bias_range: self.bias_range,
                noise_sd: self.noise_sd,
                covariates: match self.covariates {
                    Covariates::Normal => CovariateLaw::StandardNormal,
                    Covariates::Uniform => CovariateLaw::Uniform01,
                },
                max_direction_cosine: self.max_cosine,
            },
            selection: self.search.config(self.fitter.config()),
        }
    }

    fn echo(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        push(&mut out, "n", self.n);
        push(&mut out, "replicates", self.replicates);
        push(&mut out, "p_important", self.p_important);
        push(&mut out, "p_noise", self.p_noise);
        push(&mut out, "q_true", self.q_true);
        push(&mut out, "noise_sd", fmt_f64(self.noise_sd));
        push(&mut out, "weight_min", fmt_f64(self.weight_min));
        push(&mut out, "weight_max", fmt_f64(self.weight_max));
        push(&mut out, "bias_range", fmt_f64(self.bias_range));
        push(&mut out, "covariates", format!("{:?}", self.covariates).to_lowercase());
        push(&mut out, "max_cosine", fmt_f64(self.max_cosine));
        self.search.echo(&mut out);
        self.fitter.echo(&mut out);
        out
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let report = run_replicates(&args.config())?;
    render_simulation(&report, &args.echo())
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs a parsed command and returns the rendered report. Side files
/// (`--trace-csv`) are written here; the report itself is left to the caller.
pub fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Fit(a) => {
            let report = with_threads(a.output.threads, || cmd_fit(a))??;
            Ok(Output { report: report.render()?, out: a.output.out.clone() })
        }
        Command::Select(a) => {
            let report = with_threads(a.output.threads, || cmd_select(a))??;
            if let Some(path) = &a.trace_csv {
                report.write_trace_csv(path)?;
            }
            Ok(Output { report: report.render()?, out: a.output.out.clone() })
        }
        Command::Simulate(a) => {
            let report = with_threads(a.output.threads, || cmd_simulate(a))??;
            Ok(Output { report, out: a.output.out.clone() })
        }
    }
}
