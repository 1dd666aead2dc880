use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use unseen_core::benchmark::{
    est_reference, estimate_row, run_suite, synthetic_reference, synthetic_regenerated, write_csv,
    BenchmarkInput, BenchmarkRow, EstimateConfig, GridPoint, MGrid, Methods, DEFAULT_MC_SAMPLES,
    REFERENCE_EST,
};
use unseen_core::datasets::{
    export, generate, generate_with_blocks, ingest, DatasetSpec, IngestMode,
};
use unseen_core::empirical_bayes::{fit_empirical_bayes, FitOptions, FitResult};
use unseen_core::model::{posterior_pmf_closed, posterior_pmf_dp, PyParams, SampleSummary};
use unseen_core::{Error, RngStream};

const EXIT_USAGE: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "unseen",
    version,
    about = "Pitman-Yor estimates of the number of unseen species"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Labels,
    LabelCount,
}

impl From<Mode> for IngestMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Labels => IngestMode::Labels,
            Mode::LabelCount => IngestMode::LabelCount,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Synthetic,
    Est,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamSource {
    /// Refit (alpha, theta) on each dataset.
    Fitted,
    /// Use the built-in reference (n, j, alpha, theta) table.
    Reference,
}

#[derive(Clone, Copy, ValueEnum)]
enum PmfMethod {
    Dp,
    Closed,
}

#[derive(Args, Clone)]
struct Posterior {
    /// Observed sample size.
    #[arg(long)]
    n: u64,
    /// Distinct species observed.
    #[arg(long)]
    j: u64,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical-Bayes fit of (alpha, theta) to a frequency file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "label-count")]
        mode: Mode,
        #[arg(long, default_value_t = 0.01)]
        alpha_step: f64,
        #[arg(long, default_value_t = 1e6)]
        theta_max: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Point estimate and credible intervals for each follow-up size.
    Estimate {
        #[command(flatten)]
        post: Posterior,
        /// Comma-separated follow-up sizes; `Kn` means K times n.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<String>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = "exact,ml,gaussian")]
        methods: String,
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Interval table over a grid of follow-up sizes for a whole suite.
    Benchmark {
        #[arg(long, value_enum)]
        suite: Suite,
        /// `LO..HI/POINTS` mesh or a comma-separated list, e.g. `n,2n,10n`.
        #[arg(long, default_value = "0..5n/50")]
        m_grid: String,
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = "exact,ml,gaussian")]
        methods: String,
        #[arg(long, value_enum, default_value = "fitted")]
        params: ParamSource,
        /// Frequency files (label_count) for the est suite.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior pmf of the number of new species.
    Pmf {
        #[command(flatten)]
        post: Posterior,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "dp")]
        method: PmfMethod,
    },
    /// Writes a synthetic frequency file in label_count format.
    Generate {
        /// One of A, B, C, D, or an EST stand-in name.
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DegenerateSample { .. } => EXIT_DEGENERATE,
        Error::NumericalIntegrity(_) | Error::NonConvergence(_) => 1,
        _ => EXIT_USAGE,
    }
}

fn fit_json(fit: &FitResult) -> serde_json::Value {
    json!({
        "alpha": fit.alpha_hat,
        "theta": fit.theta_hat,
        "loglik": fit.log_likelihood,
        "flags": fit.flags,
    })
}

fn print_fit(fit: &FitResult, format: Format) {
    match format {
        Format::Json => println!("{}", fit_json(fit)),
        Format::Csv => {
            let flags: Vec<String> = fit.flags.iter().map(ToString::to_string).collect();
            println!("alpha,theta,loglik,flags");
            println!(
                "{},{},{},{}",
                fit.alpha_hat,
                fit.theta_hat,
                fit.log_likelihood,
                flags.join(";")
            );
        }
    }
}

fn run_fit(
    input: PathBuf,
    mode: Mode,
    alpha_step: f64,
    theta_max: f64,
    format: Format,
) -> Result<(), Error> {
    let sample = ingest(&input, mode.into())?;
    let options = FitOptions {
        alpha_step,
        theta_max,
        ..FitOptions::default()
    };
    match fit_empirical_bayes(&sample, &options) {
        Ok(fit) => {
            print_fit(&fit, format);
            Ok(())
        }
        Err(Error::DegenerateSample { reason, fit }) => {
            if let Some(fit) = &fit {
                print_fit(fit, format);
            }
            Err(Error::DegenerateSample { reason, fit })
        }
        Err(e) => Err(e),
    }
}

fn posterior(p: &Posterior) -> Result<(PyParams, SampleSummary), Error> {
    Ok((
        PyParams::new(p.alpha, p.theta)?,
        SampleSummary::from_counts(p.n, p.j)?,
    ))
}

fn emit_rows(rows: &[BenchmarkRow], format: Format, out: impl Write) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(rows, out),
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(io::Error::other)?;
            writeln!(out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_estimate(
    post: Posterior,
    m: Vec<String>,
    level: f64,
    methods: String,
    samples: usize,
    seed: u64,
    format: Format,
) -> Result<(), Error> {
    let (params, sample) = posterior(&post)?;
    let config = EstimateConfig {
        level,
        methods: methods.parse::<Methods>()?,
        samples,
    };
    let ms = m
        .iter()
        .map(|s| s.parse::<GridPoint>())
        .collect::<Result<Vec<_>, _>>()?;
    let ms = MGrid::List(ms).resolve(sample.n());
    let mut rows = Vec::with_capacity(ms.len());
    let mut draws = 0;
    for (i, &m) in ms.iter().enumerate() {
        let mut rng = RngStream::new(seed, i as u64);
        let row = estimate_row("input", &params, &sample, m, &config, &mut rng)?;
        draws += rng.draws();
        for note in &row.notes {
            eprintln!("m = {m}: {note}");
        }
        rows.push(row);
    }
    emit_rows(&rows, format, io::stdout().lock())?;
    eprintln!("rng draws: {draws}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_benchmark(
    suite: Suite,
    m_grid: String,
    samples: usize,
    seed: u64,
    level: f64,
    methods: String,
    params: ParamSource,
    inputs: Vec<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let grid: MGrid = m_grid.parse()?;
    let config = EstimateConfig {
        level,
        methods: methods.parse()?,
        samples,
    };
    let options = FitOptions::default();
    let datasets: Vec<BenchmarkInput> = match (suite, params) {
        (Suite::Synthetic, ParamSource::Reference) => synthetic_reference(),
        (Suite::Synthetic, ParamSource::Fitted) => synthetic_regenerated(seed, &options)?,
        (Suite::Est, ParamSource::Reference) => est_reference(),
        (Suite::Est, ParamSource::Fitted) => {
            if inputs.is_empty() {
                return Err(Error::Domain(
                    "the est suite needs frequency files (--input PATH, repeatable)".into(),
                ));
            }
            inputs
                .iter()
                .map(|path| {
                    let id = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| path.display().to_string());
                    BenchmarkInput::fitted(id, ingest(path, IngestMode::LabelCount)?, &options)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let (rows, draws) = run_suite(&datasets, &grid, &config, seed)?;
    match out {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(path)?))?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    eprintln!("{} rows, rng draws: {draws}", rows.len());
    Ok(())
}

fn run_pmf(post: Posterior, m: usize, method: PmfMethod) -> Result<(), Error> {
    let (params, sample) = posterior(&post)?;
    let pmf = match method {
        PmfMethod::Dp => posterior_pmf_dp(&params, &sample, m)?,
        PmfMethod::Closed => posterior_pmf_closed(&params, &sample, m)?,
    };
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "k,prob")?;
    for (k, p) in pmf.probs().iter().enumerate() {
        writeln!(out, "{k},{p:e}")?;
    }
    out.flush()?;
    Ok(())
}

fn run_generate(dataset: String, seed: u64, out: PathBuf) -> Result<(), Error> {
    let sample = if let Some(spec) = DatasetSpec::preset(&dataset, seed) {
        generate(&spec)?
    } else if let Some(&(_, n, j, alpha, theta)) = REFERENCE_EST.iter().find(|r| r.0 == dataset) {
        let params = PyParams::new(alpha, theta)?;
        generate_with_blocks(&params, n, j, 1_000_000, &mut RngStream::new(seed, 0))?
    } else {
        let est: Vec<&str> = REFERENCE_EST.iter().map(|r| r.0).collect();
        return Err(Error::Domain(format!(
            "unknown dataset {dataset:?}; expected A, B, C, D or one of {}",
            est.join(", ")
        )));
    };
    export(&sample, &out)?;
    eprintln!("n = {}, j = {}", sample.n(), sample.j());
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("UNSEEN_THREADS") {
        let threads: usize = v
            .parse()
            .map_err(|_| Error::Domain(format!("UNSEEN_THREADS = {v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Domain(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match cli.command {
        Command::Fit {
            input,
            mode,
            alpha_step,
            theta_max,
            format,
        } => run_fit(input, mode, alpha_step, theta_max, format),
        Command::Estimate {
            post,
            m,
            level,
            methods,
            samples,
            seed,
            format,
        } => run_estimate(post, m, level, methods, samples, seed, format),
        Command::Benchmark {
            suite,
            m_grid,
            samples,
            seed,
            level,
            methods,
            params,
            inputs,
            out,
        } => run_benchmark(
            suite, m_grid, samples, seed, level, methods, params, inputs, out,
        ),
        Command::Pmf { post, m, method } => run_pmf(post, m, method),
        Command::Generate { dataset, seed, out } => run_generate(dataset, seed, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
