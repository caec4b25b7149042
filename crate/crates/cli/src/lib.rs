//! Command implementations behind the `eb-fission` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use eb_fission::config::{ExperimentFile, Overrides};
use eb_fission::csvio::{fmt_f64, read_x_column};
use eb_fission::harness::{export_figure_data_with, write_table_csv};
use eb_fission::{
    fission_dataset, run_experiment, tau_from_info_split, Error, FissionConfig, FissionScheme,
    LikelihoodModel,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "eb-fission",
    version,
    about = "Empirical Bayes on data-fission replicates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo comparison of the configured estimators; writes table.csv and report.json.
    Simulate(SimulateArgs),
    /// One simulated dataset fissioned once; writes scatter.csv, curve.csv and fit.csv.
    FigureData(FigureArgs),
    /// Fission the `x` column of a CSV file into `x,f,g` rows.
    Fission(FissionArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub mc_reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Gaussian,
    Poisson,
}

impl From<SchemeArg> for FissionScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Gaussian => FissionScheme::GaussianAdditive,
            SchemeArg::Poisson => FissionScheme::PoissonThinning,
        }
    }
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[command(flatten)]
    pub common: Common,
    /// Share of Fisher information given to g, in (0,1).
    #[arg(long)]
    pub g_split: f64,
    /// Which configured likelihood to use; the first one when omitted.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

#[derive(Debug, Args)]
pub struct FissionArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long, conflicts_with = "g_split", required_unless_present = "g_split")]
    pub tau: Option<f64>,
    #[arg(long)]
    pub g_split: Option<f64>,
    /// Known observation variance for the Gaussian scheme.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub input_csv: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for fission.csv; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::FigureData(a) => cmd_figure_data(a),
        Command::Fission(a) => cmd_fission(a),
    }
}

fn load(common: &Common, ov: Overrides) -> Result<ExperimentFile, CliError> {
    let mut file = match &common.config {
        Some(p) => ExperimentFile::from_path(p)?,
        None => ExperimentFile::default(),
    };
    file.apply(&ov);
    file.experiments()?;
    Ok(file)
}

fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).map_err(io_err(&path))?))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let file = load(
        &args.common,
        Overrides {
            seed: args.common.seed,
            mc_reps: args.mc_reps,
        },
    )?;
    let experiments = file.experiments()?;
    let reports = with_pool(args.common.threads, || {
        experiments
            .iter()
            .map(|cfg| {
                let report = run_experiment(cfg)?;
                for rec in &report.reps {
                    eprintln!(
                        "{} rep {} seed {} dataset {:016x}",
                        cfg.likelihood.name(),
                        rec.rep,
                        rec.seed,
                        rec.dataset_checksum
                    );
                }
                for s in &report.estimators {
                    eprintln!(
                        "{:>8} {:<14} mse {:.4} (se {:.4})",
                        cfg.likelihood.name(),
                        s.label,
                        s.mean_mse,
                        s.se_mse
                    );
                }
                Ok(report)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let out = &args.common.out;
    let mut table = create(out, "table.csv")?;
    write_table_csv(&reports, &mut table)?;
    table.flush().map_err(io_err(out))?;

    let mut json = create(out, "report.json")?;
    serde_json::to_writer_pretty(&mut json, &reports)
        .map_err(|e| CliError::Runtime(format!("report.json: {e}")))?;
    json.flush().map_err(io_err(out))?;
    Ok(())
}

pub fn cmd_figure_data(args: &FigureArgs) -> Result<(), CliError> {
    let file = load(
        &args.common,
        Overrides {
            seed: args.common.seed,
            mc_reps: None,
        },
    )?;
    if !(args.g_split > 0.0 && args.g_split < 1.0) {
        return Err(CliError::Usage(format!(
            "--g-split {}: fraction outside (0,1)",
            args.g_split
        )));
    }
    let experiments = file.experiments()?;
    let cfg = match args.scheme {
        None => &experiments[0],
        Some(s) => experiments
            .iter()
            .find(|c| match c.likelihood {
                LikelihoodModel::Gaussian { .. } => s == SchemeArg::Gaussian,
                LikelihoodModel::Poisson => s == SchemeArg::Poisson,
            })
            .ok_or_else(|| CliError::Usage(format!("no {s:?} likelihood in the configuration")))?,
    };
    let opts = file.figure.into();
    let fig = with_pool(args.common.threads, || {
        Ok(export_figure_data_with(
            cfg,
            args.g_split,
            file.seed,
            &opts,
        )?)
    })?;

    let out = &args.common.out;
    let mut scatter = create(out, "scatter.csv")?;
    fig.write_scatter_csv(&mut scatter)?;
    scatter.flush().map_err(io_err(out))?;
    let mut curve = create(out, "curve.csv")?;
    fig.write_curve_csv(&mut curve)?;
    curve.flush().map_err(io_err(out))?;
    let mut fit = create(out, "fit.csv")?;
    fig.fit.write_csv(&mut fit)?;
    fit.flush().map_err(io_err(out))?;
    eprintln!(
        "{} tau {} ({} points, {} knots)",
        cfg.likelihood.name(),
        fig.fission.tau(),
        fig.samples.len(),
        fig.fit.knots().len()
    );
    Ok(())
}

pub fn cmd_fission(args: &FissionArgs) -> Result<(), CliError> {
    let scheme: FissionScheme = args.scheme.into();
    let tau = match (args.tau, args.g_split) {
        (Some(t), _) => t,
        (None, Some(g)) => tau_from_info_split(scheme, g)?,
        (None, None) => {
            return Err(CliError::Usage(
                "one of --tau or --g-split is required".into(),
            ))
        }
    };
    let cfg = match scheme {
        FissionScheme::GaussianAdditive => FissionConfig::gaussian(tau, args.sigma2)?,
        FissionScheme::PoissonThinning => FissionConfig::poisson(tau)?,
    };
    let input = File::open(&args.input_csv)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.input_csv.display())))?;
    let xs = read_x_column(input)?;
    for (i, &x) in xs.iter().enumerate() {
        cfg.check_observation(x)
            .map_err(|e| CliError::Usage(format!("row {}: {e}", i + 1)))?;
    }
    let samples = fission_dataset(&xs, &cfg, args.seed)?;

    let sink: Box<dyn Write> = match &args.out {
        Some(dir) => Box::new(create(dir, "fission.csv")?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    let werr = |e: io::Error| CliError::Runtime(format!("writing fission output: {e}"));
    writeln!(w, "x,f,g").map_err(werr)?;
    for s in &samples {
        writeln!(w, "{},{},{}", fmt_f64(s.x), fmt_f64(s.f), fmt_f64(s.g)).map_err(werr)?;
    }
    w.flush().map_err(werr)?;
    Ok(())
}
