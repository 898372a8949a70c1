use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use fracpredict::config::{ExperimentConfig, Scale};
use fracpredict::harness::{
    compare_exact_vs_nn, run_convergence_study, run_table_sweep, table_horizons, ConvergenceConfig, Experiment,
    Template,
};
use fracpredict::io::{self, StoredPaths};
use fracpredict::{Error, Result};

/// Predict fractional processes from discrete observations with exact,
/// continuous and neural-network predictors.
#[derive(Debug, Parser)]
#[command(name = "fracpredict", version)]
struct Cli {
    /// TOML experiment configuration; replaces the `--scale` defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Training scale; `paper` runs take hours.
    #[arg(long, global = true, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathFormat {
    Csv,
    Binary,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate paths on the experiment grid (paths.csv or paths.fpb).
    Simulate {
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, value_enum, default_value_t = PathFormat::Csv)]
        format: PathFormat,
    },
    /// Tabulate the exact predictor's regression weights (weights.csv).
    PredictExact,
    /// Tabulate the continuous predictor's kernel (psi.csv).
    PredictContinuous,
    /// Train the network (network.fpnn, loss.csv).
    Train,
    /// Compare all predictors on fresh test paths (report.csv).
    Evaluate {
        /// Previously trained network; trained from scratch if absent.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Reproduce one of the result tables (tableN.csv).
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        number: u8,
    },
    /// Discrete-to-continuous convergence on one path (convergence.csv).
    Convergence,
    /// Exact versus network MSE across horizons (compare.csv).
    Compare {
        /// Comma-separated horizons; defaults to 5.5, 6, ..., 10.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::for_scale(cli.scale),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.scale == Scale::Paper {
        eprintln!("note: paper scale is long-running");
    }
    fs::create_dir_all(&cli.out)?;
    let out = |name: &str| create(&cli.out.join(name));

    match cli.command {
        Command::Simulate { paths, format } => {
            if paths == 0 {
                return Err(Error::Config("--paths must be positive".into()));
            }
            let exp = Experiment::new(config)?;
            let batch = exp
                .simulator()
                .sample(paths, exp.test_seed())
                .map_err(|e| Error::Numerical { stage: "simulation", source: e })?;
            let stored = StoredPaths::from(&batch);
            match format {
                PathFormat::Csv => io::write_paths_csv(&stored, out("paths.csv")?),
                PathFormat::Binary => io::write_paths_binary(&stored, out("paths.fpb")?),
            }
        }
        Command::PredictExact => {
            let exp = Experiment::new(config)?;
            let p = exp.exact_predictor()?;
            let mut w = out("weights.csv")?;
            writeln!(w, "# config: {}", exp.config().echo())?;
            io::write_weights_csv(&p.weight_table(), w)
        }
        Command::PredictContinuous => {
            let exp = Experiment::new(config)?;
            let Some(c) = exp.continuous_predictor()? else {
                return Err(Error::Config(
                    "continuous predictor needs an fbm or fou process with at least 16 grid points on [0, s]".into(),
                ));
            };
            let midpoint = exp.config().continuous.outer_rule == "midpoint";
            let rows: Vec<(f64, f64)> = exp
                .grid()
                .points()
                .windows(2)
                .zip(c.weights())
                .map(|(u, &psi)| (if midpoint { 0.5 * (u[0] + u[1]) } else { u[0] }, psi))
                .collect();
            let mut w = out("psi.csv")?;
            writeln!(w, "# config: {}", exp.config().echo())?;
            io::write_psi_csv(&rows, w)
        }
        Command::Train => {
            let exp = Experiment::new(config)?;
            let (net, trace) = exp.train_network()?;
            io::write_network(&net, out("network.fpnn")?)?;
            let mut w = out("loss.csv")?;
            writeln!(w, "# config: {}", exp.config().echo())?;
            io::write_loss_trace_csv(&trace, w)
        }
        Command::Evaluate { network } => {
            let start = Instant::now();
            let exp = Experiment::new(config)?;
            let report = match network {
                Some(p) => {
                    let net = io::read_network(File::open(&p)?)?;
                    exp.evaluate(net, Default::default(), start)?
                }
                None => exp.run()?,
            };
            report.write_csv(out("report.csv")?)
        }
        Command::Table { number } => {
            let template = Template::from_number(number)?;
            let report = run_table_sweep(template, cli.scale, config.seed)?;
            report.write_csv(out(&format!("table{number}.csv"))?)
        }
        Command::Convergence => {
            let cfg = ConvergenceConfig {
                s: config.s,
                horizon: config.horizon,
                continuous: config.continuous.clone(),
                ..ConvergenceConfig::new(config.process.clone(), config.hurst, config.seed)
            };
            run_convergence_study(&cfg)?.write_csv(out("convergence.csv")?)
        }
        Command::Compare { horizons } => {
            let horizons = if horizons.is_empty() { table_horizons() } else { horizons };
            compare_exact_vs_nn(&config, &horizons)?.write_csv(out("compare.csv")?)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
