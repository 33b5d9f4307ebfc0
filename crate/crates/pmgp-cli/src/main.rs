use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use pmgp::{Error, Result};
use pmgp_cli::ingest::ingest_csv;
use pmgp_cli::report::{
    benchmark_report, emit, forecast_report, loglik_report, sweep_report, write_plot_data,
};
use pmgp_cli::runner::{
    default_sweep_values, future_forecasts, parse_sweep_param, parse_trend, run_benchmark,
    run_loglik, run_pmgp, run_sweep, score_pmgp, RunConfig, SweepParam, DEFAULT_MODELS,
};

/// Streaming GP forecasting on irregular time series, with online
/// hyperparameter learning and AR baselines for comparison.
#[derive(Parser)]
#[command(name = "pmgp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelOpts {
    /// Matérn smoothness p (process is p-times differentiable)
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Number of spectral mixture components
    #[arg(long, default_value_t = 4)]
    components: usize,
    /// Aggressiveness of the online hyperparameter learner
    #[arg(long, default_value_t = 100.0)]
    c: f64,
    /// Loss tolerance of the online hyperparameter learner
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Trend model: `linear` or `constant`
    #[arg(long, default_value = "linear")]
    trend: String,
    /// Sampling frequency; estimated from the first gaps when omitted
    #[arg(long)]
    fs: Option<f64>,
}

impl ModelOpts {
    fn to_config(&self, with_trace: bool, with_timing: bool) -> Result<RunConfig> {
        let cfg = RunConfig {
            p: self.p,
            components: self.components,
            c: self.c,
            eps: self.eps,
            trend: parse_trend(&self.trend)?,
            fs_override: self.fs,
            with_trace,
            with_timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Stream a series through the GP model, scoring one-step-ahead
    /// forecasts and optionally extrapolating past the end
    Forecast {
        /// CSV file with header `t,y`
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        model: ModelOpts,
        /// Number of future steps (of 1/fs) to forecast
        #[arg(long, default_value_t = 0)]
        horizon: usize,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include the per-step hyperparameter trace in the report
        #[arg(long)]
        trace: bool,
        /// Record wall-clock runtime in the report
        #[arg(long)]
        timing: bool,
    },
    /// Run the GP model and the AR baselines on one series and report
    /// NMAE for each
    Benchmark {
        /// CSV file with header `t,y`
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated model list (default: pmgp,pa-ar2,pa-ar10,blr-ar2,blr-ar10)
        #[arg(long)]
        models: Option<String>,
        #[command(flatten)]
        model: ModelOpts,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write tidy running-NMAE curves (step,model,running_nmae) here
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// Record wall-clock runtimes in the report
        #[arg(long)]
        timing: bool,
    },
    /// Log likelihood of a series under the initial hyperparameters
    Loglik {
        /// CSV file with header `t,y`
        #[arg(long)]
        input: PathBuf,
        /// Use the dense Gram-matrix evaluation instead of the filter
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        model: ModelOpts,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the GP model across a grid of one knob and tabulate NMAE
    Sweep {
        /// CSV file with header `t,y`
        #[arg(long)]
        input: PathBuf,
        /// Which knob to sweep: `c` or `components`
        #[arg(long)]
        param: String,
        /// Comma-separated grid; a built-in grid is used when omitted
        #[arg(long)]
        values: Option<String>,
        #[command(flatten)]
        model: ModelOpts,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_model_list(models: Option<&str>) -> Result<Vec<String>> {
    let names: Vec<String> = match models {
        Some(list) => list
            .split(',')
            .map(|m| m.trim().to_string())
            .filter(|m| !m.is_empty())
            .collect(),
        None => DEFAULT_MODELS.iter().map(|s| s.to_string()).collect(),
    };
    if names.is_empty() {
        return Err(Error::Input("empty model list".into()));
    }
    Ok(names)
}

fn parse_value_list(values: &str) -> Result<Vec<f64>> {
    values
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Parse(format!("cannot parse sweep value `{v}`")))
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forecast { input, model, horizon, out, trace, timing } => {
            let cfg = model.to_config(trace, timing)?;
            let records = ingest_csv(&input)?;
            let started = Instant::now();
            let run = run_pmgp(&records, &cfg)?;
            let runtime_ms = cfg
                .with_timing
                .then(|| started.elapsed().as_secs_f64() * 1e3);
            let score = score_pmgp(&run, &records, &cfg, runtime_ms)?;
            let future = future_forecasts(&run, horizon)?;
            emit(&forecast_report(&cfg, &score, run.fs, &future), out.as_deref())
        }
        Command::Benchmark { input, models, model, out, plot_data, timing } => {
            let cfg = model.to_config(false, timing)?;
            let names = parse_model_list(models.as_deref())?;
            let records = ingest_csv(&input)?;
            let reports = run_benchmark(&records, &cfg, &names)?;
            emit(&benchmark_report(&cfg, &reports), out.as_deref())?;
            if let Some(path) = plot_data {
                write_plot_data(&path, &reports)?;
            }
            Ok(())
        }
        Command::Loglik { input, exact, model, out } => {
            let cfg = model.to_config(false, false)?;
            let records = ingest_csv(&input)?;
            let value = run_loglik(&records, &cfg, exact)?;
            emit(&loglik_report(&cfg, value, exact, records.len()), out.as_deref())
        }
        Command::Sweep { input, param, values, model, out } => {
            let cfg = model.to_config(false, false)?;
            let param = parse_sweep_param(&param)?;
            let grid = match values.as_deref() {
                Some(list) => parse_value_list(list)?,
                None => default_sweep_values(param),
            };
            let records = ingest_csv(&input)?;
            let rows = run_sweep(&records, &cfg, param, &grid)?;
            let name = match param {
                SweepParam::C => "c",
                SweepParam::Components => "components",
            };
            emit(&sweep_report(&cfg, name, &rows), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(pmgp_cli::exit_code_for(&err))
        }
    }
}
