use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use railrisk_core::mc::{self, Conditioning, SimConfig};
use railrisk_core::report::{write_series, CompareReport, RiskReport, TablesReport, DEFAULT_TIMES};
use railrisk_core::scenario::curves::MAX_RESPONSE_MINUTES;
use railrisk_core::scenario::tables::{load_cause_tables, load_rate_tables};
use railrisk_core::scenario::{CauseTables, Evacuation, QuantityTable, RateTable};
use railrisk_core::severity::SeverityConfig;
use railrisk_core::{pipeline, Error, Study};

#[derive(Parser)]
#[command(name = "railrisk", version, about = "Hazmat release risk for unit vs manifest tank-car trains")]
struct Cli {
    /// Directory holding rates.csv and causes.csv to use instead of the built-in tables.
    #[arg(long, global = true, env = "RAILRISK_TABLES")]
    tables_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate both service options and write a risk report.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        times: Times,
        /// Include every intermediate distribution in the report.
        #[arg(long)]
        verbose: bool,
        /// Also write quantity and TC(t) CSV series into this directory.
        #[arg(long)]
        series_dir: Option<PathBuf>,
    },
    /// Side-by-side deltas between the unit and manifest options.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        times: Times,
    },
    /// Check the analytic distributions against Monte Carlo simulation.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = mc::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = mc::DEFAULT_TRIALS)]
        trials: u64,
        /// Largest acceptable total-variation distance.
        #[arg(long, default_value_t = mc::DEFAULT_TV_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = CondArg::GivenDerailment)]
        conditioning: CondArg,
    },
    /// Print the loaded rate, cause, lading-loss and severity tables.
    InspectTables {
        /// Use the tables referenced by this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Machine)]
    format: Format,
}

#[derive(Args)]
struct Times {
    /// Emergency response times in minutes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TIMES)]
    times: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Versioned JSON.
    Machine,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CondArg {
    GivenDerailment,
    PerShipment,
}

enum Failure {
    Input(Error),
    Oracle(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|source| {
            Failure::Input(Error::Io {
                path: p.to_path_buf(),
                source,
            })
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_times(times: &[f64]) -> Result<(), Failure> {
    if let Some(&t) = times.iter().find(|t| !(0.0..=MAX_RESPONSE_MINUTES).contains(*t)) {
        return Err(Failure::Input(Error::OutOfRange {
            quantity: "response time (minutes)",
            value: t,
            min: 0.0,
            max: MAX_RESPONSE_MINUTES,
        }));
    }
    Ok(())
}

fn load(cli_tables: Option<&Path>, scenario: &Path) -> Result<Study, Failure> {
    Ok(Study::load_with(scenario, cli_tables)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let tables_dir = cli.tables_dir.as_deref();
    match cli.command {
        Command::Run {
            common,
            times,
            verbose,
            series_dir,
        } => {
            check_times(&times.times)?;
            let study = load(tables_dir, &common.scenario)?;
            let report = RiskReport::build(&study, &times.times, verbose)?;
            let text = match common.format {
                Format::Machine => report.to_json()?,
                Format::Table => report.render_table(),
            };
            emit(common.output.as_deref(), &text)?;
            if let Some(dir) = series_dir {
                for p in write_series(&study, &dir)? {
                    log::info!("wrote {}", p.display());
                }
            }
        }
        Command::Compare { common, times } => {
            check_times(&times.times)?;
            let study = load(tables_dir, &common.scenario)?;
            let report = CompareReport::from_report(&RiskReport::build(&study, &times.times, false)?)?;
            let text = match common.format {
                Format::Machine => report.to_json()?,
                Format::Table => report.render_table(),
            };
            emit(common.output.as_deref(), &text)?;
        }
        Command::Validate {
            common,
            seed,
            trials,
            threshold,
            conditioning,
        } => {
            if !(threshold.is_finite() && threshold >= 0.0) {
                return Err(Failure::Input(Error::OutOfRange {
                    quantity: "threshold",
                    value: threshold,
                    min: 0.0,
                    max: 1.0,
                }));
            }
            let study = load(tables_dir, &common.scenario)?;
            let conditioning = match conditioning {
                CondArg::GivenDerailment => Conditioning::GivenDerailment,
                CondArg::PerShipment => Conditioning::PerShipment,
            };
            let cfg = SimConfig::new(trials, seed, conditioning)?;
            let report = mc::validate(&study, &cfg, threshold)?;
            let text = match common.format {
                Format::Machine => railrisk_core::report::json(&report)?,
                Format::Table => {
                    let mut s = format!(
                        "scenario {}  trials {}  seed {}  threshold {}\n",
                        report.scenario, report.trials, report.seed, report.threshold
                    );
                    for c in &report.comparisons {
                        s.push_str(&format!(
                            "{:<9} {:<40} {:<15} tv {:.6}  mean {:.6} vs {:.6}  {}\n",
                            c.train_type.as_str(),
                            c.context,
                            format!("{:?}", c.measure),
                            c.tv_distance,
                            c.empirical_mean,
                            c.analytic_mean,
                            match (c.gated, c.passed) {
                                (false, _) => "info",
                                (true, true) => "pass",
                                (true, false) => "FAIL",
                            }
                        ));
                    }
                    s
                }
            };
            emit(common.output.as_deref(), &text)?;
            if !report.passed {
                let worst = report
                    .comparisons
                    .iter()
                    .filter(|c| c.gated && !c.passed)
                    .map(|c| format!("{} {} tv={:.4}", c.train_type, c.context, c.tv_distance))
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(Failure::Oracle(worst));
            }
        }
        Command::InspectTables {
            scenario,
            output,
            format,
        } => {
            let report = match scenario {
                Some(path) => {
                    let study = load(tables_dir, &path)?;
                    let s = &study.scenario;
                    TablesReport::new(
                        &study.rates,
                        &study.causes,
                        &s.release.quantity_table,
                        s.severity,
                        s.curves.evacuation,
                    )
                }
                None => {
                    let (rates, causes) = match tables_dir {
                        Some(dir) => (
                            load_rate_tables(&dir.join(pipeline::RATES_FILE))?,
                            load_cause_tables(&dir.join(pipeline::CAUSES_FILE))?,
                        ),
                        None => (RateTable::builtin(), CauseTables::builtin()),
                    };
                    TablesReport::new(
                        &rates,
                        &causes,
                        &QuantityTable::default(),
                        SeverityConfig::default(),
                        Evacuation::default(),
                    )
                }
            };
            let text = match format {
                Format::Machine => report.to_json()?,
                Format::Table => report.render_table(),
            };
            emit(output.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Oracle(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(2)
        }
    }
}
