use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydcirc_cli::config::{OutputFormat, RunConfig};
use rydcirc_cli::figures::{self, Figure, FigureOptions};
use rydcirc_cli::output::{emit, to_json};
use rydcirc_cli::stirap::{self, EstimateInputs};
use rydcirc_cli::{exit, qpt, table1, CliError};

/// Circular-Rydberg blockade gate: reference tables, figure data, simulated
/// process tomography and adiabatic-passage ladders.
#[derive(Debug, Parser)]
#[command(name = "rydcirc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Write to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recompute the five gate columns against their reference values.
    /// Exits with status 2 if any value is outside its tolerance.
    Table1,
    /// Emit the data series of one figure as CSV.
    Figure(FigureArgs),
    /// Run the simulated process tomography of one gate.
    Qpt(QptArgs),
    /// List the adiabatic-passage ladder and its intermediate-state error.
    Stirap(StirapArgs),
}

#[derive(Debug, Args)]
struct FigureArgs {
    /// 2: blockade shift, 3: lifetimes, 4: minimum error, 5: optimal Rabi
    /// frequency.
    which: u32,
    /// First abscissa value (um, or n for figure 3).
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    /// Last abscissa value (um, or n for figure 3).
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    /// Number of separations.
    #[arg(long)]
    points: Option<usize>,
    /// Principal quantum numbers, one series each.
    #[arg(long = "n", value_delimiter = ',')]
    ns: Option<Vec<u32>>,
    /// Temperatures (K), one series each.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    temperatures: Option<Vec<f64>>,
    /// Separation (m) below which points are marked as excluded.
    #[arg(long)]
    exclusion_radius: Option<f64>,
}

#[derive(Debug, Args)]
struct QptArgs {
    /// Name of a shipped preset.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Path of a TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for finite-shot sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per measurement setting; enables sampling.
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Debug, Args)]
struct StirapArgs {
    /// Principal quantum number of the final circular state.
    #[arg(long, default_value_t = 112)]
    n_final: u32,
    /// Peak intermediate-state population.
    #[arg(long, default_value_t = EstimateInputs::default().p_int)]
    p_int: f64,
    /// Rabi frequency of the passage (MHz).
    #[arg(long, default_value_t = EstimateInputs::default().rabi_frequency_mhz)]
    rabi_mhz: f64,
    /// Intermediate-state lifetime (s).
    #[arg(long, default_value_t = EstimateInputs::default().tau_int)]
    tau_int: f64,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Table1 => {
            let report = table1::build()?;
            let bytes = match cli.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => report.to_table().to_csv()?,
                OutputFormat::Json => to_json(&report)?,
            };
            emit(&bytes, out)?;
            eprintln!("{}", report.summary());
            Ok(if report.breaches > 0 {
                exit::TOLERANCE_BREACH
            } else {
                exit::SUCCESS
            })
        }
        Command::Figure(args) => {
            if cli.format == Some(OutputFormat::Json) {
                return Err(CliError::usage("figure data is emitted as CSV only"));
            }
            let figure = Figure::from_number(args.which)?;
            let opts = FigureOptions {
                from: args.from,
                to: args.to,
                points: args.points,
                ns: args.ns,
                temperatures: args.temperatures,
                exclusion_radius: args.exclusion_radius,
            };
            emit(&figures::build(figure, &opts)?.to_csv()?, out)?;
            Ok(exit::SUCCESS)
        }
        Command::Qpt(args) => {
            let mut config = match (&args.preset, &args.config) {
                (Some(name), _) => RunConfig::preset(name)?,
                (None, Some(path)) => RunConfig::from_file(path)?,
                (None, None) => return Err(CliError::usage("give --preset or --config")),
            };
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(shots) = args.shots {
                if shots == 0 {
                    return Err(CliError::usage("--shots must be at least 1"));
                }
                config.shots = Some(shots);
            }
            if let Some(format) = cli.format {
                config.format = format;
            }
            if let Some(path) = out {
                config.output = Some(path.to_path_buf());
            }
            let report = qpt::run(&config)?;
            let bytes = match config.format {
                OutputFormat::Csv => report.to_table().to_csv()?,
                OutputFormat::Json => to_json(&report)?,
            };
            emit(&bytes, config.output.as_deref())?;
            if !report.fits_converged {
                eprintln!("note: some likelihood fits stopped before the gradient tolerance; see the fit diagnostics");
            }
            Ok(exit::SUCCESS)
        }
        Command::Stirap(args) => {
            let inputs = EstimateInputs {
                p_int: args.p_int,
                rabi_frequency_mhz: args.rabi_mhz,
                tau_int: args.tau_int,
            };
            let report = stirap::build(args.n_final, inputs)?;
            let bytes = match cli.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => report.to_table().to_csv()?,
                OutputFormat::Json => to_json(&report)?,
            };
            emit(&bytes, out)?;
            eprintln!("{}", report.summary());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::SUCCESS };
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
