use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bounds_kit::cli_io::{self, Command, OutputFormat, RegimeSpec, RunConfig, SimulateOptions};
use bounds_kit::{BoundsError, MechanismConfig, MechanismKind, PopulationShape, SampleDesign};
use clap::{Args, Parser, Subcommand};

/// Bounds on mean achievement when schools and students decline to take part.
#[derive(Parser)]
#[command(name = "bounds-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate identification regions from dataset files.
    Estimate(EstimateArgs),
    /// Generate a synthetic population, write a sample and its census truth.
    Simulate(SimulateArgs),
    /// Turn estimate tables into long-format plot data.
    Report(ReportArgs),
}

#[derive(Args)]
struct Output {
    /// tsv or json; inferred from the --out extension when omitted
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn resolved(&self) -> OutputFormat {
        self.format
            .or_else(|| self.out.as_deref().map(OutputFormat::from_path))
            .unwrap_or(OutputFormat::Tsv)
    }
}

#[derive(Args)]
struct Regimes {
    /// e.g. A1:0.05, A1_1, A2_A3, WORST_CASE:0:1, A1_A4+strict:0.05
    #[arg(long = "regime")]
    regimes: Vec<RegimeSpec>,
    /// Quantile levels for regimes given without one.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    use_replacements: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    students: Option<PathBuf>,
    #[arg(long)]
    schools: Option<PathBuf>,
    #[arg(long)]
    strata: Option<PathBuf>,
    /// Directory holding students.csv, schools.csv and strata.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    regimes: Regimes,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ignorable")]
    mechanism: MechanismKind,
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
    #[arg(long, default_value_t = 0.5)]
    position: f64,
    #[arg(long, default_value_t = 0.85)]
    school_rate: f64,
    #[arg(long, default_value_t = 0.88)]
    student_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    skew: f64,
    #[arg(long = "strata-count", default_value_t = 2)]
    strata: usize,
    #[arg(long, default_value_t = 50)]
    schools_per_stratum: usize,
    #[arg(long, default_value_t = 30)]
    students_per_school: usize,
    /// Schools drawn per stratum; all when omitted.
    #[arg(long)]
    sample_schools: Option<usize>,
    /// Students drawn per school; all when omitted.
    #[arg(long)]
    sample_students: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    replacement_rate: f64,
    #[arg(long, default_value_t = 5)]
    pv_count: usize,
    /// Sampled replicates for the coverage file.
    #[arg(long, default_value_t = 0)]
    replicates: usize,
    #[command(flatten)]
    regimes: Regimes,
}

#[derive(Args)]
struct ReportArgs {
    /// Estimate files (.tsv or .json); the file stem names the group.
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    output: Output,
}

fn config(cli: Cli) -> RunConfig {
    match cli.command {
        Cmd::Estimate(a) => {
            let from_dir = |name: &str| a.data.as_ref().map(|d| d.join(name));
            RunConfig {
                students: a.students.or_else(|| from_dir("students.csv")),
                schools: a.schools.or_else(|| from_dir("schools.csv")),
                strata: a.strata.or_else(|| from_dir("strata.csv")),
                regimes: a.regimes.regimes,
                alphas: a.regimes.alphas,
                use_replacements: a.regimes.use_replacements,
                format: a.output.resolved(),
                out: a.output.out,
                ..RunConfig::new(Command::Estimate)
            }
        }
        Cmd::Simulate(a) => {
            let mut mechanism = MechanismConfig::new(a.mechanism, a.seed);
            mechanism.strength = a.strength;
            mechanism.position = a.position;
            mechanism.school_rate = a.school_rate;
            mechanism.student_rate = a.student_rate;
            mechanism.outcome.skew = a.skew;
            let design = SampleDesign {
                schools_per_stratum: a.sample_schools,
                students_per_school: a.sample_students,
                replacement_rate: a.replacement_rate,
                pv_count: a.pv_count,
            };
            RunConfig {
                regimes: a.regimes.regimes,
                alphas: a.regimes.alphas,
                use_replacements: a.regimes.use_replacements,
                out: Some(a.out),
                seed: a.seed,
                simulate: Some(SimulateOptions {
                    mechanism,
                    shape: PopulationShape::new(a.strata, a.schools_per_stratum, a.students_per_school),
                    design,
                    coverage_replicates: a.replicates,
                }),
                ..RunConfig::new(Command::Simulate)
            }
        }
        Cmd::Report(a) => RunConfig {
            inputs: a.inputs,
            format: a.output.resolved(),
            out: a.output.out,
            ..RunConfig::new(Command::Report)
        },
    }
}

fn fail(err: &BoundsError) -> ExitCode {
    eprintln!("{}", cli_io::error_record(err));
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(&BoundsError::Config(e.kind().to_string()));
        }
    };

    if let Ok(n) = std::env::var("BOUNDS_KIT_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                return fail(&BoundsError::Config(format!(
                    "BOUNDS_KIT_THREADS=`{n}` is not a positive integer"
                )))
            }
        }
    }

    let config = config(cli);
    match cli_io::run(&config) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let to_stdout = config.out.is_none() || config.command == Command::Simulate;
            if to_stdout {
                let _ = std::io::stdout().write_all(out.text.as_bytes());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
