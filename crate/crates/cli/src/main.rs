use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowinfo_core::config::{Overrides, RunConfig, RunMode};
use lowinfo_core::generator::{generate_adversarial_stream, generate_dimension_stream, GeneratorProfile, Pressure};
use lowinfo_core::runner::{run_config, verify_trace, write_artifacts};

#[derive(Parser)]
#[command(name = "lowinfo", version, about = "Run and audit low-information constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct RunFlags {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<RunMode>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    profile: Option<Pressure>,
    #[arg(long)]
    shift: Option<u64>,
    /// Directory for trace.txt, requests.txt, code.txt, report.txt and stream.txt.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a construction and its analysis, writing artifacts.
    Run(RunFlags),
    /// Replay a trace and re-derive its report.
    Verify {
        trace: PathBuf,
        /// Compare against a saved report; any difference exits 1.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Write a seeded event stream.
    GenerateStream {
        #[arg(long, default_value = "benign")]
        profile: Pressure,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        horizon: u64,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        /// Produce a dimension stream instead (prefixes of random sequences).
        #[arg(long)]
        dimension: bool,
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the report of a trace with a pass/fail summary.
    Report { trace: PathBuf },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))
}

fn run(flags: RunFlags) -> ExitCode {
    let mut config = match &flags.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(2, e),
        },
        None => RunConfig::new(flags.mode.unwrap_or(RunMode::Single), flags.horizon.unwrap_or(200)),
    };
    config.apply(&Overrides {
        mode: flags.mode,
        horizon: flags.horizon,
        seed: flags.seed,
        profile: flags.profile,
        shift: flags.shift,
        output: flags.output,
    });
    let outcome = match run_config(&config) {
        Ok(o) => o,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    if let Some(dir) = &config.output {
        if let Err(e) = write_artifacts(&outcome.artifacts, dir) {
            return fail(e.exit_code() as u8, e);
        }
    }
    print!("{}", outcome.artifacts.report);
    ExitCode::from(outcome.exit_code() as u8)
}

fn verify(trace: &Path, expect: Option<&Path>) -> ExitCode {
    let text = match read(trace) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let report = match verify_trace(&text) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    print!("{report}");
    if let Some(path) = expect {
        let saved = match read(path) {
            Ok(t) => t,
            Err(c) => return c,
        };
        if saved != report.to_string() {
            return fail(1, format!("report differs from {}", path.display()));
        }
    }
    ExitCode::from(u8::from(!report.all_pass()))
}

fn report(trace: &Path) -> ExitCode {
    let text = match read(trace) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let report = match verify_trace(&text) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    print!("{report}");
    let failed = report.failures().count();
    println!("summary checks={} failed={failed}", report.checks.len());
    ExitCode::from(u8::from(failed > 0))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(flags) => run(flags),
        Command::Verify { trace, expect } => verify(&trace, expect.as_deref()),
        Command::Report { trace } => report(&trace),
        Command::GenerateStream {
            profile,
            seed,
            horizon,
            max_len,
            dimension,
            output,
        } => {
            if max_len > 40 {
                return fail(2, "max-len must be at most 40");
            }
            let stream = if dimension {
                generate_dimension_stream(seed, 6, max_len.clamp(1, 20)).0
            } else {
                generate_adversarial_stream(seed, &GeneratorProfile::preset(profile, horizon, max_len))
            };
            match output {
                Some(path) => match std::fs::write(&path, stream.to_string()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(2, format!("cannot write {}: {e}", path.display())),
                },
                None => {
                    print!("{stream}");
                    ExitCode::SUCCESS
                }
            }
        }
    }
}
