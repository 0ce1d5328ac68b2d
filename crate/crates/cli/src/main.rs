use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bslack::analysis::{self, OverslackParams};
use bslack::harness::{self, TrialConfig, TrialError, TrialReport, Workload};
use bslack::{Policy, Schedule, DEFAULT_QUEUE_CAPACITY};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 1;
const EXIT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "bslack", version, about = "B-slack tree trials and space bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a randomized trial and print its report.
    Run(RunArgs),
    /// Print the worst-case space table.
    Bounds(BoundsArgs),
    /// Print the exact quantities of an overslack tree.
    Overslack(OverslackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "50i-50d")]
    Balanced,
    #[value(name = "90i-10d")]
    InsertHeavy,
    #[value(name = "10i-90d")]
    DeleteHeavy,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, default_value_t = 16)]
    b: usize,
    /// Keys are drawn from [0, size).
    #[arg(long, default_value_t = 1 << 20)]
    size: u64,
    /// Insert percentage; overridden by --workload.
    #[arg(long, default_value_t = 50)]
    ins: u8,
    /// Delete percentage; overridden by --workload.
    #[arg(long, default_value_t = 50)]
    del: u8,
    #[arg(long, value_enum)]
    workload: Option<Preset>,
    /// Measured updates after the prefill phase.
    #[arg(long, default_value_t = 1_000_000)]
    ops: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// standard, const or batch.
    #[arg(long, default_value = "standard")]
    policy: Policy,
    #[arg(long = "queue-cap", default_value_t = DEFAULT_QUEUE_CAPACITY)]
    queue_cap: usize,
    /// Order of violation repair: deepest or fifo.
    #[arg(long, default_value = "deepest")]
    schedule: Schedule,
    /// Validate the tree every N updates; 0 disables.
    #[arg(long = "validate-every", default_value_t = 0)]
    validate_every: u64,
    /// Output file; `.csv` writes the histogram, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    b: Vec<usize>,
    #[arg(long = "min-keys", default_value_t = 1_000_000)]
    min_keys: u64,
    /// Output file; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OverslackArgs {
    #[arg(long)]
    b: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    h: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds(args) => bounds(args),
        Command::Overslack(args) => overslack(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn has_ext(path: &Option<PathBuf>, ext: &str) -> bool {
    path.as_deref()
        .and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn run(args: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut config = TrialConfig::new(args.b)
        .size(args.size)
        .ops(args.ops)
        .seed(args.seed)
        .policy(args.policy);
    config.insert_pct = args.ins;
    config.delete_pct = args.del;
    config.queue_capacity = args.queue_cap;
    config.schedule = args.schedule;
    config.validate_every = args.validate_every;
    if let Some(p) = args.workload {
        config = config.workload(match p {
            Preset::Balanced => Workload::Balanced,
            Preset::InsertHeavy => Workload::InsertHeavy,
            Preset::DeleteHeavy => Workload::DeleteHeavy,
        });
    }
    let result = harness::run_trial(&config);
    let report = match &result {
        Ok(r) => r,
        Err(TrialError::Invariant {
            phase,
            index,
            seed,
            report,
        }) => {
            eprintln!("invariant failure in {phase:?} phase after update {index} (seed {seed})");
            println!("{}", serde_json::to_string_pretty(report)?);
            return Ok(exit_code(&result));
        }
        Err(_) => return Err(result.unwrap_err().into()),
    };
    write_report(report, &args.out)?;
    if !report.bounds.pass {
        eprintln!("amortized step bound failed");
    }
    Ok(exit_code(&result))
}

/// 0 on success, 2 on an invariant or bound failure, 1 for anything else.
fn exit_code(result: &Result<TrialReport, TrialError>) -> ExitCode {
    ExitCode::from(match result {
        Ok(r) if r.bounds.pass => 0,
        Ok(_) | Err(TrialError::Invariant { .. }) => EXIT_FAILURE,
        Err(_) => EXIT_CONFIG,
    })
}

fn write_report(report: &TrialReport, out: &Option<PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    let mut w = sink(out)?;
    if has_ext(out, "csv") {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["steps", "count"])?;
        for bin in &report.histogram {
            csv.write_record([bin.steps.to_string(), bin.count.to_string()])?;
        }
        csv.flush()?;
    } else {
        serde_json::to_writer_pretty(&mut w, report)?;
        writeln!(w)?;
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let rows = analysis::space_table(&args.b, args.min_keys)?;
    let mut w = sink(&args.out)?;
    if has_ext(&args.out, "json") {
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
    } else {
        let mut csv = csv::Writer::from_writer(w);
        for row in &rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn overslack(args: OverslackArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let report = analysis::bound_report(OverslackParams::new(args.b, args.k, args.h)?)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}
