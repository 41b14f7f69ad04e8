use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emopt::benchmarks::{self, verify_minima};
use emopt::campaign::{
    self, build_report, emit_tables, load_records, prepare_output_dir, Algorithm, CampaignConfig,
    CampaignReport, OutputFormat,
};
use emopt::{Error, Result};

#[derive(Parser)]
#[command(name = "emopt", version, about = "EMO / OBEMO experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a campaign and write its tables.
    Run(RunArgs),
    /// Check every benchmark's minimum with an independent oracle.
    Verify(VerifyArgs),
    /// Re-emit tables from a stored records.json.
    Table(TableArgs),
    /// List the benchmark registry.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// TOML campaign file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated ids or names, e.g. f1,f6 or branin,shekel.
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    /// Comma-separated subset of emo,obemo.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Stop a run once it is within the stagnation tolerance of the
    /// function's known minimum (true/false).
    #[arg(long = "stop-at-known-minimum")]
    stop_at_known_minimum: Option<bool>,
    /// Stagnation window in iterations.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json.
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Oracle evaluations per function.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TableArgs {
    /// Directory holding records.json (or the file itself).
    #[arg(long)]
    from: PathBuf,
    /// Output directory; defaults to --from.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
}

fn parse_formats(raw: &[String]) -> Result<Vec<OutputFormat>> {
    raw.iter().map(|s| s.parse()).collect()
}

fn build_config(args: &RunArgs) -> Result<CampaignConfig> {
    let mut cfg = match &args.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(f) = &args.functions {
        cfg.functions = f.clone();
    }
    if let Some(a) = &args.algorithms {
        cfg.algorithms = a
            .iter()
            .map(|s| s.parse::<Algorithm>())
            .collect::<Result<_>>()?;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(m) = args.max_iters {
        cfg.max_iterations = Some(m);
    }
    if let Some(t) = args.stop_at_known_minimum {
        cfg.stop_at_known_minimum = t;
    }
    if let Some(w) = args.window {
        cfg.engine.stagnation_window = w;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(f) = &args.formats {
        cfg.formats = parse_formats(f)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &CampaignReport) {
    println!(
        "{:<6} {:<7} {:>16} {:>12} {:>14}",
        "func", "alg", "avg best", "avg iters", "avg evals"
    );
    for a in &report.aggregates {
        println!(
            "{:<6} {:<7} {:>16.6} {:>12.1} {:>14.0}",
            a.function_id,
            a.algorithm_id,
            a.averaged_best,
            a.averaged_iterations,
            a.averaged_evaluations
        );
    }
    if !report.comparisons.is_empty() {
        println!();
        println!(
            "{:<6} {:<14} {:>12} {:>12}",
            "func", "pair", "p(best)", "p(iters)"
        );
        for c in &report.comparisons {
            println!(
                "{:<6} {:<14} {:>12.4e} {:>12.4e}",
                c.function_id, c.pair, c.best.p_value, c.iterations.p_value
            );
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = build_config(&args)?;
    prepare_output_dir(&cfg.output_dir)?;
    let report = campaign::run_campaign(&cfg, campaign::threads_from_env())?;
    print_summary(&report);
    let written = emit_tables(&report, &cfg.output_dir, &cfg.formats)?;
    eprintln!(
        "wrote {} files to {}",
        written.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let entries = match &args.functions {
        Some(keys) => keys
            .iter()
            .map(|k| {
                benchmarks::by_id(k).ok_or_else(|| Error::Config(format!("unknown function '{k}'")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => benchmarks::registry(),
    };
    let report = verify_minima(&entries, args.budget);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Serialization(e.to_string()))?
        );
    } else {
        println!(
            "{:<4} {:<16} {:>3} {:>14} {:>14} {:>12} {:>6}",
            "id", "name", "n", "oracle", "canonical", "published", "status"
        );
        for c in &report.checks {
            let status = match (c.passed, &c.documented_discrepancy) {
                (false, _) => "FLAG",
                (true, Some(_)) => "ok*",
                (true, None) => "ok",
            };
            println!(
                "{:<4} {:<16} {:>3} {:>14.6} {:>14.6} {:>12} {:>6}",
                c.id,
                c.name,
                c.dimension,
                c.oracle_minimum,
                c.canonical_minimum,
                c.reference_minimum,
                status
            );
        }
        for c in report
            .checks
            .iter()
            .filter(|c| c.documented_discrepancy.is_some())
        {
            println!(
                "* {}: {}",
                c.id,
                c.documented_discrepancy.as_deref().unwrap_or_default()
            );
        }
    }
    Ok(report.all_passed())
}

fn table(args: TableArgs) -> Result<()> {
    let records = load_records(&args.from)?;
    let out = args.out.unwrap_or_else(|| {
        if args.from.is_dir() {
            args.from.clone()
        } else {
            args.from
                .parent()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."))
        }
    });
    let formats = match &args.formats {
        Some(f) => parse_formats(f)?,
        None => records.config.formats.clone(),
    };
    let report = build_report(&records)?;
    print_summary(&report);
    emit_tables(&report, &out, &formats)?;
    Ok(())
}

fn list() {
    println!(
        "{:<4} {:<16} {:>3} {:>14} {:>12}  domain",
        "id", "name", "n", "minimum", "published"
    );
    for e in benchmarks::registry() {
        let space = e.spec.space();
        let domain = if space.lower().windows(2).all(|w| w[0] == w[1])
            && space.upper().windows(2).all(|w| w[0] == w[1])
        {
            format!(
                "[{}, {}]^{}",
                space.lower()[0],
                space.upper()[0],
                space.dims()
            )
        } else {
            space
                .lower()
                .iter()
                .zip(space.upper())
                .map(|(l, u)| format!("[{l}, {u}]"))
                .collect::<Vec<_>>()
                .join(" x ")
        };
        println!(
            "{:<4} {:<16} {:>3} {:>14.6} {:>12}  {}",
            e.id,
            e.name,
            e.dimension(),
            e.canonical_minimum,
            e.reference_minimum,
            domain
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Verify(args) => verify(args),
        Command::Table(args) => table(args).map(|_| true),
        Command::List => {
            list();
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
