//! `modelsearch` command-line driver.
//!
//! ```text
//! modelsearch run --config search.json --workers 4 --output report.json
//! modelsearch schedule --durations estimates.csv --workers 4
//! modelsearch bench --config bench.json --output bench.csv
//! modelsearch synth --kind xor --rows 2000 --output data/xor.csv
//! ```

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use modelsearch::profiler::{durations_from_table, durations_to_table};
use modelsearch::scheduler::makespan_lower_bound;
use modelsearch::{
    makespan, run_search, schedule_greedy, schedule_random, synth, Dataset, Durations, Metric, PluginOptions,
    Schedule, SchedulerKind, SearchConfig, SearchOptions, SearchReport,
};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "modelsearch", version, about = "Parallel model search across pluggable trainers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a search: profile, schedule, train, validate, select.
    Run(RunArgs),
    /// Compare greedy and random schedules for a duration table.
    Schedule(ScheduleArgs),
    /// Time the search at 1, 2, 4 and 8 workers under both schedulers.
    Bench(BenchArgs),
    /// Write a seeded synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Parser, Debug)]
struct RunArgs {
    /// Search config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = SchedulerKind::Profile)]
    scheduler: SchedulerKind,
    /// Fraction of training rows used for profiling.
    #[arg(long, default_value_t = 0.01)]
    sample_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Metric::Auc)]
    metric: Metric,
    /// Where to write the JSON report.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the profiled duration estimates as a table.
    #[arg(long)]
    durations_output: Option<PathBuf>,
}

#[derive(Parser, Debug)]
struct ScheduleArgs {
    /// Table of `config_id,estimated_seconds` rows.
    #[arg(long)]
    durations: PathBuf,
    #[arg(long)]
    workers: usize,
    /// Seed for the random baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Parser, Debug)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV table of results; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8])]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    sample_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Two-feature XOR; linear models cannot separate it.
    Xor,
    /// One feature with a logistic label model.
    Linear,
}

#[derive(Parser, Debug)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Xor)]
    kind: SynthKind,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    /// Extra uninformative columns (xor only).
    #[arg(long, default_value_t = 0)]
    noise_features: usize,
    /// Probability of flipping each label (xor only).
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MODELSEARCH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn search(config: &SearchConfig, options: &SearchOptions) -> Result<SearchReport> {
    let splits = config.load_data::<f64>().context("loading data")?;
    let registry = config.registry::<f64>(options.workers, &PluginOptions::default())?;
    Ok(run_search(&config.space(), &splits, &registry, options)?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = SearchConfig::from_path(&args.config)?;
    let options = SearchOptions {
        workers: args.workers,
        scheduler: args.scheduler,
        sample_rate: args.sample_rate,
        seed: args.seed,
        metric: args.metric,
    };
    let report = search(&config, &options)?;
    if let Some(path) = &args.output {
        write_file(path, &report.to_json())?;
    }
    if let (Some(path), Some(est)) = (&args.durations_output, &report.estimated_seconds) {
        write_file(path, &durations_to_table(est))?;
    }

    println!(
        "evaluated {} of {} configs ({} failed)",
        report.results.len(),
        report.configs.len(),
        report.failures.len()
    );
    for f in &report.failures {
        println!("  failed config {} ({}): {}", f.config_id, f.algorithm, f.message);
    }
    let Some(best) = report.best() else {
        eprintln!("error: every config failed");
        return Ok(ExitCode::from(2));
    };
    println!("best config: {}", report.configs[best.config_id]);
    match best.test_value {
        Some(t) => println!("{}: validation {:.6}, test {t:.6}", report.metric, best.value),
        None => println!("{}: validation {:.6}", report.metric, best.value),
    }
    println!("makespan: {:.3}s", report.makespan_seconds);
    match report.overhead_ratio {
        Some(r) => println!("profiling overhead: {:.2}%", r * 100.0),
        None => println!("profiling overhead: n/a"),
    }
    Ok(ExitCode::SUCCESS)
}

fn schedule_json(schedule: &Schedule, durations: &Durations) -> Result<serde_json::Value> {
    Ok(json!({
        "assignments": schedule.assignments,
        "loads": schedule.loads(durations)?,
        "makespan": makespan(schedule, durations)?,
    }))
}

fn cmd_schedule(args: ScheduleArgs) -> Result<ExitCode> {
    let file = File::open(&args.durations).with_context(|| format!("opening {}", args.durations.display()))?;
    let durations = durations_from_table(BufReader::new(file))?;
    let ids: Vec<usize> = durations.keys().copied().collect();
    let greedy = schedule_greedy(&durations, args.workers)?;
    let random = schedule_random(&ids, args.workers, args.seed)?;
    let out = json!({
        "workers": args.workers,
        "tasks": ids.len(),
        "lower_bound": makespan_lower_bound(&durations, args.workers),
        "greedy": schedule_json(&greedy, &durations)?,
        "random": schedule_json(&random, &durations)?,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let config = SearchConfig::from_path(&args.config)?;
    if args.workers.is_empty() {
        bail!("no worker counts given");
    }
    let mut table = String::from("scheduler,workers,wall_seconds,makespan_seconds,speedup,percent_of_ideal\n");
    for scheduler in [SchedulerKind::Profile, SchedulerKind::Random] {
        let mut baseline: Option<(usize, f64)> = None;
        for &workers in &args.workers {
            let options = SearchOptions {
                workers,
                scheduler,
                sample_rate: args.sample_rate,
                seed: args.seed,
                metric: Metric::Auc,
            };
            let t0 = Instant::now();
            let report = search(&config, &options)?;
            let wall = t0.elapsed().as_secs_f64();
            let (base_workers, base_wall) = *baseline.get_or_insert((workers, wall));
            let speedup = base_wall / wall;
            let ideal = workers as f64 / base_workers as f64;
            writeln!(
                table,
                "{scheduler},{workers},{wall:.4},{:.4},{speedup:.3},{:.1}",
                report.makespan_seconds,
                100.0 * speedup / ideal
            )?;
            log::info!("{scheduler} x{workers}: {wall:.3}s");
        }
    }
    match &args.output {
        Some(path) => write_file(path, &table)?,
        None => print!("{table}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    if args.rows == 0 {
        bail!("--rows must be positive");
    }
    let ds: Dataset = match args.kind {
        SynthKind::Xor => synth::xor(args.rows, args.noise_features, args.flip, args.seed),
        SynthKind::Linear => synth::linear(args.rows, 4.0, args.seed),
    };
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ds.to_csv_path(&args.output, &args.label_column)?;
    Ok(ExitCode::SUCCESS)
}
