//! Command-line front end: instance generation, solving with any of the
//! shipped algorithms, schedule validation, LP export and benchmark sweeps.
//! All logic lives in the library; this binary only parses arguments and
//! maps errors to exit codes (0 ok, 2 bad input, 3 solver failure,
//! 4 validation failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eoscsp::exact::auto_boost;
use eoscsp::gen::generate;
use eoscsp::milp::{build_milp, write_lp};
use eoscsp::model::{total_reward, validate_schedule, Instance, Schedule};
use eoscsp::report::{
    bench, preset_params, run_solver, Algo, RunReport, SolveOptions, CSV_HEADER,
};

#[derive(Parser)]
#[command(name = "eoscsp", about = "Satellite constellation scheduling benchmark tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it as JSON.
    Gen(GenArgs),
    /// Solve an instance file (or re-validate an existing schedule).
    Solve(SolveArgs),
    /// Run a benchmark sweep and write a CSV.
    Bench(BenchArgs),
    /// Export the mixed-integer model of an instance in LP format.
    ExportLp(ExportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Instance regime: `conflicting` or `realistic`.
    #[arg(long)]
    preset: String,
    /// Sweep scale index (0..=9).
    #[arg(long)]
    scale: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the instance JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON path.
    #[arg(long)]
    instance: PathBuf,
    /// Algorithm: greedy | exact | psi | ssi | cbba | s_dcop.
    #[arg(long, default_value = "greedy")]
    algo: String,
    /// Output path for the schedule JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time budget in seconds for the exact solver.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    /// Validate an existing schedule instead of solving.
    #[arg(long, default_value_t = false)]
    validate_only: bool,
    /// Schedule to validate (with --validate-only).
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Write the message trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Annotations copied into the report row.
    #[arg(long, default_value = "custom")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    scale: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    preset: String,
    /// Scales, comma-separated; `a..b` spans are inclusive (e.g. `0..3,5`).
    #[arg(long)]
    scales: String,
    /// Seeds, comma-separated; `a..b` spans are inclusive (e.g. `0..29`).
    #[arg(long)]
    seeds: String,
    /// Algorithms, comma-separated.
    #[arg(long, default_value = "greedy,psi,ssi,cbba,s_dcop")]
    algos: String,
    /// Output CSV; existing rows are reused (resume).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Exclusive-priority reward boost; defaults to one more than the total
    /// non-exclusive reward.
    #[arg(long)]
    boost: Option<f64>,
    /// Also pin foreign observations outside exclusive windows.
    #[arg(long, default_value_t = false)]
    strict: bool,
}

enum CliError {
    Input(String),
    Solver(String),
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Solver(m) | CliError::Validation(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::ExportLp(args) => cmd_export_lp(args),
    }
}

fn read_instance(path: &PathBuf) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(input_err)?;
    Instance::from_json(&text).map_err(input_err)
}

fn cmd_generate(args: GenArgs) -> Result<(), CliError> {
    let mut params = preset_params(&args.preset, args.scale).map_err(input_err)?;
    params.seed = args.seed;
    let instance = generate(&params).map_err(|e| CliError::Solver(e.to_string()))?;
    std::fs::write(&args.out, instance.to_json()).map_err(input_err)?;
    println!(
        "wrote {} ({} satellites, {} requests, {} observations)",
        args.out.display(),
        instance.satellites().count(),
        instance.n_requests(),
        instance.n_observations()
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let instance = read_instance(&args.instance)?;

    if args.validate_only {
        let schedule_path = args
            .schedule
            .as_ref()
            .ok_or_else(|| CliError::Input("--validate-only needs --schedule".into()))?;
        let text = std::fs::read_to_string(schedule_path).map_err(input_err)?;
        let schedule = Schedule::from_json(&text).map_err(input_err)?;
        let verdict = validate_schedule(&instance, &schedule);
        if verdict.is_ok() {
            println!("ok (reward {})", total_reward(&instance, &schedule));
            return Ok(());
        }
        return Err(CliError::Validation(verdict.to_string()));
    }

    let algo: Algo = args.algo.parse().map_err(input_err)?;
    let opts = SolveOptions {
        exact_budget: std::time::Duration::from_secs_f64(args.budget),
    };
    let run = run_solver(&instance, algo, &opts).map_err(|e| CliError::Solver(e.to_string()))?;

    // A schedule that fails its own validator is never emitted.
    let verdict = validate_schedule(&instance, &run.schedule);
    if !verdict.is_ok() {
        return Err(CliError::Validation(verdict.to_string()));
    }

    if let Some(out) = &args.out {
        std::fs::write(out, run.schedule.to_json()).map_err(input_err)?;
    }
    if let (Some(path), Some(bus)) = (&args.trace, &run.bus) {
        let file = std::fs::File::create(path).map_err(input_err)?;
        bus.write_trace_jsonl(std::io::BufWriter::new(file))
            .map_err(input_err)?;
    }

    let report = RunReport {
        algorithm: algo.name().to_string(),
        preset: args.preset.clone(),
        scale: args.scale,
        seed: args.seed,
        n_observations: instance.n_observations(),
        reward: total_reward(&instance, &run.schedule),
        time_s: run.wall_time.as_secs_f64(),
        msg_count: run.msg_count,
        msg_bytes: run.msg_bytes,
        valid: true,
    };
    println!("{}", CSV_HEADER.join(","));
    println!(
        "detail,{},{},{},{},{},{},{:.6},{},{},{},,,,,,,",
        report.algorithm,
        report.preset,
        report.scale,
        report.seed,
        report.n_observations,
        report.reward,
        report.time_s,
        report.msg_count,
        report.msg_bytes,
        report.valid
    );
    Ok(())
}

fn parse_list_u64(text: &str) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',').filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(input_err)?;
            let b: u64 = b.trim().parse().map_err(input_err)?;
            out.extend(a..=b);
        } else {
            out.push(part.trim().parse().map_err(input_err)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("empty list `{text}`")));
    }
    Ok(out)
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let scales: Vec<usize> = parse_list_u64(&args.scales)?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    let seeds = parse_list_u64(&args.seeds)?;
    let mut algos = Vec::new();
    for name in args.algos.split(',').filter(|a| !a.is_empty()) {
        algos.push(name.trim().parse::<Algo>().map_err(input_err)?);
    }
    // Reject an unknown preset before spending time on the sweep.
    preset_params(&args.preset, scales.iter().copied().min().unwrap_or(0))
        .map_err(input_err)?;
    let opts = SolveOptions {
        exact_budget: std::time::Duration::from_secs_f64(args.budget),
    };
    let threads = std::env::var("EOSCSP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    let rows = bench(
        &args.preset,
        &scales,
        &seeds,
        &algos,
        &args.out,
        &opts,
        threads,
    )
    .map_err(|e| CliError::Solver(e.to_string()))?;
    let invalid = rows.iter().filter(|r| !r.valid).count();
    println!(
        "wrote {} ({} detail rows, {} invalid)",
        args.out.display(),
        rows.len(),
        invalid
    );
    Ok(())
}

fn cmd_export_lp(args: ExportArgs) -> Result<(), CliError> {
    let instance = read_instance(&args.instance)?;
    let boost = args.boost.unwrap_or_else(|| auto_boost(&instance));
    let model =
        build_milp(&instance, boost, args.strict).map_err(|e| CliError::Input(e.to_string()))?;
    write_lp(&model, &args.out).map_err(input_err)?;
    println!(
        "wrote {} ({} rows, {} binaries)",
        args.out.display(),
        model.rows.len(),
        model.binaries.len()
    );
    Ok(())
}
