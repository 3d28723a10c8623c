//! Run records, solver dispatch, CSV output and benchmark sweeps.
//!
//! The CSV contract: one header line; detail rows and per-(algorithm,
//! scale) summary rows share it, distinguished by the `row_kind` column.
//! Sweeps are resumable: rows already present in the output file are kept
//! as-is and only missing cells are computed, so re-running a finished
//! sweep changes nothing.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::auction::{solve_cbba, solve_psi, solve_ssi};
use crate::bus::Bus;
use crate::error::{GenError, SolveError};
use crate::exact::{solve_exact, ExactConfig, ExactError};
use crate::gen::{conflicting_preset, generate, realistic_preset, GenerationParams};
use crate::greedy::solve_greedy;
use crate::model::{total_reward, validate_schedule, Instance, Schedule};
use crate::sdcop::solve_sdcop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algo {
    Greedy,
    Exact,
    Psi,
    Ssi,
    Cbba,
    SDcop,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::Greedy,
        Algo::Exact,
        Algo::Psi,
        Algo::Ssi,
        Algo::Cbba,
        Algo::SDcop,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Greedy => "greedy",
            Algo::Exact => "exact",
            Algo::Psi => "psi",
            Algo::Ssi => "ssi",
            Algo::Cbba => "cbba",
            Algo::SDcop => "s_dcop",
        }
    }
}

impl FromStr for Algo {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(Algo::Greedy),
            "exact" => Ok(Algo::Exact),
            "psi" => Ok(Algo::Psi),
            "ssi" => Ok(Algo::Ssi),
            "cbba" => Ok(Algo::Cbba),
            "s_dcop" => Ok(Algo::SDcop),
            other => Err(RunError::UnknownAlgo(other.to_string())),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("unknown algorithm `{0}`")]
    UnknownAlgo(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("csv i/o failed: {0}")]
    Csv(String),
}

/// Everything measured about one solver invocation.
pub struct SolverRun {
    pub schedule: Schedule,
    pub wall_time: Duration,
    pub msg_count: u64,
    pub msg_bytes: u64,
    pub trace_hash: String,
    /// The message bus, when the algorithm ran on one (for trace export).
    pub bus: Option<Bus>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub exact_budget: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            exact_budget: Duration::from_secs(60),
        }
    }
}

/// Dispatches to the named algorithm and collects timing plus message
/// metrics.
pub fn run_solver(p: &Instance, algo: Algo, opts: &SolveOptions) -> Result<SolverRun, RunError> {
    let started = Instant::now();
    let (schedule, bus) = match algo {
        Algo::Greedy => (solve_greedy(p), None),
        Algo::Exact => {
            let cfg = ExactConfig {
                budget: opts.exact_budget,
                priority_boost: None,
            };
            (solve_exact(p, &cfg)?, None)
        }
        Algo::Psi => {
            let outcome = solve_psi(p)?;
            (outcome.schedule, Some(outcome.bus))
        }
        Algo::Ssi => {
            let outcome = solve_ssi(p)?;
            (outcome.schedule, Some(outcome.bus))
        }
        Algo::Cbba => {
            let outcome = solve_cbba(p)?;
            (outcome.schedule, Some(outcome.bus))
        }
        Algo::SDcop => {
            let outcome = solve_sdcop(p)?;
            (outcome.schedule, Some(outcome.bus))
        }
    };
    let wall_time = started.elapsed();
    let (msg_count, msg_bytes, trace_hash) = match &bus {
        Some(bus) => (
            bus.metrics().message_count,
            bus.metrics().message_bytes,
            bus.trace_hash(),
        ),
        None => (0, 0, Bus::new().trace_hash()),
    };
    Ok(SolverRun {
        schedule,
        wall_time,
        msg_count,
        msg_bytes,
        trace_hash,
        bus,
    })
}

pub fn preset_params(preset: &str, scale: usize) -> Result<GenerationParams, RunError> {
    match preset {
        "conflicting" => Ok(conflicting_preset(scale)?),
        "realistic" => Ok(realistic_preset(scale)?),
        other => Err(RunError::UnknownPreset(other.to_string())),
    }
}

/// One benchmark row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub algorithm: String,
    pub preset: String,
    pub scale: usize,
    pub seed: u64,
    pub n_observations: usize,
    pub reward: f64,
    pub time_s: f64,
    pub msg_count: u64,
    pub msg_bytes: u64,
    pub valid: bool,
}

pub const CSV_HEADER: [&str; 18] = [
    "row_kind",
    "algorithm",
    "preset",
    "scale",
    "seed",
    "n_observations",
    "reward",
    "time_s",
    "msg_count",
    "msg_bytes",
    "valid",
    "reward_mean",
    "reward_p05",
    "reward_p95",
    "time_mean",
    "msg_count_mean",
    "msg_bytes_mean",
    "valid_fraction",
];

impl RunReport {
    fn to_record(&self) -> Vec<String> {
        let mut record = vec![
            "detail".to_string(),
            self.algorithm.clone(),
            self.preset.clone(),
            self.scale.to_string(),
            self.seed.to_string(),
            self.n_observations.to_string(),
            format!("{}", self.reward),
            format!("{:.6}", self.time_s),
            self.msg_count.to_string(),
            self.msg_bytes.to_string(),
            self.valid.to_string(),
        ];
        record.extend(std::iter::repeat_n(String::new(), 7));
        record
    }

    fn from_record(record: &[String]) -> Option<RunReport> {
        if record.len() != CSV_HEADER.len() || record[0] != "detail" {
            return None;
        }
        Some(RunReport {
            algorithm: record[1].clone(),
            preset: record[2].clone(),
            scale: record[3].parse().ok()?,
            seed: record[4].parse().ok()?,
            n_observations: record[5].parse().ok()?,
            reward: record[6].parse().ok()?,
            time_s: record[7].parse().ok()?,
            msg_count: record[8].parse().ok()?,
            msg_bytes: record[9].parse().ok()?,
            valid: record[10].parse().ok()?,
        })
    }
}

/// Runs one sweep cell: generate, solve, validate, measure.
pub fn run_cell(
    preset: &str,
    scale: usize,
    seed: u64,
    algo: Algo,
    opts: &SolveOptions,
) -> Result<RunReport, RunError> {
    let mut params = preset_params(preset, scale)?;
    params.seed = seed;
    let p = generate(&params)?;
    run_on_instance(&p, preset, scale, seed, algo, opts)
}

pub fn run_on_instance(
    p: &Instance,
    preset: &str,
    scale: usize,
    seed: u64,
    algo: Algo,
    opts: &SolveOptions,
) -> Result<RunReport, RunError> {
    let n_observations = p.n_observations();
    match run_solver(p, algo, opts) {
        Ok(run) => {
            let valid = validate_schedule(p, &run.schedule).is_ok();
            // Microsecond resolution, matching the CSV column precision so
            // that resumed sweeps reproduce their summary rows exactly.
            let time_s = (run.wall_time.as_secs_f64() * 1e6).round() / 1e6;
            Ok(RunReport {
                algorithm: algo.name().to_string(),
                preset: preset.to_string(),
                scale,
                seed,
                n_observations,
                reward: total_reward(p, &run.schedule),
                time_s,
                msg_count: run.msg_count,
                msg_bytes: run.msg_bytes,
                valid,
            })
        }
        // A failed cell is recorded, not fatal: the sweep continues.
        Err(_) => Ok(RunReport {
            algorithm: algo.name().to_string(),
            preset: preset.to_string(),
            scale,
            seed,
            n_observations,
            reward: 0.0,
            time_s: 0.0,
            msg_count: 0,
            msg_bytes: 0,
            valid: false,
        }),
    }
}

/// Nearest-rank percentile of a sorted sample.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summary_record(algo: &str, preset: &str, scale: usize, rows: &[&RunReport]) -> Vec<String> {
    let mut rewards: Vec<f64> = rows.iter().map(|r| r.reward).collect();
    rewards.sort_by(f64::total_cmp);
    let n = rows.len() as f64;
    let mean = |xs: &mut dyn Iterator<Item = f64>| xs.sum::<f64>() / n;
    vec![
        "summary".to_string(),
        algo.to_string(),
        preset.to_string(),
        scale.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{}", mean(&mut rows.iter().map(|r| r.reward))),
        format!("{}", percentile(&rewards, 0.05)),
        format!("{}", percentile(&rewards, 0.95)),
        format!("{:.6}", mean(&mut rows.iter().map(|r| r.time_s))),
        format!("{}", mean(&mut rows.iter().map(|r| r.msg_count as f64))),
        format!("{}", mean(&mut rows.iter().map(|r| r.msg_bytes as f64))),
        format!(
            "{}",
            rows.iter().filter(|r| r.valid).count() as f64 / n
        ),
    ]
}

/// Cross-product sweep with resume. Returns all detail rows in
/// (algorithm, scale, seed) order after writing the CSV.
pub fn bench(
    preset: &str,
    scales: &[usize],
    seeds: &[u64],
    algos: &[Algo],
    out_csv: &Path,
    opts: &SolveOptions,
    threads: usize,
) -> Result<Vec<RunReport>, RunError> {
    let mut algos = algos.to_vec();
    algos.sort();
    algos.dedup();
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();

    // Resume: keep any detail row matching a requested cell.
    let mut existing: BTreeMap<(String, usize, u64), RunReport> = BTreeMap::new();
    if out_csv.exists() {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(out_csv)
            .map_err(|e| RunError::Csv(e.to_string()))?;
        for record in reader.records() {
            let record = record.map_err(|e| RunError::Csv(e.to_string()))?;
            let fields: Vec<String> = record.iter().map(|f| f.to_string()).collect();
            if let Some(report) = RunReport::from_record(&fields) {
                if report.preset == preset {
                    existing.insert(
                        (report.algorithm.clone(), report.scale, report.seed),
                        report,
                    );
                }
            }
        }
    }

    struct Cell {
        algo: Algo,
        scale: usize,
        seed: u64,
    }
    let mut cells = Vec::new();
    for algo in &algos {
        for &scale in &scales {
            for &seed in &seeds {
                cells.push(Cell {
                    algo: *algo,
                    scale,
                    seed,
                });
            }
        }
    }

    let mut rows: Vec<Option<RunReport>> = cells
        .iter()
        .map(|c| existing.get(&(c.algo.name().to_string(), c.scale, c.seed)).cloned())
        .collect();

    let pending: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(i, _)| i)
        .collect();
    let workers = threads.max(1).min(pending.len().max(1));
    let results = std::sync::Mutex::new(Vec::<(usize, RunReport)>::new());
    std::thread::scope(|scope| {
        for chunk in pending.chunks(pending.len().div_ceil(workers).max(1)) {
            let cells = &cells;
            let results = &results;
            scope.spawn(move || {
                for &idx in chunk {
                    let cell = &cells[idx];
                    let report = run_cell(preset, cell.scale, cell.seed, cell.algo, opts)
                        .unwrap_or_else(|_| RunReport {
                            algorithm: cell.algo.name().to_string(),
                            preset: preset.to_string(),
                            scale: cell.scale,
                            seed: cell.seed,
                            n_observations: 0,
                            reward: 0.0,
                            time_s: 0.0,
                            msg_count: 0,
                            msg_bytes: 0,
                            valid: false,
                        });
                    results.lock().expect("no poisoned workers").push((idx, report));
                }
            });
        }
    });
    for (idx, report) in results.into_inner().expect("workers joined") {
        rows[idx] = Some(report);
    }
    let rows: Vec<RunReport> = rows.into_iter().map(|r| r.expect("all cells ran")).collect();

    // Deterministic output: detail rows, then summary rows.
    let mut writer = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(out_csv)
        .map_err(|e| RunError::Csv(e.to_string()))?;
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| RunError::Csv(e.to_string()))?;
    for row in &rows {
        writer
            .write_record(row.to_record())
            .map_err(|e| RunError::Csv(e.to_string()))?;
    }
    for algo in &algos {
        for &scale in &scales {
            let group: Vec<&RunReport> = rows
                .iter()
                .filter(|r| r.algorithm == algo.name() && r.scale == scale)
                .collect();
            if !group.is_empty() {
                writer
                    .write_record(summary_record(algo.name(), preset, scale, &group))
                    .map_err(|e| RunError::Csv(e.to_string()))?;
            }
        }
    }
    writer.flush().map_err(|e| RunError::Csv(e.to_string()))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    #[test]
    fn algo_names_round_trip() {
        for algo in Algo::ALL {
            assert_eq!(algo.name().parse::<Algo>().unwrap(), algo);
        }
        assert!("nonsense".parse::<Algo>().is_err());
    }

    #[test]
    fn run_solver_reports_metrics_for_bus_algorithms() {
        let p = testkit::three_satellite_demo();
        let greedy = run_solver(&p, Algo::Greedy, &SolveOptions::default()).unwrap();
        assert_eq!(greedy.msg_count, 0);
        let psi = run_solver(&p, Algo::Psi, &SolveOptions::default()).unwrap();
        assert!(psi.msg_count > 0);
        assert!(validate_schedule(&p, &psi.schedule).is_ok());
    }

    #[test]
    fn bench_row_counts_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("bench.csv");
        let opts = SolveOptions::default();
        let algos = [Algo::Greedy, Algo::Psi];
        let rows = bench("conflicting", &[0, 1], &[0, 1, 2], &algos, &out, &opts, 1).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);

        let text = std::fs::read_to_string(&out).unwrap();
        let detail = text.lines().filter(|l| l.starts_with("detail,")).count();
        let summary = text.lines().filter(|l| l.starts_with("summary,")).count();
        assert_eq!(detail, 12);
        assert_eq!(summary, 4);
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), CSV_HEADER.len());

        // Re-running recomputes nothing and rewrites the same bytes
        // (wall-clock columns included, because rows are reused verbatim).
        let again = bench("conflicting", &[0, 1], &[0, 1, 2], &algos, &out, &opts, 1).unwrap();
        assert_eq!(rows.len(), again.len());
        let text_again = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text, text_again);
    }

    #[test]
    fn percentile_is_nearest_rank() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&xs, 0.05), 1.0);
        assert_eq!(percentile(&xs, 0.95), 10.0);
        assert_eq!(percentile(&xs, 0.5), 5.0);
    }
}
