//! Run a small benchmark sweep and print the summary rows: mean reward and
//! message load per algorithm and scale. The CSV on disk is resumable.
//!
//! Run with `cargo run --release --example bench_sweep`.

use eoscsp::report::{bench, Algo, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("eoscsp_sweep.csv");
    let _ = std::fs::remove_file(&out);
    let algos = [Algo::Greedy, Algo::Psi, Algo::Ssi, Algo::Cbba, Algo::SDcop];
    let rows = bench(
        "conflicting",
        &[0, 1],
        &[0, 1, 2],
        &algos,
        &out,
        &SolveOptions::default(),
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    )?;
    println!("{} detail rows written to {}\n", rows.len(), out.display());

    println!(
        "{:8} {:>5} {:>12} {:>10} {:>12}",
        "algo", "scale", "mean reward", "messages", "bytes"
    );
    for algo in algos {
        for scale in [0usize, 1] {
            let group: Vec<_> = rows
                .iter()
                .filter(|r| r.algorithm == algo.name() && r.scale == scale)
                .collect();
            let n = group.len() as f64;
            println!(
                "{:8} {:>5} {:>12.1} {:>10.0} {:>12.0}",
                algo.name(),
                scale,
                group.iter().map(|r| r.reward).sum::<f64>() / n,
                group.iter().map(|r| r.msg_count as f64).sum::<f64>() / n,
                group.iter().map(|r| r.msg_bytes as f64).sum::<f64>() / n,
            );
        }
    }
    Ok(())
}
