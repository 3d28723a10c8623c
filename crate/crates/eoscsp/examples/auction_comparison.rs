//! Run the three market-based coordinators on one conflicting instance and
//! compare rewards against the centralized greedy baseline, together with
//! the communication cost each scheme pays.
//!
//! Run with `cargo run --release --example auction_comparison`.

use eoscsp::auction::{solve_cbba, solve_psi, solve_ssi};
use eoscsp::gen::{conflicting_preset, generate};
use eoscsp::greedy::solve_greedy;
use eoscsp::model::{total_reward, validate_schedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = conflicting_preset(2)?;
    params.seed = 0;
    let instance = generate(&params)?;
    println!(
        "instance: {} requests, {} observations\n",
        instance.n_requests(),
        instance.n_observations()
    );

    let baseline = total_reward(&instance, &solve_greedy(&instance));
    println!("{:8} reward {baseline:8.1} (centralized, full information)", "greedy");

    for (name, outcome) in [
        ("psi", solve_psi(&instance)?),
        ("ssi", solve_ssi(&instance)?),
        ("cbba", solve_cbba(&instance)?),
    ] {
        assert!(validate_schedule(&instance, &outcome.schedule).is_ok());
        let metrics = outcome.bus.metrics();
        println!(
            "{name:8} reward {:8.1} ({:5.1}% of greedy), {:5} messages, {:8} bytes",
            total_reward(&instance, &outcome.schedule),
            100.0 * total_reward(&instance, &outcome.schedule) / baseline,
            metrics.message_count,
            metrics.message_bytes,
        );
    }
    Ok(())
}
