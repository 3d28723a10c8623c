//! Solve a generated instance with the greedy baseline and inspect the
//! schedule: per-satellite load, hosted foreign observations, validity.
//!
//! Run with `cargo run --example greedy_baseline`.

use eoscsp::gen::{conflicting_preset, generate};
use eoscsp::greedy::solve_greedy;
use eoscsp::model::{total_reward, validate_schedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = conflicting_preset(1)?;
    params.seed = 3;
    let instance = generate(&params)?;

    let schedule = solve_greedy(&instance);
    let verdict = validate_schedule(&instance, &schedule);
    println!(
        "scheduled {} of {} requests, reward {}, validator: {}",
        schedule.len(),
        instance.n_requests(),
        total_reward(&instance, &schedule),
        verdict
    );

    for s in instance.satellites() {
        let load = schedule
            .entries()
            .filter(|(o, _)| {
                instance
                    .observation(o)
                    .is_some_and(|obs| obs.satellite == s.id)
            })
            .count();
        println!("  {}: {load}/{} slots used", s.id, s.capacity);
    }

    let hosted = schedule.grants().count();
    println!("{hosted} foreign observations hosted inside exclusive windows");
    Ok(())
}
