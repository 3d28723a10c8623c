//! Compare the greedy baseline against the exact branch-and-bound ground
//! truth on small random instances.
//!
//! Run with `cargo run --release --example exact_ground_truth`.

use std::time::Duration;

use eoscsp::exact::{solve_exact, ExactConfig};
use eoscsp::gen::{generate, GenerationParams};
use eoscsp::greedy::solve_greedy;
use eoscsp::model::total_reward;
use eoscsp::time::TimeWindow;

fn small_params(seed: u64) -> GenerationParams {
    GenerationParams {
        seed,
        satellite_count: 2,
        satellite_capacity: 3,
        horizon: TimeWindow::of(0.0, 70.0),
        exclusive_user_count: 1,
        requests_per_exclusive_user: 2..=2,
        exclusives_per_user: 2,
        exclusive_duration: 9.0..=14.0,
        central_request_count: 3..=3,
        opportunities_per_request: 2,
        observation_duration: 3.0,
        observation_window_duration: 6.0..=11.0,
        exclusive_reward: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        central_reward: 1..=5,
        transition_time: 1.0,
        windows_only_inside_exclusives: false,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExactConfig {
        budget: Duration::from_secs(10),
        priority_boost: Some(0.0), // plain reward maximization
    };
    let mut gaps = Vec::new();
    for seed in 0..20 {
        let instance = generate(&small_params(seed))?;
        let greedy = total_reward(&instance, &solve_greedy(&instance));
        let exact = total_reward(&instance, &solve_exact(&instance, &cfg)?);
        let gap = if exact > 0.0 { greedy / exact } else { 1.0 };
        gaps.push(gap);
        println!(
            "seed {seed:2}: {} observations, greedy {greedy:6.1}, exact {exact:6.1}, ratio {gap:.3}",
            instance.n_observations()
        );
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    println!("mean greedy/exact ratio over {} instances: {mean:.3}", gaps.len());
    Ok(())
}
