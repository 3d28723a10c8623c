//! Coordinate hosting decisions through per-request constraint
//! optimization: build one request's problem by hand to look inside, then
//! run the full sequential solver.
//!
//! Run with `cargo run --release --example sequential_dcop`.

use eoscsp::auction::{local_solves, CapacityLedger};
use eoscsp::gen::{conflicting_preset, generate};
use eoscsp::model::{total_reward, validate_schedule};
use eoscsp::sdcop::{build_request_dcop, solve_sdcop};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = conflicting_preset(1)?;
    params.seed = 5;
    let instance = generate(&params)?;

    // Peek at the first central request's coordination problem.
    let mut ledger = CapacityLedger::from_fixed(&instance);
    let mut plans = local_solves(&instance, &mut ledger);
    let central = instance.central_user().clone();
    let first_request = instance
        .requests()
        .find(|r| r.owner == central)
        .map(|r| r.id.clone())
        .expect("central requests exist");
    if let Some((problem, ctx)) =
        build_request_dcop(&instance, &first_request, &mut plans, &ledger)
    {
        println!(
            "request {}: {} eligible hosts, {} binary variables, {} constraints",
            ctx.request,
            ctx.eligible_agents.len(),
            problem.variables().len(),
            problem.constraints().len()
        );
        for (var, cost) in ctx.pi_table.iter().take(5) {
            println!("  revision cost {cost:6.1} for {var}");
        }
    } else {
        println!("request {first_request}: no exclusive user can host it");
    }

    // Full run.
    let outcome = solve_sdcop(&instance)?;
    assert!(validate_schedule(&instance, &outcome.schedule).is_ok());
    let metrics = outcome.bus.metrics();
    println!(
        "\nsequential coordination: reward {}, {} messages ({} bytes), trace hash {}",
        total_reward(&instance, &outcome.schedule),
        metrics.message_count,
        metrics.message_bytes,
        &outcome.bus.trace_hash()[..16],
    );
    Ok(())
}
