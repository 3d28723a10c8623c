//! Build the mixed-integer model of a small instance and export it in LP
//! text format for an external solver.
//!
//! Run with `cargo run --example export_lp`.

use eoscsp::exact::auto_boost;
use eoscsp::milp::{build_milp, export_lp};
use eoscsp::samples;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = samples::three_satellite_demo();
    let boost = auto_boost(&instance);
    let model = build_milp(&instance, boost, false)?;
    println!(
        "model: {} x + {} order binaries, {} start variables, {} rows",
        model.n_x,
        model.n_beta,
        model.n_t,
        model.rows.len()
    );

    let path = std::env::temp_dir().join("eoscsp_demo.lp");
    std::fs::write(&path, export_lp(&model))?;
    println!("LP written to {}", path.display());

    // Strict mode additionally pins foreign observations outside exclusive
    // windows, trading reward for grant-free solutions.
    let strict = build_milp(&instance, boost, true)?;
    let forced_off = strict
        .bounds
        .iter()
        .filter(|b| b.var.starts_with("x_") && b.hi == 0.0)
        .count();
    println!("strict mode forces {forced_off} placement variables to zero");
    Ok(())
}
