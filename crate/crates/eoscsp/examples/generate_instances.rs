//! Generate benchmark instances from both regime presets and write one to
//! disk as JSON.
//!
//! Run with `cargo run --example generate_instances`.

use eoscsp::gen::{conflicting_preset, generate, realistic_preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = conflicting_preset(0)?;
    params.seed = 0;
    let small = generate(&params)?;
    println!(
        "conflicting scale 0, seed 0: {} satellites, {} users, {} requests, {} observations",
        small.satellites().count(),
        small.users().count(),
        small.n_requests(),
        small.n_observations()
    );
    for s in small.satellites() {
        let exclusive_spans = small
            .users()
            .flat_map(|u| u.exclusives_on(&s.id))
            .map(|e| e.window.length())
            .sum::<f64>();
        println!(
            "  {}: horizon [{}, {}], capacity {}, {:.0}s under exclusive reservation",
            s.id, s.horizon.start, s.horizon.end, s.capacity, exclusive_spans
        );
    }

    let mut params = realistic_preset(1)?;
    params.seed = 7;
    let large = generate(&params)?;
    println!(
        "realistic scale 1, seed 7: {} satellites, {} requests, {} observations over a {:.0}s horizon",
        large.satellites().count(),
        large.n_requests(),
        large.n_observations(),
        large.satellites().next().map(|s| s.horizon.length()).unwrap_or(0.0)
    );

    let path = std::env::temp_dir().join("eoscsp_conflicting_s0_seed0.json");
    std::fs::write(&path, small.to_json())?;
    println!("instance written to {}", path.display());
    Ok(())
}
