//! End-to-end checks of the `eoscsp` binary: exit codes, file outputs,
//! determinism of generated instances, and the benchmark CSV contract.

use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};

/// Frozen digest of `gen --preset conflicting --scale 0 --seed 0`: the
/// generator's output is part of the compatibility contract.
const CONFLICTING_S0_SEED0_SHA256: &str =
    "15e91cf9b08a384aefd4a9c81ae3a88a634565b80bc849e1b72d776ad48f8498";

fn binary() -> PathBuf {
    let mut path = PathBuf::from(env!("CARGO_BIN_EXE_eoscsp"));
    assert!(path.exists(), "binary missing at {}", path.display());
    path = path.canonicalize().unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn sha256(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn gen_is_deterministic_and_matches_the_frozen_digest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    for out in [&first, &second] {
        let output = run(&[
            "gen",
            "--preset",
            "conflicting",
            "--scale",
            "0",
            "--seed",
            "0",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    assert_eq!(sha256(&first), sha256(&second));
    assert_eq!(sha256(&first), CONFLICTING_S0_SEED0_SHA256);
}

#[test]
fn gen_realistic_counts_and_bad_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let output = run(&[
        "gen", "--preset", "realistic", "--scale", "0", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let instance = eoscsp::Instance::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(instance.satellites().count(), 8);

    let bad = run(&[
        "gen", "--preset", "conflicting", "--scale", "99", "--seed", "0", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn solve_writes_schedule_and_report_row() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("i.json");
    run(&[
        "gen", "--preset", "conflicting", "--scale", "0", "--seed", "3", "--out",
        instance.to_str().unwrap(),
    ]);
    let schedule = dir.path().join("s.json");
    let output = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--algo",
        "psi",
        "--out",
        schedule.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let mut lines = stdout.lines();
    assert!(lines.next().unwrap().starts_with("row_kind,algorithm,"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("detail,psi,"));
    // The s_dcop run always talks; its row must carry messages.
    let dcop = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--algo",
        "s_dcop",
    ]);
    let text = String::from_utf8(dcop.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let msg_count: u64 = row.split(',').nth(8).unwrap().parse().unwrap();
    assert!(msg_count > 0);

    // Re-validation of the emitted schedule succeeds.
    let check = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--validate-only",
        "--schedule",
        schedule.to_str().unwrap(),
    ]);
    assert!(check.status.success());

    // A corrupted schedule is rejected with the validation exit code.
    let broken = dir.path().join("broken.json");
    let mut m = eoscsp::Schedule::from_json(&std::fs::read_to_string(&schedule).unwrap()).unwrap();
    let p = eoscsp::Instance::from_json(&std::fs::read_to_string(&instance).unwrap()).unwrap();
    let victim = p.observations().next().unwrap();
    m.insert(victim.id.clone(), victim.window.end + 50.0);
    std::fs::write(&broken, m.to_json()).unwrap();
    let check = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--validate-only",
        "--schedule",
        broken.to_str().unwrap(),
    ]);
    assert_eq!(check.status.code(), Some(4));
}

#[test]
fn unknown_algo_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("i.json");
    run(&[
        "gen", "--preset", "conflicting", "--scale", "0", "--seed", "0", "--out",
        instance.to_str().unwrap(),
    ]);
    let output = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--algo",
        "simplex",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn exact_budget_exhaustion_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("i.json");
    run(&[
        "gen", "--preset", "conflicting", "--scale", "0", "--seed", "0", "--out",
        instance.to_str().unwrap(),
    ]);
    // 160 observations with a zero budget: the exact solver cannot finish.
    let output = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--algo",
        "exact",
        "--budget",
        "0",
    ]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn bench_writes_resumable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let args = [
        "bench",
        "--preset",
        "conflicting",
        "--scales",
        "0..1",
        "--seeds",
        "0,1,2",
        "--algos",
        "greedy,ssi",
        "--out",
        out.to_str().unwrap(),
    ];
    let output = run(&args);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("detail,")).count(), 12);
    assert_eq!(text.lines().filter(|l| l.starts_with("summary,")).count(), 4);

    // Resume: a second identical run reuses every row, byte for byte.
    let again = run(&args);
    assert!(again.status.success());
    assert_eq!(text, std::fs::read_to_string(&out).unwrap());
}

#[test]
fn export_lp_writes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("i.json");
    run(&[
        "gen", "--preset", "conflicting", "--scale", "0", "--seed", "1", "--out",
        instance.to_str().unwrap(),
    ]);
    let lp = dir.path().join("model.lp");
    let output = run(&[
        "export-lp",
        "--instance",
        instance.to_str().unwrap(),
        "--out",
        lp.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.starts_with("\\ eoscsp\nMaximize\n"));
    assert!(text.trim_end().ends_with("End"));
    assert!(text.contains("Subject To"));
    assert!(text.contains("Binaries"));
}

#[test]
fn solve_writes_a_trace_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("i.json");
    run(&[
        "gen", "--preset", "conflicting", "--scale", "0", "--seed", "2", "--out",
        instance.to_str().unwrap(),
    ]);
    let trace = dir.path().join("trace.jsonl");
    let output = run(&[
        "solve",
        "--instance",
        instance.to_str().unwrap(),
        "--algo",
        "cbba",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(record.get("round").is_some());
        assert!(record.get("kind").is_some());
        assert!(record.get("size").is_some());
    }
}
