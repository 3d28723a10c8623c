//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]` line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The oracle used against the exact solver lives in this file and shares
//! no code with the implementation it checks: it enumerates every choice of
//! fulfilling observation per request and every per-satellite ordering,
//! with its own earliest-start propagation.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use eoscsp::auction::{solve_cbba, solve_psi, solve_ssi};
use eoscsp::dcop::{solve_dpop, solve_exhaustive, Cost, ConstraintKind, DcopProblem, DpopConfig};
use eoscsp::exact::{auto_boost, boosted_reward, solve_exact, ExactConfig};
use eoscsp::gen::{conflicting_preset, generate};
use eoscsp::greedy::solve_greedy;
use eoscsp::model::{total_reward, validate_schedule, Instance, Observation, Schedule};
use eoscsp::report::{run_solver, Algo, SolveOptions};
use eoscsp::testkit;
use eoscsp::time::TimeWindow;

// ---------------------------------------------------------------------------
// Independent exhaustive enumerator (the oracle).

mod oracle {
    use super::*;

    /// Placement windows under the same ownership semantics the solvers
    /// use: exclusive owners stay inside their own exclusives, central
    /// observations may go anywhere in their window.
    fn allowed_windows(p: &Instance, o: &Observation) -> Vec<TimeWindow> {
        let owner = p.user(&o.owner).expect("owner exists");
        let mut windows: Vec<TimeWindow> = if owner.is_exclusive() {
            owner
                .exclusives_on(&o.satellite)
                .filter_map(|e| e.window.intersect(&o.window))
                .filter(|w| w.length() >= o.duration)
                .collect()
        } else {
            vec![o.window]
        };
        windows.sort_by(|a, b| a.start.total_cmp(&b.start));
        windows
    }

    fn earliest_start(windows: &[TimeWindow], lower: f64, duration: f64) -> Option<f64> {
        for w in windows {
            let t = if w.start > lower { w.start } else { lower };
            if t + duration <= w.end {
                return Some(t);
            }
        }
        None
    }

    /// Extends per-satellite sequences one observation at a time, pruning
    /// infeasible prefixes; returns true when some completion of `rest`
    /// onto the current cursor state exists.
    fn sequences_feasible(
        p: &Instance,
        cursors: &mut BTreeMap<String, (Option<String>, f64)>,
        rest: &mut Vec<&Observation>,
    ) -> bool {
        if rest.is_empty() {
            return true;
        }
        for i in 0..rest.len() {
            let obs = rest.remove(i);
            let sat = p.satellite(&obs.satellite).expect("satellite exists");
            let key = obs.satellite.to_string();
            let (prev_obs, prev_end) = cursors
                .get(&key)
                .cloned()
                .unwrap_or((None, f64::NEG_INFINITY));
            let lower = match &prev_obs {
                None => f64::NEG_INFINITY,
                Some(prev) => {
                    prev_end + sat.transition.between(&prev.as_str().into(), &obs.id)
                }
            };
            if let Some(t) = earliest_start(&allowed_windows(p, obs), lower, obs.duration) {
                cursors.insert(key.clone(), (Some(obs.id.to_string()), t + obs.duration));
                if sequences_feasible(p, cursors, rest) {
                    rest.insert(i, obs);
                    return true;
                }
            }
            cursors.insert(key.clone(), (prev_obs, prev_end));
            rest.insert(i, obs);
        }
        false
    }

    pub struct Best {
        pub boosted: f64,
        pub reward: f64,
        pub exclusives: usize,
    }

    /// Maximum over every per-request observation choice (or skip) that
    /// admits a feasible per-satellite ordering.
    pub fn best_schedule(p: &Instance, boost: f64) -> Best {
        let requests: Vec<Vec<&Observation>> = p
            .requests()
            .map(|r| {
                let mut obs: Vec<&Observation> = r
                    .opportunities
                    .iter()
                    .filter_map(|o| p.observation(o))
                    .collect();
                obs.sort_by(|a, b| a.id.cmp(&b.id));
                obs
            })
            .collect();
        let mut choice = vec![0usize; requests.len()]; // 0 = skip, k = obs k-1
        let mut best = Best {
            boosted: 0.0,
            reward: 0.0,
            exclusives: 0,
        };
        loop {
            let chosen: Vec<&Observation> = requests
                .iter()
                .zip(&choice)
                .filter(|(_, c)| **c > 0)
                .map(|(obs, c)| obs[*c - 1])
                .collect();

            let capacity_ok = p.satellites().all(|s| {
                chosen.iter().filter(|o| o.satellite == s.id).count() <= s.capacity as usize
            });
            if capacity_ok {
                let mut boosted = 0.0;
                let mut reward = 0.0;
                let mut exclusives = 0;
                for o in &chosen {
                    reward += o.reward;
                    if p.user(&o.owner).is_some_and(|u| u.is_exclusive()) {
                        boosted += o.reward + boost;
                        exclusives += 1;
                    } else {
                        boosted += o.reward;
                    }
                }
                if boosted > best.boosted {
                    let mut cursors = BTreeMap::new();
                    let mut rest = chosen.clone();
                    if sequences_feasible(p, &mut cursors, &mut rest) {
                        best = Best {
                            boosted,
                            reward,
                            exclusives,
                        };
                    }
                }
            }

            // Next choice vector.
            let mut advanced = false;
            for i in (0..choice.len()).rev() {
                choice[i] += 1;
                if choice[i] <= requests[i].len() {
                    advanced = true;
                    break;
                }
                choice[i] = 0;
            }
            if !advanced {
                break;
            }
        }
        best
    }
}

fn count_scheduled_exclusives(p: &Instance, m: &Schedule) -> usize {
    m.entries()
        .filter_map(|(o, _)| p.observation(o))
        .filter(|o| p.user(&o.owner).is_some_and(|u| u.is_exclusive()))
        .count()
}

// ---------------------------------------------------------------------------
// Criterion 1: exact solver equals the exhaustive oracle.

#[test]
fn oracle_equivalence() {
    let started = Instant::now();
    let cfg = ExactConfig::default();
    let mut checked = 0;
    for seed in 0..200u64 {
        let p = testkit::tiny_instance(seed, 8);
        let boost = auto_boost(&p);
        let exact = solve_exact(&p, &cfg).expect("small instances solve within budget");
        assert!(validate_schedule(&p, &exact).is_ok(), "seed {seed}: invalid");
        let oracle = oracle::best_schedule(&p, boost);
        let exact_boosted = boosted_reward(&p, &exact, boost);
        let exact_reward = total_reward(&p, &exact);
        assert_eq!(
            exact_boosted, oracle.boosted,
            "seed {seed}: boosted objective differs (exact {exact_boosted}, oracle {})",
            oracle.boosted
        );
        assert_eq!(
            exact_reward, oracle.reward,
            "seed {seed}: reward differs (exact {exact_reward}, oracle {})",
            oracle.reward
        );
        assert_eq!(count_scheduled_exclusives(&p, &exact), oracle.exclusives);
        checked += 1;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "oracle comparison took {elapsed:?}"
    );
    println!("[PASS] oracle equivalence: {checked} instances matched the exhaustive enumerator in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// Criterion 2: exact bounds every other solver from above.

#[test]
fn baseline_dominance() {
    let unboosted = ExactConfig {
        priority_boost: Some(0.0),
        ..ExactConfig::default()
    };
    let mut checked = 0;
    for seed in 1000..1100u64 {
        let p = testkit::tiny_instance(seed, 12);
        let exact = total_reward(
            &p,
            &solve_exact(&p, &unboosted).expect("small instances solve within budget"),
        );
        let greedy = total_reward(&p, &solve_greedy(&p));
        assert!(greedy >= 0.0);
        assert!(
            exact >= greedy - 1e-9,
            "seed {seed}: exact {exact} < greedy {greedy}"
        );
        for (name, schedule) in [
            ("psi", solve_psi(&p).unwrap().schedule),
            ("ssi", solve_ssi(&p).unwrap().schedule),
            ("cbba", solve_cbba(&p).unwrap().schedule),
            ("s_dcop", eoscsp::sdcop::solve_sdcop(&p).unwrap().schedule),
        ] {
            let reward = total_reward(&p, &schedule);
            assert!(
                exact >= reward - 1e-9,
                "seed {seed}: exact {exact} < {name} {reward}"
            );
        }
        checked += 1;
    }
    println!("[PASS] baseline dominance: exact >= greedy >= 0 and exact >= every coordinator on {checked} instances");
}

// ---------------------------------------------------------------------------
// Criterion 3: every solver output on generated instances validates.

#[test]
fn validity_suite() {
    let mut runs = 0;
    for scale in 0..=2usize {
        for seed in 0..10u64 {
            let mut params = conflicting_preset(scale).expect("scale in sweep");
            params.seed = seed;
            let p = generate(&params).expect("generation succeeds");
            for (name, schedule) in [
                ("greedy", solve_greedy(&p)),
                ("psi", solve_psi(&p).unwrap().schedule),
                ("ssi", solve_ssi(&p).unwrap().schedule),
                ("cbba", solve_cbba(&p).unwrap().schedule),
                ("s_dcop", eoscsp::sdcop::solve_sdcop(&p).unwrap().schedule),
            ] {
                let verdict = validate_schedule(&p, &schedule);
                assert!(
                    verdict.is_ok(),
                    "{name} on scale {scale} seed {seed}: {verdict}"
                );
                runs += 1;
            }
        }
    }
    println!("[PASS] validity suite: {runs} solver runs (scales 0-2, seeds 0-9) all passed validation, grant rules included");
}

// ---------------------------------------------------------------------------
// Criterion 4: the DCOP engine equals its brute-force oracle.

fn random_dcop(seed: u64) -> DcopProblem {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=10usize);
    let mut p = DcopProblem::new();
    // Insert variables in a shuffled order, sometimes attaching the unary
    // cost right away: constraint scopes must survive later insertions.
    let mut insertion: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let j = rng.random_range(i..n);
        insertion.swap(i, j);
    }
    for i in insertion {
        let name = format!("v{i:02}");
        p.add_variable(name.clone(), format!("a{}", i % 4), vec![0, 1])
            .unwrap();
        if rng.random_range(0..2) == 0 {
            let table = ConstraintKind::Table(vec![
                Cost::Finite(rng.random_range(0..20) as f64),
                Cost::Finite(rng.random_range(0..20) as f64),
            ]);
            p.add_constraint(format!("early_{name}"), &[name.as_str()], table)
                .unwrap();
        }
    }
    let names: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
    for c in 0..rng.random_range(0..=2 * n) {
        match rng.random_range(0..3) {
            0 => {
                let v = rng.random_range(0..n);
                let table = ConstraintKind::Table(vec![
                    Cost::Finite(rng.random_range(0..20) as f64),
                    Cost::Finite(rng.random_range(0..20) as f64),
                ]);
                p.add_constraint(format!("u{c}"), &[names[v].as_str()], table)
                    .unwrap();
            }
            1 => {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a == b {
                    continue;
                }
                let mut entries = Vec::new();
                for _ in 0..4 {
                    entries.push(if rng.random_range(0..6) == 0 {
                        Cost::Infinite
                    } else {
                        Cost::Finite(rng.random_range(0..20) as f64)
                    });
                }
                p.add_constraint(
                    format!("b{c}"),
                    &[names[a].as_str(), names[b].as_str()],
                    ConstraintKind::Table(entries),
                )
                .unwrap();
            }
            _ => {
                if n < 2 {
                    continue;
                }
                let k = rng.random_range(2..=n.min(5));
                let mut picks: Vec<usize> = (0..n).collect();
                for i in 0..k {
                    let j = rng.random_range(i..n);
                    picks.swap(i, j);
                }
                let scope: Vec<&str> = picks[..k].iter().map(|i| names[*i].as_str()).collect();
                p.add_constraint(
                    format!("c{c}"),
                    &scope,
                    ConstraintKind::AtMostNonzero {
                        limit: rng.random_range(0..=k as u32),
                    },
                )
                .unwrap();
            }
        }
    }
    p
}

#[test]
fn dpop_optimality() {
    let started = Instant::now();
    for seed in 0..500u64 {
        let p = random_dcop(seed);
        let dpop = solve_dpop(&p, &DpopConfig::default()).expect("within memory cap");
        let oracle = solve_exhaustive(&p).expect("within enumeration cap");
        assert_eq!(
            dpop.solution.cost, oracle.cost,
            "seed {seed}: dpop {:?} vs exhaustive {:?}",
            dpop.solution.cost, oracle.cost
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(120),
        "dpop fuzz took {elapsed:?}"
    );
    println!("[PASS] dpop optimality: 500 fuzzed problems matched the exhaustive oracle in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6 share one mid-scale sweep.

const MID_SCALE: usize = 4;

struct SweepCell {
    algo: &'static str,
    reward: f64,
    msg_count: u64,
    msg_bytes: u64,
}

fn mid_scale_sweep() -> &'static Vec<Vec<SweepCell>> {
    static SWEEP: OnceLock<Vec<Vec<SweepCell>>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let opts = SolveOptions::default();
        (0..10u64)
            .map(|seed| {
                let mut params = conflicting_preset(MID_SCALE).expect("scale in sweep");
                params.seed = seed;
                let p = generate(&params).expect("generation succeeds");
                assert!(p.n_observations() >= 200);
                [Algo::Greedy, Algo::Psi, Algo::Ssi, Algo::Cbba, Algo::SDcop]
                    .into_iter()
                    .map(|algo| {
                        let run = run_solver(&p, algo, &opts).expect("solver runs");
                        assert!(validate_schedule(&p, &run.schedule).is_ok());
                        SweepCell {
                            algo: algo.name(),
                            reward: total_reward(&p, &run.schedule),
                            msg_count: run.msg_count,
                            msg_bytes: run.msg_bytes,
                        }
                    })
                    .collect()
            })
            .collect()
    })
}

fn mean_reward(sweep: &[Vec<SweepCell>], algo: &str) -> f64 {
    let rewards: Vec<f64> = sweep
        .iter()
        .flat_map(|cells| cells.iter().filter(|c| c.algo == algo))
        .map(|c| c.reward)
        .collect();
    rewards.iter().sum::<f64>() / rewards.len() as f64
}

#[test]
fn qualitative_reward_ordering() {
    let sweep = mid_scale_sweep();
    let greedy = mean_reward(sweep, "greedy");
    let psi = mean_reward(sweep, "psi");
    let ssi = mean_reward(sweep, "ssi");
    let cbba = mean_reward(sweep, "cbba");
    let s_dcop = mean_reward(sweep, "s_dcop");

    assert!(cbba >= psi, "mean cbba {cbba} < mean psi {psi}");
    assert!(s_dcop >= psi, "mean s_dcop {s_dcop} < mean psi {psi}");
    for (name, mean) in [("psi", psi), ("ssi", ssi), ("cbba", cbba), ("s_dcop", s_dcop)] {
        assert!(
            mean >= 0.8 * greedy,
            "{name} mean {mean} below 80% of greedy {greedy}"
        );
    }
    println!(
        "[PASS] qualitative reward ordering at scale {MID_SCALE}: greedy {greedy:.1}, psi {psi:.1}, ssi {ssi:.1}, cbba {cbba:.1}, s_dcop {s_dcop:.1}"
    );
}

#[test]
fn communication_ordering() {
    let sweep = mid_scale_sweep();
    let mut bytes_ok = 0;
    let mut count_ok = 0;
    for cells in sweep.iter() {
        let get = |algo: &str| cells.iter().find(|c| c.algo == algo).expect("algo ran");
        if get("psi").msg_bytes > get("cbba").msg_bytes {
            bytes_ok += 1;
        }
        if get("ssi").msg_count > get("psi").msg_count {
            count_ok += 1;
        }
    }
    assert!(bytes_ok >= 8, "psi>cbba bytes held on only {bytes_ok}/10 seeds");
    assert!(count_ok >= 8, "ssi>psi counts held on only {count_ok}/10 seeds");
    println!(
        "[PASS] communication ordering: psi out-weighs cbba on {bytes_ok}/10 seeds, ssi out-counts psi on {count_ok}/10 seeds"
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: exclusive observations always land inside their owners'
// windows when jointly schedulable.

fn roomy_two_user_fixture() -> Instance {
    let mut b = testkit::InstanceBuilder::new();
    b.satellite("s0", 0.0, 200.0, 10, 1.0);
    b.satellite("s1", 0.0, 200.0, 10, 1.0);
    b.central("u0");
    b.exclusive_user("u1", 1, &[("s0", 10.0, 60.0), ("s1", 100.0, 150.0)]);
    b.exclusive_user("u2", 1, &[("s0", 80.0, 130.0)]);
    b.request("r1_0", "u1", 5.0, 30.0, &[("s0", 10.0, 40.0)]);
    b.request("r1_1", "u1", 5.0, 20.0, &[("s1", 100.0, 140.0)]);
    b.request("r2_0", "u2", 5.0, 40.0, &[("s0", 82.0, 120.0)]);
    b.request("r0_0", "u0", 5.0, 4.0, &[("s0", 20.0, 55.0)]);
    b.request("r0_1", "u0", 5.0, 2.0, &[("s1", 0.0, 50.0)]);
    b.build()
}

fn crowded_single_satellite_fixture() -> Instance {
    let mut b = testkit::InstanceBuilder::single_satellite(0.0, 120.0, 8, 1.0);
    b.exclusive_user("u1", 1, &[("s0", 0.0, 40.0)]);
    b.exclusive_user("u2", 1, &[("s0", 50.0, 90.0)]);
    b.request("r1_0", "u1", 5.0, 10.0, &[("s0", 0.0, 20.0)]);
    b.request("r1_1", "u1", 5.0, 10.0, &[("s0", 15.0, 40.0)]);
    b.request("r2_0", "u2", 5.0, 50.0, &[("s0", 50.0, 75.0)]);
    b.request("r2_1", "u2", 5.0, 10.0, &[("s0", 70.0, 90.0)]);
    b.request("r0_0", "u0", 5.0, 5.0, &[("s0", 0.0, 120.0)]);
    b.build()
}

#[test]
fn exclusive_priority() {
    let fixtures = [
        ("demo", testkit::three_satellite_demo()),
        ("roomy", roomy_two_user_fixture()),
        ("crowded", crowded_single_satellite_fixture()),
    ];
    let opts = SolveOptions::default();
    for (fixture_name, p) in &fixtures {
        let exclusive_total = testkit::exclusive_observations(p)
            .iter()
            .filter_map(|o| p.observation(o))
            .map(|o| o.request.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        for algo in Algo::ALL {
            let run = run_solver(p, algo, &opts).expect("solver runs");
            assert!(validate_schedule(p, &run.schedule).is_ok());
            let scheduled = count_scheduled_exclusives(p, &run.schedule);
            assert_eq!(
                scheduled,
                exclusive_total,
                "{} on {fixture_name}: {scheduled}/{exclusive_total} exclusive requests scheduled",
                algo.name()
            );
            // Validation already enforces that each one sits inside its
            // owner's windows (rule for exclusive ownership).
        }
    }
    println!(
        "[PASS] exclusive priority: all exclusive observations scheduled inside owners' windows on {} fixtures x {} algorithms",
        fixtures.len(),
        Algo::ALL.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: repeated runs are bit-identical.

#[test]
fn determinism() {
    let mut params = conflicting_preset(1).expect("scale in sweep");
    params.seed = 0;
    let p = generate(&params).expect("generation succeeds");
    let opts = SolveOptions::default();
    for algo in [Algo::Greedy, Algo::Psi, Algo::Ssi, Algo::Cbba, Algo::SDcop] {
        let runs: Vec<(String, String)> = (0..3)
            .map(|_| {
                let run = run_solver(&p, algo, &opts).expect("solver runs");
                (run.schedule.to_json(), run.trace_hash)
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{} differs between runs", algo.name());
        assert_eq!(runs[1], runs[2], "{} differs between runs", algo.name());
    }
    println!("[PASS] determinism: identical schedule JSON and trace hash across 3 repeated runs of 5 algorithms");
}

// ---------------------------------------------------------------------------
// Criterion 9: committed format goldens.

fn golden_fixtures() -> Vec<(&'static str, Instance)> {
    let tiny_a = testkit::tiny_instance(11, 8);
    let mut params = eoscsp::gen::GenerationParams {
        seed: 99,
        satellite_count: 2,
        satellite_capacity: 3,
        horizon: TimeWindow::of(0.0, 80.0),
        exclusive_user_count: 1,
        requests_per_exclusive_user: 2..=2,
        exclusives_per_user: 2,
        exclusive_duration: 10.0..=14.0,
        central_request_count: 2..=2,
        opportunities_per_request: 2,
        observation_duration: 3.0,
        observation_window_duration: 6.0..=10.0,
        exclusive_reward: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        central_reward: 1..=5,
        transition_time: 1.0,
        windows_only_inside_exclusives: false,
    };
    params.seed = 99;
    let tiny_b = generate(&params).expect("fixture generates");
    vec![
        ("demo", testkit::three_satellite_demo()),
        ("tiny_a", tiny_a),
        ("tiny_b", tiny_b),
    ]
}

#[test]
fn format_goldens() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/goldens");
    let update = std::env::var("UPDATE_GOLDENS").is_ok();
    for (name, instance) in golden_fixtures() {
        let json = instance.to_json();
        let model = eoscsp::milp::build_milp(&instance, auto_boost(&instance), false)
            .expect("model builds");
        let lp = eoscsp::milp::export_lp(&model);

        let json_path = dir.join(format!("{name}.json"));
        let lp_path = dir.join(format!("{name}.lp"));
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&json_path, &json).unwrap();
            std::fs::write(&lp_path, &lp).unwrap();
            continue;
        }
        let want_json = std::fs::read_to_string(&json_path)
            .unwrap_or_else(|_| panic!("golden {name}.json missing; run with UPDATE_GOLDENS=1"));
        assert_eq!(json, want_json, "instance JSON for `{name}` drifted");
        let want_lp = std::fs::read_to_string(&lp_path)
            .unwrap_or_else(|_| panic!("golden {name}.lp missing; run with UPDATE_GOLDENS=1"));
        assert_eq!(lp, want_lp, "LP export for `{name}` drifted");

        // Round-trip: the committed instance parses back to the same value.
        let parsed = Instance::from_json(&want_json).expect("golden parses");
        assert_eq!(parsed, instance);
    }
    if update {
        println!("[PASS] format goldens: regenerated");
    } else {
        println!("[PASS] format goldens: 3 instance JSONs and 3 LP exports byte-identical to committed files");
    }
}
