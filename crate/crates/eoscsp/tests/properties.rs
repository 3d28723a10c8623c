//! Property tests over randomly generated instances.

use proptest::prelude::*;

use eoscsp::auction::{compute_bid, local_solves, CapacityLedger, Placement};
use eoscsp::greedy::solve_greedy;
use eoscsp::model::{total_reward, validate_schedule, Instance};
use eoscsp::testkit;

fn arb_instance() -> impl Strategy<Value = Instance> {
    (0u64..10_000, 4usize..=14).prop_map(|(seed, max_obs)| testkit::tiny_instance(seed, max_obs))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Serialization round-trips exactly, including raw float values.
    #[test]
    fn instance_json_round_trips(p in arb_instance()) {
        let json = p.to_json();
        let back = Instance::from_json(&json).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_json(), json);
    }

    /// Projecting away exclusive-covered observations twice changes nothing.
    #[test]
    fn outside_exclusives_is_idempotent(p in arb_instance()) {
        let once = p.outside_exclusives();
        prop_assert_eq!(once.outside_exclusives(), once);
    }

    /// The greedy baseline always emits a valid schedule with non-negative
    /// reward and at most one observation per request.
    #[test]
    fn greedy_output_is_always_valid(p in arb_instance()) {
        let m = solve_greedy(&p);
        let verdict = validate_schedule(&p, &m);
        prop_assert!(verdict.is_ok(), "{}", verdict);
        prop_assert!(total_reward(&p, &m) >= 0.0);
        for r in p.requests() {
            prop_assert!(
                r.opportunities.iter().filter(|o| m.start_of(o).is_some()).count() <= 1
            );
        }
    }

    /// Merging any bid an exclusive user actually produces keeps its plan
    /// valid for its own sub-problem.
    #[test]
    fn merged_awards_validate(p in arb_instance()) {
        let mut ledger = CapacityLedger::from_fixed(&p);
        let mut plans = local_solves(&p, &mut ledger);
        let central = p.central_user().clone();
        let requests: Vec<_> = p
            .requests()
            .filter(|r| r.owner == central)
            .map(|r| r.id.clone())
            .collect();
        let users: Vec<_> = plans.keys().cloned().collect();
        for user in users {
            for rid in &requests {
                let request = p.request(rid).unwrap();
                let plan = plans.get_mut(&user).unwrap();
                let Some(bid) = compute_bid(&p, plan, &ledger, request) else {
                    continue;
                };
                plan.merge_award(&p, &mut ledger, &Placement::from(&bid)).unwrap();
                // The merged plan, together with everything fixed, stays
                // consistent on this user's view of the world.
                let mut view = p.fixed().clone();
                view.absorb(&plan.schedule).unwrap();
                let verdict = validate_schedule(&p, &view);
                prop_assert!(verdict.is_ok(), "user {} after {}: {}", user, rid, verdict);
            }
        }
    }
}
