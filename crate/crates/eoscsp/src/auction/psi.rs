//! Parallel single-item auction: the planner announces all requests at
//! once, every exclusive user values all of them against its initial plan,
//! and the planner awards each request to the highest bid. Because every
//! bid was computed against the same initial plan, an award can be stale by
//! the time the winner applies it; winners therefore re-derive the hosting
//! against their current plan and report lapses, which fall through to the
//! planner's outside-exclusives pass. The protocol exchanges few, large
//! messages.

use std::collections::BTreeMap;

use crate::bus::{Bus, Envelope, MsgKind};
use crate::error::SolveError;
use crate::ids::{RequestId, UserId};
use crate::model::{Instance, Schedule, ScheduleEntry};

use super::{
    assemble, candidates, central_requests_due_order, compute_bid, local_solves, residual_pass,
    AnnouncePayload, AwardPayload, Bid, BidBatch, CapacityLedger, CoordinationOutcome,
    PlanReport, Placement,
};

pub fn solve_psi(p: &Instance) -> Result<CoordinationOutcome, SolveError> {
    let mut bus = Bus::new();
    let planner = p.central_user().clone();
    bus.register(planner.clone());
    let bidders: Vec<UserId> = p.exclusive_users().map(|u| u.id.clone()).collect();
    for b in &bidders {
        bus.register(b.clone());
    }

    let mut ledger = CapacityLedger::from_fixed(p);
    let mut plans = local_solves(p, &mut ledger);
    let requests = central_requests_due_order(p);

    let mut hosted = Schedule::new();

    if !bidders.is_empty() && !requests.is_empty() {
        // Announcement: the full request book to every exclusive user.
        let announce = AnnouncePayload::for_requests(p, &requests);
        bus.broadcast(&planner, &bidders, MsgKind::Announce, &announce)?;
        bus.advance_round();

        // Valuation against the initial plans; one batched bid per user.
        for bidder in &bidders {
            let _ = bus.deliver(bidder);
            let plan = plans.get_mut(bidder).expect("plan exists");
            let mut bids = Vec::new();
            for rid in &requests {
                if !candidates(p, rid).contains(bidder) {
                    continue;
                }
                let request = p.request(rid).expect("announced request exists");
                if let Some(bid) = compute_bid(p, plan, &ledger, request) {
                    bids.push(bid);
                }
            }
            if !bids.is_empty() {
                let batch = BidBatch {
                    bidder: bidder.clone(),
                    bids,
                };
                bus.send(Envelope::new(
                    bidder.clone(),
                    planner.clone(),
                    MsgKind::Bid,
                    &batch,
                )?)?;
            }
        }
        bus.advance_round();

        // Winner determination: independently per request, highest value,
        // ties to the lowest user id.
        let mut best: BTreeMap<RequestId, Bid> = BTreeMap::new();
        for envelope in bus.deliver(&planner) {
            let batch: BidBatch = envelope.decode()?;
            for bid in batch.bids {
                let better = match best.get(&bid.request) {
                    None => true,
                    Some(current) => bid.value > current.value,
                };
                if better {
                    best.insert(bid.request.clone(), bid);
                }
            }
        }
        let mut awards: BTreeMap<UserId, Vec<RequestId>> = BTreeMap::new();
        for rid in &requests {
            if let Some(bid) = best.get(rid) {
                awards.entry(bid.bidder.clone()).or_default().push(rid.clone());
            }
        }
        for (winner, awarded) in &awards {
            bus.send(Envelope::new(
                planner.clone(),
                winner.clone(),
                MsgKind::Award,
                &AwardPayload {
                    requests: awarded.clone(),
                },
            )?)?;
        }
        bus.advance_round();

        // Winners commit in global due-date order, re-deriving each hosting
        // against their current plan; stale awards lapse.
        let mut reports: BTreeMap<UserId, PlanReport> = BTreeMap::new();
        for winner in awards.keys() {
            let _ = bus.deliver(winner);
            reports.insert(winner.clone(), PlanReport::default());
        }
        for rid in &requests {
            let Some(bid) = best.get(rid) else { continue };
            let winner = bid.bidder.clone();
            let plan = plans.get_mut(&winner).expect("winner has a plan");
            let request = p.request(rid).expect("request exists");
            let report = reports.entry(winner.clone()).or_default();
            match compute_bid(p, plan, &ledger, request) {
                Some(fresh) => {
                    let placement = Placement::from(&fresh);
                    plan.merge_award(p, &mut ledger, &placement)?;
                    report.placements.push(ScheduleEntry {
                        observation: fresh.observation.clone(),
                        start: fresh.start,
                    });
                    report.grants.extend(
                        plan.schedule
                            .grants()
                            .filter(|g| g.observation == fresh.observation)
                            .cloned(),
                    );
                }
                None => report.lapsed.push(rid.clone()),
            }
        }
        for (winner, report) in &reports {
            bus.send(Envelope::new(
                winner.clone(),
                planner.clone(),
                MsgKind::PlanReport,
                report,
            )?)?;
        }
        bus.advance_round();

        for envelope in bus.deliver(&planner) {
            let report: PlanReport = envelope.decode()?;
            for entry in &report.placements {
                hosted.insert(entry.observation.clone(), entry.start);
            }
            for grant in &report.grants {
                hosted.add_grant(grant.observation.clone(), grant.granted_by.clone());
            }
        }

        // Displaced own requests get one local re-insertion attempt.
        for plan in plans.values_mut() {
            plan.reinsert_displaced(p, &mut ledger);
        }
    }

    let planner_schedule = residual_pass(p, &mut ledger, &hosted, &requests);
    let schedule = assemble(p, &plans, &planner_schedule)?;
    debug_assert!(crate::model::validate_schedule(p, &schedule).is_ok());
    Ok(CoordinationOutcome { schedule, bus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{total_reward, validate_schedule};
    use crate::testkit;

    #[test]
    fn no_exclusive_users_reduces_to_outside_greedy() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("r0_0", "u0", 5.0, 3.0, &[("s0", 0.0, 30.0)]);
        b.request("r0_1", "u0", 5.0, 2.0, &[("s0", 30.0, 60.0)]);
        let p = b.build();
        let outcome = solve_psi(&p).unwrap();
        assert!(validate_schedule(&p, &outcome.schedule).is_ok());
        assert_eq!(outcome.bus.metrics().message_count, 0);
        assert_eq!(total_reward(&p, &outcome.schedule), 5.0);
    }

    #[test]
    fn single_request_single_bidder_trace_shape() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 10.0, 30.0)]);
        b.request("r0_0", "u0", 5.0, 5.0, &[("s0", 12.0, 28.0)]);
        let p = b.build();
        let outcome = solve_psi(&p).unwrap();
        assert!(validate_schedule(&p, &outcome.schedule).is_ok());
        assert_eq!(outcome.bus.count_of(MsgKind::Announce), 1);
        assert_eq!(outcome.bus.count_of(MsgKind::Bid), 1);
        assert_eq!(outcome.bus.count_of(MsgKind::Award), 1);
        assert!(outcome.schedule.start_of(&"r0_0_0".into()).is_some());
        assert!(outcome.schedule.has_grant(&"r0_0_0".into(), &"u1".into()));
    }

    #[test]
    fn awards_fall_back_to_residual_when_stale() {
        // Two requests whose only hosting slot is the same stretch of u1's
        // exclusive. Both bids are computed against the initial (empty)
        // plan; the second award lapses and its request is recovered
        // outside the exclusive.
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 10.0, 17.0)]);
        b.request("ra", "u0", 5.0, 5.0, &[("s0", 10.0, 17.0)]);
        b.request("rb", "u0", 5.0, 4.0, &[("s0", 10.0, 60.0)]);
        let p = b.build();
        let outcome = solve_psi(&p).unwrap();
        assert!(validate_schedule(&p, &outcome.schedule).is_ok());
        // Both requests end up scheduled: one hosted, one outside.
        assert!(outcome.schedule.start_of(&"ra_0".into()).is_some());
        let rb_start = outcome.schedule.start_of(&"rb_0".into()).unwrap();
        assert!(rb_start >= 18.0, "rb must sit outside the exclusive, got {rb_start}");
    }

    #[test]
    fn valid_on_generated_instances() {
        let mut params = crate::gen::conflicting_preset(0).unwrap();
        params.seed = 0;
        let p = crate::gen::generate(&params).unwrap();
        let outcome = solve_psi(&p).unwrap();
        let verdict = validate_schedule(&p, &outcome.schedule);
        assert!(verdict.is_ok(), "violations: {verdict}");
        assert!(outcome.bus.metrics().message_count > 0);
    }

    #[test]
    fn single_bidder_collapses_to_ssi() {
        // With one exclusive user and rewards that never justify
        // displacement, the parallel and sequential auctions award the same
        // requests to the same placements.
        for seed in 0..5u64 {
            let mut params = crate::gen::conflicting_preset(0).unwrap();
            params.exclusive_user_count = 1;
            params.requests_per_exclusive_user = 2..=2;
            params.central_request_count = 6..=6;
            params.seed = seed;
            let p = crate::gen::generate(&params).unwrap();
            let psi = solve_psi(&p).unwrap().schedule;
            let ssi = crate::auction::solve_ssi(&p).unwrap().schedule;
            assert_eq!(psi, ssi, "seed {seed}");
        }
    }
}
