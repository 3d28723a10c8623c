//! Sequential single-item auction: requests are announced one at a time in
//! due-date order, each candidate bids against its current (already
//! updated) plan, and the award is merged before the next announcement.
//! Bids are never stale, so awards always commit; the price is many small
//! messages.

use crate::bus::{Bus, Envelope, MsgKind};
use crate::error::SolveError;
use crate::ids::UserId;
use crate::model::{Instance, Schedule};

use super::{
    assemble, candidates, central_requests_due_order, compute_bid, local_solves, residual_pass,
    AnnouncePayload, AwardPayload, Bid, CapacityLedger, CoordinationOutcome, Placement,
};

pub fn solve_ssi(p: &Instance) -> Result<CoordinationOutcome, SolveError> {
    let mut bus = Bus::new();
    let planner = p.central_user().clone();
    bus.register(planner.clone());
    for u in p.exclusive_users() {
        bus.register(u.id.clone());
    }

    let mut ledger = CapacityLedger::from_fixed(p);
    let mut plans = local_solves(p, &mut ledger);
    let requests = central_requests_due_order(p);

    let mut hosted = Schedule::new();

    for rid in &requests {
        let eligible: Vec<UserId> = candidates(p, rid);
        if eligible.is_empty() {
            continue;
        }
        let announce = AnnouncePayload::for_requests(p, std::slice::from_ref(rid));
        bus.broadcast(&planner, &eligible, MsgKind::Announce, &announce)?;
        bus.advance_round();

        let request = p.request(rid).expect("announced request exists");
        let mut best: Option<Bid> = None;
        for bidder in &eligible {
            let _ = bus.deliver(bidder);
            let plan = plans.get_mut(bidder).expect("plan exists");
            let Some(bid) = compute_bid(p, plan, &ledger, request) else {
                continue; // abstention is silent
            };
            bus.send(Envelope::new(
                bidder.clone(),
                planner.clone(),
                MsgKind::Bid,
                &bid,
            )?)?;
            let better = match &best {
                None => true,
                Some(current) => bid.value > current.value,
            };
            if better {
                best = Some(bid);
            }
        }
        bus.advance_round();
        let _ = bus.deliver(&planner);

        if let Some(winning) = best {
            bus.send(Envelope::new(
                planner.clone(),
                winning.bidder.clone(),
                MsgKind::Award,
                &AwardPayload {
                    requests: vec![rid.clone()],
                },
            )?)?;
            bus.advance_round();
            let _ = bus.deliver(&winning.bidder);

            // Nothing changed between this bid and its award, so the merge
            // cannot fail; an error here is a protocol bug.
            let plan = plans.get_mut(&winning.bidder).expect("winner has a plan");
            plan.merge_award(p, &mut ledger, &Placement::from(&winning))?;
            hosted.insert(winning.observation.clone(), winning.start);
            hosted.add_grant(winning.observation.clone(), winning.bidder.clone());
        }
    }

    for plan in plans.values_mut() {
        plan.reinsert_displaced(p, &mut ledger);
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
    fn earlier_due_date_wins_the_contested_slot() {
        // Two requests, one hosting slot. Announcement order is due date:
        // the earlier-due request gets the slot, the later one lapses into
        // the residual pass (where nothing fits), so only one is scheduled.
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 40.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 10.0, 17.0)]);
        b.request("ra", "u0", 5.0, 2.0, &[("s0", 10.0, 17.0)]);
        b.request("rb", "u0", 5.0, 5.0, &[("s0", 12.0, 30.0)]);
        let p = b.build();
        // ra due at 17, rb due at 30: ra is announced first and hosted even
        // though rb carries the larger reward.
        let outcome = solve_ssi(&p).unwrap();
        assert!(validate_schedule(&p, &outcome.schedule).is_ok());
        assert!(outcome.schedule.start_of(&"ra_0".into()).is_some());
        // rb still fits outside the exclusive: [18, 30] allows start 18.
        assert_eq!(outcome.schedule.start_of(&"rb_0".into()), Some(18.0));
    }

    #[test]
    fn message_shape_per_request_with_single_candidate() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 10.0, 30.0)]);
        b.request("r0_0", "u0", 5.0, 5.0, &[("s0", 12.0, 28.0)]);
        let p = b.build();
        let outcome = solve_ssi(&p).unwrap();
        // One candidate: one announce, one bid, one award.
        assert_eq!(outcome.bus.count_of(MsgKind::Announce), 1);
        assert_eq!(outcome.bus.count_of(MsgKind::Bid), 1);
        assert_eq!(outcome.bus.count_of(MsgKind::Award), 1);
    }

    #[test]
    fn no_exclusive_users_reduces_to_outside_greedy() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("r0_0", "u0", 5.0, 3.0, &[("s0", 0.0, 30.0)]);
        let p = b.build();
        let outcome = solve_ssi(&p).unwrap();
        assert_eq!(outcome.bus.metrics().message_count, 0);
        assert_eq!(total_reward(&p, &outcome.schedule), 3.0);
    }

    #[test]
    fn valid_on_generated_instances() {
        let mut params = crate::gen::conflicting_preset(0).unwrap();
        params.seed = 1;
        let p = crate::gen::generate(&params).unwrap();
        let outcome = solve_ssi(&p).unwrap();
        let verdict = validate_schedule(&p, &outcome.schedule);
        assert!(verdict.is_ok(), "violations: {verdict}");
    }
}
