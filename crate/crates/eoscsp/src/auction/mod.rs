//! Market-based coordination: exclusive users bid to host the central
//! planner's requests inside their exclusive windows.
//!
//! The privacy contract: the only things crossing agent boundaries are the
//! typed payloads defined here (announcements, bids, awards, bundle states
//! and foreign-placement reports) — never a user's own plan. Satellite
//! capacity is the one shared aggregate: hosts consult the operator-level
//! count of booked slots per satellite, which reveals load but no content.

mod cbba;
mod psi;
mod ssi;

pub use cbba::{solve_cbba, CbbaConfig};
pub use psi::solve_psi;
pub use ssi::solve_ssi;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bus::Bus;
use crate::error::SolveError;
use crate::greedy::{first_slot, insertion_domains, sort_observations, HostPolicy, TrackSet};
use crate::ids::{ObservationId, RequestId, SatelliteId, UserId};
use crate::model::{Grant, Instance, Observation, Request, Schedule, ScheduleEntry};

/// Result of a coordination run: the assembled schedule plus the bus it ran
/// on, for metrics, trace and hash inspection.
pub struct CoordinationOutcome {
    pub schedule: Schedule,
    pub bus: Bus,
}

// ---------------------------------------------------------------------------
// Wire payloads (serialized with the same records as the file formats).

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnouncePayload {
    pub requests: Vec<Request>,
    pub observations: Vec<Observation>,
}

impl AnnouncePayload {
    pub fn for_requests(p: &Instance, requests: &[RequestId]) -> Self {
        let requests: Vec<Request> = requests
            .iter()
            .filter_map(|r| p.request(r))
            .cloned()
            .collect();
        let observations = requests
            .iter()
            .flat_map(|r| r.opportunities.iter())
            .filter_map(|o| p.observation(o))
            .cloned()
            .collect();
        AnnouncePayload {
            requests,
            observations,
        }
    }
}

/// A bid: the marginal reward of hosting `request` and the placement that
/// achieves it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bid {
    pub bidder: UserId,
    pub request: RequestId,
    /// Reward gained minus reward lost to displacements; always positive in
    /// a sent bid (non-positive valuations abstain).
    pub value: f64,
    pub observation: ObservationId,
    pub satellite: SatelliteId,
    pub start: f64,
    pub displaced: Vec<ObservationId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BidBatch {
    pub bidder: UserId,
    pub bids: Vec<Bid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AwardPayload {
    pub requests: Vec<RequestId>,
}

/// Placements an exclusive user reports to the planner: only foreign-owned
/// entries ever appear here.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PlanReport {
    pub placements: Vec<ScheduleEntry>,
    pub grants: Vec<Grant>,
    /// Awarded requests the reporter could no longer host.
    pub lapsed: Vec<RequestId>,
    /// Previously hosted observations withdrawn by a revision; their
    /// requests are open again.
    #[serde(default)]
    pub withdrawn: Vec<ObservationId>,
}

// ---------------------------------------------------------------------------
// Shared aggregate: per-satellite booked-slot counts.

/// Operator-level accounting of booked slots per satellite. Coordination
/// steps consult it for residual capacity; it never exposes which user booked
/// what.
#[derive(Debug, Clone, Default)]
pub struct CapacityLedger {
    used: BTreeMap<SatelliteId, u32>,
}

impl CapacityLedger {
    pub fn from_fixed(p: &Instance) -> Self {
        let mut ledger = CapacityLedger::default();
        for (o, _) in p.fixed().entries() {
            if let Some(obs) = p.observation(o) {
                ledger.charge(&obs.satellite);
            }
        }
        ledger
    }

    pub fn used(&self, s: &SatelliteId) -> u32 {
        self.used.get(s).copied().unwrap_or(0)
    }

    pub fn residual(&self, p: &Instance, s: &SatelliteId) -> u32 {
        p.satellite(s)
            .map(|sat| sat.capacity.saturating_sub(self.used(s)))
            .unwrap_or(0)
    }

    pub fn charge(&mut self, s: &SatelliteId) {
        *self.used.entry(s.clone()).or_insert(0) += 1;
    }

    pub fn release(&mut self, s: &SatelliteId) {
        let e = self.used.entry(s.clone()).or_insert(0);
        *e = e.saturating_sub(1);
    }
}

// ---------------------------------------------------------------------------
// Per-user plan state.

/// One user's private plan: its committed entries and track view. Tracks are
/// seeded with the instance-level fixed placements so feasibility checks see
/// them; the schedule holds only this user's own commitments.
#[derive(Debug, Clone)]
pub struct UserPlan {
    pub user: UserId,
    pub tracks: TrackSet,
    pub schedule: Schedule,
    /// Own requests reopened because their observation was displaced.
    pub displaced_requests: BTreeSet<RequestId>,
}

/// A concrete award placement, ready to merge into the winner's plan.
#[derive(Debug, Clone)]
pub struct Placement {
    pub observation: ObservationId,
    pub satellite: SatelliteId,
    pub start: f64,
    pub displaced: Vec<ObservationId>,
}

impl From<&Bid> for Placement {
    fn from(bid: &Bid) -> Self {
        Placement {
            observation: bid.observation.clone(),
            satellite: bid.satellite.clone(),
            start: bid.start,
            displaced: bid.displaced.clone(),
        }
    }
}

/// Undo record for a merged placement.
#[derive(Debug, Clone)]
pub struct Applied {
    observation: ObservationId,
    satellite: SatelliteId,
    displaced: Vec<(ObservationId, SatelliteId, f64)>,
}

impl UserPlan {
    pub fn new(p: &Instance, user: UserId) -> Self {
        UserPlan {
            user,
            tracks: TrackSet::from_fixed(p),
            schedule: Schedule::new(),
            displaced_requests: BTreeSet::new(),
        }
    }

    /// Aligns the externally-consumed slot counts with the shared ledger:
    /// whatever the ledger books beyond this plan's own track entries was
    /// booked by someone else.
    pub fn sync_external(&mut self, p: &Instance, ledger: &CapacityLedger) {
        let sat_ids: Vec<SatelliteId> = p.satellites().map(|s| s.id.clone()).collect();
        for s in sat_ids {
            let own = self.tracks.track(&s).map(|t| t.len()).unwrap_or(0) as u32;
            self.tracks
                .set_extra_occupancy(&s, ledger.used(&s).saturating_sub(own));
        }
    }

    /// Greedy placement of this user's own candidate observations.
    pub fn place_own(
        &mut self,
        p: &Instance,
        ledger: &mut CapacityLedger,
        candidates: &[ObservationId],
        policy: HostPolicy<'_>,
    ) {
        self.sync_external(p, ledger);
        let mut fulfilled: BTreeSet<RequestId> = self
            .schedule
            .entries()
            .filter_map(|(o, _)| p.observation(o).map(|obs| obs.request.clone()))
            .collect();
        for oid in candidates {
            let Some(obs) = p.observation(oid) else { continue };
            if fulfilled.contains(&obs.request) {
                continue;
            }
            let domains = insertion_domains(p, obs, policy);
            if let Some((sat, start)) = first_slot(p, obs, &mut self.tracks, &domains) {
                self.schedule.insert(oid.clone(), start);
                fulfilled.insert(obs.request.clone());
                self.displaced_requests.remove(&obs.request);
                ledger.charge(&sat);
            }
        }
    }

    /// Merges an award at its fixed start time: removes the displaced
    /// entries, inserts the placement, records the grant, and updates the
    /// ledger. Errors mean bid/award inconsistency.
    pub fn merge_award(
        &mut self,
        p: &Instance,
        ledger: &mut CapacityLedger,
        placement: &Placement,
    ) -> Result<Applied, SolveError> {
        let request = p
            .observation(&placement.observation)
            .map(|o| o.request.clone())
            .unwrap_or_else(|| RequestId::new("?"));
        let fail = |reason: &str| SolveError::InfeasibleMerge {
            request: request.clone(),
            reason: reason.to_string(),
        };

        let mut removed = Vec::new();
        for d in &placement.displaced {
            let Some(obs) = p.observation(d) else {
                return Err(fail("displaced observation unknown"));
            };
            let Some(old_start) = self.schedule.start_of(d) else {
                return Err(fail("displaced observation not in the plan"));
            };
            self.schedule.remove(d);
            self.tracks.track_mut(&obs.satellite).remove(d);
            ledger.release(&obs.satellite);
            if obs.owner == self.user {
                // Own requests get a local re-insertion attempt later;
                // displaced foreign awards are the caller's to report.
                self.displaced_requests.insert(obs.request.clone());
            }
            removed.push((d.clone(), obs.satellite.clone(), old_start));
        }

        self.sync_external(p, ledger);
        let obs = p
            .observation(&placement.observation)
            .ok_or_else(|| fail("awarded observation unknown"))?;
        let insert_ok = self.check_insert(p, obs, placement.start);
        if !insert_ok {
            // Roll the displacements back before reporting.
            for (d, sat, old_start) in removed.iter().rev() {
                self.schedule.insert(d.clone(), *old_start);
                self.tracks.track_mut(sat).insert(d.clone(), *old_start);
                ledger.charge(sat);
                if let Some(o) = p.observation(d) {
                    self.displaced_requests.remove(&o.request);
                }
            }
            return Err(fail("placement no longer fits the plan"));
        }

        self.schedule
            .insert(placement.observation.clone(), placement.start);
        self.tracks
            .track_mut(&placement.satellite)
            .insert(placement.observation.clone(), placement.start);
        ledger.charge(&placement.satellite);
        if obs.owner != self.user {
            self.schedule
                .add_grant(placement.observation.clone(), self.user.clone());
        }
        Ok(Applied {
            observation: placement.observation.clone(),
            satellite: placement.satellite.clone(),
            displaced: removed,
        })
    }

    /// Reverts a merge performed by [`UserPlan::merge_award`].
    pub fn revert(&mut self, p: &Instance, ledger: &mut CapacityLedger, applied: Applied) {
        self.schedule.remove(&applied.observation);
        self.tracks
            .track_mut(&applied.satellite)
            .remove(&applied.observation);
        ledger.release(&applied.satellite);
        for (d, sat, old_start) in applied.displaced.into_iter().rev() {
            self.schedule.insert(d.clone(), old_start);
            self.tracks.track_mut(&sat).insert(d.clone(), old_start);
            ledger.charge(&sat);
            if let Some(o) = p.observation(&d) {
                self.displaced_requests.remove(&o.request);
            }
        }
    }

    /// Whether inserting `obs` at `start` keeps this plan's track on the
    /// observation's satellite consistent (capacity, windows, transitions,
    /// and exclusive containment for foreign observations).
    fn check_insert(&self, p: &Instance, obs: &Observation, start: f64) -> bool {
        let Some(sat) = p.satellite(&obs.satellite) else {
            return false;
        };
        if self.tracks.occupancy(&obs.satellite) >= sat.capacity as usize {
            return false;
        }
        if start < obs.window.start || start + obs.duration > obs.window.end {
            return false;
        }
        if obs.owner != self.user {
            let run = obs.interval_at(start);
            let hosted = p
                .user(&self.user)
                .map(|u| {
                    u.exclusives_on(&obs.satellite)
                        .any(|e| e.window.contains_window(&run))
                })
                .unwrap_or(false);
            if !hosted {
                return false;
            }
        }
        let entries = self
            .tracks
            .track(&obs.satellite)
            .map(|t| t.entries().to_vec())
            .unwrap_or_default();
        let pos = entries.partition_point(|e| (e.start, &e.observation) < (start, &obs.id));
        if pos > 0 {
            let prev = &entries[pos - 1];
            let Some(prev_obs) = p.observation(&prev.observation) else {
                return false;
            };
            let required =
                prev.start + prev_obs.duration + sat.transition.between(&prev.observation, &obs.id);
            if start < required {
                return false;
            }
        }
        if pos < entries.len() {
            let next = &entries[pos];
            let required =
                start + obs.duration + sat.transition.between(&obs.id, &next.observation);
            if next.start < required {
                return false;
            }
        }
        true
    }

    /// Attempts to re-insert the own requests reopened by displacements.
    pub fn reinsert_displaced(&mut self, p: &Instance, ledger: &mut CapacityLedger) {
        if self.displaced_requests.is_empty() {
            return;
        }
        let candidates: Vec<&Observation> = self
            .displaced_requests
            .iter()
            .filter_map(|r| p.request(r))
            .flat_map(|r| r.opportunities.iter())
            .filter_map(|o| p.observation(o))
            .collect();
        let sorted = sort_observations(candidates.into_iter());
        self.place_own(p, ledger, &sorted, HostPolicy::AutoGrant);
    }
}

// ---------------------------------------------------------------------------
// Hosting valuation.

/// How far a hosting revision may reach into the host's existing plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevisionScope {
    /// Only the host's own observations may be displaced. Used by the
    /// auction protocols, which have no way to tell the planner that a
    /// previously awarded placement was withdrawn.
    OwnOnly,
    /// Any plan entry except fixed placements may be displaced, hosted
    /// awards included; the caller must report withdrawn awards so their
    /// requests become open again.
    AnyPlanned,
}

/// The cheapest way for `plan`'s user to host `obs`: plain insertion when it
/// fits, otherwise the single displacement losing the least reward. `None`
/// when no revision hosts the observation. The plan is probed but restored.
pub(crate) fn cheapest_hosting(
    p: &Instance,
    plan: &mut UserPlan,
    obs: &Observation,
    scope: RevisionScope,
) -> Option<Placement> {
    let user = plan.user.clone();
    let domains = insertion_domains(p, obs, HostPolicy::WithinExclusivesOf(&user));
    if domains.is_empty() {
        return None;
    }

    if let Some((sat, start)) = first_slot(p, obs, &mut plan.tracks, &domains) {
        plan.tracks.track_mut(&sat).remove(&obs.id);
        return Some(Placement {
            observation: obs.id.clone(),
            satellite: sat,
            start,
            displaced: Vec::new(),
        });
    }

    // Single-displacement revisions, cheapest reward first, over the
    // entries on the observation's satellite the scope allows. Fixed
    // placements always stay put.
    let mut own_entries: Vec<(ObservationId, f64)> = plan
        .schedule
        .entries()
        .filter_map(|(o, _)| p.observation(o))
        .filter(|e| e.satellite == obs.satellite)
        .filter(|e| match scope {
            RevisionScope::OwnOnly => e.owner == user,
            RevisionScope::AnyPlanned => true,
        })
        .map(|e| (e.id.clone(), e.reward))
        .collect();
    own_entries.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    for (candidate, _) in own_entries {
        let Some(old_start) = plan.schedule.start_of(&candidate) else {
            continue;
        };
        plan.tracks.track_mut(&obs.satellite).remove(&candidate);
        let placed = first_slot(p, obs, &mut plan.tracks, &domains);
        if let Some((sat, _)) = &placed {
            plan.tracks.track_mut(sat).remove(&obs.id);
        }
        plan.tracks
            .track_mut(&obs.satellite)
            .insert(candidate.clone(), old_start);
        if let Some((sat, start)) = placed {
            return Some(Placement {
                observation: obs.id.clone(),
                satellite: sat,
                start,
                displaced: vec![candidate],
            });
        }
    }
    None
}

/// Reward lost to the displacements of a placement.
pub(crate) fn displaced_reward(p: &Instance, placement: &Placement) -> f64 {
    placement
        .displaced
        .iter()
        .filter_map(|o| p.observation(o))
        .fold(0.0, |acc, o| acc + o.reward)
}

/// Best positive-value bid of `plan`'s user for `request`, against the
/// current plan and the shared capacity counts.
pub fn compute_bid(
    p: &Instance,
    plan: &mut UserPlan,
    ledger: &CapacityLedger,
    request: &Request,
) -> Option<Bid> {
    plan.sync_external(p, ledger);
    let mut best: Option<(f64, Placement)> = None;
    for oid in &request.opportunities {
        let Some(obs) = p.observation(oid) else { continue };
        let Some(hosting) = cheapest_hosting(p, plan, obs, RevisionScope::OwnOnly) else {
            continue;
        };
        let value = obs.reward - displaced_reward(p, &hosting);
        let better = match &best {
            None => true,
            Some((best_value, _)) => value > *best_value,
        };
        if better {
            best = Some((value, hosting));
        }
    }
    let (value, placement) = best?;
    if value <= 0.0 {
        return None; // abstain
    }
    Some(Bid {
        bidder: plan.user.clone(),
        request: request.id.clone(),
        value,
        observation: placement.observation,
        satellite: placement.satellite,
        start: placement.start,
        displaced: placement.displaced,
    })
}

// ---------------------------------------------------------------------------
// Shared protocol steps.

/// Central requests still open, in announcement order (due date, then id).
pub fn central_requests_due_order(p: &Instance) -> Vec<RequestId> {
    let central = p.central_user().clone();
    let mut requests: Vec<&Request> = p
        .open_requests()
        .filter(|r| r.owner == central)
        .collect();
    requests.sort_by(|a, b| {
        a.window
            .end
            .total_cmp(&b.window.end)
            .then_with(|| a.id.cmp(&b.id))
    });
    requests.into_iter().map(|r| r.id.clone()).collect()
}

/// Exclusive users with an exclusive window able to intersect one of the
/// request's opportunities (same satellite, overlapping span).
pub fn candidates(p: &Instance, request: &RequestId) -> Vec<UserId> {
    let Some(r) = p.request(request) else {
        return Vec::new();
    };
    p.exclusive_users()
        .filter(|u| {
            r.opportunities.iter().any(|oid| {
                p.observation(oid).is_some_and(|o| {
                    u.exclusives_on(&o.satellite)
                        .any(|e| e.window.touches(&o.window))
                })
            })
        })
        .map(|u| u.id.clone())
        .collect()
}

/// Every exclusive user solves its own sub-problem (the runs are
/// independent; the simulation executes them in id order against the shared
/// capacity ledger).
pub fn local_solves(
    p: &Instance,
    ledger: &mut CapacityLedger,
) -> BTreeMap<UserId, UserPlan> {
    let mut plans = BTreeMap::new();
    let users: Vec<UserId> = p.exclusive_users().map(|u| u.id.clone()).collect();
    for user in users {
        let mut plan = UserPlan::new(p, user.clone());
        let own: Vec<&Observation> = p
            .open_requests()
            .filter(|r| r.owner == user)
            .flat_map(|r| r.opportunities.iter())
            .filter_map(|o| p.observation(o))
            .collect();
        let sorted = sort_observations(own.into_iter());
        plan.place_own(p, ledger, &sorted, HostPolicy::AutoGrant);
        plans.insert(user, plan);
    }
    plans
}

/// The planner's final pass: schedule whatever is still open outside the
/// exclusive windows, seeded with the hosted placements it knows about.
pub(crate) fn residual_pass(
    p: &Instance,
    ledger: &mut CapacityLedger,
    hosted: &Schedule,
    open: &[RequestId],
) -> Schedule {
    let mut plan = UserPlan::new(p, p.central_user().clone());
    for (o, t) in hosted.entries() {
        if let Some(obs) = p.observation(o) {
            plan.tracks.track_mut(&obs.satellite).insert(o.clone(), t);
        }
    }
    let candidates: Vec<&Observation> = open
        .iter()
        .filter(|r| !hosted_covers(p, hosted, r))
        .filter_map(|r| p.request(r))
        .flat_map(|r| r.opportunities.iter())
        .filter_map(|o| p.observation(o))
        .collect();
    let sorted = sort_observations(candidates.into_iter());
    plan.place_own(p, ledger, &sorted, HostPolicy::OutsideExclusivesOnly);
    plan.schedule
}

fn hosted_covers(p: &Instance, hosted: &Schedule, request: &RequestId) -> bool {
    p.request(request).is_some_and(|r| {
        r.opportunities
            .iter()
            .any(|o| hosted.start_of(o).is_some())
    })
}

/// Final assembly: fixed placements, every user plan, and the planner's
/// residual schedule.
pub(crate) fn assemble(
    p: &Instance,
    plans: &BTreeMap<UserId, UserPlan>,
    planner: &Schedule,
) -> Result<Schedule, SolveError> {
    let mut out = p.fixed().clone();
    for plan in plans.values() {
        out.absorb(&plan.schedule).map_err(SolveError::Model)?;
    }
    out.absorb(planner).map_err(SolveError::Model)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    fn hosting_fixture() -> Instance {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 10.0, 30.0)]);
        b.exclusive_user("u2", 1, &[("s0", 40.0, 60.0)]);
        b.request("r1_0", "u1", 5.0, 2.0, &[("s0", 10.0, 28.0)]);
        b.request("r0_0", "u0", 5.0, 5.0, &[("s0", 10.0, 30.0)]);
        b.request("r0_1", "u0", 5.0, 3.0, &[("s0", 0.0, 100.0)]);
        b.build()
    }

    #[test]
    fn bid_uses_plain_insertion_when_space_allows() {
        let p = hosting_fixture();
        let mut ledger = CapacityLedger::from_fixed(&p);
        let mut plans = local_solves(&p, &mut ledger);
        let plan = plans.get_mut(&"u1".into()).unwrap();
        // u1's own observation sits at [10, 15]; the foreign request fits
        // right after it.
        let bid = compute_bid(&p, plan, &ledger, p.request(&"r0_0".into()).unwrap()).unwrap();
        assert_eq!(bid.value, 5.0);
        assert!(bid.displaced.is_empty());
        assert_eq!(bid.start, 16.0);
    }

    #[test]
    fn wrong_satellite_abstains() {
        let mut b = testkit::InstanceBuilder::new();
        b.satellite("s0", 0.0, 100.0, 4, 1.0);
        b.satellite("s1", 0.0, 100.0, 4, 1.0);
        b.central("u0");
        b.exclusive_user("u1", 1, &[("s1", 10.0, 30.0)]);
        b.request("r0_0", "u0", 5.0, 5.0, &[("s0", 10.0, 30.0)]);
        let p = b.build();
        let mut ledger = CapacityLedger::from_fixed(&p);
        let mut plans = local_solves(&p, &mut ledger);
        let plan = plans.get_mut(&"u1".into()).unwrap();
        assert!(compute_bid(&p, plan, &ledger, p.request(&"r0_0".into()).unwrap()).is_none());
    }

    #[test]
    fn displacement_bid_nets_gained_minus_lost() {
        // u1's exclusive is exactly one observation wide, occupied by its
        // own reward-2 placement; hosting the reward-5 request requires
        // displacing it, netting 3.
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 10.0, 16.0)]);
        b.request("r1_0", "u1", 5.0, 2.0, &[("s0", 10.0, 16.0)]);
        b.request("r0_0", "u0", 5.0, 5.0, &[("s0", 10.0, 16.0)]);
        let p = b.build();
        let mut ledger = CapacityLedger::from_fixed(&p);
        let mut plans = local_solves(&p, &mut ledger);
        let plan = plans.get_mut(&"u1".into()).unwrap();
        assert!(plan.schedule.start_of(&"r1_0_0".into()).is_some());

        let bid = compute_bid(&p, plan, &ledger.clone(), p.request(&"r0_0".into()).unwrap()).unwrap();
        assert_eq!(bid.value, 3.0);
        assert_eq!(bid.displaced, vec![crate::ids::ObservationId::new("r1_0_0")]);
        // Probing left the plan untouched.
        assert!(plan.schedule.start_of(&"r1_0_0".into()).is_some());
    }

    #[test]
    fn merge_award_applies_and_reverts_cleanly() {
        let p = hosting_fixture();
        let mut ledger = CapacityLedger::from_fixed(&p);
        let mut plans = local_solves(&p, &mut ledger);
        let plan = plans.get_mut(&"u1".into()).unwrap();
        let before_schedule = plan.schedule.clone();

        let bid = compute_bid(&p, plan, &ledger.clone(), p.request(&"r0_0".into()).unwrap()).unwrap();
        let applied = plan
            .merge_award(&p, &mut ledger, &Placement::from(&bid))
            .unwrap();
        assert!(plan.schedule.start_of(&"r0_0_0".into()).is_some());
        assert!(plan.schedule.has_grant(&"r0_0_0".into(), &"u1".into()));
        assert_eq!(ledger.used(&"s0".into()), 2);

        plan.revert(&p, &mut ledger, applied);
        assert_eq!(plan.schedule, before_schedule);
        assert_eq!(ledger.used(&"s0".into()), 1);
    }

    #[test]
    fn merge_award_rejects_stale_placements() {
        let p = hosting_fixture();
        let mut ledger = CapacityLedger::from_fixed(&p);
        let mut plans = local_solves(&p, &mut ledger);
        let plan = plans.get_mut(&"u1".into()).unwrap();
        // A placement colliding with u1's own observation at [10, 15].
        let stale = Placement {
            observation: "r0_0_0".into(),
            satellite: "s0".into(),
            start: 12.0,
            displaced: vec![],
        };
        assert!(plan.merge_award(&p, &mut ledger, &stale).is_err());
    }

    #[test]
    fn candidates_follow_window_intersection() {
        let p = hosting_fixture();
        assert_eq!(candidates(&p, &"r0_0".into()), vec![UserId::new("u1")]);
        let both = candidates(&p, &"r0_1".into());
        assert_eq!(both, vec![UserId::new("u1"), UserId::new("u2")]);
    }

    #[test]
    fn due_date_order_sorts_by_window_end() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 8, 1.0);
        b.request("ra", "u0", 5.0, 1.0, &[("s0", 0.0, 50.0)]);
        b.request("rb", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        let p = b.build();
        assert_eq!(
            central_requests_due_order(&p),
            vec![RequestId::new("rb"), RequestId::new("ra")]
        );
    }
}
