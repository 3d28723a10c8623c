//! Consensus-based bundle coordination. Each exclusive user greedily grows
//! a bundle of requests by marginal value, exchanges (bid, winner,
//! timestamp) state with the neighbors it shares interests with, and on
//! being outbid drops the lost item and everything added after it, whose
//! valuations the loss invalidated.
//!
//! The open request book is common knowledge here: there is no auctioneer
//! announcement step, every agent derives its own candidate set and
//! neighborhood from the shared problem data. Candidates of one request
//! always know each other (sharing an item makes them neighbors), so
//! consensus state only needs to travel one hop; messages carry just the
//! entries that changed since the last exchange with that neighbor, which
//! keeps the traffic to small bundle-state records and final placement
//! reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bus::{run_rounds, Bus, Envelope, MsgKind, RoundAgent};
use crate::error::{BusError, SolveError};
use crate::ids::{RequestId, UserId};
use crate::model::{Instance, Schedule, ScheduleEntry};

use super::{
    assemble, candidates, central_requests_due_order, compute_bid, local_solves, residual_pass,
    Applied, CapacityLedger, CoordinationOutcome, PlanReport, Placement, UserPlan,
};

/// Knobs for the consensus loop; a zero `round_cap` derives the cap from
/// the problem size.
#[derive(Debug, Clone, Default)]
pub struct CbbaConfig {
    /// Hard cap on consensus rounds; exceeding it is a protocol failure.
    pub round_cap: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleEntry {
    request: RequestId,
    winner: Option<UserId>,
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleState {
    entries: Vec<BundleEntry>,
    timestamps: Vec<(UserId, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
struct Belief {
    winner: Option<UserId>,
    value: f64,
}

impl Belief {
    fn free() -> Self {
        Belief {
            winner: None,
            value: 0.0,
        }
    }
}

/// `a` (bidding `value_a`) beats `b` (holding `value_b`); ties go to the
/// lexicographically smaller id.
fn beats(a: &UserId, value_a: f64, b: &UserId, value_b: f64) -> bool {
    value_a > value_b || (value_a == value_b && a < b)
}

enum Action {
    Update,
    Reset,
    Leave,
}

struct CbbaAgent<'a> {
    p: &'a Instance,
    id: UserId,
    planner: UserId,
    plan: UserPlan,
    /// Snapshot of the shared ledger plus this agent's tentative charges.
    ledger_view: CapacityLedger,
    items: Vec<RequestId>,
    shared: BTreeMap<UserId, BTreeSet<RequestId>>,
    beliefs: BTreeMap<RequestId, Belief>,
    clock: BTreeMap<UserId, u64>,
    /// Tentative bundle in insertion order, with undo records.
    bundle: Vec<(RequestId, Applied)>,
    last_sent: BTreeMap<(UserId, RequestId), (Option<UserId>, f64)>,
    started: bool,
}

impl<'a> CbbaAgent<'a> {
    fn new(
        p: &'a Instance,
        plan: UserPlan,
        ledger: &CapacityLedger,
        planner: UserId,
        items: Vec<RequestId>,
    ) -> Self {
        let id = plan.user.clone();
        let mut beliefs = BTreeMap::new();
        let mut shared: BTreeMap<UserId, BTreeSet<RequestId>> = BTreeMap::new();
        for item in &items {
            beliefs.insert(item.clone(), Belief::free());
            // Everyone able to host an item is a neighbor on that item.
            for other in candidates(p, item) {
                if other != id {
                    shared.entry(other).or_default().insert(item.clone());
                }
            }
        }
        CbbaAgent {
            p,
            id,
            planner,
            plan,
            ledger_view: ledger.clone(),
            items,
            shared,
            beliefs,
            clock: BTreeMap::new(),
            bundle: Vec::new(),
            last_sent: BTreeMap::new(),
            started: false,
        }
    }

    fn belief(&self, item: &RequestId) -> Belief {
        self.beliefs.get(item).cloned().unwrap_or_else(Belief::free)
    }

    fn stamp(&self, agent: &UserId) -> u64 {
        self.clock.get(agent).copied().unwrap_or(0)
    }

    /// The standard update/reset/leave decision for one received entry.
    fn consensus_action(&self, sender: &UserId, entry: &BundleEntry, times: &BTreeMap<UserId, u64>) -> Action {
        let me = &self.id;
        let mine = self.belief(&entry.request);
        let newer = |agent: &UserId| -> bool {
            times.get(agent).copied().unwrap_or(0) > self.stamp(agent)
        };

        match (&entry.winner, &mine.winner) {
            (Some(zk), Some(zi)) if zk == sender && zi == me => {
                if beats(sender, entry.value, me, mine.value) {
                    Action::Update
                } else {
                    Action::Leave
                }
            }
            (Some(zk), Some(zi)) if zk == sender && zi == sender => Action::Update,
            (Some(zk), Some(zi)) if zk == sender => {
                // Receiver names a third agent m.
                if newer(zi) || beats(sender, entry.value, zi, mine.value) {
                    Action::Update
                } else {
                    Action::Leave
                }
            }
            (Some(zk), None) if zk == sender => Action::Update,

            (Some(zk), Some(zi)) if zk == me && zi == me => Action::Leave,
            (Some(zk), Some(zi)) if zk == me && zi == sender => Action::Reset,
            (Some(zk), Some(zi)) if zk == me => {
                if newer(zi) {
                    Action::Reset
                } else {
                    Action::Leave
                }
            }
            (Some(zk), None) if zk == me => Action::Leave,

            // Sender names a third agent m.
            (Some(m), Some(zi)) if zi == me => {
                if newer(m) && beats(m, entry.value, me, mine.value) {
                    Action::Update
                } else {
                    Action::Leave
                }
            }
            (Some(m), Some(zi)) if zi == sender => {
                if newer(m) {
                    Action::Update
                } else {
                    Action::Reset
                }
            }
            (Some(m), Some(zi)) if zi == m => {
                if newer(m) {
                    Action::Update
                } else {
                    Action::Leave
                }
            }
            (Some(m), Some(n)) => {
                // Four distinct agents involved.
                let m_newer = newer(m);
                let n_newer = newer(n);
                if m_newer && (n_newer || beats(m, entry.value, n, mine.value)) {
                    Action::Update
                } else if n_newer {
                    Action::Reset
                } else {
                    Action::Leave
                }
            }
            (Some(m), None) => {
                if newer(m) {
                    Action::Update
                } else {
                    Action::Leave
                }
            }

            (None, Some(zi)) if zi == me => Action::Leave,
            (None, Some(zi)) if zi == sender => Action::Update,
            (None, Some(zi)) => {
                if newer(zi) {
                    Action::Update
                } else {
                    Action::Leave
                }
            }
            (None, None) => Action::Leave,
        }
    }

    fn process_message(&mut self, sender: &UserId, state: &BundleState) -> bool {
        let times: BTreeMap<UserId, u64> = state.timestamps.iter().cloned().collect();
        let mut changed = false;
        for entry in &state.entries {
            let action = self.consensus_action(sender, entry, &times);
            let current = self.belief(&entry.request);
            let next = match action {
                Action::Update => Belief {
                    winner: entry.winner.clone(),
                    value: entry.value,
                },
                Action::Reset => Belief::free(),
                Action::Leave => current.clone(),
            };
            if next != current {
                self.beliefs.insert(entry.request.clone(), next);
                changed = true;
            }
        }
        for (agent, t) in &times {
            if agent != &self.id {
                let known = self.clock.entry(agent.clone()).or_insert(0);
                *known = (*known).max(*t);
            }
        }
        changed = changed || !state.entries.is_empty();
        changed
    }

    /// Drops the first outbid bundle item and everything added after it.
    fn apply_drop_rule(&mut self) {
        let cut = self
            .bundle
            .iter()
            .position(|(item, _)| self.belief(item).winner.as_ref() != Some(&self.id));
        let Some(cut) = cut else { return };
        while self.bundle.len() > cut {
            let (item, applied) = self.bundle.pop().expect("bundle non-empty");
            self.plan.revert(self.p, &mut self.ledger_view, applied);
            // Items beyond the outbid one lose their (now meaningless) own
            // claim; the outbid item itself keeps the better bid we learned.
            if self.bundle.len() > cut && self.belief(&item).winner.as_ref() == Some(&self.id) {
                self.beliefs.insert(item, Belief::free());
            }
        }
    }

    /// Greedily extends the bundle while some open item's marginal value
    /// outbids the currently believed winner.
    fn build_bundle(&mut self) {
        loop {
            let mut best: Option<(RequestId, super::Bid)> = None;
            let items = self.items.clone();
            for item in items {
                if self.bundle.iter().any(|(b, _)| b == &item) {
                    continue;
                }
                let current = self.belief(&item);
                if current.winner.as_ref() == Some(&self.id) {
                    continue;
                }
                let Some(request) = self.p.request(&item) else { continue };
                let Some(bid) =
                    compute_bid(self.p, &mut self.plan, &self.ledger_view, request)
                else {
                    continue;
                };
                let outbids = match &current.winner {
                    None => bid.value > 0.0,
                    Some(w) => beats(&self.id, bid.value, w, current.value),
                };
                if !outbids {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((_, b)) => bid.value > b.value,
                };
                if better {
                    best = Some((item, bid));
                }
            }
            let Some((item, bid)) = best else { return };
            let placement = Placement::from(&bid);
            match self
                .plan
                .merge_award(self.p, &mut self.ledger_view, &placement)
            {
                Ok(applied) => {
                    self.beliefs.insert(
                        item.clone(),
                        Belief {
                            winner: Some(self.id.clone()),
                            value: bid.value,
                        },
                    );
                    self.bundle.push((item, applied));
                }
                Err(_) => return, // valuation raced its own bookkeeping; stop growing
            }
        }
    }

    /// Entries whose (winner, value) changed since the last send to `peer`.
    fn delta_for(&self, peer: &UserId) -> Vec<BundleEntry> {
        let Some(shared) = self.shared.get(peer) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for item in shared {
            let belief = self.belief(item);
            let current = (belief.winner.clone(), belief.value);
            let sent = self
                .last_sent
                .get(&(peer.clone(), item.clone()))
                .cloned()
                .unwrap_or((None, 0.0));
            if current != sent {
                out.push(BundleEntry {
                    request: item.clone(),
                    winner: belief.winner,
                    value: belief.value,
                });
            }
        }
        out
    }

    /// Tears the tentative bundle down and returns what this agent believes
    /// it won, in bundle order, for the commit phase.
    fn dismantle(&mut self) -> Vec<RequestId> {
        let mut won = Vec::new();
        let mut stack = Vec::new();
        while let Some((item, applied)) = self.bundle.pop() {
            stack.push(item);
            self.plan.revert(self.p, &mut self.ledger_view, applied);
        }
        stack.reverse();
        for item in stack {
            if self.belief(&item).winner.as_ref() == Some(&self.id) {
                won.push(item);
            }
        }
        won
    }
}

impl RoundAgent for CbbaAgent<'_> {
    fn id(&self) -> &UserId {
        &self.id
    }

    fn step(&mut self, round: u64, inbox: Vec<Envelope>) -> Result<Vec<Envelope>, BusError> {
        self.clock.insert(self.id.clone(), round + 1);
        let mut belief_changes = false;
        for envelope in inbox {
            if envelope.kind == MsgKind::BundleState {
                let state: BundleState = envelope.decode()?;
                belief_changes |= self.process_message(&envelope.from, &state);
            }
        }
        if belief_changes {
            self.apply_drop_rule();
        }
        if belief_changes || !self.started {
            self.started = true;
            self.build_bundle();
        }

        let mut out = Vec::new();
        let peers: Vec<UserId> = self.shared.keys().cloned().collect();
        for peer in peers {
            let entries = self.delta_for(&peer);
            if entries.is_empty() {
                continue;
            }
            for e in &entries {
                self.last_sent.insert(
                    (peer.clone(), e.request.clone()),
                    (e.winner.clone(), e.value),
                );
            }
            let state = BundleState {
                entries,
                timestamps: self.clock.iter().map(|(a, t)| (a.clone(), *t)).collect(),
            };
            out.push(Envelope::new(
                self.id.clone(),
                peer.clone(),
                MsgKind::BundleState,
                &state,
            )?);
        }
        Ok(out)
    }
}

pub fn solve_cbba(p: &Instance) -> Result<CoordinationOutcome, SolveError> {
    solve_cbba_with(p, &CbbaConfig::default())
}

pub fn solve_cbba_with(p: &Instance, cfg: &CbbaConfig) -> Result<CoordinationOutcome, SolveError> {
    let mut bus = Bus::new();
    let planner = p.central_user().clone();
    bus.register(planner.clone());
    for u in p.exclusive_users() {
        bus.register(u.id.clone());
    }

    let mut ledger = CapacityLedger::from_fixed(p);
    let plans = local_solves(p, &mut ledger);
    let requests = central_requests_due_order(p);

    // Interest: every agent derives the requests it could host from the
    // common request book.
    let mut interest: BTreeMap<UserId, Vec<RequestId>> = BTreeMap::new();
    for rid in &requests {
        for u in candidates(p, rid) {
            interest.entry(u).or_default().push(rid.clone());
        }
    }

    let mut agents: Vec<CbbaAgent> = plans
        .into_values()
        .map(|plan| {
            let items = interest.get(&plan.user).cloned().unwrap_or_default();
            CbbaAgent::new(p, plan, &ledger, planner.clone(), items)
        })
        .collect();
    {
        let mut dyn_agents: Vec<&mut dyn RoundAgent> = agents
            .iter_mut()
            .map(|a| a as &mut dyn RoundAgent)
            .collect();
        let cap = if cfg.round_cap > 0 {
            cfg.round_cap
        } else {
            ((requests.len() as u64 + 2) * (dyn_agents.len() as u64 + 2)).max(16)
        };
        run_rounds(&mut bus, &mut dyn_agents, cap)?;
    }

    // Winners commit against the real shared state, in id order; stale wins
    // lapse and fall through to the planner's residual pass.
    let mut hosted = Schedule::new();
    let mut final_plans = BTreeMap::new();
    for agent in &mut agents {
        let won = agent.dismantle();
        let mut report = PlanReport::default();
        for item in won {
            let Some(request) = p.request(&item) else { continue };
            match compute_bid(p, &mut agent.plan, &ledger, request) {
                Some(bid) => {
                    let placement = Placement::from(&bid);
                    agent.plan.merge_award(p, &mut ledger, &placement)?;
                    report.placements.push(ScheduleEntry {
                        observation: bid.observation.clone(),
                        start: bid.start,
                    });
                    report.grants.extend(
                        agent
                            .plan
                            .schedule
                            .grants()
                            .filter(|g| g.observation == bid.observation)
                            .cloned(),
                    );
                }
                None => report.lapsed.push(item),
            }
        }
        agent.plan.reinsert_displaced(p, &mut ledger);
        if !report.placements.is_empty() || !report.lapsed.is_empty() {
            bus.send(Envelope::new(
                agent.id.clone(),
                agent.planner.clone(),
                MsgKind::PlanReport,
                &report,
            )?)?;
        }
        for entry in &report.placements {
            hosted.insert(entry.observation.clone(), entry.start);
        }
        for grant in &report.grants {
            hosted.add_grant(grant.observation.clone(), grant.granted_by.clone());
        }
        final_plans.insert(agent.id.clone(), agent.plan.clone());
    }
    let _ = bus.deliver(&planner);

    let planner_schedule = residual_pass(p, &mut ledger, &hosted, &requests);
    let schedule = assemble(p, &final_plans, &planner_schedule)?;
    debug_assert!(crate::model::validate_schedule(p, &schedule).is_ok());
    Ok(CoordinationOutcome { schedule, bus })
}
