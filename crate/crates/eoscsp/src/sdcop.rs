//! Sequential per-request coordination through constraint optimization:
//! for each central request, the exclusive users able to host it build a
//! small problem with one binary variable per (exclusive window,
//! opportunity) pair, solve it exactly, and the winning host commits the
//! placement. The planner only ever sees foreign-placement reports and the
//! solver's utility/value traffic; everyone's own plan stays private.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auction::{
    assemble, candidates, central_requests_due_order, cheapest_hosting, displaced_reward,
    local_solves, residual_pass, AnnouncePayload, CapacityLedger, CoordinationOutcome,
    PlanReport, Placement, RevisionScope, UserPlan,
};
use crate::bus::{Bus, Envelope, MsgKind};
use crate::dcop::{solve_dpop, ConstraintKind, Cost, DcopProblem, DpopConfig, DpopMessage};
use crate::error::SolveError;
use crate::ids::{ObservationId, RequestId, SatelliteId, UserId};
use crate::model::{Instance, Schedule, ScheduleEntry};

/// Everything assembled while building one request's coordination problem.
#[derive(Debug, Clone)]
pub struct RequestDcopContext {
    pub request: RequestId,
    pub eligible_agents: Vec<UserId>,
    /// Hostable opportunities per eligible agent.
    pub candidate_obs: BTreeMap<UserId, Vec<ObservationId>>,
    /// Remaining slot counts per satellite at build time.
    pub residual_capacity: BTreeMap<SatelliteId, u32>,
    /// Revision cost per variable, computed once per agent and observation.
    pub pi_table: BTreeMap<String, f64>,
    /// Variable id to (owner, observation).
    pub var_map: BTreeMap<String, (UserId, ObservationId)>,
}

/// Revision cost for hosting `obs` in `plan`: zero when plain insertion
/// fits, else the smallest own reward whose displacement makes room, else
/// infinite.
pub fn pi(
    p: &Instance,
    plan: &mut UserPlan,
    ledger: &CapacityLedger,
    obs: &ObservationId,
) -> f64 {
    let Some(record) = p.observation(obs) else {
        return f64::INFINITY;
    };
    plan.sync_external(p, ledger);
    match cheapest_hosting(p, plan, record, RevisionScope::AnyPlanned) {
        Some(hosting) => displaced_reward(p, &hosting),
        None => f64::INFINITY,
    }
}

/// Builds the per-request problem: binary `x` variables for each eligible
/// (exclusive window, opportunity) pair, hard constraints keeping the
/// request single-hosted, observations single-served and satellites within
/// their residual capacity, and a unary cost of `pi - reward` on each
/// hosting decision so a net-beneficial host wins the minimization.
/// `None` when no exclusive user can host the request.
pub fn build_request_dcop(
    p: &Instance,
    request: &RequestId,
    plans: &mut BTreeMap<UserId, UserPlan>,
    ledger: &CapacityLedger,
) -> Option<(DcopProblem, RequestDcopContext)> {
    let r = p.request(request)?;
    let eligible = candidates(p, request);
    if eligible.is_empty() {
        return None;
    }

    let mut problem = DcopProblem::new();
    let mut ctx = RequestDcopContext {
        request: request.clone(),
        eligible_agents: eligible.clone(),
        candidate_obs: BTreeMap::new(),
        residual_capacity: BTreeMap::new(),
        pi_table: BTreeMap::new(),
        var_map: BTreeMap::new(),
    };
    let mut per_obs: BTreeMap<ObservationId, Vec<String>> = BTreeMap::new();
    let mut per_sat: BTreeMap<SatelliteId, Vec<String>> = BTreeMap::new();

    for agent in &eligible {
        let user = p.user(agent).expect("eligible users exist");
        let plan = plans.get_mut(agent).expect("eligible users have plans");
        let mut hostable = Vec::new();
        for oid in &r.opportunities {
            let Some(obs) = p.observation(oid) else { continue };
            for (e_idx, e) in user.exclusives.iter().enumerate() {
                if e.satellite != obs.satellite || !e.window.touches(&obs.window) {
                    continue;
                }
                let var = format!("x_{}_e{}_{}", agent, e_idx, oid);
                let cost = pi(p, plan, ledger, oid);
                ctx.pi_table.insert(var.clone(), cost);
                ctx.var_map.insert(var.clone(), (agent.clone(), oid.clone()));
                per_obs.entry(oid.clone()).or_default().push(var.clone());
                per_sat.entry(obs.satellite.clone()).or_default().push(var.clone());
                problem
                    .add_variable(var.clone(), agent.clone(), vec![0, 1])
                    .expect("variable names are unique");
                let hosting_cost = if cost.is_finite() {
                    Cost::Finite(cost - obs.reward)
                } else {
                    Cost::Infinite
                };
                problem
                    .add_constraint(
                        format!("value_{var}"),
                        &[var.as_str()],
                        ConstraintKind::Table(vec![Cost::ZERO, hosting_cost]),
                    )
                    .expect("unary scope is valid");
                if !hostable.contains(oid) {
                    hostable.push(oid.clone());
                }
            }
        }
        if !hostable.is_empty() {
            ctx.candidate_obs.insert(agent.clone(), hostable);
        }
    }

    if ctx.var_map.is_empty() {
        return None;
    }

    let all_vars: Vec<String> = ctx.var_map.keys().cloned().collect();
    if all_vars.len() >= 2 {
        let scope: Vec<&str> = all_vars.iter().map(|v| v.as_str()).collect();
        problem
            .add_constraint("one_per_request", &scope, ConstraintKind::AtMostNonzero { limit: 1 })
            .expect("scope is valid");
    }
    for (obs, vars) in &per_obs {
        if vars.len() >= 2 {
            let scope: Vec<&str> = vars.iter().map(|v| v.as_str()).collect();
            problem
                .add_constraint(
                    format!("host_{obs}"),
                    &scope,
                    ConstraintKind::AtMostNonzero { limit: 1 },
                )
                .expect("scope is valid");
        }
    }
    for (sat, vars) in &per_sat {
        let residual = ledger.residual(p, sat);
        ctx.residual_capacity.insert(sat.clone(), residual);
        if (vars.len() as u32) > residual {
            let scope: Vec<&str> = vars.iter().map(|v| v.as_str()).collect();
            problem
                .add_constraint(
                    format!("cap_{sat}"),
                    &scope,
                    ConstraintKind::AtMostNonzero { limit: residual },
                )
                .expect("scope is valid");
        }
    }

    Some((problem, ctx))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UtilMessage {
    from_var: String,
    to_var: String,
    separator: Vec<String>,
    table: Vec<Cost>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ValueMessage {
    from_var: String,
    to_var: String,
    assignment: Vec<(String, i64)>,
}

pub fn solve_sdcop(p: &Instance) -> Result<CoordinationOutcome, SolveError> {
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
        let Some((problem, ctx)) = build_request_dcop(p, rid, &mut plans, &ledger) else {
            continue;
        };
        let announce = AnnouncePayload::for_requests(p, std::slice::from_ref(rid));
        bus.broadcast(&planner, &ctx.eligible_agents, MsgKind::Announce, &announce)?;
        bus.advance_round();
        for agent in &ctx.eligible_agents {
            let _ = bus.deliver(agent);
        }

        let run = solve_dpop(&problem, &DpopConfig::default())
            .map_err(SolveError::Dcop)?;
        for message in &run.messages {
            match message {
                DpopMessage::Util {
                    from_var,
                    to_var,
                    from_owner,
                    to_owner,
                    separator,
                    table,
                } => {
                    bus.send(Envelope::new(
                        from_owner.clone(),
                        to_owner.clone(),
                        MsgKind::DcopUtil,
                        &UtilMessage {
                            from_var: from_var.clone(),
                            to_var: to_var.clone(),
                            separator: separator.clone(),
                            table: table.clone(),
                        },
                    )?)?;
                }
                DpopMessage::Value {
                    from_var,
                    to_var,
                    from_owner,
                    to_owner,
                    assignment,
                } => {
                    bus.send(Envelope::new(
                        from_owner.clone(),
                        to_owner.clone(),
                        MsgKind::DcopValue,
                        &ValueMessage {
                            from_var: from_var.clone(),
                            to_var: to_var.clone(),
                            assignment: assignment.clone(),
                        },
                    )?)?;
                }
            }
        }
        bus.advance_round();
        for agent in &ctx.eligible_agents {
            let _ = bus.deliver(agent);
        }

        // Hosting happens only when it strictly improves the objective.
        let Cost::Finite(best_cost) = run.solution.cost else {
            continue;
        };
        if best_cost >= 0.0 {
            continue;
        }

        // Several single-variable activations may achieve the optimum (the
        // request's opportunities often carry equal rewards and revision
        // costs). Capacity is what saturates first, so ties go to the
        // satellite with the most remaining slots, then to the earliest
        // concrete start, then to the lowest agent id.
        let mut choice: Option<(u32, f64, UserId, ObservationId, Placement)> = None;
        for (var, (agent, obs_id)) in &ctx.var_map {
            let revision = ctx.pi_table[var];
            let Some(obs) = p.observation(obs_id) else { continue };
            if !revision.is_finite() || revision - obs.reward != best_cost {
                continue;
            }
            let slack = ledger.residual(p, &obs.satellite);
            if slack == 0 {
                continue;
            }
            let plan = plans.get_mut(agent).expect("eligible users have plans");
            plan.sync_external(p, &ledger);
            let Some(hosting) = cheapest_hosting(p, plan, obs, RevisionScope::AnyPlanned) else {
                continue;
            };
            if obs.reward - displaced_reward(p, &hosting) <= 0.0 {
                continue;
            }
            let better = match &choice {
                None => true,
                Some((held_slack, start, held_by, _, _)) => {
                    (std::cmp::Reverse(slack), hosting.start, agent)
                        < (std::cmp::Reverse(*held_slack), *start, held_by)
                }
            };
            if better {
                choice = Some((slack, hosting.start, agent.clone(), obs_id.clone(), hosting));
            }
        }
        let Some((_, _, winner, obs_id, placement)) = choice else {
            continue;
        };
        // A revision may withdraw a previously hosted award; its request
        // becomes open again for the planner's final pass.
        let withdrawn: Vec<ObservationId> = placement
            .displaced
            .iter()
            .filter(|d| p.observation(d).is_some_and(|o| o.owner != winner))
            .cloned()
            .collect();
        let plan = plans.get_mut(&winner).expect("winner has a plan");
        plan.merge_award(p, &mut ledger, &placement)?;
        for d in &withdrawn {
            hosted.remove(d);
        }
        hosted.insert(obs_id.clone(), placement.start);
        hosted.add_grant(obs_id.clone(), winner.clone());

        let report = PlanReport {
            placements: vec![ScheduleEntry {
                observation: obs_id.clone(),
                start: placement.start,
            }],
            grants: plan
                .schedule
                .grants()
                .filter(|g| g.observation == obs_id)
                .cloned()
                .collect(),
            lapsed: vec![],
            withdrawn,
        };
        bus.send(Envelope::new(
            winner.clone(),
            planner.clone(),
            MsgKind::PlanReport,
            &report,
        )?)?;
        bus.advance_round();
        let _ = bus.deliver(&planner);
    }

    for plan in plans.values_mut() {
        plan.reinsert_displaced(p, &mut ledger);
    }

    let planner_schedule = residual_pass(p, &mut ledger, &hosted, &requests);
    let schedule = assemble(p, &plans, &planner_schedule)?;
    debug_assert!(crate::model::validate_schedule(p, &schedule).is_ok());
    Ok(CoordinationOutcome { schedule, bus })
}
