//! Schedule validity checking.
//!
//! Violations are data, not errors: the checker is total and reports every
//! broken rule it finds.

use std::collections::BTreeMap;
use std::fmt;

use crate::ids::{ObservationId, RequestId, SatelliteId, UserId};
use crate::model::{Instance, Schedule};
use crate::time::{TimeWindow, TIME_EPS};

/// Whether a placement run intrudes on a window by more than the time
/// tolerance. Touching a boundary is not intrusion.
fn intrudes(window: &TimeWindow, run: &TimeWindow) -> bool {
    window.end.min(run.end) - window.start.max(run.start) > TIME_EPS
}

fn contains_with_slack(window: &TimeWindow, run: &TimeWindow) -> bool {
    window.start - TIME_EPS <= run.start && run.end <= window.end + TIME_EPS
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The schedule references an observation the instance does not know.
    UnknownObservation { observation: ObservationId },
    /// Start time outside `[window.start, window.end - duration]`.
    StartOutsideWindow { observation: ObservationId, start: f64 },
    /// More observations on a satellite than its capacity allows.
    CapacityExceeded {
        satellite: SatelliteId,
        scheduled: usize,
        capacity: u32,
    },
    /// More than one observation scheduled for a single request.
    DuplicateRequest {
        request: RequestId,
        observations: Vec<ObservationId>,
    },
    /// Two consecutive observations on one satellite are closer than
    /// duration plus transition time.
    TransitionConflict {
        satellite: SatelliteId,
        first: ObservationId,
        second: ObservationId,
        gap: f64,
        required: f64,
    },
    /// An exclusive user's observation placed outside all of its own
    /// exclusive windows.
    OutsideOwnExclusive { observation: ObservationId, owner: UserId },
    /// A foreign observation sits inside an exclusive window without a
    /// recorded grant from its owner.
    MissingGrant {
        observation: ObservationId,
        exclusive_owner: UserId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownObservation { observation } => {
                write!(f, "unknown observation {observation}")
            }
            Violation::StartOutsideWindow { observation, start } => {
                write!(f, "observation {observation} starts at {start}, outside its window")
            }
            Violation::CapacityExceeded { satellite, scheduled, capacity } => {
                write!(f, "satellite {satellite} holds {scheduled} observations, capacity {capacity}")
            }
            Violation::DuplicateRequest { request, observations } => {
                write!(f, "request {request} fulfilled by {} observations", observations.len())
            }
            Violation::TransitionConflict { satellite, first, second, gap, required } => {
                write!(
                    f,
                    "observations {first} and {second} on {satellite} are {gap}s apart, need {required}s"
                )
            }
            Violation::OutsideOwnExclusive { observation, owner } => {
                write!(f, "observation {observation} of exclusive user {owner} placed outside its exclusives")
            }
            Violation::MissingGrant { observation, exclusive_owner } => {
                write!(f, "observation {observation} occupies {exclusive_owner}'s exclusive without a grant")
            }
        }
    }
}

/// Outcome of [`validate_schedule`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Verdict {
    violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every hard rule a solution must satisfy: window containment,
/// satellite capacity, one observation per request, pairwise transition
/// separation, exclusive ownership, and grant coverage.
pub fn validate_schedule(p: &Instance, m: &Schedule) -> Verdict {
    let mut violations = Vec::new();

    let mut per_sat: BTreeMap<&SatelliteId, Vec<(&ObservationId, f64)>> = BTreeMap::new();
    let mut per_req: BTreeMap<&RequestId, Vec<&ObservationId>> = BTreeMap::new();

    for (oid, start) in m.entries() {
        let Some(obs) = p.observation(oid) else {
            violations.push(Violation::UnknownObservation { observation: oid.clone() });
            continue;
        };

        // (a) the observation must complete within its own window.
        if start < obs.window.start - TIME_EPS || start + obs.duration > obs.window.end + TIME_EPS {
            violations.push(Violation::StartOutsideWindow {
                observation: oid.clone(),
                start,
            });
        }

        per_sat.entry(&obs.satellite).or_default().push((oid, start));
        per_req.entry(&obs.request).or_default().push(oid);

        let owner = p.user(&obs.owner);
        let run = obs.interval_at(start);

        // (e) exclusive users must stay inside their own exclusives.
        if let Some(owner) = owner {
            if owner.is_exclusive() {
                let inside_own = owner
                    .exclusives_on(&obs.satellite)
                    .any(|e| contains_with_slack(&e.window, &run));
                if !inside_own {
                    violations.push(Violation::OutsideOwnExclusive {
                        observation: oid.clone(),
                        owner: owner.id.clone(),
                    });
                }
            }
        }

        // (f) foreign placements inside an exclusive need a grant.
        for user in p.users() {
            if user.id == obs.owner {
                continue;
            }
            let granted_needed = user
                .exclusives_on(&obs.satellite)
                .any(|e| intrudes(&e.window, &run));
            if granted_needed && !m.has_grant(oid, &user.id) {
                violations.push(Violation::MissingGrant {
                    observation: oid.clone(),
                    exclusive_owner: user.id.clone(),
                });
            }
        }
    }

    // (b) capacity per satellite.
    for (sat, entries) in &per_sat {
        if let Some(s) = p.satellite(sat) {
            if entries.len() > s.capacity as usize {
                violations.push(Violation::CapacityExceeded {
                    satellite: (*sat).clone(),
                    scheduled: entries.len(),
                    capacity: s.capacity,
                });
            }
        }
    }

    // (c) at most one observation per request.
    for (req, obs) in &per_req {
        if obs.len() > 1 {
            let mut ids: Vec<ObservationId> = obs.iter().map(|o| (*o).clone()).collect();
            ids.sort();
            violations.push(Violation::DuplicateRequest {
                request: (*req).clone(),
                observations: ids,
            });
        }
    }

    // (d) consecutive observations on one satellite respect transitions.
    for (sat, entries) in &mut per_sat {
        let Some(s) = p.satellite(sat) else { continue };
        entries.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        for pair in entries.windows(2) {
            let (first, t_first) = pair[0];
            let (second, t_second) = pair[1];
            let duration = p.observation(first).map(|o| o.duration).unwrap_or(0.0);
            let required = duration + s.transition.between(first, second);
            let gap = t_second - t_first;
            if gap < required - TIME_EPS {
                violations.push(Violation::TransitionConflict {
                    satellite: (*sat).clone(),
                    first: first.clone(),
                    second: second.clone(),
                    gap,
                    required,
                });
            }
        }
    }

    Verdict { violations }
}

/// Sum of rewards over scheduled observations.
pub fn total_reward(p: &Instance, m: &Schedule) -> f64 {
    m.entries()
        .filter_map(|(o, _)| p.observation(o))
        .fold(0.0, |acc, o| acc + o.reward)
}

/// Adds the grant records rule (f) demands for every scheduled observation.
/// Centralized solvers use this after placement; distributed solvers record
/// grants at award time instead.
pub fn record_required_grants(p: &Instance, m: &mut Schedule) {
    let mut needed = Vec::new();
    for (oid, start) in m.entries() {
        let Some(obs) = p.observation(oid) else { continue };
        let run = obs.interval_at(start);
        for user in p.users() {
            if user.id == obs.owner {
                continue;
            }
            if user
                .exclusives_on(&obs.satellite)
                .any(|e| intrudes(&e.window, &run))
            {
                needed.push((oid.clone(), user.id.clone()));
            }
        }
    }
    for (o, u) in needed {
        m.add_grant(o, u);
    }
}
