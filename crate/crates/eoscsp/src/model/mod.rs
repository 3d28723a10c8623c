//! Domain model: satellites, users, requests, observations, instances and
//! schedules, plus the sub-problem algebra and the validity checker that
//! every solver output must pass.
//!
//! All values are immutable after construction and safe to share across
//! threads; the operations in this module are pure functions.

mod algebra;
mod validate;

pub use validate::{
    record_required_grants, total_reward, validate_schedule, Verdict, Violation,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::ids::{ObservationId, RequestId, SatelliteId, UserId};
use crate::time::TimeWindow;

/// Transition-time function between two consecutive observations on one
/// satellite. Constant in all shipped generators; per-pair overrides are the
/// extension point for date- or geometry-dependent models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionTime {
    Constant {
        constant: f64,
    },
    PerPair {
        default: f64,
        pairs: Vec<PairTransition>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTransition {
    pub from: ObservationId,
    pub to: ObservationId,
    pub seconds: f64,
}

impl TransitionTime {
    pub fn constant(seconds: f64) -> Self {
        TransitionTime::Constant { constant: seconds }
    }

    /// Minimum idle time required between the end of `from` and the start of `to`.
    pub fn between(&self, from: &ObservationId, to: &ObservationId) -> f64 {
        match self {
            TransitionTime::Constant { constant } => *constant,
            TransitionTime::PerPair { default, pairs } => pairs
                .iter()
                .find(|p| &p.from == from && &p.to == to)
                .map(|p| p.seconds)
                .unwrap_or(*default),
        }
    }

    /// Upper bound over all pairs; used for conservative boundary margins.
    pub fn max_seconds(&self) -> f64 {
        match self {
            TransitionTime::Constant { constant } => *constant,
            TransitionTime::PerPair { default, pairs } => pairs
                .iter()
                .map(|p| p.seconds)
                .fold(*default, f64::max),
        }
    }

    fn is_nonnegative(&self) -> bool {
        match self {
            TransitionTime::Constant { constant } => *constant >= 0.0,
            TransitionTime::PerPair { default, pairs } => {
                *default >= 0.0 && pairs.iter().all(|p| p.seconds >= 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    pub id: SatelliteId,
    /// Orbit-plan horizon within which everything must be scheduled.
    pub horizon: TimeWindow,
    /// Maximum number of observations over the horizon.
    pub capacity: u32,
    pub transition: TransitionTime,
}

/// An exclusive orbit portion: one satellite, one time window, one owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusiveWindow {
    pub satellite: SatelliteId,
    pub window: TimeWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    /// Lower is better; used as the primary sort key by the greedy solver.
    pub priority: u32,
    pub exclusives: Vec<ExclusiveWindow>,
}

impl User {
    pub fn is_exclusive(&self) -> bool {
        !self.exclusives.is_empty()
    }

    /// This user's exclusive windows on the given satellite.
    pub fn exclusives_on<'a>(
        &'a self,
        satellite: &'a SatelliteId,
    ) -> impl Iterator<Item = &'a ExclusiveWindow> {
        self.exclusives
            .iter()
            .filter(move |e| &e.satellite == satellite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    /// Validity window; its end is the due date used for announcement order.
    pub window: TimeWindow,
    pub duration: f64,
    pub reward: f64,
    /// Latitude/longitude/altitude of the target; carried but never
    /// interpreted by any solver.
    pub position: [f64; 3],
    pub owner: UserId,
    pub opportunities: Vec<ObservationId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: ObservationId,
    pub window: TimeWindow,
    pub duration: f64,
    pub request: RequestId,
    pub reward: f64,
    pub satellite: SatelliteId,
    pub owner: UserId,
    pub priority: u32,
}

impl Observation {
    /// Feasible start interval `[start, end - duration]`.
    pub fn start_window(&self) -> Option<TimeWindow> {
        self.window
            .latest_start(self.duration)
            .map(|latest| TimeWindow {
                start: self.window.start,
                end: latest,
            })
    }

    pub fn interval_at(&self, start: f64) -> TimeWindow {
        TimeWindow {
            start,
            end: start + self.duration,
        }
    }
}

/// A committed start time for one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub observation: ObservationId,
    pub start: f64,
}

/// A recorded acceptance: `granted_by` lets `observation` (owned by someone
/// else) occupy one of its exclusive windows.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Grant {
    pub observation: ObservationId,
    pub granted_by: UserId,
}

/// A solution: observation start times plus the grants that justify any
/// foreign observation sitting inside an exclusive window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    entries: BTreeMap<ObservationId, f64>,
    grants: BTreeSet<Grant>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn start_of(&self, observation: &ObservationId) -> Option<f64> {
        self.entries.get(observation).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&ObservationId, f64)> {
        self.entries.iter().map(|(o, t)| (o, *t))
    }

    pub fn grants(&self) -> impl Iterator<Item = &Grant> {
        self.grants.iter()
    }

    pub fn insert(&mut self, observation: ObservationId, start: f64) {
        self.entries.insert(observation, start);
    }

    pub fn remove(&mut self, observation: &ObservationId) -> Option<f64> {
        self.grants.retain(|g| &g.observation != observation);
        self.entries.remove(observation)
    }

    pub fn add_grant(&mut self, observation: ObservationId, granted_by: UserId) {
        self.grants.insert(Grant {
            observation,
            granted_by,
        });
    }

    pub fn has_grant(&self, observation: &ObservationId, granted_by: &UserId) -> bool {
        self.grants.contains(&Grant {
            observation: observation.clone(),
            granted_by: granted_by.clone(),
        })
    }

    /// Merges `other` into `self`; conflicting starts for one observation are an error.
    pub fn absorb(&mut self, other: &Schedule) -> Result<(), ModelError> {
        for (o, t) in other.entries() {
            match self.entries.get(o) {
                Some(existing) if *existing != t => {
                    return Err(ModelError::ConflictingRecords(o.to_string()));
                }
                _ => {
                    self.entries.insert(o.clone(), t);
                }
            }
        }
        self.grants.extend(other.grants.iter().cloned());
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ScheduleData {
            entries: self
                .entries
                .iter()
                .map(|(o, t)| ScheduleEntry {
                    observation: o.clone(),
                    start: *t,
                })
                .collect(),
            grants: self.grants.iter().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let data = ScheduleData::deserialize(deserializer)?;
        let mut schedule = Schedule::new();
        for e in data.entries {
            schedule.insert(e.observation, e.start);
        }
        for g in data.grants {
            schedule.grants.insert(g);
        }
        Ok(schedule)
    }
}

#[derive(Serialize, Deserialize)]
struct ScheduleData {
    entries: Vec<ScheduleEntry>,
    grants: Vec<Grant>,
}

/// A full scheduling problem: satellites, users, requests and observations,
/// plus an optional set of already-fixed placements that solvers must honor.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    satellites: BTreeMap<SatelliteId, Satellite>,
    users: BTreeMap<UserId, User>,
    requests: BTreeMap<RequestId, Request>,
    observations: BTreeMap<ObservationId, Observation>,
    fixed: Schedule,
}

impl Instance {
    pub fn new(
        satellites: Vec<Satellite>,
        users: Vec<User>,
        requests: Vec<Request>,
        observations: Vec<Observation>,
    ) -> Result<Self, ModelError> {
        Self::with_fixed(satellites, users, requests, observations, Schedule::new())
    }

    pub fn with_fixed(
        satellites: Vec<Satellite>,
        users: Vec<User>,
        requests: Vec<Request>,
        observations: Vec<Observation>,
        fixed: Schedule,
    ) -> Result<Self, ModelError> {
        let mut instance = Instance {
            satellites: BTreeMap::new(),
            users: BTreeMap::new(),
            requests: BTreeMap::new(),
            observations: BTreeMap::new(),
            fixed: Schedule::new(),
        };
        for s in satellites {
            if instance.satellites.insert(s.id.clone(), s).is_some() {
                return Err(ModelError::Inconsistent("duplicate satellite id".into()));
            }
        }
        for u in users {
            if instance.users.insert(u.id.clone(), u).is_some() {
                return Err(ModelError::Inconsistent("duplicate user id".into()));
            }
        }
        for r in requests {
            if instance.requests.insert(r.id.clone(), r).is_some() {
                return Err(ModelError::Inconsistent("duplicate request id".into()));
            }
        }
        for o in observations {
            if instance.observations.insert(o.id.clone(), o).is_some() {
                return Err(ModelError::Inconsistent("duplicate observation id".into()));
            }
        }
        instance.check_consistency()?;
        if !fixed.is_empty() {
            let verdict = validate_schedule(&instance, &fixed);
            if !verdict.is_ok() {
                return Err(ModelError::InvalidPreallocation(verdict.to_string()));
            }
        }
        instance.fixed = fixed;
        Ok(instance)
    }

    fn check_consistency(&self) -> Result<(), ModelError> {
        let mut problems = Vec::new();

        let centrals: Vec<&UserId> = self
            .users
            .values()
            .filter(|u| !u.is_exclusive())
            .map(|u| &u.id)
            .collect();
        if centrals.len() != 1 {
            problems.push(format!(
                "expected exactly one user without exclusives, found {}",
                centrals.len()
            ));
        }

        for s in self.satellites.values() {
            if !self.satellites.contains_key(&s.id) {
                unreachable!();
            }
            if !s.transition.is_nonnegative() {
                problems.push(format!("satellite {} has a negative transition time", s.id));
            }
        }

        // Exclusive windows: inside horizons, and never overlapping across
        // users on one satellite.
        let mut per_sat: BTreeMap<&SatelliteId, Vec<(&UserId, &TimeWindow)>> = BTreeMap::new();
        for u in self.users.values() {
            for e in &u.exclusives {
                match self.satellites.get(&e.satellite) {
                    None => problems.push(format!(
                        "user {} has an exclusive on unknown satellite {}",
                        u.id, e.satellite
                    )),
                    Some(s) => {
                        if !s.horizon.contains_window(&e.window) {
                            problems.push(format!(
                                "exclusive of {} on {} leaves the horizon",
                                u.id, e.satellite
                            ));
                        }
                        per_sat.entry(&e.satellite).or_default().push((&u.id, &e.window));
                    }
                }
            }
        }
        for (sat, windows) in per_sat {
            for (i, (ua, wa)) in windows.iter().enumerate() {
                for (ub, wb) in windows.iter().skip(i + 1) {
                    if wa.overlaps(wb) {
                        problems.push(format!(
                            "exclusives of {ua} and {ub} overlap on {sat}"
                        ));
                    }
                }
            }
        }

        for r in self.requests.values() {
            if !r.duration.is_finite() || r.duration <= 0.0 {
                problems.push(format!("request {} has non-positive duration", r.id));
            }
            if r.opportunities.is_empty() {
                problems.push(format!("request {} has no opportunities", r.id));
            }
            if !self.users.contains_key(&r.owner) {
                problems.push(format!("request {} owned by unknown user {}", r.id, r.owner));
            }
            for o in &r.opportunities {
                match self.observations.get(o) {
                    None => problems.push(format!(
                        "request {} lists unknown observation {o}",
                        r.id
                    )),
                    Some(obs) => {
                        if obs.request != r.id {
                            problems.push(format!(
                                "observation {o} disagrees about its request ({} vs {})",
                                obs.request, r.id
                            ));
                        }
                        if obs.duration != r.duration {
                            problems.push(format!(
                                "observation {o} duration differs from its request"
                            ));
                        }
                    }
                }
            }
        }

        for o in self.observations.values() {
            let Some(r) = self.requests.get(&o.request) else {
                problems.push(format!("observation {} has unknown request {}", o.id, o.request));
                continue;
            };
            if !r.opportunities.contains(&o.id) {
                problems.push(format!(
                    "observation {} is not listed by its request {}",
                    o.id, r.id
                ));
            }
            if o.owner != r.owner {
                problems.push(format!("observation {} owner differs from its request", o.id));
            }
            match self.users.get(&r.owner) {
                Some(u) if o.priority != u.priority => {
                    problems.push(format!(
                        "observation {} priority differs from its owner", o.id
                    ));
                }
                _ => {}
            }
            match self.satellites.get(&o.satellite) {
                None => problems.push(format!(
                    "observation {} on unknown satellite {}",
                    o.id, o.satellite
                )),
                Some(s) => {
                    if !s.horizon.contains_window(&o.window) {
                        problems.push(format!("observation {} leaves the horizon", o.id));
                    }
                }
            }
            if o.window.length() < o.duration {
                problems.push(format!("observation {} cannot fit its own window", o.id));
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Inconsistent(problems.join("; ")))
        }
    }

    pub fn satellites(&self) -> impl Iterator<Item = &Satellite> {
        self.satellites.values()
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn requests(&self) -> impl Iterator<Item = &Request> {
        self.requests.values()
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.observations.values()
    }

    pub fn satellite(&self, id: &SatelliteId) -> Option<&Satellite> {
        self.satellites.get(id)
    }

    pub fn user(&self, id: &UserId) -> Option<&User> {
        self.users.get(id)
    }

    pub fn request(&self, id: &RequestId) -> Option<&Request> {
        self.requests.get(id)
    }

    pub fn observation(&self, id: &ObservationId) -> Option<&Observation> {
        self.observations.get(id)
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn n_requests(&self) -> usize {
        self.requests.len()
    }

    /// The single user without exclusives (the central planner).
    pub fn central_user(&self) -> &UserId {
        self.users
            .values()
            .find(|u| !u.is_exclusive())
            .map(|u| &u.id)
            .expect("instances always hold exactly one exclusive-less user")
    }

    pub fn exclusive_users(&self) -> impl Iterator<Item = &User> {
        self.users.values().filter(|u| u.is_exclusive())
    }

    /// Placements fixed before solving; solvers must keep them untouched.
    pub fn fixed(&self) -> &Schedule {
        &self.fixed
    }

    /// Requests not yet fulfilled by the fixed placements.
    pub fn open_requests(&self) -> impl Iterator<Item = &Request> {
        self.requests.values().filter(move |r| {
            !r.opportunities
                .iter()
                .any(|o| self.fixed.start_of(o).is_some())
        })
    }

    /// Capacity of `s` minus the fixed placements already sitting on it.
    pub fn residual_capacity(&self, s: &SatelliteId) -> u32 {
        let used = self
            .fixed
            .entries()
            .filter(|(o, _)| {
                self.observations
                    .get(o)
                    .is_some_and(|obs| &obs.satellite == s)
            })
            .count() as u32;
        self.satellites
            .get(s)
            .map(|sat| sat.capacity.saturating_sub(used))
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("instance serializes");
        out.push('\n');
        out
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let data: InstanceData = serde_json::from_str(json)
            .map_err(|e| ModelError::Inconsistent(format!("malformed instance JSON: {e}")))?;
        Instance::with_fixed(
            data.satellites,
            data.users,
            data.requests,
            data.observations,
            data.fixed,
        )
    }
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        InstanceData {
            satellites: self.satellites.values().cloned().collect(),
            users: self.users.values().cloned().collect(),
            requests: self.requests.values().cloned().collect(),
            observations: self.observations.values().cloned().collect(),
            fixed: self.fixed.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let data = InstanceData::deserialize(deserializer)?;
        Instance::with_fixed(
            data.satellites,
            data.users,
            data.requests,
            data.observations,
            data.fixed,
        )
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceData {
    satellites: Vec<Satellite>,
    users: Vec<User>,
    requests: Vec<Request>,
    observations: Vec<Observation>,
    #[serde(default)]
    fixed: Schedule,
}
