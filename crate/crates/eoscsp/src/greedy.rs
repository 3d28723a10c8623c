//! Greedy baseline: priority-then-start-time insertion into per-satellite
//! tracks. This is the `solve` procedure every coordination scheme reuses
//! for local sub-problems, so the insertion primitives here are shared.

use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{ObservationId, RequestId, SatelliteId, UserId};
use crate::model::{record_required_grants, Instance, Observation, Schedule};
use crate::time::{TimeWindow, TIME_EPS};

/// Where a foreign (centrally-owned) observation may be placed. Observations
/// owned by an exclusive user always go inside their owner's exclusives,
/// whatever the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HostPolicy<'a> {
    /// Centralized solving with full information: anywhere in the window;
    /// grants are recorded after the fact.
    AutoGrant,
    /// Only on exclusive-free parts of the horizon, keeping one maximum
    /// transition time of distance to every exclusive boundary so that
    /// placements can never clash with plans hidden inside the exclusives.
    OutsideExclusivesOnly,
    /// Only inside the exclusives of this user (hosting evaluation).
    WithinExclusivesOf(&'a UserId),
}

/// One committed placement on a satellite track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub observation: ObservationId,
    pub start: f64,
}

/// Start-time-ordered placements on one satellite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Track {
    entries: Vec<TrackEntry>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TrackEntry] {
        &self.entries
    }

    pub fn insert(&mut self, observation: ObservationId, start: f64) {
        let at = self
            .entries
            .partition_point(|e| (e.start, &e.observation) < (start, &observation));
        self.entries.insert(at, TrackEntry { observation, start });
    }

    pub fn remove(&mut self, observation: &ObservationId) -> Option<f64> {
        let at = self.entries.iter().position(|e| &e.observation == observation)?;
        Some(self.entries.remove(at).start)
    }

    /// Every consecutive pair keeps duration + transition distance.
    fn is_consistent(&self, p: &Instance, satellite: &SatelliteId) -> bool {
        let Some(sat) = p.satellite(satellite) else {
            return false;
        };
        self.entries.windows(2).all(|pair| {
            let Some(first) = p.observation(&pair[0].observation) else {
                return false;
            };
            let required =
                first.duration + sat.transition.between(&pair[0].observation, &pair[1].observation);
            pair[1].start - pair[0].start >= required - TIME_EPS
        })
    }
}

/// Tracks for all satellites plus externally-consumed capacity (placements
/// made by agents whose plans are not visible here).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    tracks: BTreeMap<SatelliteId, Track>,
    extra: BTreeMap<SatelliteId, u32>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tracks pre-loaded with the instance's fixed placements.
    pub fn from_fixed(p: &Instance) -> Self {
        let mut set = Self::new();
        for (oid, start) in p.fixed().entries() {
            if let Some(obs) = p.observation(oid) {
                set.track_mut(&obs.satellite).insert(oid.clone(), start);
            }
        }
        set
    }

    pub fn track(&self, s: &SatelliteId) -> Option<&Track> {
        self.tracks.get(s)
    }

    pub fn track_mut(&mut self, s: &SatelliteId) -> &mut Track {
        self.tracks.entry(s.clone()).or_default()
    }

    /// Declares `n` slots on `s` as consumed elsewhere.
    pub fn set_extra_occupancy(&mut self, s: &SatelliteId, n: u32) {
        self.extra.insert(s.clone(), n);
    }

    pub fn occupancy(&self, s: &SatelliteId) -> usize {
        self.tracks.get(s).map(|t| t.len()).unwrap_or(0)
            + self.extra.get(s).copied().unwrap_or(0) as usize
    }
}

/// Ascending (priority, window start, id): exclusive users first, then the
/// more urgent observations.
pub fn sort_observations<'a>(obs: impl Iterator<Item = &'a Observation>) -> Vec<ObservationId> {
    let mut sorted: Vec<&Observation> = obs.collect();
    sorted.sort_by(|a, b| {
        a.priority
            .cmp(&b.priority)
            .then_with(|| a.window.start.total_cmp(&b.window.start))
            .then_with(|| a.id.cmp(&b.id))
    });
    sorted.into_iter().map(|o| o.id.clone()).collect()
}

/// The sub-windows of `obs.window` where the policy allows it to run, in
/// ascending start order.
pub fn insertion_domains(
    p: &Instance,
    obs: &Observation,
    policy: HostPolicy<'_>,
) -> Vec<(SatelliteId, TimeWindow)> {
    let owner_is_exclusive = p.user(&obs.owner).is_some_and(|u| u.is_exclusive());
    let mut windows: Vec<TimeWindow> = if owner_is_exclusive {
        let owner = p.user(&obs.owner).expect("owner exists");
        owner
            .exclusives_on(&obs.satellite)
            .filter_map(|e| e.window.intersect(&obs.window))
            .filter(|w| w.fits(obs.duration))
            .collect()
    } else {
        match policy {
            HostPolicy::AutoGrant => vec![obs.window],
            HostPolicy::OutsideExclusivesOnly => {
                let Some(sat) = p.satellite(&obs.satellite) else {
                    return Vec::new();
                };
                let margin = sat.transition.max_seconds();
                p.free_intervals(&obs.satellite)
                    .into_iter()
                    .filter_map(|f| {
                        // Keep margin toward exclusive neighbors, none toward
                        // the horizon ends.
                        let left = if f.start > sat.horizon.start { margin } else { 0.0 };
                        let right = if f.end < sat.horizon.end { margin } else { 0.0 };
                        f.shrink(left, right)
                    })
                    .filter_map(|f| f.intersect(&obs.window))
                    .filter(|w| w.fits(obs.duration))
                    .collect()
            }
            HostPolicy::WithinExclusivesOf(user) => p
                .user(user)
                .map(|u| {
                    u.exclusives_on(&obs.satellite)
                        .filter_map(|e| e.window.intersect(&obs.window))
                        .filter(|w| w.fits(obs.duration))
                        .collect()
                })
                .unwrap_or_default(),
        }
    };
    windows.sort_by(|a, b| a.start.total_cmp(&b.start));
    windows
        .into_iter()
        .map(|w| (obs.satellite.clone(), w))
        .collect()
}

/// Scans the candidate windows for the earliest insertion point that keeps
/// the track consistent: after the predecessor's end plus transition, and,
/// when not appending at the tail, finishing (transition included) before
/// the successor starts. Mutates the track and returns the placement, or
/// `None` when nothing fits.
pub fn first_slot(
    p: &Instance,
    obs: &Observation,
    tracks: &mut TrackSet,
    domains: &[(SatelliteId, TimeWindow)],
) -> Option<(SatelliteId, f64)> {
    for (sat_id, window) in domains {
        let sat = p.satellite(sat_id)?;
        if tracks.occupancy(sat_id) >= sat.capacity as usize {
            continue;
        }
        let track = tracks.track_mut(sat_id);

        if track.is_empty() {
            if window.end >= window.start + obs.duration {
                track.insert(obs.id.clone(), window.start);
                debug_assert!(track.is_consistent(p, sat_id));
                return Some((sat_id.clone(), window.start));
            }
            continue;
        }

        for i in 0..=track.len() {
            let mut start = window.start;
            if i > 0 {
                let prev = &track.entries()[i - 1];
                let prev_obs = p.observation(&prev.observation)?;
                start = start.max(
                    prev.start
                        + prev_obs.duration
                        + sat.transition.between(&prev.observation, &obs.id),
                );
            }
            if start + obs.duration > window.end {
                continue;
            }
            let (upper, end) = if i == track.len() {
                (window.end, start + obs.duration)
            } else {
                let next = &track.entries()[i];
                (
                    next.start,
                    start + obs.duration + sat.transition.between(&obs.id, &next.observation),
                )
            };
            if start < end && end <= upper {
                track.insert(obs.id.clone(), start);
                debug_assert!(track.is_consistent(p, sat_id));
                return Some((sat_id.clone(), start));
            }
        }
    }
    None
}

/// Places as many of `candidates` as possible (already sorted), one
/// observation per request, updating `tracks` and `schedule` in place.
pub(crate) fn place_all(
    p: &Instance,
    policy: HostPolicy<'_>,
    tracks: &mut TrackSet,
    schedule: &mut Schedule,
    candidates: &[ObservationId],
) {
    let mut fulfilled: BTreeSet<RequestId> = schedule
        .entries()
        .filter_map(|(o, _)| p.observation(o).map(|obs| obs.request.clone()))
        .collect();

    for oid in candidates {
        let Some(obs) = p.observation(oid) else { continue };
        if fulfilled.contains(&obs.request) {
            continue;
        }
        let domains = insertion_domains(p, obs, policy);
        if let Some((_, start)) = first_slot(p, obs, tracks, &domains) {
            schedule.insert(oid.clone(), start);
            fulfilled.insert(obs.request.clone());
        }
    }
}

/// The centralized greedy baseline. Fixed placements are kept; the output
/// always passes validation, with grants recorded for any foreign
/// observation hosted inside an exclusive window.
pub fn solve_greedy(p: &Instance) -> Schedule {
    let mut tracks = TrackSet::from_fixed(p);
    let mut schedule = p.fixed().clone();
    let open: Vec<&Observation> = p
        .open_requests()
        .flat_map(|r| r.opportunities.iter())
        .filter_map(|o| p.observation(o))
        .collect();
    let sorted = sort_observations(open.into_iter());
    place_all(p, HostPolicy::AutoGrant, &mut tracks, &mut schedule, &sorted);
    record_required_grants(p, &mut schedule);
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_schedule;
    use crate::testkit;

    #[test]
    fn sort_puts_priority_before_start() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 0.0, 40.0)]);
        b.request("ra", "u0", 5.0, 1.0, &[("s0", 5.0, 20.0)]);
        b.request("rb", "u1", 5.0, 1.0, &[("s0", 9.0, 20.0)]);
        b.request("rc", "u0", 5.0, 1.0, &[("s0", 3.0, 20.0)]);
        let p = b.build();
        let sorted = sort_observations(p.observations());
        assert_eq!(
            sorted,
            vec![
                ObservationId::new("rb_0"), // priority 1 first
                ObservationId::new("rc_0"), // then earliest start
                ObservationId::new("ra_0"),
            ]
        );
    }

    #[test]
    fn equal_priority_and_start_breaks_ties_by_id() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("ra", "u0", 5.0, 1.0, &[("s0", 3.0, 20.0)]);
        b.request("rb", "u0", 5.0, 1.0, &[("s0", 3.0, 20.0)]);
        let p = b.build();
        let sorted = sort_observations(p.observations());
        assert_eq!(sorted[0], ObservationId::new("ra_0"));
    }

    #[test]
    fn empty_track_places_at_window_start() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 10.0)]);
        let p = b.build();
        let obs = p.observation(&"r0_0".into()).unwrap();
        let mut tracks = TrackSet::new();
        let domains = insertion_domains(&p, obs, HostPolicy::AutoGrant);
        let placed = first_slot(&p, obs, &mut tracks, &domains);
        assert_eq!(placed, Some(("s0".into(), 0.0)));
    }

    #[test]
    fn appends_after_predecessor_plus_transition() {
        // One observation at t=0 with duration 5 and transition 1: the
        // earliest slot for the next observation is 6.
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.request("r1", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        let p = b.build();
        let mut tracks = TrackSet::new();
        let first = p.observation(&"r0_0".into()).unwrap();
        let domains = insertion_domains(&p, first, HostPolicy::AutoGrant);
        first_slot(&p, first, &mut tracks, &domains).unwrap();

        let second = p.observation(&"r1_0".into()).unwrap();
        let domains = insertion_domains(&p, second, HostPolicy::AutoGrant);
        let placed = first_slot(&p, second, &mut tracks, &domains);
        assert_eq!(placed, Some(("s0".into(), 6.0)));
    }

    #[test]
    fn full_satellite_yields_none() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 1, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.request("r1", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        let p = b.build();
        let mut tracks = TrackSet::new();
        let first = p.observation(&"r0_0".into()).unwrap();
        let domains = insertion_domains(&p, first, HostPolicy::AutoGrant);
        first_slot(&p, first, &mut tracks, &domains).unwrap();

        let second = p.observation(&"r1_0".into()).unwrap();
        let domains = insertion_domains(&p, second, HostPolicy::AutoGrant);
        assert_eq!(first_slot(&p, second, &mut tracks, &domains), None);
    }

    #[test]
    fn middle_insertion_respects_successor_transition() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 10.0)]);
        b.request("r1", "u0", 5.0, 1.0, &[("s0", 12.0, 40.0)]);
        b.request("r2", "u0", 5.0, 1.0, &[("s0", 0.0, 40.0)]);
        let p = b.build();
        let mut tracks = TrackSet::new();
        for rid in ["r0_0", "r1_0"] {
            let obs = p.observation(&rid.into()).unwrap();
            let domains = insertion_domains(&p, obs, HostPolicy::AutoGrant);
            first_slot(&p, obs, &mut tracks, &domains).unwrap();
        }
        // Track: [0,5] and [12,17]. A 5s observation fits between them only
        // if 6 + 5 + 1 <= 12, which holds exactly.
        let obs = p.observation(&"r2_0".into()).unwrap();
        let domains = insertion_domains(&p, obs, HostPolicy::AutoGrant);
        let placed = first_slot(&p, obs, &mut tracks, &domains);
        assert_eq!(placed, Some(("s0".into(), 6.0)));
    }

    #[test]
    fn solve_single_request_at_earliest_start() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 3.0, 30.0)]);
        let p = b.build();
        let m = solve_greedy(&p);
        assert_eq!(m.start_of(&"r0_0".into()), Some(3.0));
        assert!(validate_schedule(&p, &m).is_ok());
    }

    #[test]
    fn demo_scenario_fulfills_all_requests_with_hosted_central() {
        let p = testkit::three_satellite_demo();
        let m = solve_greedy(&p);
        assert!(validate_schedule(&p, &m).is_ok());
        // Each request is fulfilled exactly once.
        for r in p.requests() {
            let count = r
                .opportunities
                .iter()
                .filter(|o| m.start_of(o).is_some())
                .count();
            assert_eq!(count, 1, "request {} not fulfilled exactly once", r.id);
        }
        // The first central observation lands inside u1's exclusive on s0.
        let start = m.start_of(&"o0_0_0".into()).expect("o0_0_0 scheduled");
        let u1 = p.user(&"u1".into()).unwrap();
        let run = p
            .observation(&"o0_0_0".into())
            .unwrap()
            .interval_at(start);
        assert!(u1
            .exclusives_on(&"s0".into())
            .any(|e| e.window.contains_window(&run)));
        assert!(m.has_grant(&"o0_0_0".into(), &"u1".into()));
    }

    #[test]
    fn at_most_one_observation_per_request() {
        let p = testkit::small_mixed_instance();
        let m = solve_greedy(&p);
        assert!(validate_schedule(&p, &m).is_ok());
        for r in p.requests() {
            assert!(
                r.opportunities
                    .iter()
                    .filter(|o| m.start_of(o).is_some())
                    .count()
                    <= 1
            );
        }
    }

    #[test]
    fn outside_policy_keeps_margin_to_exclusive_boundaries() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 20.0, 40.0)]);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 100.0)]);
        let p = b.build();
        let obs = p.observation(&"r0_0".into()).unwrap();
        let domains = insertion_domains(&p, obs, HostPolicy::OutsideExclusivesOnly);
        // Free intervals [0,20] and [40,100]; a margin of 1 applies toward
        // the exclusive: [0,19] and [41,100].
        assert_eq!(domains.len(), 2);
        assert_eq!(domains[0].1, TimeWindow::of(0.0, 19.0));
        assert_eq!(domains[1].1, TimeWindow::of(41.0, 100.0));
    }

    #[test]
    fn preallocated_entries_occupy_tracks_and_capacity() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 2, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.request("r1", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.request("r2", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.fix("r0_0", 0.0);
        let p = b.build();
        let m = solve_greedy(&p);
        assert!(validate_schedule(&p, &m).is_ok());
        assert_eq!(m.start_of(&"r0_0".into()), Some(0.0));
        // Capacity 2: exactly one more placement fits.
        assert_eq!(m.len(), 2);
    }
}
