//! Desk-scale exact solver: depth-first branch-and-bound over which
//! requests to fulfill, which opportunity fulfills each, and where each
//! placement sits in its satellite's sequence. Feasibility of a candidate
//! sequence is decided by earliest-start propagation with transition times,
//! which is exact for a fixed order.
//!
//! Exclusive users' observations carry a reward boost so they dominate any
//! combination of central observations, mirroring the priority encoding of
//! the mixed-integer model in [`crate::milp`].

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ids::SatelliteId;
use crate::model::{record_required_grants, Instance, Observation, Schedule};
use crate::time::TimeWindow;

#[derive(Debug, Clone)]
pub struct ExactConfig {
    pub budget: Duration,
    /// Reward added to every exclusive-owned observation. `None` picks a
    /// value strictly larger than the total non-exclusive reward, making
    /// exclusive placements lexicographically dominant. `Some(0.0)` turns
    /// the solver into a plain reward maximizer.
    pub priority_boost: Option<f64>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            budget: Duration::from_secs(60),
            priority_boost: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("optimality not proven within {budget:?}; best incumbent reward {reward}")]
    BudgetExhausted {
        budget: Duration,
        /// Best schedule found before the budget ran out.
        incumbent: Schedule,
        reward: f64,
    },
}

/// A boost strictly dominating the total non-exclusive reward.
pub fn auto_boost(p: &Instance) -> f64 {
    let central_total = p
        .observations()
        .filter(|o| p.user(&o.owner).is_some_and(|u| !u.is_exclusive()))
        .fold(0.0, |acc, o| acc + o.reward);
    central_total + 1.0
}

/// Objective value of a schedule under an exclusive boost.
pub fn boosted_reward(p: &Instance, m: &Schedule, boost: f64) -> f64 {
    m.entries()
        .filter_map(|(o, _)| p.observation(o))
        .fold(0.0, |acc, o| {
            if p.user(&o.owner).is_some_and(|u| u.is_exclusive()) {
                acc + o.reward + boost
            } else {
                acc + o.reward
            }
        })
}

/// Maximum-reward schedule, proven optimal, or an error carrying the best
/// incumbent when the time budget runs out. Deterministic: single-threaded
/// depth-first search with a fixed branching order.
pub fn solve_exact(p: &Instance, cfg: &ExactConfig) -> Result<Schedule, ExactError> {
    let boost = cfg.priority_boost.unwrap_or_else(|| auto_boost(p));
    let mut search = Search::new(p, boost, cfg.budget);
    search.run();

    let mut schedule = p.fixed().clone();
    for (obs, t) in &search.best_placements {
        schedule.insert(obs.clone(), *t);
    }
    record_required_grants(p, &mut schedule);

    if search.budget_hit {
        return Err(ExactError::BudgetExhausted {
            budget: cfg.budget,
            reward: crate::model::total_reward(p, &schedule),
            incumbent: schedule,
        });
    }
    Ok(schedule)
}

struct SeqItem<'a> {
    obs: &'a Observation,
    /// Fixed placements keep their start time; search placements float.
    pinned: Option<f64>,
}

struct Search<'a> {
    p: &'a Instance,
    /// Open requests in id order; each holds its opportunity observations.
    requests: Vec<Vec<&'a Observation>>,
    /// Σ over requests from index i of the best boosted opportunity reward.
    suffix_bound: Vec<f64>,
    sequences: std::collections::BTreeMap<SatelliteId, Vec<SeqItem<'a>>>,
    /// Allowed placement intervals per observation, ascending.
    allowed: std::collections::BTreeMap<&'a crate::ids::ObservationId, Vec<TimeWindow>>,
    boost: f64,
    value: f64,
    chosen: Vec<(crate::ids::ObservationId, SatelliteId)>,
    best_value: f64,
    best_placements: Vec<(crate::ids::ObservationId, f64)>,
    deadline: Instant,
    budget_hit: bool,
}

impl<'a> Search<'a> {
    fn new(p: &'a Instance, boost: f64, budget: Duration) -> Self {
        let mut requests: Vec<Vec<&Observation>> = p
            .open_requests()
            .map(|r| {
                r.opportunities
                    .iter()
                    .filter_map(|o| p.observation(o))
                    .collect()
            })
            .collect();
        for opportunities in &mut requests {
            opportunities.sort_by(|a, b| a.id.cmp(&b.id));
        }

        let weight = |o: &Observation| {
            if p.user(&o.owner).is_some_and(|u| u.is_exclusive()) {
                o.reward + boost
            } else {
                o.reward
            }
        };
        let mut suffix_bound = vec![0.0; requests.len() + 1];
        for i in (0..requests.len()).rev() {
            let best = requests[i].iter().map(|o| weight(o)).fold(0.0, f64::max);
            suffix_bound[i] = suffix_bound[i + 1] + best;
        }

        let mut sequences: std::collections::BTreeMap<SatelliteId, Vec<SeqItem>> = p
            .satellites()
            .map(|s| (s.id.clone(), Vec::new()))
            .collect();
        let mut fixed: Vec<(&Observation, f64)> = p
            .fixed()
            .entries()
            .filter_map(|(o, t)| p.observation(o).map(|obs| (obs, t)))
            .collect();
        fixed.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id)));
        for (obs, t) in fixed {
            sequences
                .get_mut(&obs.satellite)
                .expect("fixed observation on a known satellite")
                .push(SeqItem {
                    obs,
                    pinned: Some(t),
                });
        }

        let allowed = p
            .observations()
            .map(|o| (&o.id, allowed_intervals(p, o)))
            .collect();

        Search {
            p,
            requests,
            suffix_bound,
            sequences,
            allowed,
            boost,
            value: 0.0,
            chosen: Vec::new(),
            best_value: f64::NEG_INFINITY,
            best_placements: Vec::new(),
            deadline: Instant::now() + budget,
            budget_hit: false,
        }
    }

    fn run(&mut self) {
        self.descend(0);
    }

    fn descend(&mut self, idx: usize) {
        if self.budget_hit {
            return;
        }
        if Instant::now() >= self.deadline {
            self.budget_hit = true;
            return;
        }

        if idx == self.requests.len() {
            if self.value > self.best_value {
                self.best_value = self.value;
                self.best_placements = self.materialize();
            }
            return;
        }
        if self.value + self.suffix_bound[idx] <= self.best_value {
            return;
        }

        let n_opportunities = self.requests[idx].len();
        for oi in 0..n_opportunities {
            let obs = self.requests[idx][oi];
            let sat = obs.satellite.clone();
            let capacity = self
                .p
                .satellite(&sat)
                .map(|s| s.capacity as usize)
                .unwrap_or(0);
            if self.sequences[&sat].len() >= capacity {
                continue;
            }
            if self.allowed[&obs.id].is_empty() {
                continue;
            }
            let positions = self.sequences[&sat].len() + 1;
            for pos in 0..positions {
                let seq = self.sequences.get_mut(&sat).expect("satellite known");
                seq.insert(pos, SeqItem { obs, pinned: None });
                let feasible = propagate(self.p, &sat, &self.sequences[&sat], &self.allowed)
                    .is_some();
                if feasible {
                    let w = self.weight(obs);
                    self.value += w;
                    self.chosen.push((obs.id.clone(), sat.clone()));
                    self.descend(idx + 1);
                    self.chosen.pop();
                    self.value -= w;
                }
                self.sequences.get_mut(&sat).expect("satellite known").remove(pos);
                if self.budget_hit {
                    return;
                }
            }
        }

        // Leave the request unfulfilled.
        self.descend(idx + 1);
    }

    fn weight(&self, o: &Observation) -> f64 {
        if self.p.user(&o.owner).is_some_and(|u| u.is_exclusive()) {
            o.reward + self.boost
        } else {
            o.reward
        }
    }

    /// Earliest-start times of all floating placements in the current tree.
    fn materialize(&self) -> Vec<(crate::ids::ObservationId, f64)> {
        let mut out = Vec::new();
        for (sat, seq) in &self.sequences {
            let times = propagate(self.p, sat, seq, &self.allowed)
                .expect("materialize only on feasible leaves");
            for (item, t) in seq.iter().zip(times) {
                if item.pinned.is_none() {
                    out.push((item.obs.id.clone(), t));
                }
            }
        }
        out
    }
}

/// Placement intervals under full-information semantics: exclusive users
/// stay inside their own exclusives, central observations may go anywhere
/// in their window (grants recorded afterwards).
fn allowed_intervals(p: &Instance, o: &Observation) -> Vec<TimeWindow> {
    let owner_exclusive = p.user(&o.owner).is_some_and(|u| u.is_exclusive());
    let mut intervals: Vec<TimeWindow> = if owner_exclusive {
        p.user(&o.owner)
            .map(|u| {
                u.exclusives_on(&o.satellite)
                    .filter_map(|e| e.window.intersect(&o.window))
                    .filter(|w| w.fits(o.duration))
                    .collect()
            })
            .unwrap_or_default()
    } else {
        vec![o.window]
    };
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
    intervals
}

/// Earliest feasible start times for a fixed sequence, or `None`. Pinned
/// items must already satisfy their predecessor's separation; floating items
/// take the earliest start inside one of their allowed intervals.
fn propagate(
    p: &Instance,
    sat_id: &SatelliteId,
    seq: &[SeqItem<'_>],
    allowed: &std::collections::BTreeMap<&crate::ids::ObservationId, Vec<TimeWindow>>,
) -> Option<Vec<f64>> {
    let sat = p.satellite(sat_id)?;
    let mut times = Vec::with_capacity(seq.len());
    let mut prev: Option<(&Observation, f64)> = None;
    for item in seq {
        let lower = match prev {
            None => f64::NEG_INFINITY,
            Some((prev_obs, prev_t)) => {
                prev_t + prev_obs.duration + sat.transition.between(&prev_obs.id, &item.obs.id)
            }
        };
        let t = match item.pinned {
            Some(t) => (t >= lower).then_some(t)?,
            None => earliest_fit(&allowed[&item.obs.id], lower, item.obs.duration)?,
        };
        times.push(t);
        prev = Some((item.obs, t));
    }
    Some(times)
}

fn earliest_fit(intervals: &[TimeWindow], lower: f64, duration: f64) -> Option<f64> {
    for w in intervals {
        let t = w.start.max(lower);
        if t + duration <= w.end {
            return Some(t);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::solve_greedy;
    use crate::model::{total_reward, validate_schedule};
    use crate::testkit;

    #[test]
    fn empty_instance_gives_empty_schedule() {
        let p = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 4, 1.0).build();
        let m = solve_exact(&p, &ExactConfig::default()).unwrap();
        assert!(m.is_empty());
        assert_eq!(total_reward(&p, &m), 0.0);
    }

    #[test]
    fn dominated_conflict_keeps_the_better_reward() {
        // Two observations that cannot coexist (capacity 1): the reward-5
        // one wins.
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 1, 1.0);
        b.request("ra", "u0", 5.0, 5.0, &[("s0", 0.0, 20.0)]);
        b.request("rb", "u0", 5.0, 3.0, &[("s0", 0.0, 20.0)]);
        let p = b.build();
        let m = solve_exact(&p, &ExactConfig::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert!(m.start_of(&"ra_0".into()).is_some());
        assert_eq!(total_reward(&p, &m), 5.0);
    }

    #[test]
    fn exact_at_least_matches_greedy_on_small_instances() {
        for seed in 0..12 {
            let p = testkit::tiny_instance(seed, 8);
            let greedy_reward = total_reward(&p, &solve_greedy(&p));
            let exact = solve_exact(
                &p,
                &ExactConfig {
                    priority_boost: Some(0.0),
                    ..ExactConfig::default()
                },
            )
            .unwrap();
            assert!(validate_schedule(&p, &exact).is_ok());
            let exact_reward = total_reward(&p, &exact);
            assert!(
                exact_reward >= greedy_reward - 1e-9,
                "seed {seed}: exact {exact_reward} < greedy {greedy_reward}"
            );
        }
    }

    #[test]
    fn boost_prefers_exclusives_over_raw_reward() {
        // One slot, an exclusive observation worth 1 against a central one
        // worth 100: the boosted objective keeps the exclusive.
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 30.0, 1, 1.0);
        b.exclusive_user("u1", 1, &[("s0", 0.0, 30.0)]);
        b.request("r1", "u1", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.request("r0", "u0", 5.0, 100.0, &[("s0", 0.0, 20.0)]);
        let p = b.build();

        let boosted = solve_exact(&p, &ExactConfig::default()).unwrap();
        assert!(boosted.start_of(&"r1_0".into()).is_some());
        assert!(boosted.start_of(&"r0_0".into()).is_none());

        let raw = solve_exact(
            &p,
            &ExactConfig {
                priority_boost: Some(0.0),
                ..ExactConfig::default()
            },
        )
        .unwrap();
        assert!(raw.start_of(&"r0_0".into()).is_some());
    }

    #[test]
    fn zero_budget_reports_incumbent() {
        let p = testkit::tiny_instance(3, 8);
        let err = solve_exact(
            &p,
            &ExactConfig {
                budget: Duration::from_secs(0),
                priority_boost: Some(0.0),
            },
        )
        .unwrap_err();
        let ExactError::BudgetExhausted { incumbent, .. } = err;
        // The incumbent (possibly empty) must still be valid.
        assert!(validate_schedule(&p, &incumbent).is_ok());
    }

    #[test]
    fn respects_fixed_placements() {
        let mut b = testkit::InstanceBuilder::single_satellite(0.0, 100.0, 2, 1.0);
        b.request("r0", "u0", 5.0, 1.0, &[("s0", 0.0, 20.0)]);
        b.request("r1", "u0", 5.0, 9.0, &[("s0", 0.0, 20.0)]);
        b.fix("r0_0", 3.0);
        let p = b.build();
        let m = solve_exact(&p, &ExactConfig::default()).unwrap();
        assert_eq!(m.start_of(&"r0_0".into()), Some(3.0));
        assert!(m.start_of(&"r1_0".into()).is_some());
        assert!(validate_schedule(&p, &m).is_ok());
    }
}
