//! Seedable random instance generation for the two benchmark regimes:
//! small highly-conflicting problems and large realistic order books.
//!
//! Generation is deterministic for a fixed parameter set: the same seed
//! always yields byte-identical JSON. Exclusive windows are placed without
//! overlap and with at least one transition time of slack between them, so
//! that schedules built independently inside neighboring exclusives can
//! never collide across their boundary. Every observation window is either
//! fully inside one exclusive window or fully outside all of them.

use std::ops::RangeInclusive;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::GenError;
use crate::ids::UserId;
use crate::model::{
    ExclusiveWindow, Instance, Observation, Request, Satellite, TransitionTime, User,
};
use crate::time::{subtract_intervals, TimeWindow};

/// Number of placement attempts before generation gives up.
const PLACEMENT_RETRIES: usize = 1000;

/// Scales available in each preset sweep.
pub const SWEEP_SCALES: usize = 10;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenerationParams {
    pub seed: u64,
    pub satellite_count: usize,
    pub satellite_capacity: u32,
    pub horizon: TimeWindow,
    pub exclusive_user_count: usize,
    pub requests_per_exclusive_user: RangeInclusive<usize>,
    pub exclusives_per_user: usize,
    pub exclusive_duration: RangeInclusive<f64>,
    pub central_request_count: RangeInclusive<usize>,
    pub opportunities_per_request: usize,
    pub observation_duration: f64,
    pub observation_window_duration: RangeInclusive<f64>,
    pub exclusive_reward: Vec<f64>,
    pub central_reward: RangeInclusive<i64>,
    pub transition_time: f64,
    pub windows_only_inside_exclusives: bool,
}

impl GenerationParams {
    fn validate(&self) -> Result<(), GenError> {
        let mut problems = Vec::new();
        if self.satellite_count == 0 {
            problems.push("need at least one satellite".to_string());
        }
        if self.horizon.start >= self.horizon.end {
            problems.push("empty horizon".to_string());
        }
        if self.requests_per_exclusive_user.is_empty() {
            problems.push("empty requests-per-user range".to_string());
        }
        if self.central_request_count.is_empty() {
            problems.push("empty central request range".to_string());
        }
        if self.exclusive_duration.is_empty() || *self.exclusive_duration.start() <= 0.0 {
            problems.push("exclusive durations must be positive".to_string());
        }
        if self.observation_window_duration.is_empty() {
            problems.push("empty window duration range".to_string());
        }
        if self.observation_duration <= 0.0 {
            problems.push("observation duration must be positive".to_string());
        }
        if *self.observation_window_duration.start() < self.observation_duration {
            problems.push("observation windows must fit the observation duration".to_string());
        }
        if self.exclusive_user_count > 0 {
            if self.exclusive_reward.is_empty() {
                problems.push("empty exclusive reward set".to_string());
            }
            if *self.exclusive_duration.end() < *self.observation_window_duration.start() {
                problems.push(
                    "no exclusive window can host the smallest observation window".to_string(),
                );
            }
        }
        if self.central_reward.is_empty() {
            problems.push("empty central reward range".to_string());
        }
        if self.transition_time < 0.0 {
            problems.push("negative transition time".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GenError::BadParams(problems.join("; ")))
        }
    }
}

/// Parameters for the highly-conflicting small-horizon regime.
///
/// The sweep couples the central planner linearly to the exclusive users so
/// that at every scale the planner emits as many requests as all exclusive
/// users together: scale `s` gives `2(s+1)` requests per exclusive user and
/// `8(s+1)` central requests.
pub fn conflicting_preset(scale: usize) -> Result<GenerationParams, GenError> {
    if scale >= SWEEP_SCALES {
        return Err(GenError::ScaleOutOfRange {
            scale,
            max: SWEEP_SCALES - 1,
        });
    }
    let per_user = 2 * (scale + 1);
    let central = 8 * (scale + 1);
    Ok(GenerationParams {
        seed: 0,
        satellite_count: 3,
        satellite_capacity: 20,
        horizon: TimeWindow::of(0.0, 300.0),
        exclusive_user_count: 4,
        requests_per_exclusive_user: per_user..=per_user,
        exclusives_per_user: 8,
        exclusive_duration: 15.0..=20.0,
        central_request_count: central..=central,
        opportunities_per_request: 10,
        observation_duration: 5.0,
        observation_window_duration: 10.0..=20.0,
        exclusive_reward: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        central_reward: 1..=5,
        transition_time: 1.0,
        windows_only_inside_exclusives: false,
    })
}

/// Parameters for the realistic large-order-book regime: a six-hour horizon
/// where every observation window lies inside an exclusive.
pub fn realistic_preset(scale: usize) -> Result<GenerationParams, GenError> {
    if scale >= SWEEP_SCALES {
        return Err(GenError::ScaleOutOfRange {
            scale,
            max: SWEEP_SCALES - 1,
        });
    }
    let per_user = 20 + (80 * scale + 4) / 9; // 20 at scale 0, 100 at scale 9
    let central = 25 + 25 * scale; // 25 at scale 0, 250 at scale 9
    Ok(GenerationParams {
        seed: 0,
        satellite_count: 8,
        satellite_capacity: 500,
        horizon: TimeWindow::of(0.0, 21600.0),
        exclusive_user_count: 5,
        requests_per_exclusive_user: per_user..=per_user,
        exclusives_per_user: 10,
        exclusive_duration: 300.0..=600.0,
        central_request_count: central..=central,
        opportunities_per_request: 5,
        observation_duration: 20.0,
        observation_window_duration: 40.0..=60.0,
        exclusive_reward: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        central_reward: 1..=5,
        transition_time: 1.0,
        windows_only_inside_exclusives: true,
    })
}

/// Generates a full instance from `params`, deterministically in the seed.
pub fn generate(params: &GenerationParams) -> Result<Instance, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let satellites: Vec<Satellite> = (0..params.satellite_count)
        .map(|i| Satellite {
            id: format!("s{i}").into(),
            horizon: params.horizon,
            capacity: params.satellite_capacity,
            transition: TransitionTime::constant(params.transition_time),
        })
        .collect();

    let mut users = vec![User {
        id: "u0".into(),
        priority: 2,
        exclusives: vec![],
    }];

    // Exclusive windows, per user, rejected until they keep one transition
    // time of slack from every previously placed window on the satellite.
    let mut placed: Vec<ExclusiveWindow> = Vec::new();
    for u in 1..=params.exclusive_user_count {
        let mut exclusives = Vec::new();
        for _ in 0..params.exclusives_per_user {
            let window = place_exclusive(&mut rng, params, &placed)?;
            placed.push(window.clone());
            exclusives.push(window);
        }
        users.push(User {
            id: format!("u{u}").into(),
            priority: 1,
            exclusives,
        });
    }

    let mut requests = Vec::new();
    let mut observations = Vec::new();

    for u in 1..=params.exclusive_user_count {
        let owner: UserId = format!("u{u}").into();
        let own_exclusives = users
            .iter()
            .find(|user| user.id == owner)
            .expect("exclusive user was just added")
            .exclusives
            .clone();
        let n_requests = sample_usize(&mut rng, &params.requests_per_exclusive_user);
        for j in 0..n_requests {
            let reward =
                params.exclusive_reward[rng.random_range(0..params.exclusive_reward.len())];
            let (request, mut obs) = build_request(
                &mut rng,
                params,
                format!("r{u}_{j}"),
                format!("o{u}_{j}"),
                &owner,
                1,
                reward,
                &RequestSpace::InsideOf(&own_exclusives),
            )?;
            requests.push(request);
            observations.append(&mut obs);
        }
    }

    let central: UserId = "u0".into();
    let all_exclusives: Vec<ExclusiveWindow> = placed.clone();
    let n_central = sample_usize(&mut rng, &params.central_request_count);
    for j in 0..n_central {
        let reward = rng.random_range(params.central_reward.clone()) as f64;
        let space = if params.windows_only_inside_exclusives {
            RequestSpace::InsideOf(&all_exclusives)
        } else {
            RequestSpace::Mixed {
                exclusives: &all_exclusives,
                satellites: &satellites,
            }
        };
        let (request, mut obs) = build_request(
            &mut rng,
            params,
            format!("r0_{j}"),
            format!("o0_{j}"),
            &central,
            2,
            reward,
            &space,
        )?;
        requests.push(request);
        observations.append(&mut obs);
    }

    Ok(Instance::new(satellites, users, requests, observations)?)
}

enum RequestSpace<'a> {
    /// Every opportunity window inside one of these exclusive windows.
    InsideOf(&'a [ExclusiveWindow]),
    /// Coin flip per opportunity: inside a random exclusive, or fully
    /// outside all of them.
    Mixed {
        exclusives: &'a [ExclusiveWindow],
        satellites: &'a [Satellite],
    },
}

#[allow(clippy::too_many_arguments)]
fn build_request(
    rng: &mut ChaCha8Rng,
    params: &GenerationParams,
    request_id: String,
    obs_prefix: String,
    owner: &UserId,
    priority: u32,
    reward: f64,
    space: &RequestSpace<'_>,
) -> Result<(Request, Vec<Observation>), GenError> {
    let mut observations = Vec::new();
    for k in 0..params.opportunities_per_request {
        let (satellite, window) = match space {
            RequestSpace::InsideOf(exclusives) => sample_inside(rng, params, exclusives)?,
            RequestSpace::Mixed {
                exclusives,
                satellites,
            } => {
                let inside = !exclusives.is_empty() && rng.random_bool(0.5);
                if inside {
                    sample_inside(rng, params, exclusives)?
                } else {
                    sample_outside(rng, params, satellites, exclusives)?
                }
            }
        };
        observations.push(Observation {
            id: format!("{obs_prefix}_{k}").into(),
            window,
            duration: params.observation_duration,
            request: request_id.clone().into(),
            reward,
            satellite,
            owner: owner.clone(),
            priority,
        });
    }

    let hull_start = observations
        .iter()
        .map(|o| o.window.start)
        .fold(f64::INFINITY, f64::min);
    let hull_end = observations
        .iter()
        .map(|o| o.window.end)
        .fold(f64::NEG_INFINITY, f64::max);

    let request = Request {
        id: request_id.into(),
        window: TimeWindow {
            start: hull_start,
            end: hull_end,
        },
        duration: params.observation_duration,
        reward,
        position: [
            rng.random_range(-90.0..=90.0),
            rng.random_range(-180.0..=180.0),
            rng.random_range(400_000.0..=800_000.0),
        ],
        owner: owner.clone(),
        opportunities: observations.iter().map(|o| o.id.clone()).collect(),
    };
    Ok((request, observations))
}

fn place_exclusive(
    rng: &mut ChaCha8Rng,
    params: &GenerationParams,
    placed: &[ExclusiveWindow],
) -> Result<ExclusiveWindow, GenError> {
    let margin = params.transition_time;
    for _ in 0..PLACEMENT_RETRIES {
        let sat = rng.random_range(0..params.satellite_count);
        let duration = sample_f64(rng, &params.exclusive_duration);
        if duration > params.horizon.length() {
            continue;
        }
        let start = rng.random_range(params.horizon.start..=params.horizon.end - duration);
        let candidate = TimeWindow {
            start,
            end: start + duration,
        };
        let satellite: crate::ids::SatelliteId = format!("s{sat}").into();
        let clear = placed
            .iter()
            .filter(|e| e.satellite == satellite)
            .all(|e| {
                candidate.start >= e.window.end + margin
                    || candidate.end + margin <= e.window.start
            });
        if clear {
            return Ok(ExclusiveWindow {
                satellite,
                window: candidate,
            });
        }
    }
    Err(GenError::Packing {
        what: "exclusive window".to_string(),
        retries: PLACEMENT_RETRIES,
    })
}

fn sample_inside(
    rng: &mut ChaCha8Rng,
    params: &GenerationParams,
    exclusives: &[ExclusiveWindow],
) -> Result<(crate::ids::SatelliteId, TimeWindow), GenError> {
    if exclusives.is_empty() {
        return Err(GenError::Packing {
            what: "observation window inside an exclusive (none exist)".to_string(),
            retries: 0,
        });
    }
    let longest = exclusives
        .iter()
        .map(|e| e.window.length())
        .fold(0.0, f64::max);
    let duration = sample_window_duration(rng, params, longest)?;
    let fitting: Vec<&ExclusiveWindow> = exclusives
        .iter()
        .filter(|e| e.window.length() >= duration)
        .collect();
    let host = fitting[rng.random_range(0..fitting.len())];
    let start = rng.random_range(host.window.start..=host.window.end - duration);
    Ok((
        host.satellite.clone(),
        TimeWindow {
            start,
            end: start + duration,
        },
    ))
}

fn sample_outside(
    rng: &mut ChaCha8Rng,
    params: &GenerationParams,
    satellites: &[Satellite],
    exclusives: &[ExclusiveWindow],
) -> Result<(crate::ids::SatelliteId, TimeWindow), GenError> {
    for _ in 0..PLACEMENT_RETRIES {
        let sat = &satellites[rng.random_range(0..satellites.len())];
        let holes: Vec<TimeWindow> = exclusives
            .iter()
            .filter(|e| e.satellite == sat.id)
            .map(|e| e.window)
            .collect();
        let free = subtract_intervals(sat.horizon, &holes);
        let longest = free.iter().map(|f| f.length()).fold(0.0, f64::max);
        if longest < *params.observation_window_duration.start() {
            continue;
        }
        let duration = sample_window_duration(rng, params, longest)?;
        let fitting: Vec<&TimeWindow> = free.iter().filter(|f| f.length() >= duration).collect();
        let slot = fitting[rng.random_range(0..fitting.len())];
        let start = rng.random_range(slot.start..=slot.end - duration);
        return Ok((
            sat.id.clone(),
            TimeWindow {
                start,
                end: start + duration,
            },
        ));
    }
    Err(GenError::Packing {
        what: "observation window outside exclusives".to_string(),
        retries: PLACEMENT_RETRIES,
    })
}

fn sample_window_duration(
    rng: &mut ChaCha8Rng,
    params: &GenerationParams,
    available: f64,
) -> Result<f64, GenError> {
    let lo = *params.observation_window_duration.start();
    let hi = params.observation_window_duration.end().min(available);
    if lo > hi {
        return Err(GenError::Packing {
            what: format!("observation window of at least {lo}s (only {available}s available)"),
            retries: 0,
        });
    }
    Ok(sample_f64(rng, &(lo..=hi)))
}

fn sample_f64(rng: &mut ChaCha8Rng, range: &RangeInclusive<f64>) -> f64 {
    if range.start() == range.end() {
        *range.start()
    } else {
        rng.random_range(range.clone())
    }
}

fn sample_usize(rng: &mut ChaCha8Rng, range: &RangeInclusive<usize>) -> usize {
    rng.random_range(range.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conflicting_sweep_endpoints_match_the_regime() {
        let lo = conflicting_preset(0).unwrap();
        assert_eq!(lo.requests_per_exclusive_user, 2..=2);
        assert_eq!(lo.central_request_count, 8..=8);
        let hi = conflicting_preset(9).unwrap();
        assert_eq!(hi.requests_per_exclusive_user, 20..=20);
        assert_eq!(hi.central_request_count, 80..=80);
        assert!(conflicting_preset(10).is_err());
    }

    #[test]
    fn realistic_sweep_endpoints_match_the_regime() {
        let lo = realistic_preset(0).unwrap();
        assert_eq!(lo.requests_per_exclusive_user, 20..=20);
        assert_eq!(lo.central_request_count, 25..=25);
        assert_eq!(lo.satellite_count, 8);
        assert_eq!(lo.satellite_capacity, 500);
        assert_eq!(lo.exclusive_user_count, 5);
        assert_eq!(lo.observation_duration, 20.0);
        assert_eq!(lo.horizon, TimeWindow::of(0.0, 21600.0));
        let hi = realistic_preset(9).unwrap();
        assert_eq!(hi.requests_per_exclusive_user, 100..=100);
        assert_eq!(hi.central_request_count, 250..=250);
    }

    #[test]
    fn conflicting_scale0_matches_regime_counts() {
        let mut params = conflicting_preset(0).unwrap();
        params.seed = 0;
        let p = generate(&params).unwrap();
        assert_eq!(p.satellites().count(), 3);
        assert!(p.satellites().all(|s| s.capacity == 20));
        assert!(p
            .satellites()
            .all(|s| s.horizon == TimeWindow::of(0.0, 300.0)));
        assert_eq!(p.exclusive_users().count(), 4);
        assert_eq!(p.n_requests(), 4 * 2 + 8);
        assert_eq!(p.n_observations(), (4 * 2 + 8) * 10);
        assert!(p
            .satellites()
            .all(|s| s.transition.between(&"a".into(), &"b".into()) == 1.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut params = conflicting_preset(1).unwrap();
        params.seed = 42;
        let a = generate(&params).unwrap().to_json();
        let b = generate(&params).unwrap().to_json();
        assert_eq!(a, b);
        params.seed = 43;
        let c = generate(&params).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn exclusives_never_overlap_and_keep_slack() {
        let mut params = conflicting_preset(2).unwrap();
        params.seed = 7;
        let p = generate(&params).unwrap();
        for s in p.satellites() {
            let mut windows: Vec<TimeWindow> = p
                .users()
                .flat_map(|u| u.exclusives_on(&s.id).map(|e| e.window))
                .collect();
            windows.sort_by(|a, b| a.start.total_cmp(&b.start));
            for pair in windows.windows(2) {
                assert!(
                    pair[1].start - pair[0].end >= params.transition_time,
                    "exclusives too close: {:?}",
                    pair
                );
            }
        }
    }

    #[test]
    fn windows_are_inside_one_exclusive_or_outside_all() {
        let mut params = conflicting_preset(1).unwrap();
        params.seed = 3;
        let p = generate(&params).unwrap();
        for o in p.observations() {
            let mut inside = 0;
            let mut partial = 0;
            for u in p.users() {
                for e in u.exclusives_on(&o.satellite) {
                    if e.window.contains_window(&o.window) {
                        inside += 1;
                    } else if e.window.overlaps(&o.window) {
                        partial += 1;
                    }
                }
            }
            assert_eq!(partial, 0, "window of {} straddles an exclusive", o.id);
            assert!(inside <= 1);
        }
    }

    #[test]
    fn exclusive_owned_windows_sit_in_their_owners_exclusives() {
        let mut params = conflicting_preset(1).unwrap();
        params.seed = 11;
        let p = generate(&params).unwrap();
        for o in p.observations() {
            let owner = p.user(&o.owner).unwrap();
            if owner.is_exclusive() {
                assert!(
                    owner
                        .exclusives_on(&o.satellite)
                        .any(|e| e.window.contains_window(&o.window)),
                    "observation {} outside its owner's exclusives",
                    o.id
                );
            }
        }
    }

    #[test]
    fn realistic_windows_all_inside_exclusives() {
        let mut params = realistic_preset(0).unwrap();
        params.seed = 7;
        params.requests_per_exclusive_user = 3..=3;
        params.central_request_count = 5..=5;
        let p = generate(&params).unwrap();
        assert_eq!(p.satellites().count(), 8);
        for o in p.observations() {
            let hosted = p.users().any(|u| {
                u.exclusives_on(&o.satellite)
                    .any(|e| e.window.contains_window(&o.window))
            });
            assert!(hosted, "observation {} is outside all exclusives", o.id);
        }
    }
}
