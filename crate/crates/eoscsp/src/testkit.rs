//! Fixture builders shared by unit, integration and acceptance tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crate::samples::three_satellite_demo;

use crate::error::ModelError;
use crate::gen::{generate, GenerationParams};
use crate::ids::ObservationId;
use crate::model::{
    ExclusiveWindow, Instance, Observation, Request, Satellite, Schedule, TransitionTime, User,
};
use crate::time::TimeWindow;

pub fn satellite(id: &str, start: f64, end: f64, capacity: u32, tau: f64) -> Satellite {
    Satellite {
        id: id.into(),
        horizon: TimeWindow::of(start, end),
        capacity,
        transition: TransitionTime::constant(tau),
    }
}

pub fn user_with_exclusive(id: &str, priority: u32, sat: &str, start: f64, end: f64) -> User {
    User {
        id: id.into(),
        priority,
        exclusives: vec![ExclusiveWindow {
            satellite: sat.into(),
            window: TimeWindow::of(start, end),
        }],
    }
}

/// Hand-construction of small instances. Observation ids are derived from
/// the request id as `{request}_{k}` unless given explicitly.
#[derive(Default)]
pub struct InstanceBuilder {
    satellites: Vec<Satellite>,
    users: Vec<User>,
    requests: Vec<Request>,
    observations: Vec<Observation>,
    fixed: Schedule,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// One satellite `s0` plus the central user `u0`.
    pub fn single_satellite(start: f64, end: f64, capacity: u32, tau: f64) -> Self {
        let mut b = Self::new();
        b.satellite("s0", start, end, capacity, tau);
        b.central("u0");
        b
    }

    pub fn satellite(&mut self, id: &str, start: f64, end: f64, capacity: u32, tau: f64) -> &mut Self {
        self.satellites.push(satellite(id, start, end, capacity, tau));
        self
    }

    pub fn central(&mut self, id: &str) -> &mut Self {
        self.users.push(User {
            id: id.into(),
            priority: 2,
            exclusives: vec![],
        });
        self
    }

    pub fn exclusive_user(&mut self, id: &str, priority: u32, windows: &[(&str, f64, f64)]) -> &mut Self {
        self.users.push(User {
            id: id.into(),
            priority,
            exclusives: windows
                .iter()
                .map(|(sat, s, e)| ExclusiveWindow {
                    satellite: (*sat).into(),
                    window: TimeWindow::of(*s, *e),
                })
                .collect(),
        });
        self
    }

    /// Adds a request plus one observation per `(satellite, start, end)`
    /// window, ids `{id}_0`, `{id}_1`, ...
    pub fn request(
        &mut self,
        id: &str,
        owner: &str,
        duration: f64,
        reward: f64,
        windows: &[(&str, f64, f64)],
    ) -> &mut Self {
        let obs_ids: Vec<String> = (0..windows.len()).map(|k| format!("{id}_{k}")).collect();
        self.request_with_obs(id, owner, duration, reward, windows, &obs_ids)
    }

    pub fn request_with_obs(
        &mut self,
        id: &str,
        owner: &str,
        duration: f64,
        reward: f64,
        windows: &[(&str, f64, f64)],
        obs_ids: &[String],
    ) -> &mut Self {
        assert_eq!(windows.len(), obs_ids.len());
        let priority = self
            .users
            .iter()
            .find(|u| u.id == owner.into())
            .map(|u| u.priority)
            .unwrap_or(2);
        let hull_start = windows.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
        let hull_end = windows.iter().map(|w| w.2).fold(f64::NEG_INFINITY, f64::max);
        for ((sat, s, e), oid) in windows.iter().zip(obs_ids) {
            self.observations.push(Observation {
                id: oid.clone().into(),
                window: TimeWindow::of(*s, *e),
                duration,
                request: id.into(),
                reward,
                satellite: (*sat).into(),
                owner: owner.into(),
                priority,
            });
        }
        self.requests.push(Request {
            id: id.into(),
            window: TimeWindow::of(hull_start, hull_end),
            duration,
            reward,
            position: [0.0, 0.0, 500_000.0],
            owner: owner.into(),
            opportunities: obs_ids.iter().map(|o| o.clone().into()).collect(),
        });
        self
    }

    pub fn fix(&mut self, obs: &str, start: f64) -> &mut Self {
        self.fixed.insert(obs.into(), start);
        self
    }

    pub fn try_build(&self) -> Result<Instance, ModelError> {
        Instance::with_fixed(
            self.satellites.clone(),
            self.users.clone(),
            self.requests.clone(),
            self.observations.clone(),
            self.fixed.clone(),
        )
    }

    pub fn build(&self) -> Instance {
        self.try_build().expect("fixture builds")
    }
}

/// Two satellites, one exclusive user, and a few requests on both sides.
pub fn small_mixed_instance() -> Instance {
    let mut b = InstanceBuilder::new();
    b.satellite("s0", 0.0, 100.0, 4, 1.0);
    b.satellite("s1", 0.0, 100.0, 4, 1.0);
    b.central("u0");
    b.exclusive_user("u1", 1, &[("s0", 10.0, 30.0), ("s1", 50.0, 70.0)]);
    b.request("r1_0", "u1", 5.0, 20.0, &[("s0", 12.0, 28.0), ("s1", 52.0, 68.0)]);
    b.request("r1_1", "u1", 5.0, 10.0, &[("s1", 55.0, 70.0)]);
    b.request("r0_0", "u0", 5.0, 3.0, &[("s0", 40.0, 60.0), ("s1", 0.0, 20.0)]);
    b.request("r0_1", "u0", 5.0, 2.0, &[("s0", 14.0, 26.0)]);
    b.build()
}

/// Randomized parameters for instances of at most roughly `max_obs`
/// observations; used to drive oracle comparisons.
pub fn tiny_params(seed: u64, max_obs: usize) -> GenerationParams {
    let mut meta = ChaCha8Rng::seed_from_u64(seed ^ 0x007b_1e55_aac0_ffee);
    let opportunities = 1 + (meta.random_range(0..2usize));
    let request_budget = (max_obs / opportunities).max(1);
    let exclusive_users = meta.random_range(0..=2usize).min(request_budget);
    let per_user = match request_budget.checked_div(exclusive_users) {
        None => 1,
        Some(share) => meta.random_range(1..=share.clamp(1, 2)),
    };
    let central = (request_budget - exclusive_users * per_user).clamp(1, 3);
    GenerationParams {
        seed,
        satellite_count: meta.random_range(1..=2),
        satellite_capacity: meta.random_range(2..=4),
        horizon: TimeWindow::of(0.0, meta.random_range(40.0..=80.0)),
        exclusive_user_count: exclusive_users,
        requests_per_exclusive_user: per_user..=per_user,
        exclusives_per_user: meta.random_range(1..=2),
        exclusive_duration: 8.0..=14.0,
        central_request_count: central..=central,
        opportunities_per_request: opportunities,
        observation_duration: meta.random_range(2.0..=4.0),
        observation_window_duration: 6.0..=12.0,
        exclusive_reward: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        central_reward: 1..=5,
        transition_time: 1.0,
        windows_only_inside_exclusives: false,
    }
}

/// A small random instance; retries nearby seeds when a draw cannot be
/// packed, so callers always get an instance.
pub fn tiny_instance(seed: u64, max_obs: usize) -> Instance {
    for attempt in 0..32 {
        let params = tiny_params(seed.wrapping_add(attempt << 32), max_obs);
        if let Ok(p) = generate(&params) {
            if p.n_observations() <= max_obs {
                return p;
            }
        }
    }
    panic!("no tiny instance for seed {seed}");
}

/// All observation ids owned by exclusive users.
pub fn exclusive_observations(p: &Instance) -> Vec<ObservationId> {
    p.observations()
        .filter(|o| p.user(&o.owner).is_some_and(|u| u.is_exclusive()))
        .map(|o| o.id.clone())
        .collect()
}
