//! Scheduling for Earth-observation satellite constellations shared between
//! a central planner and users holding exclusive orbit portions.
//!
//! The crate models the allocation problem (at most one observation per
//! request, subject to time windows, satellite capacity, transition times
//! and exclusive ownership), provides centralized baselines and several
//! coordination schemes in which exclusive users host the planner's
//! requests without disclosing their own plans, and ships the benchmark
//! harness that compares them:
//!
//! - [`greedy`]: priority-then-start-time insertion, the baseline every
//!   coordination scheme also uses for local sub-problems;
//! - [`exact`]: a desk-scale branch-and-bound ground truth, plus a mixed
//!   integer model exported in LP format ([`milp`]);
//! - [`auction`]: parallel and sequential single-item auctions and a
//!   consensus-based bundle scheme over a simulated message bus ([`bus`]);
//! - [`sdcop`]: per-request coordination through distributed constraint
//!   optimization ([`dcop`]);
//! - [`gen`]: seeded random instances for two benchmark regimes;
//! - [`report`]: run records, CSV output and benchmark sweeps.
//!
//! Each major capability has a runnable example under `examples/`; the
//! `eoscsp` binary wraps the same entry points as subcommands.

pub mod auction;
pub mod bus;
pub mod dcop;
pub mod error;
pub mod exact;
pub mod gen;
pub mod greedy;
pub mod ids;
pub mod milp;
pub mod model;
pub mod report;
pub mod samples;
pub mod sdcop;
pub mod time;

#[doc(hidden)]
pub mod testkit;

pub use error::{BusError, DcopError, GenError, ModelError, SolveError};
pub use ids::{ObservationId, RequestId, SatelliteId, UserId};
pub use model::{
    total_reward, validate_schedule, Instance, Observation, Request, Satellite, Schedule, User,
    Verdict,
};
pub use time::TimeWindow;
