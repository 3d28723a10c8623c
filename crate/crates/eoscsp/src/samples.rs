//! Small hand-built scenarios, usable as fixtures and example inputs.

use crate::model::Instance;
use crate::testkit::InstanceBuilder;

/// The three-satellite demonstration scenario: two exclusive users with
/// exclusives on two satellites each, one central planner, two opportunities
/// per request, and capacity four per satellite. Every request is jointly
/// schedulable, and the central request `r0_0` can only be fulfilled inside
/// `u1`'s exclusive on `s0`.
pub fn three_satellite_demo() -> Instance {
    let mut b = InstanceBuilder::new();
    b.satellite("s0", 0.0, 100.0, 4, 1.0);
    b.satellite("s1", 0.0, 100.0, 4, 1.0);
    b.satellite("s2", 0.0, 100.0, 4, 1.0);
    b.central("u0");
    b.exclusive_user("u1", 1, &[("s0", 10.0, 40.0), ("s1", 20.0, 50.0)]);
    b.exclusive_user("u2", 1, &[("s0", 60.0, 90.0), ("s2", 30.0, 60.0)]);

    // u1: one request, opportunities on both of its exclusives.
    b.request_with_obs(
        "r1_0",
        "u1",
        5.0,
        30.0,
        &[("s0", 12.0, 24.0), ("s1", 22.0, 34.0)],
        &["o1_0_0".into(), "o1_0_1".into()],
    );
    // u2: two requests.
    b.request_with_obs(
        "r2_0",
        "u2",
        5.0,
        40.0,
        &[("s0", 62.0, 74.0), ("s2", 32.0, 44.0)],
        &["o2_0_0".into(), "o2_0_1".into()],
    );
    b.request_with_obs(
        "r2_1",
        "u2",
        5.0,
        20.0,
        &[("s0", 75.0, 88.0), ("s2", 45.0, 58.0)],
        &["o2_1_0".into(), "o2_1_1".into()],
    );
    // Central planner: r0_0's first opportunity sits inside u1's exclusive
    // on s0 and sorts ahead of its sibling, so that is where it lands.
    b.request_with_obs(
        "r0_0",
        "u0",
        5.0,
        5.0,
        &[("s0", 26.0, 38.0), ("s1", 55.0, 70.0)],
        &["o0_0_0".into(), "o0_0_1".into()],
    );
    // Two more central requests, schedulable outside exclusives.
    b.request_with_obs(
        "r0_1",
        "u0",
        5.0,
        4.0,
        &[("s1", 60.0, 80.0), ("s2", 0.0, 20.0)],
        &["o0_1_0".into(), "o0_1_1".into()],
    );
    b.request_with_obs(
        "r0_2",
        "u0",
        5.0,
        3.0,
        &[("s2", 70.0, 95.0), ("s0", 0.0, 8.0)],
        &["o0_2_0".into(), "o0_2_1".into()],
    );
    b.build()
}

