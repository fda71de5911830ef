use std::sync::atomic::{AtomicU64, Ordering};

use crate::kinematics::KinematicProfile;
use crate::model::{WarehouseGraph, WaypointId};

/// Driving time over the straight-line distance; across tiers, the fastest
/// elevator transit.
pub fn h_estimate(graph: &WarehouseGraph, from: WaypointId, goal: WaypointId, profile: &KinematicProfile) -> f64 {
    if from == goal {
        return 0.0;
    }
    let d = graph.distance(from, goal);
    if d.is_finite() {
        profile.drive_time(d)
    } else {
        graph.min_elevator_time().unwrap_or(0.0)
    }
}

static DELTA_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Positive lower bound on the cost of any search transition: a wait, the
/// shortest edge at top speed, or the fastest elevator.
pub fn arc_cost_floor(graph: &WarehouseGraph, profile: &KinematicProfile, wait_step: f64) -> f64 {
    let mut floor = f64::INFINITY;
    if wait_step > 0.0 {
        floor = floor.min(wait_step);
    }
    if let Some(e) = graph.min_edge_length() {
        floor = floor.min(e / profile.v_max);
    }
    if let Some(l) = graph.min_elevator_time() {
        floor = floor.min(l);
    }
    floor
}

/// Counts a transition cheaper than `floor`; such a transition would break
/// the termination argument of the searches.
pub fn record_arc_cost(cost: f64, floor: f64) {
    if cost < floor - 1e-9 {
        DELTA_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        debug_assert!(false, "transition cost {cost} below floor {floor}");
    }
}

/// Process-wide number of transitions seen below their floor.
pub fn delta_violations() -> u64 {
    DELTA_VIOLATIONS.load(Ordering::Relaxed)
}
