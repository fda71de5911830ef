//! Robot positions along timed paths and path surgery.

use crate::model::{PathStep, RobotId, TierId, TimedPath, WarehouseGraph, WaypointId};
use crate::reservation::{HopMotion, PathTiming, ReplanPoint};

/// Center of a robot following `path` at time `t`.
pub fn position(graph: &WarehouseGraph, path: &TimedPath, timing: &PathTiming, t: f64) -> (TierId, f64, f64) {
    let at = |w: WaypointId| {
        let p = graph.waypoint(w);
        (p.tier, p.x, p.y)
    };
    let Some(hop) = timing.hops.iter().find(|h| t < h.end) else { return at(path.last()) };
    if t < hop.drive_start {
        return at(path.steps[hop.from].waypoint);
    }
    match &hop.motion {
        HopMotion::Elevator { .. } => at(path.steps[hop.from].waypoint),
        HopMotion::Drive { drive, offsets } => {
            let s = drive.position_at_clamped(t - hop.drive_start);
            let k = (1..offsets.len()).find(|&k| s <= offsets[k]).unwrap_or(offsets.len() - 1);
            let (a, b) = (graph.waypoint(path.steps[hop.from + k - 1].waypoint), graph.waypoint(path.steps[hop.from + k].waypoint));
            let len = offsets[k] - offsets[k - 1];
            let f = if len > 0.0 { ((s - offsets[k - 1]) / len).clamp(0.0, 1.0) } else { 1.0 };
            (a.tier, a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
        }
    }
}

/// `old` up to the replan point followed by `new`, which starts there.
pub fn splice(old: &TimedPath, timing: &PathTiming, point: &ReplanPoint, new: &TimedPath) -> TimedPath {
    let k = point.step;
    let mut steps = old.steps[..=k].to_vec();
    steps[k].stop = true;
    steps[k].wait = (point.time - timing.steps[k].arrive).max(0.0) + new.steps[0].wait;
    steps.extend_from_slice(&new.steps[1..]);
    TimedPath::new(old.robot, old.start_time, old.start_heading, steps)
}

/// The path cut at stop step `k`.
pub fn prefix(path: &TimedPath, k: usize) -> TimedPath {
    let mut steps = path.steps[..=k].to_vec();
    steps[k].stop = true;
    if k + 1 < path.steps.len() {
        steps[k].wait = 0.0;
    }
    TimedPath::new(path.robot, path.start_time, path.start_heading, steps)
}

/// A path through consecutive `nodes`, stopping wherever the heading changes.
pub fn run_path(graph: &WarehouseGraph, robot: RobotId, start_time: f64, heading: f64, nodes: &[WaypointId]) -> TimedPath {
    let mut steps: Vec<PathStep> = nodes.iter().map(|&w| PathStep::pass(w)).collect();
    steps[0].stop = true;
    steps.last_mut().unwrap().stop = true;
    for i in 1..nodes.len().saturating_sub(1) {
        let (a, b) = (graph.edge(nodes[i - 1], nodes[i]), graph.edge(nodes[i], nodes[i + 1]));
        let straight = matches!((a, b), (Some(a), Some(b)) if (a.heading - b.heading).abs() < 1e-6);
        steps[i].stop = !straight;
    }
    TimedPath::new(robot, start_time, heading, steps)
}
