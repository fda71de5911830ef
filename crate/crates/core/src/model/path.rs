use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::WarehouseGraph;
use super::ids::{RobotId, WaypointId};

const HEADING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub waypoint: WaypointId,
    pub stop: bool,
    /// Seconds spent standing after arriving; only meaningful when `stop`.
    pub wait: f64,
}

impl PathStep {
    pub fn pass(waypoint: WaypointId) -> Self {
        Self { waypoint, stop: false, wait: 0.0 }
    }

    pub fn stop(waypoint: WaypointId) -> Self {
        Self { waypoint, stop: true, wait: 0.0 }
    }

    pub fn stop_wait(waypoint: WaypointId, wait: f64) -> Self {
        Self { waypoint, stop: true, wait }
    }
}

/// A robot's planned route. `steps[0]` is where the robot stands at `start_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPath {
    pub robot: RobotId,
    pub start_time: f64,
    pub start_heading: f64,
    pub steps: Vec<PathStep>,
}

impl TimedPath {
    pub fn new(robot: RobotId, start_time: f64, start_heading: f64, steps: Vec<PathStep>) -> Self {
        Self { robot, start_time, start_heading, steps }
    }

    pub fn wait_at(robot: RobotId, at: WaypointId, start_time: f64, heading: f64, wait: f64) -> Self {
        Self::new(robot, start_time, heading, vec![PathStep::stop_wait(at, wait)])
    }

    pub fn first(&self) -> WaypointId {
        self.steps[0].waypoint
    }

    pub fn last(&self) -> WaypointId {
        self.steps.last().expect("empty path").waypoint
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn waypoints(&self) -> impl Iterator<Item = WaypointId> + '_ {
        self.steps.iter().map(|s| s.waypoint)
    }

    /// True when the path never leaves its first waypoint.
    pub fn is_stationary(&self) -> bool {
        self.steps.iter().all(|s| s.waypoint == self.steps[0].waypoint)
    }

    /// Indices of stop steps, in order.
    pub fn stop_indices(&self) -> Vec<usize> {
        self.steps.iter().enumerate().filter(|(_, s)| s.stop).map(|(i, _)| i).collect()
    }

    /// Metres driven along graph edges (elevator transits excluded).
    pub fn length(&self, graph: &WarehouseGraph) -> f64 {
        self.steps
            .windows(2)
            .filter_map(|w| graph.edge(w[0].waypoint, w[1].waypoint).map(|e| e.length))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathViolationKind {
    Empty,
    StartNotStopped,
    EndNotStopped,
    WaitWithoutStop,
    NegativeWait,
    NotConnected,
    NotStraight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathViolation {
    pub index: usize,
    pub kind: PathViolationKind,
}

impl fmt::Display for PathViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {:?}", self.index, self.kind)
    }
}

impl std::error::Error for PathViolation {}

fn is_elevator_hop(graph: &WarehouseGraph, a: &PathStep, b: &PathStep) -> bool {
    a.stop
        && b.stop
        && graph
            .elevator_of(a.waypoint)
            .is_some_and(|e| graph.elevator(e).transit_time(a.waypoint, b.waypoint).is_some())
}

/// Checks edge connectivity and straightness of every stop-to-stop subpath.
pub fn validate_path(path: &TimedPath, graph: &WarehouseGraph) -> Result<(), PathViolation> {
    let err = |index, kind| Err(PathViolation { index, kind });
    let steps = &path.steps;
    if steps.is_empty() {
        return err(0, PathViolationKind::Empty);
    }
    if !steps[0].stop {
        return err(0, PathViolationKind::StartNotStopped);
    }
    let mut heading: Option<f64> = None;
    for (i, s) in steps.iter().enumerate() {
        if !(s.wait >= 0.0) {
            return err(i, PathViolationKind::NegativeWait);
        }
        if s.wait > 0.0 && !s.stop {
            return err(i, PathViolationKind::WaitWithoutStop);
        }
        if i == 0 {
            continue;
        }
        let prev = &steps[i - 1];
        if is_elevator_hop(graph, prev, s) {
            heading = None;
            continue;
        }
        let Some(edge) = graph.edge(prev.waypoint, s.waypoint) else {
            return err(i, PathViolationKind::NotConnected);
        };
        if let Some(h) = heading {
            let diff = (edge.heading - h).abs();
            if diff > HEADING_TOL && (std::f64::consts::TAU - diff) > HEADING_TOL {
                return err(i, PathViolationKind::NotStraight);
            }
        }
        heading = if s.stop { None } else { Some(edge.heading) };
    }
    if !steps[steps.len() - 1].stop {
        return err(steps.len() - 1, PathViolationKind::EndNotStopped);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::graph::WaypointKind;

    fn corner() -> (WarehouseGraph, [WaypointId; 4]) {
        let mut g = WarehouseGraph::new();
        let t = g.add_tier("h0", 10.0, 10.0);
        let a = g.add_waypoint("a", t, 0.0, 0.0, WaypointKind::Plain);
        let b = g.add_waypoint("b", t, 1.0, 0.0, WaypointKind::Plain);
        let c = g.add_waypoint("c", t, 2.0, 0.0, WaypointKind::Plain);
        let d = g.add_waypoint("d", t, 2.0, 1.0, WaypointKind::Plain);
        g.add_bidirectional(a, b);
        g.add_bidirectional(b, c);
        g.add_bidirectional(c, d);
        (g, [a, b, c, d])
    }

    #[test]
    fn straight_corridor_is_valid() {
        let (g, [a, b, c, _]) = corner();
        let p = TimedPath::new(RobotId(0), 0.0, 0.0, vec![PathStep::stop(a), PathStep::pass(b), PathStep::stop(c)]);
        assert_eq!(validate_path(&p, &g), Ok(()));
    }

    #[test]
    fn corner_without_stop_is_rejected() {
        let (g, [a, b, c, d]) = corner();
        let p = TimedPath::new(
            RobotId(0),
            0.0,
            0.0,
            vec![PathStep::stop(a), PathStep::pass(b), PathStep::pass(c), PathStep::stop(d)],
        );
        assert_eq!(validate_path(&p, &g), Err(PathViolation { index: 3, kind: PathViolationKind::NotStraight }));
        let mut ok = p.clone();
        ok.steps[2].stop = true;
        assert_eq!(validate_path(&ok, &g), Ok(()));
    }

    #[test]
    fn single_node_wait_is_valid() {
        let (g, [a, ..]) = corner();
        assert_eq!(validate_path(&TimedPath::wait_at(RobotId(0), a, 0.0, 0.0, 4.0), &g), Ok(()));
    }

    #[test]
    fn reports_first_offence() {
        let (g, [a, b, _, d]) = corner();
        let p = TimedPath::new(RobotId(0), 0.0, 0.0, vec![PathStep::stop(a), PathStep::stop(d), PathStep::stop(b)]);
        assert_eq!(validate_path(&p, &g).unwrap_err().kind, PathViolationKind::NotConnected);
        let p = TimedPath::new(
            RobotId(0),
            0.0,
            0.0,
            vec![PathStep::stop(a), PathStep { waypoint: b, stop: false, wait: 1.0 }, PathStep::stop(a)],
        );
        assert_eq!(validate_path(&p, &g).unwrap_err(), PathViolation { index: 1, kind: PathViolationKind::WaitWithoutStop });
        // reversing direction mid-run needs a stop
        let p = TimedPath::new(RobotId(0), 0.0, 0.0, vec![PathStep::stop(a), PathStep::pass(b), PathStep::stop(a)]);
        assert_eq!(validate_path(&p, &g).unwrap_err().kind, PathViolationKind::NotStraight);
    }

    #[test]
    fn elevator_transit_between_stops() {
        let mut g = WarehouseGraph::new();
        let t0 = g.add_tier("h0", 5.0, 5.0);
        let t1 = g.add_tier("h1", 5.0, 5.0);
        let a = g.add_waypoint("a", t0, 1.0, 1.0, WaypointKind::ElevatorPort);
        let b = g.add_waypoint("b", t1, 1.0, 1.0, WaypointKind::ElevatorPort);
        g.add_elevator("l0", 4.0, vec![a, b]);
        let p = TimedPath::new(RobotId(0), 0.0, 0.0, vec![PathStep::stop(a), PathStep::stop(b)]);
        assert_eq!(validate_path(&p, &g), Ok(()));
        let p = TimedPath::new(RobotId(0), 0.0, 0.0, vec![PathStep::stop(a), PathStep::pass(b)]);
        assert!(validate_path(&p, &g).is_err());
    }
}
