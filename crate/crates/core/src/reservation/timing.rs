//! Converts a timed path into per-step times and node reservations.

use super::table::Reservation;
use crate::kinematics::{turn_angle, DriveProfile, KinematicProfile};
use crate::model::{validate_path, PathViolation, TimedPath, WarehouseGraph, WaypointId};

#[derive(Debug, Clone, PartialEq)]
pub enum HopMotion {
    /// Straight drive; `offsets[k]` is the distance of the k-th node of the hop from its start.
    Drive { drive: DriveProfile, offsets: Vec<f64> },
    Elevator { transit: f64 },
}

/// Movement between two consecutive stop steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    /// Step indices of the stops bounding the hop.
    pub from: usize,
    pub to: usize,
    pub arrive: f64,
    /// End of the wait at `from`; the rotation starts here.
    pub rotate_start: f64,
    pub heading_before: f64,
    pub heading: f64,
    pub drive_start: f64,
    pub end: f64,
    pub motion: HopMotion,
}

impl Hop {
    pub fn rotation(&self) -> f64 {
        turn_angle(self.heading_before, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTiming {
    pub arrive: f64,
    /// When the robot starts leaving the node (end of wait and rotation); for
    /// the last step, the end of its wait.
    pub leave: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTiming {
    pub steps: Vec<StepTiming>,
    pub hops: Vec<Hop>,
    /// Heading on arrival at the last step.
    pub final_heading: f64,
}

impl PathTiming {
    pub fn compute(path: &TimedPath, graph: &WarehouseGraph, profile: &KinematicProfile) -> Result<Self, PathViolation> {
        validate_path(path, graph)?;
        Ok(Self::compute_unchecked(path, graph, profile))
    }

    /// Same as [`compute`](Self::compute) for paths known to be valid.
    pub fn compute_unchecked(path: &TimedPath, graph: &WarehouseGraph, profile: &KinematicProfile) -> Self {
        let steps = &path.steps;
        let mut timing = vec![StepTiming { arrive: 0.0, leave: 0.0 }; steps.len()];
        let mut hops = Vec::new();
        let mut heading = path.start_heading;
        let mut t = path.start_time;
        let mut i = 0;
        timing[0].arrive = t;
        while i + 1 < steps.len() {
            let rotate_start = t + steps[i].wait;
            let j = (i + 1..steps.len()).find(|&k| steps[k].stop).expect("path must end with a stop");
            let elevator = j == i + 1
                && !graph.has_edge(steps[i].waypoint, steps[j].waypoint)
                && graph.elevator_of(steps[i].waypoint).is_some();
            if elevator {
                let el = graph.elevator(graph.elevator_of(steps[i].waypoint).unwrap());
                let transit = el.transit_time;
                timing[i].leave = rotate_start;
                let end = rotate_start + transit;
                hops.push(Hop {
                    from: i,
                    to: j,
                    arrive: t,
                    rotate_start,
                    heading_before: heading,
                    heading,
                    drive_start: rotate_start,
                    end,
                    motion: HopMotion::Elevator { transit },
                });
                t = end;
            } else {
                let new_heading = graph.edge(steps[i].waypoint, steps[i + 1].waypoint).expect("validated path").heading;
                let drive_start = rotate_start + profile.rotation_time(turn_angle(heading, new_heading));
                let mut offsets = vec![0.0];
                for k in i..j {
                    let e = graph.edge(steps[k].waypoint, steps[k + 1].waypoint).expect("validated path");
                    offsets.push(offsets.last().unwrap() + e.length);
                }
                let drive = DriveProfile::new(*offsets.last().unwrap(), profile).expect("valid profile");
                timing[i].leave = drive_start;
                for k in i + 1..j {
                    let at = drive_start + drive.time_at_position_clamped(offsets[k - i]);
                    timing[k] = StepTiming { arrive: at, leave: at };
                }
                let end = drive_start + drive.total_time();
                hops.push(Hop {
                    from: i,
                    to: j,
                    arrive: t,
                    rotate_start,
                    heading_before: heading,
                    heading: new_heading,
                    drive_start,
                    end,
                    motion: HopMotion::Drive { drive, offsets },
                });
                heading = new_heading;
                t = end;
            }
            timing[j].arrive = t;
            i = j;
        }
        let last = steps.len() - 1;
        timing[last].leave = timing[last].arrive + steps[last].wait;
        Self { steps: timing, hops, final_heading: heading }
    }

    pub fn end_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.leave)
    }

    /// Arrival time at the final waypoint.
    pub fn arrival(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.arrive)
    }

    /// Index of the hop in progress at `t` (waiting and rotating at its start
    /// count as part of the hop).
    pub fn hop_at(&self, t: f64) -> Option<usize> {
        self.hops.iter().position(|h| t >= h.arrive && t < h.end)
    }
}

/// Node reservations of a path: each traversed arc blocks both endpoints for
/// its crossing window, stops block their node from arrival until departure,
/// and elevator transits block every port. Consecutive intervals of a node
/// are merged. The trailing wait is included; the final reservation is not.
pub fn path_to_reservations(
    path: &TimedPath,
    graph: &WarehouseGraph,
    profile: &KinematicProfile,
) -> Result<Vec<Reservation>, PathViolation> {
    let timing = PathTiming::compute(path, graph, profile)?;
    Ok(reservations_from_timing(path, &timing, graph))
}

pub fn reservations_from_timing(path: &TimedPath, timing: &PathTiming, graph: &WarehouseGraph) -> Vec<Reservation> {
    let owner = path.robot;
    let mut raw: Vec<(WaypointId, f64, f64)> = Vec::new();
    for (k, s) in path.steps.iter().enumerate() {
        if s.stop {
            raw.push((s.waypoint, timing.steps[k].arrive, timing.steps[k].leave));
        }
    }
    for hop in &timing.hops {
        match &hop.motion {
            HopMotion::Elevator { .. } => {
                let el = graph.elevator(graph.elevator_of(path.steps[hop.from].waypoint).unwrap());
                for &p in &el.ports {
                    raw.push((p, hop.drive_start, hop.end));
                }
            }
            HopMotion::Drive { .. } => {
                for k in hop.from..hop.to {
                    let (a, b) = (timing.steps[k].leave, timing.steps[k + 1].arrive);
                    raw.push((path.steps[k].waypoint, a, b));
                    raw.push((path.steps[k + 1].waypoint, a, b));
                }
            }
        }
    }
    merge(owner, raw)
}

fn merge(owner: crate::model::RobotId, mut raw: Vec<(WaypointId, f64, f64)>) -> Vec<Reservation> {
    raw.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<Reservation> = Vec::new();
    for (w, s, e) in raw {
        match out.last_mut() {
            Some(last) if last.waypoint == w && s <= last.end => last.end = last.end.max(e),
            _ => out.push(Reservation::new(w, s, e, owner)),
        }
    }
    out.retain(|r| r.end > r.start);
    out.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.waypoint.cmp(&b.waypoint)));
    out
}

/// Where a robot executing `path` can next accept a new plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanPoint {
    pub step: usize,
    pub waypoint: WaypointId,
    pub time: f64,
    pub heading: f64,
}

/// Reservations a moving robot cannot give up: everything from `now` until it
/// reaches its next planned stop. A robot standing at a stop (waiting or
/// about to rotate) can replan immediately from where it is.
pub fn fixed_reservations(
    path: &TimedPath,
    timing: &PathTiming,
    graph: &WarehouseGraph,
    now: f64,
) -> (Vec<Reservation>, ReplanPoint) {
    let last = path.steps.len() - 1;
    let hop = timing.hops.iter().find(|h| now < h.end && now >= h.arrive);
    let Some(hop) = hop else {
        let heading = timing.final_heading;
        let point = ReplanPoint { step: last, waypoint: path.steps[last].waypoint, time: now, heading };
        return (Vec::new(), point);
    };
    if now <= hop.rotate_start {
        let point = ReplanPoint { step: hop.from, waypoint: path.steps[hop.from].waypoint, time: now, heading: hop.heading_before };
        return (Vec::new(), point);
    }
    let stop_time = hop.end;
    let all = reservations_from_timing(path, timing, graph);
    let fixed = all
        .into_iter()
        .filter(|r| r.start < stop_time && r.end > now)
        .map(|mut r| {
            r.start = r.start.max(now);
            r.end = r.end.min(stop_time);
            r
        })
        .filter(|r| r.end > r.start)
        .collect();
    let point = ReplanPoint { step: hop.to, waypoint: path.steps[hop.to].waypoint, time: stop_time, heading: hop.heading };
    (fixed, point)
}
