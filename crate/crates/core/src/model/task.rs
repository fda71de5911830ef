use serde::{Deserialize, Serialize};

use super::ids::{PodId, StationId, WaypointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Insert,
    Extract,
    Park,
    Rest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubtaskKind {
    Move,
    Pickup,
    Setdown,
    Put,
    Get,
}

impl SubtaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubtaskKind::Move => "move",
            SubtaskKind::Pickup => "pickup",
            SubtaskKind::Setdown => "setdown",
            SubtaskKind::Put => "put",
            SubtaskKind::Get => "get",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub kind: SubtaskKind,
    /// Target of a move; the location of a pickup / setdown / station action.
    pub at: WaypointId,
    pub pod: Option<PodId>,
    pub station: Option<StationId>,
    /// Units put or picked; zero for non-station subtasks.
    pub units: u32,
}

/// A unit of work handed to one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub kind: TaskKind,
    pub pod: Option<PodId>,
    /// Storage location of the pod when it has to be fetched first.
    pub pod_location: Option<WaypointId>,
    pub station: Option<StationId>,
    /// Station gate for insert/extract, storage location for park, rest spot for rest.
    pub destination: WaypointId,
    pub units: u32,
}

impl Task {
    pub fn extract(pod: PodId, pod_location: WaypointId, station: StationId, gate: WaypointId, units: u32) -> Self {
        Self {
            kind: TaskKind::Extract,
            pod: Some(pod),
            pod_location: Some(pod_location),
            station: Some(station),
            destination: gate,
            units,
        }
    }

    pub fn insert(pod: PodId, pod_location: WaypointId, station: StationId, gate: WaypointId, units: u32) -> Self {
        Self { kind: TaskKind::Insert, ..Self::extract(pod, pod_location, station, gate, units) }
    }

    pub fn park(pod: PodId, storage: WaypointId) -> Self {
        Self {
            kind: TaskKind::Park,
            pod: Some(pod),
            pod_location: None,
            station: None,
            destination: storage,
            units: 0,
        }
    }

    pub fn rest(at: WaypointId) -> Self {
        Self { kind: TaskKind::Rest, pod: None, pod_location: None, station: None, destination: at, units: 0 }
    }
}

/// Splits a task into its subtask sequence. The leading move + pickup of an
/// insert or extract task is dropped when the robot already carries the pod.
pub fn decompose_task(task: &Task, carrying: Option<PodId>) -> Vec<Subtask> {
    let mv = |at| Subtask { kind: SubtaskKind::Move, at, pod: None, station: None, units: 0 };
    match task.kind {
        TaskKind::Insert | TaskKind::Extract => {
            let service = Subtask {
                kind: if task.kind == TaskKind::Insert { SubtaskKind::Put } else { SubtaskKind::Get },
                at: task.destination,
                pod: task.pod,
                station: task.station,
                units: task.units,
            };
            let mut out = Vec::with_capacity(4);
            let already = task.pod.is_some() && carrying == task.pod;
            if !already {
                let loc = task.pod_location.unwrap_or(task.destination);
                out.push(mv(loc));
                out.push(Subtask { kind: SubtaskKind::Pickup, at: loc, pod: task.pod, station: None, units: 0 });
            }
            out.push(mv(task.destination));
            out.push(service);
            out
        }
        TaskKind::Park => vec![
            mv(task.destination),
            Subtask { kind: SubtaskKind::Setdown, at: task.destination, pod: task.pod, station: None, units: 0 },
        ],
        TaskKind::Rest => vec![mv(task.destination)],
    }
}

/// What the world looks like from one robot's perspective at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotObservation {
    /// Waypoint the robot center sits on, if any.
    pub at: Option<WaypointId>,
    pub speed: f64,
    pub carrying: Option<PodId>,
    /// Since when the robot (and, where relevant, the pod) has been resting
    /// at the subtask location in the state the subtask requires.
    pub settled_since: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceTimes {
    /// Pod lift / set-down time.
    pub pod_handling: f64,
    /// Seconds per stored bundle at a replenishment station.
    pub replenish_per_unit: f64,
    /// Seconds per picked item at a pick station.
    pub pick_per_unit: f64,
}

impl Default for ServiceTimes {
    fn default() -> Self {
        Self { pod_handling: 3.0, replenish_per_unit: 10.0, pick_per_unit: 10.0 }
    }
}

impl ServiceTimes {
    /// Seconds the robot is blocked for a non-move subtask.
    pub fn duration(&self, subtask: &Subtask) -> f64 {
        match subtask.kind {
            SubtaskKind::Move => 0.0,
            SubtaskKind::Pickup | SubtaskKind::Setdown => self.pod_handling,
            SubtaskKind::Put => self.replenish_per_unit * subtask.units.max(1) as f64,
            SubtaskKind::Get => self.pick_per_unit * subtask.units.max(1) as f64,
        }
    }
}

/// Completion condition for the active subtask.
pub fn subtask_completed(subtask: &Subtask, obs: &RobotObservation, times: &ServiceTimes, t: f64) -> bool {
    let at_target = obs.at == Some(subtask.at);
    let held_for = |d: f64| obs.settled_since.is_some_and(|s| t - s >= d - 1e-9);
    match subtask.kind {
        SubtaskKind::Move => at_target && obs.speed == 0.0,
        SubtaskKind::Pickup => at_target && obs.speed == 0.0 && held_for(times.duration(subtask)),
        SubtaskKind::Setdown | SubtaskKind::Put | SubtaskKind::Get => {
            at_target
                && obs.speed == 0.0
                && obs.carrying.is_some()
                && obs.carrying == subtask.pod.or(obs.carrying)
                && held_for(times.duration(subtask))
        }
    }
}
