use serde::{Deserialize, Serialize};

use super::ids::{PodId, RobotId, StationId, WaypointId};
use crate::kinematics::KinematicProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub id: RobotId,
    pub name: String,
    pub profile: KinematicProfile,
    pub home: WaypointId,
    /// Initial heading in radians.
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PodOwner {
    Storage(WaypointId),
    Robot(RobotId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodSpec {
    pub id: PodId,
    pub name: String,
    pub radius: f64,
    pub owner: PodOwner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationKind {
    Replenishment,
    Pick,
}

impl StationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StationKind::Replenishment => "repl",
            StationKind::Pick => "pick",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub name: String,
    pub kind: StationKind,
    pub gate: WaypointId,
    /// Seconds per handled unit.
    pub handle_time: f64,
    /// Queue slots from the entry towards the gate; the last slot is adjacent to the gate.
    pub queue: Vec<WaypointId>,
}

impl Station {
    pub fn entry(&self) -> WaypointId {
        self.queue.first().copied().unwrap_or(self.gate)
    }

    pub fn contains(&self, w: WaypointId) -> bool {
        self.gate == w || self.queue.contains(&w)
    }
}
