//! Static problem model: graph, entities, tasks and timed paths.

mod entities;
mod graph;
mod ids;
mod instance;
mod path;
mod task;

pub use entities::{PodOwner, PodSpec, RobotSpec, Station, StationKind};
pub use graph::{Edge, Elevator, Tier, WarehouseGraph, Waypoint, WaypointKind};
pub use ids::{ElevatorId, PodId, RobotId, StationId, TierId, WaypointId};
pub use instance::{
    max_radius_pair, parse_instance, validate_graph, validate_instance, write_instance, GraphFinding, GraphReport,
    Instance, ParseError,
};
pub use path::{validate_path, PathStep, PathViolation, PathViolationKind, TimedPath};
pub use task::{
    decompose_task, subtask_completed, RobotObservation, ServiceTimes, Subtask, SubtaskKind, Task, TaskKind,
};
