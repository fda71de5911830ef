use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ids::{ElevatorId, TierId, WaypointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WaypointKind {
    Plain,
    Storage,
    StationGate,
    Queue,
    ElevatorPort,
}

impl WaypointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WaypointKind::Plain => "plain",
            WaypointKind::Storage => "storage",
            WaypointKind::StationGate => "gate",
            WaypointKind::Queue => "queue",
            WaypointKind::ElevatorPort => "elevator",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "plain" => WaypointKind::Plain,
            "storage" => WaypointKind::Storage,
            "gate" | "station-gate" => WaypointKind::StationGate,
            "queue" => WaypointKind::Queue,
            "elevator" | "elevator-port" => WaypointKind::ElevatorPort,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub name: String,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub name: String,
    pub tier: TierId,
    pub x: f64,
    pub y: f64,
    pub kind: WaypointKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub to: WaypointId,
    pub length: f64,
    /// Heading of travel along the edge, radians in `[0, 2π)`.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elevator {
    pub name: String,
    pub ports: Vec<WaypointId>,
    pub transit_time: f64,
}

impl Elevator {
    pub fn transit_time(&self, from: WaypointId, to: WaypointId) -> Option<f64> {
        (from != to && self.ports.contains(&from) && self.ports.contains(&to))
            .then_some(self.transit_time)
    }
}

/// Directed multi-tier waypoint graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WarehouseGraph {
    tiers: Vec<Tier>,
    waypoints: Vec<Waypoint>,
    out_edges: Vec<Vec<Edge>>,
    in_edges: Vec<Vec<Edge>>,
    elevators: Vec<Elevator>,
    port_of: BTreeMap<WaypointId, ElevatorId>,
    names: BTreeMap<String, WaypointId>,
}

impl WarehouseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tier(&mut self, name: impl Into<String>, length: f64, width: f64) -> TierId {
        self.tiers.push(Tier { name: name.into(), length, width });
        TierId(self.tiers.len() as u16 - 1)
    }

    pub fn add_waypoint(
        &mut self,
        name: impl Into<String>,
        tier: TierId,
        x: f64,
        y: f64,
        kind: WaypointKind,
    ) -> WaypointId {
        let id = WaypointId(self.waypoints.len() as u32);
        let name = name.into();
        self.names.insert(name.clone(), id);
        self.waypoints.push(Waypoint { name, tier, x, y, kind });
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        id
    }

    /// Adds the directed edge `from -> to`; duplicate edges are ignored.
    pub fn add_edge(&mut self, from: WaypointId, to: WaypointId) {
        if self.has_edge(from, to) || from == to {
            return;
        }
        let (a, b) = (&self.waypoints[from.index()], &self.waypoints[to.index()]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let length = dx.hypot(dy);
        let heading = crate::kinematics::normalize_heading(dy.atan2(dx));
        self.out_edges[from.index()].push(Edge { to, length, heading });
        self.in_edges[to.index()].push(Edge { to: from, length, heading });
    }

    pub fn add_bidirectional(&mut self, a: WaypointId, b: WaypointId) {
        self.add_edge(a, b);
        self.add_edge(b, a);
    }

    pub fn remove_edge(&mut self, from: WaypointId, to: WaypointId) {
        self.out_edges[from.index()].retain(|e| e.to != to);
        self.in_edges[to.index()].retain(|e| e.to != from);
    }

    pub fn add_elevator(
        &mut self,
        name: impl Into<String>,
        transit_time: f64,
        ports: Vec<WaypointId>,
    ) -> ElevatorId {
        let id = ElevatorId(self.elevators.len() as u32);
        for p in &ports {
            self.port_of.insert(*p, id);
        }
        self.elevators.push(Elevator { name: name.into(), ports, transit_time });
        id
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn tier(&self, id: TierId) -> &Tier {
        &self.tiers[id.0 as usize]
    }

    pub fn waypoint(&self, id: WaypointId) -> &Waypoint {
        &self.waypoints[id.index()]
    }

    pub fn waypoints(&self) -> impl Iterator<Item = (WaypointId, &Waypoint)> {
        self.waypoints.iter().enumerate().map(|(i, w)| (WaypointId(i as u32), w))
    }

    pub fn ids(&self) -> impl Iterator<Item = WaypointId> {
        (0..self.waypoints.len() as u32).map(WaypointId)
    }

    pub fn by_name(&self, name: &str) -> Option<WaypointId> {
        self.names.get(name).copied()
    }

    pub fn out_edges(&self, w: WaypointId) -> &[Edge] {
        &self.out_edges[w.index()]
    }

    /// Edges of the transpose graph: `Edge::to` is the predecessor.
    pub fn in_edges(&self, w: WaypointId) -> &[Edge] {
        &self.in_edges[w.index()]
    }

    pub fn edge(&self, from: WaypointId, to: WaypointId) -> Option<&Edge> {
        self.out_edges[from.index()].iter().find(|e| e.to == to)
    }

    pub fn has_edge(&self, from: WaypointId, to: WaypointId) -> bool {
        self.edge(from, to).is_some()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (WaypointId, &Edge)> {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(i, es)| es.iter().map(move |e| (WaypointId(i as u32), e)))
    }

    pub fn elevators(&self) -> &[Elevator] {
        &self.elevators
    }

    pub fn elevator(&self, id: ElevatorId) -> &Elevator {
        &self.elevators[id.0 as usize]
    }

    pub fn elevator_of(&self, w: WaypointId) -> Option<ElevatorId> {
        self.port_of.get(&w).copied()
    }

    /// Other ports reachable by elevator from `w`, with transit time.
    pub fn elevator_links(&self, w: WaypointId) -> Vec<(WaypointId, f64)> {
        match self.elevator_of(w) {
            Some(e) => {
                let el = self.elevator(e);
                el.ports.iter().filter(|p| **p != w).map(|p| (*p, el.transit_time)).collect()
            }
            None => Vec::new(),
        }
    }

    /// Euclidean distance; infinite across tiers.
    pub fn distance(&self, a: WaypointId, b: WaypointId) -> f64 {
        let (wa, wb) = (self.waypoint(a), self.waypoint(b));
        if wa.tier != wb.tier {
            return f64::INFINITY;
        }
        (wb.x - wa.x).hypot(wb.y - wa.y)
    }

    pub fn min_edge_length(&self) -> Option<f64> {
        self.edges().map(|(_, e)| e.length).min_by(|a, b| a.total_cmp(b))
    }

    pub fn min_elevator_time(&self) -> Option<f64> {
        self.elevators.iter().map(|e| e.transit_time).min_by(|a, b| a.total_cmp(b))
    }
}
