use crate::kinematics::{turn_angle, DriveProfile, KinematicProfile};
use crate::model::{WarehouseGraph, WaypointId};

use super::{heading_key, same_heading};

/// Set of waypoints a search may not enter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeMask(Vec<bool>);

impl NodeMask {
    pub fn new(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_nodes(len: usize, nodes: impl IntoIterator<Item = WaypointId>) -> Self {
        let mut m = Self::new(len);
        for w in nodes {
            m.insert(w);
        }
        m
    }

    pub fn contains(&self, w: WaypointId) -> bool {
        self.0.get(w.index()).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, w: WaypointId) {
        if self.0.len() <= w.index() {
            self.0.resize(w.index() + 1, false);
        }
        self.0[w.index()] = true;
    }

    pub fn remove(&mut self, w: WaypointId) {
        if let Some(b) = self.0.get_mut(w.index()) {
            *b = false;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = WaypointId> + '_ {
        self.0.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| WaypointId(i as u32))
    }
}

/// Distinct headings of the out-edges of `u`, ascending.
pub fn headings_out(graph: &WarehouseGraph, u: WaypointId) -> Vec<f64> {
    let mut hs: Vec<f64> = graph.out_edges(u).iter().map(|e| e.heading).collect();
    hs.sort_by(|a, b| a.total_cmp(b));
    hs.dedup_by(|a, b| heading_key(*a) == heading_key(*b));
    hs
}

/// Nodes reachable from `u` by driving straight along `heading`, with their
/// distance from `u`. Stops before the first blocked node.
pub fn straight_run(graph: &WarehouseGraph, u: WaypointId, heading: f64, blocked: &NodeMask) -> Vec<(WaypointId, f64)> {
    let mut out = Vec::new();
    let mut cur = u;
    let mut dist = 0.0;
    while out.len() < graph.len() {
        let Some(e) = graph.out_edges(cur).iter().find(|e| same_heading(e.heading, heading)) else { break };
        if blocked.contains(e.to) || e.to == u {
            break;
        }
        dist += e.length;
        out.push((e.to, dist));
        cur = e.to;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Wait,
    Drive,
    Elevator,
}

/// One search transition between two standstill states.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub from: WaypointId,
    /// Waypoints entered after `from`; the last one is where the action ends.
    pub nodes: Vec<WaypointId>,
    pub heading: f64,
    pub start: f64,
    pub end: f64,
    /// `(waypoint, t_start, t_end)` blocks required by the action.
    pub blocks: Vec<(WaypointId, f64, f64)>,
}

impl Action {
    pub fn to(&self) -> WaypointId {
        self.nodes.last().copied().unwrap_or(self.from)
    }

    pub fn cost(&self) -> f64 {
        self.end - self.start
    }

    pub fn wait(at: WaypointId, t: f64, heading: f64, wait: f64) -> Self {
        Self {
            kind: ActionKind::Wait,
            from: at,
            nodes: Vec::new(),
            heading,
            start: t,
            end: t + wait,
            blocks: vec![(at, t, t + wait)],
        }
    }

    /// Rotate towards `heading`, then drive through `run` without stopping.
    pub fn drive(
        profile: &KinematicProfile,
        from: WaypointId,
        t: f64,
        start_heading: f64,
        heading: f64,
        run: &[(WaypointId, f64)],
    ) -> Self {
        let drive_start = t + profile.rotation_time(turn_angle(start_heading, heading));
        let total = run.last().map_or(0.0, |r| r.1);
        let dp = DriveProfile::new(total, profile).expect("valid profile");
        let mut blocks = Vec::with_capacity(2 * run.len() + 1);
        if drive_start > t {
            blocks.push((from, t, drive_start));
        }
        let mut prev = (from, drive_start);
        for &(w, d) in run {
            let at = drive_start + dp.time_at_position_clamped(d);
            blocks.push((prev.0, prev.1, at));
            blocks.push((w, prev.1, at));
            prev = (w, at);
        }
        Self {
            kind: ActionKind::Drive,
            from,
            nodes: run.iter().map(|r| r.0).collect(),
            heading,
            start: t,
            end: drive_start + dp.total_time(),
            blocks,
        }
    }

    pub fn elevator(graph: &WarehouseGraph, from: WaypointId, to: WaypointId, t: f64, heading: f64) -> Option<Self> {
        let el = graph.elevator(graph.elevator_of(from)?);
        let transit = el.transit_time(from, to)?;
        Some(Self {
            kind: ActionKind::Elevator,
            from,
            nodes: vec![to],
            heading,
            start: t,
            end: t + transit,
            blocks: el.ports.iter().map(|p| (*p, t, t + transit)).collect(),
        })
    }
}

/// Generates the wait, straight-drive and elevator transitions from a
/// standstill at `u`. Straight runs may end at any of their first `max_run`
/// nodes, at the goal, at a node offering a turn, or at the end of the run.
#[allow(clippy::too_many_arguments)]
pub fn candidate_actions(
    graph: &WarehouseGraph,
    profile: &KinematicProfile,
    u: WaypointId,
    t: f64,
    heading: f64,
    blocked: &NodeMask,
    wait_step: f64,
    max_run: usize,
    goal: Option<WaypointId>,
) -> Vec<Action> {
    let mut out = Vec::new();
    if wait_step > 0.0 {
        out.push(Action::wait(u, t, heading, wait_step));
    }
    for d in headings_out(graph, u) {
        let run = straight_run(graph, u, d, blocked);
        for k in 0..run.len() {
            let w = run[k].0;
            let turn_point = headings_out(graph, w).iter().any(|h| !same_heading(*h, d));
            if k < max_run || k + 1 == run.len() || Some(w) == goal || turn_point {
                out.push(Action::drive(profile, u, t, heading, d, &run[..=k]));
            }
        }
    }
    for (p, _) in graph.elevator_links(u) {
        if !blocked.contains(p) {
            out.extend(Action::elevator(graph, u, p, t, heading));
        }
    }
    out
}
