use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use ordered_float::OrderedFloat;

use super::actions::{headings_out, straight_run, NodeMask};
use super::{heading_key, same_heading};
use crate::kinematics::{turn_angle, KinematicProfile};
use crate::model::{PathStep, WarehouseGraph, WaypointId};

#[derive(Debug, Clone)]
struct RState {
    w: WaypointId,
    heading: f64,
    g: f64,
    closed: bool,
}

/// Reverse resumable A* from a goal over `(waypoint, heading)` standstill
/// states. `cost_to_go` answers are optimal single-robot times ignoring all
/// other robots; the search only runs as far as the queries require.
#[derive(Debug, Clone)]
pub struct RraContext {
    goal: WaypointId,
    blocked: NodeMask,
    profile: KinematicProfile,
    anchor: WaypointId,
    use_distance: bool,
    index: HashMap<(WaypointId, i64), usize>,
    states: Vec<RState>,
    open: BinaryHeap<Reverse<(OrderedFloat<f64>, u64, usize)>>,
    seq: u64,
    expansions: usize,
}

/// Headings a robot can have while standing at `w`.
fn node_headings(graph: &WarehouseGraph, w: WaypointId) -> Vec<f64> {
    let mut hs: Vec<f64> = Vec::new();
    let add = |v: WaypointId, hs: &mut Vec<f64>| {
        hs.extend(graph.out_edges(v).iter().map(|e| e.heading));
        hs.extend(graph.in_edges(v).iter().map(|e| e.heading));
    };
    add(w, &mut hs);
    if let Some(e) = graph.elevator_of(w) {
        for &p in &graph.elevator(e).ports {
            add(p, &mut hs);
        }
    }
    hs.sort_by(|a, b| a.total_cmp(b));
    hs.dedup_by(|a, b| heading_key(*a) == heading_key(*b));
    hs
}

impl RraContext {
    /// `anchor` is the robot's start; it only steers the search order.
    pub fn new(
        graph: &WarehouseGraph,
        goal: WaypointId,
        anchor: WaypointId,
        blocked: NodeMask,
        profile: KinematicProfile,
    ) -> Self {
        let mut ctx = Self {
            goal,
            blocked,
            profile,
            anchor,
            use_distance: graph.tiers().len() <= 1,
            index: HashMap::new(),
            states: Vec::new(),
            open: BinaryHeap::new(),
            seq: 0,
            expansions: 0,
        };
        let mut hs = node_headings(graph, goal);
        if hs.is_empty() {
            hs.push(0.0);
        }
        for h in hs {
            ctx.relax(graph, goal, h, 0.0);
        }
        ctx
    }

    pub fn goal(&self) -> WaypointId {
        self.goal
    }

    pub fn blocked(&self) -> &NodeMask {
        &self.blocked
    }

    /// True when the context was built for this goal and blocked set.
    pub fn matches(&self, goal: WaypointId, blocked: &NodeMask) -> bool {
        self.goal == goal && &self.blocked == blocked
    }

    pub fn expansions(&self) -> usize {
        self.expansions
    }

    fn h(&self, graph: &WarehouseGraph, w: WaypointId) -> f64 {
        if self.use_distance {
            self.profile.drive_time(graph.distance(self.anchor, w))
        } else {
            0.0
        }
    }

    fn relax(&mut self, graph: &WarehouseGraph, w: WaypointId, heading: f64, g: f64) {
        let key = (w, heading_key(heading));
        let idx = match self.index.get(&key) {
            Some(&i) => {
                let s = &self.states[i];
                if s.closed || s.g <= g {
                    return;
                }
                self.states[i].g = g;
                i
            }
            None => {
                self.states.push(RState { w, heading, g, closed: false });
                self.index.insert(key, self.states.len() - 1);
                self.states.len() - 1
            }
        };
        let f = g + self.h(graph, w);
        self.seq += 1;
        self.open.push(Reverse((OrderedFloat(f), self.seq, idx)));
    }

    /// Expands one state; false once the open list is exhausted.
    fn step(&mut self, graph: &WarehouseGraph) -> bool {
        loop {
            let Some(Reverse((_, _, idx))) = self.open.pop() else { return false };
            if self.states[idx].closed {
                continue;
            }
            self.states[idx].closed = true;
            self.expansions += 1;
            let RState { w: x, heading: d, g, .. } = self.states[idx].clone();
            // rotate at x, then leave along d
            if x != self.goal && headings_out(graph, x).iter().any(|h| same_heading(*h, d)) {
                for h in node_headings(graph, x) {
                    if !same_heading(h, d) {
                        self.relax(graph, x, h, g + self.profile.rotation_time(turn_angle(h, d)));
                    }
                }
            }
            // straight runs along d ending at x
            let mut cur = x;
            let mut dist = 0.0;
            for _ in 0..graph.len() {
                let Some(e) = graph.in_edges(cur).iter().find(|e| same_heading(e.heading, d)).copied() else {
                    break;
                };
                let p = e.to;
                if self.blocked.contains(p) || p == x {
                    break;
                }
                dist += e.length;
                self.relax(graph, p, d, g + self.profile.drive_time(dist));
                cur = p;
            }
            // elevator rides ending at x
            for (p, transit) in graph.elevator_links(x) {
                if !self.blocked.contains(p) {
                    self.relax(graph, p, d, g + transit);
                }
            }
            return true;
        }
    }

    fn closed_value(&mut self, graph: &WarehouseGraph, w: WaypointId, heading: f64) -> f64 {
        let key = (w, heading_key(heading));
        loop {
            if let Some(&i) = self.index.get(&key) {
                if self.states[i].closed {
                    return self.states[i].g;
                }
            }
            if !self.step(graph) {
                return self.index.get(&key).map_or(f64::INFINITY, |&i| {
                    if self.states[i].closed {
                        self.states[i].g
                    } else {
                        f64::INFINITY
                    }
                });
            }
        }
    }

    /// Time from standstill at `w` facing `heading` to the goal.
    pub fn state_value(&mut self, graph: &WarehouseGraph, w: WaypointId, heading: f64) -> f64 {
        if w == self.goal {
            return 0.0;
        }
        if self.index.contains_key(&(w, heading_key(heading)))
            || node_headings(graph, w).iter().any(|h| same_heading(*h, heading))
        {
            return self.closed_value(graph, w, heading);
        }
        self.cost_to_go_from(graph, w, heading)
    }

    /// Optimal time from `w` to the goal when the initial rotation is free.
    pub fn cost_to_go(&mut self, graph: &WarehouseGraph, w: WaypointId) -> f64 {
        if w == self.goal {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for d in headings_out(graph, w) {
            best = best.min(self.closed_value(graph, w, d));
        }
        for (p, transit) in graph.elevator_links(w) {
            if !self.blocked.contains(p) {
                for d in node_headings(graph, w) {
                    best = best.min(transit + self.closed_value(graph, p, d));
                }
            }
        }
        best
    }

    /// Optimal time from `w` facing `heading` to the goal, rotation included.
    pub fn cost_to_go_from(&mut self, graph: &WarehouseGraph, w: WaypointId, heading: f64) -> f64 {
        if w == self.goal {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for d in headings_out(graph, w) {
            let rot = self.profile.rotation_time(turn_angle(heading, d));
            best = best.min(rot + self.closed_value(graph, w, d));
        }
        if self.index.contains_key(&(w, heading_key(heading))) {
            best = best.min(self.closed_value(graph, w, heading));
        }
        best
    }

    /// Best first hop from standstill at `w` facing `heading`: the driving
    /// direction and the straight run up to the stop (or the elevator exit).
    pub fn best_hop(&mut self, graph: &WarehouseGraph, w: WaypointId, heading: f64) -> Option<(f64, Vec<WaypointId>)> {
        if w == self.goal {
            return None;
        }
        let mut best: Option<(f64, f64, Vec<WaypointId>)> = None;
        for d in headings_out(graph, w) {
            let rot = self.profile.rotation_time(turn_angle(heading, d));
            let run = straight_run(graph, w, d, &self.blocked);
            for (k, &(x, dist)) in run.iter().enumerate() {
                let c = rot + self.profile.drive_time(dist) + self.state_value(graph, x, d);
                if c.is_finite() && best.as_ref().is_none_or(|b| c < b.0 - 1e-9) {
                    best = Some((c, d, run[..=k].iter().map(|r| r.0).collect()));
                }
            }
        }
        for (p, transit) in graph.elevator_links(w) {
            if self.blocked.contains(p) {
                continue;
            }
            let c = transit + self.state_value(graph, p, heading);
            if c.is_finite() && best.as_ref().is_none_or(|b| c < b.0 - 1e-9) {
                best = Some((c, heading, vec![p]));
            }
        }
        best.map(|(_, d, nodes)| (d, nodes))
    }

    /// Follows the optimal policy from `w` to the goal. Returns the steps after
    /// `w` (intermediate nodes pass, hop ends stop) or `None` if unreachable.
    pub fn path_from(&mut self, graph: &WarehouseGraph, w: WaypointId, heading: f64) -> Option<Vec<PathStep>> {
        let mut out = Vec::new();
        let (mut cur, mut h) = (w, heading);
        for _ in 0..=4 * graph.len() {
            if cur == self.goal {
                return Some(out);
            }
            let (d, nodes) = self.best_hop(graph, cur, h)?;
            let n = nodes.len();
            for (i, v) in nodes.iter().enumerate() {
                out.push(if i + 1 == n { PathStep::stop(*v) } else { PathStep::pass(*v) });
            }
            cur = nodes[n - 1];
            h = d;
        }
        None
    }

    /// Waypoints on the optimal path from `w` (inclusive).
    pub fn path_nodes(&mut self, graph: &WarehouseGraph, w: WaypointId) -> Vec<WaypointId> {
        let mut best_h = None;
        let mut best = f64::INFINITY;
        for d in headings_out(graph, w) {
            let c = self.closed_value(graph, w, d);
            if c < best {
                best = c;
                best_h = Some(d);
            }
        }
        let Some(h) = best_h else { return if w == self.goal { vec![w] } else { Vec::new() } };
        match self.path_from(graph, w, h) {
            Some(steps) => std::iter::once(w).chain(steps.iter().map(|s| s.waypoint)).collect(),
            None => Vec::new(),
        }
    }
}
