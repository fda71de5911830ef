use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use ordered_float::OrderedFloat;

use super::actions::{candidate_actions, Action, ActionKind, NodeMask};
use super::heuristic::{arc_cost_floor, record_arc_cost};
use super::heading_key;
use super::rra::RraContext;
use crate::kinematics::KinematicProfile;
use crate::model::{PathStep, RobotId, TimedPath, WarehouseGraph, WaypointId};
use crate::reservation::ReservationTable;

pub struct SpaceTimeQuery<'a> {
    pub robot: RobotId,
    pub start: WaypointId,
    pub start_time: f64,
    pub start_heading: f64,
    pub goal: WaypointId,
    /// Reservations are honoured only before this instant.
    pub window_end: f64,
    pub wait_step: f64,
    pub profile: &'a KinematicProfile,
    pub blocked: &'a NodeMask,
    /// The goal only counts once it can be held indefinitely.
    pub final_required: bool,
    pub max_expansions: usize,
    pub max_run: usize,
    /// Extra cost added to the heuristic of a waypoint.
    pub penalty: Option<&'a dyn Fn(WaypointId) -> f64>,
}

impl<'a> SpaceTimeQuery<'a> {
    pub fn new(
        robot: RobotId,
        start: WaypointId,
        start_time: f64,
        start_heading: f64,
        goal: WaypointId,
        profile: &'a KinematicProfile,
        blocked: &'a NodeMask,
    ) -> Self {
        Self {
            robot,
            start,
            start_time,
            start_heading,
            goal,
            window_end: f64::INFINITY,
            wait_step: 2.0,
            profile,
            blocked,
            final_required: false,
            max_expansions: 20_000,
            max_run: 8,
            penalty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeResult {
    pub path: TimedPath,
    /// True when the goal was reached inside the window (no heuristic tail).
    pub complete: bool,
    /// Estimated arrival time at the goal (exact when `complete`).
    pub arrival: f64,
    pub expansions: usize,
}

struct SNode {
    w: WaypointId,
    t: f64,
    heading: f64,
    parent: Option<usize>,
    kind: ActionKind,
    nodes: Vec<WaypointId>,
}

fn action_is_free(table: &ReservationTable, a: &Action, robot: RobotId, window_end: f64) -> bool {
    a.blocks.iter().all(|&(w, s, e)| {
        let e = e.min(window_end);
        s >= e || table.is_free(w, s, e, Some(robot))
    })
}

fn rebuild(arena: &[SNode], mut idx: usize, q: &SpaceTimeQuery) -> Vec<PathStep> {
    let mut chain = Vec::new();
    while let Some(p) = arena[idx].parent {
        chain.push(idx);
        idx = p;
    }
    chain.reverse();
    let mut steps = vec![PathStep::stop(q.start)];
    let mut t = q.start_time;
    for i in chain {
        let n = &arena[i];
        match n.kind {
            ActionKind::Wait => steps.last_mut().unwrap().wait += n.t - t,
            ActionKind::Drive | ActionKind::Elevator => {
                let k = n.nodes.len();
                for (j, v) in n.nodes.iter().enumerate() {
                    steps.push(if j + 1 == k { PathStep::stop(*v) } else { PathStep::pass(*v) });
                }
            }
        }
        t = n.t;
    }
    steps
}

/// Windowed space-time A* for one robot. States are standstills at a
/// waypoint; transitions are waits of `wait_step`, a rotation plus one
/// continuous straight drive, or an elevator ride. Reservations of other
/// robots are respected until `window_end`; a state past the window is
/// completed with the reverse search's optimal tail. Returns `None` when no
/// conflict-free prefix exists within the expansion budget.
pub fn a_star_spacetime(
    graph: &WarehouseGraph,
    table: &ReservationTable,
    rra: &mut RraContext,
    q: &SpaceTimeQuery,
) -> Option<SpaceTimeResult> {
    spacetime_search(graph, table, rra, q).0
}

/// `a_star_spacetime` that also reports the expansions spent on a failure.
pub(crate) fn spacetime_search(
    graph: &WarehouseGraph,
    table: &ReservationTable,
    rra: &mut RraContext,
    q: &SpaceTimeQuery,
) -> (Option<SpaceTimeResult>, usize) {
    let floor = arc_cost_floor(graph, q.profile, q.wait_step);
    let penalty = |w: WaypointId| q.penalty.map_or(0.0, |p| p(w));
    let mut arena: Vec<SNode> = Vec::new();
    let mut open = BinaryHeap::new();
    let mut closed: HashSet<(WaypointId, i64, i64)> = HashSet::new();
    let mut seq = 0u64;

    let h0 = rra.state_value(graph, q.start, q.start_heading);
    if !h0.is_finite() {
        return (None, 0);
    }
    arena.push(SNode {
        w: q.start,
        t: q.start_time,
        heading: q.start_heading,
        parent: None,
        kind: ActionKind::Wait,
        nodes: Vec::new(),
    });
    let push = |open: &mut BinaryHeap<_>, seq: &mut u64, f: f64, g: f64, w: WaypointId, idx: usize| {
        *seq += 1;
        open.push(Reverse((OrderedFloat(f), OrderedFloat(-g), w.0, *seq, idx)));
    };
    push(&mut open, &mut seq, h0 + penalty(q.start), 0.0, q.start, 0);

    let mut expansions = 0;
    while let Some(Reverse((_, _, _, _, idx))) = open.pop() {
        let (w, t, heading) = (arena[idx].w, arena[idx].t, arena[idx].heading);
        let key = (w, (t * 1e6).round() as i64, heading_key(heading));
        if !closed.insert(key) {
            continue;
        }
        let past_window = t >= q.window_end;
        if w == q.goal
            && (past_window || !q.final_required || table.is_free(w, t, f64::INFINITY, Some(q.robot)))
        {
            let steps = rebuild(&arena, idx, q);
            let res = SpaceTimeResult {
                path: TimedPath::new(q.robot, q.start_time, q.start_heading, steps),
                complete: !past_window,
                arrival: t,
                expansions,
            };
            return (Some(res), expansions);
        }
        if past_window {
            if let Some(tail) = rra.path_from(graph, w, heading) {
                let mut steps = rebuild(&arena, idx, q);
                steps.extend(tail);
                let arrival = t + rra.state_value(graph, w, heading);
                let res = SpaceTimeResult {
                    path: TimedPath::new(q.robot, q.start_time, q.start_heading, steps),
                    complete: false,
                    arrival,
                    expansions,
                };
                return (Some(res), expansions);
            }
            continue;
        }
        expansions += 1;
        if expansions > q.max_expansions {
            return (None, expansions);
        }
        let actions =
            candidate_actions(graph, q.profile, w, t, heading, q.blocked, q.wait_step, q.max_run, Some(q.goal));
        for a in actions {
            record_arc_cost(a.cost(), floor);
            let to = a.to();
            let nkey = (to, (a.end * 1e6).round() as i64, heading_key(a.heading));
            if closed.contains(&nkey) || !action_is_free(table, &a, q.robot, q.window_end) {
                continue;
            }
            let h = rra.state_value(graph, to, a.heading);
            if !h.is_finite() {
                continue;
            }
            let g = a.end - q.start_time;
            arena.push(SNode { w: to, t: a.end, heading: a.heading, parent: Some(idx), kind: a.kind, nodes: a.nodes });
            push(&mut open, &mut seq, g + h + penalty(to), g, to, arena.len() - 1);
        }
    }
    (None, expansions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WaypointKind;
    use crate::reservation::{path_to_reservations, Reservation};

    fn corridor(n: usize) -> (WarehouseGraph, Vec<WaypointId>) {
        let mut g = WarehouseGraph::new();
        let t = g.add_tier("h0", n as f64 + 1.0, 2.0);
        let ids: Vec<_> =
            (0..n).map(|i| g.add_waypoint(format!("w{i}"), t, i as f64, 0.0, WaypointKind::Plain)).collect();
        for p in ids.windows(2) {
            g.add_bidirectional(p[0], p[1]);
        }
        (g, ids)
    }

    #[test]
    fn empty_table_follows_reverse_search() {
        let (g, ids) = corridor(5);
        let p = KinematicProfile::unit(1.0);
        let mask = NodeMask::new(g.len());
        let mut rra = RraContext::new(&g, ids[4], ids[0], mask.clone(), p);
        let q = SpaceTimeQuery::new(RobotId(0), ids[0], 0.0, 0.0, ids[4], &p, &mask);
        let res = a_star_spacetime(&g, &ReservationTable::new(), &mut rra, &q).unwrap();
        assert!(res.complete);
        assert_eq!(res.arrival, rra.cost_to_go(&g, ids[0]));
        assert_eq!(res.arrival, 5.0);
        let mut want = vec![PathStep::stop(ids[0])];
        want.extend(rra.path_from(&g, ids[0], 0.0).unwrap());
        assert_eq!(res.path.steps, want);
        assert!(res.path.steps.iter().all(|s| s.wait == 0.0));
    }

    #[test]
    fn waits_out_a_blocked_neighbour() {
        let (g, ids) = corridor(2);
        let p = KinematicProfile::unit(1.0);
        let mask = NodeMask::new(g.len());
        let mut table = ReservationTable::new();
        table.add(&[Reservation::new(ids[1], 0.0, 2.0, RobotId(9))]).unwrap();
        let mut rra = RraContext::new(&g, ids[1], ids[0], mask.clone(), p);
        let mut q = SpaceTimeQuery::new(RobotId(0), ids[0], 0.0, 0.0, ids[1], &p, &mask);
        q.wait_step = 2.0;
        let res = a_star_spacetime(&g, &table, &mut rra, &q).unwrap();
        assert_eq!(res.path.steps, vec![PathStep::stop_wait(ids[0], 2.0), PathStep::stop(ids[1])]);
        assert_eq!(res.arrival, 4.0);
        let res_table = path_to_reservations(&res.path, &g, &p).unwrap();
        assert!(table.first_conflict(&res_table).is_none());
    }

    #[test]
    fn window_limits_reservation_checks() {
        let (g, ids) = corridor(4);
        let p = KinematicProfile::unit(1.0);
        let mask = NodeMask::new(g.len());
        let mut table = ReservationTable::new();
        table.add_final(RobotId(9), ids[3], 0.5).unwrap();
        let mut rra = RraContext::new(&g, ids[3], ids[0], mask.clone(), p);
        let mut q = SpaceTimeQuery::new(RobotId(0), ids[0], 0.0, 0.0, ids[3], &p, &mask);
        q.window_end = 1.0;
        // beyond the window the blocked goal is ignored and the tail appended
        let res = a_star_spacetime(&g, &table, &mut rra, &q).unwrap();
        assert!(!res.complete);
        assert_eq!(res.path.last(), ids[3]);
        q.window_end = f64::INFINITY;
        q.max_expansions = 200;
        assert!(a_star_spacetime(&g, &table, &mut rra, &q).is_none());
    }

    #[test]
    fn final_requirement_delays_goal() {
        let (g, ids) = corridor(3);
        let p = KinematicProfile::unit(1.0);
        let mask = NodeMask::new(g.len());
        let mut table = ReservationTable::new();
        table.add(&[Reservation::new(ids[2], 10.0, 11.0, RobotId(9))]).unwrap();
        let mut rra = RraContext::new(&g, ids[2], ids[0], mask.clone(), p);
        let mut q = SpaceTimeQuery::new(RobotId(0), ids[0], 0.0, 0.0, ids[2], &p, &mask);
        q.wait_step = 1.0;
        let res = a_star_spacetime(&g, &table, &mut rra, &q).unwrap();
        assert_eq!(res.arrival, 3.0);
        q.final_required = true;
        let res = a_star_spacetime(&g, &table, &mut rra, &q).unwrap();
        assert!(res.arrival >= 11.0);
    }
}
