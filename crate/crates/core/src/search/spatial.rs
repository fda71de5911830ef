use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use ordered_float::OrderedFloat;

use super::actions::{headings_out, straight_run, Action, ActionKind, NodeMask};
use super::heading_key;
use super::heuristic::{arc_cost_floor, record_arc_cost};
use crate::kinematics::{turn_angle, DriveProfile, KinematicProfile};
use crate::model::{PathStep, WarehouseGraph, WaypointId};

struct Entry {
    w: WaypointId,
    heading: f64,
    g: f64,
    parent: Option<usize>,
    kind: ActionKind,
    nodes: Vec<WaypointId>,
}

/// Time-optimal route ignoring other robots, guided by an arbitrary per-node
/// heuristic `h` (which may carry penalties and need not be consistent, so
/// states are reopened when a cheaper way in is found). Returns the steps from
/// `start` to `goal`, or an empty list if the goal cannot be reached.
pub fn a_star_spatial(
    graph: &WarehouseGraph,
    start: WaypointId,
    start_heading: f64,
    goal: WaypointId,
    blocked: &NodeMask,
    profile: &KinematicProfile,
    h: &dyn Fn(WaypointId) -> f64,
) -> Vec<PathStep> {
    spatial_search(graph, start, start_heading, goal, blocked, profile, h).0
}

/// `a_star_spatial` that also reports the number of expanded states.
pub(crate) fn spatial_search(
    graph: &WarehouseGraph,
    start: WaypointId,
    start_heading: f64,
    goal: WaypointId,
    blocked: &NodeMask,
    profile: &KinematicProfile,
    h: &dyn Fn(WaypointId) -> f64,
) -> (Vec<PathStep>, usize) {
    if start == goal {
        return (vec![PathStep::stop(start)], 0);
    }
    let mut arena = vec![Entry { w: start, heading: start_heading, g: 0.0, parent: None, kind: ActionKind::Wait, nodes: vec![] }];
    let mut best: HashMap<(WaypointId, i64), f64> = HashMap::from([((start, heading_key(start_heading)), 0.0)]);
    let mut open = BinaryHeap::from([Reverse((OrderedFloat(h(start)), OrderedFloat(0.0), 0u64, 0usize))]);
    let mut seq = 0u64;
    let floor = arc_cost_floor(graph, profile, 0.0);
    let limit = 50 * graph.len().max(1) * 8;
    let mut pops = 0;
    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        let (w, heading, g) = (arena[idx].w, arena[idx].heading, arena[idx].g);
        if best.get(&(w, heading_key(heading))).is_some_and(|b| *b < g) {
            continue;
        }
        if w == goal {
            let mut chain = Vec::new();
            let mut i = idx;
            while let Some(p) = arena[i].parent {
                chain.push(i);
                i = p;
            }
            let mut steps = vec![PathStep::stop(start)];
            for i in chain.into_iter().rev() {
                let k = arena[i].nodes.len();
                for (j, v) in arena[i].nodes.iter().enumerate() {
                    steps.push(if j + 1 == k { PathStep::stop(*v) } else { PathStep::pass(*v) });
                }
                debug_assert!(arena[i].kind != ActionKind::Wait);
            }
            return (steps, pops);
        }
        pops += 1;
        if pops > limit {
            break;
        }
        // same transitions as the space-time search, without their blocks
        let mut relax = |to: WaypointId, hd: f64, ng: f64, kind: ActionKind, nodes: &dyn Fn() -> Vec<WaypointId>| {
            record_arc_cost(ng - g, floor);
            let key = (to, heading_key(hd));
            if best.get(&key).is_some_and(|b| *b <= ng + 1e-12) {
                return;
            }
            best.insert(key, ng);
            arena.push(Entry { w: to, heading: hd, g: ng, parent: Some(idx), kind, nodes: nodes() });
            seq += 1;
            open.push(Reverse((OrderedFloat(ng + h(to)), OrderedFloat(-ng), seq, arena.len() - 1)));
        };
        for d in headings_out(graph, w) {
            let drive_start = g + profile.rotation_time(turn_angle(heading, d));
            let run = straight_run(graph, w, d, blocked);
            for k in 0..run.len() {
                let ng = drive_start + DriveProfile::new(run[k].1, profile).expect("valid profile").total_time();
                relax(run[k].0, d, ng, ActionKind::Drive, &|| run[..=k].iter().map(|r| r.0).collect());
            }
        }
        for (p, _) in graph.elevator_links(w) {
            if blocked.contains(p) {
                continue;
            }
            if let Some(a) = Action::elevator(graph, w, p, g, heading) {
                relax(p, a.heading, a.end, ActionKind::Elevator, &|| vec![p]);
            }
        }
    }
    (Vec::new(), pops)
}
