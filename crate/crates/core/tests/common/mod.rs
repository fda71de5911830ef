//! Exhaustive reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet, VecDeque};

use kinomapf::kinematics::{turn_angle, DriveProfile, KinematicProfile};
use kinomapf::model::{PathStep, RobotId, TimedPath, WarehouseGraph, WaypointId, WaypointKind};
use kinomapf::reservation::{path_to_reservations, ReservationTable};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Up to `n` nodes on a 3x3 unit lattice with random directed lattice edges.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> WarehouseGraph {
    let mut cells: Vec<(i32, i32)> = (0..9).map(|i| (i % 3, i / 3)).collect();
    cells.shuffle(rng);
    cells.truncate(n);
    cells.sort();
    let mut g = WarehouseGraph::new();
    let t = g.add_tier("h0", 3.0, 3.0);
    let ids: Vec<_> = cells
        .iter()
        .enumerate()
        .map(|(i, (x, y))| g.add_waypoint(format!("n{i}"), t, *x as f64, *y as f64, WaypointKind::Plain))
        .collect();
    for (i, a) in cells.iter().enumerate() {
        for (j, b) in cells.iter().enumerate() {
            let adjacent = (a.0 - b.0).abs() + (a.1 - b.1).abs() == 1;
            if adjacent && rng.gen_bool(0.75) {
                g.add_edge(ids[i], ids[j]);
            }
        }
    }
    g
}

pub fn heading_eq(a: f64, b: f64) -> bool {
    turn_angle(a, b) < 1e-9
}

/// Independent successor rule: wait `wait`, or rotate and drive straight
/// without stopping to any node of the run. Returns (end node, end time,
/// heading, blocks).
pub fn oracle_moves(
    g: &WarehouseGraph,
    p: &KinematicProfile,
    w: WaypointId,
    t: f64,
    heading: f64,
    wait: f64,
) -> Vec<(WaypointId, f64, f64, Vec<(WaypointId, f64, f64)>)> {
    let mut out = vec![(w, t + wait, heading, vec![(w, t, t + wait)])];
    for e in g.out_edges(w) {
        let d = e.heading;
        let rot = turn_angle(heading, d) / p.omega_max;
        let mut nodes = vec![(w, 0.0)];
        let mut cur = w;
        loop {
            let Some(next) = g.out_edges(cur).iter().find(|x| heading_eq(x.heading, d)) else { break };
            if next.to == w || nodes.iter().any(|n| n.0 == next.to) {
                break;
            }
            let dist = nodes.last().unwrap().1 + next.length;
            nodes.push((next.to, dist));
            cur = next.to;
        }
        for k in 1..nodes.len() {
            let profile = DriveProfile::new(nodes[k].1, p).unwrap();
            let start = t + rot;
            let times: Vec<f64> = nodes[..=k].iter().map(|n| start + profile.time_at_position(n.1).unwrap()).collect();
            let mut blocks = vec![(w, t, start)];
            for i in 1..=k {
                blocks.push((nodes[i - 1].0, times[i - 1], times[i]));
                blocks.push((nodes[i].0, times[i - 1], times[i]));
            }
            out.push((nodes[k].0, times[k], d, blocks));
        }
    }
    out
}

/// Earliest arrival at `goal` over every action sequence within `horizon`.
pub fn brute_force_arrival(
    g: &WarehouseGraph,
    p: &KinematicProfile,
    table: &ReservationTable,
    robot: RobotId,
    start: WaypointId,
    goal: WaypointId,
    wait: f64,
    horizon: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([(start, 0.0f64, 0.0f64)]);
    while let Some((w, t, h)) = queue.pop_front() {
        if !seen.insert((w, (t * 1e6).round() as i64, (h * 1e6).round() as i64)) {
            continue;
        }
        if w == goal {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
            continue;
        }
        for (to, end, heading, blocks) in oracle_moves(g, p, w, t, h, wait) {
            if end > horizon + 1e-9 {
                continue;
            }
            let free = blocks.iter().all(|&(x, s, e)| s >= e || table.is_free(x, s, e, Some(robot)));
            if free {
                queue.push_back((to, end, heading));
            }
        }
    }
    best
}

/// A random wandering path of another robot, for background reservations.
pub fn wander(rng: &mut ChaCha8Rng, g: &WarehouseGraph, p: &KinematicProfile, start: WaypointId) -> TimedPath {
    let mut steps = vec![PathStep::stop(start)];
    let mut cur = start;
    for _ in 0..4 {
        if rng.gen_bool(0.3) {
            steps.last_mut().unwrap().wait += 1.0;
            continue;
        }
        let outs = g.out_edges(cur);
        if outs.is_empty() {
            break;
        }
        cur = outs[rng.gen_range(0..outs.len())].to;
        steps.push(PathStep::stop(cur));
    }
    let path = TimedPath::new(RobotId(0), 0.0, 0.0, steps);
    path_to_reservations(&path, g, p).unwrap();
    path
}

/// Shortest standstill-to-standstill time by exhaustive relaxation over
/// (node, heading) states, any initial heading.
pub fn shortest_time(g: &WarehouseGraph, p: &KinematicProfile, from: WaypointId, to: WaypointId) -> f64 {
    let mut best: BTreeMap<(WaypointId, i64), f64> = BTreeMap::new();
    let mut frontier: Vec<(WaypointId, f64, f64)> = g.out_edges(from).iter().map(|e| (from, e.heading, 0.0)).collect();
    frontier.push((from, 0.0, 0.0));
    let mut answer = if from == to { 0.0 } else { f64::INFINITY };
    while let Some((w, h, t)) = frontier.pop() {
        let key = (w, (h * 1e6).round() as i64);
        if best.get(&key).is_some_and(|b| *b <= t) {
            continue;
        }
        best.insert(key, t);
        if w == to {
            answer = answer.min(t);
            continue;
        }
        for (x, end, heading, _) in oracle_moves(g, p, w, t, h, 1.0).into_iter().skip(1) {
            // the first hop may start in any direction for free
            let end = if w == from && t == 0.0 { end - turn_angle(h, heading) / p.omega_max } else { end };
            frontier.push((x, heading, end));
        }
    }
    answer
}
