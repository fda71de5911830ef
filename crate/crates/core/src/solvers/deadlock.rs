use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{reservations_with_final, SolverConfig};
use crate::kinematics::KinematicProfile;
use crate::model::{PathStep, RobotId, TimedPath, WarehouseGraph, WaypointId};
use crate::reservation::ReservationTable;
use crate::search::NodeMask;

/// A robot standing on `waypoint` with an unfinished move since `since`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub robot: RobotId,
    pub waypoint: WaypointId,
    pub heading: f64,
    pub since: f64,
    pub profile: KinematicProfile,
}

/// Interim goal handed to a stuck robot, as a ready one-hop path.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadlockMove {
    pub robot: RobotId,
    pub goal: WaypointId,
    pub wait: f64,
    pub path: TimedPath,
}

/// Moves the longest-dwelling robot past `dwell_threshold` to a random
/// neighbour that is neither blocked nor reserved. When that neighbour is the
/// only way out, the robot also waits there for U[0, wait_step] so that two
/// robots facing each other can drift apart.
pub fn resolve_deadlock(
    graph: &WarehouseGraph,
    table: &ReservationTable,
    dwellers: &[Dwell],
    blocked: &NodeMask,
    now: f64,
    config: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Option<DeadlockMove> {
    let mut stuck: Vec<&Dwell> = dwellers.iter().filter(|d| now - d.since > config.dwell_threshold).collect();
    stuck.sort_by(|a, b| a.since.total_cmp(&b.since).then(a.robot.cmp(&b.robot)));
    for d in stuck {
        let hop = |to: WaypointId, wait: f64| {
            TimedPath::new(d.robot, now, d.heading, vec![PathStep::stop(d.waypoint), PathStep::stop_wait(to, wait)])
        };
        let mut options: Vec<WaypointId> = graph
            .out_edges(d.waypoint)
            .iter()
            .map(|e| e.to)
            .filter(|&w| !blocked.contains(w))
            .filter(|&w| {
                reservations_with_final(&hop(w, 0.0), graph, &d.profile)
                    .iter()
                    .all(|r| table.is_free(r.waypoint, r.start, r.end, Some(d.robot)))
            })
            .collect();
        options.sort();
        options.dedup();
        let Some(&goal) = options.choose(rng) else { continue };
        let wait = if options.len() == 1 { rng.gen_range(0.0..=config.wait_step) } else { 0.0 };
        return Some(DeadlockMove { robot: d.robot, goal, wait, path: hop(goal, wait) });
    }
    None
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::super::fixtures::swap_graph;
    use super::*;
    use crate::reservation::Reservation;

    fn dwell(robot: u32, at: WaypointId, since: f64) -> Dwell {
        Dwell { robot: RobotId(robot), waypoint: at, heading: 0.0, since, profile: KinematicProfile::unit(1.0) }
    }

    fn resolve(g: &WarehouseGraph, table: &ReservationTable, d: &[Dwell], now: f64, seed: u64) -> Option<DeadlockMove> {
        let cfg = SolverConfig::deterministic();
        resolve_deadlock(g, table, d, &NodeMask::new(g.len()), now, &cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn fresh_arrival_is_left_alone() {
        let (g, ids) = swap_graph();
        assert_eq!(resolve(&g, &ReservationTable::new(), &[dwell(1, ids[2], 0.0)], 0.0, 1), None);
        assert_eq!(resolve(&g, &ReservationTable::new(), &[dwell(1, ids[2], 0.0)], 30.0, 1), None);
    }

    #[test]
    fn choice_among_free_neighbours_replays_by_seed() {
        let (g, ids) = swap_graph();
        let d = [dwell(1, ids[2], 0.0)];
        let table = ReservationTable::new();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..32 {
            let m = resolve(&g, &table, &d, 31.0, seed).unwrap();
            assert_eq!(m, resolve(&g, &table, &d, 31.0, seed).unwrap());
            assert_eq!(m.wait, 0.0);
            assert_eq!(m.path.waypoints().collect::<Vec<_>>(), vec![ids[2], m.goal]);
            seen.insert(m.goal);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![ids[1], ids[3], ids[4]]);
    }

    #[test]
    fn reserved_and_blocked_neighbours_are_skipped() {
        let (g, ids) = swap_graph();
        let mut table = ReservationTable::new();
        table.add(&[Reservation::final_at(ids[1], 0.0, RobotId(7))]).unwrap();
        let mut blocked = NodeMask::new(g.len());
        blocked.insert(ids[3]);
        let cfg = SolverConfig::deterministic();
        for seed in 0..8 {
            let m = resolve_deadlock(&g, &table, &[dwell(1, ids[2], 0.0)], &blocked, 40.0, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(m.goal, ids[4]);
        }
    }

    #[test]
    fn dead_end_gets_back_edge_and_random_wait() {
        let (g, ids) = swap_graph();
        let m = resolve(&g, &ReservationTable::new(), &[dwell(1, ids[4], 0.0)], 31.0, 5).unwrap();
        assert_eq!(m.goal, ids[2]);
        assert!((0.0..=2.0).contains(&m.wait));
        assert!(m.wait > 0.0);
        assert_eq!(m.path.steps[1].wait, m.wait);
    }

    #[test]
    fn longest_dwell_goes_first_and_boxed_in_robots_are_passed_over() {
        let (g, ids) = swap_graph();
        let mut table = ReservationTable::new();
        table.add(&[Reservation::final_at(ids[2], 0.0, RobotId(9))]).unwrap();
        // r1 on the spur is boxed in by r9, r2 has dwelt less but can move
        let d = [dwell(2, ids[0], 10.0), dwell(1, ids[4], 0.0)];
        let m = resolve(&g, &table, &d, 50.0, 3).unwrap();
        assert_eq!((m.robot, m.goal), (RobotId(2), ids[1]));
    }
}
