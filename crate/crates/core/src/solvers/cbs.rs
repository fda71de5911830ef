use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use ordered_float::OrderedFloat;

use super::whca::plan_one;
use super::{
    overlaps, reservations_with_final, Budget, CbsStrategy, PathPlanner, PlanRequest, PlanResult, RraCache, SolverConfig,
};
use crate::model::{RobotId, TimedPath, WaypointId};
use crate::reservation::{PathTiming, Reservation, ReservationTable};

/// Owner of constraint reservations in the low-level tables.
const CONSTRAINT_OWNER: RobotId = RobotId(u32::MAX);

/// `robot` may not occupy `waypoint` during `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub robot: RobotId,
    pub waypoint: WaypointId,
    pub start: f64,
    pub end: f64,
}

impl Constraint {
    /// The interval spanning both overlapping reservations, from the earlier
    /// start to the later end, at most `cap` long.
    pub fn from_overlap(robot: RobotId, a: &Reservation, b: &Reservation, cap: f64) -> Self {
        let start = a.start.min(b.start);
        let end = a.end.max(b.end).min(start + cap);
        Self { robot, waypoint: a.waypoint, start, end }
    }
}

struct CtNode {
    parent: Option<usize>,
    constraint: Option<Constraint>,
    /// The replanned agent (index into the request) and its new path.
    replanned: Option<(usize, TimedPath)>,
    cost: f64,
    depth: usize,
    /// Time of the first collision in this node's solution.
    collision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbsOutcome {
    pub paths: BTreeMap<RobotId, TimedPath>,
    /// Constraint-tree nodes generated, the root included.
    pub generated: usize,
    pub expanded: usize,
    pub complete: bool,
    /// First remaining collision of an incomplete result.
    pub horizon: Option<f64>,
}

fn path_cost(path: &TimedPath, req: &PlanRequest, agent: usize) -> f64 {
    PathTiming::compute_unchecked(path, req.graph, &req.agents[agent].profile).end_time() - path.start_time
}

/// Conflict-based search: the root routes every robot alone; a node whose
/// solution has an overlap inside the window branches into two children,
/// each forbidding the merged overlap interval to one of the two robots and
/// replanning only that robot.
pub struct Cbs {
    config: SolverConfig,
    cache: RraCache,
}

impl Cbs {
    pub fn new(config: SolverConfig) -> Self {
        Self { config, cache: RraCache::default() }
    }

    fn solution(&self, arena: &[CtNode], root: &[TimedPath], mut idx: usize) -> (Vec<TimedPath>, Vec<Constraint>) {
        let mut paths: Vec<Option<TimedPath>> = vec![None; root.len()];
        let mut constraints = Vec::new();
        loop {
            let n = &arena[idx];
            if let Some((a, p)) = &n.replanned {
                if paths[*a].is_none() {
                    paths[*a] = Some(p.clone());
                }
            }
            constraints.extend(n.constraint);
            match n.parent {
                Some(p) => idx = p,
                None => break,
            }
        }
        let paths = paths.into_iter().zip(root).map(|(p, r)| p.unwrap_or_else(|| r.clone())).collect();
        (paths, constraints)
    }

    fn replan(
        &mut self,
        req: &PlanRequest,
        base: &ReservationTable,
        agent: usize,
        constraints: &[Constraint],
        budget: &mut Budget,
    ) -> Option<TimedPath> {
        let a = &req.agents[agent];
        let mut table = base.clone();
        let own: Vec<Reservation> = constraints
            .iter()
            .filter(|c| c.robot == a.robot)
            .map(|c| Reservation::new(c.waypoint, c.start, c.end, CONSTRAINT_OWNER))
            .collect();
        table.add_unchecked(&own);
        let blocked = req.blocked_for(a);
        let rra = self.cache.get(req.graph, a, &blocked);
        plan_one(req.graph, &table, rra, a, &blocked, &self.config, self.config.window, 0.0, None, budget)
    }

    /// Earliest overlap of `paths` starting before `limit`.
    fn first_conflict(req: &PlanRequest, paths: &[TimedPath], limit: f64) -> Option<(Reservation, Reservation)> {
        let all: Vec<Reservation> = paths
            .iter()
            .zip(&req.agents)
            .flat_map(|(p, a)| reservations_with_final(p, req.graph, &a.profile))
            .collect();
        overlaps(&all).into_iter().find(|(a, b)| a.start.max(b.start) < limit)
    }

    pub fn search(&mut self, req: &PlanRequest) -> CbsOutcome {
        let cfg = self.config.clone();
        let mut budget = Budget::new(&cfg);
        let base = req.table_without_holds();
        let limit = req.now + cfg.window;
        let root: Vec<TimedPath> = (0..req.agents.len())
            .map(|i| {
                self.replan(req, &base, i, &[], &mut budget).unwrap_or_else(|| {
                    let a = &req.agents[i];
                    TimedPath::wait_at(a.robot, a.start, a.start_time, a.start_heading, cfg.wait_step)
                })
            })
            .collect();
        let root_cost = root.iter().enumerate().map(|(i, p)| path_cost(p, req, i)).sum();
        let collision = |paths: &[TimedPath]| {
            Self::first_conflict(req, paths, limit).map_or(f64::INFINITY, |(a, b)| a.start.max(b.start))
        };
        let mut arena = vec![CtNode {
            parent: None,
            constraint: None,
            replanned: None,
            cost: root_cost,
            depth: 0,
            collision: collision(&root),
        }];
        let key = |n: &CtNode, seq: u64| -> (OrderedFloat<f64>, i64) {
            match cfg.cbs_strategy {
                CbsStrategy::BestFirst => (OrderedFloat(n.cost), seq as i64),
                CbsStrategy::BreadthFirst => (OrderedFloat(n.depth as f64), seq as i64),
                CbsStrategy::DepthFirst => (OrderedFloat(-(n.depth as f64)), -(seq as i64)),
            }
        };
        let mut open = BinaryHeap::from([Reverse((key(&arena[0], 0), 0usize))]);
        let mut seq = 0u64;
        let mut expanded = 0;
        let mut found = None;
        while let Some(Reverse((_, idx))) = open.pop() {
            let (paths, constraints) = self.solution(&arena, &root, idx);
            let Some((ra, rb)) = Self::first_conflict(req, &paths, limit) else {
                found = Some(idx);
                break;
            };
            if budget.exhausted() {
                break;
            }
            expanded += 1;
            for res in [ra, rb] {
                let Some(agent) = req.agents.iter().position(|a| a.robot == res.owner) else { continue };
                let c = Constraint::from_overlap(res.owner, &ra, &rb, cfg.window);
                let mut cs = constraints.clone();
                cs.push(c);
                let Some(path) = self.replan(req, &base, agent, &cs, &mut budget) else { continue };
                let cost = arena[idx].cost - path_cost(&paths[agent], req, agent) + path_cost(&path, req, agent);
                let mut child_paths = paths.clone();
                child_paths[agent] = path.clone();
                let node = CtNode {
                    parent: Some(idx),
                    constraint: Some(c),
                    replanned: Some((agent, path)),
                    cost,
                    depth: arena[idx].depth + 1,
                    collision: collision(&child_paths),
                };
                seq += 1;
                open.push(Reverse((key(&node, seq), arena.len())));
                arena.push(node);
            }
        }
        let complete = found.is_some();
        let pick = found.unwrap_or_else(|| {
            (0..arena.len())
                .max_by(|&a, &b| arena[a].collision.total_cmp(&arena[b].collision).then(b.cmp(&a)))
                .unwrap()
        });
        let (paths, _) = self.solution(&arena, &root, pick);
        let horizon = (!complete).then_some(arena[pick].collision);
        CbsOutcome {
            paths: paths.into_iter().map(|p| (p.robot, p)).collect(),
            generated: arena.len(),
            expanded,
            complete,
            horizon,
        }
    }
}

impl PathPlanner for Cbs {
    fn name(&self) -> &'static str {
        "cbs"
    }

    fn volatile(&self) -> bool {
        true
    }

    fn plan(&mut self, req: &PlanRequest) -> PlanResult {
        let out = self.search(req);
        PlanResult {
            paths: out.paths,
            expansions: out.expanded,
            iterations: out.generated,
            timed_out: !out.complete,
            conflicts: usize::from(!out.complete),
            collision_horizon: out.horizon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{agent, assert_conflict_free, swap_graph, swap_request};
    use super::*;
    use crate::kinematics::KinematicProfile;

    #[test]
    fn merged_interval_spans_both_reservations() {
        let w = WaypointId(3);
        let a = Reservation::new(w, 1.0, 3.0, RobotId(1));
        let b = Reservation::new(w, 2.0, 5.0, RobotId(2));
        let c = Constraint::from_overlap(RobotId(1), &a, &b, 20.0);
        assert_eq!((c.start, c.end, c.waypoint), (1.0, 5.0, w));
        let capped = Constraint::from_overlap(RobotId(2), &a, &Reservation::final_at(w, 2.0, RobotId(2)), 10.0);
        assert_eq!((capped.start, capped.end), (1.0, 11.0));
    }

    #[test]
    fn conflict_free_root_is_returned_at_once() {
        let (g, ids) = swap_graph();
        let p = KinematicProfile::warehouse_default();
        let mut req = PlanRequest::new(&g, 0.0);
        req.add_agent(agent(1, ids[0], ids[1], 0.0, p));
        req.add_agent(agent(2, ids[3], ids[3], 0.0, p));
        let out = Cbs::new(SolverConfig::deterministic()).search(&req);
        assert!(out.complete);
        assert_eq!((out.generated, out.expanded), (1, 0));
    }

    /// Plus-shaped crossing: w-c-e east and s-c-n north, unit arcs.
    fn crossing() -> (crate::model::WarehouseGraph, [WaypointId; 5]) {
        let mut g = crate::model::WarehouseGraph::new();
        let t = g.add_tier("h0", 3.0, 3.0);
        let mut add = |n: &str, x: f64, y: f64| g.add_waypoint(n, t, x, y, crate::model::WaypointKind::Plain);
        let (w, c, e, s, n) = (add("w", 0.0, 1.0), add("c", 1.0, 1.0), add("e", 2.0, 1.0), add("s", 1.0, 0.0), add("n", 1.0, 2.0));
        for (a, b) in [(w, c), (c, e), (s, c), (c, n)] {
            g.add_edge(a, b);
        }
        (g, [w, c, e, s, n])
    }

    #[test]
    fn crossing_resolved_by_every_strategy() {
        let (g, [w, _, e, s, n]) = crossing();
        let p = KinematicProfile::unit(1.0);
        let mut req = PlanRequest::new(&g, 0.0);
        req.add_agent(agent(1, w, e, 0.0, p));
        req.add_agent(agent(2, s, n, std::f64::consts::FRAC_PI_2, p));
        for strategy in [CbsStrategy::BestFirst, CbsStrategy::BreadthFirst, CbsStrategy::DepthFirst] {
            let cfg = SolverConfig { cbs_strategy: strategy, ..SolverConfig::deterministic() };
            let mut cbs = Cbs::new(cfg);
            let out = cbs.search(&req);
            assert!(out.complete, "{strategy:?}");
            assert!(out.generated >= 2 && out.generated <= 8, "{strategy:?}: {} nodes", out.generated);
            assert_conflict_free(&req, &cbs.plan(&req));
        }
    }

    #[test]
    fn standing_robot_is_never_pushed_off_its_node() {
        // every merged interval contains the instant a robot stands on its
        // start, so in the swap only the robot already clear of the contested
        // node can be constrained; waits grow until the remaining overlap
        // falls beyond the window
        let (g, ids) = swap_graph();
        let p = KinematicProfile::constant_speed(1.0);
        let req = swap_request(&g, &ids, p);
        let cfg = SolverConfig { wait_step: 1.0, window: 10.0, ..SolverConfig::deterministic() };
        let out = Cbs::new(cfg).search(&req);
        assert!(out.complete);
        assert!(out.generated > 8);
        let all: Vec<_> = out
            .paths
            .values()
            .flat_map(|path| reservations_with_final(path, &g, &p))
            .map(|r| Reservation { end: r.end.min(10.0), ..r })
            .collect();
        assert!(overlaps(&all).is_empty());
        assert!(out.paths.values().all(|path| path.waypoints().all(|w| w != ids[4])));
        assert!(out.paths.values().all(|path| path.steps[0].wait >= 9.0));
    }

    #[test]
    fn budget_exhaustion_reports_the_collision_horizon() {
        let (g, ids) = swap_graph();
        let req = swap_request(&g, &ids, KinematicProfile::constant_speed(1.0));
        let cfg = SolverConfig { wait_step: 1.0, window: 10.0, expansion_budget: 5, ..SolverConfig::deterministic() };
        let res = Cbs::new(cfg).plan(&req);
        assert!(res.timed_out);
        let h = res.collision_horizon.unwrap();
        let all: Vec<_> = res
            .paths
            .values()
            .flat_map(|p| reservations_with_final(p, &g, &KinematicProfile::constant_speed(1.0)))
            .map(|r| Reservation { end: r.end.min(h), ..r })
            .collect();
        assert!(overlaps(&all).is_empty());
    }
}
