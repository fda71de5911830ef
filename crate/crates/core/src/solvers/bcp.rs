use std::collections::{BTreeMap, HashMap};

use super::{
    first_collision, profiles_of, reservations_with_final, Budget, PathPlanner, PlanRequest, PlanResult, SolverConfig,
};
use crate::model::{RobotId, TimedPath, WaypointId};
use crate::reservation::{Reservation, ReservationTable};
use crate::search::{h_estimate, spatial_search};

/// Earliest reservation of `candidate` that hits someone else's.
fn first_hit(table: &ReservationTable, candidate: &[Reservation], robot: RobotId) -> Option<WaypointId> {
    candidate
        .iter()
        .filter(|r| !table.is_free(r.waypoint, r.start, r.end, Some(robot)))
        .min_by(|a, b| a.start.total_cmp(&b.start))
        .map(|r| r.waypoint)
}

/// Biased cost pathfinding: robots are routed independently in space only;
/// whenever a route collides with one planned before it, that robot's
/// heuristic is raised on the colliding node and all robots are routed
/// again, until no collision remains or the budget runs out.
pub struct Bcp {
    config: SolverConfig,
}

impl Bcp {
    pub fn new(config: SolverConfig) -> Self {
        Self { config }
    }
}

impl PathPlanner for Bcp {
    fn name(&self) -> &'static str {
        "bcp"
    }

    fn volatile(&self) -> bool {
        true
    }

    fn plan(&mut self, req: &PlanRequest) -> PlanResult {
        let cfg = &self.config;
        let mut budget = Budget::new(cfg);
        let mut penalties: HashMap<(RobotId, WaypointId), f64> = HashMap::new();
        let base = req.table_without_holds();
        let profiles = profiles_of(req);
        let order = req.sorted_agents();
        let mut best: Option<(f64, BTreeMap<RobotId, TimedPath>)> = None;
        let mut out = PlanResult::default();
        loop {
            out.iterations += 1;
            let mut table = base.clone();
            let mut paths = BTreeMap::new();
            let mut collided = false;
            for &i in &order {
                let a = &req.agents[i];
                let blocked = req.blocked_for(a);
                let h = |w: WaypointId| {
                    h_estimate(req.graph, w, a.goal, &a.profile) + penalties.get(&(a.robot, w)).copied().unwrap_or(0.0)
                };
                let (steps, pops) = spatial_search(req.graph, a.start, a.start_heading, a.goal, &blocked, &a.profile, &h);
                budget.spend(pops.max(1));
                let path = if steps.is_empty() {
                    TimedPath::wait_at(a.robot, a.start, a.start_time, a.start_heading, cfg.wait_step)
                } else {
                    TimedPath::new(a.robot, a.start_time, a.start_heading, steps)
                };
                let res = reservations_with_final(&path, req.graph, &a.profile);
                // table checks are the bulk of an iteration's work
                budget.spend(res.len());
                if let Some(w) = first_hit(&table, &res, a.robot) {
                    *penalties.entry((a.robot, w)).or_default() += cfg.biased_cost;
                    collided = true;
                }
                table.add_unchecked(&res);
                paths.insert(a.robot, path);
            }
            if !collided {
                out.paths = paths;
                break;
            }
            let horizon = first_collision(&paths, req.graph, &profiles).unwrap_or(f64::INFINITY);
            if best.as_ref().is_none_or(|b| horizon > b.0) {
                best = Some((horizon, paths));
            }
            if budget.exhausted() {
                let (horizon, paths) = best.take().unwrap();
                out.paths = paths;
                out.collision_horizon = Some(horizon);
                out.timed_out = true;
                break;
            }
        }
        out.conflicts = usize::from(out.collision_horizon.is_some());
        out.expansions = budget.used;
        out
    }
}
