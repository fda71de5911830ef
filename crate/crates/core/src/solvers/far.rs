use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{reservations_with_final, Budget, PathPlanner, PlanAgent, PlanRequest, PlanResult, RraCache, SolverConfig};
use crate::model::{PathStep, RobotId, TimedPath, WarehouseGraph, WaypointId};
use crate::reservation::ReservationTable;
use crate::search::RraContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evasion {
    /// Block the node of the robot in the way and search again.
    Reroute,
    /// Drive one free arc and wait a random time there.
    Step,
}

/// Which robot waits for which, and since when.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaitRelation {
    waits_for: BTreeMap<RobotId, Option<RobotId>>,
    since: BTreeMap<RobotId, f64>,
}

impl WaitRelation {
    pub fn record(&mut self, robot: RobotId, blocker: Option<RobotId>, t: f64) {
        self.waits_for.insert(robot, blocker);
        self.since.entry(robot).or_insert(t);
    }

    pub fn clear(&mut self, robot: RobotId) {
        self.waits_for.remove(&robot);
        self.since.remove(&robot);
    }

    pub fn is_waiting(&self, robot: RobotId) -> bool {
        self.waits_for.contains_key(&robot)
    }

    pub fn waits_for(&self, robot: RobotId) -> Option<RobotId> {
        self.waits_for.get(&robot).copied().flatten()
    }

    pub fn waiting_since(&self, robot: RobotId) -> Option<f64> {
        self.since.get(&robot).copied()
    }

    /// True when following the relation from `robot` runs into a cycle.
    pub fn on_cycle(&self, robot: RobotId) -> bool {
        let mut seen = vec![robot];
        let mut cur = robot;
        while let Some(next) = self.waits_for(cur) {
            if seen.contains(&next) {
                return true;
            }
            seen.push(next);
            cur = next;
        }
        false
    }
}

/// Why no hop could be submitted: the robot standing in the way and its node.
type Blockage = Option<(RobotId, WaypointId)>;

/// The first hop of the reverse-search route, shortened until its
/// reservations and the final reservation at its end are free.
fn first_hop(
    graph: &WarehouseGraph,
    table: &ReservationTable,
    rra: &mut RraContext,
    agent: &PlanAgent,
) -> Result<TimedPath, Blockage> {
    let Some((_, nodes)) = rra.best_hop(graph, agent.start, agent.start_heading) else { return Err(None) };
    let mut blockage = None;
    for k in (1..=nodes.len()).rev() {
        let mut steps = vec![PathStep::stop(agent.start)];
        steps.extend(nodes[..k - 1].iter().map(|w| PathStep::pass(*w)));
        steps.push(PathStep::stop(nodes[k - 1]));
        let path = TimedPath::new(agent.robot, agent.start_time, agent.start_heading, steps);
        let res = reservations_with_final(&path, graph, &agent.profile);
        let hit = res.iter().find_map(|r| table.conflicts(r.waypoint, r.start, r.end, Some(agent.robot)).into_iter().next());
        match hit {
            None => return Ok(path),
            Some(b) => blockage = Some((b.owner, b.waypoint)),
        }
    }
    Err(blockage)
}

fn is_free(table: &ReservationTable, path: &TimedPath, graph: &WarehouseGraph, agent: &PlanAgent) -> bool {
    reservations_with_final(path, graph, &agent.profile)
        .iter()
        .all(|r| table.is_free(r.waypoint, r.start, r.end, Some(agent.robot)))
}

/// Flow-annotated routing: each robot gets only the next hop of its
/// reverse-search route. Robots that cannot move wait and enter the
/// waits-for relation; a cycle in it, or waiting longer than one wait step,
/// triggers the configured evasion.
pub struct Far {
    config: SolverConfig,
    evasion: Evasion,
    cache: RraCache,
    relation: WaitRelation,
    rng: ChaCha8Rng,
}

impl Far {
    pub fn new(config: SolverConfig, evasion: Evasion) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self { config, evasion, cache: RraCache::default(), relation: WaitRelation::default(), rng }
    }

    pub fn relation(&self) -> &WaitRelation {
        &self.relation
    }

    fn reroute(&mut self, req: &PlanRequest, table: &ReservationTable, agent: &PlanAgent, mut blockage: Blockage) -> Option<TimedPath> {
        let mut blocked = req.blocked_for(agent);
        for _ in 0..self.config.reroute_limit {
            let (_, w) = blockage?;
            if w == agent.goal || w == agent.start || blocked.contains(w) {
                return None;
            }
            blocked.insert(w);
            let mut rra = RraContext::new(req.graph, agent.goal, agent.start, blocked.clone(), agent.profile);
            match first_hop(req.graph, table, &mut rra, agent) {
                Ok(path) => return Some(path),
                Err(b) => blockage = b,
            }
        }
        None
    }

    fn step_aside(&mut self, req: &PlanRequest, table: &ReservationTable, agent: &PlanAgent) -> Option<TimedPath> {
        let blocked = req.blocked_for(agent);
        let mut options: Vec<WaypointId> = req
            .graph
            .out_edges(agent.start)
            .iter()
            .map(|e| e.to)
            .filter(|w| !blocked.contains(*w))
            .filter(|w| {
                let p = TimedPath::new(agent.robot, agent.start_time, agent.start_heading, vec![PathStep::stop(agent.start), PathStep::stop(*w)]);
                is_free(table, &p, req.graph, agent)
            })
            .collect();
        options.sort();
        let to = *options.choose(&mut self.rng)?;
        let pause = self.rng.gen_range(0.0..=self.config.wait_step);
        let path = TimedPath::new(
            agent.robot,
            agent.start_time,
            agent.start_heading,
            vec![PathStep::stop(agent.start), PathStep::stop_wait(to, pause)],
        );
        is_free(table, &path, req.graph, agent).then_some(path)
    }
}

impl PathPlanner for Far {
    fn name(&self) -> &'static str {
        match self.evasion {
            Evasion::Reroute => "far-r",
            Evasion::Step => "far-e",
        }
    }

    fn volatile(&self) -> bool {
        false
    }

    fn plan(&mut self, req: &PlanRequest) -> PlanResult {
        let mut budget = Budget::new(&self.config);
        let mut table = req.table.clone();
        let mut out = PlanResult::default();
        for i in req.sorted_agents() {
            let a = &req.agents[i];
            table.remove_final(a.robot);
            let blocked = req.blocked_for(a);
            let rra = self.cache.get(req.graph, a, &blocked);
            let before = rra.expansions();
            let hop = first_hop(req.graph, &table, rra, a);
            budget.spend(rra.expansions().saturating_sub(before));
            let wait = TimedPath::wait_at(a.robot, a.start, a.start_time, a.start_heading, self.config.wait_step);
            let path = match hop {
                Ok(path) => {
                    self.relation.clear(a.robot);
                    path
                }
                Err(blockage) => {
                    let first_time = !self.relation.is_waiting(a.robot);
                    self.relation.record(a.robot, blockage.map(|b| b.0), a.start_time);
                    let waited = a.start_time - self.relation.waiting_since(a.robot).unwrap_or(a.start_time);
                    let stuck = self.relation.on_cycle(a.robot) || waited > self.config.wait_step;
                    let evaded = if first_time || !stuck {
                        None
                    } else {
                        match self.evasion {
                            Evasion::Reroute => self.reroute(req, &table, a, blockage),
                            Evasion::Step => self.step_aside(req, &table, a),
                        }
                    };
                    match evaded {
                        Some(p) => {
                            self.relation.clear(a.robot);
                            p
                        }
                        None => wait,
                    }
                }
            };
            table.add_unchecked(&reservations_with_final(&path, req.graph, &a.profile));
            out.paths.insert(a.robot, path);
        }
        out.expansions = budget.used;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{agent, assert_conflict_free, swap_graph};
    use super::*;
    use crate::kinematics::KinematicProfile;
    use crate::model::WaypointKind;
    use crate::reservation::Reservation;

    /// 3x2 grid, bottom row a0 a1 a2 and top row b0 b1 b2, all bidirectional.
    fn ladder() -> (WarehouseGraph, Vec<WaypointId>) {
        let mut g = WarehouseGraph::new();
        let t = g.add_tier("h0", 4.0, 3.0);
        let mut ids = Vec::new();
        for y in 0..2 {
            for x in 0..3 {
                ids.push(g.add_waypoint(format!("n{x}{y}"), t, x as f64, y as f64, WaypointKind::Plain));
            }
        }
        for y in 0..2 {
            for x in 0..2 {
                g.add_bidirectional(ids[3 * y + x], ids[3 * y + x + 1]);
            }
        }
        for x in 0..3 {
            g.add_bidirectional(ids[x], ids[3 + x]);
        }
        (g, ids)
    }

    #[test]
    fn free_corridor_gives_one_hop_to_the_turn() {
        let (g, ids) = ladder();
        let p = KinematicProfile::warehouse_default();
        let mut req = PlanRequest::new(&g, 0.0);
        req.add_agent(agent(1, ids[0], ids[5], 0.0, p));
        let mut far = Far::new(SolverConfig::deterministic(), Evasion::Reroute);
        let res = far.plan(&req);
        let path = &res.paths[&RobotId(1)];
        assert_eq!(path.waypoints().collect::<Vec<_>>(), vec![ids[0], ids[1], ids[2]]);
        assert!(path.steps.iter().all(|s| s.wait == 0.0));
    }

    #[test]
    fn parked_robot_causes_a_wait_and_a_relation() {
        let (g, ids) = ladder();
        let p = KinematicProfile::warehouse_default();
        let mut req = PlanRequest::new(&g, 0.0);
        req.table.add(&[Reservation::final_at(ids[1], 0.0, RobotId(9))]).unwrap();
        req.add_agent(agent(1, ids[0], ids[2], 0.0, p));
        let mut far = Far::new(SolverConfig::deterministic(), Evasion::Reroute);
        let res = far.plan(&req);
        let path = &res.paths[&RobotId(1)];
        assert!(path.is_stationary());
        assert_eq!(path.steps[0].wait, 2.0);
        assert_eq!(far.relation().waits_for(RobotId(1)), Some(RobotId(9)));
        assert_conflict_free(&req, &res);

        // still blocked after more than one wait step: reroute over the top row
        let mut later = PlanRequest::new(&g, 3.0);
        later.table = req.table_without_holds();
        later.add_agent(PlanAgent { start_time: 3.0, ..agent(1, ids[0], ids[2], 0.0, p) });
        let res = far.plan(&later);
        let path = &res.paths[&RobotId(1)];
        assert!(!path.is_stationary());
        assert!(path.waypoints().all(|w| w != ids[1]));
        assert!(!far.relation().is_waiting(RobotId(1)));
        assert_conflict_free(&later, &res);
    }

    #[test]
    fn reroute_gives_up_after_the_call_limit() {
        let (g, ids) = ladder();
        let p = KinematicProfile::warehouse_default();
        let mut req = PlanRequest::new(&g, 0.0);
        req.table.add(&[Reservation::final_at(ids[1], 0.0, RobotId(8)), Reservation::final_at(ids[3], 0.0, RobotId(9))]).unwrap();
        req.add_agent(agent(1, ids[0], ids[2], 0.0, p));
        let cfg = SolverConfig { reroute_limit: 1, ..SolverConfig::deterministic() };
        let mut far = Far::new(cfg, Evasion::Reroute);
        far.plan(&req);
        let mut later = req.clone();
        later.agents[0].start_time = 3.0;
        let res = far.plan(&later);
        assert!(res.paths[&RobotId(1)].is_stationary());
    }

    fn swap_round(far: &mut Far, g: &WarehouseGraph, ids: &[WaypointId], t: f64) -> PlanResult {
        let p = KinematicProfile::warehouse_default();
        let mut req = PlanRequest::new(g, t);
        req.add_agent(PlanAgent { start_time: t, ..agent(1, ids[2], ids[1], 0.0, p) });
        req.add_agent(PlanAgent { start_time: t, ..agent(2, ids[1], ids[2], 0.0, p) });
        let res = far.plan(&req);
        assert_conflict_free(&req, &res);
        res
    }

    #[test]
    fn mutual_wait_triggers_evasion_step() {
        let (g, ids) = swap_graph();
        let mut far = Far::new(SolverConfig::deterministic(), Evasion::Step);
        let first = swap_round(&mut far, &g, &ids, 0.0);
        assert!(first.paths.values().all(|p| p.is_stationary()));
        assert!(far.relation().on_cycle(RobotId(1)));
        let second = swap_round(&mut far, &g, &ids, 0.5);
        let moved = &second.paths[&RobotId(1)];
        assert!(!moved.is_stationary());
        assert!([ids[3], ids[4]].contains(&moved.last()));
        assert!(moved.steps.last().unwrap().wait <= 2.0);
    }

    #[test]
    fn evasion_step_replays_under_a_seed() {
        let (g, ids) = swap_graph();
        let run = |seed| {
            let cfg = SolverConfig { seed, ..SolverConfig::deterministic() };
            let mut far = Far::new(cfg, Evasion::Step);
            swap_round(&mut far, &g, &ids, 0.0);
            swap_round(&mut far, &g, &ids, 0.5).paths[&RobotId(1)].clone()
        };
        assert_eq!(run(4), run(4));
        let ends: std::collections::BTreeSet<_> = (0..16).map(|s| run(s).last()).collect();
        assert_eq!(ends.len(), 2);
    }
}
