use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap, HashSet};

use super::{reservations_with_final, Budget, PathPlanner, PlanAgent, PlanRequest, PlanResult, RraCache, SolverConfig};
use crate::model::{TimedPath, WarehouseGraph, WaypointId};
use crate::reservation::ReservationTable;
use crate::search::{spacetime_search, NodeMask, RraContext, SpaceTimeQuery};

/// One windowed space-time search for `agent`, departing no earlier than
/// `delay` seconds after its start time.
#[allow(clippy::too_many_arguments)]
pub(crate) fn plan_one(
    graph: &WarehouseGraph,
    table: &ReservationTable,
    rra: &mut RraContext,
    agent: &PlanAgent,
    blocked: &NodeMask,
    config: &SolverConfig,
    window: f64,
    delay: f64,
    penalty: Option<&dyn Fn(WaypointId) -> f64>,
    budget: &mut Budget,
) -> Option<TimedPath> {
    let t0 = agent.start_time + delay;
    if delay > 0.0 && !table.is_free(agent.start, agent.start_time, t0, Some(agent.robot)) {
        return None;
    }
    let limit = budget.remaining(config.search_expansions);
    if limit == 0 {
        return None;
    }
    let mut q = SpaceTimeQuery::new(agent.robot, agent.start, t0, agent.start_heading, agent.goal, &agent.profile, blocked);
    q.window_end = agent.start_time + window;
    q.wait_step = config.wait_step;
    q.final_required = true;
    q.max_expansions = limit;
    q.max_run = config.max_run;
    q.penalty = penalty;
    let (res, spent) = spacetime_search(graph, table, rra, &q);
    budget.spend(spent.max(1));
    let res = res?;
    let mut path = res.path;
    path.start_time = agent.start_time;
    path.steps[0].wait += delay;
    Some(path)
}

/// Volatile windowed hierarchical cooperative A*: every robot with a move is
/// replanned on each call. Robots are planned one after another against the
/// reservations of those before them; a robot that finds no path gains
/// priority, and a prioritized robot first waits 2^(p-1) wait steps.
pub struct WhcaV {
    config: SolverConfig,
    cache: RraCache,
}

impl WhcaV {
    pub fn new(config: SolverConfig) -> Self {
        Self { config, cache: RraCache::default() }
    }
}

impl PathPlanner for WhcaV {
    fn name(&self) -> &'static str {
        "whca-v"
    }

    fn volatile(&self) -> bool {
        true
    }

    fn plan(&mut self, req: &PlanRequest) -> PlanResult {
        let cfg = &self.config;
        let mut budget = Budget::new(cfg);
        let mut priority = vec![0u32; req.agents.len()];
        let base = req.table_without_holds();
        let mut out = PlanResult::default();
        for _ in 0..cfg.iteration_limit {
            let mut table = base.clone();
            let mut order = req.sorted_agents();
            order.sort_by_key(|&i| Reverse(priority[i]));
            let mut paths = BTreeMap::new();
            let mut failed = false;
            for i in order {
                let a = &req.agents[i];
                let blocked = req.blocked_for(a);
                let rra = self.cache.get(req.graph, a, &blocked);
                let waits = if priority[i] == 0 { 0.0 } else { (1u64 << (priority[i] - 1).min(20)) as f64 };
                let delay = waits * cfg.wait_step;
                match plan_one(req.graph, &table, rra, a, &blocked, cfg, cfg.window, delay, None, &mut budget) {
                    Some(path) => {
                        table.add_unchecked(&reservations_with_final(&path, req.graph, &a.profile));
                        paths.insert(a.robot, path);
                    }
                    None => {
                        priority[i] += 1;
                        failed = true;
                    }
                }
            }
            out.paths = paths;
            if !failed {
                break;
            }
            if budget.exhausted() {
                out.timed_out = true;
                break;
            }
        }
        out.expansions = budget.used;
        out
    }
}

/// Non-volatile WHCA*: stored paths are kept and only robots without a path
/// are planned, once each, with a heuristic surcharge on nodes that lie on
/// other robots' shortest paths. Each plan ends in a final reservation, so a
/// robot can always fall back to waiting where it stands.
pub struct WhcaN {
    config: SolverConfig,
    cache: RraCache,
}

impl WhcaN {
    pub fn new(config: SolverConfig) -> Self {
        Self { config, cache: RraCache::default() }
    }
}

impl PathPlanner for WhcaN {
    fn name(&self) -> &'static str {
        "whca-n"
    }

    fn volatile(&self) -> bool {
        false
    }

    fn plan(&mut self, req: &PlanRequest) -> PlanResult {
        let cfg = &self.config;
        let mut budget = Budget::new(cfg);
        let mut table = req.table.clone();
        let mut counts: HashMap<WaypointId, usize> = HashMap::new();
        let mut own: Vec<HashSet<WaypointId>> = Vec::with_capacity(req.agents.len());
        for a in &req.agents {
            let blocked = req.blocked_for(a);
            let nodes: HashSet<WaypointId> =
                self.cache.get(req.graph, a, &blocked).path_nodes(req.graph, a.start).into_iter().collect();
            for w in &nodes {
                *counts.entry(*w).or_default() += 1;
            }
            own.push(nodes);
        }
        let mut out = PlanResult::default();
        for i in req.sorted_agents() {
            let a = &req.agents[i];
            table.remove_final(a.robot);
            let blocked = req.blocked_for(a);
            let c_p = cfg.path_penalty;
            let mine = &own[i];
            let counts = &counts;
            let penalty = move |w: WaypointId| {
                let n = counts.get(&w).copied().unwrap_or(0) - usize::from(mine.contains(&w));
                c_p * n as f64
            };
            let rra = self.cache.get(req.graph, a, &blocked);
            let path = plan_one(req.graph, &table, rra, a, &blocked, cfg, cfg.persistent_window, 0.0, Some(&penalty), &mut budget)
                .unwrap_or_else(|| TimedPath::wait_at(a.robot, a.start, a.start_time, a.start_heading, cfg.wait_step));
            table.add_unchecked(&reservations_with_final(&path, req.graph, &a.profile));
            out.paths.insert(a.robot, path);
        }
        out.timed_out = budget.exhausted();
        out.expansions = budget.used;
        out
    }
}
