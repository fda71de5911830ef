//! Multi-robot planners. Each consumes a snapshot of the robots that need a
//! path and the reservations they must respect, and returns timed paths.

mod bcp;
mod cbs;
mod deadlock;
mod far;
mod odid;
mod whca;

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use bcp::Bcp;
pub use deadlock::{resolve_deadlock, DeadlockMove, Dwell};
pub use cbs::{Cbs, CbsOutcome, Constraint};
pub use far::{Evasion, Far, WaitRelation};
pub use odid::{od_search, OdId, OdOutcome};
pub use whca::{WhcaN, WhcaV};

use crate::kinematics::KinematicProfile;
use crate::model::{RobotId, TimedPath, WarehouseGraph, WaypointId};
use crate::reservation::{Reservation, ReservationTable};
use crate::search::{h_estimate, NodeMask, RraContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CbsStrategy {
    BestFirst,
    BreadthFirst,
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Length of one wait action.
    pub wait_step: f64,
    /// Wall-clock limit per invocation in seconds; 0 disables it so that only
    /// the expansion budget applies and runs are reproducible.
    pub timeout: f64,
    /// Search expansions allowed per invocation.
    pub expansion_budget: usize,
    /// Expansions allowed for a single space-time search.
    pub search_expansions: usize,
    /// Reservation window of volatile WHCA*, BCP and CBS.
    pub window: f64,
    /// Reservation window of non-volatile WHCA* and FAR.
    pub persistent_window: f64,
    /// Heuristic surcharge per foreign shortest path through a node (WHCA*_n).
    pub path_penalty: f64,
    /// Heuristic surcharge per detected collision (BCP).
    pub biased_cost: f64,
    pub cbs_strategy: CbsStrategy,
    /// Expanded joint states before operator decomposition falls back.
    pub od_max_states: usize,
    /// Outer iterations of volatile WHCA*.
    pub iteration_limit: usize,
    /// Rerouting attempts of FAR_r before it waits.
    pub reroute_limit: usize,
    /// Seconds a robot may stand on one node before the deadlock resolver moves it.
    pub dwell_threshold: f64,
    /// Stops considered along a straight run besides turns and the goal.
    pub max_run: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            wait_step: 2.0,
            timeout: 1.0,
            expansion_budget: 60_000,
            search_expansions: 6_000,
            window: 20.0,
            persistent_window: 30.0,
            path_penalty: 1.0,
            biased_cost: 1.0,
            cbs_strategy: CbsStrategy::BestFirst,
            od_max_states: 100,
            iteration_limit: 4,
            reroute_limit: 3,
            dwell_threshold: 30.0,
            max_run: 8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Budget-only configuration for reproducible runs.
    pub fn deterministic() -> Self {
        Self { timeout: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("wait_step", self.wait_step),
            ("window", self.window),
            ("persistent_window", self.persistent_window),
            ("dwell_threshold", self.dwell_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.timeout < 0.0 || self.path_penalty < 0.0 || self.biased_cost < 0.0 {
            return Err("timeout and penalties must not be negative".into());
        }
        let counts = [
            ("expansion_budget", self.expansion_budget),
            ("search_expansions", self.search_expansions),
            ("od_max_states", self.od_max_states),
            ("iteration_limit", self.iteration_limit),
            ("max_run", self.max_run),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

/// A robot that needs a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanAgent {
    pub robot: RobotId,
    pub start: WaypointId,
    /// When the robot stands at `start` ready for new orders.
    pub start_time: f64,
    pub start_heading: f64,
    pub goal: WaypointId,
    pub carrying: bool,
    pub profile: KinematicProfile,
}

#[derive(Debug, Clone)]
pub struct PlanRequest<'a> {
    pub graph: &'a WarehouseGraph,
    pub now: f64,
    pub agents: Vec<PlanAgent>,
    /// Reservations of all robots. Every agent holds a final reservation at
    /// its start; what it owns before `start_time` cannot be changed.
    pub table: ReservationTable,
    /// Nodes of robots that stand without a move order.
    pub standing: Vec<WaypointId>,
    /// Storage nodes holding a pod, closed to laden robots.
    pub pod_nodes: Vec<WaypointId>,
    /// Nodes closed to planning (station queues); an agent's own start and
    /// goal remain open to it.
    pub closed: Vec<WaypointId>,
}

impl<'a> PlanRequest<'a> {
    pub fn new(graph: &'a WarehouseGraph, now: f64) -> Self {
        Self {
            graph,
            now,
            agents: Vec::new(),
            table: ReservationTable::new(),
            standing: Vec::new(),
            pod_nodes: Vec::new(),
            closed: Vec::new(),
        }
    }

    /// Adds an agent standing at its start, with its hold reservation.
    pub fn add_agent(&mut self, agent: PlanAgent) {
        self.table.remove_final(agent.robot);
        self.table.add_unchecked(&[Reservation::final_at(agent.start, agent.start_time, agent.robot)]);
        self.agents.push(agent);
    }

    /// The nodes `agent` may not enter.
    pub fn blocked_for(&self, agent: &PlanAgent) -> NodeMask {
        let mut m = NodeMask::from_nodes(self.graph.len(), self.standing.iter().chain(&self.closed).copied());
        if agent.carrying {
            for &w in &self.pod_nodes {
                m.insert(w);
            }
        }
        m.remove(agent.start);
        m.remove(agent.goal);
        m
    }

    /// Agent indices ordered by priority: laden robots first (fewer routes
    /// are open to them), then by estimated time to the goal, then by id.
    pub(crate) fn sorted_agents(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.agents.len()).collect();
        let est: Vec<f64> =
            self.agents.iter().map(|a| h_estimate(self.graph, a.start, a.goal, &a.profile)).collect();
        idx.sort_by(|&i, &j| {
            let (a, b) = (&self.agents[i], &self.agents[j]);
            b.carrying.cmp(&a.carrying).then(est[i].total_cmp(&est[j])).then(a.robot.cmp(&b.robot))
        });
        idx
    }

    /// The request table without the agents' hold reservations.
    pub fn table_without_holds(&self) -> ReservationTable {
        let mut t = self.table.clone();
        for a in &self.agents {
            t.remove_final(a.robot);
        }
        t
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanResult {
    /// New paths; robots without an entry keep standing.
    pub paths: BTreeMap<RobotId, TimedPath>,
    pub expansions: usize,
    /// Outer rounds of iterative planners.
    pub iterations: usize,
    pub timed_out: bool,
    /// Reservation overlaps left between the returned paths.
    pub conflicts: usize,
    /// For partial results, the time of the first remaining collision.
    pub collision_horizon: Option<f64>,
}

pub trait PathPlanner: Send {
    fn name(&self) -> &'static str;
    /// Volatile planners replan every robot with a move order on each call;
    /// the others only plan robots without a path.
    fn volatile(&self) -> bool;
    fn plan(&mut self, req: &PlanRequest) -> PlanResult;
}

pub const PLANNER_NAMES: [&str; 7] = ["whca-v", "whca-n", "far-r", "far-e", "bcp", "odid", "cbs"];

pub fn planner_by_name(name: &str, config: &SolverConfig) -> Option<Box<dyn PathPlanner>> {
    let c = config.clone();
    Some(match name {
        "whca-v" => Box::new(WhcaV::new(c)),
        "whca-n" => Box::new(WhcaN::new(c)),
        "far-r" => Box::new(Far::new(c, Evasion::Reroute)),
        "far-e" => Box::new(Far::new(c, Evasion::Step)),
        "bcp" => Box::new(Bcp::new(c)),
        "odid" => Box::new(OdId::new(c)),
        "cbs" => Box::new(Cbs::new(c)),
        _ => return None,
    })
}

/// Wall-clock and expansion limit of one invocation.
#[derive(Debug, Clone)]
pub(crate) struct Budget {
    started: Instant,
    limit: Option<Duration>,
    max: usize,
    pub used: usize,
}

impl Budget {
    pub fn new(config: &SolverConfig) -> Self {
        let limit = (config.timeout > 0.0).then(|| Duration::from_secs_f64(config.timeout));
        Self { started: Instant::now(), limit, max: config.expansion_budget, used: 0 }
    }

    pub fn spend(&mut self, n: usize) {
        self.used += n;
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.max || self.limit.is_some_and(|l| self.started.elapsed() >= l)
    }

    /// Expansions still available, capped at `cap`.
    pub fn remaining(&self, cap: usize) -> usize {
        self.max.saturating_sub(self.used).min(cap)
    }
}

/// Reverse searches kept per robot and reused while goal and blocked set
/// stay the same.
#[derive(Debug, Clone, Default)]
pub(crate) struct RraCache {
    map: HashMap<RobotId, RraContext>,
}

impl RraCache {
    pub fn get(&mut self, graph: &WarehouseGraph, agent: &PlanAgent, blocked: &NodeMask) -> &mut RraContext {
        let fresh = self.map.get(&agent.robot).is_none_or(|c| !c.matches(agent.goal, blocked));
        if fresh {
            let ctx = RraContext::new(graph, agent.goal, agent.start, blocked.clone(), agent.profile);
            self.map.insert(agent.robot, ctx);
        }
        self.map.get_mut(&agent.robot).unwrap()
    }
}

/// Path reservations followed by the final reservation at the last node.
pub fn reservations_with_final(path: &TimedPath, graph: &WarehouseGraph, profile: &KinematicProfile) -> Vec<Reservation> {
    let timing = crate::reservation::PathTiming::compute_unchecked(path, graph, profile);
    let mut out = crate::reservation::reservations_from_timing(path, &timing, graph);
    out.push(Reservation::final_at(path.last(), timing.end_time(), path.robot));
    out
}

/// Pairs of overlapping reservations with different owners, earliest overlap first.
pub fn overlaps(reservations: &[Reservation]) -> Vec<(Reservation, Reservation)> {
    let mut by_node: BTreeMap<WaypointId, Vec<&Reservation>> = BTreeMap::new();
    for r in reservations {
        if r.end > r.start {
            by_node.entry(r.waypoint).or_default().push(r);
        }
    }
    let mut out = Vec::new();
    for list in by_node.values_mut() {
        list.sort_by(|a, b| a.start.total_cmp(&b.start));
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                if list[j].start >= list[i].end {
                    break;
                }
                if list[i].owner != list[j].owner {
                    out.push((*list[i], *list[j]));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.start.max(a.1.start).total_cmp(&b.0.start.max(b.1.start)));
    out
}

/// Start of the earliest overlap among the given paths.
pub fn first_collision(paths: &BTreeMap<RobotId, TimedPath>, graph: &WarehouseGraph, profiles: &HashMap<RobotId, KinematicProfile>) -> Option<f64> {
    let all: Vec<Reservation> =
        paths.values().flat_map(|p| reservations_with_final(p, graph, &profiles[&p.robot])).collect();
    overlaps(&all).first().map(|(a, b)| a.start.max(b.start))
}

pub(crate) fn profiles_of(req: &PlanRequest) -> HashMap<RobotId, KinematicProfile> {
    req.agents.iter().map(|a| (a.robot, a.profile)).collect()
}
