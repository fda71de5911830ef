use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use ordered_float::OrderedFloat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{overlaps, reservations_with_final, Budget, PathPlanner, PlanRequest, PlanResult, RraCache, SolverConfig};
use crate::model::{PathStep, RobotId, TimedPath, WaypointId};
use crate::reservation::{Reservation, ReservationTable};
use crate::search::{arc_cost_floor, candidate_actions, heading_key, record_arc_cost, Action, ActionKind};

#[derive(Debug, Clone, Copy)]
struct Standing {
    w: WaypointId,
    t: f64,
    heading: f64,
    done: bool,
}

#[derive(Debug, Clone)]
enum Move {
    Act(Action),
    /// Stay at the goal for good.
    Finish,
}

struct JointNode {
    parent: Option<usize>,
    robots: Vec<Standing>,
    step: Option<(usize, Move)>,
    g: f64,
    f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdOutcome {
    pub paths: BTreeMap<RobotId, TimedPath>,
    /// f of the initial joint state: the summed single-robot estimates.
    pub root_f: f64,
    pub expansions: usize,
    /// True when every robot reached its goal.
    pub complete: bool,
    /// The robot expanded first.
    pub first_robot: Option<RobotId>,
}

fn clash(a: (WaypointId, f64, f64), b: (WaypointId, f64, f64)) -> bool {
    a.0 == b.0 && a.1 < b.2 && b.1 < a.2
}

/// Operator decomposition over the robots `group` of `req`: a joint state
/// holds, per robot, a standstill and the time stamp up to which its actions
/// are fixed. Each expansion moves the robot with the lowest time stamp
/// (chosen by `rng` among equals), checking its action against the
/// reservations and final reservations of the others. g sums the elapsed
/// times and h the reverse-search estimates. When the state budget runs out,
/// the best state reaching into the second half of the explored time span is
/// returned as partial paths.
pub fn od_search(
    req: &PlanRequest,
    group: &[usize],
    table: &ReservationTable,
    config: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> OdOutcome {
    let mut cache = RraCache::default();
    let mut budget = Budget::new(config);
    od_inner(req, group, table, config, rng, &mut cache, &mut budget)
}

fn od_inner(
    req: &PlanRequest,
    group: &[usize],
    table: &ReservationTable,
    config: &SolverConfig,
    rng: &mut ChaCha8Rng,
    cache: &mut RraCache,
    budget: &mut Budget,
) -> OdOutcome {
    let graph = req.graph;
    let agents: Vec<_> = group.iter().map(|&i| &req.agents[i]).collect();
    let blocked: Vec<_> = agents.iter().map(|a| req.blocked_for(a)).collect();
    let floor = agents.iter().map(|a| arc_cost_floor(graph, &a.profile, config.wait_step)).fold(f64::INFINITY, f64::min);
    let mut estimate = |k: usize, s: &Standing| -> f64 {
        if s.done {
            0.0
        } else {
            cache.get(graph, agents[k], &blocked[k]).state_value(graph, s.w, s.heading)
        }
    };
    let start: Vec<Standing> =
        agents.iter().map(|a| Standing { w: a.start, t: a.start_time, heading: a.start_heading, done: false }).collect();
    let root_f: f64 = start.iter().enumerate().map(|(k, s)| estimate(k, s)).sum();
    let mut arena = vec![JointNode { parent: None, robots: start, step: None, g: 0.0, f: root_f }];
    let mut open = BinaryHeap::from([Reverse((OrderedFloat(root_f), OrderedFloat(0.0), 0u64, 0usize))]);
    let mut closed: HashSet<Vec<(u32, i64, i64, bool)>> = HashSet::new();
    let mut seq = 0u64;
    let mut expansions = 0;
    let mut first_robot = None;
    let mut goal_node = None;

    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        let key: Vec<_> = arena[idx]
            .robots
            .iter()
            .map(|s| (s.w.0, (s.t * 1e6).round() as i64, heading_key(s.heading), s.done))
            .collect();
        if !closed.insert(key) {
            continue;
        }
        if arena[idx].robots.iter().all(|s| s.done) {
            goal_node = Some(idx);
            break;
        }
        if expansions >= config.od_max_states || budget.exhausted() {
            break;
        }
        expansions += 1;
        budget.spend(1);

        let robots = arena[idx].robots.clone();
        let low = robots.iter().filter(|s| !s.done).map(|s| s.t).fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..robots.len()).filter(|&k| !robots[k].done && robots[k].t <= low + 1e-9).collect();
        let k = *tied.choose(rng).unwrap();
        first_robot.get_or_insert(agents[k].robot);
        let me = robots[k];

        // what the other robots hold from this robot's time stamp on
        let mut others: Vec<(WaypointId, f64, f64)> = Vec::new();
        for (j, s) in robots.iter().enumerate() {
            if j != k {
                others.push((s.w, s.t, f64::INFINITY));
            }
        }
        let mut cur = idx;
        while let Some(p) = arena[cur].parent {
            if let Some((j, Move::Act(a))) = &arena[cur].step {
                if *j != k {
                    others.extend(a.blocks.iter().filter(|b| b.2 > me.t).copied());
                }
            }
            cur = p;
        }
        let robot = agents[k].robot;
        let free = |b: (WaypointId, f64, f64)| {
            b.1 >= b.2 || (table.is_free(b.0, b.1, b.2, Some(robot)) && others.iter().all(|o| !clash(*o, b)))
        };

        let mut moves: Vec<Move> = Vec::new();
        if me.w == agents[k].goal {
            moves.push(Move::Finish);
        }
        let actions = candidate_actions(
            graph,
            &agents[k].profile,
            me.w,
            me.t,
            me.heading,
            &blocked[k],
            config.wait_step,
            config.max_run,
            Some(agents[k].goal),
        );
        for a in actions {
            record_arc_cost(a.cost(), floor);
            if a.blocks.iter().all(|b| free(*b)) && free((a.to(), a.end, f64::INFINITY)) {
                moves.push(Move::Act(a));
            }
        }
        for m in moves {
            let mut next = robots.clone();
            let mut g = arena[idx].g;
            match &m {
                Move::Finish => next[k].done = true,
                Move::Act(a) => {
                    next[k] = Standing { w: a.to(), t: a.end, heading: a.heading, done: false };
                    g += a.cost();
                }
            }
            let h: f64 = next.iter().enumerate().map(|(j, s)| estimate(j, s)).sum();
            if !h.is_finite() {
                continue;
            }
            let f = g + h;
            arena.push(JointNode { parent: Some(idx), robots: next, step: Some((k, m)), g, f });
            seq += 1;
            open.push(Reverse((OrderedFloat(f), OrderedFloat(-g), seq, arena.len() - 1)));
        }
    }

    let complete = goal_node.is_some();
    let chosen = goal_node.unwrap_or_else(|| {
        let span = |n: &JointNode| n.robots.iter().map(|s| s.t).fold(f64::NEG_INFINITY, f64::max);
        let t_max = arena.iter().map(span).fold(f64::NEG_INFINITY, f64::max);
        let t0 = agents.iter().map(|a| a.start_time).fold(f64::INFINITY, f64::min);
        let cut = t0 + (t_max - t0) / 2.0;
        (0..arena.len())
            .filter(|&i| span(&arena[i]) >= cut - 1e-9)
            .min_by(|&a, &b| arena[a].f.total_cmp(&arena[b].f).then(arena[b].g.total_cmp(&arena[a].g)).then(a.cmp(&b)))
            .unwrap_or(0)
    });

    let mut chain = Vec::new();
    let mut cur = chosen;
    while let Some(p) = arena[cur].parent {
        chain.push(cur);
        cur = p;
    }
    chain.reverse();
    let mut steps: Vec<Vec<PathStep>> = agents.iter().map(|a| vec![PathStep::stop(a.start)]).collect();
    for i in chain {
        if let Some((k, Move::Act(a))) = &arena[i].step {
            match a.kind {
                ActionKind::Wait => steps[*k].last_mut().unwrap().wait += a.cost(),
                _ => {
                    let n = a.nodes.len();
                    for (j, v) in a.nodes.iter().enumerate() {
                        steps[*k].push(if j + 1 == n { PathStep::stop(*v) } else { PathStep::pass(*v) });
                    }
                }
            }
        }
    }
    let paths = agents
        .iter()
        .zip(steps)
        .map(|(a, s)| (a.robot, TimedPath::new(a.robot, a.start_time, a.start_heading, s)))
        .collect();
    OdOutcome { paths, root_f, expansions, complete, first_robot }
}

/// Operator decomposition inside independence detection: every robot starts
/// in its own group; groups whose plans collide are merged and replanned
/// until the plans are independent or a single group remains.
pub struct OdId {
    config: SolverConfig,
    cache: RraCache,
    rng: ChaCha8Rng,
    groups: Vec<Vec<RobotId>>,
}

impl OdId {
    pub fn new(config: SolverConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self { config, cache: RraCache::default(), rng, groups: Vec::new() }
    }

    /// The groups of the last invocation.
    pub fn groups(&self) -> &[Vec<RobotId>] {
        &self.groups
    }
}

impl PathPlanner for OdId {
    fn name(&self) -> &'static str {
        "odid"
    }

    fn volatile(&self) -> bool {
        true
    }

    fn plan(&mut self, req: &PlanRequest) -> PlanResult {
        let mut budget = Budget::new(&self.config);
        let table = req.table_without_holds();
        let mut groups: Vec<Vec<usize>> = req.sorted_agents().into_iter().map(|i| vec![i]).collect();
        let mut plans: Vec<Option<OdOutcome>> = vec![None; groups.len()];
        let mut out = PlanResult::default();
        loop {
            out.iterations += 1;
            for (g, plan) in groups.iter().zip(plans.iter_mut()) {
                if plan.is_none() {
                    *plan = Some(od_inner(req, g, &table, &self.config, &mut self.rng, &mut self.cache, &mut budget));
                }
            }
            let mut all: Vec<(usize, Reservation)> = Vec::new();
            for (gi, plan) in plans.iter().enumerate() {
                for p in plan.as_ref().unwrap().paths.values() {
                    let prof = &req.agents.iter().find(|a| a.robot == p.robot).unwrap().profile;
                    all.extend(reservations_with_final(p, req.graph, prof).into_iter().map(|r| (gi, r)));
                }
            }
            let group_of = |r: RobotId| all.iter().find(|(_, x)| x.owner == r).map(|(g, _)| *g).unwrap();
            let res: Vec<Reservation> = all.iter().map(|(_, r)| *r).collect();
            let clash = overlaps(&res).into_iter().map(|(a, b)| (group_of(a.owner), group_of(b.owner))).find(|(a, b)| a != b);
            let Some((a, b)) = clash else { break };
            if budget.exhausted() {
                out.timed_out = true;
                out.conflicts = 1;
                break;
            }
            let (lo, hi) = (a.min(b), a.max(b));
            let moved = groups.remove(hi);
            plans.remove(hi);
            groups[lo].extend(moved);
            plans[lo] = None;
        }
        self.groups =
            groups.iter().map(|g| g.iter().map(|&i| req.agents[i].robot).collect()).collect();
        for plan in plans.into_iter().flatten() {
            for (r, mut p) in plan.paths {
                if p.is_stationary() && p.steps[0].wait == 0.0 {
                    p.steps[0].wait = self.config.wait_step;
                }
                out.paths.insert(r, p);
            }
        }
        out.expansions = budget.used;
        out
    }
}
