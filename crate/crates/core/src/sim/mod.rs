//! Event-driven warehouse simulation.

mod controllers;
mod gate;
mod metrics;
mod motion;
mod tasks;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::fmt::Write as _;
use std::time::Instant;

use ordered_float::OrderedFloat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use controllers::{Claim, Controllers, MAX_SKUS};
pub use gate::{commit_gate, GateChoice, GateEntry};
pub use metrics::{hourly_upper_bound, Heatmap, Metrics, TierGrid};
pub use motion::{position, prefix, run_path, splice};

use crate::kinematics::KinematicProfile;
use crate::model::{
    Instance, PodId, PodOwner, RobotId, StationId, Subtask, SubtaskKind, Task, TimedPath, WaypointId, WaypointKind,
};
use crate::reservation::{fixed_reservations, reservations_from_timing, PathTiming, Reservation, ReservationTable};
use crate::search::NodeMask;
use crate::solvers::{reservations_with_final, resolve_deadlock, Dwell, PathPlanner, PlanAgent, PlanRequest, SolverConfig};

/// Owner of reservations injected from outside, e.g. to test path aborts.
pub const FOREIGN_OWNER: RobotId = RobotId(u32::MAX - 1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Simulated seconds.
    pub horizon: f64,
    /// Period of the control loop (task state, queues, planner, deadlocks).
    pub tick: f64,
    /// Period of the geometric check and heatmap sample.
    pub poll_period: f64,
    /// Minimum time between two planner calls.
    pub replan_period: f64,
    /// A move subtask open longer than this at the end counts as stalled.
    pub stall_limit: f64,
    pub skus: usize,
    /// Open orders per pick station and bundles per replenishment station.
    pub backlog: usize,
    /// Generate tasks with the fixed controllers; off for hand-made scenarios.
    pub auto_tasks: bool,
    pub trace: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 3600.0,
            tick: 0.25,
            poll_period: 0.5,
            replan_period: 1.0,
            stall_limit: 600.0,
            skus: 100,
            backlog: 4,
            auto_tasks: true,
            trace: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("horizon", self.horizon),
            ("tick", self.tick),
            ("poll_period", self.poll_period),
            ("stall_limit", self.stall_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.replan_period < 0.0 {
            return Err(SimError::Config("replan_period must not be negative".into()));
        }
        if self.skus == 0 || self.skus > MAX_SKUS {
            return Err(SimError::Config(format!("skus must be in 1..={MAX_SKUS}")));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid instance: {0}")]
    Instance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Motion { robot: usize, gen: u64 },
    Service { robot: usize, gen: u64 },
    Tick(u64),
    Poll(u64),
}

impl Event {
    /// Robots move before the control loop looks at them; polls see the result.
    fn class(&self) -> u8 {
        match self {
            Event::Motion { .. } | Event::Service { .. } => 0,
            Event::Tick(_) => 1,
            Event::Poll(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
struct Route {
    path: TimedPath,
    timing: PathTiming,
    /// Next hop to start, or the one being driven.
    hop: usize,
    driving: bool,
}

#[derive(Debug, Clone)]
struct Robot {
    id: RobotId,
    name: String,
    profile: KinematicProfile,
    at: WaypointId,
    heading: f64,
    /// Arrival at `at`.
    since: f64,
    route: Option<Route>,
    gen: u64,
    carrying: Option<PodId>,
    task: Option<Task>,
    claim: Claim,
    subtasks: VecDeque<Subtask>,
    busy: bool,
    in_queue: Option<StationId>,
    /// Executing a move handed out by the deadlock resolver.
    evading: bool,
    move_since: Option<f64>,
    /// Start time and driven length of the current trip.
    trip: Option<(f64, f64)>,
    /// Storage location reserved for this robot (park target or rest spot).
    spot: Option<WaypointId>,
}

impl Robot {
    fn front_move(&self) -> Option<&Subtask> {
        self.subtasks.front().filter(|s| s.kind == SubtaskKind::Move)
    }
}

pub struct Simulation {
    inst: Instance,
    config: SimConfig,
    solver: SolverConfig,
    planner: Box<dyn PathPlanner>,
    robots: Vec<Robot>,
    pods: Vec<PodOwner>,
    pod_radius: Vec<f64>,
    pod_claimed: Vec<bool>,
    /// Pod standing on each waypoint.
    stored: Vec<Option<PodId>>,
    spots: BTreeSet<WaypointId>,
    storage: Vec<WaypointId>,
    /// Station whose gate each waypoint is.
    gate_of: Vec<Option<StationId>>,
    closed: Vec<WaypointId>,
    controllers: Controllers,
    table: ReservationTable,
    events: BinaryHeap<Reverse<(OrderedFloat<f64>, u8, u64, Event)>>,
    seq: u64,
    now: f64,
    started: bool,
    last_call: f64,
    call_times: Vec<f64>,
    alloc_rng: ChaCha8Rng,
    deadlock_rng: ChaCha8Rng,
    metrics: Metrics,
    heatmap: Heatmap,
    trace: Vec<String>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Simulation {
    pub fn new(
        inst: Instance,
        planner: Box<dyn PathPlanner>,
        solver: SolverConfig,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        config.validate()?;
        solver.validate().map_err(SimError::Config)?;
        let n = inst.graph.len();
        let mut table = ReservationTable::new();
        let mut robots = Vec::with_capacity(inst.robots.len());
        for (i, spec) in inst.robots.iter().enumerate() {
            if spec.id.index() != i {
                return Err(SimError::Instance(format!("robot {} out of order", spec.name)));
            }
            table
                .add(&[Reservation::final_at(spec.home, 0.0, spec.id)])
                .map_err(|_| SimError::Instance(format!("robot {} shares its start", spec.name)))?;
            robots.push(Robot {
                id: spec.id,
                name: spec.name.clone(),
                profile: spec.profile,
                at: spec.home,
                heading: spec.heading,
                since: 0.0,
                route: None,
                gen: 0,
                carrying: None,
                task: None,
                claim: Claim::default(),
                subtasks: VecDeque::new(),
                busy: false,
                in_queue: None,
                evading: false,
                move_since: None,
                trip: None,
                spot: None,
            });
        }
        let mut stored = vec![None; n];
        let mut pods = Vec::with_capacity(inst.pods.len());
        for (i, p) in inst.pods.iter().enumerate() {
            if p.id.index() != i {
                return Err(SimError::Instance(format!("pod {} out of order", p.name)));
            }
            match p.owner {
                PodOwner::Storage(w) => {
                    if stored[w.index()].replace(p.id).is_some() {
                        return Err(SimError::Instance(format!("two pods on {}", inst.graph.waypoint(w).name)));
                    }
                }
                PodOwner::Robot(r) => robots[r.index()].carrying = Some(p.id),
            }
            pods.push(p.owner);
        }
        let mut gate_of = vec![None; n];
        let mut closed = Vec::new();
        for s in &inst.stations {
            gate_of[s.gate.index()] = Some(s.id);
            closed.extend(s.queue.iter().copied());
            closed.push(s.gate);
        }
        let pick = inst.stations.iter().filter(|s| s.kind == crate::model::StationKind::Pick).map(|s| s.id).collect();
        let repl =
            inst.stations.iter().filter(|s| s.kind == crate::model::StationKind::Replenishment).map(|s| s.id).collect();
        let controllers = Controllers::new(inst.pods.len(), pick, repl, config.skus, config.backlog, config.seed);
        let metrics = Metrics {
            horizon: config.horizon,
            stations: inst.stations.len(),
            upper_bound: hourly_upper_bound(&inst) * config.horizon / 3600.0,
            ..Metrics::default()
        };
        let heatmap = Heatmap::for_instance(&inst, 1.0);
        Ok(Self {
            storage: inst.storage_locations(),
            pod_radius: inst.pods.iter().map(|p| p.radius).collect(),
            pod_claimed: vec![false; pods.len()],
            pods,
            stored,
            spots: BTreeSet::new(),
            gate_of,
            closed,
            controllers,
            table,
            events: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            started: false,
            last_call: f64::NEG_INFINITY,
            call_times: Vec::new(),
            alloc_rng: stream(config.seed, 5),
            deadlock_rng: stream(config.seed, 6),
            metrics,
            heatmap,
            trace: Vec::new(),
            robots,
            inst,
            config,
            solver,
            planner,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn heatmap(&self) -> &Heatmap {
        &self.heatmap
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn table(&self) -> &ReservationTable {
        &self.table
    }

    /// Times at which the planner was invoked.
    pub fn call_times(&self) -> &[f64] {
        &self.call_times
    }

    pub fn controllers(&self) -> &Controllers {
        &self.controllers
    }

    pub fn robot_at(&self, robot: RobotId) -> WaypointId {
        self.robots[robot.index()].at
    }

    pub fn has_path(&self, robot: RobotId) -> bool {
        self.robots[robot.index()].route.is_some()
    }

    pub fn is_idle(&self, robot: RobotId) -> bool {
        let r = &self.robots[robot.index()];
        r.task.is_none() && !r.busy && r.route.is_none()
    }

    pub fn carrying(&self, robot: RobotId) -> Option<PodId> {
        self.robots[robot.index()].carrying
    }

    /// Hands a task to an idle robot.
    pub fn assign(&mut self, robot: RobotId, task: Task) {
        assert!(self.robots[robot.index()].task.is_none(), "robot already has a task");
        self.give_task(robot.index(), task, Claim::default());
    }

    /// Puts a reservation into the master table without any check.
    pub fn inject_reservation(&mut self, r: Reservation) {
        self.table.add_unchecked(&[r]);
    }

    fn log(&mut self, kind: &str, entity: &str, detail: std::fmt::Arguments) {
        if self.config.trace {
            let mut line = format!("t={} {kind} {entity} ", self.now);
            let _ = line.write_fmt(detail);
            self.trace.push(line);
        }
    }

    fn push(&mut self, t: f64, event: Event) {
        self.seq += 1;
        self.events.push(Reverse((OrderedFloat(t), event.class(), self.seq, event)));
    }

    /// Runs the whole horizon and returns the final metrics.
    pub fn run(&mut self) -> Metrics {
        self.run_until(self.config.horizon);
        self.finish()
    }

    pub fn run_until(&mut self, end: f64) {
        if !self.started {
            self.started = true;
            self.push(0.0, Event::Tick(0));
            self.push(0.0, Event::Poll(0));
        }
        while let Some(Reverse((t, _, _, _))) = self.events.peek() {
            if t.0 > end {
                break;
            }
            let Reverse((t, _, _, event)) = self.events.pop().unwrap();
            self.now = t.0;
            match event {
                Event::Motion { robot, gen } => self.on_motion(robot, gen),
                Event::Service { robot, gen } => self.on_service(robot, gen),
                Event::Tick(k) => {
                    self.on_tick();
                    self.push((k + 1) as f64 * self.config.tick, Event::Tick(k + 1));
                }
                Event::Poll(k) => {
                    self.on_poll();
                    self.push((k + 1) as f64 * self.config.poll_period, Event::Poll(k + 1));
                }
            }
        }
        self.now = self.now.max(end);
    }

    fn finish(&mut self) -> Metrics {
        let limit = self.config.stall_limit;
        let end = self.now;
        self.metrics.stalled_moves =
            self.robots.iter().filter(|r| r.move_since.is_some_and(|s| end - s > limit)).count() as u64;
        self.metrics.clone()
    }

    fn on_tick(&mut self) {
        self.table.reorganize(self.now, &BTreeSet::new());
        self.advance_tasks();
        if self.config.auto_tasks {
            self.allocate();
            self.advance_tasks();
        }
        self.manage_queues();
        self.planner_update();
        self.resolve_deadlocks();
    }

    // ---- motion ----

    fn set_route(&mut self, i: usize, path: TimedPath, keep_progress: Option<(usize, bool)>) {
        let timing = PathTiming::compute_unchecked(&path, &self.inst.graph, &self.robots[i].profile);
        let (hop, driving) = keep_progress.unwrap_or((0, false));
        let r = &mut self.robots[i];
        r.gen += 1;
        if r.trip.is_none() && r.front_move().is_some() && !path.is_stationary() {
            r.trip = Some((self.now, 0.0));
        }
        r.route = Some(Route { path, timing, hop, driving });
        self.schedule_motion(i);
    }

    fn schedule_motion(&mut self, i: usize) {
        let r = &self.robots[i];
        let Some(route) = &r.route else { return };
        let t = if route.driving {
            route.timing.hops[route.hop].end
        } else if route.hop < route.timing.hops.len() {
            route.timing.hops[route.hop].rotate_start
        } else {
            route.timing.end_time()
        };
        let gen = r.gen;
        self.push(t.max(self.now), Event::Motion { robot: i, gen });
    }

    fn on_motion(&mut self, i: usize, gen: u64) {
        if self.robots[i].gen != gen || self.robots[i].route.is_none() {
            return;
        }
        let now = self.now;
        let r = &mut self.robots[i];
        let route = r.route.as_mut().unwrap();
        if route.driving {
            let hop = &route.timing.hops[route.hop];
            if now < hop.end {
                self.schedule_motion(i);
                return;
            }
            let driven = match &hop.motion {
                crate::reservation::HopMotion::Drive { offsets, .. } => *offsets.last().unwrap(),
                crate::reservation::HopMotion::Elevator { .. } => 0.0,
            };
            r.at = route.path.steps[hop.to].waypoint;
            r.heading = hop.heading;
            r.since = now;
            if let Some(trip) = &mut r.trip {
                trip.1 += driven;
            }
            route.driving = false;
            route.hop += 1;
            let (name, at) = (r.name.clone(), self.inst.graph.waypoint(r.at).name.clone());
            self.log("arrive", &name, format_args!("{at}"));
        }
        let r = &mut self.robots[i];
        let route = r.route.as_mut().unwrap();
        if route.hop < route.timing.hops.len() {
            if now < route.timing.hops[route.hop].rotate_start {
                self.schedule_motion(i);
                return;
            }
            if !self.hop_is_clear(i) {
                self.abort(i);
                return;
            }
            let r = &mut self.robots[i];
            r.route.as_mut().unwrap().driving = true;
            self.schedule_motion(i);
            return;
        }
        if now < route.timing.end_time() {
            self.schedule_motion(i);
            return;
        }
        r.route = None;
        r.evading = false;
        let (name, at) = (r.name.clone(), self.inst.graph.waypoint(r.at).name.clone());
        self.log("end", &name, format_args!("{at}"));
    }

    /// The reservations the next hop drives through, up to leaving its far
    /// stop, are still held by the robot alone.
    fn hop_is_clear(&self, i: usize) -> bool {
        let r = &self.robots[i];
        let route = r.route.as_ref().unwrap();
        let hop = &route.timing.hops[route.hop];
        let last = hop.to + 1 == route.path.steps.len();
        let until = if last { f64::INFINITY } else { route.timing.steps[hop.to].leave };
        let mut own = reservations_from_timing(&route.path, &route.timing, &self.inst.graph);
        if last {
            own.push(Reservation::final_at(route.path.last(), route.timing.end_time(), r.id));
        }
        own.iter()
            .filter(|res| res.end > self.now && res.start < until && res.end > hop.rotate_start)
            .all(|res| self.table.is_free(res.waypoint, res.start.max(self.now), res.end, Some(r.id)))
    }

    fn abort(&mut self, i: usize) {
        let now = self.now;
        let r = &mut self.robots[i];
        r.route = None;
        r.gen += 1;
        r.evading = false;
        r.since = now;
        let (id, at) = (r.id, r.at);
        self.table.remove_owner(id);
        self.table.add_unchecked(&[Reservation::final_at(at, now, id)]);
        self.metrics.aborts += 1;
        let (name, at) = (self.robots[i].name.clone(), self.inst.graph.waypoint(at).name.clone());
        self.log("abort", &name, format_args!("{at}"));
    }

    fn position(&self, r: &Robot) -> (crate::model::TierId, f64, f64) {
        match &r.route {
            Some(route) => position(&self.inst.graph, &route.path, &route.timing, self.now),
            None => {
                let w = self.inst.graph.waypoint(r.at);
                (w.tier, w.x, w.y)
            }
        }
    }

    fn on_poll(&mut self) {
        let at: Vec<_> = self.robots.iter().map(|r| self.position(r)).collect();
        self.metrics.polls += 1;
        self.heatmap.polls += 1;
        for &(tier, x, y) in &at {
            self.heatmap.add(tier, x, y);
        }
        let dist = |a: (crate::model::TierId, f64, f64), b: (crate::model::TierId, f64, f64)| {
            if a.0 == b.0 { (a.1 - b.1).hypot(a.2 - b.2) } else { f64::INFINITY }
        };
        let mut faults = Vec::new();
        for i in 0..at.len() {
            for j in i + 1..at.len() {
                let need = self.robots[i].profile.radius + self.robots[j].profile.radius;
                if dist(at[i], at[j]) < need - 1e-9 {
                    faults.push(format!("{} {}", self.robots[i].name, self.robots[j].name));
                }
                if let (Some(p), Some(q)) = (self.robots[i].carrying, self.robots[j].carrying) {
                    if dist(at[i], at[j]) < self.pod_radius[p.index()] + self.pod_radius[q.index()] - 1e-9 {
                        faults.push(format!("{} {}", self.inst.pods[p.index()].name, self.inst.pods[q.index()].name));
                    }
                }
            }
            if let Some(p) = self.robots[i].carrying {
                for (w, q) in self.stored.iter().enumerate().filter_map(|(w, q)| q.map(|q| (w, q))) {
                    let wp = self.inst.graph.waypoint(WaypointId(w as u32));
                    if dist(at[i], (wp.tier, wp.x, wp.y)) < self.pod_radius[p.index()] + self.pod_radius[q.index()] - 1e-9 {
                        faults.push(format!("{} {}", self.inst.pods[p.index()].name, self.inst.pods[q.index()].name));
                    }
                }
            }
        }
        self.metrics.geometric_faults += faults.len() as u64;
        for f in faults {
            self.log("overlap", "poll", format_args!("{f}"));
        }
        let mut owner_faults = 0;
        for (p, owner) in self.pods.iter().enumerate() {
            let pod = Some(PodId(p as u32));
            let ok = match *owner {
                PodOwner::Robot(r) => self.robots[r.index()].carrying == pod,
                PodOwner::Storage(w) => self.stored[w.index()] == pod,
            };
            let carriers = self.robots.iter().filter(|r| r.carrying == pod).count();
            if !ok || carriers > 1 || (carriers == 1 && !matches!(owner, PodOwner::Robot(_))) {
                owner_faults += 1;
            }
        }
        self.metrics.owner_faults += owner_faults;
    }

    // ---- planning ----

    fn goal_of(&self, st: &Subtask) -> WaypointId {
        match self.gate_of[st.at.index()] {
            Some(s) => self.inst.station(s).entry(),
            None => st.at,
        }
    }

    fn pod_nodes(&self) -> Vec<WaypointId> {
        self.stored.iter().enumerate().filter(|(_, p)| p.is_some()).map(|(w, _)| WaypointId(w as u32)).collect()
    }

    fn planner_update(&mut self) {
        let now = self.now;
        if self.last_call + self.config.replan_period >= now {
            return;
        }
        let volatile = self.planner.volatile();
        let mut agents: Vec<(PlanAgent, Vec<Reservation>, Option<crate::reservation::ReplanPoint>)> = Vec::new();
        let mut needs_path = false;
        for r in &self.robots {
            let Some(st) = r.front_move() else { continue };
            if r.busy || r.in_queue.is_some() || r.evading {
                continue;
            }
            let goal = self.goal_of(st);
            let agent = |start, start_time, start_heading| PlanAgent {
                robot: r.id,
                start,
                start_time,
                start_heading,
                goal,
                carrying: r.carrying.is_some(),
                profile: r.profile,
            };
            match &r.route {
                None if r.at != goal => {
                    needs_path = true;
                    agents.push((agent(r.at, now, r.heading), Vec::new(), None));
                }
                Some(route) if volatile => {
                    let (fixed, point) = fixed_reservations(&route.path, &route.timing, &self.inst.graph, now);
                    if point.waypoint != goal {
                        agents.push((agent(point.waypoint, point.time, point.heading), fixed, Some(point)));
                    }
                }
                _ => {}
            }
        }
        if !needs_path {
            return;
        }
        let mut req = PlanRequest::new(&self.inst.graph, now);
        req.table = self.table.clone();
        let mut base = self.table.clone();
        for (a, fixed, _) in &agents {
            req.table.remove_owner(a.robot);
            req.table.add_unchecked(fixed);
            base.remove_owner(a.robot);
        }
        for (a, _, _) in &agents {
            req.add_agent(a.clone());
        }
        let planned: BTreeSet<RobotId> = agents.iter().map(|(a, _, _)| a.robot).collect();
        req.standing =
            self.robots.iter().filter(|r| r.route.is_none() && !planned.contains(&r.id)).map(|r| r.at).collect();
        req.closed = self.closed.clone();
        req.pod_nodes = self.pod_nodes();
        let clock = Instant::now();
        let result = self.planner.plan(&req);
        self.metrics.wall_time += clock.elapsed().as_secs_f64();
        drop(req);
        self.last_call = now;
        self.call_times.push(now);
        self.metrics.planner_calls += 1;
        if result.timed_out {
            self.metrics.timeouts += 1;
        }
        let name = self.planner.name();
        self.log(
            "plan",
            name,
            format_args!("agents={} paths={} expansions={}", agents.len(), result.paths.len(), result.expansions),
        );
        let entries: Vec<GateEntry> = agents
            .iter()
            .map(|(a, fixed, _)| {
                let candidate = result.paths.get(&a.robot).filter(|p| {
                    p.first() == a.start
                        && p.start_time == a.start_time
                        && PathTiming::compute(p, &self.inst.graph, &a.profile).is_ok()
                });
                GateEntry {
                    robot: a.robot,
                    profile: a.profile,
                    fixed: fixed.clone(),
                    old: self.table.reservations_of(a.robot),
                    candidate: candidate.cloned(),
                }
            })
            .collect();
        let choices = commit_gate(&self.inst.graph, &base, &entries);
        let mut taken = Vec::new();
        for ((e, choice), (_, _, point)) in entries.iter().zip(&choices).zip(&agents) {
            if let GateChoice::Take(k) = *choice {
                self.table.remove_owner(e.robot);
                taken.push((e.robot.index(), prefix(e.candidate.as_ref().unwrap(), k), *point, e.fixed.clone()));
            }
        }
        for (i, path, point, fixed) in taken {
            let mut res = fixed;
            res.extend(reservations_with_final(&path, &self.inst.graph, &self.robots[i].profile));
            self.table.add(&res).expect("gate admitted a conflicting plan");
            let r = &self.robots[i];
            let (joined, progress) = match (point, &r.route) {
                (Some(point), Some(route)) => {
                    let joined = splice(&route.path, &route.timing, &point, &path);
                    let driving = route.driving && route.timing.hops[route.hop].to == point.step;
                    (joined, Some((route.hop, driving)))
                }
                _ => (path, None),
            };
            let (name, goal) = (r.name.clone(), self.inst.graph.waypoint(joined.last()).name.clone());
            self.log("path", &name, format_args!("to={goal} steps={}", joined.len()));
            self.set_route(i, joined, progress);
        }
    }

    fn resolve_deadlocks(&mut self) {
        let dwellers: Vec<Dwell> = self
            .robots
            .iter()
            .filter(|r| r.route.is_none() && !r.busy && r.in_queue.is_none())
            .filter(|r| r.front_move().is_some_and(|m| self.goal_of(m) != r.at))
            .map(|r| Dwell { robot: r.id, waypoint: r.at, heading: r.heading, since: r.since, profile: r.profile })
            .collect();
        if dwellers.is_empty() {
            return;
        }
        let mut blocked = NodeMask::from_nodes(self.inst.graph.len(), self.closed.iter().copied());
        for r in self.robots.iter().filter(|r| r.route.is_none() && r.front_move().is_none()) {
            blocked.insert(r.at);
        }
        for w in self.pod_nodes() {
            blocked.insert(w);
        }
        let Some(m) = resolve_deadlock(
            &self.inst.graph,
            &self.table,
            &dwellers,
            &blocked,
            self.now,
            &self.solver,
            &mut self.deadlock_rng,
        ) else {
            return;
        };
        let i = m.robot.index();
        let res = reservations_with_final(&m.path, &self.inst.graph, &self.robots[i].profile);
        self.table.remove_owner(m.robot);
        self.table.add(&res).expect("deadlock move checked against the table");
        self.metrics.deadlock_moves += 1;
        let (name, goal) = (self.robots[i].name.clone(), self.inst.graph.waypoint(m.goal).name.clone());
        self.log("evade", &name, format_args!("to={goal} wait={}", m.wait));
        self.robots[i].evading = true;
        self.set_route(i, m.path, None);
    }

    fn is_storage(&self, w: WaypointId) -> bool {
        self.inst.graph.waypoint(w).kind == WaypointKind::Storage
    }
}
