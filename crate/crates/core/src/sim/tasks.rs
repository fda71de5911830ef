//! Task state of the robots: subtask progress, station service, task
//! allocation and the queue manager.

use rand::seq::SliceRandom;

use super::{run_path, Claim, Event, Simulation};
use crate::model::{decompose_task, PodId, PodOwner, StationId, StationKind, SubtaskKind, Task, TaskKind, WaypointId};
use crate::solvers::reservations_with_final;

impl Simulation {
    pub(super) fn give_task(&mut self, i: usize, task: Task, claim: Claim) {
        let r = &mut self.robots[i];
        if let Some(spot) = r.spot.take() {
            self.spots.remove(&spot);
        }
        if let Some(p) = task.pod {
            self.pod_claimed[p.index()] = true;
        }
        if matches!(task.kind, TaskKind::Park | TaskKind::Rest) {
            self.spots.insert(task.destination);
            self.robots[i].spot = Some(task.destination);
        }
        let r = &mut self.robots[i];
        r.subtasks = decompose_task(&task, r.carrying).into();
        r.claim = claim;
        let kind = format!("{:?}", task.kind).to_lowercase();
        let dest = self.inst.graph.waypoint(task.destination).name.clone();
        let units = task.units;
        self.robots[i].task = Some(task);
        let name = self.robots[i].name.clone();
        self.log("task", &name, format_args!("{kind} to={dest} units={units}"));
    }

    fn finish_task(&mut self, i: usize) {
        let r = &mut self.robots[i];
        let Some(task) = r.task.take() else { return };
        if let Some(p) = task.pod {
            self.pod_claimed[p.index()] = false;
        }
        if task.kind == TaskKind::Park {
            self.spots.remove(&task.destination);
            self.robots[i].spot = None;
        }
        let name = self.robots[i].name.clone();
        self.log("done", &name, format_args!("{:?}", task.kind));
    }

    /// Completes arrived moves and starts due services.
    pub(super) fn advance_tasks(&mut self) {
        for i in 0..self.robots.len() {
            loop {
                let r = &self.robots[i];
                if r.busy || r.route.is_some() {
                    break;
                }
                let Some(&st) = r.subtasks.front() else {
                    if r.task.is_some() {
                        self.finish_task(i);
                    }
                    break;
                };
                if st.kind == SubtaskKind::Move {
                    if r.move_since.is_none() {
                        self.robots[i].move_since = Some(self.now);
                    }
                    let r = &self.robots[i];
                    if r.at == st.at {
                        self.complete_move(i);
                        continue;
                    }
                    if let Some(s) = self.gate_of[st.at.index()] {
                        if r.in_queue.is_none() && self.inst.station(s).contains(r.at) {
                            self.robots[i].in_queue = Some(s);
                            let (name, st) = (self.robots[i].name.clone(), self.inst.station(s).name.clone());
                            self.log("queue", &name, format_args!("{st}"));
                        }
                    }
                    break;
                }
                if r.at != st.at {
                    break;
                }
                let duration = match st.kind {
                    SubtaskKind::Put | SubtaskKind::Get => {
                        let s = self.inst.station(st.station.expect("station subtask"));
                        let d = st.units as f64 * s.handle_time;
                        self.metrics.station_busy += d.min(self.config.horizon - self.now).max(0.0);
                        d
                    }
                    _ => self.inst.times.pod_handling,
                };
                let r = &mut self.robots[i];
                r.busy = true;
                let gen = r.gen;
                self.push(self.now + duration, Event::Service { robot: i, gen });
                let name = self.robots[i].name.clone();
                self.log("service", &name, format_args!("{} {}", st.kind.as_str(), duration));
                break;
            }
        }
    }

    fn complete_move(&mut self, i: usize) {
        let now = self.now;
        let r = &mut self.robots[i];
        r.subtasks.pop_front();
        if let Some(since) = r.move_since.take() {
            self.metrics.completed_moves += 1;
            self.metrics.longest_move = self.metrics.longest_move.max(now - since);
        }
        if let Some((start, length)) = r.trip.take() {
            self.metrics.trips += 1;
            self.metrics.trip_length += length;
            self.metrics.trip_time += r.since - start;
        }
    }

    pub(super) fn on_service(&mut self, i: usize, gen: u64) {
        let r = &mut self.robots[i];
        if !r.busy || r.gen != gen {
            return;
        }
        r.busy = false;
        let st = r.subtasks.pop_front().expect("service without subtask");
        let id = r.id;
        match st.kind {
            SubtaskKind::Pickup => {
                let p = st.pod.expect("pickup names its pod");
                self.stored[st.at.index()] = None;
                self.pods[p.index()] = PodOwner::Robot(id);
                self.robots[i].carrying = Some(p);
            }
            SubtaskKind::Setdown => {
                let p = st.pod.expect("setdown names its pod");
                self.stored[st.at.index()] = Some(p);
                self.pods[p.index()] = PodOwner::Storage(st.at);
                self.robots[i].carrying = None;
            }
            SubtaskKind::Put | SubtaskKind::Get => {
                let claim = std::mem::take(&mut self.robots[i].claim);
                self.metrics.handled_units += st.units as u64;
                self.controllers.complete(&claim);
                self.robots[i].in_queue = None;
            }
            SubtaskKind::Move => unreachable!("moves are not serviced"),
        }
        let name = self.robots[i].name.clone();
        self.log("served", &name, format_args!("{} {}", st.kind.as_str(), st.units));
        if self.robots[i].subtasks.is_empty() {
            self.finish_task(i);
        }
    }

    fn assigned(&self, s: StationId) -> usize {
        self.robots.iter().filter(|r| r.task.as_ref().is_some_and(|t| t.station == Some(s))).count()
    }

    fn free_pods(&self) -> Vec<(PodId, WaypointId)> {
        self.pods
            .iter()
            .enumerate()
            .filter(|(p, _)| !self.pod_claimed[*p])
            .filter_map(|(p, o)| match *o {
                PodOwner::Storage(w) => Some((PodId(p as u32), w)),
                PodOwner::Robot(_) => None,
            })
            .collect()
    }

    fn free_spots(&self) -> Vec<WaypointId> {
        let standing: Vec<WaypointId> = self.robots.iter().filter(|r| r.route.is_none()).map(|r| r.at).collect();
        self.storage
            .iter()
            .copied()
            .filter(|w| self.stored[w.index()].is_none() && !self.spots.contains(w) && !standing.contains(w))
            .collect()
    }

    /// Gives every robot without a task its next one. Stations are served
    /// least-staffed first, pick stations before replenishment stations on
    /// ties; a station takes at most one robot per queue slot plus the gate.
    pub(super) fn allocate(&mut self) {
        for i in 0..self.robots.len() {
            let r = &self.robots[i];
            if r.task.is_some() || r.busy || r.route.is_some() {
                continue;
            }
            let mut stations: Vec<(usize, u8, StationId)> = self
                .inst
                .stations
                .iter()
                .map(|s| (self.assigned(s.id), u8::from(s.kind != StationKind::Pick), s.id))
                .filter(|&(n, _, s)| n < self.inst.station(s).queue.len() + 1)
                .collect();
            stations.sort();
            let at = r.at;
            let graph = &self.inst.graph;
            let nearest = |cands: Vec<(PodId, WaypointId, usize)>| {
                cands.into_iter().min_by(|a, b| {
                    b.2.cmp(&a.2).then(graph.distance(at, a.1).total_cmp(&graph.distance(at, b.1))).then(a.0.cmp(&b.0))
                })
            };
            let mut chosen = None;
            if let Some(p) = r.carrying {
                for &(_, _, s) in &stations {
                    let n = match self.inst.station(s).kind {
                        StationKind::Pick => self.controllers.pick_demand(s, p),
                        StationKind::Replenishment => self.controllers.repl_demand(s).get(&p).copied().unwrap_or(0),
                    };
                    if n > 0 {
                        chosen = Some((s, p, at));
                        break;
                    }
                }
            } else {
                let free = self.free_pods();
                for &(_, _, s) in &stations {
                    let cands: Vec<(PodId, WaypointId, usize)> = match self.inst.station(s).kind {
                        StationKind::Pick => {
                            free.iter().map(|&(p, w)| (p, w, self.controllers.pick_demand(s, p))).collect()
                        }
                        StationKind::Replenishment => {
                            let demand = self.controllers.repl_demand(s);
                            free.iter().map(|&(p, w)| (p, w, demand.get(&p).copied().unwrap_or(0))).collect()
                        }
                    };
                    if let Some((p, w, n)) = nearest(cands) {
                        if n > 0 {
                            chosen = Some((s, p, w));
                            break;
                        }
                    }
                }
            }
            if let Some((s, p, w)) = chosen {
                let station = self.inst.station(s);
                let (kind, gate) = (station.kind, station.gate);
                let claim = match kind {
                    StationKind::Pick => self.controllers.claim_pick(s, p),
                    StationKind::Replenishment => self.controllers.claim_repl(s, p),
                };
                let task = match kind {
                    StationKind::Pick => Task::extract(p, w, s, gate, claim.units()),
                    StationKind::Replenishment => Task::insert(p, w, s, gate, claim.units()),
                };
                self.give_task(i, task, claim);
                continue;
            }
            let r = &self.robots[i];
            if let Some(p) = r.carrying {
                if let Some(&spot) = self.free_spots().choose(&mut self.alloc_rng) {
                    self.give_task(i, Task::park(p, spot), Claim::default());
                }
                continue;
            }
            let resting = self.is_storage(r.at)
                && self.stored[r.at.index()].is_none()
                && (r.spot == Some(r.at) || !self.spots.contains(&r.at));
            if !resting {
                let at = r.at;
                let spot = self.free_spots().into_iter().min_by(|&a, &b| {
                    self.inst.graph.distance(at, a).total_cmp(&self.inst.graph.distance(at, b)).then(a.cmp(&b))
                });
                if let Some(spot) = spot {
                    self.give_task(i, Task::rest(spot), Claim::default());
                }
            } else if self.robots[i].spot.is_none() {
                self.spots.insert(r.at);
                self.robots[i].spot = Some(self.robots[i].at);
            }
        }
    }

    /// Moves queued robots towards the gate, each as far as the free slots
    /// ahead of it reach.
    pub(super) fn manage_queues(&mut self) {
        for s in 0..self.inst.stations.len() {
            let station = &self.inst.stations[s];
            let mut lane = station.queue.clone();
            lane.push(station.gate);
            let mut members: Vec<(usize, usize)> = self
                .robots
                .iter()
                .enumerate()
                .filter(|(_, r)| r.in_queue == Some(station.id) && r.route.is_none() && !r.busy)
                .filter(|(_, r)| r.front_move().is_some())
                .filter_map(|(i, r)| lane.iter().position(|&w| w == r.at).map(|k| (k, i)))
                .collect();
            members.sort_by(|a, b| b.cmp(a));
            for (k, i) in members {
                let r = &self.robots[i];
                let mut best = None;
                for j in k + 1..lane.len() {
                    let path = run_path(&self.inst.graph, r.id, self.now, r.heading, &lane[k..=j]);
                    let res = reservations_with_final(&path, &self.inst.graph, &r.profile);
                    if !res.iter().all(|x| self.table.is_free(x.waypoint, x.start, x.end, Some(r.id))) {
                        break;
                    }
                    best = Some((path, res));
                }
                let Some((path, res)) = best else { continue };
                let id = r.id;
                self.table.remove_owner(id);
                self.table.add(&res).expect("queue move checked against the table");
                let name = self.robots[i].name.clone();
                let to = self.inst.graph.waypoint(path.last()).name.clone();
                self.log("advance", &name, format_args!("to={to}"));
                self.set_route(i, path, None);
            }
        }
    }
}
