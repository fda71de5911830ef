//! Admission of planner output into the master reservation table.

use std::collections::HashMap;

use super::motion::prefix;
use crate::kinematics::KinematicProfile;
use crate::model::{RobotId, TimedPath, WarehouseGraph};
use crate::reservation::{Reservation, ReservationTable};
use crate::solvers::{overlaps, reservations_with_final};

/// One replanned robot as seen by the gate.
#[derive(Debug, Clone)]
pub struct GateEntry {
    pub robot: RobotId,
    pub profile: KinematicProfile,
    /// Reservations it cannot give up (the hop in progress).
    pub fixed: Vec<Reservation>,
    /// Its reservations in the master table before planning.
    pub old: Vec<Reservation>,
    /// New plan from the replan point, if the planner produced one.
    pub candidate: Option<TimedPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateChoice {
    /// Keep the previous plan.
    Keep,
    /// Take the candidate up to this stop step.
    Take(usize),
}

fn ladder(e: &GateEntry) -> Vec<GateChoice> {
    let mut out: Vec<GateChoice> = match &e.candidate {
        Some(c) => c.stop_indices().into_iter().rev().filter(|&k| k > 0).map(GateChoice::Take).collect(),
        None => Vec::new(),
    };
    out.push(GateChoice::Keep);
    out
}

fn reservations(e: &GateEntry, choice: GateChoice, graph: &WarehouseGraph) -> Vec<Reservation> {
    match choice {
        GateChoice::Keep => e.old.clone(),
        GateChoice::Take(k) => {
            let path = prefix(e.candidate.as_ref().unwrap(), k);
            let mut out = e.fixed.clone();
            out.extend(reservations_with_final(&path, graph, &e.profile));
            out
        }
    }
}

/// Picks for each entry the longest prefix of its candidate that fits with
/// `base` (everyone else) and with the choices of the other entries. The
/// earliest overlap is charged to the robot that entered the node later;
/// a charged robot falls back to its next shorter prefix and finally to its
/// previous plan. Previous plans are consistent with each other, so the
/// loop ends.
pub fn commit_gate(graph: &WarehouseGraph, base: &ReservationTable, entries: &[GateEntry]) -> Vec<GateChoice> {
    let ladders: Vec<Vec<GateChoice>> = entries.iter().map(ladder).collect();
    let mut level = vec![0usize; entries.len()];
    let mut res: Vec<Vec<Reservation>> =
        entries.iter().zip(&ladders).map(|(e, l)| reservations(e, l[0], graph)).collect();
    let index: HashMap<RobotId, usize> = entries.iter().enumerate().map(|(i, e)| (e.robot, i)).collect();
    let at_fallback = |level: &[usize], i: usize| level[i] + 1 == ladders[i].len();
    loop {
        let mut worst: Option<(f64, usize)> = None;
        for (i, list) in res.iter().enumerate() {
            for r in list {
                if let Some(c) = base.conflicts(r.waypoint, r.start, r.end, None).first() {
                    let t = r.start.max(c.start);
                    if worst.is_none_or(|(w, _)| t < w) {
                        worst = Some((t, i));
                    }
                }
            }
        }
        let all: Vec<Reservation> = res.iter().flatten().copied().collect();
        if let Some((a, b)) = overlaps(&all).first() {
            let t = a.start.max(b.start);
            if worst.is_none_or(|(w, _)| t < w) {
                let (ia, ib) = (index[&a.owner], index[&b.owner]);
                let later = if b.start > a.start || (b.start == a.start && ib > ia) { ib } else { ia };
                let other = if later == ia { ib } else { ia };
                let blamed = if at_fallback(&level, later) { other } else { later };
                worst = Some((t, blamed));
            }
        }
        let Some((_, i)) = worst else { break };
        if at_fallback(&level, i) {
            debug_assert!(false, "previous plans conflict");
            break;
        }
        level[i] += 1;
        res[i] = reservations(&entries[i], ladders[i][level[i]], graph);
    }
    level.iter().zip(&ladders).map(|(&l, ladder)| ladder[l]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PathStep, WaypointId, WaypointKind};

    fn line(n: usize) -> (WarehouseGraph, Vec<WaypointId>) {
        let mut g = WarehouseGraph::new();
        let t = g.add_tier("h0", n as f64, 2.0);
        let ids: Vec<_> = (0..n).map(|i| g.add_waypoint(format!("c{i}"), t, i as f64, 0.0, WaypointKind::Plain)).collect();
        for p in ids.windows(2) {
            g.add_bidirectional(p[0], p[1]);
        }
        (g, ids)
    }

    fn hold(robot: u32, at: WaypointId) -> Vec<Reservation> {
        vec![Reservation::final_at(at, 0.0, RobotId(robot))]
    }

    fn stops(robot: u32, nodes: &[WaypointId], heading: f64) -> TimedPath {
        TimedPath::new(RobotId(robot), 0.0, heading, nodes.iter().map(|&w| PathStep::stop(w)).collect())
    }

    fn entry(robot: u32, old: Vec<Reservation>, candidate: Option<TimedPath>) -> GateEntry {
        GateEntry { robot: RobotId(robot), profile: KinematicProfile::unit(1.0), fixed: Vec::new(), old, candidate }
    }

    #[test]
    fn consistent_candidates_pass_whole() {
        let (g, ids) = line(6);
        let entries = vec![
            entry(1, hold(1, ids[0]), Some(stops(1, &ids[0..3], 0.0))),
            entry(2, hold(2, ids[5]), Some(stops(2, &[ids[5], ids[4]], std::f64::consts::PI))),
        ];
        let choice = commit_gate(&g, &ReservationTable::new(), &entries);
        assert_eq!(choice, vec![GateChoice::Take(2), GateChoice::Take(1)]);
    }

    #[test]
    fn later_entrant_is_cut_back() {
        let (g, ids) = line(6);
        // both want c2; robot 2 gets there later and stops one node short
        let entries = vec![
            entry(1, hold(1, ids[0]), Some(stops(1, &ids[0..3], 0.0))),
            entry(2, hold(2, ids[4]), Some(stops(2, &[ids[4], ids[3], ids[2]], std::f64::consts::PI))),
        ];
        let choice = commit_gate(&g, &ReservationTable::new(), &entries);
        assert_eq!(choice[0], GateChoice::Take(2));
        assert_ne!(choice[1], GateChoice::Take(2));
        let mut table = ReservationTable::new();
        for (e, c) in entries.iter().zip(&choice) {
            table.add(&reservations(e, *c, &g)).unwrap();
        }
    }

    #[test]
    fn blocked_by_base_falls_back_to_the_old_plan() {
        let (g, ids) = line(4);
        let mut base = ReservationTable::new();
        base.add(&hold(9, ids[1])).unwrap();
        let entries = vec![entry(1, hold(1, ids[0]), Some(stops(1, &ids[0..3], 0.0)))];
        assert_eq!(commit_gate(&g, &base, &entries), vec![GateChoice::Keep]);
    }
}
