use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use super::interval_tree::{Interval, IntervalTree};
use crate::model::{RobotId, WaypointId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservation {
    pub waypoint: WaypointId,
    pub start: f64,
    pub end: f64,
    pub owner: RobotId,
    pub is_final: bool,
}

impl Reservation {
    pub fn new(waypoint: WaypointId, start: f64, end: f64, owner: RobotId) -> Self {
        Self { waypoint, start, end, owner, is_final: false }
    }

    pub fn final_at(waypoint: WaypointId, start: f64, owner: RobotId) -> Self {
        Self { waypoint, start, end: f64::INFINITY, owner, is_final: true }
    }

    fn interval(&self) -> Interval {
        Interval { start: self.start, end: self.end, owner: self.owner, is_final: self.is_final }
    }

    fn from_interval(waypoint: WaypointId, iv: &Interval) -> Self {
        Self { waypoint, start: iv.start, end: iv.end, owner: iv.owner, is_final: iv.is_final }
    }

    pub fn overlaps(&self, other: &Reservation) -> bool {
        self.waypoint == other.waypoint && self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Reservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.waypoint, self.start)?;
        if self.end.is_infinite() {
            f.write_str("inf")?;
        } else {
            write!(f, "{}", self.end)?;
        }
        write!(f, " {} {}", self.owner, if self.is_final { "final" } else { "-" })
    }
}

/// A rejected insertion: the requested interval and the reservation it hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservationConflict {
    pub requested: Reservation,
    pub blocking: Reservation,
}

impl fmt::Display for ReservationConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] blocked by [{}]", self.requested, self.blocking)
    }
}

impl std::error::Error for ReservationConflict {}

/// Earliest overlap between a candidate reservation set and the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conflict {
    pub waypoint: WaypointId,
    /// Start of the overlapping part.
    pub time: f64,
    /// Union of the two clashing intervals.
    pub merged: (f64, f64),
    pub owner: RobotId,
    pub blocking: RobotId,
}

/// Per-waypoint interval trees, created on first use.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    trees: BTreeMap<WaypointId, IntervalTree>,
    by_owner: BTreeMap<RobotId, BTreeSet<WaypointId>>,
    len: usize,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True iff no reservation of another owner than `ignoring` overlaps `[t1, t2)` at `w`.
    pub fn is_free(&self, w: WaypointId, t1: f64, t2: f64, ignoring: Option<RobotId>) -> bool {
        self.is_free_by(w, t1, t2, |o| Some(o) != ignoring)
    }

    /// Like [`is_free`](Self::is_free) with an arbitrary owner filter: only
    /// owners for which `counts` holds can block.
    pub fn is_free_by(&self, w: WaypointId, t1: f64, t2: f64, counts: impl Fn(RobotId) -> bool) -> bool {
        match self.trees.get(&w) {
            None => true,
            Some(t) => !t.any_overlap(t1, t2, |iv| counts(iv.owner)),
        }
    }

    pub fn conflicts(&self, w: WaypointId, t1: f64, t2: f64, ignoring: Option<RobotId>) -> Vec<Reservation> {
        match self.trees.get(&w) {
            None => Vec::new(),
            Some(t) => t
                .overlapping(t1, t2)
                .iter()
                .filter(|iv| Some(iv.owner) != ignoring)
                .map(|iv| Reservation::from_interval(w, iv))
                .collect(),
        }
    }

    /// Inserts all reservations or none. Overlaps with the owner's own
    /// reservations are allowed.
    pub fn add(&mut self, reservations: &[Reservation]) -> Result<(), ReservationConflict> {
        for r in reservations {
            if let Some(b) = self.conflicts(r.waypoint, r.start, r.end, Some(r.owner)).first() {
                return Err(ReservationConflict { requested: *r, blocking: *b });
            }
        }
        self.add_unchecked(reservations);
        Ok(())
    }

    /// Inserts without conflict checks (what-if bookkeeping).
    pub fn add_unchecked(&mut self, reservations: &[Reservation]) {
        for r in reservations {
            if !(r.end > r.start) {
                continue;
            }
            self.trees.entry(r.waypoint).or_default().insert(r.interval());
            self.by_owner.entry(r.owner).or_default().insert(r.waypoint);
            self.len += 1;
        }
    }

    pub fn remove(&mut self, r: &Reservation) -> bool {
        let Some(t) = self.trees.get_mut(&r.waypoint) else { return false };
        let removed = t.remove(&r.interval());
        if removed {
            self.len -= 1;
            if !t.to_vec().iter().any(|iv| iv.owner == r.owner) {
                if let Some(ws) = self.by_owner.get_mut(&r.owner) {
                    ws.remove(&r.waypoint);
                }
            }
        }
        removed
    }

    /// Drops reservations of `owner` matching `pred`; returns them.
    pub fn remove_where(&mut self, owner: RobotId, pred: impl Fn(&Reservation) -> bool) -> Vec<Reservation> {
        let Some(ws) = self.by_owner.get(&owner).cloned() else { return Vec::new() };
        let mut out = Vec::new();
        for w in ws {
            let tree = self.trees.get_mut(&w).expect("owner index out of sync");
            let dropped = tree.retain(|iv| !(iv.owner == owner && pred(&Reservation::from_interval(w, iv))));
            self.len -= dropped.len();
            out.extend(dropped.iter().map(|iv| Reservation::from_interval(w, iv)));
            if !tree.to_vec().iter().any(|iv| iv.owner == owner) {
                self.by_owner.get_mut(&owner).unwrap().remove(&w);
            }
        }
        out
    }

    pub fn remove_owner(&mut self, owner: RobotId) -> Vec<Reservation> {
        self.remove_where(owner, |_| true)
    }

    pub fn add_final(&mut self, owner: RobotId, w: WaypointId, from: f64) -> Result<(), ReservationConflict> {
        self.add(&[Reservation::final_at(w, from, owner)])
    }

    pub fn remove_final(&mut self, owner: RobotId) -> Vec<Reservation> {
        self.remove_where(owner, |r| r.is_final)
    }

    pub fn final_of(&self, owner: RobotId) -> Option<Reservation> {
        self.reservations_of(owner).into_iter().find(|r| r.is_final)
    }

    pub fn reservations_of(&self, owner: RobotId) -> Vec<Reservation> {
        let Some(ws) = self.by_owner.get(&owner) else { return Vec::new() };
        let mut out: Vec<_> = ws
            .iter()
            .flat_map(|w| {
                self.trees[w].to_vec().into_iter().filter(|iv| iv.owner == owner).map(|iv| Reservation::from_interval(*w, &iv))
            })
            .collect();
        out.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.waypoint.cmp(&b.waypoint)));
        out
    }

    pub fn owners(&self) -> impl Iterator<Item = RobotId> + '_ {
        self.by_owner.iter().filter(|(_, ws)| !ws.is_empty()).map(|(o, _)| *o)
    }

    /// Drops everything that ended by `now`, then every reservation starting
    /// at or after `now` owned by a robot in `replanning`.
    pub fn reorganize(&mut self, now: f64, replanning: &BTreeSet<RobotId>) {
        let owners: Vec<RobotId> = self.by_owner.keys().copied().collect();
        for o in owners {
            let needs = replanning.contains(&o);
            self.remove_where(o, |r| r.end <= now || (needs && r.start >= now));
        }
    }

    /// Earliest overlap of `candidate` (each checked against other owners);
    /// ties broken by waypoint id then blocking owner.
    pub fn first_conflict(&self, candidate: &[Reservation]) -> Option<Conflict> {
        let mut best: Option<Conflict> = None;
        for r in candidate {
            for b in self.conflicts(r.waypoint, r.start, r.end, Some(r.owner)) {
                let c = Conflict {
                    waypoint: r.waypoint,
                    time: r.start.max(b.start),
                    merged: (r.start.min(b.start), r.end.max(b.end)),
                    owner: r.owner,
                    blocking: b.owner,
                };
                let better = match &best {
                    None => true,
                    Some(x) => c
                        .time
                        .total_cmp(&x.time)
                        .then(c.waypoint.cmp(&x.waypoint))
                        .then(c.blocking.cmp(&x.blocking))
                        .is_lt(),
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    pub fn iter(&self) -> impl Iterator<Item = Reservation> + '_ {
        self.trees.iter().flat_map(|(w, t)| t.to_vec().into_iter().map(move |iv| Reservation::from_interval(*w, &iv)))
    }

    /// One `<waypoint> <t_s> <t_e|inf> <owner> <final?>` line per reservation,
    /// sorted by waypoint, start and owner.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in self.iter() {
            let _ = writeln!(out, "{r}");
        }
        out
    }
}
