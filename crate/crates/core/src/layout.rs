//! Generator for the block-and-aisle warehouse layout family: storage blocks
//! of 4 x 2 waypoints separated by one-way aisles, a multi-lane hall ring
//! around the inventory and station queues outside the hall.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::KinematicProfile;
use crate::model::{
    Instance, PodId, PodOwner, PodSpec, RobotId, RobotSpec, ServiceTimes, Station, StationId, StationKind,
    WarehouseGraph, WaypointId, WaypointKind,
};

/// Sides of the hall used for stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Replenishment stations west, pick stations east; overflow wraps onto
    /// the north and south sides.
    Split,
    /// Every station on the longest side.
    SingleSide,
    /// Stations spread round-robin over all four sides.
    Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutParams {
    pub tiers: usize,
    /// Storage blocks per tier along x and y.
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Blocks without storage, as (column, row).
    pub holes: Vec<(usize, usize)>,
    /// Lanes of the hall ring.
    pub hall_width: usize,
    /// Queue slots in front of each gate.
    pub buffer_depth: usize,
    pub replenishment: usize,
    pub pick: usize,
    pub placement: Placement,
    pub robots: usize,
    /// Pod count; `fill` of the storage locations when absent.
    pub pods: Option<usize>,
    pub fill: f64,
    /// Elevators linking all tiers, one port per tier each.
    pub elevators: usize,
    pub elevator_transit: f64,
    /// Edge length in meters.
    pub pitch: f64,
    pub robot_radius: f64,
    pub pod_radius: f64,
    pub times: ServiceTimes,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            tiers: 1,
            blocks_x: 3,
            blocks_y: 3,
            holes: Vec::new(),
            hall_width: 2,
            buffer_depth: 4,
            replenishment: 1,
            pick: 1,
            placement: Placement::Split,
            robots: 4,
            pods: None,
            fill: 0.85,
            elevators: 0,
            elevator_transit: 10.0,
            pitch: 1.0,
            robot_radius: 0.35,
            pod_radius: 0.45,
            times: ServiceTimes::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("invalid layout parameters: {0}")]
    Invalid(String),
    #[error("stations exceed perimeter capacity: {needed} slots needed, {available} available")]
    Capacity { needed: usize, available: usize },
}

impl LayoutParams {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |m: &str| Err(LayoutError::Invalid(m.into()));
        if self.tiers == 0 || self.blocks_x == 0 || self.blocks_y == 0 {
            return bad("tiers and block counts must be positive");
        }
        if self.hall_width == 0 || self.buffer_depth == 0 {
            return bad("hall width and buffer depth must be positive");
        }
        if self.robots == 0 || self.replenishment + self.pick == 0 {
            return bad("robots and stations must be positive");
        }
        if !(self.fill > 0.0 && self.fill <= 1.0) {
            return bad("fill fraction must lie in (0, 1]");
        }
        if self.pitch < self.robot_radius.max(self.pod_radius) * 2.0 {
            return bad("pitch too short for the entity radii");
        }
        if self.tiers > 1 && self.elevators == 0 {
            return bad("several tiers need an elevator");
        }
        Ok(())
    }

    /// Inventory size in waypoints per tier.
    fn inventory(&self) -> (i64, i64) {
        (5 * self.blocks_x as i64 + 1, 3 * self.blocks_y as i64 + 1)
    }
}

/// Preset names: the ten reference instances plus two desk-scale ones.
pub const PRESET_NAMES: [&str; 12] = [
    "1-1-3-48-795",
    "1-4-4-32-550",
    "1-4-16-144-1951",
    "1-6-14-106-1909",
    "1-6-16-146-2726",
    "1-8-8-64-1040",
    "1-8-8-96-1502",
    "1-12-20-128-1965",
    "2-8-8-64-1100",
    "3-12-12-96-1650",
    "desk",
    "desk-crowded",
];

pub fn preset(name: &str) -> Option<LayoutParams> {
    let base = |tiers, bx, by, repl, pick, robots, pods| LayoutParams {
        tiers,
        blocks_x: bx,
        blocks_y: by,
        replenishment: repl,
        pick,
        robots,
        pods: Some(pods),
        elevators: usize::from(tiers > 1) * 2,
        ..LayoutParams::default()
    };
    Some(match name {
        "1-1-3-48-795" => LayoutParams { placement: Placement::SingleSide, ..base(1, 13, 9, 1, 3, 48, 795) },
        "1-4-4-32-550" => base(1, 9, 9, 4, 4, 32, 550),
        "1-4-16-144-1951" => LayoutParams { placement: Placement::SingleSide, ..base(1, 41, 7, 4, 16, 144, 1951) },
        "1-6-14-106-1909" => {
            // L shape: the north-east quadrant is left empty
            let holes = (14..25).flat_map(|x| (9..13).map(move |y| (x, y))).collect();
            LayoutParams { holes, ..base(1, 25, 13, 6, 14, 106, 1909) }
        }
        "1-6-16-146-2726" => {
            // four 2 x 5 obstacles inside the inventory
            let holes = [(4, 4), (15, 4), (4, 12), (15, 12)]
                .into_iter()
                .flat_map(|(x0, y0)| (x0..x0 + 2).flat_map(move |x| (y0..y0 + 5).map(move |y| (x, y))))
                .collect();
            LayoutParams { holes, ..base(1, 21, 21, 6, 16, 146, 2726) }
        }
        "1-8-8-64-1040" => base(1, 17, 9, 8, 8, 64, 1040),
        "1-8-8-96-1502" => base(1, 17, 13, 8, 8, 96, 1502),
        "1-12-20-128-1965" => LayoutParams { placement: Placement::Ring, ..base(1, 17, 17, 12, 20, 128, 1965) },
        "2-8-8-64-1100" => base(2, 9, 9, 8, 8, 64, 1100),
        "3-12-12-96-1650" => base(3, 9, 9, 12, 12, 96, 1650),
        "desk" => base(1, 6, 3, 2, 2, 8, 120),
        "desk-crowded" => base(1, 6, 3, 2, 2, 24, 120),
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Side {
    West,
    East,
    South,
    North,
}

/// Per-tier geometry in inventory coordinates: the inventory spans
/// `[0, w) x [0, h)`, hall lane k runs at distance k + 1 around it.
struct Frame {
    w: i64,
    h: i64,
    hall: i64,
    depth: i64,
}

impl Frame {
    /// Along-side coordinate range of the outer lane.
    fn span(&self, side: Side) -> (i64, i64) {
        match side {
            Side::West | Side::East => (-self.hall, self.h - 1 + self.hall),
            Side::South | Side::North => (-self.hall, self.w - 1 + self.hall),
        }
    }

    fn capacity(&self, side: Side) -> usize {
        let (lo, hi) = self.span(side);
        (0..).take_while(|&i| self.slot_start(side, i) + self.depth < hi && lo < hi).count()
    }

    fn slot_start(&self, side: Side, i: usize) -> i64 {
        self.span(side).0 + 1 + i as i64 * (self.depth + 2)
    }

    /// Grid cell at `along` on the outer lane (`out = 0`) or just outside it (`out = 1`).
    fn cell(&self, side: Side, along: i64, out: i64) -> (i64, i64) {
        match side {
            Side::West => (-self.hall - out, along),
            Side::East => (self.w - 1 + self.hall + out, along),
            Side::South => (along, -self.hall - out),
            Side::North => (along, self.h - 1 + self.hall + out),
        }
    }
}

struct TierBuilder<'a> {
    graph: &'a mut WarehouseGraph,
    tier: crate::model::TierId,
    index: usize,
    shift: i64,
    pitch: f64,
    cells: HashMap<(i64, i64), WaypointId>,
}

impl TierBuilder<'_> {
    fn add(&mut self, (x, y): (i64, i64), kind: WaypointKind) -> WaypointId {
        let name = format!("w{}_{}_{}", self.index, x + self.shift, y + self.shift);
        let (px, py) = ((x + self.shift) as f64 * self.pitch, (y + self.shift) as f64 * self.pitch);
        let id = self.graph.add_waypoint(name, self.tier, px, py, kind);
        self.cells.insert((x, y), id);
        id
    }

    fn at(&self, c: (i64, i64)) -> Option<WaypointId> {
        self.cells.get(&c).copied()
    }

    fn link(&mut self, a: (i64, i64), b: (i64, i64)) {
        if let (Some(u), Some(v)) = (self.at(a), self.at(b)) {
            self.graph.add_edge(u, v);
        }
    }
}

/// Assigns each station of a tier to a side slot. Returns (kind, side, slot).
fn allocate(
    params: &LayoutParams,
    frame: &Frame,
    kinds: &[StationKind],
) -> Result<Vec<(StationKind, Side, usize)>, LayoutError> {
    let mut capacity: HashMap<Side, usize> =
        [Side::West, Side::East, Side::South, Side::North].into_iter().map(|s| (s, frame.capacity(s))).collect();
    let north = capacity[&Side::North];
    if north < params.elevators {
        return Err(LayoutError::Capacity { needed: params.elevators, available: north });
    }
    *capacity.get_mut(&Side::North).unwrap() -= params.elevators;
    let total: usize = capacity.values().sum();
    let mut used: HashMap<Side, usize> = HashMap::new();
    let mut out = Vec::new();
    let longest = if frame.w >= frame.h { Side::South } else { Side::East };
    for (i, &kind) in kinds.iter().enumerate() {
        let order: Vec<Side> = match (params.placement, kind) {
            (Placement::Split, StationKind::Replenishment) => vec![Side::West, Side::North, Side::South, Side::East],
            (Placement::Split, StationKind::Pick) => vec![Side::East, Side::South, Side::North, Side::West],
            (Placement::SingleSide, _) => vec![longest],
            (Placement::Ring, _) => {
                let all = [Side::West, Side::East, Side::South, Side::North];
                (0..4).map(|k| all[(i + k) % 4]).collect()
            }
        };
        let side = order
            .into_iter()
            .find(|s| used.get(s).copied().unwrap_or(0) < capacity[s])
            .ok_or(LayoutError::Capacity { needed: kinds.len(), available: total })?;
        let slot = used.entry(side).or_default();
        out.push((kind, side, *slot));
        *slot += 1;
    }
    Ok(out)
}

/// Builds an instance; a pure function of `params`.
pub fn generate(params: &LayoutParams) -> Result<Instance, LayoutError> {
    params.validate()?;
    let (w, h) = params.inventory();
    let hall = params.hall_width as i64;
    let frame = Frame { w, h, hall, depth: params.buffer_depth as i64 };
    let shift = hall + 1;
    let mut graph = WarehouseGraph::new();
    let mut stations = Vec::new();
    let mut ports: Vec<Vec<WaypointId>> = vec![Vec::new(); params.elevators];
    let mut per_tier: Vec<Vec<StationKind>> = vec![Vec::new(); params.tiers];
    // interleave kinds so that ring placement alternates them
    let mut kinds = Vec::new();
    for i in 0..params.replenishment.max(params.pick) {
        if i < params.pick {
            kinds.push(StationKind::Pick);
        }
        if i < params.replenishment {
            kinds.push(StationKind::Replenishment);
        }
    }
    let mut counters = [0usize; 2];
    for kind in kinds {
        let k = usize::from(kind == StationKind::Pick);
        per_tier[counters[k] % params.tiers].push(kind);
        counters[k] += 1;
    }
    let holes: std::collections::HashSet<(usize, usize)> = params.holes.iter().copied().collect();
    for t in 0..params.tiers {
        let extent = ((w - 1 + 2 * shift) as f64) * params.pitch;
        let width = ((h - 1 + 2 * shift) as f64) * params.pitch;
        let tier = graph.add_tier(format!("h{t}"), extent, width);
        let mut b = TierBuilder { graph: &mut graph, tier, index: t, shift, pitch: params.pitch, cells: HashMap::new() };
        // inventory
        for y in 0..h {
            for x in 0..w {
                if x % 5 == 0 || y % 3 == 0 {
                    b.add((x, y), WaypointKind::Plain);
                } else if !holes.contains(&((x / 5) as usize, (y / 3) as usize)) {
                    b.add((x, y), WaypointKind::Storage);
                }
            }
        }
        // hall lanes
        let mut lanes = Vec::new();
        for k in 0..hall {
            let (x0, x1, y0, y1) = (-1 - k, w + k, -1 - k, h + k);
            let mut ring = Vec::new();
            ring.extend((x0..x1).map(|x| (x, y0)));
            ring.extend((y0..y1).map(|y| (x1, y)));
            ring.extend((x0 + 1..=x1).rev().map(|x| (x, y1)));
            ring.extend((y0 + 1..=y1).rev().map(|y| (x0, y)));
            for &c in &ring {
                b.add(c, WaypointKind::Plain);
            }
            lanes.push(ring);
        }
        // one-way aisles
        for i in 0..=params.blocks_x as i64 {
            let x = 5 * i;
            for y in 0..h - 1 {
                if i % 2 == 0 {
                    b.link((x, y), (x, y + 1));
                } else {
                    b.link((x, y + 1), (x, y));
                }
            }
            let (bottom, top) = (((x, -1), (x, 0)), ((x, h - 1), (x, h)));
            if i % 2 == 0 {
                b.link(bottom.0, bottom.1);
                b.link(top.0, top.1);
            } else {
                b.link(bottom.1, bottom.0);
                b.link(top.1, top.0);
            }
        }
        for j in 0..=params.blocks_y as i64 {
            let y = 3 * j;
            for x in 0..w - 1 {
                if j % 2 == 0 {
                    b.link((x, y), (x + 1, y));
                } else {
                    b.link((x + 1, y), (x, y));
                }
            }
            let (left, right) = (((-1, y), (0, y)), ((w - 1, y), (w, y)));
            if j % 2 == 0 {
                b.link(left.0, left.1);
                b.link(right.0, right.1);
            } else {
                b.link(left.1, left.0);
                b.link(right.1, right.0);
            }
        }
        // storage is open in every direction
        for y in 0..h {
            for x in 0..w {
                if x % 5 == 0 || y % 3 == 0 || b.at((x, y)).is_none() {
                    continue;
                }
                for n in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                    b.link((x, y), n);
                    b.link(n, (x, y));
                }
            }
        }
        // lanes alternate direction; lane changes every other node
        for (k, ring) in lanes.iter().enumerate() {
            let n = ring.len();
            for i in 0..n {
                let (a, c) = (ring[i], ring[(i + 1) % n]);
                if k % 2 == 0 {
                    b.link(a, c);
                } else {
                    b.link(c, a);
                }
            }
            if k + 1 == lanes.len() {
                continue;
            }
            let k = k as i64;
            for &(x, y) in ring {
                let (out, along) = if y == -1 - k && x > -1 - k && x < w + k {
                    ((x, y - 1), x)
                } else if y == h + k && x > -1 - k && x < w + k {
                    ((x, y + 1), x)
                } else if x == -1 - k && y > -1 - k && y < h + k {
                    ((x - 1, y), y)
                } else if x == w + k && y > -1 - k && y < h + k {
                    ((x + 1, y), y)
                } else {
                    continue;
                };
                match along.rem_euclid(4) {
                    0 => b.link((x, y), out),
                    2 => b.link(out, (x, y)),
                    _ => {}
                }
            }
        }
        // stations: entry from the outer lane into the tail, the gate exits to it
        for (kind, side, slot) in allocate(params, &frame, &per_tier[t])? {
            let a0 = frame.slot_start(side, slot);
            let nodes: Vec<(i64, i64)> = (0..=frame.depth).map(|i| frame.cell(side, a0 + i, 1)).collect();
            let mut queue = Vec::new();
            for (i, &c) in nodes.iter().enumerate() {
                let kind = if i as i64 == frame.depth { WaypointKind::StationGate } else { WaypointKind::Queue };
                queue.push(b.add(c, kind));
            }
            for p in nodes.windows(2) {
                b.link(p[0], p[1]);
            }
            b.link(frame.cell(side, a0, 0), nodes[0]);
            b.link(nodes[frame.depth as usize], frame.cell(side, a0 + frame.depth, 0));
            let gate = queue.pop().unwrap();
            let id = StationId(stations.len() as u32);
            let handle_time = match kind {
                StationKind::Pick => params.times.pick_per_unit,
                StationKind::Replenishment => params.times.replenish_per_unit,
            };
            stations.push(Station { id, name: format!("m{}", id.0), kind, gate, handle_time, queue });
        }
        // elevator ports take the last north slots
        let north = frame.capacity(Side::North);
        for (e, list) in ports.iter_mut().enumerate() {
            let a0 = frame.slot_start(Side::North, north - 1 - e);
            let port = b.add(frame.cell(Side::North, a0, 1), WaypointKind::ElevatorPort);
            b.link(frame.cell(Side::North, a0, 0), frame.cell(Side::North, a0, 1));
            b.link(frame.cell(Side::North, a0, 1), frame.cell(Side::North, a0, 0));
            list.push(port);
        }
    }
    for (e, list) in ports.into_iter().enumerate() {
        graph.add_elevator(format!("l{e}"), params.elevator_transit, list);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut storage: Vec<WaypointId> =
        graph.waypoints().filter(|(_, w)| w.kind == WaypointKind::Storage).map(|(id, _)| id).collect();
    let pod_count = params.pods.unwrap_or_else(|| (params.fill * storage.len() as f64).round() as usize);
    if pod_count > storage.len() {
        return Err(LayoutError::Invalid(format!("{pod_count} pods for {} storage locations", storage.len())));
    }
    storage.shuffle(&mut rng);
    let pods = storage[..pod_count]
        .iter()
        .enumerate()
        .map(|(i, &at)| PodSpec {
            id: PodId(i as u32),
            name: format!("b{i}"),
            radius: params.pod_radius,
            owner: PodOwner::Storage(at),
        })
        .collect();
    let mut free: Vec<WaypointId> =
        graph.waypoints().filter(|(_, w)| w.kind == WaypointKind::Plain).map(|(id, _)| id).collect();
    if params.robots > free.len() {
        return Err(LayoutError::Invalid("more robots than free waypoints".into()));
    }
    free.shuffle(&mut rng);
    let profile = KinematicProfile { radius: params.robot_radius, ..KinematicProfile::warehouse_default() };
    let robots = free[..params.robots]
        .iter()
        .enumerate()
        .map(|(i, &home)| RobotSpec { id: RobotId(i as u32), name: format!("r{i}"), profile, home, heading: 0.0 })
        .collect();
    Ok(Instance {
        name: format!("{}-{}-{}-{}-{}", params.tiers, params.replenishment, params.pick, params.robots, pod_count),
        graph,
        robots,
        pods,
        stations,
        times: params.times,
    })
}

/// Connectivity and aisle-direction findings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowReport {
    pub unladen_connected: bool,
    /// The graph without storage nodes is strongly connected and every
    /// storage node has a way in from and out to it.
    pub laden_connected: bool,
    /// Plain waypoint pairs linked in both directions.
    pub head_on: Vec<(WaypointId, WaypointId)>,
}

impl FlowReport {
    pub fn passes(&self) -> bool {
        self.unladen_connected && self.laden_connected && self.head_on.is_empty()
    }
}

fn spread(graph: &WarehouseGraph, start: WaypointId, keep: &[bool], forward: bool) -> Vec<bool> {
    let mut seen = vec![false; graph.len()];
    seen[start.index()] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let edges = if forward { graph.out_edges(u) } else { graph.in_edges(u) };
        let next = edges.iter().map(|e| e.to).chain(graph.elevator_links(u).into_iter().map(|(p, _)| p));
        for v in next.collect::<Vec<_>>() {
            if keep[v.index()] && !seen[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn strongly_connected(graph: &WarehouseGraph, keep: &[bool]) -> bool {
    let Some(start) = graph.ids().find(|w| keep[w.index()]) else { return true };
    [true, false].into_iter().all(|forward| {
        let seen = spread(graph, start, keep, forward);
        keep.iter().zip(&seen).all(|(k, s)| !k || *s)
    })
}

pub fn check_flow(inst: &Instance) -> FlowReport {
    let g = &inst.graph;
    let all = vec![true; g.len()];
    let is_storage = |w: WaypointId| g.waypoint(w).kind == WaypointKind::Storage;
    let open: Vec<bool> = g.ids().map(|w| !is_storage(w)).collect();
    let storage_linked = g.ids().filter(|&w| is_storage(w)).all(|w| {
        g.out_edges(w).iter().any(|e| !is_storage(e.to)) && g.in_edges(w).iter().any(|e| !is_storage(e.to))
    });
    let plain = |w: WaypointId| g.waypoint(w).kind == WaypointKind::Plain;
    let head_on = g
        .edges()
        .filter(|(u, e)| *u < e.to && plain(*u) && plain(e.to) && g.has_edge(e.to, *u))
        .map(|(u, e)| (u, e.to))
        .collect();
    FlowReport {
        unladen_connected: strongly_connected(g, &all),
        laden_connected: strongly_connected(g, &open) && storage_linked,
        head_on,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, write_instance};

    fn count(inst: &Instance, kind: WaypointKind) -> usize {
        inst.graph.waypoints().filter(|(_, w)| w.kind == kind).count()
    }

    #[test]
    fn reference_instance_counts() {
        let inst = generate(&preset("1-4-4-32-550").unwrap()).unwrap();
        assert_eq!(inst.name, "1-4-4-32-550");
        assert_eq!(inst.pods.len(), 550);
        assert_eq!(count(&inst, WaypointKind::Storage), 648);
        assert_eq!(inst.graph.len(), 1640);
        assert_eq!(inst.robots.len(), 32);
        assert_eq!(inst.stations.len(), 8);
        assert!(check_flow(&inst).passes());
        assert!(validate_instance(&inst).is_clean());
    }

    #[test]
    fn presets_match_storage_and_pod_counts() {
        let storage = [936, 648, 2296, 2248, 3208, 1224, 1768, 2312, 1296, 1944];
        for (name, expected) in PRESET_NAMES.iter().zip(storage) {
            let inst = generate(&preset(name).unwrap()).unwrap();
            assert_eq!(&inst.name, name);
            assert_eq!(count(&inst, WaypointKind::Storage), expected, "{name}");
            let report = check_flow(&inst);
            assert!(report.passes(), "{name}: {report:?}");
        }
    }

    #[test]
    fn single_block_has_eight_storage_nodes() {
        let p = LayoutParams { blocks_x: 1, blocks_y: 1, robots: 1, ..LayoutParams::default() };
        let inst = generate(&p).unwrap();
        assert_eq!(count(&inst, WaypointKind::Storage), 8);
        assert_eq!(inst.pods.len(), 7);
        assert!(check_flow(&inst).passes());
    }

    #[test]
    fn generation_is_a_function_of_the_seed() {
        let p = preset("desk").unwrap();
        let a = write_instance(&generate(&p).unwrap());
        assert_eq!(a, write_instance(&generate(&p).unwrap()));
        let b = write_instance(&generate(&LayoutParams { seed: 9, ..p }).unwrap());
        assert_ne!(a, b);
    }

    #[test]
    fn every_edge_clears_the_radii() {
        let inst = generate(&preset("desk").unwrap()).unwrap();
        assert!(validate_instance(&inst).is_clean());
        let min = inst.graph.edges().map(|(_, e)| e.length).fold(f64::INFINITY, f64::min);
        assert!(min >= 0.35 + 0.45);
    }

    #[test]
    fn reversed_aisle_edge_is_reported() {
        let mut inst = generate(&preset("desk").unwrap()).unwrap();
        let (u, v) = inst
            .graph
            .edges()
            .find(|(u, e)| {
                let g = &inst.graph;
                g.waypoint(*u).kind == WaypointKind::Plain && g.waypoint(e.to).kind == WaypointKind::Plain
            })
            .map(|(u, e)| (u, e.to))
            .unwrap();
        inst.graph.add_edge(v, u);
        let report = check_flow(&inst);
        assert_eq!(report.head_on, vec![(u.min(v), u.max(v))]);
        assert!(!report.passes());
    }

    #[test]
    fn empty_instance_passes_vacuously() {
        assert!(check_flow(&Instance::default()).passes());
    }

    #[test]
    fn too_many_stations_are_rejected() {
        let p = LayoutParams { blocks_x: 1, blocks_y: 1, pick: 12, ..LayoutParams::default() };
        assert!(matches!(generate(&p), Err(LayoutError::Capacity { .. })));
        assert!(matches!(generate(&LayoutParams { fill: 0.0, ..p }), Err(LayoutError::Invalid(_))));
    }

    #[test]
    fn elevators_link_every_tier() {
        let inst = generate(&preset("3-12-12-96-1650").unwrap()).unwrap();
        assert_eq!(inst.graph.tiers().len(), 3);
        assert_eq!(inst.graph.elevators().len(), 2);
        for el in inst.graph.elevators() {
            let tiers: Vec<_> = el.ports.iter().map(|p| inst.graph.waypoint(*p).tier.0).collect();
            assert_eq!(tiers, vec![0, 1, 2]);
            assert_eq!(el.transit_time, 10.0);
        }
        assert!(check_flow(&inst).passes());
    }
}
