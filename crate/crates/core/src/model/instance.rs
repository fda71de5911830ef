use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use super::entities::{PodOwner, PodSpec, RobotSpec, Station, StationKind};
use super::graph::{WarehouseGraph, WaypointKind};
use super::ids::{PodId, RobotId, StationId, WaypointId};
use super::task::ServiceTimes;
use crate::kinematics::KinematicProfile;

/// Static description of a warehouse: graph, robots, pods, stations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Instance {
    pub name: String,
    pub graph: WarehouseGraph,
    pub robots: Vec<RobotSpec>,
    pub pods: Vec<PodSpec>,
    pub stations: Vec<Station>,
    pub times: ServiceTimes,
}

impl Instance {
    pub fn station(&self, id: StationId) -> &Station {
        &self.stations[id.index()]
    }

    pub fn storage_locations(&self) -> Vec<WaypointId> {
        self.graph.waypoints().filter(|(_, w)| w.kind == WaypointKind::Storage).map(|(id, _)| id).collect()
    }

    pub fn stations_of(&self, kind: StationKind) -> impl Iterator<Item = &Station> {
        self.stations.iter().filter(move |s| s.kind == kind)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.robots.iter().map(|r| r.profile.radius).chain(self.pods.iter().map(|p| p.radius)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphFinding {
    /// Edge shorter than the largest radius sum of two distinct entities.
    ShortEdge { from: WaypointId, to: WaypointId, length: f64, required: f64 },
    CrossTierEdge { from: WaypointId, to: WaypointId },
    UnreachableGate { gate: WaypointId, from: WaypointId },
    OutOfBounds { waypoint: WaypointId },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphReport {
    pub findings: Vec<GraphFinding>,
}

impl GraphReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Largest `r_i + r_j` over two distinct entities.
pub fn max_radius_pair(radii: &[f64]) -> f64 {
    let mut top = [0.0f64; 2];
    for &r in radii {
        if r > top[0] {
            top = [r, top[0]];
        } else if r > top[1] {
            top[1] = r;
        }
    }
    if radii.len() < 2 {
        return 0.0;
    }
    top[0] + top[1]
}

fn reachable_from(graph: &WarehouseGraph, start: WaypointId) -> Vec<bool> {
    let mut seen = vec![false; graph.len()];
    let mut queue = VecDeque::from([start]);
    seen[start.index()] = true;
    while let Some(u) = queue.pop_front() {
        let next = graph.out_edges(u).iter().map(|e| e.to).chain(graph.elevator_links(u).into_iter().map(|(p, _)| p));
        for v in next.collect::<Vec<_>>() {
            if !seen[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Lists short edges, cross-tier edges and station gates that some source
/// waypoint cannot reach.
pub fn validate_graph(
    graph: &WarehouseGraph,
    radii: &[f64],
    gates: &[WaypointId],
    sources: &[WaypointId],
) -> GraphReport {
    let mut findings = Vec::new();
    for (id, w) in graph.waypoints() {
        let tier = graph.tier(w.tier);
        if w.x < 0.0 || w.y < 0.0 || w.x > tier.length || w.y > tier.width {
            findings.push(GraphFinding::OutOfBounds { waypoint: id });
        }
    }
    let required = max_radius_pair(radii);
    for (from, e) in graph.edges() {
        if graph.waypoint(from).tier != graph.waypoint(e.to).tier {
            findings.push(GraphFinding::CrossTierEdge { from, to: e.to });
        } else if e.length < required {
            findings.push(GraphFinding::ShortEdge { from, to: e.to, length: e.length, required });
        }
    }
    for &s in sources {
        let seen = reachable_from(graph, s);
        for &g in gates {
            if !seen[g.index()] {
                findings.push(GraphFinding::UnreachableGate { gate: g, from: s });
            }
        }
    }
    GraphReport { findings }
}

/// Validates an instance, using robot homes as reachability sources.
pub fn validate_instance(inst: &Instance) -> GraphReport {
    let gates: Vec<_> = inst.stations.iter().map(|s| s.gate).collect();
    let homes: Vec<_> = inst.robots.iter().map(|r| r.home).collect();
    validate_graph(&inst.graph, &inst.radii(), &gates, &homes)
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown {what} `{name}`")]
    Unknown { line: usize, what: &'static str, name: String },
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn num(line: usize, tok: &str) -> Result<f64, ParseError> {
    tok.parse::<f64>().map_err(|_| syntax(line, format!("bad number `{tok}`")))
}

/// Parses the line-oriented instance format. Besides the entity records a
/// `param <key> <value>` record sets `pod_handling`, `replenish_time` or
/// `pick_time`.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut inst = Instance::default();
    let mut tiers = BTreeMap::new();
    let mut robot_ids: BTreeMap<String, RobotId> = BTreeMap::new();
    let mut deferred_pods = Vec::new();
    let mut deferred_stations = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some((&kw, args)) = toks.split_first() else { continue };
        let need = |n: usize| {
            if args.len() < n {
                Err(syntax(line, format!("`{kw}` needs {n} fields")))
            } else {
                Ok(())
            }
        };
        let wp = |name: &str, g: &WarehouseGraph| {
            g.by_name(name).ok_or_else(|| ParseError::Unknown { line, what: "waypoint", name: name.to_string() })
        };
        match kw {
            "name" => {
                need(1)?;
                inst.name = args[0].to_string();
            }
            "tier" => {
                need(3)?;
                let (len, wid) = (num(line, args[1])?, num(line, args[2])?);
                if !(len > 0.0 && wid > 0.0) {
                    return Err(syntax(line, "tier dimensions must be positive"));
                }
                tiers.insert(args[0].to_string(), inst.graph.add_tier(args[0], len, wid));
            }
            "waypoint" => {
                need(5)?;
                let tier = *tiers
                    .get(args[1])
                    .ok_or_else(|| ParseError::Unknown { line, what: "tier", name: args[1].to_string() })?;
                let kind = WaypointKind::parse(args[4]).ok_or_else(|| syntax(line, format!("bad kind `{}`", args[4])))?;
                if inst.graph.by_name(args[0]).is_some() {
                    return Err(syntax(line, format!("duplicate waypoint `{}`", args[0])));
                }
                inst.graph.add_waypoint(args[0], tier, num(line, args[2])?, num(line, args[3])?, kind);
            }
            "edge" => {
                need(2)?;
                let (a, b) = (wp(args[0], &inst.graph)?, wp(args[1], &inst.graph)?);
                inst.graph.add_edge(a, b);
            }
            "elevator" => {
                need(3)?;
                let secs = num(line, args[1])?;
                if !(secs > 0.0) {
                    return Err(syntax(line, "elevator transit time must be positive"));
                }
                let ports = args[2..].iter().map(|p| wp(p, &inst.graph)).collect::<Result<Vec<_>, _>>()?;
                inst.graph.add_elevator(args[0], secs, ports);
            }
            "station" => {
                need(3)?;
                let kind = match args[1] {
                    "repl" => StationKind::Replenishment,
                    "pick" => StationKind::Pick,
                    other => return Err(syntax(line, format!("bad station kind `{other}`"))),
                };
                let gate = wp(args[2], &inst.graph)?;
                let queue = args[3..].iter().map(|p| wp(p, &inst.graph)).collect::<Result<Vec<_>, _>>()?;
                deferred_stations.push((args[0].to_string(), kind, gate, queue));
            }
            "robot" => {
                need(7)?;
                let home = wp(args[1], &inst.graph)?;
                let v: Vec<f64> = args[2..7].iter().map(|t| num(line, t)).collect::<Result<_, _>>()?;
                let profile = KinematicProfile::new(v[1], v[2], v[3], v[4], v[0])
                    .map_err(|e| syntax(line, e.to_string()))?;
                let id = RobotId(inst.robots.len() as u32);
                robot_ids.insert(args[0].to_string(), id);
                inst.robots.push(RobotSpec { id, name: args[0].to_string(), profile, home, heading: 0.0 });
            }
            "pod" => {
                need(3)?;
                deferred_pods.push((line, args[0].to_string(), args[1].to_string(), num(line, args[2])?));
            }
            "param" => {
                need(2)?;
                let v = num(line, args[1])?;
                match args[0] {
                    "pod_handling" => inst.times.pod_handling = v,
                    "replenish_time" => inst.times.replenish_per_unit = v,
                    "pick_time" => inst.times.pick_per_unit = v,
                    other => return Err(syntax(line, format!("unknown param `{other}`"))),
                }
            }
            other => return Err(syntax(line, format!("unknown record `{other}`"))),
        }
    }
    for (name, kind, gate, queue) in deferred_stations {
        let handle_time = match kind {
            StationKind::Replenishment => inst.times.replenish_per_unit,
            StationKind::Pick => inst.times.pick_per_unit,
        };
        let id = StationId(inst.stations.len() as u32);
        inst.stations.push(Station { id, name, kind, gate, handle_time, queue });
    }
    for (line, name, at, radius) in deferred_pods {
        let owner = match robot_ids.get(&at) {
            Some(r) => PodOwner::Robot(*r),
            None => PodOwner::Storage(
                inst.graph.by_name(&at).ok_or(ParseError::Unknown { line, what: "owner", name: at.clone() })?,
            ),
        };
        let id = PodId(inst.pods.len() as u32);
        inst.pods.push(PodSpec { id, name, radius, owner });
    }
    Ok(inst)
}

/// Writes an instance in the format read by [`parse_instance`].
pub fn write_instance(inst: &Instance) -> String {
    let g = &inst.graph;
    let mut out = String::new();
    if !inst.name.is_empty() {
        let _ = writeln!(out, "name {}", inst.name);
    }
    let d = ServiceTimes::default();
    let t = &inst.times;
    for (key, v, dv) in [
        ("pod_handling", t.pod_handling, d.pod_handling),
        ("replenish_time", t.replenish_per_unit, d.replenish_per_unit),
        ("pick_time", t.pick_per_unit, d.pick_per_unit),
    ] {
        if v != dv {
            let _ = writeln!(out, "param {key} {v}");
        }
    }
    for tier in g.tiers() {
        let _ = writeln!(out, "tier {} {} {}", tier.name, tier.length, tier.width);
    }
    for (_, w) in g.waypoints() {
        let _ = writeln!(out, "waypoint {} {} {} {} {}", w.name, g.tier(w.tier).name, w.x, w.y, w.kind.as_str());
    }
    for (from, e) in g.edges() {
        let _ = writeln!(out, "edge {} {}", g.waypoint(from).name, g.waypoint(e.to).name);
    }
    for el in g.elevators() {
        let ports: Vec<_> = el.ports.iter().map(|p| g.waypoint(*p).name.as_str()).collect();
        let _ = writeln!(out, "elevator {} {} {}", el.name, el.transit_time, ports.join(" "));
    }
    for s in &inst.stations {
        let _ = write!(out, "station {} {} {}", s.name, s.kind.as_str(), g.waypoint(s.gate).name);
        for q in &s.queue {
            let _ = write!(out, " {}", g.waypoint(*q).name);
        }
        out.push('\n');
    }
    for r in &inst.robots {
        let p = &r.profile;
        let _ = writeln!(
            out,
            "robot {} {} {} {} {} {} {}",
            r.name,
            g.waypoint(r.home).name,
            p.radius,
            p.accel,
            p.decel,
            p.v_max,
            p.omega_max
        );
    }
    for pod in &inst.pods {
        let at = match pod.owner {
            PodOwner::Storage(w) => g.waypoint(w).name.clone(),
            PodOwner::Robot(r) => inst.robots[r.index()].name.clone(),
        };
        let _ = writeln!(out, "pod {} {} {}", pod.name, at, pod.radius);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# two storage spots and a pick station
tier h0 10 5
waypoint a h0 1 1 storage
waypoint b h0 2 1 plain   # corridor
waypoint c h0 3 1 queue
waypoint d h0 4 1 gate
edge a b
edge b a
edge b c
edge c d
edge d b
station m0 pick d c
robot r0 b 0.35 0.5 0.5 1.5 2.5132741228718345
pod p0 a 0.45
pod p1 r0 0.45
";

    #[test]
    fn parse_and_roundtrip() {
        let inst = parse_instance(SMALL).unwrap();
        assert_eq!(inst.graph.len(), 4);
        assert_eq!(inst.graph.edge_count(), 5);
        assert_eq!(inst.stations[0].queue.len(), 1);
        assert_eq!(inst.pods[1].owner, PodOwner::Robot(RobotId(0)));
        let again = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = parse_instance("tier h0 1 1\nwaypoint a h9 0 0 plain\n").unwrap_err();
        assert!(matches!(e, ParseError::Unknown { line: 2, what: "tier", .. }));
        let e = parse_instance("edge x y\n").unwrap_err();
        assert!(matches!(e, ParseError::Unknown { line: 1, .. }));
        assert!(parse_instance("bogus 1\n").is_err());
    }

    #[test]
    fn radius_pairs() {
        assert_eq!(max_radius_pair(&[0.35, 0.45, 0.45]), 0.9);
        assert_eq!(max_radius_pair(&[0.35, 0.45]), 0.8);
        assert_eq!(max_radius_pair(&[0.35]), 0.0);
    }

    fn two_node(len: f64) -> WarehouseGraph {
        let mut g = WarehouseGraph::new();
        let t = g.add_tier("h0", 5.0, 5.0);
        let a = g.add_waypoint("a", t, 0.0, 0.0, WaypointKind::Plain);
        let b = g.add_waypoint("b", t, len, 0.0, WaypointKind::Plain);
        g.add_edge(a, b);
        g
    }

    #[test]
    fn short_edges_are_reported() {
        let radii = [0.35, 0.45, 0.45];
        assert!(validate_graph(&two_node(1.0), &radii, &[], &[]).is_clean());
        let rep = validate_graph(&two_node(0.8), &radii, &[], &[]);
        assert_eq!(rep.findings.len(), 1);
        assert!(matches!(rep.findings[0], GraphFinding::ShortEdge { .. }));
        assert!(validate_graph(&WarehouseGraph::new(), &radii, &[], &[]).is_clean());
    }

    #[test]
    fn cross_tier_and_unreachable_gate() {
        let mut g = two_node(1.0);
        let t1 = g.add_tier("h1", 5.0, 5.0);
        let c = g.add_waypoint("c", t1, 0.0, 0.0, WaypointKind::StationGate);
        let rep = validate_graph(&g, &[], &[c], &[WaypointId(0)]);
        assert_eq!(rep.findings, vec![GraphFinding::UnreachableGate { gate: c, from: WaypointId(0) }]);
        g.add_edge(WaypointId(1), c);
        let rep = validate_graph(&g, &[], &[c], &[WaypointId(0)]);
        assert_eq!(rep.findings, vec![GraphFinding::CrossTierEdge { from: WaypointId(1), to: c }]);
    }
}
