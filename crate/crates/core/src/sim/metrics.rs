//! Run counters and the polled position heatmap.

use std::io::{self, Read, Write};

use crate::model::{Instance, TierId};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub horizon: f64,
    /// Items picked plus bundles stored.
    pub handled_units: u64,
    pub trips: u64,
    pub trip_length: f64,
    pub trip_time: f64,
    /// Seconds spent inside planner calls.
    pub wall_time: f64,
    pub planner_calls: u64,
    pub timeouts: u64,
    /// Sum over stations of seconds spent serving a robot.
    pub station_busy: f64,
    pub stations: usize,
    /// Handling bound for the horizon.
    pub upper_bound: f64,
    pub polls: u64,
    /// Robot pairs (or carried pods) closer than their radii allow.
    pub geometric_faults: u64,
    /// Pods with more than one owner or position.
    pub owner_faults: u64,
    pub aborts: u64,
    pub deadlock_moves: u64,
    pub completed_moves: u64,
    pub longest_move: f64,
    /// Move subtasks open longer than the stall limit when the run ended.
    pub stalled_moves: u64,
}

impl Metrics {
    pub fn avg_trip_length(&self) -> f64 {
        if self.trips == 0 { 0.0 } else { self.trip_length / self.trips as f64 }
    }

    pub fn avg_trip_time(&self) -> f64 {
        if self.trips == 0 { 0.0 } else { self.trip_time / self.trips as f64 }
    }

    pub fn idle_fraction(&self) -> f64 {
        if self.stations == 0 || self.horizon <= 0.0 {
            return 0.0;
        }
        (1.0 - self.station_busy / (self.stations as f64 * self.horizon)).clamp(0.0, 1.0)
    }

    pub fn timeout_fraction(&self) -> f64 {
        if self.planner_calls == 0 { 0.0 } else { self.timeouts as f64 / self.planner_calls as f64 }
    }
}

/// Units an instance can handle per hour if every station works without pause.
pub fn hourly_upper_bound(inst: &Instance) -> f64 {
    inst.stations.iter().map(|s| 3600.0 / s.handle_time).sum()
}

/// Robot positions counted per tier on a grid of `cell`-sized squares.
#[derive(Debug, Clone, PartialEq)]
pub struct TierGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u64>,
}

impl TierGrid {
    pub fn get(&self, col: usize, row: usize) -> u64 {
        self.counts[row * self.width + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// One text row per grid row, north (largest y) first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in (0..self.height).rev() {
            let line: Vec<String> = (0..self.width).map(|c| self.get(c, row).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Greyscale image, log-scaled so that rarely visited cells stay visible.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let scale = ((max as f64) + 1.0).ln().max(f64::MIN_POSITIVE);
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in (0..self.height).rev() {
            for c in 0..self.width {
                let v = ((self.get(c, row) as f64 + 1.0).ln() / scale * 255.0).round();
                out.push(v as u8);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub polls: u64,
    pub tiers: Vec<TierGrid>,
}

const MAGIC: &[u8; 4] = b"KHM1";

impl Heatmap {
    /// Grids spanning every tier's waypoints with a margin of one cell.
    pub fn for_instance(inst: &Instance, cell: f64) -> Self {
        let g = &inst.graph;
        let tiers = (0..g.tiers().len())
            .map(|t| {
                let pts: Vec<(f64, f64)> =
                    g.waypoints().filter(|(_, w)| w.tier == TierId(t as u16)).map(|(_, w)| (w.x, w.y)).collect();
                let min_x = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                let max_x = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
                let min_y = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let max_y = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                if pts.is_empty() {
                    return TierGrid { origin_x: 0.0, origin_y: 0.0, cell, width: 1, height: 1, counts: vec![0] };
                }
                let (origin_x, origin_y) = (min_x - cell, min_y - cell);
                let width = ((max_x - min_x) / cell).ceil() as usize + 3;
                let height = ((max_y - min_y) / cell).ceil() as usize + 3;
                TierGrid { origin_x, origin_y, cell, width, height, counts: vec![0; width * height] }
            })
            .collect();
        Self { polls: 0, tiers }
    }

    pub fn add(&mut self, tier: TierId, x: f64, y: f64) {
        let g = &mut self.tiers[tier.index()];
        let col = (((x - g.origin_x) / g.cell).round().max(0.0) as usize).min(g.width - 1);
        let row = (((y - g.origin_y) / g.cell).round().max(0.0) as usize).min(g.height - 1);
        g.counts[row * g.width + col] += 1;
    }

    pub fn total(&self) -> u64 {
        self.tiers.iter().map(TierGrid::total).sum()
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.polls.to_le_bytes())?;
        w.write_all(&(self.tiers.len() as u32).to_le_bytes())?;
        for g in &self.tiers {
            for v in [g.origin_x, g.origin_y, g.cell] {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&(g.width as u32).to_le_bytes())?;
            w.write_all(&(g.height as u32).to_le_bytes())?;
            for c in &g.counts {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> io::Result<Self> {
        fn take<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        if &take::<4>(&mut r)? != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a heatmap file"));
        }
        let polls = u64::from_le_bytes(take(&mut r)?);
        let n = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut tiers = Vec::with_capacity(n);
        for _ in 0..n {
            let origin_x = f64::from_le_bytes(take(&mut r)?);
            let origin_y = f64::from_le_bytes(take(&mut r)?);
            let cell = f64::from_le_bytes(take(&mut r)?);
            let width = u32::from_le_bytes(take(&mut r)?) as usize;
            let height = u32::from_le_bytes(take(&mut r)?) as usize;
            let counts = (0..width * height).map(|_| take(&mut r).map(u64::from_le_bytes)).collect::<io::Result<_>>()?;
            tiers.push(TierGrid { origin_x, origin_y, cell, width, height, counts });
        }
        Ok(Self { polls, tiers })
    }
}
