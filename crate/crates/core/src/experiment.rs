//! Experiment cells (instance x method x repetition), their CSV records and
//! the method comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Instance;
use crate::sim::{Heatmap, Metrics, SimConfig, SimError, Simulation};
use crate::solvers::{planner_by_name, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: String,
    pub solver: SolverConfig,
    pub sim: SimConfig,
    pub repetitions: usize,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: "whca-v".into(),
            solver: SolverConfig::default(),
            sim: SimConfig::default(),
            repetitions: 1,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub instance: String,
    pub method: String,
    pub rep: usize,
    pub seed: u64,
    pub handled_units: u64,
    pub avg_trip_len_m: f64,
    pub avg_trip_time_s: f64,
    pub wall_time_s: f64,
    pub idle_frac: f64,
    pub timeout_frac: f64,
    pub ub: f64,
}

pub const CSV_HEADER: &str =
    "instance,method,rep,seed,handled_units,avg_trip_len_m,avg_trip_time_s,wall_time_s,idle_frac,timeout_frac,ub";

impl MetricsRecord {
    pub fn from_metrics(instance: &str, method: &str, rep: usize, seed: u64, m: &Metrics) -> Self {
        Self {
            instance: instance.to_string(),
            method: method.to_string(),
            rep,
            seed,
            handled_units: m.handled_units,
            avg_trip_len_m: m.avg_trip_length(),
            avg_trip_time_s: m.avg_trip_time(),
            wall_time_s: m.wall_time,
            idle_frac: m.idle_fraction(),
            timeout_frac: m.timeout_fraction(),
            ub: m.upper_bound,
        }
    }
}

pub fn write_csv(records: &[MetricsRecord], header: bool) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

pub fn read_csv(text: &str) -> Result<Vec<MetricsRecord>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

/// Result of one cell. `fault` is set when the run broke a safety invariant.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub record: MetricsRecord,
    pub metrics: Metrics,
    pub heatmap: Heatmap,
    pub trace: Vec<String>,
    pub fault: Option<String>,
}

pub fn run_cell(inst: &Instance, config: &ExperimentConfig, rep: usize) -> Result<CellOutcome, ExperimentError> {
    let seed = config.base_seed + rep as u64;
    let solver = SolverConfig { seed, ..config.solver.clone() };
    let planner = planner_by_name(&config.method, &solver).ok_or_else(|| ExperimentError::UnknownMethod(config.method.clone()))?;
    let sim_config = SimConfig { seed, ..config.sim.clone() };
    let mut sim = Simulation::new(inst.clone(), planner, solver, sim_config)?;
    let metrics = sim.run();
    let mut faults = Vec::new();
    if metrics.geometric_faults > 0 {
        faults.push(format!("{} geometric overlaps", metrics.geometric_faults));
    }
    if metrics.owner_faults > 0 {
        faults.push(format!("{} pod ownership faults", metrics.owner_faults));
    }
    if metrics.handled_units as f64 > metrics.upper_bound + 1e-9 {
        faults.push(format!("handled {} above the bound {}", metrics.handled_units, metrics.upper_bound));
    }
    Ok(CellOutcome {
        record: MetricsRecord::from_metrics(&inst.name, &config.method, rep, seed, &metrics),
        heatmap: sim.heatmap().clone(),
        trace: sim.trace().to_vec(),
        metrics,
        fault: (!faults.is_empty()).then(|| faults.join("; ")),
    })
}

/// All repetitions of one method on one instance; repetition `k` uses seed
/// `base_seed + k`.
pub fn run_experiment(inst: &Instance, config: &ExperimentConfig) -> Result<Vec<CellOutcome>, ExperimentError> {
    if config.repetitions == 0 {
        return Err(ExperimentError::NoRepetitions);
    }
    (0..config.repetitions).map(|rep| run_cell(inst, config, rep)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub cells: usize,
    pub handled_units: f64,
    pub avg_trip_len_m: f64,
    pub avg_trip_time_s: f64,
    pub wall_time_s: f64,
    pub idle_frac: f64,
    pub timeout_frac: f64,
    /// Instances where this method handled the most / the fewest units.
    pub best_on: Vec<String>,
    pub worst_on: Vec<String>,
}

/// Per-method means over all instances and repetitions, most handled units first.
pub fn compare_methods(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut by_method: BTreeMap<&str, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(&r.method).or_default().push(r);
    }
    let mut per_instance: BTreeMap<&str, BTreeMap<&str, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let e = per_instance.entry(&r.instance).or_default().entry(&r.method).or_insert((0.0, 0));
        e.0 += r.handled_units as f64;
        e.1 += 1;
    }
    let mut best: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut worst: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (inst, methods) in &per_instance {
        if methods.len() < 2 {
            continue;
        }
        let means: Vec<(&str, f64)> = methods.iter().map(|(m, (s, n))| (*m, s / *n as f64)).collect();
        let hi = means.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        for &(m, v) in &means {
            if v == hi {
                best.entry(m).or_default().push(inst.to_string());
            }
            if v == lo {
                worst.entry(m).or_default().push(inst.to_string());
            }
        }
    }
    let mut rows: Vec<SummaryRow> = by_method
        .into_iter()
        .map(|(method, rs)| {
            let n = rs.len() as f64;
            let mean = |f: fn(&MetricsRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryRow {
                method: method.to_string(),
                cells: rs.len(),
                handled_units: mean(|r| r.handled_units as f64),
                avg_trip_len_m: mean(|r| r.avg_trip_len_m),
                avg_trip_time_s: mean(|r| r.avg_trip_time_s),
                wall_time_s: mean(|r| r.wall_time_s),
                idle_frac: mean(|r| r.idle_frac),
                timeout_frac: mean(|r| r.timeout_frac),
                best_on: best.remove(method).unwrap_or_default(),
                worst_on: worst.remove(method).unwrap_or_default(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.handled_units.total_cmp(&a.handled_units).then(a.method.cmp(&b.method)));
    rows
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>5} {:>12} {:>10} {:>10} {:>10} {:>7} {:>8}  best/worst",
        "method", "cells", "handled", "trip m", "trip s", "wall s", "idle", "timeout"
    );
    for r in rows {
        let flags: Vec<String> = r
            .best_on
            .iter()
            .map(|i| format!("+{i}"))
            .chain(r.worst_on.iter().map(|i| format!("-{i}")))
            .collect();
        let _ = writeln!(
            out,
            "{:<8} {:>5} {:>12.2} {:>10.2} {:>10.2} {:>10.3} {:>7.3} {:>8.3}  {}",
            r.method,
            r.cells,
            r.handled_units,
            r.avg_trip_len_m,
            r.avg_trip_time_s,
            r.wall_time_s,
            r.idle_frac,
            r.timeout_frac,
            flags.join(" ")
        );
    }
    out
}
