//! Single-robot searches: kinematic heuristic, reverse resumable A*, spatial
//! A* and windowed space-time A*.

mod actions;
mod heuristic;
mod rra;
mod spacetime;
mod spatial;

pub use actions::{candidate_actions, headings_out, straight_run, Action, ActionKind, NodeMask};
pub use heuristic::{arc_cost_floor, delta_violations, h_estimate, record_arc_cost};
pub use rra::RraContext;
pub use spacetime::{a_star_spacetime, SpaceTimeQuery, SpaceTimeResult};
pub(crate) use spacetime::spacetime_search;
pub use spatial::a_star_spatial;
pub(crate) use spatial::spatial_search;

/// Quantized heading used as a hash key.
pub(crate) fn heading_key(h: f64) -> i64 {
    let full = (std::f64::consts::TAU * 1e6).round() as i64;
    let k = (h * 1e6).round() as i64;
    k.rem_euclid(full)
}

pub(crate) fn same_heading(a: f64, b: f64) -> bool {
    heading_key(a) == heading_key(b)
}
