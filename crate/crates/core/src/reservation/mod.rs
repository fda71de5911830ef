//! Continuous-time node reservations.

mod interval_tree;
mod table;
mod timing;

pub use interval_tree::{Interval, IntervalTree};
pub use table::{Conflict, Reservation, ReservationConflict, ReservationTable};
pub use timing::{
    fixed_reservations, path_to_reservations, reservations_from_timing, Hop, HopMotion, PathTiming, ReplanPoint,
    StepTiming,
};
