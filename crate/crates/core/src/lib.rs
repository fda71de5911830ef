//! Continuous-time multi-agent path finding for robotic mobile fulfillment
//! warehouses, with an event-driven simulator to compare solvers.

pub mod experiment;
pub mod kinematics;
pub mod layout;
pub mod model;
pub mod reservation;
pub mod search;
pub mod sim;
pub mod solvers;
