//! Multi-UAV data collection from ground sensors with a relay chain back to
//! a base station.

pub mod channel;
pub mod clustering;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod mission;
pub mod model;
pub mod partition;
pub mod planner;
pub mod tsp;

pub use error::{Error, Result};
pub use geometry::Point2;
