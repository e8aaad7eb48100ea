//! Discrete-event simulation of distributed-data-flow IoT applications on a
//! hierarchical cloud/fog topology.
//!
//! The pieces compose in this order: an [`app::ApplicationGraph`] and a
//! [`topology::Topology`] are combined by a [`placement::Placement`], then
//! [`sim::simulate`] runs the deployment and produces a
//! [`metrics::MetricsReport`]. [`scenario`] and [`sweep`] drive whole
//! experiments from a JSON scenario file.

pub mod app;
pub mod error;
pub mod metrics;
pub mod placement;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod topology;

pub use error::{Error, Result};
