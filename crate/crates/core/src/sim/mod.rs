//! Deterministic discrete-event simulation of an application deployed on a
//! topology.
//!
//! Sensors emit periodically; tuples travel hop by hop along tree routes,
//! queue FIFO at their consuming module instance (one tuple executing at a
//! time), spawn children when execution finishes, and are consumed by the
//! display of their originating branch.

mod engine;
mod event;
mod trace;

use serde::{Deserialize, Serialize};

use crate::app::AppModule;
use crate::error::{Error, Result};
use crate::topology::{Bandwidth, NetLink, NodeId};

pub use engine::{drain_check, simulate, simulate_traced, Simulation};
pub use event::{EventKind, EventQueue, EventTag, SimEvent, Target};
pub use trace::{ArrivalRecord, DeliveryRecord, EventRecord, ExecutionRecord, InstanceInfo, Trace, TraversalRecord};

/// Start offset of each sensor's periodic emission.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EmissionPhase {
    /// Every sensor emits at the same instants.
    #[default]
    InPhase,
    /// Sensor `i` of `n` starts at `i * interval / n`.
    Staggered,
    /// Uniform random offset in `[0, max_ms)`, drawn from the run seed.
    Jitter { max_ms: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Events after this time are not processed.
    pub duration_ms: f64,
    pub emission_interval_ms: f64,
    /// Emissions per sensor; `None` emits until the horizon.
    pub emissions_per_sensor: Option<u64>,
    pub emission_phase: EmissionPhase,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_ms: 20_000.0,
            emission_interval_ms: 1000.0,
            emissions_per_sensor: Some(10),
            emission_phase: EmissionPhase::InPhase,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(Error::param("simulation.duration_ms", format!("must be > 0, got {}", self.duration_ms)));
        }
        if !(self.emission_interval_ms.is_finite() && self.emission_interval_ms > 0.0) {
            return Err(Error::param(
                "simulation.emission_interval_ms",
                format!("must be > 0, got {}", self.emission_interval_ms),
            ));
        }
        if let EmissionPhase::Jitter { max_ms } = self.emission_phase {
            if !(max_ms.is_finite() && max_ms >= 0.0) {
                return Err(Error::param("simulation.emission_phase.jitter.max_ms", "must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleState {
    InFlight,
    Consumed,
    Delivered,
}

/// A unit of data in flight, with the lineage of the sensor reading it derives from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleInstance {
    /// Creation sequence number, also the index into the run's tuple table.
    pub seq: u64,
    /// Index into the graph's `tuple_types`.
    pub tuple_type: usize,
    pub parent: Option<u64>,
    pub origin_time_ms: f64,
    pub origin_sensor: NodeId,
    pub branch: NodeId,
    pub created_ms: f64,
    pub source: NodeId,
    pub destination: NodeId,
    /// Tuple types from the sensor reading down to this tuple.
    pub trail: Vec<usize>,
    pub network_ms: f64,
    pub execution_ms: f64,
    pub waiting_ms: f64,
    /// Sum of link propagation latencies along the realized path.
    pub path_latency_ms: f64,
    pub state: TupleState,
}

/// Time to push `size_bytes` over `link`: propagation latency plus
/// serialization delay (zero on unbounded links).
pub fn transmission_delay(link: &NetLink, size_bytes: u64) -> f64 {
    match link.bandwidth {
        Bandwidth::Unbounded => link.latency_ms,
        Bandwidth::BitsPerSecond(bps) => link.latency_ms + (size_bytes as f64 * 8.0 * 1000.0) / bps,
    }
}

/// Milliseconds for `module` to process `cpu_length_mi` million instructions.
pub fn execution_time(module: &AppModule, cpu_length_mi: f64) -> f64 {
    cpu_length_mi * 1000.0 / module.allocated_mips
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(latency_ms: f64, bandwidth: Bandwidth) -> NetLink {
        NetLink {
            a: NodeId(0),
            b: NodeId(1),
            latency_ms,
            bandwidth,
        }
    }

    fn module(mips: f64) -> AppModule {
        AppModule {
            name: "m".into(),
            allocated_mips: mips,
            io_map: vec![],
        }
    }

    #[test]
    fn transmission() {
        assert_eq!(transmission_delay(&link(100.0, Bandwidth::Unbounded), 123_456), 100.0);
        assert_eq!(transmission_delay(&link(100.0, Bandwidth::BitsPerSecond(1e6)), 1000), 108.0);
        assert_eq!(transmission_delay(&link(0.0, Bandwidth::Unbounded), 1000), 0.0);
    }

    #[test]
    fn execution() {
        assert_eq!(execution_time(&module(1200.0), 12.0), 10.0);
        assert_eq!(execution_time(&module(500.0), 5.0), 10.0);
        assert_eq!(execution_time(&module(600.0), 6.0), 10.0);
        assert_eq!(execution_time(&module(777.0), 0.0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = SimConfig {
            duration_ms: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Parameter { .. })));
        let bad = SimConfig {
            emission_interval_ms: -5.0,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Parameter { .. })));
    }
}
