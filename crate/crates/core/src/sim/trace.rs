use serde::Serialize;

use super::{EventTag, TupleInstance};
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub time_ms: f64,
    pub seq: u64,
    pub kind: EventTag,
    pub tuple: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraversalRecord {
    pub tuple: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub bytes: u64,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalRecord {
    pub instance: usize,
    pub tuple: u64,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionRecord {
    pub instance: usize,
    pub tuple: u64,
    pub arrived_ms: f64,
    pub start_ms: f64,
    pub finish_ms: f64,
    pub waiting_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryRecord {
    pub tuple: u64,
    pub display: NodeId,
    pub delivered_ms: f64,
    pub latency_ms: f64,
    /// Indices of the loops this delivery completes.
    pub loops: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceInfo {
    pub label: String,
    pub module: String,
    pub node: NodeId,
}

/// Full record of a run, for inspection and independent re-checking.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub events: Vec<EventRecord>,
    pub traversals: Vec<TraversalRecord>,
    pub arrivals: Vec<ArrivalRecord>,
    pub executions: Vec<ExecutionRecord>,
    pub deliveries: Vec<DeliveryRecord>,
    pub instances: Vec<InstanceInfo>,
    pub tuples: Vec<TupleInstance>,
}
