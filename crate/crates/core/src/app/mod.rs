//! Distributed-data-flow application model.
//!
//! An application is a DAG of processing modules connected by typed tuple
//! edges. The distinguished [`Endpoint::Sensor`] and [`Endpoint::Display`]
//! endpoints are the data source and the end-user sink. Application loops
//! name sensor-to-display paths whose end-to-end latency is measured.

mod soil;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use soil::{
    build_soil_app, ModuleOverride, SoilAppParams, TupleOverride, DATA_AGGREGATION,
    EVENT_DETECTION, SENSE, SOIL_ANALYTICS, STATUS_GENERATION,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Sensor,
    Display,
    Module(String),
}

impl Endpoint {
    pub fn module(name: impl Into<String>) -> Self {
        Endpoint::Module(name.into())
    }

    pub fn module_name(&self) -> Option<&str> {
        match self {
            Endpoint::Module(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Sensor => f.write_str("SENSOR"),
            Endpoint::Display => f.write_str("DISPLAY"),
            Endpoint::Module(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleType {
    pub name: String,
    pub size_bytes: u64,
    /// Processing demand in million instructions.
    pub cpu_length_mi: f64,
}

/// One output tuple is emitted for every `ratio` inputs of type `input`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoMapping {
    pub input: String,
    pub output: String,
    pub ratio: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppModule {
    pub name: String,
    pub allocated_mips: f64,
    pub io_map: Vec<IoMapping>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: Endpoint,
    pub destination: Endpoint,
    pub tuple_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppLoop {
    pub name: String,
    pub path: Vec<Endpoint>,
}

/// A declared loop resolved against the edge set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopPath {
    pub name: String,
    pub path: Vec<Endpoint>,
    pub tuple_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ApplicationGraph {
    pub tuple_types: Vec<TupleType>,
    pub modules: Vec<AppModule>,
    pub edges: Vec<Edge>,
    pub loops: Vec<AppLoop>,
}

impl ApplicationGraph {
    pub fn tuple_type(&self, name: &str) -> Option<&TupleType> {
        self.tuple_types.iter().find(|t| t.name == name)
    }

    pub fn module(&self, name: &str) -> Option<&AppModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn module_mut(&mut self, name: &str) -> Option<&mut AppModule> {
        self.modules.iter_mut().find(|m| m.name == name)
    }

    /// The edge carrying `tuple`, if exactly one does.
    pub fn edge_for(&self, tuple: &str) -> Option<&Edge> {
        let mut it = self.edges.iter().filter(|e| e.tuple_type == tuple);
        match (it.next(), it.next()) {
            (Some(edge), None) => Some(edge),
            _ => None,
        }
    }

    /// Removes the edge carrying `tuple`, returning it.
    pub fn remove_edge(&mut self, tuple: &str) -> Option<Edge> {
        let pos = self.edges.iter().position(|e| e.tuple_type == tuple)?;
        Some(self.edges.remove(pos))
    }

    /// Module names in a topological order of the module DAG.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let (dag, _) = self.module_digraph();
        toposort(&dag, None)
            .map(|order| order.into_iter().map(|ix| dag[ix].clone()).collect())
            .map_err(|cycle| {
                Error::Inconsistency(format!("module graph has a cycle through `{}`", dag[cycle.node_id()]))
            })
    }

    fn module_digraph(&self) -> (DiGraph<String, ()>, BTreeMap<&str, NodeIndex>) {
        let mut dag = DiGraph::new();
        let mut index = BTreeMap::new();
        for m in &self.modules {
            index.entry(m.name.as_str()).or_insert_with(|| dag.add_node(m.name.clone()));
        }
        for e in &self.edges {
            if let (Some(a), Some(b)) = (e.source.module_name(), e.destination.module_name()) {
                if let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) {
                    dag.add_edge(ia, ib, ());
                }
            }
        }
        (dag, index)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DagViolation {
    #[error("tuple type `{0}` is declared more than once")]
    DuplicateTupleType(String),
    #[error("module `{0}` is declared more than once")]
    DuplicateModule(String),
    #[error("tuple type `{0}` has size 0 bytes")]
    ZeroTupleSize(String),
    #[error("tuple type `{tuple}` has invalid cpu length {value} MI")]
    InvalidCpuLength { tuple: String, value: f64 },
    #[error("module `{module}` has invalid MIPS allocation {value}")]
    InvalidMips { module: String, value: f64 },
    #[error("module `{module}` references unknown tuple type `{tuple}`")]
    UnknownTupleType { module: String, tuple: String },
    #[error("module `{module}` emits `{output}` with ratio 0")]
    ZeroEmissionRatio { module: String, output: String },
    #[error("module `{module}` maps tuple `{tuple}` but {reason}")]
    IoMismatch {
        module: String,
        tuple: String,
        reason: &'static str,
    },
    #[error("edge for `{tuple}` references unknown endpoint `{endpoint}`")]
    UnknownEndpoint { tuple: String, endpoint: String },
    #[error("edge for `{tuple}` has illegal direction {source_ep} -> {destination}")]
    IllegalDirection {
        tuple: String,
        source_ep: Endpoint,
        destination: Endpoint,
    },
    #[error("edge references undeclared tuple type `{0}`")]
    EdgeWithUnknownTuple(String),
    #[error("tuple type `{tuple}` appears on {count} edges (expected exactly 1)")]
    TupleEdgeCount { tuple: String, count: usize },
    #[error("cycle through modules {modules:?}")]
    Cycle { modules: Vec<String> },
    #[error("module `{0}` is not reachable from SENSOR")]
    UnreachableFromSensor(String),
    #[error("module `{0}` cannot reach DISPLAY")]
    CannotReachDisplay(String),
    #[error("loop `{0}` must start at SENSOR and end at DISPLAY")]
    LoopEndpoints(String),
    #[error("loop `{name}` step {from} -> {to} is not an edge")]
    LoopNotAPath { name: String, from: Endpoint, to: Endpoint },
    #[error("loop `{name}` step {from} -> {to} matches several edges")]
    LoopAmbiguous { name: String, from: Endpoint, to: Endpoint },
    #[error("loop `{0}` is declared more than once")]
    DuplicateLoop(String),
}

/// Checks every structural invariant of `graph`. An empty result means valid.
pub fn validate_dag(graph: &ApplicationGraph) -> Vec<DagViolation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for t in &graph.tuple_types {
        if !seen.insert(t.name.as_str()) {
            out.push(DagViolation::DuplicateTupleType(t.name.clone()));
        }
        if t.size_bytes == 0 {
            out.push(DagViolation::ZeroTupleSize(t.name.clone()));
        }
        if !(t.cpu_length_mi.is_finite() && t.cpu_length_mi >= 0.0) {
            out.push(DagViolation::InvalidCpuLength {
                tuple: t.name.clone(),
                value: t.cpu_length_mi,
            });
        }
    }
    let tuple_names = seen;

    let mut module_names = BTreeSet::new();
    for m in &graph.modules {
        if !module_names.insert(m.name.as_str()) {
            out.push(DagViolation::DuplicateModule(m.name.clone()));
        }
        if !(m.allocated_mips.is_finite() && m.allocated_mips > 0.0) {
            out.push(DagViolation::InvalidMips {
                module: m.name.clone(),
                value: m.allocated_mips,
            });
        }
    }

    // Edge well-formedness.
    let mut edge_count: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &graph.edges {
        *edge_count.entry(e.tuple_type.as_str()).or_default() += 1;
        if !tuple_names.contains(e.tuple_type.as_str()) {
            out.push(DagViolation::EdgeWithUnknownTuple(e.tuple_type.clone()));
        }
        for ep in [&e.source, &e.destination] {
            if let Endpoint::Module(name) = ep {
                if !module_names.contains(name.as_str()) {
                    out.push(DagViolation::UnknownEndpoint {
                        tuple: e.tuple_type.clone(),
                        endpoint: name.clone(),
                    });
                }
            }
        }
        if e.source == Endpoint::Display || e.destination == Endpoint::Sensor {
            out.push(DagViolation::IllegalDirection {
                tuple: e.tuple_type.clone(),
                source_ep: e.source.clone(),
                destination: e.destination.clone(),
            });
        }
    }
    for t in &graph.tuple_types {
        let count = edge_count.get(t.name.as_str()).copied().unwrap_or(0);
        if count != 1 && tuple_names.contains(t.name.as_str()) {
            out.push(DagViolation::TupleEdgeCount {
                tuple: t.name.clone(),
                count,
            });
        }
    }
    // Report each duplicated name once.
    out.dedup();

    // io_map consistency.
    for m in &graph.modules {
        for io in &m.io_map {
            for name in [&io.input, &io.output] {
                if !tuple_names.contains(name.as_str()) {
                    out.push(DagViolation::UnknownTupleType {
                        module: m.name.clone(),
                        tuple: name.clone(),
                    });
                }
            }
            if io.ratio == 0 {
                out.push(DagViolation::ZeroEmissionRatio {
                    module: m.name.clone(),
                    output: io.output.clone(),
                });
            }
            let here = Endpoint::Module(m.name.clone());
            if let Some(edge) = graph.edge_for(&io.input) {
                if edge.destination != here {
                    out.push(DagViolation::IoMismatch {
                        module: m.name.clone(),
                        tuple: io.input.clone(),
                        reason: "that input is not delivered to it",
                    });
                }
            }
            if let Some(edge) = graph.edge_for(&io.output) {
                if edge.source != here {
                    out.push(DagViolation::IoMismatch {
                        module: m.name.clone(),
                        tuple: io.output.clone(),
                        reason: "that output does not leave it",
                    });
                }
            }
        }
    }

    // Cycles among modules.
    let (dag, _) = graph.module_digraph();
    for scc in tarjan_scc(&dag) {
        let self_loop = scc.len() == 1 && dag.contains_edge(scc[0], scc[0]);
        if scc.len() > 1 || self_loop {
            let mut modules: Vec<String> = scc.iter().map(|&ix| dag[ix].clone()).collect();
            modules.sort();
            modules.dedup();
            out.push(DagViolation::Cycle { modules });
        }
    }

    // Reachability from SENSOR and to DISPLAY.
    let forward = reachable(graph, &Endpoint::Sensor, |e| (&e.source, &e.destination));
    let backward = reachable(graph, &Endpoint::Display, |e| (&e.destination, &e.source));
    for m in &graph.modules {
        let ep = Endpoint::Module(m.name.clone());
        if !forward.contains(&ep) {
            out.push(DagViolation::UnreachableFromSensor(m.name.clone()));
        }
        if !backward.contains(&ep) {
            out.push(DagViolation::CannotReachDisplay(m.name.clone()));
        }
    }

    // Loops.
    let mut loop_names = BTreeSet::new();
    for lp in &graph.loops {
        if !loop_names.insert(lp.name.as_str()) {
            out.push(DagViolation::DuplicateLoop(lp.name.clone()));
        }
        if lp.path.first() != Some(&Endpoint::Sensor) || lp.path.last() != Some(&Endpoint::Display) || lp.path.len() < 2 {
            out.push(DagViolation::LoopEndpoints(lp.name.clone()));
        }
        for step in lp.path.windows(2) {
            match edges_between(graph, &step[0], &step[1]).len() {
                1 => {}
                0 => out.push(DagViolation::LoopNotAPath {
                    name: lp.name.clone(),
                    from: step[0].clone(),
                    to: step[1].clone(),
                }),
                _ => out.push(DagViolation::LoopAmbiguous {
                    name: lp.name.clone(),
                    from: step[0].clone(),
                    to: step[1].clone(),
                }),
            }
        }
    }

    out
}

fn edges_between<'g>(graph: &'g ApplicationGraph, from: &Endpoint, to: &Endpoint) -> Vec<&'g Edge> {
    graph
        .edges
        .iter()
        .filter(|e| &e.source == from && &e.destination == to)
        .collect()
}

fn reachable<'g>(
    graph: &'g ApplicationGraph,
    start: &Endpoint,
    dir: impl Fn(&'g Edge) -> (&'g Endpoint, &'g Endpoint),
) -> BTreeSet<Endpoint> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(at) = queue.pop_front() {
        for e in &graph.edges {
            let (from, to) = dir(e);
            if *from == at && seen.insert(to.clone()) {
                queue.push_back(to.clone());
            }
        }
    }
    seen
}

/// Resolves the declared loops into their tuple-type sequences.
pub fn loops_of(graph: &ApplicationGraph) -> Result<Vec<LoopPath>> {
    graph
        .loops
        .iter()
        .map(|lp| {
            let tuple_types = lp
                .path
                .windows(2)
                .map(|step| match edges_between(graph, &step[0], &step[1]).as_slice() {
                    [edge] => Ok(edge.tuple_type.clone()),
                    [] => Err(Error::Inconsistency(format!(
                        "loop `{}` uses missing edge {} -> {}",
                        lp.name, step[0], step[1]
                    ))),
                    _ => Err(Error::Inconsistency(format!(
                        "loop `{}` step {} -> {} is ambiguous",
                        lp.name, step[0], step[1]
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LoopPath {
                name: lp.name.clone(),
                path: lp.path.clone(),
                tuple_types,
            })
        })
        .collect()
}
