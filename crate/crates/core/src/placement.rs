//! Module-to-node deployment.
//!
//! A module deployed on the tier-1 tier gets one instance per tier-1 fog
//! node, each serving its own branch. Any other deployment is a single
//! instance shared by every branch.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::app::{ApplicationGraph, DATA_AGGREGATION, SENSE};
use crate::error::{Error, Result};
use crate::topology::{NodeId, NodeKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    Node(NodeId),
    EachTier1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub strategy: String,
    assignment: BTreeMap<String, Deployment>,
}

impl Placement {
    pub fn new(strategy: impl Into<String>) -> Self {
        Placement {
            strategy: strategy.into(),
            assignment: BTreeMap::new(),
        }
    }

    pub fn assign(&mut self, module: impl Into<String>, deployment: Deployment) -> &mut Self {
        self.assignment.insert(module.into(), deployment);
        self
    }

    pub fn unassign(&mut self, module: &str) -> Option<Deployment> {
        self.assignment.remove(module)
    }

    pub fn get(&self, module: &str) -> Option<Deployment> {
        self.assignment.get(module).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<String, Deployment> {
        &self.assignment
    }

    /// Node hosting the instance of `module` that serves tuples from `branch`.
    pub fn host_for(&self, module: &str, branch: NodeId) -> Option<NodeId> {
        match self.assignment.get(module)? {
            Deployment::Node(node) => Some(*node),
            Deployment::EachTier1 => Some(branch),
        }
    }

    /// Every (module, host) instance, in module-name then node order.
    pub fn instances(&self, topo: &Topology) -> Vec<(String, NodeId)> {
        let tier1: Vec<NodeId> = topo.nodes_of_kind(NodeKind::FogTier1).map(|n| n.id).collect();
        self.assignment
            .iter()
            .flat_map(|(module, d)| {
                let hosts = match d {
                    Deployment::Node(node) => vec![*node],
                    Deployment::EachTier1 => tier1.clone(),
                };
                hosts.into_iter().map(move |h| (module.clone(), h))
            })
            .collect()
    }

    /// Sum of hosted module allocations per node, for modules known to `graph`.
    pub fn load_per_node(&self, graph: &ApplicationGraph, topo: &Topology) -> BTreeMap<NodeId, f64> {
        let mut load = BTreeMap::new();
        for (module, host) in self.instances(topo) {
            if let Some(m) = graph.module(&module) {
                *load.entry(host).or_insert(0.0) += m.allocated_mips;
            }
        }
        load
    }
}

fn check_feasible(p: Placement, graph: &ApplicationGraph, topo: &Topology) -> Result<Placement> {
    for (node, load) in p.load_per_node(graph, topo) {
        let n = topo.node(node)?;
        if load > n.capacity_mips {
            return Err(Error::Infeasible {
                node: n.name.clone(),
                load,
                capacity: n.capacity_mips,
            });
        }
    }
    Ok(p)
}

/// Every module as a single instance on the cloud data center.
pub fn cloud_placement(graph: &ApplicationGraph, topo: &Topology) -> Result<Placement> {
    let cloud = topo.cloud()?;
    let mut p = Placement::new("cloud");
    for m in &graph.modules {
        p.assign(m.name.clone(), Deployment::Node(cloud));
    }
    check_feasible(p, graph, topo)
}

/// Sense and DataAggregation on every tier-1 fog node, every other module
/// on the tier-2 fog node.
pub fn fog_placement(graph: &ApplicationGraph, topo: &Topology) -> Result<Placement> {
    let tier2 = topo.tier2()?;
    let mut p = Placement::new("fog");
    for m in &graph.modules {
        let d = if m.name == SENSE || m.name == DATA_AGGREGATION {
            Deployment::EachTier1
        } else {
            Deployment::Node(tier2)
        };
        p.assign(m.name.clone(), d);
    }
    check_feasible(p, graph, topo)
}

/// Builds a placement from a module → host map. A host is a node name, or
/// `tier1` to replicate the module on every tier-1 fog node.
pub fn explicit_placement(
    graph: &ApplicationGraph,
    topo: &Topology,
    map: &BTreeMap<String, String>,
) -> Result<Placement> {
    let mut p = Placement::new("explicit");
    for (module, host) in map {
        if graph.module(module).is_none() {
            return Err(Error::lookup("module", module));
        }
        let d = match host.as_str() {
            "tier1" => Deployment::EachTier1,
            name => Deployment::Node(topo.id_of(name)?),
        };
        p.assign(module.clone(), d);
    }
    check_feasible(p, graph, topo)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementViolation {
    #[error("module `{0}` is not assigned")]
    Unassigned(String),
    #[error("placement assigns unknown module `{0}`")]
    UnknownModule(String),
    #[error("module `{module}` is assigned to missing node {node}")]
    UnknownNode { module: String, node: NodeId },
    #[error("module `{module}` cannot be hosted on {kind:?} node `{node}`")]
    IllegalHost {
        module: String,
        node: String,
        kind: NodeKind,
    },
    #[error("module `{0}` is replicated per tier-1 node but there are none")]
    NoInstances(String),
    #[error("node `{node}` load {load} MIPS exceeds capacity {capacity} MIPS by {overload}")]
    Overload {
        node: String,
        load: f64,
        capacity: f64,
        overload: f64,
    },
}

/// Checks totality, host kinds and per-node capacity. Empty means feasible.
pub fn validate_placement(p: &Placement, graph: &ApplicationGraph, topo: &Topology) -> Vec<PlacementViolation> {
    use PlacementViolation as V;
    let mut out = Vec::new();
    for m in &graph.modules {
        if p.get(&m.name).is_none() {
            out.push(V::Unassigned(m.name.clone()));
        }
    }
    let has_tier1 = topo.nodes_of_kind(NodeKind::FogTier1).next().is_some();
    for (module, d) in p.assignment() {
        if graph.module(module).is_none() {
            out.push(V::UnknownModule(module.clone()));
        }
        match *d {
            Deployment::Node(node) => match topo.node(node) {
                Ok(n) if !n.kind.is_compute() => out.push(V::IllegalHost {
                    module: module.clone(),
                    node: n.name.clone(),
                    kind: n.kind,
                }),
                Ok(_) => {}
                Err(_) => out.push(V::UnknownNode {
                    module: module.clone(),
                    node,
                }),
            },
            Deployment::EachTier1 if !has_tier1 => out.push(V::NoInstances(module.clone())),
            Deployment::EachTier1 => {}
        }
    }
    for (node, load) in p.load_per_node(graph, topo) {
        if let Ok(n) = topo.node(node) {
            if n.kind.is_compute() && load > n.capacity_mips {
                out.push(V::Overload {
                    node: n.name.clone(),
                    load,
                    capacity: n.capacity_mips,
                    overload: load - n.capacity_mips,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::{build_soil_app, SoilAppParams, SOIL_ANALYTICS};
    use crate::topology::{build_hierarchy, HierarchyParams};

    fn setup() -> (ApplicationGraph, Topology) {
        (
            build_soil_app(&SoilAppParams::default()).unwrap(),
            build_hierarchy(4, 3, &HierarchyParams::default()).unwrap(),
        )
    }

    #[test]
    fn cloud_strategy_loads() {
        let (g, t) = setup();
        let p = cloud_placement(&g, &t).unwrap();
        let cloud = t.cloud().unwrap();
        assert_eq!(p.assignment().len(), 5);
        assert!(p.assignment().values().all(|d| *d == Deployment::Node(cloud)));
        assert_eq!(p.load_per_node(&g, &t), BTreeMap::from([(cloud, 4000.0)]));
        assert!(validate_placement(&p, &g, &t).is_empty());
    }

    #[test]
    fn cloud_strategy_infeasible() {
        let (g, mut t) = setup();
        t.set_capacity(NodeKind::Cloud, 3000.0);
        assert!(matches!(
            cloud_placement(&g, &t),
            Err(Error::Infeasible { load, capacity, .. }) if load == 4000.0 && capacity == 3000.0
        ));
    }

    #[test]
    fn fog_strategy_loads() {
        let (g, t) = setup();
        let p = fog_placement(&g, &t).unwrap();
        let load = p.load_per_node(&g, &t);
        for n in t.nodes_of_kind(NodeKind::FogTier1) {
            assert_eq!(load[&n.id], 1100.0);
        }
        assert_eq!(load[&t.tier2().unwrap()], 2900.0);
        assert_eq!(load.len(), 5);
        for (_, host) in p.instances(&t) {
            assert!(t.node(host).unwrap().kind.is_compute());
        }
        assert!(validate_placement(&p, &g, &t).is_empty());
    }

    #[test]
    fn fog_strategy_infeasible() {
        let (g, mut t) = setup();
        t.set_capacity(NodeKind::FogTier1, 1000.0);
        assert!(matches!(fog_placement(&g, &t), Err(Error::Infeasible { load, .. }) if load == 1100.0));
    }

    #[test]
    fn manual_overload_amount() {
        let (g, mut t) = setup();
        t.set_capacity(NodeKind::FogTier1, 3500.0);
        let host = t.id_of("tier1-0").unwrap();
        let mut p = Placement::new("manual");
        for m in &g.modules {
            p.assign(m.name.clone(), Deployment::Node(host));
        }
        let report = validate_placement(&p, &g, &t);
        assert_eq!(
            report,
            vec![PlacementViolation::Overload {
                node: "tier1-0".into(),
                load: 4000.0,
                capacity: 3500.0,
                overload: 500.0,
            }]
        );
    }

    #[test]
    fn missing_module_reported() {
        let (g, t) = setup();
        let mut p = fog_placement(&g, &t).unwrap();
        p.unassign(SOIL_ANALYTICS);
        assert_eq!(validate_placement(&p, &g, &t), vec![PlacementViolation::Unassigned(SOIL_ANALYTICS.into())]);
    }

    #[test]
    fn sensor_host_is_illegal() {
        let (g, t) = setup();
        let mut p = cloud_placement(&g, &t).unwrap();
        p.assign(SENSE, Deployment::Node(t.id_of("sensor-0-0").unwrap()));
        assert!(matches!(
            validate_placement(&p, &g, &t).as_slice(),
            [PlacementViolation::IllegalHost { kind: NodeKind::Sensor, .. }]
        ));
    }

    #[test]
    fn explicit_map() {
        let (g, t) = setup();
        let map = BTreeMap::from([
            (SENSE.to_string(), "tier1".to_string()),
            (DATA_AGGREGATION.to_string(), "tier2".to_string()),
            ("StatusGeneration".to_string(), "cloud".to_string()),
            ("EventDetection".to_string(), "cloud".to_string()),
            (SOIL_ANALYTICS.to_string(), "cloud".to_string()),
        ]);
        let p = explicit_placement(&g, &t, &map).unwrap();
        assert_eq!(p.get(SENSE), Some(Deployment::EachTier1));
        assert!(validate_placement(&p, &g, &t).is_empty());

        let bad = BTreeMap::from([(SENSE.to_string(), "nowhere".to_string())]);
        assert!(matches!(explicit_placement(&g, &t, &bad), Err(Error::Lookup { .. })));
    }

    #[test]
    fn feasibility_is_monotone() {
        let (g, t) = setup();
        let mut p = fog_placement(&g, &t).unwrap();
        for m in &g.modules {
            p.unassign(&m.name);
            assert!(validate_placement(&p, &g, &t)
                .iter()
                .all(|v| matches!(v, PlacementViolation::Unassigned(_))));
        }
    }
}
