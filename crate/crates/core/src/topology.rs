//! Hierarchical cloud / fog / sensor network.
//!
//! The network is a tree: one cloud data center, one tier-2 fog server,
//! any number of tier-1 fog servers below it, and sensors plus one display
//! hanging off each tier-1 server. Routes are therefore unique.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Cloud,
    FogTier2,
    FogTier1,
    Sensor,
    Display,
}

impl NodeKind {
    /// Whether nodes of this kind can host application modules.
    pub fn is_compute(self) -> bool {
        matches!(self, NodeKind::Cloud | NodeKind::FogTier2 | NodeKind::FogTier1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetNode {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub capacity_mips: f64,
}

/// Link bandwidth. Serialized as a number of bits per second, or `null`
/// for an unbounded link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum Bandwidth {
    Unbounded,
    BitsPerSecond(f64),
}

impl From<Option<f64>> for Bandwidth {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Bandwidth::Unbounded, Bandwidth::BitsPerSecond)
    }
}

impl From<Bandwidth> for Option<f64> {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Unbounded => None,
            Bandwidth::BitsPerSecond(bps) => Some(bps),
        }
    }
}

impl Bandwidth {
    fn is_valid(self) -> bool {
        match self {
            Bandwidth::Unbounded => true,
            Bandwidth::BitsPerSecond(bps) => bps.is_finite() && bps > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetLink {
    pub a: NodeId,
    pub b: NodeId,
    pub latency_ms: f64,
    pub bandwidth: Bandwidth,
}

impl NetLink {
    pub fn connects(&self, x: NodeId, y: NodeId) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }

    fn key(&self) -> (NodeId, NodeId) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub latency_ms: f64,
    #[serde(default = "unbounded")]
    pub bandwidth_bps: Bandwidth,
}

fn unbounded() -> Bandwidth {
    Bandwidth::Unbounded
}

impl LinkParams {
    pub const fn latency(latency_ms: f64) -> Self {
        LinkParams {
            latency_ms,
            bandwidth_bps: Bandwidth::Unbounded,
        }
    }
}

/// Per-tier link parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TierLinks {
    pub sensor_tier1: LinkParams,
    pub display_tier1: LinkParams,
    pub tier1_tier2: LinkParams,
    pub tier2_cloud: LinkParams,
}

impl Default for TierLinks {
    fn default() -> Self {
        TierLinks {
            sensor_tier1: LinkParams::latency(2.0),
            display_tier1: LinkParams::latency(2.0),
            tier1_tier2: LinkParams::latency(4.0),
            tier2_cloud: LinkParams::latency(100.0),
        }
    }
}

/// CPU capacity per compute tier, in MIPS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TierCapacities {
    pub cloud: f64,
    pub tier2: f64,
    pub tier1: f64,
}

impl Default for TierCapacities {
    fn default() -> Self {
        TierCapacities {
            cloud: 40960.0,
            tier2: 8192.0,
            tier1: 6144.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyParams {
    pub links: TierLinks,
    pub capacity_mips: TierCapacities,
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    nodes: Vec<NetNode>,
    links: Vec<NetLink>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
    by_name: HashMap<String, NodeId>,
    by_pair: HashMap<(NodeId, NodeId), usize>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node. Names are expected to be unique; `validate_topology`
    /// reports duplicates.
    pub fn add_node(&mut self, name: impl Into<String>, kind: NodeKind, capacity_mips: f64) -> NodeId {
        let id = NodeId(self.nodes.len());
        let name = name.into();
        self.by_name.entry(name.clone()).or_insert(id);
        self.nodes.push(NetNode {
            id,
            name,
            kind,
            capacity_mips,
        });
        self.adjacency.push(Vec::new());
        id
    }

    /// Adds a link without checking it; see [`validate_topology`].
    pub fn add_link(&mut self, a: NodeId, b: NodeId, params: LinkParams) {
        let ix = self.links.len();
        let link = NetLink {
            a,
            b,
            latency_ms: params.latency_ms,
            bandwidth: params.bandwidth_bps,
        };
        if a.0 < self.nodes.len() && b.0 < self.nodes.len() {
            self.adjacency[a.0].push((b, ix));
            if a != b {
                self.adjacency[b.0].push((a, ix));
            }
            self.by_pair.entry(link.key()).or_insert(ix);
        }
        self.links.push(link);
    }

    pub fn nodes(&self) -> &[NetNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[NetLink] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Result<&NetNode> {
        self.nodes.get(id.0).ok_or_else(|| Error::lookup("node", id.to_string()))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut NetNode> {
        self.nodes.get_mut(id.0).ok_or_else(|| Error::lookup("node", id.to_string()))
    }

    pub fn id_of(&self, name: &str) -> Result<NodeId> {
        self.by_name.get(name).copied().ok_or_else(|| Error::lookup("node", name))
    }

    pub fn name_of(&self, id: NodeId) -> &str {
        self.nodes.get(id.0).map_or("?", |n| n.name.as_str())
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &NetNode> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// Sets the capacity of every node of `kind`.
    pub fn set_capacity(&mut self, kind: NodeKind, capacity_mips: f64) {
        for n in self.nodes.iter_mut().filter(|n| n.kind == kind) {
            n.capacity_mips = capacity_mips;
        }
    }

    fn single(&self, kind: NodeKind) -> Result<NodeId> {
        let mut it = self.nodes_of_kind(kind);
        match (it.next(), it.next()) {
            (Some(n), None) => Ok(n.id),
            _ => Err(Error::Configuration(format!("topology must have exactly one {kind:?} node"))),
        }
    }

    pub fn cloud(&self) -> Result<NodeId> {
        self.single(NodeKind::Cloud)
    }

    pub fn tier2(&self) -> Result<NodeId> {
        self.single(NodeKind::FogTier2)
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(id.0).into_iter().flatten().map(|&(n, _)| n)
    }

    /// The tier-1 fog node a sensor or display is attached to (a tier-1
    /// node is its own branch).
    pub fn branch_of(&self, id: NodeId) -> Result<NodeId> {
        let node = self.node(id)?;
        if node.kind == NodeKind::FogTier1 {
            return Ok(id);
        }
        self.neighbors(id)
            .find(|&n| self.nodes[n.0].kind == NodeKind::FogTier1)
            .ok_or_else(|| Error::Configuration(format!("node `{}` is not attached to a tier-1 fog node", node.name)))
    }

    /// The display attached to tier-1 node `tier1`.
    pub fn display_of(&self, tier1: NodeId) -> Result<NodeId> {
        self.neighbors(tier1)
            .find(|&n| self.nodes[n.0].kind == NodeKind::Display)
            .ok_or_else(|| Error::Configuration(format!("branch `{}` has no display", self.name_of(tier1))))
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<&NetLink> {
        self.by_pair.get(&(a.min(b), a.max(b))).map(|&ix| &self.links[ix])
    }

    pub fn link_index(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.by_pair.get(&(a.min(b), a.max(b))).copied()
    }

    /// Stable display label for a link, e.g. `tier2<->cloud`.
    pub fn link_label(&self, link: &NetLink) -> String {
        let (x, y) = link.key();
        format!("{}<->{}", self.name_of(x), self.name_of(y))
    }

    /// Path from `src` to `dst`, both inclusive. `route(a, a) == [a]`.
    pub fn route(&self, src: NodeId, dst: NodeId) -> Result<Vec<NodeId>> {
        self.node(src)?;
        self.node(dst)?;
        let mut parent: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        parent[src.0] = Some(src);
        let mut queue = VecDeque::from([src]);
        while let Some(at) = queue.pop_front() {
            if at == dst {
                break;
            }
            for next in self.neighbors(at) {
                if parent[next.0].is_none() {
                    parent[next.0] = Some(at);
                    queue.push_back(next);
                }
            }
        }
        if parent[dst.0].is_none() {
            return Err(Error::Inconsistency(format!(
                "no route from `{}` to `{}`",
                self.name_of(src),
                self.name_of(dst)
            )));
        }
        let mut path = vec![dst];
        let mut at = dst;
        while at != src {
            at = parent[at.0].expect("visited");
            path.push(at);
        }
        path.reverse();
        Ok(path)
    }

    pub fn route_by_name(&self, src: &str, dst: &str) -> Result<Vec<NodeId>> {
        self.route(self.id_of(src)?, self.id_of(dst)?)
    }
}

pub fn tier1_name(branch: usize) -> String {
    format!("tier1-{branch}")
}

pub fn sensor_name(branch: usize, index: usize) -> String {
    format!("sensor-{branch}-{index}")
}

pub fn display_name(branch: usize) -> String {
    format!("display-{branch}")
}

pub const CLOUD_NAME: &str = "cloud";
pub const TIER2_NAME: &str = "tier2";

/// Builds the cloud - tier-2 - tier-1 tree with `sensors_per_tier1` sensors
/// and one display under every tier-1 node.
pub fn build_hierarchy(num_tier1: usize, sensors_per_tier1: usize, params: &HierarchyParams) -> Result<Topology> {
    if num_tier1 == 0 {
        return Err(Error::param("topology.num_tier1", "must be >= 1"));
    }
    if sensors_per_tier1 == 0 {
        return Err(Error::param("topology.sensors_per_tier1", "must be >= 1"));
    }
    let links = &params.links;
    for (field, p) in [
        ("sensor_tier1", links.sensor_tier1),
        ("display_tier1", links.display_tier1),
        ("tier1_tier2", links.tier1_tier2),
        ("tier2_cloud", links.tier2_cloud),
    ] {
        if !(p.latency_ms.is_finite() && p.latency_ms >= 0.0) {
            return Err(Error::param(
                format!("topology.links.{field}.latency_ms"),
                format!("must be >= 0, got {}", p.latency_ms),
            ));
        }
        if !p.bandwidth_bps.is_valid() {
            return Err(Error::param(format!("topology.links.{field}.bandwidth_bps"), "must be > 0 or null"));
        }
    }
    let cap = &params.capacity_mips;
    for (field, v) in [("cloud", cap.cloud), ("tier2", cap.tier2), ("tier1", cap.tier1)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(format!("topology.capacity_mips.{field}"), format!("must be > 0, got {v}")));
        }
    }

    let mut topo = Topology::new();
    let cloud = topo.add_node(CLOUD_NAME, NodeKind::Cloud, cap.cloud);
    let tier2 = topo.add_node(TIER2_NAME, NodeKind::FogTier2, cap.tier2);
    topo.add_link(cloud, tier2, links.tier2_cloud);
    for b in 0..num_tier1 {
        let t1 = topo.add_node(tier1_name(b), NodeKind::FogTier1, cap.tier1);
        topo.add_link(tier2, t1, links.tier1_tier2);
        for s in 0..sensors_per_tier1 {
            let sensor = topo.add_node(sensor_name(b, s), NodeKind::Sensor, 0.0);
            topo.add_link(t1, sensor, links.sensor_tier1);
        }
        let display = topo.add_node(display_name(b), NodeKind::Display, 0.0);
        topo.add_link(t1, display, links.display_tier1);
    }
    Ok(topo)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyViolation {
    #[error("node name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("link {index} references a missing node")]
    UnknownEndpoint { index: usize },
    #[error("self-link on `{0}`")]
    SelfLink(String),
    #[error("more than one link between `{0}` and `{1}`")]
    DuplicateLink(String, String),
    #[error("link `{link}` has invalid latency {value} ms")]
    InvalidLatency { link: String, value: f64 },
    #[error("link `{0}` has invalid bandwidth")]
    InvalidBandwidth(String),
    #[error("link `{0}` closes a cycle")]
    Cycle(String),
    #[error("topology is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("expected exactly one {kind:?} node, found {count}")]
    KindCount { kind: NodeKind, count: usize },
    #[error("`{upper}` ({upper_mips} MIPS) must have more capacity than `{lower}` ({lower_mips} MIPS)")]
    CapacityOrdering {
        upper: String,
        upper_mips: f64,
        lower: String,
        lower_mips: f64,
    },
    #[error("`{node}` has invalid capacity {value} MIPS")]
    InvalidCapacity { node: String, value: f64 },
    #[error("`{node}`: {reason}")]
    Attachment { node: String, reason: &'static str },
}

/// Checks tree shape, capacity ordering and attachment rules. Empty means valid.
pub fn validate_topology(topo: &Topology) -> Vec<TopologyViolation> {
    use TopologyViolation as V;
    let mut out = Vec::new();
    let n = topo.nodes.len();

    let mut names = HashMap::new();
    for node in &topo.nodes {
        if names.insert(node.name.as_str(), node.id).is_some() {
            out.push(V::DuplicateName(node.name.clone()));
        }
    }

    // Union-find over links; a link joining an already-connected pair closes a cycle.
    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    let mut pairs = HashMap::new();
    let mut components = n;
    for (index, link) in topo.links.iter().enumerate() {
        if link.a.0 >= n || link.b.0 >= n {
            out.push(V::UnknownEndpoint { index });
            continue;
        }
        let label = topo.link_label(link);
        if !(link.latency_ms.is_finite() && link.latency_ms >= 0.0) {
            out.push(V::InvalidLatency {
                link: label.clone(),
                value: link.latency_ms,
            });
        }
        if !link.bandwidth.is_valid() {
            out.push(V::InvalidBandwidth(label.clone()));
        }
        if link.a == link.b {
            out.push(V::SelfLink(topo.name_of(link.a).to_string()));
            continue;
        }
        if pairs.insert(link.key(), index).is_some() {
            out.push(V::DuplicateLink(topo.name_of(link.a).into(), topo.name_of(link.b).into()));
        }
        let (ra, rb) = (find(&mut root, link.a.0), find(&mut root, link.b.0));
        if ra == rb {
            out.push(V::Cycle(label));
        } else {
            root[ra] = rb;
            components -= 1;
        }
    }
    if n > 0 && components > 1 {
        out.push(V::Disconnected { components });
    }

    for kind in [NodeKind::Cloud, NodeKind::FogTier2] {
        let count = topo.nodes_of_kind(kind).count();
        if count != 1 {
            out.push(V::KindCount { kind, count });
        }
    }

    for node in &topo.nodes {
        let valid = if node.kind.is_compute() {
            node.capacity_mips.is_finite() && node.capacity_mips > 0.0
        } else {
            node.capacity_mips == 0.0
        };
        if !valid {
            out.push(V::InvalidCapacity {
                node: node.name.clone(),
                value: node.capacity_mips,
            });
        }
    }

    // Capacity ordering: cloud > tier-2 > tier-1.
    for (upper_kind, lower_kind) in [(NodeKind::Cloud, NodeKind::FogTier2), (NodeKind::FogTier2, NodeKind::FogTier1)] {
        for upper in topo.nodes_of_kind(upper_kind) {
            for lower in topo.nodes_of_kind(lower_kind) {
                if upper.capacity_mips <= lower.capacity_mips {
                    out.push(V::CapacityOrdering {
                        upper: upper.name.clone(),
                        upper_mips: upper.capacity_mips,
                        lower: lower.name.clone(),
                        lower_mips: lower.capacity_mips,
                    });
                }
            }
        }
    }

    for node in &topo.nodes {
        let kinds: Vec<NodeKind> = topo.neighbors(node.id).map(|x| topo.nodes[x.0].kind).collect();
        let reason = match node.kind {
            NodeKind::FogTier1 if !kinds.contains(&NodeKind::FogTier2) => Some("tier-1 fog node must link to the tier-2 fog node"),
            NodeKind::Sensor | NodeKind::Display if kinds != [NodeKind::FogTier1] => {
                Some("sensors and displays must link to exactly one tier-1 fog node and nothing else")
            }
            _ => None,
        };
        if let Some(reason) = reason {
            out.push(V::Attachment {
                node: node.name.clone(),
                reason,
            });
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_topo(t1: usize, s: usize) -> Topology {
        build_hierarchy(t1, s, &HierarchyParams::default()).unwrap()
    }

    #[test]
    fn node_and_link_counts() {
        let t = default_topo(4, 3);
        assert_eq!(t.nodes().len(), 22);
        assert_eq!(t.links().len(), 21);

        let t = default_topo(4, 21);
        assert_eq!(t.nodes().len(), 94);
        assert_eq!(t.node(t.tier2().unwrap()).unwrap().capacity_mips, 8192.0);
    }

    #[test]
    fn minimal_instance() {
        let t = default_topo(1, 1);
        assert_eq!(t.nodes().len(), 5);
        assert!(validate_topology(&t).is_empty());
        let names = |p: Vec<NodeId>| p.into_iter().map(|id| t.name_of(id).to_string()).collect::<Vec<_>>();
        assert_eq!(names(t.route_by_name("sensor-0-0", "cloud").unwrap()), ["sensor-0-0", "tier1-0", "tier2", "cloud"]);
        assert_eq!(names(t.route_by_name("display-0", "tier1-0").unwrap()), ["display-0", "tier1-0"]);
    }

    #[test]
    fn routes() {
        let t = default_topo(4, 3);
        let r = t.route_by_name("sensor-2-1", "cloud").unwrap();
        assert_eq!(r.len() - 1, 3);
        let a = t.id_of("tier1-3").unwrap();
        assert_eq!(t.route(a, a).unwrap(), vec![a]);
        let r = t.route_by_name("tier1-1", "display-1").unwrap();
        assert_eq!(r, vec![t.id_of("tier1-1").unwrap(), t.id_of("display-1").unwrap()]);
        assert!(matches!(t.route(a, NodeId(999)), Err(Error::Lookup { .. })));
        assert!(t.route_by_name("nowhere", "cloud").is_err());
    }

    #[test]
    fn default_hierarchy_is_valid() {
        assert_eq!(validate_topology(&default_topo(4, 3)), vec![]);
    }

    #[test]
    fn extra_link_closes_cycle() {
        let mut t = default_topo(4, 3);
        let s = t.id_of("sensor-0-0").unwrap();
        let t2 = t.tier2().unwrap();
        t.add_link(s, t2, LinkParams::latency(1.0));
        let report = validate_topology(&t);
        assert!(report.iter().any(|v| matches!(v, TopologyViolation::Cycle(_))), "{report:?}");
    }

    #[test]
    fn capacity_ordering_violation() {
        let mut t = default_topo(4, 3);
        let id = t.id_of("tier1-0").unwrap();
        t.node_mut(id).unwrap().capacity_mips = 9000.0;
        let report = validate_topology(&t);
        assert_eq!(
            report,
            vec![TopologyViolation::CapacityOrdering {
                upper: "tier2".into(),
                upper_mips: 8192.0,
                lower: "tier1-0".into(),
                lower_mips: 9000.0,
            }]
        );
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(matches!(build_hierarchy(0, 3, &HierarchyParams::default()), Err(Error::Parameter { .. })));
        assert!(matches!(build_hierarchy(2, 0, &HierarchyParams::default()), Err(Error::Parameter { .. })));
    }

    #[test]
    fn negative_latency_rejected() {
        let mut p = HierarchyParams::default();
        p.links.tier1_tier2.latency_ms = -1.0;
        match build_hierarchy(1, 1, &p) {
            Err(Error::Parameter { field, .. }) => assert_eq!(field, "topology.links.tier1_tier2.latency_ms"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn branch_and_display_lookup() {
        let t = default_topo(3, 2);
        let s = t.id_of("sensor-2-1").unwrap();
        let b = t.branch_of(s).unwrap();
        assert_eq!(t.name_of(b), "tier1-2");
        assert_eq!(t.name_of(t.display_of(b).unwrap()), "display-2");
    }

    #[test]
    fn sensor_attached_elsewhere_is_flagged() {
        let mut t = Topology::new();
        let c = t.add_node("cloud", NodeKind::Cloud, 100.0);
        let f2 = t.add_node("tier2", NodeKind::FogTier2, 50.0);
        let s = t.add_node("s", NodeKind::Sensor, 0.0);
        t.add_link(c, f2, LinkParams::latency(1.0));
        t.add_link(f2, s, LinkParams::latency(1.0));
        let report = validate_topology(&t);
        assert!(report.iter().any(|v| matches!(v, TopologyViolation::Attachment { node, .. } if node == "s")));
    }
}
