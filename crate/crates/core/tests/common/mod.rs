//! Independent re-computations used to cross-check the engine.
//!
//! Nothing here calls into the simulator's event loop; the oracles only read
//! a finished [`Trace`] (for arrival order) and the static model.

#![allow(dead_code)]

use std::collections::BTreeMap;

use agrifog::app::{build_soil_app, ApplicationGraph, Endpoint, ModuleOverride, SoilAppParams};
use agrifog::placement::{cloud_placement, fog_placement, Deployment, Placement};
use agrifog::sim::{SimConfig, Trace};
use agrifog::topology::{build_hierarchy, Bandwidth, HierarchyParams, LinkParams, NodeId, NodeKind, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn soil() -> ApplicationGraph {
    build_soil_app(&SoilAppParams::default()).unwrap()
}

pub fn hierarchy(t1: usize, sensors: usize) -> Topology {
    build_hierarchy(t1, sensors, &HierarchyParams::default()).unwrap()
}

/// A single emission per sensor with a horizon long enough to drain.
pub fn one_shot() -> SimConfig {
    SimConfig {
        duration_ms: 10_000.0,
        emissions_per_sensor: Some(1),
        ..SimConfig::default()
    }
}

fn delay(latency_ms: f64, bandwidth: Bandwidth, bytes: u64) -> f64 {
    match bandwidth {
        Bandwidth::Unbounded => latency_ms,
        Bandwidth::BitsPerSecond(bps) => latency_ms + bytes as f64 * 8000.0 / bps,
    }
}

/// Node a tuple of type `tuple` from `branch` must travel to, derived from
/// the graph edge and the placement only.
pub fn consumer_node(graph: &ApplicationGraph, topo: &Topology, p: &Placement, tuple: &str, branch: NodeId) -> NodeId {
    let edge = graph.edges.iter().find(|e| e.tuple_type == tuple).unwrap();
    match &edge.destination {
        Endpoint::Module(m) => match p.get(m).unwrap() {
            Deployment::Node(n) => n,
            Deployment::EachTier1 => branch,
        },
        _ => topo
            .neighbors(branch)
            .find(|&n| topo.node(n).unwrap().kind == NodeKind::Display)
            .unwrap(),
    }
}

/// Byte-hops completed by the horizon, replayed tuple by tuple from each
/// tuple's creation time and independently derived route.
pub fn replay_network_usage(
    graph: &ApplicationGraph,
    topo: &Topology,
    p: &Placement,
    trace: &Trace,
    horizon_ms: f64,
) -> (u64, BTreeMap<(NodeId, NodeId), u64>) {
    let mut total = 0;
    let mut per_link = BTreeMap::new();
    for t in &trace.tuples {
        let ty = &graph.tuple_types[t.tuple_type];
        let dst = consumer_node(graph, topo, p, &ty.name, t.branch);
        let route = topo.route(t.source, dst).unwrap();
        let mut clock = t.created_ms;
        for hop in route.windows(2) {
            let link = topo.link_between(hop[0], hop[1]).unwrap();
            clock += delay(link.latency_ms, link.bandwidth, ty.size_bytes);
            if clock > horizon_ms {
                break;
            }
            total += ty.size_bytes;
            *per_link.entry((hop[0].min(hop[1]), hop[0].max(hop[1]))).or_insert(0) += ty.size_bytes;
        }
    }
    (total, per_link)
}

/// Byte-hops for one fully drained emission from every sensor, with all
/// emission ratios equal to 1: every edge carries exactly one tuple.
pub fn analytic_usage_per_cycle(graph: &ApplicationGraph, topo: &Topology, p: &Placement) -> u64 {
    let mut total = 0;
    for sensor in topo.nodes_of_kind(NodeKind::Sensor) {
        let branch = topo
            .neighbors(sensor.id)
            .find(|&n| topo.node(n).unwrap().kind == NodeKind::FogTier1)
            .unwrap();
        for e in &graph.edges {
            let src = match &e.source {
                Endpoint::Sensor => sensor.id,
                Endpoint::Module(m) => match p.get(m).unwrap() {
                    Deployment::Node(n) => n,
                    Deployment::EachTier1 => branch,
                },
                Endpoint::Display => unreachable!(),
            };
            let dst = consumer_node(graph, topo, p, &e.tuple_type, branch);
            let hops = topo.route(src, dst).unwrap().len() as u64 - 1;
            total += hops * graph.tuple_type(&e.tuple_type).unwrap().size_bytes;
        }
    }
    total
}

/// Single-server FIFO recursion per instance: start = max(arrival, previous finish).
/// Returns (instance, tuple, waiting) for every job the engine started,
/// alongside the engine's own value.
pub fn lindley_waits(graph: &ApplicationGraph, trace: &Trace) -> Vec<(usize, u64, f64, f64)> {
    let mut out = Vec::new();
    for (i, info) in trace.instances.iter().enumerate() {
        let module = graph.module(&info.module).unwrap();
        let arrivals: Vec<_> = trace.arrivals.iter().filter(|a| a.instance == i).collect();
        let started: Vec<_> = trace.executions.iter().filter(|e| e.instance == i).collect();
        let mut free_at = f64::NEG_INFINITY;
        for (a, e) in arrivals.iter().zip(&started) {
            assert_eq!(a.tuple, e.tuple, "FIFO order broken at {}", info.label);
            let service = graph.tuple_types[trace.tuples[a.tuple as usize].tuple_type].cpu_length_mi * 1000.0
                / module.allocated_mips;
            let start = a.time_ms.max(free_at);
            free_at = start + service;
            out.push((i, a.tuple, start - a.time_ms, e.waiting_ms));
        }
    }
    out
}

/// Sum of propagation latencies along the links the tuple and all its
/// ancestors traversed, read from the traversal log.
pub fn lineage_link_latency(topo: &Topology, trace: &Trace, tuple: u64) -> f64 {
    let mut sum = 0.0;
    let mut at = Some(tuple);
    while let Some(seq) = at {
        for tr in trace.traversals.iter().filter(|tr| tr.tuple == seq) {
            sum += topo.link_between(tr.from, tr.to).unwrap().latency_ms;
        }
        at = trace.tuples[seq as usize].parent;
    }
    sum
}

pub struct RandomCase {
    pub graph: ApplicationGraph,
    pub topo: Topology,
    pub placement: Placement,
    pub cfg: SimConfig,
    pub label: String,
}

/// Small randomized scenario with integer-valued delays.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = SoilAppParams::default();
    for out in ["t3", "t4", "t5"] {
        params
            .modules
            .entry("DataAggregation".into())
            .or_insert_with(ModuleOverride::default)
            .ratios
            .insert(out.into(), rng.random_range(1..=3));
    }
    let graph = build_soil_app(&params).unwrap();

    let mut hp = HierarchyParams::default();
    hp.links.sensor_tier1 = LinkParams::latency(rng.random_range(0..5) as f64);
    hp.links.display_tier1 = LinkParams::latency(rng.random_range(0..5) as f64);
    hp.links.tier1_tier2 = LinkParams::latency(rng.random_range(0..10) as f64);
    hp.links.tier2_cloud = LinkParams::latency(rng.random_range(0..150) as f64);
    let t1 = rng.random_range(1..=3);
    let sensors = rng.random_range(1..=4);
    let topo = build_hierarchy(t1, sensors, &hp).unwrap();

    let placement = match rng.random_range(0..3) {
        0 => cloud_placement(&graph, &topo).unwrap(),
        1 => fog_placement(&graph, &topo).unwrap(),
        _ => {
            let mut p = Placement::new("random");
            for m in &graph.modules {
                let d = match rng.random_range(0..4) {
                    0 => Deployment::Node(topo.cloud().unwrap()),
                    1 => Deployment::Node(topo.tier2().unwrap()),
                    2 => Deployment::EachTier1,
                    _ => Deployment::Node(topo.id_of("tier1-0").unwrap()),
                };
                p.assign(m.name.clone(), d);
            }
            p
        }
    };

    let cfg = SimConfig {
        duration_ms: rng.random_range(1..600) as f64,
        emission_interval_ms: [5.0, 10.0, 20.0, 50.0, 1000.0][rng.random_range(0..5)],
        emissions_per_sensor: Some(rng.random_range(1..=5)),
        emission_phase: agrifog::sim::EmissionPhase::InPhase,
        seed,
    };
    let label = format!(
        "seed={seed} t1={t1} sensors={sensors} strategy={} horizon={} interval={}",
        placement.strategy, cfg.duration_ms, cfg.emission_interval_ms
    );
    RandomCase {
        graph,
        topo,
        placement,
        cfg,
        label,
    }
}
