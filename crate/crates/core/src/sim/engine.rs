use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::event::{EventKind, EventQueue, Target};
use super::trace::{ArrivalRecord, DeliveryRecord, EventRecord, ExecutionRecord, InstanceInfo, Trace, TraversalRecord};
use super::{execution_time, transmission_delay, EmissionPhase, SimConfig, TupleInstance, TupleState};
use crate::app::{loops_of, validate_dag, AppModule, ApplicationGraph, Endpoint};
use crate::error::{Error, Result};
use crate::metrics::{DrainReport, LatencyBreakdown, MetricsCollector, MetricsReport};
use crate::placement::{validate_placement, Placement, PlacementViolation};
use crate::topology::{validate_topology, NodeId, NodeKind, Topology};

#[derive(Debug, Clone, Copy)]
enum Consumer {
    Module(usize),
    Display,
}

#[derive(Debug)]
struct TupleInfo {
    size_bytes: u64,
    cpu_length_mi: f64,
    consumer: Consumer,
}

#[derive(Debug, Clone, Copy)]
struct Output {
    tuple: usize,
    ratio: u64,
    counter: usize,
}

#[derive(Debug)]
struct ModuleInfo<'a> {
    module: &'a AppModule,
    /// Outputs per input tuple type.
    outputs: HashMap<usize, Vec<Output>>,
    counters: usize,
}

#[derive(Debug)]
struct Instance {
    module: usize,
    node: NodeId,
    queue: VecDeque<(u64, f64)>,
    /// Set from the moment an EXEC_START is scheduled until the queue drains.
    busy: bool,
    counters: Vec<u64>,
}

/// One simulation run. Single-threaded; separate runs share nothing mutable.
pub struct Simulation<'a> {
    graph: &'a ApplicationGraph,
    topo: &'a Topology,
    placement: &'a Placement,
    cfg: SimConfig,
    tuple_info: Vec<TupleInfo>,
    sensor_outputs: Vec<usize>,
    modules: Vec<ModuleInfo<'a>>,
    instances: Vec<Instance>,
    instance_of: HashMap<(usize, NodeId), usize>,
    loops: Vec<Vec<usize>>,
    routes: Vec<Vec<NodeId>>,
    route_ids: HashMap<(NodeId, NodeId), usize>,
    tuples: Vec<TupleInstance>,
    queue: EventQueue,
    metrics: MetricsCollector,
    trace: Option<Trace>,
    counts: DrainReport,
    finished: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(graph: &'a ApplicationGraph, topo: &'a Topology, placement: &'a Placement, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(v) = validate_dag(graph).first() {
            return Err(Error::Configuration(format!("invalid application graph: {v}")));
        }
        if let Some(v) = validate_topology(topo).first() {
            return Err(Error::Configuration(format!("invalid topology: {v}")));
        }
        if let Some(v) = validate_placement(placement, graph, topo).first() {
            return Err(Error::Configuration(match v {
                PlacementViolation::Unassigned(m) => format!("loop unrealizable: module `{m}` is not placed"),
                other => format!("invalid placement: {other}"),
            }));
        }

        let tuple_index: HashMap<&str, usize> = graph
            .tuple_types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.as_str(), i))
            .collect();
        let module_index: HashMap<&str, usize> = graph
            .modules
            .iter()
            .enumerate()
            .map(|(i, m)| (m.name.as_str(), i))
            .collect();

        let mut sensor_outputs = Vec::new();
        let mut tuple_info = Vec::with_capacity(graph.tuple_types.len());
        for (i, t) in graph.tuple_types.iter().enumerate() {
            let edge = graph.edge_for(&t.name).expect("validated: one edge per tuple type");
            if edge.source == Endpoint::Sensor {
                sensor_outputs.push(i);
            }
            let consumer = match &edge.destination {
                Endpoint::Module(m) => Consumer::Module(module_index[m.as_str()]),
                _ => Consumer::Display,
            };
            tuple_info.push(TupleInfo {
                size_bytes: t.size_bytes,
                cpu_length_mi: t.cpu_length_mi,
                consumer,
            });
        }

        let modules = graph
            .modules
            .iter()
            .map(|module| {
                let mut outputs: HashMap<usize, Vec<Output>> = HashMap::new();
                for (counter, io) in module.io_map.iter().enumerate() {
                    outputs.entry(tuple_index[io.input.as_str()]).or_default().push(Output {
                        tuple: tuple_index[io.output.as_str()],
                        ratio: u64::from(io.ratio),
                        counter,
                    });
                }
                ModuleInfo {
                    module,
                    outputs,
                    counters: module.io_map.len(),
                }
            })
            .collect::<Vec<_>>();

        let mut instances = Vec::new();
        let mut instance_of = HashMap::new();
        let mut instance_labels = Vec::new();
        for (name, node) in placement.instances(topo) {
            let module = module_index[name.as_str()];
            instance_of.insert((module, node), instances.len());
            instance_labels.push(format!("{name}@{}", topo.name_of(node)));
            instances.push(Instance {
                module,
                node,
                queue: VecDeque::new(),
                busy: false,
                counters: vec![0; modules[module].counters],
            });
        }

        let loop_paths = loops_of(graph)?;
        let loops = loop_paths
            .iter()
            .map(|l| l.tuple_types.iter().map(|t| tuple_index[t.as_str()]).collect())
            .collect();
        let metrics = MetricsCollector::new(
            loop_paths.into_iter().map(|l| l.name),
            topo.links().iter().map(|l| topo.link_label(l)).collect(),
            instance_labels,
        );

        Ok(Simulation {
            graph,
            topo,
            placement,
            cfg,
            tuple_info,
            sensor_outputs,
            modules,
            instances,
            instance_of,
            loops,
            routes: Vec::new(),
            route_ids: HashMap::new(),
            tuples: Vec::new(),
            queue: EventQueue::new(),
            metrics,
            trace: None,
            counts: DrainReport::default(),
            finished: false,
        })
    }

    /// Keep a full [`Trace`] of the run.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Trace::default());
        self
    }

    fn sensor_offsets(&self) -> Vec<(NodeId, f64)> {
        let sensors: Vec<NodeId> = self.topo.nodes_of_kind(NodeKind::Sensor).map(|n| n.id).collect();
        let n = sensors.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        sensors
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let offset = match self.cfg.emission_phase {
                    EmissionPhase::InPhase => 0.0,
                    EmissionPhase::Staggered => i as f64 * self.cfg.emission_interval_ms / n,
                    EmissionPhase::Jitter { max_ms } if max_ms > 0.0 => rng.random_range(0.0..max_ms),
                    EmissionPhase::Jitter { .. } => 0.0,
                };
                (s, offset)
            })
            .collect()
    }

    fn emission_allowed(&self, index: u64, time_ms: f64) -> bool {
        self.cfg.emissions_per_sensor.is_none_or(|limit| index < limit) && time_ms < self.cfg.duration_ms
    }

    /// Processes every event up to and including the horizon.
    pub fn run(&mut self) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        for (sensor, offset) in self.sensor_offsets() {
            if self.emission_allowed(0, offset) {
                self.queue.schedule(offset, EventKind::Emit { sensor, index: 0 })?;
            }
        }
        while self.queue.peek_time().is_some_and(|t| t <= self.cfg.duration_ms) {
            let event = self.queue.pop().expect("peeked");
            if let Some(trace) = &mut self.trace {
                trace.events.push(EventRecord {
                    time_ms: event.time_ms,
                    seq: event.seq,
                    kind: event.kind.tag(),
                    tuple: event.kind.tuple(),
                });
            }
            match event.kind {
                EventKind::Emit { sensor, index } => self.on_emit(sensor, index)?,
                EventKind::LinkArrival {
                    tuple,
                    route,
                    hop,
                    target,
                    delay_ms,
                } => self.on_link_arrival(tuple, route, hop, target, delay_ms)?,
                EventKind::ExecStart { instance } => self.on_exec_start(instance)?,
                EventKind::ExecFinish { instance, tuple } => self.on_exec_finish(instance, tuple)?,
                EventKind::Deliver { tuple, display } => self.on_deliver(tuple, display)?,
            }
        }
        self.finished = true;
        Ok(())
    }

    fn now(&self) -> f64 {
        self.queue.now_ms()
    }

    fn on_emit(&mut self, sensor: NodeId, index: u64) -> Result<()> {
        let now = self.now();
        let branch = self.topo.branch_of(sensor)?;
        for i in 0..self.sensor_outputs.len() {
            let tuple_type = self.sensor_outputs[i];
            let seq = self.tuples.len() as u64;
            self.tuples.push(TupleInstance {
                seq,
                tuple_type,
                parent: None,
                origin_time_ms: now,
                origin_sensor: sensor,
                branch,
                created_ms: now,
                source: sensor,
                destination: sensor,
                trail: vec![tuple_type],
                network_ms: 0.0,
                execution_ms: 0.0,
                waiting_ms: 0.0,
                path_latency_ms: 0.0,
                state: TupleState::InFlight,
            });
            self.counts.emitted += 1;
            self.dispatch(seq)?;
        }
        let next = now + self.cfg.emission_interval_ms;
        if self.emission_allowed(index + 1, next) {
            self.queue.schedule(next, EventKind::Emit { sensor, index: index + 1 })?;
        }
        Ok(())
    }

    fn route_id(&mut self, src: NodeId, dst: NodeId) -> Result<usize> {
        if let Some(&id) = self.route_ids.get(&(src, dst)) {
            return Ok(id);
        }
        let id = self.routes.len();
        self.routes.push(self.topo.route(src, dst)?);
        self.route_ids.insert((src, dst), id);
        Ok(id)
    }

    /// Sends a freshly created tuple from its source node towards its consumer.
    fn dispatch(&mut self, seq: u64) -> Result<()> {
        let t = &self.tuples[seq as usize];
        let (source, branch) = (t.source, t.branch);
        let target = match self.tuple_info[t.tuple_type].consumer {
            Consumer::Module(m) => {
                let name = &self.graph.modules[m].name;
                let host = self
                    .placement
                    .host_for(name, branch)
                    .ok_or_else(|| Error::Configuration(format!("module `{name}` is not placed")))?;
                let instance = *self.instance_of.get(&(m, host)).ok_or_else(|| {
                    Error::Configuration(format!("no instance of `{name}` on `{}`", self.topo.name_of(host)))
                })?;
                Target::Instance(instance)
            }
            Consumer::Display => Target::Display(self.topo.display_of(branch)?),
        };
        let destination = match target {
            Target::Instance(i) => self.instances[i].node,
            Target::Display(d) => d,
        };
        self.tuples[seq as usize].destination = destination;
        let route = self.route_id(source, destination)?;
        if self.routes[route].len() == 1 {
            self.arrive(seq, target)
        } else {
            self.schedule_hop(seq, route, 1, target)
        }
    }

    fn schedule_hop(&mut self, tuple: u64, route: usize, hop: usize, target: Target) -> Result<()> {
        let path = &self.routes[route];
        let link = self
            .topo
            .link_between(path[hop - 1], path[hop])
            .ok_or_else(|| Error::Internal("route uses a missing link".into()))?;
        let size = self.tuple_info[self.tuples[tuple as usize].tuple_type].size_bytes;
        let delay_ms = transmission_delay(link, size);
        self.queue.schedule(
            self.now() + delay_ms,
            EventKind::LinkArrival {
                tuple,
                route,
                hop,
                target,
                delay_ms,
            },
        )?;
        Ok(())
    }

    fn on_link_arrival(&mut self, tuple: u64, route: usize, hop: usize, target: Target, delay_ms: f64) -> Result<()> {
        let (from, to) = (self.routes[route][hop - 1], self.routes[route][hop]);
        let link_ix = self
            .topo
            .link_index(from, to)
            .ok_or_else(|| Error::Internal("route uses a missing link".into()))?;
        let latency = self.topo.links()[link_ix].latency_ms;
        let t = &mut self.tuples[tuple as usize];
        t.network_ms += delay_ms;
        t.path_latency_ms += latency;
        let bytes = self.tuple_info[t.tuple_type].size_bytes;
        self.metrics.record_traversal(link_ix, bytes);
        let now = self.queue.now_ms();
        if let Some(trace) = &mut self.trace {
            trace.traversals.push(TraversalRecord {
                tuple,
                from,
                to,
                bytes,
                time_ms: now,
            });
        }
        if hop + 1 == self.routes[route].len() {
            self.arrive(tuple, target)
        } else {
            self.schedule_hop(tuple, route, hop + 1, target)
        }
    }

    fn arrive(&mut self, tuple: u64, target: Target) -> Result<()> {
        let now = self.now();
        match target {
            Target::Instance(i) => {
                let inst = &mut self.instances[i];
                inst.queue.push_back((tuple, now));
                if let Some(trace) = &mut self.trace {
                    trace.arrivals.push(ArrivalRecord {
                        instance: i,
                        tuple,
                        time_ms: now,
                    });
                }
                if !inst.busy {
                    inst.busy = true;
                    self.queue.schedule(now, EventKind::ExecStart { instance: i })?;
                }
            }
            Target::Display(display) => {
                self.queue.schedule(now, EventKind::Deliver { tuple, display })?;
            }
        }
        Ok(())
    }

    fn on_exec_start(&mut self, instance: usize) -> Result<()> {
        let now = self.now();
        let inst = &mut self.instances[instance];
        let (tuple, arrived_ms) = inst
            .queue
            .pop_front()
            .ok_or_else(|| Error::Internal("EXEC_START on an empty queue".into()))?;
        let module = self.modules[inst.module].module;
        let t = &mut self.tuples[tuple as usize];
        let waiting_ms = now - arrived_ms;
        let exec_ms = execution_time(module, self.tuple_info[t.tuple_type].cpu_length_mi);
        t.waiting_ms += waiting_ms;
        t.execution_ms += exec_ms;
        self.metrics.record_wait(instance, waiting_ms);
        let finish_ms = now + exec_ms;
        if let Some(trace) = &mut self.trace {
            trace.executions.push(ExecutionRecord {
                instance,
                tuple,
                arrived_ms,
                start_ms: now,
                finish_ms,
                waiting_ms,
            });
        }
        self.queue.schedule(finish_ms, EventKind::ExecFinish { instance, tuple })?;
        Ok(())
    }

    fn on_exec_finish(&mut self, instance: usize, tuple: u64) -> Result<()> {
        let now = self.now();
        self.tuples[tuple as usize].state = TupleState::Consumed;
        self.counts.consumed += 1;

        let inst = &self.instances[instance];
        let node = inst.node;
        let input = self.tuples[tuple as usize].tuple_type;
        let outputs = self.modules[inst.module].outputs.get(&input).cloned().unwrap_or_default();
        for out in outputs {
            let inst = &mut self.instances[instance];
            inst.counters[out.counter] += 1;
            if inst.counters[out.counter] % out.ratio != 0 {
                continue;
            }
            let parent = &self.tuples[tuple as usize];
            let seq = self.tuples.len() as u64;
            let mut trail = parent.trail.clone();
            trail.push(out.tuple);
            let child = TupleInstance {
                seq,
                tuple_type: out.tuple,
                parent: Some(tuple),
                origin_time_ms: parent.origin_time_ms,
                origin_sensor: parent.origin_sensor,
                branch: parent.branch,
                created_ms: now,
                source: node,
                destination: node,
                trail,
                network_ms: parent.network_ms,
                execution_ms: parent.execution_ms,
                waiting_ms: parent.waiting_ms,
                path_latency_ms: parent.path_latency_ms,
                state: TupleState::InFlight,
            };
            self.tuples.push(child);
            self.counts.created += 1;
            self.dispatch(seq)?;
        }

        let inst = &mut self.instances[instance];
        if inst.queue.is_empty() {
            inst.busy = false;
        } else {
            self.queue.schedule(now, EventKind::ExecStart { instance })?;
        }
        Ok(())
    }

    fn on_deliver(&mut self, tuple: u64, display: NodeId) -> Result<()> {
        let now = self.now();
        let t = &mut self.tuples[tuple as usize];
        t.state = TupleState::Delivered;
        self.counts.delivered += 1;
        let latency_ms = now - t.origin_time_ms;
        let breakdown = LatencyBreakdown {
            network_ms: t.network_ms,
            execution_ms: t.execution_ms,
            waiting_ms: t.waiting_ms,
        };
        let completed: Vec<usize> = self
            .loops
            .iter()
            .enumerate()
            .filter(|(_, seq)| **seq == t.trail)
            .map(|(i, _)| i)
            .collect();
        for &l in &completed {
            self.metrics.record_loop_completion(l, latency_ms)?;
            self.metrics.record_breakdown(breakdown);
        }
        if let Some(trace) = &mut self.trace {
            trace.deliveries.push(DeliveryRecord {
                tuple,
                display,
                delivered_ms: now,
                latency_ms,
                loops: completed,
            });
        }
        Ok(())
    }

    /// Tuple conservation at the current state of the run.
    pub fn drain_check(&self) -> Result<DrainReport> {
        let queued: usize = self.instances.iter().map(|i| i.queue.len()).sum();
        let pending = self.queue.pending().filter(|e| e.kind.tuple().is_some()).count();
        let in_flight = (queued + pending) as u64;
        let marked = self.tuples.iter().filter(|t| t.state == TupleState::InFlight).count() as u64;
        if marked != in_flight {
            return Err(Error::Internal(format!(
                "{marked} tuples marked in flight but {in_flight} found in queues and pending events"
            )));
        }
        let report = DrainReport { in_flight, ..self.counts };
        if !report.is_balanced() {
            return Err(Error::Internal(format!("tuple conservation violated: {report:?}")));
        }
        Ok(report)
    }

    pub fn finish(self) -> Result<(MetricsReport, Option<Trace>)> {
        let counts = self.drain_check()?;
        let report = self.metrics.finalize(counts, self.cfg.duration_ms);
        let trace = self.trace.map(|mut trace| {
            trace.instances = self
                .instances
                .iter()
                .map(|i| InstanceInfo {
                    label: format!("{}@{}", self.graph.modules[i.module].name, self.topo.name_of(i.node)),
                    module: self.graph.modules[i.module].name.clone(),
                    node: i.node,
                })
                .collect();
            trace.tuples = self.tuples;
            trace
        });
        Ok((report, trace))
    }
}

/// Conservation report for a finished run.
pub fn drain_check(sim: &Simulation<'_>) -> Result<DrainReport> {
    sim.drain_check()
}

pub fn simulate(graph: &ApplicationGraph, topo: &Topology, placement: &Placement, cfg: &SimConfig) -> Result<MetricsReport> {
    let mut sim = Simulation::new(graph, topo, placement, cfg.clone())?;
    sim.run()?;
    Ok(sim.finish()?.0)
}

pub fn simulate_traced(
    graph: &ApplicationGraph,
    topo: &Topology,
    placement: &Placement,
    cfg: &SimConfig,
) -> Result<(MetricsReport, Trace)> {
    let mut sim = Simulation::new(graph, topo, placement, cfg.clone())?.with_trace();
    sim.run()?;
    let (report, trace) = sim.finish()?;
    Ok((report, trace.expect("trace enabled")))
}
