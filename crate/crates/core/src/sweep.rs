//! Sensor-count sweeps and result serialization.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::app::loops_of;
use crate::metrics::{LoopStats, MetricsReport};
use crate::scenario::{Scenario, Strategy};
use crate::sim::simulate;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    /// Sensors per tier-1 fog node.
    pub sensors: usize,
    pub strategy: String,
    pub mean_latency_ms: Option<f64>,
    pub network_usage_bytes: Option<u64>,
    pub mean_waiting_ms: Option<f64>,
    pub delivered: Option<u64>,
    pub in_flight: Option<u64>,
    pub loops: Vec<LoopStats>,
    pub error: Option<String>,
    #[serde(skip)]
    pub report: Option<MetricsReport>,
}

impl ResultRow {
    pub fn from_report(sensors: usize, strategy: &str, report: MetricsReport) -> Self {
        ResultRow {
            sensors,
            strategy: strategy.to_string(),
            mean_latency_ms: report.overall_mean_ms,
            network_usage_bytes: Some(report.network_usage_bytes),
            mean_waiting_ms: report.mean_breakdown.map(|b| b.waiting_ms),
            delivered: Some(report.counts.delivered),
            in_flight: Some(report.counts.in_flight),
            loops: report.per_loop.clone(),
            error: None,
            report: Some(report),
        }
    }

    pub fn failed(sensors: usize, strategy: &str, error: String) -> Self {
        ResultRow {
            sensors,
            strategy: strategy.to_string(),
            mean_latency_ms: None,
            network_usage_bytes: None,
            mean_waiting_ms: None,
            delivered: None,
            in_flight: None,
            loops: Vec::new(),
            error: Some(error),
            report: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub loop_names: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, sensors: usize, strategy: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.sensors == sensors && r.strategy == strategy)
    }
}

/// One simulation of `scenario` at `sensors` sensors per tier-1 node.
pub fn run_point(scenario: &Scenario, sensors: usize, strategy: &Strategy) -> crate::Result<MetricsReport> {
    let graph = scenario.graph()?;
    let topo = scenario.topology(sensors)?;
    let placement = strategy.place(&graph, &topo)?;
    simulate(&graph, &topo, &placement, &scenario.simulation)
}

fn run_points(scenario: &Scenario, counts: &[usize]) -> ResultTable {
    let loop_names = scenario
        .graph()
        .ok()
        .and_then(|g| loops_of(&g).ok())
        .map(|loops| loops.into_iter().map(|l| l.name).collect())
        .unwrap_or_default();
    let points: Vec<(usize, &Strategy)> = counts
        .iter()
        .flat_map(|&n| scenario.strategy.iter().map(move |s| (n, s)))
        .collect();
    // Points are independent runs; `collect` keeps input order.
    let rows = points
        .par_iter()
        .map(|&(n, s)| match run_point(scenario, n, s) {
            Ok(report) => ResultRow::from_report(n, s.label(), report),
            Err(e) => ResultRow::failed(n, s.label(), e.to_string()),
        })
        .collect();
    ResultTable { loop_names, rows }
}

/// Every (sweep count, strategy) pair, ordered by count then strategy.
pub fn run_sweep(scenario: &Scenario) -> ResultTable {
    run_points(scenario, &scenario.sweep)
}

/// Each strategy once, at the scenario's own `sensors_per_tier1`.
pub fn run_single(scenario: &Scenario) -> ResultTable {
    run_points(scenario, &[scenario.topology.sensors_per_tier1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

fn ms(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

fn int(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn round3(v: Option<f64>) -> Option<f64> {
    v.map(|x| (x * 1000.0).round() / 1000.0)
}

#[derive(Serialize)]
struct JsonLoop<'a> {
    name: &'a str,
    count: u64,
    mean_ms: Option<f64>,
    max_ms: Option<f64>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    sensors: usize,
    strategy: &'a str,
    mean_latency_ms: Option<f64>,
    network_usage_bytes: Option<u64>,
    mean_waiting_ms: Option<f64>,
    delivered: Option<u64>,
    in_flight: Option<u64>,
    loops: Vec<JsonLoop<'a>>,
    error: Option<&'a str>,
}

pub fn csv_header(loop_names: &[String]) -> String {
    let mut cols: Vec<String> = [
        "sensors",
        "strategy",
        "mean_latency_ms",
        "network_usage_bytes",
        "mean_waiting_ms",
        "delivered",
        "in_flight",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for name in loop_names {
        cols.push(format!("{name}_count"));
        cols.push(format!("{name}_mean_ms"));
        cols.push(format!("{name}_max_ms"));
    }
    cols.push("error".into());
    cols.join(",")
}

/// Serializes `table`. Columns are fixed; milliseconds carry three decimals.
pub fn emit_results(table: &ResultTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = csv_header(&table.loop_names);
            out.push('\n');
            for row in &table.rows {
                let mut cells = vec![
                    row.sensors.to_string(),
                    csv_field(&row.strategy),
                    ms(row.mean_latency_ms),
                    int(row.network_usage_bytes),
                    ms(row.mean_waiting_ms),
                    int(row.delivered),
                    int(row.in_flight),
                ];
                for name in &table.loop_names {
                    let stats = row.loops.iter().find(|l| &l.name == name);
                    cells.push(int(stats.map(|s| s.count)));
                    cells.push(ms(stats.and_then(|s| s.mean_ms)));
                    cells.push(ms(stats.and_then(|s| s.max_ms)));
                }
                cells.push(row.error.as_deref().map(csv_field).unwrap_or_default());
                let _ = writeln!(out, "{}", cells.join(","));
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<JsonRow> = table
                .rows
                .iter()
                .map(|r| JsonRow {
                    sensors: r.sensors,
                    strategy: &r.strategy,
                    mean_latency_ms: round3(r.mean_latency_ms),
                    network_usage_bytes: r.network_usage_bytes,
                    mean_waiting_ms: round3(r.mean_waiting_ms),
                    delivered: r.delivered,
                    in_flight: r.in_flight,
                    loops: r
                        .loops
                        .iter()
                        .map(|l| JsonLoop {
                            name: &l.name,
                            count: l.count,
                            mean_ms: round3(l.mean_ms),
                            max_ms: round3(l.max_ms),
                        })
                        .collect(),
                    error: r.error.as_deref(),
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            s
        }
    }
}
