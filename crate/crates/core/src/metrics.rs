//! End-to-end latency and network usage accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Running {
    count: u64,
    sum: f64,
    max: f64,
}

impl Running {
    fn push(&mut self, v: f64) {
        if self.count == 0 || v > self.max {
            self.max = v;
        }
        self.count += 1;
        self.sum += v;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    fn max(&self) -> Option<f64> {
        (self.count > 0).then_some(self.max)
    }
}

/// Tuple bookkeeping at the end of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainReport {
    /// Tuples emitted by sensors.
    pub emitted: u64,
    /// Tuples produced by module executions.
    pub created: u64,
    /// Tuples whose execution finished at a module.
    pub consumed: u64,
    /// Tuples that reached a display.
    pub delivered: u64,
    /// Tuples on a link, queued, executing or awaiting delivery at the horizon.
    pub in_flight: u64,
}

impl DrainReport {
    pub fn is_balanced(&self) -> bool {
        self.emitted + self.created == self.consumed + self.delivered + self.in_flight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopStats {
    pub name: String,
    pub count: u64,
    pub mean_ms: Option<f64>,
    pub max_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitStats {
    pub count: u64,
    pub mean_ms: Option<f64>,
    pub max_ms: Option<f64>,
}

/// Mean split of loop latency into its network, execution and queueing parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub network_ms: f64,
    pub execution_ms: f64,
    pub waiting_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_loop: Vec<LoopStats>,
    /// Mean over every loop completion of every loop.
    pub overall_mean_ms: Option<f64>,
    pub overall_max_ms: Option<f64>,
    pub completions: u64,
    pub mean_breakdown: Option<LatencyBreakdown>,
    /// Byte-hops over all inter-node links.
    pub network_usage_bytes: u64,
    pub network_usage_bytes_per_s: f64,
    pub per_link_bytes: BTreeMap<String, u64>,
    /// Queueing delay per module instance, keyed `Module@node`.
    pub instance_waiting: BTreeMap<String, WaitStats>,
    pub counts: DrainReport,
    pub horizon_ms: f64,
}

impl MetricsReport {
    pub fn loop_stats(&self, name: &str) -> Option<&LoopStats> {
        self.per_loop.iter().find(|l| l.name == name)
    }
}

/// Accumulators owned by one simulation run.
#[derive(Debug, Clone)]
pub struct MetricsCollector {
    loops: Vec<(String, Running)>,
    overall: Running,
    network: Running,
    execution: Running,
    waiting: Running,
    link_labels: Vec<String>,
    link_bytes: Vec<u64>,
    instance_labels: Vec<String>,
    instance_waits: Vec<Running>,
}

impl MetricsCollector {
    pub fn new(
        loop_names: impl IntoIterator<Item = String>,
        link_labels: Vec<String>,
        instance_labels: Vec<String>,
    ) -> Self {
        MetricsCollector {
            loops: loop_names.into_iter().map(|n| (n, Running::default())).collect(),
            overall: Running::default(),
            network: Running::default(),
            execution: Running::default(),
            waiting: Running::default(),
            link_bytes: vec![0; link_labels.len()],
            link_labels,
            instance_waits: vec![Running::default(); instance_labels.len()],
            instance_labels,
        }
    }

    /// Counts `bytes` crossing link `link`. Colocated transfers must not be recorded.
    pub fn record_traversal(&mut self, link: usize, bytes: u64) {
        self.link_bytes[link] += bytes;
    }

    pub fn record_loop_completion(&mut self, loop_index: usize, latency_ms: f64) -> Result<()> {
        if !(latency_ms >= 0.0) {
            return Err(Error::Internal(format!("negative loop latency {latency_ms} ms")));
        }
        let (_, acc) = self
            .loops
            .get_mut(loop_index)
            .ok_or_else(|| Error::Internal(format!("unknown loop index {loop_index}")))?;
        acc.push(latency_ms);
        self.overall.push(latency_ms);
        Ok(())
    }

    /// Records the component split of one loop completion.
    pub fn record_breakdown(&mut self, b: LatencyBreakdown) {
        self.network.push(b.network_ms);
        self.execution.push(b.execution_ms);
        self.waiting.push(b.waiting_ms);
    }

    pub fn record_wait(&mut self, instance: usize, waiting_ms: f64) {
        self.instance_waits[instance].push(waiting_ms);
    }

    pub fn finalize(self, counts: DrainReport, horizon_ms: f64) -> MetricsReport {
        let network_usage_bytes = self.link_bytes.iter().sum();
        let mean_breakdown = match (self.network.mean(), self.execution.mean(), self.waiting.mean()) {
            (Some(network_ms), Some(execution_ms), Some(waiting_ms)) => Some(LatencyBreakdown {
                network_ms,
                execution_ms,
                waiting_ms,
            }),
            _ => None,
        };
        MetricsReport {
            per_loop: self
                .loops
                .iter()
                .map(|(name, acc)| LoopStats {
                    name: name.clone(),
                    count: acc.count,
                    mean_ms: acc.mean(),
                    max_ms: acc.max(),
                })
                .collect(),
            overall_mean_ms: self.overall.mean(),
            overall_max_ms: self.overall.max(),
            completions: self.overall.count,
            mean_breakdown,
            network_usage_bytes,
            network_usage_bytes_per_s: network_usage_bytes as f64 * 1000.0 / horizon_ms,
            per_link_bytes: self.link_labels.into_iter().zip(self.link_bytes).collect(),
            instance_waiting: self
                .instance_labels
                .into_iter()
                .zip(self.instance_waits)
                .map(|(label, acc)| {
                    (
                        label,
                        WaitStats {
                            count: acc.count,
                            mean_ms: acc.mean(),
                            max_ms: acc.max(),
                        },
                    )
                })
                .collect(),
            counts,
            horizon_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collector() -> MetricsCollector {
        MetricsCollector::new(
            ["status".to_string(), "alert".to_string()],
            vec!["a<->b".into(), "b<->c".into()],
            vec!["Sense@b".into()],
        )
    }

    #[test]
    fn constant_stream() {
        let mut c = collector();
        for _ in 0..3 {
            c.record_loop_completion(0, 42.0).unwrap();
        }
        let r = c.finalize(DrainReport::default(), 1000.0);
        let s = r.loop_stats("status").unwrap();
        assert_eq!((s.count, s.mean_ms, s.max_ms), (3, Some(42.0), Some(42.0)));
    }

    #[test]
    fn mean_and_max() {
        let mut c = collector();
        c.record_loop_completion(1, 40.0).unwrap();
        c.record_loop_completion(1, 60.0).unwrap();
        let r = c.finalize(DrainReport::default(), 1000.0);
        let s = r.loop_stats("alert").unwrap();
        assert_eq!((s.mean_ms, s.max_ms), (Some(50.0), Some(60.0)));
        assert_eq!(r.overall_mean_ms, Some(50.0));
    }

    #[test]
    fn empty_loops_are_absent() {
        let r = collector().finalize(DrainReport::default(), 1000.0);
        let s = r.loop_stats("status").unwrap();
        assert_eq!((s.count, s.mean_ms, s.max_ms), (0, None, None));
        assert_eq!(r.overall_mean_ms, None);
        assert_eq!(r.mean_breakdown, None);
        assert_eq!(r.network_usage_bytes, 0);
        assert!(r.per_link_bytes.values().all(|&b| b == 0));
    }

    #[test]
    fn negative_latency_is_internal_error() {
        let mut c = collector();
        assert!(matches!(c.record_loop_completion(0, -1.0), Err(Error::Internal(_))));
    }

    #[test]
    fn link_totals() {
        let mut c = collector();
        c.record_traversal(0, 100);
        c.record_traversal(1, 100);
        c.record_traversal(1, 100);
        let r = c.finalize(DrainReport::default(), 2000.0);
        assert_eq!(r.per_link_bytes["a<->b"], 100);
        assert_eq!(r.per_link_bytes["b<->c"], 200);
        assert_eq!(r.network_usage_bytes, 300);
        assert_eq!(r.network_usage_bytes_per_s, 150.0);
    }

    #[test]
    fn balance() {
        let d = DrainReport {
            emitted: 1,
            created: 7,
            consumed: 5,
            delivered: 3,
            in_flight: 0,
        };
        assert!(d.is_balanced());
        assert!(!DrainReport { in_flight: 1, ..d }.is_balanced());
    }
}
