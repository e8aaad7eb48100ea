use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::topology::NodeId;

/// Where a tuple in transit is headed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// A module instance, by index.
    Instance(usize),
    Display(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A sensor produces its `index`-th reading.
    Emit { sensor: NodeId, index: u64 },
    /// `tuple` completes hop `hop` of route `route`.
    LinkArrival {
        tuple: u64,
        route: usize,
        hop: usize,
        target: Target,
        delay_ms: f64,
    },
    ExecStart { instance: usize },
    ExecFinish { instance: usize, tuple: u64 },
    Deliver { tuple: u64, display: NodeId },
}

impl EventKind {
    pub fn tag(&self) -> EventTag {
        match self {
            EventKind::Emit { .. } => EventTag::Emit,
            EventKind::LinkArrival { .. } => EventTag::LinkArrival,
            EventKind::ExecStart { .. } => EventTag::ExecStart,
            EventKind::ExecFinish { .. } => EventTag::ExecFinish,
            EventKind::Deliver { .. } => EventTag::Deliver,
        }
    }

    /// The tuple this event carries, if any.
    pub fn tuple(&self) -> Option<u64> {
        match *self {
            EventKind::LinkArrival { tuple, .. }
            | EventKind::ExecFinish { tuple, .. }
            | EventKind::Deliver { tuple, .. } => Some(tuple),
            EventKind::Emit { .. } | EventKind::ExecStart { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventTag {
    Emit,
    LinkArrival,
    ExecStart,
    ExecFinish,
    Deliver,
}

#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time_ms: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_ms
            .total_cmp(&other.time_ms)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Pending events, popped in `(time, seq)` order. `seq` is assigned at
/// scheduling time, so simultaneous events run in the order they were scheduled.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<SimEvent>>,
    next_seq: u64,
    now_ms: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_ms(&self) -> f64 {
        self.now_ms
    }

    pub fn schedule(&mut self, time_ms: f64, kind: EventKind) -> Result<u64> {
        if !(time_ms >= self.now_ms) || !time_ms.is_finite() {
            return Err(Error::Internal(format!(
                "event scheduled at {time_ms} ms before current time {} ms",
                self.now_ms
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(SimEvent { time_ms, seq, kind }));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(e)| e.time_ms)
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        let Reverse(event) = self.heap.pop()?;
        self.now_ms = event.time_ms;
        Some(event)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Pending events in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &SimEvent> {
        self.heap.iter().map(|Reverse(e)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start(i: usize) -> EventKind {
        EventKind::ExecStart { instance: i }
    }

    #[test]
    fn time_then_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(5.0, start(0)).unwrap();
        q.schedule(1.0, start(1)).unwrap();
        q.schedule(5.0, start(2)).unwrap();
        q.schedule(1.0, start(3)).unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop())
            .map(|e| match e.kind {
                EventKind::ExecStart { instance } => instance,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(order, [1, 3, 0, 2]);
        assert_eq!(q.now_ms(), 5.0);
    }

    #[test]
    fn rejects_past_events() {
        let mut q = EventQueue::new();
        q.schedule(10.0, start(0)).unwrap();
        q.pop();
        assert!(q.schedule(9.0, start(0)).is_err());
        assert!(q.schedule(f64::NAN, start(0)).is_err());
        assert!(q.schedule(10.0, start(0)).is_ok());
    }
}
