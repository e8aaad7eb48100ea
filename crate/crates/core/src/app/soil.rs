//! The built-in soil-management application.
//!
//! ```text
//! SENSOR -t1-> Sense -t2-> DataAggregation -t3-> StatusGeneration -t6-> DISPLAY
//!                                          -t4-> EventDetection   -t7-> DISPLAY
//!                                          -t5-> SoilAnalytics    -t8-> DISPLAY
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AppLoop, AppModule, ApplicationGraph, Edge, Endpoint, IoMapping, TupleType};
use crate::error::{Error, Result};

pub const SENSE: &str = "Sense";
pub const DATA_AGGREGATION: &str = "DataAggregation";
pub const STATUS_GENERATION: &str = "StatusGeneration";
pub const EVENT_DETECTION: &str = "EventDetection";
pub const SOIL_ANALYTICS: &str = "SoilAnalytics";

const DEFAULT_TUPLE_BYTES: u64 = 100;

// (name, MI). Each processing step takes 10 ms at the module's allocation;
// display-bound tuples are not executed.
const TUPLES: [(&str, f64); 8] = [
    ("t1", 5.0),
    ("t2", 6.0),
    ("t3", 5.0),
    ("t4", 12.0),
    ("t5", 12.0),
    ("t6", 0.0),
    ("t7", 0.0),
    ("t8", 0.0),
];

const MODULES: [(&str, f64); 5] = [
    (SENSE, 500.0),
    (DATA_AGGREGATION, 600.0),
    (STATUS_GENERATION, 500.0),
    (EVENT_DETECTION, 1200.0),
    (SOIL_ANALYTICS, 1200.0),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TupleOverride {
    pub size_bytes: Option<u64>,
    pub cpu_length_mi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModuleOverride {
    pub allocated_mips: Option<f64>,
    /// Emission ratio keyed by output tuple type.
    pub ratios: BTreeMap<String, u32>,
}

/// Overrides applied on top of the default soil application.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoilAppParams {
    pub tuples: BTreeMap<String, TupleOverride>,
    pub modules: BTreeMap<String, ModuleOverride>,
}

fn io(input: &str, output: &str) -> IoMapping {
    IoMapping {
        input: input.into(),
        output: output.into(),
        ratio: 1,
    }
}

fn edge(source: Endpoint, destination: Endpoint, tuple: &str) -> Edge {
    Edge {
        source,
        destination,
        tuple_type: tuple.into(),
    }
}

pub fn build_soil_app(params: &SoilAppParams) -> Result<ApplicationGraph> {
    let m = Endpoint::module;
    let mut graph = ApplicationGraph {
        tuple_types: TUPLES
            .iter()
            .map(|&(name, mi)| TupleType {
                name: name.into(),
                size_bytes: DEFAULT_TUPLE_BYTES,
                cpu_length_mi: mi,
            })
            .collect(),
        modules: MODULES
            .iter()
            .map(|&(name, mips)| AppModule {
                name: name.into(),
                allocated_mips: mips,
                io_map: match name {
                    SENSE => vec![io("t1", "t2")],
                    DATA_AGGREGATION => vec![io("t2", "t3"), io("t2", "t4"), io("t2", "t5")],
                    STATUS_GENERATION => vec![io("t3", "t6")],
                    EVENT_DETECTION => vec![io("t4", "t7")],
                    _ => vec![io("t5", "t8")],
                },
            })
            .collect(),
        edges: vec![
            edge(Endpoint::Sensor, m(SENSE), "t1"),
            edge(m(SENSE), m(DATA_AGGREGATION), "t2"),
            edge(m(DATA_AGGREGATION), m(STATUS_GENERATION), "t3"),
            edge(m(DATA_AGGREGATION), m(EVENT_DETECTION), "t4"),
            edge(m(DATA_AGGREGATION), m(SOIL_ANALYTICS), "t5"),
            edge(m(STATUS_GENERATION), Endpoint::Display, "t6"),
            edge(m(EVENT_DETECTION), Endpoint::Display, "t7"),
            edge(m(SOIL_ANALYTICS), Endpoint::Display, "t8"),
        ],
        loops: [
            ("status", STATUS_GENERATION),
            ("alert", EVENT_DETECTION),
            ("recommendation", SOIL_ANALYTICS),
        ]
        .iter()
        .map(|&(name, producer)| AppLoop {
            name: name.into(),
            path: vec![Endpoint::Sensor, m(SENSE), m(DATA_AGGREGATION), m(producer), Endpoint::Display],
        })
        .collect(),
    };

    for (name, o) in &params.tuples {
        let field = |f: &str| format!("application.tuples.{name}.{f}");
        let tuple = graph
            .tuple_types
            .iter_mut()
            .find(|t| &t.name == name)
            .ok_or_else(|| Error::lookup("tuple type", name))?;
        if let Some(size) = o.size_bytes {
            if size == 0 {
                return Err(Error::param(field("size_bytes"), "must be > 0"));
            }
            tuple.size_bytes = size;
        }
        if let Some(mi) = o.cpu_length_mi {
            if !(mi.is_finite() && mi >= 0.0) {
                return Err(Error::param(field("cpu_length_mi"), format!("must be >= 0, got {mi}")));
            }
            tuple.cpu_length_mi = mi;
        }
    }

    for (name, o) in &params.modules {
        let field = |f: &str| format!("application.modules.{name}.{f}");
        let module = graph.module_mut(name).ok_or_else(|| Error::lookup("module", name))?;
        if let Some(mips) = o.allocated_mips {
            if !(mips.is_finite() && mips > 0.0) {
                return Err(Error::param(field("allocated_mips"), format!("must be > 0, got {mips}")));
            }
            module.allocated_mips = mips;
        }
        for (output, &ratio) in &o.ratios {
            if ratio == 0 {
                return Err(Error::param(field(&format!("ratios.{output}")), "must be >= 1"));
            }
            let mut hit = false;
            for mapping in module.io_map.iter_mut().filter(|io| &io.output == output) {
                mapping.ratio = ratio;
                hit = true;
            }
            if !hit {
                return Err(Error::param(
                    field(&format!("ratios.{output}")),
                    format!("module `{name}` does not emit `{output}`"),
                ));
            }
        }
    }

    Ok(graph)
}
