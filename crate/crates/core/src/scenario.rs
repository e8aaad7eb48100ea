//! JSON scenario files.
//!
//! Every field is optional; absent fields take the documented defaults and
//! unknown keys are rejected. See `docs/scenario.md` for the schema.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::app::{build_soil_app, ApplicationGraph, SoilAppParams};
use crate::error::Error;
use crate::placement::{cloud_placement, explicit_placement, fog_placement, Placement};
use crate::sim::SimConfig;
use crate::topology::{build_hierarchy, HierarchyParams, NodeKind, TierCapacities, TierLinks, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Cloud,
    Fog,
    /// Module name → node name, or `tier1` for one instance per tier-1 node.
    Explicit(BTreeMap<String, String>),
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Cloud => "cloud",
            Strategy::Fog => "fog",
            Strategy::Explicit(_) => "explicit",
        }
    }

    pub fn place(&self, graph: &ApplicationGraph, topo: &Topology) -> crate::Result<Placement> {
        match self {
            Strategy::Cloud => cloud_placement(graph, topo),
            Strategy::Fog => fog_placement(graph, topo),
            Strategy::Explicit(map) => explicit_placement(graph, topo, map),
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Strategy>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Strategy),
        Many(Vec<Strategy>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyParams {
    pub num_tier1: usize,
    /// Used by single runs; sweeps override it per point.
    pub sensors_per_tier1: usize,
    pub links: TierLinks,
    pub capacity_mips: TierCapacities,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            num_tier1: 4,
            sensors_per_tier1: 3,
            links: TierLinks::default(),
            capacity_mips: TierCapacities::default(),
        }
    }
}

impl TopologyParams {
    pub fn hierarchy(&self) -> HierarchyParams {
        HierarchyParams {
            links: self.links.clone(),
            capacity_mips: self.capacity_mips.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub application: SoilAppParams,
    pub topology: TopologyParams,
    #[serde(deserialize_with = "one_or_many")]
    pub strategy: Vec<Strategy>,
    pub simulation: SimConfig,
    /// Sensors-per-tier-1 values visited by a sweep.
    pub sweep: Vec<usize>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            application: SoilAppParams::default(),
            topology: TopologyParams::default(),
            strategy: vec![Strategy::Cloud, Strategy::Fog],
            simulation: SimConfig::default(),
            sweep: vec![3, 6, 9, 12, 15, 18, 21],
        }
    }
}

impl Scenario {
    pub fn graph(&self) -> crate::Result<ApplicationGraph> {
        build_soil_app(&self.application)
    }

    pub fn topology(&self, sensors_per_tier1: usize) -> crate::Result<Topology> {
        build_hierarchy(self.topology.num_tier1, sensors_per_tier1, &self.topology.hierarchy())
    }

    /// Semantic checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let graph = self.graph().map_err(|e| semantic("application", e))?;
        let topo = self
            .topology(self.topology.sensors_per_tier1)
            .map_err(|e| semantic("topology", e))?;
        self.simulation.validate().map_err(|e| semantic("simulation", e))?;
        if self.strategy.is_empty() {
            return Err(ScenarioError::Semantic {
                field: "strategy".into(),
                message: "at least one strategy is required".into(),
            });
        }
        for s in &self.strategy {
            if let Strategy::Explicit(map) = s {
                for (module, host) in map {
                    let field = format!("strategy.explicit.{module}");
                    if graph.module(module).is_none() {
                        return Err(semantic(&field, Error::lookup("module", module)));
                    }
                    let ok = host == "tier1"
                        || topo
                            .id_of(host)
                            .ok()
                            .and_then(|id| topo.node(id).ok())
                            .is_some_and(|n| n.kind != NodeKind::Sensor && n.kind != NodeKind::Display);
                    if !ok {
                        return Err(ScenarioError::Semantic {
                            field,
                            message: format!("`{host}` is not a compute node or `tier1`"),
                        });
                    }
                }
            }
        }
        if self.sweep.is_empty() {
            return Err(ScenarioError::Semantic {
                field: "sweep".into(),
                message: "must list at least one sensor count".into(),
            });
        }
        if let Some(i) = self.sweep.iter().position(|&n| n == 0) {
            return Err(ScenarioError::Semantic {
                field: format!("sweep[{i}]"),
                message: "sensor counts must be >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn semantic(section: &str, e: Error) -> ScenarioError {
    let (field, message) = match e {
        Error::Parameter { field, reason } => (field, reason),
        other => (section.to_string(), other.to_string()),
    };
    ScenarioError::Semantic { field, message }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// Malformed JSON.
    Syntax { line: usize, column: usize, message: String },
    /// Well-formed JSON that does not fit the schema (unknown key, wrong type).
    Schema { line: usize, column: usize, message: String },
    /// Schema-valid but meaningless values.
    Semantic { field: String, message: String },
}

impl ScenarioError {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioError::Syntax { .. } => "syntax",
            ScenarioError::Schema { .. } => "schema",
            ScenarioError::Semantic { .. } => "semantic",
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Syntax { line, column, message } => {
                write!(f, "syntax error at line {line}, column {column}: {message}")
            }
            ScenarioError::Schema { line, column, message } => {
                write!(f, "invalid scenario at line {line}, column {column}: {message}")
            }
            ScenarioError::Semantic { field, message } => write!(f, "invalid value for `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        // serde_json appends " at line L column C"; drop it since position is carried separately.
        let message = e.to_string();
        let message = message
            .rsplit_once(" at line ")
            .map_or(message.as_str(), |(head, _)| head)
            .to_string();
        match e.classify() {
            serde_json::error::Category::Data => ScenarioError::Schema { line, column, message },
            _ => ScenarioError::Syntax { line, column, message },
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}
