use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use agrifog::app::validate_dag;
use agrifog::metrics::MetricsReport;
use agrifog::placement::validate_placement;
use agrifog::scenario::{parse_scenario, Scenario, ScenarioError, Strategy};
use agrifog::sweep::{emit_results, run_single, run_sweep, OutputFormat};
use agrifog::topology::validate_topology;

#[derive(Parser)]
#[command(name = "agrifog", version, about = "Fog/cloud dataflow IoT simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation per strategy and print the full reports.
    Simulate(Opts),
    /// Run the sensor-count sweep for every strategy.
    Sweep(Opts),
    /// Check the application graph, topology and placements without simulating.
    Validate(Opts),
    /// Print the default scenario with every field filled in.
    Defaults,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyFlag {
    Cloud,
    Fog,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatFlag {
    Csv,
    Json,
}

#[derive(Args)]
struct Opts {
    /// Scenario JSON file; defaults apply when omitted.
    #[arg(long, short)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyFlag>,
    /// Sensors per tier-1 node. `sweep` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    sensors: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatFlag>,
}

enum Failure {
    Scenario(ScenarioError),
    Run(agrifog::Error),
    Io(String),
    Invalid(serde_json::Value),
    Rows(Vec<String>),
}

impl Failure {
    fn report(&self) -> (serde_json::Value, u8) {
        match self {
            Failure::Scenario(e) => {
                let mut v = json!({"kind": e.kind(), "message": e.to_string()});
                match e {
                    ScenarioError::Syntax { line, column, .. } | ScenarioError::Schema { line, column, .. } => {
                        v["line"] = json!(line);
                        v["column"] = json!(column);
                    }
                    ScenarioError::Semantic { field, .. } => v["field"] = json!(field),
                }
                (v, 2)
            }
            Failure::Run(e) => (json!({"kind": e.kind(), "message": e.to_string()}), 1),
            Failure::Io(msg) => (json!({"kind": "io", "message": msg}), 1),
            Failure::Invalid(v) => (json!({"kind": "validation", "violations": v}), 1),
            Failure::Rows(errors) => (json!({"kind": "run", "messages": errors}), 1),
        }
    }
}

fn load(opts: &Opts, sweep: bool) -> Result<Scenario, Failure> {
    let mut scenario = match &opts.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            parse_scenario(&text).map_err(Failure::Scenario)?
        }
        None => Scenario::default(),
    };
    if let Some(s) = opts.strategy {
        scenario.strategy = match s {
            StrategyFlag::Cloud => vec![Strategy::Cloud],
            StrategyFlag::Fog => vec![Strategy::Fog],
            StrategyFlag::Both => vec![Strategy::Cloud, Strategy::Fog],
        };
    }
    if !opts.sensors.is_empty() {
        if sweep {
            scenario.sweep = opts.sensors.clone();
        } else if let [n] = opts.sensors[..] {
            scenario.topology.sensors_per_tier1 = n;
        } else {
            return Err(Failure::Scenario(ScenarioError::Semantic {
                field: "--sensors".into(),
                message: "takes a single count outside `sweep`".into(),
            }));
        }
    }
    if let Some(seed) = opts.seed {
        scenario.simulation.seed = seed;
    }
    scenario.validate().map_err(Failure::Scenario)?;
    Ok(scenario)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    sensors: usize,
    strategy: &'a str,
    report: Option<&'a MetricsReport>,
    error: Option<&'a str>,
}

fn simulate_cmd(opts: &Opts) -> Result<(), Failure> {
    let scenario = load(opts, false)?;
    let table = run_single(&scenario);
    let text = match opts.format.unwrap_or(FormatFlag::Json) {
        FormatFlag::Csv => emit_results(&table, OutputFormat::Csv),
        FormatFlag::Json => {
            let out: Vec<SimulateOutput> = table
                .rows
                .iter()
                .map(|r| SimulateOutput {
                    sensors: r.sensors,
                    strategy: &r.strategy,
                    report: r.report.as_ref(),
                    error: r.error.as_deref(),
                })
                .collect();
            serde_json::to_string_pretty(&out).expect("serializes") + "\n"
        }
    };
    write_out(opts.out.as_deref(), &text)?;
    let errors: Vec<String> = table.rows.iter().filter_map(|r| r.error.clone()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Rows(errors))
    }
}

fn sweep_cmd(opts: &Opts) -> Result<(), Failure> {
    let scenario = load(opts, true)?;
    let table = run_sweep(&scenario);
    let format = match opts.format.unwrap_or(FormatFlag::Csv) {
        FormatFlag::Csv => OutputFormat::Csv,
        FormatFlag::Json => OutputFormat::Json,
    };
    write_out(opts.out.as_deref(), &emit_results(&table, format))
}

fn validate_cmd(opts: &Opts) -> Result<(), Failure> {
    let scenario = load(opts, false)?;
    let graph = scenario.graph().map_err(Failure::Run)?;
    let topo = scenario
        .topology(scenario.topology.sensors_per_tier1)
        .map_err(Failure::Run)?;
    let strings = |v: Vec<String>| json!(v);
    let graph_report: Vec<String> = validate_dag(&graph).iter().map(ToString::to_string).collect();
    let topo_report: Vec<String> = validate_topology(&topo).iter().map(ToString::to_string).collect();
    let mut placements = serde_json::Map::new();
    let mut clean = graph_report.is_empty() && topo_report.is_empty();
    for s in &scenario.strategy {
        let report: Vec<String> = match s.place(&graph, &topo) {
            Ok(p) => validate_placement(&p, &graph, &topo).iter().map(ToString::to_string).collect(),
            Err(e) => vec![e.to_string()],
        };
        clean &= report.is_empty();
        placements.insert(s.label().to_string(), strings(report));
    }
    let out = json!({
        "graph": graph_report,
        "topology": topo_report,
        "placements": placements,
    });
    if clean {
        write_out(opts.out.as_deref(), &(serde_json::to_string_pretty(&out).expect("serializes") + "\n"))
    } else {
        Err(Failure::Invalid(out))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(opts) => simulate_cmd(opts),
        Command::Sweep(opts) => sweep_cmd(opts),
        Command::Validate(opts) => validate_cmd(opts),
        Command::Defaults => {
            println!("{}", Scenario::default().to_json());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (report, code) = failure.report();
            eprintln!("{}", json!({ "error": report }));
            ExitCode::from(code)
        }
    }
}
