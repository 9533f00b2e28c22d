//! `ncauth`: plan relay authentication for XOR-coded networks.

mod input;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use ncauth_core::analytics::{self, butterfly_throughput_closed_form};
use ncauth_core::io::{format_sig, network_to_json};
use ncauth_core::optimizer::{self, strategy_space_size, switch_points, SweepTemplate};
use ncauth_core::simulator::{simulate, Estimate, RNG_ALGORITHM};
use ncauth_core::{NetworkGraph, NodeId, NodeStrategy, Objective, SearchOptions, SimulationConfig};

use input::{input_error, load_constants, load_network, load_strategy, parse_links, CliError, Network};

#[derive(Parser)]
#[command(name = "ncauth", version, about = "Energy-optimal relay authentication under pollution attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print roles, strategy-space size and attacked edges.
    Describe {
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Find the optimal strategy for one attack topology.
    Optimize {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the selected strategy as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-optimize while sweeping the attack probability of some links.
    Sweep {
        #[command(flatten)]
        net: NetworkArgs,
        /// Swept edges, e.g. `A-C,B-C`.
        #[arg(long, default_value = "")]
        links: String,
        /// `start:stop:step`, inclusive when the step divides the range.
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic predictions with the Monte Carlo simulator.
    Simulate {
        #[command(flatten)]
        net: NetworkArgs,
        /// `C=XAF,D=F`, or a strategy JSON file.
        #[arg(long)]
        strategy: String,
        #[command(flatten)]
        model: ModelArgs,
        /// Exit with status 3 if any gated |z| exceeds this.
        #[arg(long)]
        fail_z: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the network (with overrides applied) in the input JSON format.
    Export {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct NetworkArgs {
    /// Network JSON file, or `builtin:butterfly`.
    network: String,
    /// Attack file overriding edge-level probabilities.
    #[arg(long)]
    attacks: Option<PathBuf>,
    /// Attack override `FROM-TO=P`; repeatable or comma-separated.
    #[arg(long = "attack", value_name = "FROM-TO=P")]
    attack: Vec<String>,
}

impl NetworkArgs {
    fn load(&self) -> Result<Network, CliError> {
        let net = load_network(&self.network, self.attacks.as_deref(), &self.attack)?;
        if !net.graph.has_independent_merges() {
            eprintln!(
                "warning: some coding relay merges paths that share an upstream relay; \
                 analytic values assume independent arrivals and are approximate here"
            );
        }
        Ok(net)
    }
}

#[derive(Args)]
struct ModelArgs {
    /// JSON file with q_t, q_r, q_a, q_xor in joules.
    #[arg(long)]
    constants_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl ModelArgs {
    fn simulation(&self) -> Result<SimulationConfig, CliError> {
        if self.trials == 0 {
            return Err(CliError::Input("--trials must be at least 1".into()));
        }
        Ok(SimulationConfig {
            trials: self.trials,
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct SearchArgs {
    /// `energy` or `energy-throughput`.
    #[arg(long, default_value = "energy")]
    objective: Objective,
    /// Throughput slack for the energy-throughput objective.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Refuse exhaustive search beyond this many relays.
    #[arg(long, default_value_t = 24)]
    max_relays: usize,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    inputs: Vec<String>,
    parameters: BTreeMap<String, Value>,
    tool_version: &'static str,
}

impl RunManifest {
    fn new(command: &str, inputs: &[String]) -> Self {
        RunManifest {
            command: command.to_owned(),
            inputs: inputs.to_vec(),
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }

    fn param(mut self, key: &str, value: Value) -> Self {
        self.parameters.insert(key.to_owned(), value);
        self
    }

    fn model(self, m: &ModelArgs) -> Self {
        self.param("trials", json!(m.trials))
            .param("seed", json!(m.seed))
            .param("rng", json!(RNG_ALGORITHM))
            .param(
                "constants_file",
                json!(m.constants_file.as_ref().map(|p| p.display().to_string())),
            )
    }

    fn search(self, s: &SearchArgs) -> Self {
        self.param("objective", json!(s.objective.to_string()))
            .param("throughput_tolerance", json!(s.tolerance))
            .param("max_relays", json!(s.max_relays))
    }

    fn attacks(self, net: &NetworkArgs) -> Self {
        self.param("attack_overrides", json!(net.attack))
            .param("attack_file", json!(net.attacks.as_ref().map(|p| p.display().to_string())))
    }
}

/// Write `bytes` to `path` and the manifest beside it as `<path>.manifest.json`.
fn emit(path: &Path, bytes: &[u8], manifest: &RunManifest) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| input_error(path.display(), e))?;
    let mut m = path.as_os_str().to_owned();
    m.push(".manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest is plain data");
    text.push('\n');
    fs::write(&m, text).map_err(|e| input_error(Path::new(&m).display(), e))
}

fn search_options(s: &SearchArgs, m: &ModelArgs) -> Result<SearchOptions, CliError> {
    Ok(SearchOptions {
        max_relays: s.max_relays,
        throughput_tolerance: s.tolerance,
        simulation: m.simulation()?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Describe { net } => describe(&net),
        Command::Optimize { net, model, search, out } => optimize(&net, &model, &search, out.as_deref()),
        Command::Sweep {
            net,
            links,
            grid,
            model,
            search,
            out,
        } => sweep(&net, &links, &grid, &model, &search, out.as_deref()),
        Command::Simulate {
            net,
            strategy,
            model,
            fail_z,
            out,
        } => simulate_cmd(&net, &strategy, &model, fail_z, out.as_deref()),
        Command::Export { net, out } => {
            let n = net.load()?;
            let text = network_to_json(&n.graph, &n.attacks);
            match out {
                Some(path) => emit(&path, text.as_bytes(), &RunManifest::new("export", &n.inputs).attacks(&net)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn role_name(g: &NetworkGraph, i: usize) -> String {
    g.role(i).to_string()
}

fn describe(args: &NetworkArgs) -> Result<(), CliError> {
    let n = args.load()?;
    let g = &n.graph;
    println!("network: {}", args.network);
    println!(
        "nodes: {} ({} sources, {} relays, {} destinations), edges: {}",
        g.node_count(),
        g.sources().len(),
        g.relay_count(),
        g.destinations().len(),
        g.edge_count()
    );
    for i in g.topo_indices() {
        println!("  {:<12} {}", g.id(*i).as_str(), role_name(g, *i));
    }
    println!(
        "c={}, N={}, strategies={}",
        g.coding_relay_count(),
        g.relay_count(),
        strategy_space_size(g)
    );
    println!("edges:");
    for e in 0..g.edge_count() {
        let (u, v) = g.edge_ids(e);
        println!("  {u} -> {v}  p={}", format_sig(n.attacks.prob(e), 12));
    }
    let order: Vec<String> = g.topological_order().iter().map(NodeId::to_string).collect();
    println!("topological order: {}", order.join(" "));
    println!(
        "independent merges: {}",
        if g.has_independent_merges() { "yes" } else { "no" }
    );
    Ok(())
}

fn optimize(net: &NetworkArgs, model: &ModelArgs, search: &SearchArgs, out: Option<&Path>) -> Result<(), CliError> {
    let n = net.load()?;
    let constants = load_constants(model.constants_file.as_deref())?;
    let opts = search_options(search, model)?;
    let g = &n.graph;
    let r = optimizer::optimize(search.objective, g, &n.attacks, &constants, &opts)?;
    println!("objective: {}", search.objective);
    println!("strategy: {}", r.strategy.named_label(g));
    println!("  enumeration index {} of {}", r.index, strategy_space_size(g));
    let e = &r.energy;
    let j = |x: f64| format_sig(x, 12);
    println!("F_E = {} J", j(e.total));
    println!("  F_O = {} J", j(e.source));
    println!("  F_R = {} J", j(e.relay));
    for re in &e.relays {
        println!(
            "    {}: reception {}, authentication {}, transmission {}",
            re.node,
            j(re.reception),
            j(re.authentication),
            j(re.transmission)
        );
    }
    println!("  F_D = {} J", j(e.destination));
    let how = if g.is_canonical_butterfly() {
        "closed form".to_owned()
    } else {
        format!("Monte Carlo, {} trials, seed {}", model.trials, model.seed)
    };
    println!("P_th = {} ({how})", format_sig(r.throughput, 12));
    if let Some(path) = out {
        let mut buf = Vec::new();
        r.write_csv(g, &mut buf).map_err(|e| input_error(path.display(), e))?;
        let manifest = RunManifest::new("optimize", &n.inputs).model(model).search(search).attacks(net);
        emit(path, &buf, &manifest)?;
    }
    Ok(())
}

fn sweep(
    net: &NetworkArgs,
    links: &str,
    grid: &str,
    model: &ModelArgs,
    search: &SearchArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let n = net.load()?;
    let g = &n.graph;
    let constants = load_constants(model.constants_file.as_deref())?;
    let opts = search_options(search, model)?;
    let swept = parse_links(links)?;
    for (u, v) in &swept {
        if g.find_edge(u, v).is_none() {
            return Err(CliError::Input(format!("--links: edge {u}->{v} does not exist")));
        }
    }
    let points = optimizer::parse_grid(grid)?;
    let fixed = (0..g.edge_count())
        .map(|e| {
            let (u, v) = g.edge_ids(e);
            ((u.clone(), v.clone()), n.attacks.prob(e))
        })
        .filter(|(edge, _)| !swept.contains(edge))
        .collect();
    let template = SweepTemplate { swept, fixed };
    let rows = optimizer::sweep(g, &template, &points, search.objective, &constants, &opts)?;

    let mut buf = Vec::new();
    optimizer::write_sweep_csv(g, &rows, &mut buf).map_err(|e| input_error("sweep CSV", e))?;
    match out {
        Some(path) => {
            let manifest = RunManifest::new("sweep", &n.inputs)
                .param("links", json!(links))
                .param("grid", json!(grid))
                .model(model)
                .search(search)
                .attacks(net);
            emit(path, &buf, &manifest)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| input_error("stdout", e))?,
    }
    let switches = switch_points(&rows);
    if switches.is_empty() {
        eprintln!("no strategy switch over the grid");
    }
    for s in switches {
        eprintln!("switch at p={}: {} -> {}", format_sig(s.p, 12), s.before, s.after);
    }
    Ok(())
}

struct Row {
    quantity: String,
    analytic: Option<f64>,
    est: Estimate,
    gated: bool,
    note: String,
}

fn simulate_cmd(
    net: &NetworkArgs,
    strategy: &str,
    model: &ModelArgs,
    fail_z: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let n = net.load()?;
    let g = &n.graph;
    let constants = load_constants(model.constants_file.as_deref())?;
    let cfg = model.simulation()?;
    let s = load_strategy(g, strategy)?;
    let (state, energy) = analytics::evaluate(g, &n.attacks, &s, &constants).map_err(|e| input_error("analytics", e))?;
    let sim = simulate(g, &n.attacks, &s, &constants, &cfg).map_err(|e| input_error("simulation", e))?;

    let mut rows = Vec::new();
    for x in &sim.forward {
        rows.push(Row {
            quantity: format!("f_{}", x.node),
            analytic: state.forward_of(g, &x.node),
            est: x.estimate,
            gated: true,
            note: String::new(),
        });
    }
    for x in &sim.pollute {
        rows.push(Row {
            quantity: format!("P_{}->{}", x.from, x.to),
            analytic: state.pollute_of(g, &x.from, &x.to),
            est: x.estimate,
            gated: true,
            note: String::new(),
        });
    }
    rows.push(Row {
        quantity: "F_E".into(),
        analytic: Some(energy.total),
        est: sim.energy,
        gated: true,
        note: String::new(),
    });
    let (th_analytic, th_note) = if g.is_canonical_butterfly() {
        let p = |u: &str, v: &str| n.attacks.get(&NodeId::from(u), &NodeId::from(v)).unwrap_or(0.0);
        let c = s.get(g, &NodeId::from("C")).expect("butterfly has relay C");
        let cf = butterfly_throughput_closed_form(p("A", "C"), p("B", "C"), p("C", "D"), c)
            .map_err(|e| input_error("throughput", e))?;
        let mut note = format!(
            "closed form vs strict decoding: {:+.6}, not gated",
            sim.throughput.mean - cf
        );
        if c == NodeStrategy::Axf {
            note.push_str("; AXF closed form credits partially valid combinations");
        }
        (Some(cf), note)
    } else {
        (None, "Monte Carlo only".to_owned())
    };
    rows.push(Row {
        quantity: "P_th".into(),
        analytic: th_analytic,
        est: sim.throughput,
        gated: false,
        note: th_note,
    });

    println!("strategy: {}", s.named_label(g));
    println!("trials: {}, seed: {}, rng: {}", sim.trials, sim.seed, sim.rng);
    println!(
        "{:<16} {:>14} {:>14} {:>12} {:>9}",
        "quantity", "analytic", "simulated", "std_error", "z"
    );
    let mut worst: Option<(f64, String)> = None;
    for r in &rows {
        let analytic = r.analytic.map_or("-".to_owned(), |a| format_sig(a, 8));
        let z = match r.analytic {
            None => "-".to_owned(),
            Some(a) => match r.est.z_score(a) {
                Some(z) => {
                    if r.gated && worst.as_ref().is_none_or(|(w, _)| z.abs() > *w) {
                        worst = Some((z.abs(), r.quantity.clone()));
                    }
                    format!("{z:.2}")
                }
                None if (r.est.mean - a).abs() <= 1e-12 => "exact".to_owned(),
                None => {
                    if r.gated {
                        worst = Some((f64::INFINITY, r.quantity.clone()));
                    }
                    "inf".to_owned()
                }
            },
        };
        println!(
            "{:<16} {:>14} {:>14} {:>12} {:>9}  {}",
            r.quantity,
            analytic,
            format_sig(r.est.mean, 8),
            format_sig(r.est.std_error, 3),
            z,
            r.note
        );
    }

    if let Some(path) = out {
        let mut buf = Vec::new();
        sim.write_csv(&mut buf).map_err(|e| input_error(path.display(), e))?;
        let manifest = RunManifest::new("simulate", &n.inputs)
            .param("strategy", json!(s.assignment_string(g)))
            .model(model)
            .attacks(net);
        emit(path, &buf, &manifest)?;
    }

    if let (Some(limit), Some((z, what))) = (fail_z, worst) {
        if z > limit {
            return Err(CliError::Threshold(format!("|z| = {z:.2} on {what} exceeds --fail-z {limit}")));
        }
    }
    Ok(())
}
