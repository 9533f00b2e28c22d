//! Exhaustive strategy search and attack-probability sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, AnalyticsError, EnergyBreakdown, EnergyConstants};
use crate::graph::{AttackTopology, GraphError, NetworkGraph, NodeId};
use crate::io::format_sig;
use crate::simulator::SimulationConfig;
use crate::strategy::{NetworkStrategy, NodeStrategy};

/// Energies closer than this are ties; the earlier strategy wins.
pub const ENERGY_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("{relays} relays exceed the exhaustive-search limit of {limit}")]
    CapacityExceeded { relays: usize, limit: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("throughput tolerance must be a non-negative number, got {0}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// Minimum expected energy.
    EnergyOnly,
    /// Minimum expected energy among the strategies of maximal throughput.
    EnergyBestThroughput,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "energy" => Ok(Objective::EnergyOnly),
            "energy-throughput" => Ok(Objective::EnergyBestThroughput),
            other => Err(format!("unknown objective `{other}` (expected energy or energy-throughput)")),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::EnergyOnly => "energy",
            Objective::EnergyBestThroughput => "energy-throughput",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Refuse to enumerate networks with more relays than this.
    pub max_relays: usize,
    /// Strategies within this much of the best throughput count as best.
    pub throughput_tolerance: f64,
    /// Monte Carlo settings for throughput on non-butterfly networks.
    pub simulation: SimulationConfig,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_relays: 24,
            throughput_tolerance: 1e-9,
            simulation: SimulationConfig::default(),
        }
    }
}

/// `3^c * 2^(N-c)`.
pub fn strategy_space_size(graph: &NetworkGraph) -> u128 {
    let c = graph.coding_relay_count() as u32;
    let f = graph.relay_count() as u32 - c;
    3u128.pow(c) * 2u128.pow(f)
}

/// Every network strategy, relays sorted by id with the first relay as the
/// most significant digit; labels run XF, AXF, XAF and F, AF.
pub fn enumerate_strategies(graph: &NetworkGraph) -> StrategyIter {
    let choices: Vec<&'static [NodeStrategy]> =
        graph.relays().iter().map(|&r| NodeStrategy::choices(graph.role(r))).collect();
    StrategyIter {
        digits: vec![0; choices.len()],
        choices,
        done: false,
    }
}

pub struct StrategyIter {
    choices: Vec<&'static [NodeStrategy]>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for StrategyIter {
    type Item = NetworkStrategy;

    fn next(&mut self) -> Option<NetworkStrategy> {
        if self.done {
            return None;
        }
        let current = NetworkStrategy::from_slots(
            self.digits
                .iter()
                .zip(&self.choices)
                .map(|(&d, c)| c[d])
                .collect(),
        );
        self.done = true;
        for pos in (0..self.digits.len()).rev() {
            self.digits[pos] += 1;
            if self.digits[pos] < self.choices[pos].len() {
                self.done = false;
                break;
            }
            self.digits[pos] = 0;
        }
        Some(current)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    #[serde(serialize_with = "serialize_tuple_label")]
    pub strategy: NetworkStrategy,
    /// Position in [`enumerate_strategies`] order.
    pub index: usize,
    pub energy: EnergyBreakdown,
    pub throughput: f64,
    pub objective: Objective,
}

impl OptimizationResult {
    /// One-row CSV: `<relay-id>...,F_E_joules,F_O_joules,F_R_joules,F_D_joules,P_th`.
    pub fn write_csv<W: std::io::Write>(&self, graph: &NetworkGraph, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = graph.relays().iter().map(|&r| graph.id(r).to_string()).collect();
        header.extend(EnergyBreakdown::CSV_HEADER.map(String::from));
        header.push("P_th".into());
        w.write_record(&header)?;
        let mut rec: Vec<String> = self.strategy.slots().iter().map(|s| s.label().to_owned()).collect();
        let e = &self.energy;
        rec.extend([e.total, e.source, e.relay, e.destination].map(|x| format_sig(x, 12)));
        rec.push(format_sig(self.throughput, 12));
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }
}

fn serialize_tuple_label<S: serde::Serializer>(s: &NetworkStrategy, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&s.tuple_label())
}

/// Energy of every enumerated strategy, in enumeration order.
pub fn evaluate_all(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    constants: &EnergyConstants,
    options: &SearchOptions,
) -> Result<Vec<(NetworkStrategy, EnergyBreakdown)>, OptimizeError> {
    if graph.relay_count() > options.max_relays {
        return Err(OptimizeError::CapacityExceeded {
            relays: graph.relay_count(),
            limit: options.max_relays,
        });
    }
    let strategies: Vec<NetworkStrategy> = enumerate_strategies(graph).collect();
    let evaluated = strategies
        .into_par_iter()
        .map(|s| {
            let (_, e) = analytics::evaluate(graph, attacks, &s, constants)?;
            Ok((s, e))
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    Ok(evaluated)
}

/// Index of the cheapest candidate; ties within [`ENERGY_TIE_TOLERANCE`] go
/// to the earliest.
fn cheapest<'a>(candidates: impl IntoIterator<Item = (usize, &'a EnergyBreakdown)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in candidates {
        match best {
            Some((_, b)) if e.total >= b - ENERGY_TIE_TOLERANCE => {}
            _ => best = Some((i, e.total)),
        }
    }
    best.map(|(i, _)| i)
}

/// The strategy of minimal expected energy.
pub fn optimize_energy(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    constants: &EnergyConstants,
    options: &SearchOptions,
) -> Result<OptimizationResult, OptimizeError> {
    let mut all = evaluate_all(graph, attacks, constants, options)?;
    let index = cheapest(all.iter().map(|(_, e)| e).enumerate()).expect("strategy space is never empty");
    let (strategy, energy) = all.swap_remove(index);
    let throughput = analytics::throughput(graph, attacks, &strategy, &options.simulation)?;
    Ok(OptimizationResult {
        strategy,
        index,
        energy,
        throughput,
        objective: Objective::EnergyOnly,
    })
}

/// Among strategies whose throughput is within `throughput_tolerance` of the
/// best, the one of minimal energy.
pub fn optimize_energy_best_throughput(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    constants: &EnergyConstants,
    options: &SearchOptions,
) -> Result<OptimizationResult, OptimizeError> {
    let tol = options.throughput_tolerance;
    if tol.is_nan() || tol < 0.0 {
        return Err(OptimizeError::InvalidTolerance(tol));
    }
    let mut all = evaluate_all(graph, attacks, constants, options)?;
    let throughputs = all
        .par_iter()
        .map(|(s, _)| analytics::throughput(graph, attacks, s, &options.simulation))
        .collect::<Result<Vec<f64>, _>>()?;
    let best = throughputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let index = cheapest(
        all.iter()
            .enumerate()
            .filter(|&(i, _)| throughputs[i] >= best - tol)
            .map(|(i, (_, e))| (i, e)),
    )
    .expect("the best-throughput strategy is always admissible");
    let (strategy, energy) = all.swap_remove(index);
    Ok(OptimizationResult {
        strategy,
        index,
        energy,
        throughput: throughputs[index],
        objective: Objective::EnergyBestThroughput,
    })
}

pub fn optimize(
    objective: Objective,
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    constants: &EnergyConstants,
    options: &SearchOptions,
) -> Result<OptimizationResult, OptimizeError> {
    match objective {
        Objective::EnergyOnly => optimize_energy(graph, attacks, constants, options),
        Objective::EnergyBestThroughput => optimize_energy_best_throughput(graph, attacks, constants, options),
    }
}

/// Which edges a sweep varies and which stay at fixed probabilities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTemplate {
    pub swept: Vec<(NodeId, NodeId)>,
    pub fixed: Vec<((NodeId, NodeId), f64)>,
}

impl SweepTemplate {
    pub fn swept(edges: &[(&str, &str)]) -> Self {
        SweepTemplate {
            swept: edges.iter().map(|&(u, v)| (NodeId::from(u), NodeId::from(v))).collect(),
            fixed: Vec::new(),
        }
    }

    /// Topology with every swept edge at `p`; fixed edges keep their value.
    pub fn at(&self, graph: &NetworkGraph, p: f64) -> Result<AttackTopology, GraphError> {
        AttackTopology::new(
            graph,
            self.fixed
                .iter()
                .cloned()
                .chain(self.swept.iter().map(|e| (e.clone(), p))),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    /// Relay labels in relay id order.
    pub labels: Vec<(NodeId, NodeStrategy)>,
    pub energy: f64,
    pub throughput: f64,
}

impl SweepRow {
    pub fn tuple_label(&self) -> String {
        let inner: Vec<&str> = self.labels.iter().map(|(_, s)| s.label()).collect();
        format!("({})", inner.join(";"))
    }

    pub fn label_of(&self, id: &str) -> Option<NodeStrategy> {
        self.labels.iter().find(|(n, _)| n.as_str() == id).map(|&(_, s)| s)
    }
}

/// Validate a probability grid: finite, inside [0, 1], strictly increasing.
pub fn check_grid(grid: &[f64]) -> Result<(), OptimizeError> {
    if grid.is_empty() {
        return Err(OptimizeError::InvalidGrid("grid is empty".into()));
    }
    if let Some(p) = grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(OptimizeError::InvalidGrid(format!("{p} is outside [0, 1]")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OptimizeError::InvalidGrid("values must be strictly increasing".into()));
    }
    Ok(())
}

/// Parse `start:stop:step`. The stop value is included when the step divides
/// the range to within 1e-12.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, OptimizeError> {
    let bad = |why: &str| OptimizeError::InvalidGrid(format!("`{text}`: {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(bad("expected start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || stop < start {
        return Err(bad("need finite start <= stop"));
    }
    let grid = if stop == start {
        vec![start]
    } else {
        if step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        let span = (stop - start) / step;
        let nearest = span.round();
        let (count, exact) = if ((span - nearest) * step).abs() <= 1e-12 {
            (nearest as usize, true)
        } else {
            (span.floor() as usize, false)
        };
        let mut g: Vec<f64> = (0..=count).map(|k| start + k as f64 * step).collect();
        if exact {
            *g.last_mut().expect("non-empty") = stop;
        }
        g
    };
    check_grid(&grid)?;
    Ok(grid)
}

/// Run the selected optimizer at every grid point.
pub fn sweep(
    graph: &NetworkGraph,
    template: &SweepTemplate,
    grid: &[f64],
    objective: Objective,
    constants: &EnergyConstants,
    options: &SearchOptions,
) -> Result<Vec<SweepRow>, OptimizeError> {
    check_grid(grid)?;
    grid.iter()
        .map(|&p| {
            let attacks = template.at(graph, p)?;
            let r = optimize(objective, graph, &attacks, constants, options)?;
            Ok(SweepRow {
                p,
                labels: r.strategy.assignment(graph).into_iter().collect(),
                energy: r.energy.total,
                throughput: r.throughput,
            })
        })
        .collect()
}

/// A grid point where the optimal label vector differs from the previous one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchPoint {
    pub p: f64,
    pub before: String,
    pub after: String,
}

pub fn switch_points(rows: &[SweepRow]) -> Vec<SwitchPoint> {
    rows.windows(2)
        .filter(|w| w[0].labels != w[1].labels)
        .map(|w| SwitchPoint {
            p: w[1].p,
            before: w[0].tuple_label(),
            after: w[1].tuple_label(),
        })
        .collect()
}

/// `p,<relay-id>...,F_E_joules,P_th` with 12 significant digits.
pub fn write_sweep_csv<W: std::io::Write>(graph: &NetworkGraph, rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["p".to_owned()];
    header.extend(graph.relays().iter().map(|&r| graph.id(r).to_string()));
    header.extend(["F_E_joules".to_owned(), "P_th".to_owned()]);
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![format_sig(row.p, 12)];
        rec.extend(row.labels.iter().map(|(_, s)| s.label().to_owned()));
        rec.push(format_sig(row.energy, 12));
        rec.push(format_sig(row.throughput, 12));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
