//! Seeded Monte Carlo oracle.
//!
//! Each trial replays one end-to-end round: sources emit, every delivered
//! copy may be attacked on its link, relays act on what they received
//! according to their label, and destinations try to decode. Payloads are
//! tracked as XOR sets of source messages (bit masks) so decoding is a rank
//! test over GF(2).
//!
//! Trial `t` draws from ChaCha8 seeded with the master seed on stream `t`,
//! one uniform per edge in edge order. Tallies are integer event counts, so
//! results do not depend on how trials are split across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::EnergyConstants;
use crate::graph::{AttackTopology, NetworkGraph, NodeId, NodeRole};
use crate::strategy::{NetworkStrategy, NodeStrategy};

/// Identifier of the per-trial random stream layout, written with every result.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64/stream=trial/v1";

const BLOCK: u64 = 8192;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("at most 64 sources are supported, got {0}")]
    TooManySources(usize),
    #[error("strategy does not cover this network's relays")]
    StrategyMismatch,
    #[error("attack topology was built for a different edge set")]
    AttackMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub trials: u64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            trials: 1_000_000,
            seed: 42,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Standardised deviation of `value` from this estimate. `None` when the
    /// sample had no variance.
    pub fn z_score(&self, value: f64) -> Option<f64> {
        (self.std_error > 0.0).then(|| (self.mean - value) / self.std_error)
    }

    /// `|mean - value| <= k * se`, or `<= abs_floor` when that is larger.
    pub fn agrees(&self, value: f64, k: f64, abs_floor: f64) -> bool {
        (self.mean - value).abs() <= (k * self.std_error).max(abs_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeEstimate {
    pub node: NodeId,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeEstimate {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// Transmit frequency of every source and relay, in node order.
    pub forward: Vec<NodeEstimate>,
    /// Frequency of a polluted copy arriving, per edge in edge order.
    pub pollute: Vec<EdgeEstimate>,
    /// Per-destination decode frequency.
    pub decode: Vec<NodeEstimate>,
    /// Joules per round.
    pub energy: Estimate,
    /// Fraction of destinations that decode, averaged over trials.
    pub throughput: Estimate,
    pub trials: u64,
    pub seed: u64,
    pub rng: String,
}

impl SimulationResult {
    pub fn forward_of(&self, id: &NodeId) -> Option<Estimate> {
        self.forward.iter().find(|x| &x.node == id).map(|x| x.estimate)
    }

    pub fn pollute_of(&self, from: &NodeId, to: &NodeId) -> Option<Estimate> {
        self.pollute
            .iter()
            .find(|x| &x.from == from && &x.to == to)
            .map(|x| x.estimate)
    }

    /// Flat CSV: one row per statistic, each carrying trials, seed and RNG id.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "id", "mean", "std_error", "trials", "seed", "rng"])?;
        let trials = self.trials.to_string();
        let seed = self.seed.to_string();
        let mut row = |q: &str, id: String, e: &Estimate| {
            w.write_record([
                q,
                &id,
                &format!("{:e}", e.mean),
                &format!("{:e}", e.std_error),
                &trials,
                &seed,
                &self.rng,
            ])
        };
        for x in &self.forward {
            row("forward", x.node.to_string(), &x.estimate)?;
        }
        for x in &self.pollute {
            row("pollute", format!("{}->{}", x.from, x.to), &x.estimate)?;
        }
        for x in &self.decode {
            row("decode", x.node.to_string(), &x.estimate)?;
        }
        row("energy", "F_E_joules".into(), &self.energy)?;
        row("throughput", "P_th".into(), &self.throughput)?;
        w.flush()?;
        Ok(())
    }
}

/// Atomic energy events of one trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub transmissions: u32,
    pub receptions: u32,
    pub authentications: u32,
    pub xors: u32,
}

impl EventCounts {
    fn as_array(&self) -> [u64; 4] {
        [
            self.transmissions as u64,
            self.receptions as u64,
            self.authentications as u64,
            self.xors as u64,
        ]
    }

    pub fn energy(&self, c: &EnergyConstants) -> f64 {
        weigh(&self.as_array().map(|x| x as f64), c)
    }
}

fn weigh(counts: &[f64; 4], c: &EnergyConstants) -> f64 {
    counts[0] * c.q_t + counts[1] * c.q_r + counts[2] * c.q_a + counts[3] * c.q_xor
}

/// What happened in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Per node.
    pub transmitted: Vec<bool>,
    /// Per edge: a polluted copy arrived.
    pub polluted: Vec<bool>,
    pub events: EventCounts,
    pub energy: f64,
    /// Per destination, in [`NetworkGraph::destinations`] order.
    pub decoded: Vec<bool>,
}

/// Run a single trial drawing attacks from `rng`.
pub fn simulate_trial<R: Rng + ?Sized>(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    strategy: &NetworkStrategy,
    constants: &EnergyConstants,
    rng: &mut R,
) -> Result<TrialOutcome, SimulationError> {
    let engine = Engine::new(graph, attacks, strategy)?;
    let mut s = Scratch::new(graph);
    engine.run(rng, &mut s);
    Ok(TrialOutcome {
        transmitted: s.sent.clone(),
        polluted: s.edge_polluted.clone(),
        events: s.events,
        energy: s.events.energy(constants),
        decoded: s.decoded.clone(),
    })
}

/// Run `config.trials` independent trials and aggregate.
pub fn simulate(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    strategy: &NetworkStrategy,
    constants: &EnergyConstants,
    config: &SimulationConfig,
) -> Result<SimulationResult, SimulationError> {
    if config.trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let engine = Engine::new(graph, attacks, strategy)?;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let blocks = config.trials.div_ceil(BLOCK);
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut t = Tally::new(graph);
            let mut s = Scratch::new(graph);
            let end = ((b + 1) * BLOCK).min(config.trials);
            for trial in b * BLOCK..end {
                let mut rng = base.clone();
                rng.set_stream(trial);
                engine.run(&mut rng, &mut s);
                t.add(&s);
            }
            t
        })
        .reduce(|| Tally::new(graph), Tally::merge);
    Ok(tally.finish(graph, constants, config))
}

struct Engine<'a> {
    graph: &'a NetworkGraph,
    probs: &'a [f64],
    labels: Vec<Option<NodeStrategy>>,
    source_bit: Vec<u64>,
    demand: Vec<u64>,
}

impl<'a> Engine<'a> {
    fn new(
        graph: &'a NetworkGraph,
        attacks: &'a AttackTopology,
        strategy: &NetworkStrategy,
    ) -> Result<Self, SimulationError> {
        if !strategy.fits(graph) {
            return Err(SimulationError::StrategyMismatch);
        }
        if !attacks.fits(graph) {
            return Err(SimulationError::AttackMismatch);
        }
        if graph.sources().len() > 64 {
            return Err(SimulationError::TooManySources(graph.sources().len()));
        }
        let mut source_bit = vec![0u64; graph.node_count()];
        for (b, &s) in graph.sources().iter().enumerate() {
            source_bit[s] = 1 << b;
        }
        let demand = graph
            .destinations()
            .iter()
            .map(|&d| graph.source_ancestors(d).iter().fold(0, |m, &s| m | source_bit[s]))
            .collect();
        Ok(Engine {
            graph,
            probs: attacks.probs(),
            labels: (0..graph.node_count()).map(|i| strategy.at(graph, i)).collect(),
            source_bit,
            demand,
        })
    }

    fn run<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut Scratch) {
        let g = self.graph;
        for (hit, &p) in s.attack.iter_mut().zip(self.probs) {
            *hit = rng.random::<f64>() < p;
        }
        s.events = EventCounts::default();
        let mut dest_slot = 0;
        for &i in g.topo_indices() {
            s.sent[i] = false;
            if g.role(i) == NodeRole::Source {
                s.sent[i] = true;
                s.mask[i] = self.source_bit[i];
                s.dirty[i] = false;
                s.events.transmissions += 1;
                s.events.authentications += 1;
                continue;
            }

            let mut received = 0u32;
            let mut clean = 0u32;
            let mut xor_all = 0u64;
            let mut xor_clean = 0u64;
            let mut basis = Gf2Basis::default();
            for &e in g.in_edges(i) {
                let k = g.edge(e).0;
                if !s.sent[k] {
                    s.edge_polluted[e] = false;
                    continue;
                }
                let dirty = s.dirty[k] || s.attack[e];
                s.edge_polluted[e] = dirty;
                received += 1;
                xor_all ^= s.mask[k];
                if !dirty {
                    clean += 1;
                    xor_clean ^= s.mask[k];
                    basis.insert(s.mask[k]);
                }
            }
            s.events.receptions += received;

            let emit = match self.labels[i] {
                None => {
                    // destination
                    s.events.authentications += received;
                    s.decoded[dest_slot] = basis.spans(self.demand[dest_slot]);
                    dest_slot += 1;
                    None
                }
                Some(NodeStrategy::Forward) => (received > 0).then_some((xor_all, clean < received)),
                Some(NodeStrategy::AuthForward) => {
                    s.events.authentications += received;
                    (received > 0 && clean == received).then_some((xor_all, false))
                }
                Some(NodeStrategy::Xf) => (received > 0).then_some((xor_all, clean < received)),
                Some(NodeStrategy::Axf) => {
                    s.events.authentications += received;
                    s.events.xors += received.saturating_sub(1);
                    (clean > 0).then_some((xor_clean, false))
                }
                Some(NodeStrategy::Xaf) => {
                    if received > 0 {
                        s.events.authentications += 1;
                        s.events.xors += received - 1;
                    }
                    (received > 0 && clean == received).then_some((xor_all, false))
                }
            };
            if let Some((mask, dirty)) = emit {
                s.sent[i] = true;
                s.mask[i] = mask;
                s.dirty[i] = dirty;
                s.events.transmissions += 1;
            }
        }
    }
}

/// XOR basis over GF(2) with distinct leading bits.
#[derive(Default)]
struct Gf2Basis {
    rows: Vec<u64>,
}

impl Gf2Basis {
    fn reduce(&self, mut x: u64) -> u64 {
        for &r in &self.rows {
            x = x.min(x ^ r);
        }
        x
    }

    fn insert(&mut self, x: u64) {
        let x = self.reduce(x);
        if x != 0 {
            self.rows.push(x);
            self.rows.sort_unstable_by(|a, b| b.cmp(a));
        }
    }

    /// Whether every unit vector in `demand` lies in the span.
    fn spans(&self, demand: u64) -> bool {
        let mut rest = demand;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            if self.reduce(bit) != 0 {
                return false;
            }
            rest &= rest - 1;
        }
        true
    }
}

struct Scratch {
    attack: Vec<bool>,
    sent: Vec<bool>,
    mask: Vec<u64>,
    dirty: Vec<bool>,
    edge_polluted: Vec<bool>,
    decoded: Vec<bool>,
    events: EventCounts,
}

impl Scratch {
    fn new(g: &NetworkGraph) -> Self {
        Scratch {
            attack: vec![false; g.edge_count()],
            sent: vec![false; g.node_count()],
            mask: vec![0; g.node_count()],
            dirty: vec![false; g.node_count()],
            edge_polluted: vec![false; g.edge_count()],
            decoded: vec![false; g.destinations().len()],
            events: EventCounts::default(),
        }
    }
}

/// Integer sufficient statistics of a batch of trials.
struct Tally {
    n: u64,
    sent: Vec<u64>,
    polluted: Vec<u64>,
    decoded: Vec<u64>,
    decoded_sum: u64,
    decoded_sq: u64,
    events: [u64; 4],
    cross: [[u64; 4]; 4],
}

impl Tally {
    fn new(g: &NetworkGraph) -> Self {
        Tally {
            n: 0,
            sent: vec![0; g.node_count()],
            polluted: vec![0; g.edge_count()],
            decoded: vec![0; g.destinations().len()],
            decoded_sum: 0,
            decoded_sq: 0,
            events: [0; 4],
            cross: [[0; 4]; 4],
        }
    }

    fn add(&mut self, s: &Scratch) {
        self.n += 1;
        for (acc, &x) in self.sent.iter_mut().zip(&s.sent) {
            *acc += x as u64;
        }
        for (acc, &x) in self.polluted.iter_mut().zip(&s.edge_polluted) {
            *acc += x as u64;
        }
        let mut k = 0;
        for (acc, &x) in self.decoded.iter_mut().zip(&s.decoded) {
            *acc += x as u64;
            k += x as u64;
        }
        self.decoded_sum += k;
        self.decoded_sq += k * k;
        let ev = s.events.as_array();
        for a in 0..4 {
            self.events[a] += ev[a];
            for b in 0..4 {
                self.cross[a][b] += ev[a] * ev[b];
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.n += other.n;
        for (a, b) in self.sent.iter_mut().zip(other.sent) {
            *a += b;
        }
        for (a, b) in self.polluted.iter_mut().zip(other.polluted) {
            *a += b;
        }
        for (a, b) in self.decoded.iter_mut().zip(other.decoded) {
            *a += b;
        }
        self.decoded_sum += other.decoded_sum;
        self.decoded_sq += other.decoded_sq;
        for a in 0..4 {
            self.events[a] += other.events[a];
            for b in 0..4 {
                self.cross[a][b] += other.cross[a][b];
            }
        }
        self
    }

    fn finish(self, g: &NetworkGraph, c: &EnergyConstants, cfg: &SimulationConfig) -> SimulationResult {
        let n = self.n;
        let bern = |k: u64| moment_estimate(n, k, k, 1.0);
        let forward = (0..g.node_count())
            .filter(|&i| g.role(i) != NodeRole::Destination)
            .map(|i| NodeEstimate {
                node: g.id(i).clone(),
                estimate: bern(self.sent[i]),
            })
            .collect();
        let pollute = (0..g.edge_count())
            .map(|e| {
                let (u, v) = g.edge_ids(e);
                EdgeEstimate {
                    from: u.clone(),
                    to: v.clone(),
                    estimate: bern(self.polluted[e]),
                }
            })
            .collect();
        let decode = g
            .destinations()
            .iter()
            .zip(&self.decoded)
            .map(|(&d, &k)| NodeEstimate {
                node: g.id(d).clone(),
                estimate: bern(k),
            })
            .collect();
        let dests = g.destinations().len();
        let throughput = if dests == 0 {
            Estimate { mean: 0.0, std_error: 0.0 }
        } else {
            moment_estimate(n, self.decoded_sum, self.decoded_sq, dests as f64)
        };

        let q = [c.q_t, c.q_r, c.q_a, c.q_xor];
        let mean = weigh(&self.events.map(|x| x as f64), c) / n as f64;
        let mut spread = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let cov = n as i128 * self.cross[a][b] as i128 - self.events[a] as i128 * self.events[b] as i128;
                spread += q[a] * q[b] * cov as f64;
            }
        }
        let energy = Estimate {
            mean,
            std_error: std_error(n, spread),
        };

        SimulationResult {
            forward,
            pollute,
            decode,
            energy,
            throughput,
            trials: n,
            seed: cfg.seed,
            rng: RNG_ALGORITHM.to_owned(),
        }
    }
}

/// Mean and standard error of `x / scale` from integer sums of `x` and `x^2`.
fn moment_estimate(n: u64, sum: u64, sum_sq: u64, scale: f64) -> Estimate {
    let spread = n as i128 * sum_sq as i128 - sum as i128 * sum as i128;
    Estimate {
        mean: sum as f64 / n as f64 / scale,
        std_error: std_error(n, spread as f64) / scale,
    }
}

/// `spread = n * sum(x^2) - sum(x)^2`.
fn std_error(n: u64, spread: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n = n as f64;
    let var = spread.max(0.0) / (n * (n - 1.0));
    (var / n).sqrt()
}
