//! Analytic forwarding/pollution propagation, expected energy and throughput.
//!
//! Forwarding probabilities here are unconditional: `f_i` is the probability
//! that node `i` transmits at all in one round, and `P_{k->i}` the
//! probability that a polluted copy reaches `i` from `k`. The per-node
//! decision rules ([`forwarding_relay_prob`], [`coding_relay_prob`],
//! [`pollution_prob`]) describe a node whose inputs all arrive; [`propagate`]
//! composes them with the upstream delivery probabilities, and reduces to
//! them exactly whenever every upstream node transmits with probability one.
//!
//! Products over in-neighbours are taken left to right in sender id order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttackTopology, NetworkGraph, NodeId, NodeRole};
use crate::simulator::{self, SimulationConfig, SimulationError};
use crate::strategy::{MacMode, NetworkStrategy, NodeStrategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{name} = {value} is outside [0, 1]")]
    InputOutOfRange { name: &'static str, value: f64 },
    #[error("a coding relay needs at least two inputs, got {0}")]
    NotACodingNode(usize),
    #[error("`{0}` is not a coding-relay label")]
    NotACodingLabel(NodeStrategy),
    #[error("strategy does not cover this network's relays")]
    StrategyMismatch,
    #[error("attack topology was built for a different edge set")]
    AttackMismatch,
    #[error("energy constant {0} must be finite and strictly positive")]
    InvalidConstant(&'static str),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

fn check_prob(name: &'static str, value: f64) -> Result<f64, AnalyticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(AnalyticsError::InputOutOfRange { name, value })
    }
}

/// Probability that a polluted message reaches `i` from relay `k`.
///
/// `upstream` holds the pollution probabilities of whatever `k` combined or
/// forwarded; it only matters when `k` does not authenticate.
pub fn pollution_prob(f_k: f64, authenticate: bool, p_ki: f64, upstream: &[f64]) -> Result<f64, AnalyticsError> {
    check_prob("f_k", f_k)?;
    check_prob("p_ki", p_ki)?;
    let mut clean_in = 1.0;
    for &u in upstream {
        clean_in *= 1.0 - check_prob("upstream pollution", u)?;
    }
    let inner = if authenticate {
        p_ki
    } else {
        1.0 - (1.0 - p_ki) * clean_in
    };
    Ok(f_k * inner)
}

/// Forwarding decision of a single-input relay whose input arrives polluted
/// with probability `p_ki`.
pub fn forwarding_relay_prob(authenticate: bool, p_ki: f64) -> Result<f64, AnalyticsError> {
    check_prob("P_ki", p_ki)?;
    Ok(if authenticate { 1.0 - p_ki } else { 1.0 })
}

/// Forwarding decision of a coding relay whose inputs all arrive, polluted
/// with the listed probabilities.
pub fn coding_relay_prob(authenticate: bool, mode: MacMode, incoming: &[f64]) -> Result<f64, AnalyticsError> {
    if incoming.len() < 2 {
        return Err(AnalyticsError::NotACodingNode(incoming.len()));
    }
    for &p in incoming {
        check_prob("P_ki", p)?;
    }
    if !authenticate {
        return Ok(1.0);
    }
    Ok(match mode {
        MacMode::Xaf => incoming.iter().fold(1.0, |acc, p| acc * (1.0 - p)),
        MacMode::Axf => 1.0 - incoming.iter().fold(1.0, |acc, p| acc * p),
    })
}

/// One input of a coding relay: probability that a copy arrives, and that a
/// polluted copy arrives (`polluted <= delivered`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub delivered: f64,
    pub polluted: f64,
}

/// Transmit probability of a coding relay and the probability that what it
/// transmits is polluted, for independently arriving inputs.
pub fn coding_relay_transmit(strategy: NodeStrategy, inputs: &[Arrival]) -> Result<(f64, f64), AnalyticsError> {
    if inputs.len() < 2 {
        return Err(AnalyticsError::NotACodingNode(inputs.len()));
    }
    let none_arrive = inputs.iter().fold(1.0, |acc, a| acc * (1.0 - a.delivered));
    let polluted: Vec<f64> = inputs.iter().map(|a| a.polluted).collect();
    match strategy {
        NodeStrategy::Xf => {
            let clean = polluted.iter().fold(1.0, |acc, p| acc * (1.0 - p));
            Ok((1.0 - none_arrive, 1.0 - clean))
        }
        NodeStrategy::Axf => {
            // a missing input is as useless as a polluted one
            let unusable: Vec<f64> = inputs
                .iter()
                .map(|a| (1.0 - a.delivered + a.polluted).clamp(0.0, 1.0))
                .collect();
            Ok((coding_relay_prob(true, MacMode::Axf, &unusable)?, 0.0))
        }
        NodeStrategy::Xaf => {
            let all_clean = coding_relay_prob(true, MacMode::Xaf, &polluted)?;
            Ok(((all_clean - none_arrive).max(0.0), 0.0))
        }
        other => Err(AnalyticsError::NotACodingLabel(other)),
    }
}

/// Forwarding and pollution probabilities for every node and edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    forward: Vec<Option<f64>>,
    payload_polluted: Vec<f64>,
    pollute: Vec<f64>,
    expected_in: Vec<f64>,
    recv_any: Vec<f64>,
}

impl PropagationState {
    /// `f_i`; `None` for destinations.
    pub fn forward(&self, node: usize) -> Option<f64> {
        self.forward[node]
    }

    pub fn forward_of(&self, graph: &NetworkGraph, id: &NodeId) -> Option<f64> {
        self.forward[graph.index_of(id)?]
    }

    /// `P_{k->i}` on edge index `e`.
    pub fn pollute(&self, e: usize) -> f64 {
        self.pollute[e]
    }

    pub fn pollute_of(&self, graph: &NetworkGraph, from: &NodeId, to: &NodeId) -> Option<f64> {
        graph.find_edge(from, to).map(|e| self.pollute[e])
    }

    pub fn pollute_all(&self) -> &[f64] {
        &self.pollute
    }

    /// Probability that node transmits a polluted payload.
    pub fn payload_polluted(&self, node: usize) -> f64 {
        self.payload_polluted[node]
    }

    /// `N_i`, the expected number of received copies.
    pub fn expected_in(&self, node: usize) -> f64 {
        self.expected_in[node]
    }

    /// `P_i^Rec`, the probability of receiving at least one copy.
    pub fn recv_any(&self, node: usize) -> f64 {
        self.recv_any[node]
    }
}

fn check_inputs(graph: &NetworkGraph, attacks: &AttackTopology, strategy: &NetworkStrategy) -> Result<(), AnalyticsError> {
    if !strategy.fits(graph) {
        return Err(AnalyticsError::StrategyMismatch);
    }
    if !attacks.fits(graph) {
        return Err(AnalyticsError::AttackMismatch);
    }
    Ok(())
}

fn conditional(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        (part / whole).min(1.0)
    } else {
        0.0
    }
}

/// Propagate forwarding and pollution probabilities in topological order.
pub fn propagate(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    strategy: &NetworkStrategy,
) -> Result<PropagationState, AnalyticsError> {
    check_inputs(graph, attacks, strategy)?;
    let n = graph.node_count();
    let mut sent = vec![0.0; n];
    let mut dirty = vec![0.0; n];
    let mut forward = vec![None; n];
    let mut pollute = vec![0.0; graph.edge_count()];
    let mut expected_in = vec![0.0; n];
    let mut recv_any = vec![0.0; n];

    for &i in graph.topo_indices() {
        let role = graph.role(i);
        if role == NodeRole::Source {
            sent[i] = 1.0;
            forward[i] = Some(1.0);
            continue;
        }
        let mut n_in = 0.0;
        let mut none = 1.0;
        for &e in graph.in_edges(i) {
            let (k, _) = graph.edge(e);
            let p = attacks.prob(e);
            pollute[e] = match strategy.at(graph, k) {
                None => p,
                Some(s) => pollution_prob(sent[k], s.authenticates(), p, &[conditional(dirty[k], sent[k])])?,
            };
            n_in += sent[k];
            none *= 1.0 - sent[k];
        }
        expected_in[i] = n_in;
        recv_any[i] = 1.0 - none;

        let label = match strategy.at(graph, i) {
            Some(s) => s,
            None => continue,
        };
        let (t, q) = if role == NodeRole::ForwardingRelay {
            let e = graph.in_edges(i)[0];
            let k = graph.edge(e).0;
            let decide = forwarding_relay_prob(label.authenticates(), conditional(pollute[e], sent[k]))?;
            let q = if label.authenticates() { 0.0 } else { pollute[e] };
            (sent[k] * decide, q)
        } else {
            let inputs: Vec<Arrival> = graph
                .in_edges(i)
                .iter()
                .map(|&e| Arrival {
                    delivered: sent[graph.edge(e).0],
                    polluted: pollute[e],
                })
                .collect();
            coding_relay_transmit(label, &inputs)?
        };
        sent[i] = t;
        dirty[i] = q;
        forward[i] = Some(t);
    }

    Ok(PropagationState {
        forward,
        payload_polluted: dirty,
        pollute,
        expected_in,
        recv_any,
    })
}

/// Per-message energy costs of the atomic actions, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    /// Emission.
    pub q_t: f64,
    /// Reception.
    pub q_r: f64,
    /// One MAC computation / verification.
    pub q_a: f64,
    /// XOR of two messages.
    pub q_xor: f64,
}

impl EnergyConstants {
    /// MSP430 + CC2420 measurements (TelosB-class sensor node).
    pub const SENSOR_NODE: EnergyConstants = EnergyConstants {
        q_t: 0.556851e-4,
        q_r: 0.7995405e-4,
        q_a: 1.686154e-4,
        q_xor: 0.00003135e-4,
    };

    pub fn new(q_t: f64, q_r: f64, q_a: f64, q_xor: f64) -> Result<Self, AnalyticsError> {
        let c = EnergyConstants { q_t, q_r, q_a, q_xor };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        for (name, v) in [("Q_T", self.q_t), ("Q_R", self.q_r), ("Q_A", self.q_a), ("Q_XOR", self.q_xor)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AnalyticsError::InvalidConstant(name));
            }
        }
        Ok(())
    }
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self::SENSOR_NODE
    }
}

/// Expected energy of one relay, by activity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelayEnergy {
    pub node: NodeId,
    pub reception: f64,
    pub authentication: f64,
    pub transmission: f64,
    pub total: f64,
}

/// Expected energy for one end-to-end round, in joules.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub source: f64,
    pub relay: f64,
    pub destination: f64,
    pub relays: Vec<RelayEnergy>,
}

impl EnergyBreakdown {
    pub const CSV_HEADER: [&'static str; 4] = ["F_E_joules", "F_O_joules", "F_R_joules", "F_D_joules"];

    /// Flat record matching [`CSV_HEADER`](Self::CSV_HEADER), shortest
    /// round-trip scientific notation.
    pub fn csv_record(&self) -> [String; 4] {
        [self.total, self.source, self.relay, self.destination].map(|x| format!("{x:e}"))
    }
}

/// Expected energy of `strategy` given its propagation state.
pub fn energy(
    graph: &NetworkGraph,
    strategy: &NetworkStrategy,
    state: &PropagationState,
    constants: &EnergyConstants,
) -> Result<EnergyBreakdown, AnalyticsError> {
    if !strategy.fits(graph) {
        return Err(AnalyticsError::StrategyMismatch);
    }
    if state.forward.len() != graph.node_count() || state.pollute.len() != graph.edge_count() {
        return Err(AnalyticsError::AttackMismatch);
    }
    let c = constants;
    let source = graph.sources().len() as f64 * (c.q_t + c.q_a);

    let mut relay = 0.0;
    let mut relays = Vec::with_capacity(graph.relay_count());
    for (&i, &label) in graph.relays().iter().zip(strategy.slots()) {
        let n_in = state.expected_in[i];
        let rec = state.recv_any[i];
        let reception = n_in * c.q_r;
        let authentication = if label.authenticates() {
            match label.mode() {
                Some(mode) => {
                    let combine = c.q_xor * (n_in - rec).max(0.0);
                    let verify = match mode {
                        MacMode::Xaf => c.q_a * rec,
                        MacMode::Axf => c.q_a * n_in,
                    };
                    combine + verify
                }
                None => c.q_a * rec,
            }
        } else {
            0.0
        };
        let transmission = state.forward[i].unwrap_or(0.0) * c.q_t;
        let total = reception + authentication + transmission;
        relay += total;
        relays.push(RelayEnergy {
            node: graph.id(i).clone(),
            reception,
            authentication,
            transmission,
            total,
        });
    }

    let destination = graph
        .destinations()
        .iter()
        .map(|&d| state.expected_in[d] * (c.q_r + c.q_a))
        .sum::<f64>();

    Ok(EnergyBreakdown {
        total: source + relay + destination,
        source,
        relay,
        destination,
        relays,
    })
}

/// [`propagate`] followed by [`energy`].
pub fn evaluate(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    strategy: &NetworkStrategy,
    constants: &EnergyConstants,
) -> Result<(PropagationState, EnergyBreakdown), AnalyticsError> {
    let state = propagate(graph, attacks, strategy)?;
    let e = energy(graph, strategy, &state, constants)?;
    Ok((state, e))
}

/// Butterfly throughput in closed form.
///
/// `f_C` is the probability that C emits a clean combination: `1 - p_AC p_BC`
/// under AXF and `(1 - p_AC)(1 - p_BC)` under XAF and XF.
pub fn butterfly_throughput_closed_form(
    p_ac: f64,
    p_bc: f64,
    p_cd: f64,
    c_strategy: NodeStrategy,
) -> Result<f64, AnalyticsError> {
    check_prob("p_AC", p_ac)?;
    check_prob("p_BC", p_bc)?;
    check_prob("p_CD", p_cd)?;
    let f_c = match c_strategy {
        NodeStrategy::Axf => 1.0 - p_ac * p_bc,
        NodeStrategy::Xaf | NodeStrategy::Xf => (1.0 - p_ac) * (1.0 - p_bc),
        other => return Err(AnalyticsError::NotACodingLabel(other)),
    };
    Ok(0.5 * f_c * (1.0 - p_cd) * (2.0 - p_ac - p_bc))
}

/// Average probability that a destination decodes every source message
/// reaching it: closed form on the canonical butterfly, seeded Monte Carlo
/// elsewhere.
pub fn throughput(
    graph: &NetworkGraph,
    attacks: &AttackTopology,
    strategy: &NetworkStrategy,
    config: &SimulationConfig,
) -> Result<f64, AnalyticsError> {
    check_inputs(graph, attacks, strategy)?;
    if graph.is_canonical_butterfly() {
        let p = |u: &str, v: &str| attacks.get(&NodeId::from(u), &NodeId::from(v)).unwrap_or(0.0);
        let c = strategy
            .get(graph, &NodeId::from("C"))
            .ok_or(AnalyticsError::StrategyMismatch)?;
        return butterfly_throughput_closed_form(p("A", "C"), p("B", "C"), p("C", "D"), c);
    }
    let constants = EnergyConstants::default();
    let result = simulator::simulate(graph, attacks, strategy, &constants, config)?;
    Ok(result.throughput.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{butterfly, make_attack, NetworkGraph, RoleHint};

    fn id(s: &str) -> NodeId {
        NodeId::from(s)
    }

    fn edge(u: &str, v: &str) -> (NodeId, NodeId) {
        (id(u), id(v))
    }

    const C: EnergyConstants = EnergyConstants::SENSOR_NODE;

    #[test]
    fn pollution_prob_cases() {
        assert_eq!(pollution_prob(1.0, true, 0.3, &[0.9]).unwrap(), 0.3);
        assert!((pollution_prob(1.0, false, 0.2, &[0.5]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(pollution_prob(1.0, false, 0.0, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            pollution_prob(1.2, false, 0.0, &[]),
            Err(AnalyticsError::InputOutOfRange { .. })
        ));
        assert!(pollution_prob(1.0, false, 0.0, &[-0.1]).is_err());
    }

    #[test]
    fn forwarding_relay_prob_cases() {
        assert_eq!(forwarding_relay_prob(false, 0.7).unwrap(), 1.0);
        assert!((forwarding_relay_prob(true, 0.7).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(forwarding_relay_prob(true, 0.0).unwrap(), 1.0);
        assert!(forwarding_relay_prob(true, 1.5).is_err());
    }

    #[test]
    fn coding_relay_prob_cases() {
        assert!((coding_relay_prob(true, MacMode::Xaf, &[0.2, 0.5]).unwrap() - 0.4).abs() < 1e-15);
        assert!((coding_relay_prob(true, MacMode::Axf, &[0.2, 0.5]).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(coding_relay_prob(false, MacMode::Xaf, &[0.9, 0.7]).unwrap(), 1.0);
        assert_eq!(coding_relay_prob(true, MacMode::Axf, &[0.2]), Err(AnalyticsError::NotACodingNode(1)));
        assert!(coding_relay_prob(true, MacMode::Axf, &[0.2, 2.0]).is_err());
    }

    #[test]
    fn coding_transmit_matches_decision_rule_on_full_delivery() {
        let p = [0.2, 0.5, 0.1];
        let inputs: Vec<Arrival> = p.iter().map(|&q| Arrival { delivered: 1.0, polluted: q }).collect();
        for (label, a, m) in [
            (NodeStrategy::Xf, false, MacMode::Xaf),
            (NodeStrategy::Axf, true, MacMode::Axf),
            (NodeStrategy::Xaf, true, MacMode::Xaf),
        ] {
            let (t, _) = coding_relay_transmit(label, &inputs).unwrap();
            assert_eq!(t, coding_relay_prob(a, m, &p).unwrap());
        }
    }

    #[test]
    fn butterfly_zero_attack_fixpoint() {
        let g = butterfly();
        let a = AttackTopology::zero(&g);
        for s in ["C=XF,D=F", "C=AXF,D=AF", "C=XAF,D=F"] {
            let st = propagate(&g, &a, &NetworkStrategy::parse(&g, s).unwrap()).unwrap();
            assert_eq!(st.forward_of(&g, &id("C")), Some(1.0));
            assert_eq!(st.forward_of(&g, &id("D")), Some(1.0));
            assert!(st.pollute_all().iter().all(|&p| p == 0.0));
            assert_eq!(st.expected_in(g.index_of(&id("E")).unwrap()), 2.0);
            assert_eq!(st.expected_in(g.index_of(&id("F")).unwrap()), 2.0);
        }
    }

    #[test]
    fn butterfly_single_link_xaf() {
        let g = butterfly();
        let a = make_attack(&g, [(edge("A", "C"), 0.3)]).unwrap();
        let st = propagate(&g, &a, &NetworkStrategy::parse(&g, "C=XAF,D=F").unwrap()).unwrap();
        assert!((st.forward_of(&g, &id("C")).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(st.pollute_of(&g, &id("C"), &id("D")), Some(0.0));
        // D only relays what C sent
        assert!((st.forward_of(&g, &id("D")).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(st.pollute_of(&g, &id("D"), &id("E")), Some(0.0));
        assert_eq!(st.pollute_of(&g, &id("D"), &id("F")), Some(0.0));
    }

    #[test]
    fn butterfly_single_link_xf() {
        let g = butterfly();
        let a = make_attack(&g, [(edge("A", "C"), 0.3)]).unwrap();
        let st = propagate(&g, &a, &NetworkStrategy::parse(&g, "C=XF,D=F").unwrap()).unwrap();
        assert_eq!(st.forward_of(&g, &id("C")), Some(1.0));
        assert!((st.pollute_of(&g, &id("C"), &id("D")).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(st.forward_of(&g, &id("D")), Some(1.0));
        assert!((st.pollute_of(&g, &id("D"), &id("E")).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(st.pollute_of(&g, &id("A"), &id("C")), Some(0.3));
    }

    #[test]
    fn passive_energy_is_attack_independent() {
        let g = butterfly();
        let s = NetworkStrategy::passive(&g);
        let expected = 4.0 * C.q_t + 7.0 * C.q_r + 6.0 * C.q_a;
        let mut seen = None;
        for p in [0.0, 0.1, 0.5, 1.0] {
            let a = AttackTopology::uniform(&g, &[edge("A", "C"), edge("B", "C"), edge("C", "D")], p).unwrap();
            let (_, e) = evaluate(&g, &a, &s, &C).unwrap();
            assert!((e.total - expected).abs() <= 4.0 * f64::EPSILON * expected);
            assert_eq!(*seen.get_or_insert(e.total), e.total);
        }
    }

    #[test]
    fn authentication_excess_at_zero_attack() {
        let g = butterfly();
        let a = AttackTopology::zero(&g);
        let (_, naive) = evaluate(&g, &a, &NetworkStrategy::passive(&g), &C).unwrap();
        let (st, maniac) = evaluate(&g, &a, &NetworkStrategy::parse(&g, "C=XAF,D=AF").unwrap(), &C).unwrap();
        let c = g.index_of(&id("C")).unwrap();
        let d = g.index_of(&id("D")).unwrap();
        let excess = (C.q_xor * 1.0 + C.q_a * st.recv_any(c)) + C.q_a * st.recv_any(d);
        assert!(maniac.total > naive.total);
        assert!((maniac.total - naive.total - excess).abs() < 1e-15);
    }

    #[test]
    fn no_relay_energy() {
        let g = NetworkGraph::build([(id("s"), RoleHint::Source), (id("d"), RoleHint::Destination)], [edge("s", "d")]).unwrap();
        let (_, e) = evaluate(&g, &AttackTopology::zero(&g), &NetworkStrategy::passive(&g), &C).unwrap();
        assert_eq!(e.total, (C.q_t + C.q_a) + (C.q_r + C.q_a));
        assert_eq!(e.total, e.source + e.relay + e.destination);
    }

    #[test]
    fn closed_form_cases() {
        for s in NodeStrategy::CODING {
            assert_eq!(butterfly_throughput_closed_form(0.0, 0.0, 0.0, s).unwrap(), 1.0);
        }
        let xaf = butterfly_throughput_closed_form(0.4, 0.0, 0.0, NodeStrategy::Xaf).unwrap();
        assert!((xaf - 0.48).abs() < 1e-15);
        let axf = butterfly_throughput_closed_form(0.4, 0.0, 0.0, NodeStrategy::Axf).unwrap();
        assert!((axf - 0.8).abs() < 1e-15);
        assert!(butterfly_throughput_closed_form(0.4, 0.0, 1.1, NodeStrategy::Axf).is_err());
        assert!(butterfly_throughput_closed_form(0.4, 0.0, 0.0, NodeStrategy::Forward).is_err());
    }

    #[test]
    fn throughput_on_butterfly_is_closed_form() {
        let g = butterfly();
        let cfg = SimulationConfig::default();
        let zero = AttackTopology::zero(&g);
        for s in ["C=XF,D=F", "C=AXF,D=AF", "C=XAF,D=F"] {
            let st = NetworkStrategy::parse(&g, s).unwrap();
            assert_eq!(throughput(&g, &zero, &st, &cfg).unwrap(), 1.0);
        }
        let a = make_attack(&g, [(edge("A", "C"), 0.3)]).unwrap();
        let st = NetworkStrategy::parse(&g, "C=XAF,D=F").unwrap();
        assert!((throughput(&g, &a, &st, &cfg).unwrap() - 0.595).abs() < 1e-12);
    }

    #[test]
    fn chain_throughput_by_simulation() {
        let g = NetworkGraph::build(
            [
                (id("s"), RoleHint::Source),
                (id("r1"), RoleHint::Relay),
                (id("r2"), RoleHint::Relay),
                (id("d"), RoleHint::Destination),
            ],
            [edge("s", "r1"), edge("r1", "r2"), edge("r2", "d")],
        )
        .unwrap();
        let p = 0.25;
        let a = make_attack(&g, [(edge("s", "r1"), p)]).unwrap();
        let st = NetworkStrategy::parse(&g, "r1=AF,r2=F").unwrap();
        let cfg = SimulationConfig { trials: 200_000, seed: 7 };
        let thr = throughput(&g, &a, &st, &cfg).unwrap();
        let se = (p * (1.0 - p) / cfg.trials as f64).sqrt();
        assert!((thr - (1.0 - p)).abs() < 4.0 * se, "{thr}");
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let g = butterfly();
        let other = NetworkGraph::build([(id("s"), RoleHint::Source), (id("d"), RoleHint::Destination)], [edge("s", "d")]).unwrap();
        let s = NetworkStrategy::passive(&g);
        assert_eq!(
            propagate(&g, &AttackTopology::zero(&other), &s),
            Err(AnalyticsError::AttackMismatch)
        );
        assert_eq!(
            propagate(&g, &AttackTopology::zero(&g), &NetworkStrategy::passive(&other)),
            Err(AnalyticsError::StrategyMismatch)
        );
        assert!(EnergyConstants::new(1.0, 0.0, 1.0, 1.0).is_err());
    }
}
