//! Seeded random networks for testing.
//!
//! Every coding relay draws its inputs from predecessors with pairwise
//! disjoint relay ancestries, so the generated graphs always satisfy
//! [`NetworkGraph::has_independent_merges`].

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{AttackTopology, NetworkGraph, NodeId, RoleHint};
use crate::strategy::{NetworkStrategy, NodeStrategy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub max_nodes: usize,
    pub max_sources: usize,
    pub max_destinations: usize,
    pub max_in_degree: usize,
    /// Share of edges left unattacked.
    pub zero_attack_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_nodes: 10,
            max_sources: 3,
            max_destinations: 3,
            max_in_degree: 3,
            zero_attack_fraction: 0.4,
        }
    }
}

/// Network and attack topology drawn from `seed`.
pub fn random_instance(seed: u64) -> (NetworkGraph, AttackTopology) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_network(&mut rng, &GeneratorConfig::default())
}

pub fn random_network<R: Rng + ?Sized>(rng: &mut R, cfg: &GeneratorConfig) -> (NetworkGraph, AttackTopology) {
    let n_src = rng.random_range(1..=cfg.max_sources.max(1));
    let n_dst = rng.random_range(1..=cfg.max_destinations.max(1));
    let room = cfg.max_nodes.saturating_sub(n_src + n_dst);
    let n_rel = rng.random_range(0..=room);
    let max_in = cfg.max_in_degree.max(1);

    let src: Vec<String> = (0..n_src).map(|i| format!("s{i}")).collect();
    let rel: Vec<String> = (0..n_rel).map(|i| format!("r{i}")).collect();
    let dst: Vec<String> = (0..n_dst).map(|i| format!("d{i}")).collect();

    // candidate predecessors: (name, relay-ancestry bitmask including itself)
    let mut preds: Vec<(String, u64)> = src.iter().map(|s| (s.clone(), 0)).collect();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut out_deg: Vec<usize> = vec![0; n_src + n_rel];

    for (i, r) in rel.iter().enumerate() {
        let want = rng.random_range(1..=max_in);
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.shuffle(rng);
        let mut union = 0u64;
        let mut taken = 0;
        for k in order {
            if taken == want {
                break;
            }
            if preds[k].1 & union != 0 {
                continue;
            }
            union |= preds[k].1;
            edges.push((preds[k].0.clone(), r.clone()));
            out_deg[k] += 1;
            taken += 1;
        }
        preds.push((r.clone(), union | (1 << i)));
    }

    for d in &dst {
        let want = rng.random_range(1..=max_in.min(preds.len()));
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.shuffle(rng);
        for &k in order.iter().take(want) {
            edges.push((preds[k].0.clone(), d.clone()));
            out_deg[k] += 1;
        }
    }
    for (k, (name, _)) in preds.iter().enumerate() {
        if out_deg[k] == 0 {
            let d = dst.choose(rng).expect("at least one destination");
            edges.push((name.clone(), d.clone()));
        }
    }

    let nodes = src
        .iter()
        .map(|s| (NodeId::from(s.as_str()), RoleHint::Source))
        .chain(rel.iter().map(|s| (NodeId::from(s.as_str()), RoleHint::Relay)))
        .chain(dst.iter().map(|s| (NodeId::from(s.as_str()), RoleHint::Destination)));
    let graph = NetworkGraph::build(
        nodes,
        edges
            .iter()
            .map(|(u, v)| (NodeId::from(u.as_str()), NodeId::from(v.as_str()))),
    )
    .expect("generator emits valid networks");

    let entries: Vec<((NodeId, NodeId), f64)> = (0..graph.edge_count())
        .map(|e| {
            let (u, v) = graph.edge_ids(e);
            let p = if rng.random_bool(cfg.zero_attack_fraction) {
                0.0
            } else {
                rng.random::<f64>()
            };
            ((u.clone(), v.clone()), p)
        })
        .collect();
    let attacks = AttackTopology::new(&graph, entries).expect("edges come from the graph");
    (graph, attacks)
}

/// Uniformly random legal strategy for `graph`.
pub fn random_strategy<R: Rng + ?Sized>(graph: &NetworkGraph, rng: &mut R) -> NetworkStrategy {
    NetworkStrategy::from_slots(
        graph
            .relays()
            .iter()
            .map(|&r| *NodeStrategy::choices(graph.role(r)).choose(rng).expect("relays have choices"))
            .collect(),
    )
}
