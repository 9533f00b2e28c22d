//! Network DAG, node-role classification and the per-link attack topology.
//!
//! Nodes are stored sorted by id, so a node's index doubles as its rank in
//! lexicographic id order. Every ordering exposed here (edges, in-edges,
//! relays, topological order) is derived from that rank and is therefore
//! reproducible for a given input.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque node label, unique within a graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// Role as supplied by the user. Coding vs forwarding is never user-supplied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleHint {
    Source,
    Relay,
    Destination,
}

impl RoleHint {
    pub fn as_str(self) -> &'static str {
        match self {
            RoleHint::Source => "source",
            RoleHint::Relay => "relay",
            RoleHint::Destination => "destination",
        }
    }
}

/// Role after classification: relays with more than one in-edge code, relays
/// with exactly one in-edge only forward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Source,
    CodingRelay,
    ForwardingRelay,
    Destination,
}

impl NodeRole {
    pub fn is_relay(self) -> bool {
        matches!(self, NodeRole::CodingRelay | NodeRole::ForwardingRelay)
    }

    pub fn hint(self) -> RoleHint {
        match self {
            NodeRole::Source => RoleHint::Source,
            NodeRole::CodingRelay | NodeRole::ForwardingRelay => RoleHint::Relay,
            NodeRole::Destination => RoleHint::Destination,
        }
    }

    /// Classify a node from its hint and in-degree.
    pub fn classify(hint: RoleHint, in_degree: usize) -> NodeRole {
        match hint {
            RoleHint::Source => NodeRole::Source,
            RoleHint::Destination => NodeRole::Destination,
            RoleHint::Relay if in_degree > 1 => NodeRole::CodingRelay,
            RoleHint::Relay => NodeRole::ForwardingRelay,
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeRole::Source => "source",
            NodeRole::CodingRelay => "coding relay",
            NodeRole::ForwardingRelay => "forwarding relay",
            NodeRole::Destination => "destination",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("edge {0}->{1} references an unknown node")]
    DanglingEdge(NodeId, NodeId),
    #[error("edge {0}->{1} is listed more than once")]
    ParallelEdge(NodeId, NodeId),
    #[error("graph contains a cycle through `{0}`")]
    CycleDetected(NodeId),
    #[error("source `{0}` has incoming edges")]
    SourceWithInEdges(NodeId),
    #[error("destination `{0}` has outgoing edges")]
    DestinationWithOutEdges(NodeId),
    #[error("relay `{0}` has no incoming edge")]
    RelayWithZeroInDegree(NodeId),
    #[error("relay `{0}` does not lie on any source-to-destination path")]
    DisconnectedRelay(NodeId),
    #[error("edge {0}->{1} does not exist")]
    UnknownEdge(NodeId, NodeId),
    #[error("attack probability {p} on {from}->{to} is outside [0, 1]")]
    ProbabilityOutOfRange { from: NodeId, to: NodeId, p: f64 },
}

/// Validated directed acyclic network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    ids: Vec<NodeId>,
    roles: Vec<NodeRole>,
    edges: Vec<(usize, usize)>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    topo: Vec<usize>,
    sources: Vec<usize>,
    relays: Vec<usize>,
    destinations: Vec<usize>,
    relay_slot: Vec<Option<usize>>,
}

impl NetworkGraph {
    /// Build and validate a network from role hints and directed edges.
    pub fn build<N, E>(nodes: N, edges: E) -> Result<Self, GraphError>
    where
        N: IntoIterator<Item = (NodeId, RoleHint)>,
        E: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut nodes: Vec<(NodeId, RoleHint)> = nodes.into_iter().collect();
        nodes.sort_by(|a, b| a.0.cmp(&b.0));
        for w in nodes.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(GraphError::DuplicateNode(w[0].0.clone()));
            }
        }
        let index: HashMap<&NodeId, usize> =
            nodes.iter().enumerate().map(|(i, (id, _))| (id, i)).collect();

        let mut edge_list = Vec::new();
        for (from, to) in edges {
            match (index.get(&from), index.get(&to)) {
                (Some(&u), Some(&v)) => edge_list.push((u, v)),
                _ => return Err(GraphError::DanglingEdge(from, to)),
            }
        }
        edge_list.sort_unstable();
        for w in edge_list.windows(2) {
            if w[0] == w[1] {
                let (u, v) = w[0];
                return Err(GraphError::ParallelEdge(nodes[u].0.clone(), nodes[v].0.clone()));
            }
        }

        let n = nodes.len();
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (e, &(u, v)) in edge_list.iter().enumerate() {
            if u == v {
                return Err(GraphError::CycleDetected(nodes[u].0.clone()));
            }
            out_edges[u].push(e);
            in_edges[v].push(e);
        }
        // edges are sorted by (from, to): out-lists are ordered by target,
        // in-lists need ordering by sender
        for list in &mut in_edges {
            list.sort_by_key(|&e| edge_list[e].0);
        }

        let topo = kahn_order(n, &edge_list, &in_edges, &out_edges)
            .map_err(|stuck| GraphError::CycleDetected(nodes[stuck].0.clone()))?;

        let mut roles = Vec::with_capacity(n);
        for (i, (id, hint)) in nodes.iter().enumerate() {
            match hint {
                RoleHint::Source if !in_edges[i].is_empty() => {
                    return Err(GraphError::SourceWithInEdges(id.clone()))
                }
                RoleHint::Destination if !out_edges[i].is_empty() => {
                    return Err(GraphError::DestinationWithOutEdges(id.clone()))
                }
                RoleHint::Relay if in_edges[i].is_empty() => {
                    return Err(GraphError::RelayWithZeroInDegree(id.clone()))
                }
                _ => {}
            }
            roles.push(NodeRole::classify(*hint, in_edges[i].len()));
        }

        let from_source = reach(&topo, &roles, &edge_list, &out_edges, NodeRole::Source, false);
        let to_dest = reach(&topo, &roles, &edge_list, &in_edges, NodeRole::Destination, true);
        for i in 0..n {
            if roles[i].is_relay() && !(from_source[i] && to_dest[i]) {
                return Err(GraphError::DisconnectedRelay(nodes[i].0.clone()));
            }
        }

        let pick = |f: fn(NodeRole) -> bool| -> Vec<usize> { (0..n).filter(|&i| f(roles[i])).collect() };
        let sources = pick(|r| r == NodeRole::Source);
        let relays = pick(NodeRole::is_relay);
        let destinations = pick(|r| r == NodeRole::Destination);
        let mut relay_slot = vec![None; n];
        for (slot, &r) in relays.iter().enumerate() {
            relay_slot[r] = Some(slot);
        }

        Ok(NetworkGraph {
            ids: nodes.into_iter().map(|(id, _)| id).collect(),
            roles,
            edges: edge_list,
            in_edges,
            out_edges,
            topo,
            sources,
            relays,
            destinations,
            relay_slot,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node ids in index order (lexicographic).
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &NodeId {
        &self.ids[node]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.ids.binary_search(id).ok()
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn role_of(&self, id: &NodeId) -> Option<NodeRole> {
        self.index_of(id).map(|i| self.roles[i])
    }

    /// Edges as `(from, to)` node indices, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edge_ids(&self, e: usize) -> (&NodeId, &NodeId) {
        let (u, v) = self.edges[e];
        (&self.ids[u], &self.ids[v])
    }

    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.binary_search(&(from, to)).ok()
    }

    pub fn find_edge(&self, from: &NodeId, to: &NodeId) -> Option<usize> {
        self.edge_index(self.index_of(from)?, self.index_of(to)?)
    }

    /// Incoming edge indices of `node`, ordered by sender id.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_edges[node].len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_edges[node].len()
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Relays sorted by id.
    pub fn relays(&self) -> &[usize] {
        &self.relays
    }

    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }

    /// Position of `node` within [`relays`](Self::relays), if it is a relay.
    pub fn relay_slot(&self, node: usize) -> Option<usize> {
        self.relay_slot[node]
    }

    /// Number of relays, `N`.
    pub fn relay_count(&self) -> usize {
        self.relays.len()
    }

    /// Number of coding relays, `c`.
    pub fn coding_relay_count(&self) -> usize {
        self.relays
            .iter()
            .filter(|&&r| self.roles[r] == NodeRole::CodingRelay)
            .count()
    }

    /// Topological order as node indices; ties go to the smaller id.
    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    pub fn topological_order(&self) -> Vec<NodeId> {
        self.topo.iter().map(|&i| self.ids[i].clone()).collect()
    }

    /// Whether the inputs of every coding relay have pairwise disjoint relay
    /// ancestries. When this holds the arrivals at each combining node are
    /// statistically independent and the product-form propagation is exact.
    pub fn has_independent_merges(&self) -> bool {
        let n = self.node_count();
        let words = n.div_ceil(64);
        let mut anc = vec![vec![0u64; words]; n];
        for &i in &self.topo {
            let mut set = vec![0u64; words];
            let coding = self.roles[i] == NodeRole::CodingRelay;
            for &e in &self.in_edges[i] {
                let k = self.edges[e].0;
                for w in 0..words {
                    if coding && set[w] & anc[k][w] != 0 {
                        return false;
                    }
                    set[w] |= anc[k][w];
                }
            }
            if self.roles[i].is_relay() {
                set[i / 64] |= 1 << (i % 64);
            }
            anc[i] = set;
        }
        true
    }

    /// Structural equality with [`butterfly`].
    pub fn is_canonical_butterfly(&self) -> bool {
        *self == butterfly()
    }

    /// Source node indices that can reach `node`.
    pub fn source_ancestors(&self, node: usize) -> Vec<usize> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![node];
        seen[node] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.in_edges[v] {
                let u = self.edges[e].0;
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        self.sources.iter().copied().filter(|&s| seen[s]).collect()
    }
}

fn kahn_order(
    n: usize,
    edges: &[(usize, usize)],
    in_edges: &[Vec<usize>],
    out_edges: &[Vec<usize>],
) -> Result<Vec<usize>, usize> {
    let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &e in &out_edges[u] {
            let v = edges[e].1;
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&i| indeg[i] > 0).unwrap_or(0))
    }
}

/// Marks nodes reachable from (or, with `backward`, reaching) any node of `seed_role`.
fn reach(
    topo: &[usize],
    roles: &[NodeRole],
    edges: &[(usize, usize)],
    adj: &[Vec<usize>],
    seed_role: NodeRole,
    backward: bool,
) -> Vec<bool> {
    let mut mark: Vec<bool> = roles.iter().map(|&r| r == seed_role).collect();
    let walk: Box<dyn Iterator<Item = &usize>> = if backward {
        Box::new(topo.iter().rev())
    } else {
        Box::new(topo.iter())
    };
    for &u in walk {
        if !mark[u] {
            continue;
        }
        for &e in &adj[u] {
            let v = if backward { edges[e].0 } else { edges[e].1 };
            mark[v] = true;
        }
    }
    mark
}

/// Node labels of the butterfly network, in index order.
pub const BUTTERFLY_LABELS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

/// The canonical butterfly: sources A, B; coding relay C; forwarding relay D;
/// destinations E and F.
pub fn butterfly() -> NetworkGraph {
    let nodes = [
        ("A", RoleHint::Source),
        ("B", RoleHint::Source),
        ("C", RoleHint::Relay),
        ("D", RoleHint::Relay),
        ("E", RoleHint::Destination),
        ("F", RoleHint::Destination),
    ];
    let edges = [
        ("A", "C"),
        ("B", "C"),
        ("C", "D"),
        ("A", "E"),
        ("D", "E"),
        ("B", "F"),
        ("D", "F"),
    ];
    NetworkGraph::build(
        nodes.iter().map(|&(id, h)| (NodeId::from(id), h)),
        edges.iter().map(|&(u, v)| (NodeId::from(u), NodeId::from(v))),
    )
    .expect("butterfly is a valid network")
}

/// Per-edge attack probabilities, aligned with [`NetworkGraph::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackTopology {
    edges: Vec<(NodeId, NodeId)>,
    probs: Vec<f64>,
}

impl AttackTopology {
    /// All-zero topology.
    pub fn zero(graph: &NetworkGraph) -> Self {
        AttackTopology {
            edges: (0..graph.edge_count())
                .map(|e| {
                    let (u, v) = graph.edge_ids(e);
                    (u.clone(), v.clone())
                })
                .collect(),
            probs: vec![0.0; graph.edge_count()],
        }
    }

    /// Topology with the listed edges set; every unlisted edge gets 0.
    pub fn new<I>(graph: &NetworkGraph, entries: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = ((NodeId, NodeId), f64)>,
    {
        let mut topo = Self::zero(graph);
        for ((from, to), p) in entries {
            topo.set(graph, &from, &to, p)?;
        }
        Ok(topo)
    }

    /// Same probability `p` on every listed edge.
    pub fn uniform(graph: &NetworkGraph, edges: &[(NodeId, NodeId)], p: f64) -> Result<Self, GraphError> {
        Self::new(graph, edges.iter().map(|e| (e.clone(), p)))
    }

    pub fn set(&mut self, graph: &NetworkGraph, from: &NodeId, to: &NodeId, p: f64) -> Result<(), GraphError> {
        let e = graph
            .find_edge(from, to)
            .ok_or_else(|| GraphError::UnknownEdge(from.clone(), to.clone()))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::ProbabilityOutOfRange {
                from: from.clone(),
                to: to.clone(),
                p,
            });
        }
        self.probs[e] = p;
        Ok(())
    }

    /// Probability on edge index `e`.
    pub fn prob(&self, e: usize) -> f64 {
        self.probs[e]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, from: &NodeId, to: &NodeId) -> Option<f64> {
        self.edges
            .binary_search_by(|(u, v)| (u, v).cmp(&(from, to)))
            .ok()
            .map(|e| self.probs[e])
    }

    /// Whether this topology was built for `graph`'s edge set.
    pub fn fits(&self, graph: &NetworkGraph) -> bool {
        self.edges.len() == graph.edge_count()
            && self.edges.iter().enumerate().all(|(e, (u, v))| {
                let (gu, gv) = graph.edge_ids(e);
                u == gu && v == gv
            })
    }

    pub fn is_zero(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0)
    }
}

/// Free-function form of [`NetworkGraph::build`].
pub fn build_network<N, E>(nodes: N, edges: E) -> Result<NetworkGraph, GraphError>
where
    N: IntoIterator<Item = (NodeId, RoleHint)>,
    E: IntoIterator<Item = (NodeId, NodeId)>,
{
    NetworkGraph::build(nodes, edges)
}

/// Free-function form of [`AttackTopology::new`].
pub fn make_attack<I>(graph: &NetworkGraph, entries: I) -> Result<AttackTopology, GraphError>
where
    I: IntoIterator<Item = ((NodeId, NodeId), f64)>,
{
    AttackTopology::new(graph, entries)
}
