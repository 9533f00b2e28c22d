//! Per-relay authentication choices and whole-network strategies.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NetworkGraph, NodeId, NodeRole};

/// Authentication behaviour of one relay.
///
/// Coding relays choose among `Xf`, `Axf` and `Xaf`; forwarding relays among
/// `Forward` and `AuthForward`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeStrategy {
    /// XOR and forward, no verification.
    #[serde(rename = "XF")]
    Xf,
    /// Verify every input, XOR the valid ones, forward.
    #[serde(rename = "AXF")]
    Axf,
    /// XOR, verify the combination once, forward only if every input was clean.
    #[serde(rename = "XAF")]
    Xaf,
    /// Forward unchanged.
    #[serde(rename = "F")]
    Forward,
    /// Verify, forward only if clean.
    #[serde(rename = "AF")]
    AuthForward,
}

/// MAC mode of an authenticating coding relay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacMode {
    Axf,
    Xaf,
}

impl NodeStrategy {
    pub const CODING: [NodeStrategy; 3] = [NodeStrategy::Xf, NodeStrategy::Axf, NodeStrategy::Xaf];
    pub const FORWARDING: [NodeStrategy; 2] = [NodeStrategy::Forward, NodeStrategy::AuthForward];

    /// The binary authenticate variable.
    pub fn authenticates(self) -> bool {
        matches!(self, NodeStrategy::Axf | NodeStrategy::Xaf | NodeStrategy::AuthForward)
    }

    /// MAC mode for authenticating coding relays; `None` otherwise.
    pub fn mode(self) -> Option<MacMode> {
        match self {
            NodeStrategy::Axf => Some(MacMode::Axf),
            NodeStrategy::Xaf => Some(MacMode::Xaf),
            _ => None,
        }
    }

    pub fn is_coding(self) -> bool {
        matches!(self, NodeStrategy::Xf | NodeStrategy::Axf | NodeStrategy::Xaf)
    }

    /// Whether this label is legal for a node of `role`.
    pub fn fits(self, role: NodeRole) -> bool {
        match role {
            NodeRole::CodingRelay => self.is_coding(),
            NodeRole::ForwardingRelay => !self.is_coding(),
            _ => false,
        }
    }

    /// Labels available to a relay of `role`, in enumeration order.
    pub fn choices(role: NodeRole) -> &'static [NodeStrategy] {
        match role {
            NodeRole::CodingRelay => &Self::CODING,
            NodeRole::ForwardingRelay => &Self::FORWARDING,
            _ => &[],
        }
    }

    /// The non-authenticating label for `role`.
    pub fn passive(role: NodeRole) -> NodeStrategy {
        if role == NodeRole::CodingRelay {
            NodeStrategy::Xf
        } else {
            NodeStrategy::Forward
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeStrategy::Xf => "XF",
            NodeStrategy::Axf => "AXF",
            NodeStrategy::Xaf => "XAF",
            NodeStrategy::Forward => "F",
            NodeStrategy::AuthForward => "AF",
        }
    }
}

impl fmt::Display for NodeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NodeStrategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "XF" => Ok(NodeStrategy::Xf),
            "AXF" => Ok(NodeStrategy::Axf),
            "XAF" => Ok(NodeStrategy::Xaf),
            "F" => Ok(NodeStrategy::Forward),
            "AF" => Ok(NodeStrategy::AuthForward),
            _ => Err(StrategyError::UnknownLabel(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("unknown strategy label `{0}` (expected XF, AXF, XAF, F or AF)")]
    UnknownLabel(String),
    #[error("`{0}` is not a relay of this network")]
    NotARelay(NodeId),
    #[error("label {label} is not valid for {role} `{node}`")]
    WrongClass {
        node: NodeId,
        role: NodeRole,
        label: NodeStrategy,
    },
    #[error("relay `{0}` has no strategy")]
    Missing(NodeId),
    #[error("relay `{0}` is assigned more than once")]
    Duplicate(NodeId),
    #[error("malformed assignment `{0}` (expected NODE=LABEL)")]
    Malformed(String),
}

/// One [`NodeStrategy`] per relay, stored in relay (id) order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkStrategy {
    choices: Vec<NodeStrategy>,
}

impl NetworkStrategy {
    /// Validate an explicit per-relay assignment against `graph`.
    pub fn new<I>(graph: &NetworkGraph, assignment: I) -> Result<Self, StrategyError>
    where
        I: IntoIterator<Item = (NodeId, NodeStrategy)>,
    {
        let mut slots: Vec<Option<NodeStrategy>> = vec![None; graph.relay_count()];
        for (node, label) in assignment {
            let idx = graph
                .index_of(&node)
                .filter(|&i| graph.role(i).is_relay())
                .ok_or_else(|| StrategyError::NotARelay(node.clone()))?;
            let role = graph.role(idx);
            if !label.fits(role) {
                return Err(StrategyError::WrongClass { node, role, label });
            }
            let slot = &mut slots[graph.relay_slot(idx).expect("relay has a slot")];
            if slot.replace(label).is_some() {
                return Err(StrategyError::Duplicate(node));
            }
        }
        let choices = slots
            .into_iter()
            .zip(graph.relays())
            .map(|(s, &r)| s.ok_or_else(|| StrategyError::Missing(graph.id(r).clone())))
            .collect::<Result<_, _>>()?;
        Ok(NetworkStrategy { choices })
    }

    /// Parse `C=XAF,D=F` style assignments.
    pub fn parse(graph: &NetworkGraph, text: &str) -> Result<Self, StrategyError> {
        let mut pairs = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (node, label) = part
                .split_once('=')
                .ok_or_else(|| StrategyError::Malformed(part.to_owned()))?;
            pairs.push((NodeId::from(node.trim()), label.parse()?));
        }
        Self::new(graph, pairs)
    }

    /// Every relay passive (XF / F): the security-naive strategy.
    pub fn passive(graph: &NetworkGraph) -> Self {
        NetworkStrategy {
            choices: graph
                .relays()
                .iter()
                .map(|&r| NodeStrategy::passive(graph.role(r)))
                .collect(),
        }
    }

    /// Built from labels already known to match `graph`'s relay order.
    pub(crate) fn from_slots(choices: Vec<NodeStrategy>) -> Self {
        NetworkStrategy { choices }
    }

    /// Labels in relay order.
    pub fn slots(&self) -> &[NodeStrategy] {
        &self.choices
    }

    /// Label of relay `node` (node index).
    pub fn at(&self, graph: &NetworkGraph, node: usize) -> Option<NodeStrategy> {
        graph.relay_slot(node).map(|s| self.choices[s])
    }

    pub fn get(&self, graph: &NetworkGraph, id: &NodeId) -> Option<NodeStrategy> {
        self.at(graph, graph.index_of(id)?)
    }

    pub fn fits(&self, graph: &NetworkGraph) -> bool {
        self.choices.len() == graph.relay_count()
            && graph
                .relays()
                .iter()
                .zip(&self.choices)
                .all(|(&r, s)| s.fits(graph.role(r)))
    }

    pub fn assignment(&self, graph: &NetworkGraph) -> BTreeMap<NodeId, NodeStrategy> {
        graph
            .relays()
            .iter()
            .zip(&self.choices)
            .map(|(&r, &s)| (graph.id(r).clone(), s))
            .collect()
    }

    /// Compact tuple form, e.g. `(XAF;F)`.
    pub fn tuple_label(&self) -> String {
        let inner: Vec<&str> = self.choices.iter().map(|s| s.label()).collect();
        format!("({})", inner.join(";"))
    }

    /// Named form, e.g. `(C: XAF, D: F)`.
    pub fn named_label(&self, graph: &NetworkGraph) -> String {
        let inner: Vec<String> = graph
            .relays()
            .iter()
            .zip(&self.choices)
            .map(|(&r, s)| format!("{}: {}", graph.id(r), s))
            .collect();
        format!("({})", inner.join(", "))
    }

    /// `C=XAF,D=F`; parses back with [`NetworkStrategy::parse`].
    pub fn assignment_string(&self, graph: &NetworkGraph) -> String {
        graph
            .relays()
            .iter()
            .zip(&self.choices)
            .map(|(&r, s)| format!("{}={}", graph.id(r), s))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::butterfly;

    #[test]
    fn label_table() {
        assert!(NodeStrategy::Axf.authenticates() && NodeStrategy::Axf.mode() == Some(MacMode::Axf));
        assert!(NodeStrategy::Xaf.authenticates() && NodeStrategy::Xaf.mode() == Some(MacMode::Xaf));
        assert!(!NodeStrategy::Xf.authenticates() && NodeStrategy::Xf.mode().is_none());
        assert!(NodeStrategy::AuthForward.authenticates() && NodeStrategy::AuthForward.mode().is_none());
        assert!(!NodeStrategy::Forward.authenticates());
        for s in NodeStrategy::CODING.iter().chain(&NodeStrategy::FORWARDING) {
            assert_eq!(s.label().parse::<NodeStrategy>().unwrap(), *s);
        }
    }

    #[test]
    fn parse_butterfly_assignment() {
        let g = butterfly();
        let s = NetworkStrategy::parse(&g, "D=F, C=xaf").unwrap();
        assert_eq!(s.tuple_label(), "(XAF;F)");
        assert_eq!(s.named_label(&g), "(C: XAF, D: F)");
        assert_eq!(NetworkStrategy::parse(&g, &s.assignment_string(&g)).unwrap(), s);
    }

    #[test]
    fn rejects_wrong_class_and_gaps() {
        let g = butterfly();
        assert!(matches!(
            NetworkStrategy::parse(&g, "C=XAF,D=AXF"),
            Err(StrategyError::WrongClass { .. })
        ));
        assert!(matches!(NetworkStrategy::parse(&g, "C=AF,D=F"), Err(StrategyError::WrongClass { .. })));
        assert_eq!(NetworkStrategy::parse(&g, "C=XAF"), Err(StrategyError::Missing(NodeId::from("D"))));
        assert_eq!(NetworkStrategy::parse(&g, "C=XAF,D=F,E=F"), Err(StrategyError::NotARelay(NodeId::from("E"))));
        assert_eq!(NetworkStrategy::parse(&g, "C=XAF,C=XF,D=F"), Err(StrategyError::Duplicate(NodeId::from("C"))));
        assert!(matches!(NetworkStrategy::parse(&g, "C:XAF"), Err(StrategyError::Malformed(_))));
        assert!(matches!(NetworkStrategy::parse(&g, "C=XXX,D=F"), Err(StrategyError::UnknownLabel(_))));
    }
}
