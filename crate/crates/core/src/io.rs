//! JSON input files and number formatting for reports.
//!
//! Network files look like
//!
//! ```json
//! {"nodes": [{"id": "A", "role": "source"}, ...],
//!  "edges": [{"from": "A", "to": "C", "p": 0.5}, ...]}
//! ```
//!
//! with `p` optional (default 0). A separate attack file
//! `{"attacks": [{"from": "A", "to": "C", "p": 0.5}]}` overrides edge-level
//! values. Errors carry the JSON path of the offending field.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::analytics::{AnalyticsError, EnergyConstants};
use crate::graph::{AttackTopology, GraphError, NetworkGraph, NodeId, RoleHint};
use crate::strategy::{NetworkStrategy, NodeStrategy, StrategyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("at `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("invalid network: {0}")]
    Graph(#[from] GraphError),
    #[error("invalid strategy: {0}")]
    Strategy(#[from] StrategyError),
    #[error("invalid constants: {0}")]
    Constants(#[from] AnalyticsError),
}

impl ParseError {
    fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Field {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn parse_json(text: &str) -> Result<Value, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| ParseError::field(path, "expected an object"))
}

fn array<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Vec<Value>, ParseError> {
    let p = join(path, key);
    obj.get(key)
        .ok_or_else(|| ParseError::field(&p, "missing field"))?
        .as_array()
        .ok_or_else(|| ParseError::field(&p, "expected an array"))
}

fn string<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a str, ParseError> {
    let p = join(path, key);
    obj.get(key)
        .ok_or_else(|| ParseError::field(&p, "missing field"))?
        .as_str()
        .ok_or_else(|| ParseError::field(&p, "expected a string"))
}

fn probability(obj: &Map<String, Value>, path: &str, default: Option<f64>) -> Result<f64, ParseError> {
    let p = join(path, "p");
    let Some(v) = obj.get("p") else {
        return default.ok_or_else(|| ParseError::field(&p, "missing field"));
    };
    let x = v.as_f64().ok_or_else(|| ParseError::field(&p, "expected a number"))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(ParseError::field(&p, format!("probability {x} is outside [0, 1]")));
    }
    Ok(x)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

/// A parsed network file.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDocument {
    pub graph: NetworkGraph,
    pub attacks: AttackTopology,
}

pub fn parse_network(text: &str) -> Result<NetworkDocument, ParseError> {
    let root = parse_json(text)?;
    let top = object(&root, "$")?;

    let mut nodes = Vec::new();
    for (i, v) in array(top, "nodes", "")?.iter().enumerate() {
        let path = format!("nodes[{i}]");
        let obj = object(v, &path)?;
        let id = string(obj, "id", &path)?;
        let role = match string(obj, "role", &path)? {
            "source" => RoleHint::Source,
            "relay" => RoleHint::Relay,
            "destination" => RoleHint::Destination,
            other => {
                return Err(ParseError::field(
                    join(&path, "role"),
                    format!("unknown role `{other}` (expected source, relay or destination)"),
                ))
            }
        };
        nodes.push((NodeId::from(id), role));
    }

    let mut edges = Vec::new();
    let mut probs = Vec::new();
    for (i, v) in array(top, "edges", "")?.iter().enumerate() {
        let path = format!("edges[{i}]");
        let obj = object(v, &path)?;
        let from = NodeId::from(string(obj, "from", &path)?);
        let to = NodeId::from(string(obj, "to", &path)?);
        probs.push(((from.clone(), to.clone()), probability(obj, &path, Some(0.0))?));
        edges.push((from, to));
    }

    let graph = NetworkGraph::build(nodes, edges)?;
    let mut attacks = AttackTopology::new(&graph, probs)?;
    if top.contains_key("attacks") {
        apply_attacks(&graph, &mut attacks, top, "")?;
    }
    Ok(NetworkDocument { graph, attacks })
}

/// Apply an attack file on top of `base`.
pub fn parse_attacks(graph: &NetworkGraph, base: &AttackTopology, text: &str) -> Result<AttackTopology, ParseError> {
    let root = parse_json(text)?;
    let top = object(&root, "$")?;
    let mut attacks = base.clone();
    apply_attacks(graph, &mut attacks, top, "")?;
    Ok(attacks)
}

fn apply_attacks(
    graph: &NetworkGraph,
    attacks: &mut AttackTopology,
    top: &Map<String, Value>,
    path: &str,
) -> Result<(), ParseError> {
    for (i, v) in array(top, "attacks", path)?.iter().enumerate() {
        let path = format!("{}[{i}]", join(path, "attacks"));
        let obj = object(v, &path)?;
        let from = NodeId::from(string(obj, "from", &path)?);
        let to = NodeId::from(string(obj, "to", &path)?);
        let p = probability(obj, &path, None)?;
        attacks
            .set(graph, &from, &to, p)
            .map_err(|e| ParseError::field(&path, e.to_string()))?;
    }
    Ok(())
}

/// Strategy file: `{"strategy": {"C": "XAF", "D": "F"}}` (the wrapper key is
/// optional).
pub fn parse_strategy(graph: &NetworkGraph, text: &str) -> Result<NetworkStrategy, ParseError> {
    let root = parse_json(text)?;
    let top = object(&root, "$")?;
    let (map, path) = match top.get("strategy") {
        Some(inner) => (object(inner, "strategy")?, "strategy"),
        None => (top, ""),
    };
    let mut pairs = Vec::new();
    for (node, v) in map {
        let p = join(path, node);
        let label = v.as_str().ok_or_else(|| ParseError::field(&p, "expected a label string"))?;
        let label: NodeStrategy = label.parse().map_err(|e: StrategyError| ParseError::field(&p, e.to_string()))?;
        pairs.push((NodeId::from(node.as_str()), label));
    }
    Ok(NetworkStrategy::new(graph, pairs)?)
}

/// Constants file `{"q_t": .., "q_r": .., "q_a": .., "q_xor": ..}` in joules;
/// omitted fields keep the built-in sensor-node values.
pub fn parse_constants(text: &str) -> Result<EnergyConstants, ParseError> {
    let root = parse_json(text)?;
    let top = object(&root, "$")?;
    let mut c = EnergyConstants::SENSOR_NODE;
    for (key, v) in top {
        let slot = match key.as_str() {
            "q_t" => &mut c.q_t,
            "q_r" => &mut c.q_r,
            "q_a" => &mut c.q_a,
            "q_xor" => &mut c.q_xor,
            _ => return Err(ParseError::field(key, "unknown constant (expected q_t, q_r, q_a or q_xor)")),
        };
        *slot = v.as_f64().ok_or_else(|| ParseError::field(key, "expected a number"))?;
    }
    c.validate()?;
    Ok(c)
}

/// Serialize a network in the input format; [`parse_network`] reads it back.
pub fn network_to_json(graph: &NetworkGraph, attacks: &AttackTopology) -> String {
    let nodes: Vec<Value> = (0..graph.node_count())
        .map(|i| json!({"id": graph.id(i).as_str(), "role": graph.role(i).hint().as_str()}))
        .collect();
    let edges: Vec<Value> = (0..graph.edge_count())
        .map(|e| {
            let (u, v) = graph.edge_ids(e);
            json!({"from": u.as_str(), "to": v.as_str(), "p": attacks.prob(e)})
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({"nodes": nodes, "edges": edges})).expect("plain JSON values");
    s.push('\n');
    s
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
