//! Loading networks and parsing command-line specs.

use std::fmt;
use std::fs;
use std::path::Path;

use ncauth_core::io::{parse_attacks, parse_constants, parse_network, parse_strategy};
use ncauth_core::{butterfly, AttackTopology, EnergyConstants, NetworkGraph, NetworkStrategy, NodeId, OptimizeError};

pub const BUILTIN_BUTTERFLY: &str = "builtin:butterfly";

#[derive(Debug)]
pub enum CliError {
    /// Bad input or arguments; exit 2.
    Input(String),
    /// A validation threshold was exceeded; exit 3.
    Threshold(String),
    /// The network is too large for exhaustive search; exit 4.
    Capacity(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Threshold(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Threshold(m) | CliError::Capacity(m) => f.write_str(m),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::CapacityExceeded { .. } => CliError::Capacity(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub fn input_error(context: impl fmt::Display, e: impl fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_error(path.display(), e))
}

pub struct Network {
    pub graph: NetworkGraph,
    pub attacks: AttackTopology,
    /// Every file read, for the run manifest.
    pub inputs: Vec<String>,
}

/// Network from a file (or the built-in butterfly) with attack overrides
/// applied: first the attack file, then each `FROM-TO=P` item.
pub fn load_network(spec: &str, attack_file: Option<&Path>, overrides: &[String]) -> Result<Network, CliError> {
    let (graph, mut attacks) = if spec == BUILTIN_BUTTERFLY {
        let g = butterfly();
        let a = AttackTopology::zero(&g);
        (g, a)
    } else {
        let doc = parse_network(&read(Path::new(spec))?).map_err(|e| input_error(spec, e))?;
        (doc.graph, doc.attacks)
    };
    let mut inputs = vec![spec.to_owned()];
    if let Some(path) = attack_file {
        attacks = parse_attacks(&graph, &attacks, &read(path)?).map_err(|e| input_error(path.display(), e))?;
        inputs.push(path.display().to_string());
    }
    for item in overrides.iter().flat_map(|s| s.split(',')).filter(|s| !s.trim().is_empty()) {
        let ((from, to), p) = parse_override(item)?;
        attacks
            .set(&graph, &from, &to, p)
            .map_err(|e| input_error(format!("--attack {item}"), e))?;
    }
    Ok(Network { graph, attacks, inputs })
}

/// `A-C` or `A->C`.
pub fn parse_edge(text: &str) -> Result<(NodeId, NodeId), CliError> {
    let text = text.trim();
    let (u, v) = text
        .split_once("->")
        .or_else(|| text.split_once('-'))
        .ok_or_else(|| CliError::Input(format!("malformed edge `{text}` (expected FROM-TO)")))?;
    if u.trim().is_empty() || v.trim().is_empty() {
        return Err(CliError::Input(format!("malformed edge `{text}` (expected FROM-TO)")));
    }
    Ok((NodeId::from(u.trim()), NodeId::from(v.trim())))
}

/// `A-C=0.5`.
pub fn parse_override(text: &str) -> Result<((NodeId, NodeId), f64), CliError> {
    let (edge, p) = text
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("malformed attack `{text}` (expected FROM-TO=P)")))?;
    let p: f64 = p
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("malformed probability in `{text}`")))?;
    Ok((parse_edge(edge)?, p))
}

/// Comma-separated edge list.
pub fn parse_links(text: &str) -> Result<Vec<(NodeId, NodeId)>, CliError> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_edge).collect()
}

pub fn load_constants(path: Option<&Path>) -> Result<EnergyConstants, CliError> {
    match path {
        None => Ok(EnergyConstants::SENSOR_NODE),
        Some(p) => parse_constants(&read(p)?).map_err(|e| input_error(p.display(), e)),
    }
}

/// `C=XAF,D=F` on the command line, or a strategy JSON file.
pub fn load_strategy(graph: &NetworkGraph, spec: &str) -> Result<NetworkStrategy, CliError> {
    if spec.contains('=') {
        NetworkStrategy::parse(graph, spec).map_err(|e| input_error("--strategy", e))
    } else {
        parse_strategy(graph, &read(Path::new(spec))?).map_err(|e| input_error(spec, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_specs() {
        assert_eq!(parse_edge("A-C").unwrap(), (NodeId::from("A"), NodeId::from("C")));
        assert_eq!(parse_edge(" r-1->d ").unwrap(), (NodeId::from("r-1"), NodeId::from("d")));
        assert!(parse_edge("AC").is_err());
        assert!(parse_edge("A-").is_err());
        assert_eq!(parse_override("A-C=0.25").unwrap().1, 0.25);
        assert!(parse_override("A-C").is_err());
        assert_eq!(parse_links("A-C,B-C,C-D").unwrap().len(), 3);
    }

    #[test]
    fn builtin_with_overrides() {
        let n = load_network(BUILTIN_BUTTERFLY, None, &["A-C=0.5,C-D=0.1".into()]).unwrap();
        assert_eq!(n.attacks.get(&"A".into(), &"C".into()), Some(0.5));
        assert_eq!(n.attacks.get(&"C".into(), &"D".into()), Some(0.1));
        assert!(load_network(BUILTIN_BUTTERFLY, None, &["A-D=0.5".into()]).is_err());
        assert!(load_network(BUILTIN_BUTTERFLY, None, &["A-C=2".into()]).is_err());
    }
}
