//! Scenario files: topology, initial channels, protocol settings and analysis defaults.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "narrow_bridge"
//! description = "optional free text"
//!
//! [topology]              # either explicit pairs ...
//! nodes = 3
//! close = [[1, 2]]
//! range = [[2, 3]]
//! # ... or a generator:
//! # generator = "balanced_binary_tree"
//! # height = 3
//!
//! [initial]               # channels of nodes 2..=n, or mode = "sweep" | "random"
//! channels = [1, 2]
//!
//! [protocol]              # every key optional
//! variant = "with-acks"   # or "no-acks"
//! channels = 3
//! min_tentative_slots = 2
//! scan_dwell_slots = 2
//! max_random_wait = 3
//! ack_wait_slots = 2
//! collision_scope = "global"  # or "per-receiver"
//! slot_ms = 120
//! slots_per_frame = 12
//! reserved_per_frame = 2
//!
//! [analysis]              # every key optional
//! kind = "verify"         # "witness" | "simulate" | "bound"
//! depth = 64
//! seeds = [1, 2, 3]
//! slot_bound = 5000
//! heights = [1, 3, 8]
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::explorer::DEFAULT_DEPTH;
use crate::topology::{balanced_binary_tree, Topology};
use crate::types::{Channel, CollisionScope, ProtocolConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    Verify,
    Witness,
    Simulate,
    Bound,
}

impl AnalysisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisKind::Verify => "verify",
            AnalysisKind::Witness => "witness",
            AnalysisKind::Simulate => "simulate",
            AnalysisKind::Bound => "bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub kind: AnalysisKind,
    pub depth: usize,
    pub seeds: Vec<u64>,
    pub slot_bound: u64,
    pub heights: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialSpec {
    /// Full channel vector, root first.
    Fixed(Vec<Channel>),
    Sweep,
    Random,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub topology: Topology,
    /// Height when the topology came from the tree generator.
    pub tree_height: Option<u32>,
    pub initial: InitialSpec,
    pub cfg: ProtocolConfig,
    pub analysis: Analysis,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    topology: RawTopology,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    protocol: RawProtocol,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    nodes: Option<u32>,
    #[serde(default)]
    close: Vec<(u32, u32)>,
    #[serde(default)]
    range: Vec<(u32, u32)>,
    generator: Option<String>,
    height: Option<u32>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    mode: Option<String>,
    channels: Option<Vec<u32>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    variant: Option<String>,
    channels: Option<u32>,
    min_tentative_slots: Option<u32>,
    scan_dwell_slots: Option<u32>,
    max_random_wait: Option<u32>,
    ack_wait_slots: Option<u32>,
    collision_scope: Option<String>,
    slot_ms: Option<u32>,
    slots_per_frame: Option<u32>,
    reserved_per_frame: Option<u32>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    kind: Option<String>,
    depth: Option<usize>,
    seeds: Option<Vec<u64>>,
    slot_bound: Option<u64>,
    heights: Option<Vec<u32>>,
}

fn semantic(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("scenario {name:?}: {msg}"))
}

fn build_topology(name: &str, raw: &RawTopology) -> Result<(Topology, Option<u32>)> {
    match (&raw.generator, raw.nodes) {
        (Some(g), None) if g == "balanced_binary_tree" => {
            if !raw.close.is_empty() || !raw.range.is_empty() {
                return Err(semantic(name, "a generated topology cannot also list pairs"));
            }
            let h = raw
                .height
                .ok_or_else(|| semantic(name, "balanced_binary_tree needs `height`"))?;
            Ok((balanced_binary_tree(h).map_err(|e| semantic(name, e))?, Some(h)))
        }
        (Some(g), None) => Err(semantic(name, format!("unknown topology generator {g:?}"))),
        (None, Some(n)) => {
            if raw.height.is_some() {
                return Err(semantic(name, "`height` only applies to a generator"));
            }
            let t = Topology::new(n, &raw.close, &raw.range).map_err(|e| semantic(name, e))?;
            Ok((t, None))
        }
        (Some(_), Some(_)) => Err(semantic(name, "give either `nodes` or `generator`, not both")),
        (None, None) => Err(semantic(name, "topology needs `nodes` or `generator`")),
    }
}

fn build_config(name: &str, raw: &RawProtocol, nodes: u32) -> Result<ProtocolConfig> {
    let mut cfg = ProtocolConfig {
        max_id: nodes,
        ..ProtocolConfig::default()
    };
    if let Some(v) = &raw.variant {
        cfg.variant = Variant::parse(v).ok_or_else(|| semantic(name, format!("unknown variant {v:?}")))?;
    }
    if let Some(s) = &raw.collision_scope {
        cfg.collision_scope =
            CollisionScope::parse(s).ok_or_else(|| semantic(name, format!("unknown collision scope {s:?}")))?;
    }
    let fields = [
        (raw.channels, &mut cfg.num_channels),
        (raw.min_tentative_slots, &mut cfg.min_tentative_slots),
        (raw.scan_dwell_slots, &mut cfg.scan_dwell_slots),
        (raw.max_random_wait, &mut cfg.max_random_wait),
        (raw.ack_wait_slots, &mut cfg.ack_wait_slots),
        (raw.slot_ms, &mut cfg.slot_ms),
        (raw.slots_per_frame, &mut cfg.slots_per_frame),
        (raw.reserved_per_frame, &mut cfg.reserved_per_frame),
    ];
    for (value, slot) in fields {
        if let Some(v) = value {
            *slot = v;
        }
    }
    cfg.validate().map_err(|e| semantic(name, e))?;
    Ok(cfg)
}

/// Checks a full channel vector against the node count and channel range.
pub fn check_channels(name: &str, chans: &[Channel], cfg: &ProtocolConfig) -> Result<()> {
    if chans.len() != cfg.max_id as usize {
        return Err(semantic(
            name,
            format!("expected {} initial channels for nodes 2..={}", cfg.max_id - 1, cfg.max_id),
        ));
    }
    if let Some((i, c)) = chans
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, c)| c.0 < 1 || c.0 > cfg.num_channels)
    {
        return Err(semantic(
            name,
            format!("node {} starts on channel {} outside 1..={}", i + 1, c, cfg.num_channels),
        ));
    }
    Ok(())
}

fn build_initial(name: &str, raw: &RawInitial, cfg: &ProtocolConfig) -> Result<InitialSpec> {
    let mode = raw.mode.as_deref().unwrap_or(if raw.channels.is_some() { "fixed" } else { "sweep" });
    match (mode, &raw.channels) {
        ("fixed", Some(list)) => {
            let chans: Vec<Channel> = std::iter::once(1).chain(list.iter().copied()).map(Channel).collect();
            check_channels(name, &chans, cfg)?;
            Ok(InitialSpec::Fixed(chans))
        }
        ("fixed", None) => Err(semantic(name, "mode \"fixed\" needs `channels`")),
        ("sweep", None) => Ok(InitialSpec::Sweep),
        ("random", None) => Ok(InitialSpec::Random),
        ("sweep" | "random", Some(_)) => Err(semantic(name, format!("mode {mode:?} takes no `channels`"))),
        (other, _) => Err(semantic(name, format!("unknown initial mode {other:?}"))),
    }
}

fn build_analysis(name: &str, raw: &RawAnalysis, tree_height: Option<u32>) -> Result<Analysis> {
    let kind = match raw.kind.as_deref().unwrap_or("verify") {
        "verify" => AnalysisKind::Verify,
        "witness" => AnalysisKind::Witness,
        "simulate" => AnalysisKind::Simulate,
        "bound" => AnalysisKind::Bound,
        other => return Err(semantic(name, format!("unknown analysis kind {other:?}"))),
    };
    let analysis = Analysis {
        kind,
        depth: raw.depth.unwrap_or(DEFAULT_DEPTH),
        seeds: raw.seeds.clone().unwrap_or_else(|| vec![1]),
        slot_bound: raw.slot_bound.unwrap_or(5000),
        heights: raw
            .heights
            .clone()
            .unwrap_or_else(|| vec![tree_height.unwrap_or(1)]),
    };
    if analysis.depth == 0 || analysis.slot_bound == 0 {
        return Err(semantic(name, "depth and slot_bound must be at least 1"));
    }
    if analysis.seeds.is_empty() || analysis.heights.is_empty() {
        return Err(semantic(name, "seeds and heights must not be empty"));
    }
    Ok(analysis)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(format!("scenario syntax: {e}")))?;
    let name = raw.name.clone();
    let (topology, tree_height) = build_topology(&name, &raw.topology)?;
    let cfg = build_config(&name, &raw.protocol, topology.node_count())?;
    let initial = build_initial(&name, &raw.initial, &cfg)?;
    let analysis = build_analysis(&name, &raw.analysis, tree_height)?;
    Ok(Scenario {
        name,
        description: raw.description,
        topology,
        tree_height,
        initial,
        cfg,
        analysis,
    })
}

/// Built-in scenario sources, by name.
pub const BUILTINS: &[(&str, &str)] = &[
    ("ack_collision", include_str!("../scenarios/ack_collision.toml")),
    ("associate_collision", include_str!("../scenarios/associate_collision.toml")),
    ("narrow_bridge", include_str!("../scenarios/narrow_bridge.toml")),
    ("far_children", include_str!("../scenarios/far_children.toml")),
    ("binary_tree_h3", include_str!("../scenarios/binary_tree_h3.toml")),
];

pub fn builtin(name: &str) -> Option<Scenario> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| parse_scenario(src).expect("built-in scenarios are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::SignalClass;
    use crate::types::NodeId;

    #[test]
    fn builtins_parse_with_their_own_names() {
        for (name, src) in BUILTINS {
            let s = parse_scenario(src).unwrap();
            assert_eq!(&s.name, name);
        }
    }

    #[test]
    fn narrow_bridge_shape() {
        let s = builtin("narrow_bridge").unwrap();
        assert_eq!(s.topology.node_count(), 3);
        assert_eq!(s.topology.classify(NodeId(1), NodeId(2)).unwrap(), SignalClass::Close);
        assert_eq!(s.topology.classify(NodeId(2), NodeId(3)).unwrap(), SignalClass::Far);
        assert_eq!(s.initial, InitialSpec::Fixed(vec![Channel(1), Channel(1), Channel(2)]));
    }

    #[test]
    fn overlapping_relations_rejected() {
        let src = "name = \"x\"\n[topology]\nnodes = 2\nclose = [[1, 2]]\nrange = [[1, 2]]\n";
        assert!(matches!(parse_scenario(src), Err(Error::Config(_))));
    }

    #[test]
    fn node_out_of_range_rejected() {
        let src = "name = \"x\"\n[topology]\nnodes = 3\nrange = [[1, 9]]\n";
        assert!(parse_scenario(src).is_err());
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_scenario("name = \"x\"\n[topology\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn bad_initial_channels_rejected() {
        let base = "name = \"x\"\n[topology]\nnodes = 3\nrange = [[1, 2], [1, 3]]\n[initial]\n";
        assert!(parse_scenario(&format!("{base}channels = [1]\n")).is_err());
        assert!(parse_scenario(&format!("{base}channels = [1, 4]\n")).is_err());
        assert!(parse_scenario(&format!("{base}mode = \"sweep\"\nchannels = [1, 1]\n")).is_err());
        let ok = parse_scenario(&format!("{base}mode = \"sweep\"\n")).unwrap();
        assert_eq!(ok.initial, InitialSpec::Sweep);
    }

    #[test]
    fn unknown_keys_rejected() {
        let src = "name = \"x\"\n[topology]\nnodes = 1\n[protocol]\nvariant = \"no-acks\"\nturbo = true\n";
        assert!(parse_scenario(src).is_err());
    }

    #[test]
    fn tree_generator() {
        let s = builtin("binary_tree_h3").unwrap();
        assert_eq!(s.topology.node_count(), 15);
        assert_eq!(s.tree_height, Some(3));
        assert_eq!(s.cfg.max_id, 15);
        assert_eq!(s.cfg.collision_scope, CollisionScope::PerReceiver);
        assert_eq!(s.initial, InitialSpec::Random);
    }
}
