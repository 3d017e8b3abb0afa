use thiserror::Error;

use crate::types::{MessageType, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("payload schema violation for {mtype}: expected {expected} fields, got {got}")]
    Schema {
        mtype: MessageType,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("node {0} is out of range")]
    NodeOutOfRange(NodeId),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("enumeration limit: {0}")]
    Limit(String),
    #[error("no message from node {0} in traffic")]
    Lookup(NodeId),
    #[error("malformed submissions: {0}")]
    Contract(String),
    #[error("missing resolution for {0}")]
    MissingResolution(String),
    #[error("exploration budget exceeded after {states} states")]
    Budget { states: usize },
    #[error("no goal state is reachable")]
    WitnessAbsent,
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
