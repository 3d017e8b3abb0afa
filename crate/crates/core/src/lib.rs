//! Model of cluster-tree formation over dedicated TSCH slots.
//!
//! The crate layers a synchronous slot engine ([`mac`]) under a per-node
//! formation protocol ([`protocol`]), then offers exhaustive exploration of
//! small networks ([`explorer`]), seeded simulation of large ones
//! ([`simulator`]) and the closed-form slot estimate ([`scalability`]).

pub mod error;
pub mod explorer;
pub mod invariants;
pub mod mac;
pub mod protocol;
pub mod scenario;
pub mod scalability;
pub mod simulator;
pub mod topology;
pub mod trace;
pub mod types;

pub use error::{Error, Result};
pub use protocol::{NetworkState, NodeState, Resolution};
pub use topology::{SignalClass, Topology};
pub use types::{Channel, CollisionScope, Message, MessageType, NodeId, ProtocolConfig, Role, Variant};
