//! Dual-decomposition resource allocation for cooperative cognitive radio
//! OFDMA networks.

pub mod baselines;
pub mod channel;
pub mod dual;
pub mod ellipsoid;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod persub;
pub mod recovery;

pub use channel::{generate_instance, ChannelParams, NodeLayout};
pub use model::*;
