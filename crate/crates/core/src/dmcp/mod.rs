//! Dynamic Module Configuration Protocol.
//!
//! A module announces itself with DISCOVER and receives its slice of the
//! central configuration in an OFFER. It confirms with ACK (carrying its
//! heartbeat period) and then sends HEARTBEATs until BYE. The
//! supercomponent marks modules that fall silent for more than three
//! periods as DEAD.

mod message;
mod node;
mod store;
mod supervisor;

use thiserror::Error;

pub use message::{DmcpMessage, MessageKind, DMCP_DOWN, DMCP_UP, HEARTBEAT_KEY, PAYLOAD_DMCP};
pub use node::{DmcpClient, Supercomponent};
pub use store::ConfigStore;
pub use supervisor::{
    handle_ack, handle_bye, handle_discover, handle_heartbeat, supervise_tick, ModuleRecord,
    ModuleState, Supervisor, Transition, Violation, DEAD_AFTER_PERIODS,
};

#[derive(Debug, Error)]
pub enum DmcpError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("invalid key '{0}'")]
    InvalidKey(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),
}
