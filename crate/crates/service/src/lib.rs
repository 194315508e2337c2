//! Chat service: wire protocol, event log, the conversation hub and the
//! transports and simulator built around it.

pub mod events;
pub mod export;
pub mod protocol;
pub mod hub;
pub mod replay;
pub mod server;
pub mod sim;
