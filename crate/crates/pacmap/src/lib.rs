//! Network front end and command line tools for the chase game.
//!
//! [`server`] exposes games over HTTP plus a WebSocket play channel;
//! [`protocol`] defines the JSON messages on that channel.

pub mod protocol;
pub mod server;
