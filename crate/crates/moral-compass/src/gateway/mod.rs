//! The externally visible surface: configuration, the HTTP API, and
//! the interactive console.

pub mod config;
pub mod repl;
mod server;
mod service;

pub use config::Config;
pub use server::{serve, start, RunningServer};
pub use service::{build_stack, Service};
