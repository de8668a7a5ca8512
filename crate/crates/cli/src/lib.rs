//! Command implementations and the HTTP inference service behind the
//! `reactmine` binary.

pub mod commands;
pub mod server;
