//! Simulation harness, file formats and command-line plumbing around
//! [`kseek_core`].

pub mod analysis;
pub mod harness;
pub mod io;

pub use kseek_core as core;
