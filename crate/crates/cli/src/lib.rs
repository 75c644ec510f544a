//! Configuration and experiment drivers behind the `wavepart` binary.

pub mod config;
pub mod run;
