//! File formats, model archives and the experiment runner around
//! `vbnmf-core`. The `vbnmf` binary exposes them as subcommands.

pub mod archive;
pub mod config;
pub mod harness;
pub mod io;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use vbnmf_core as core;
