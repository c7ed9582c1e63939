//! Batch front end for the pattern QKD toolkit: config files, subcommands and run manifests.

pub mod commands;
pub mod config;
pub mod output;
