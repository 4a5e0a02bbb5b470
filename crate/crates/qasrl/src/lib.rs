//! Std companion to `qasrl-core`: record and CoNLL-U files, model-service
//! clients (HTTP and fixture tables), parallel drivers, the curation store
//! and HTTP API, and the `qasrl` command line.

pub mod cli;
pub mod config;
pub mod curate;
pub mod embed;
pub mod io;
pub mod providers;
pub mod run;
pub mod server;

pub use qasrl_core as core;
