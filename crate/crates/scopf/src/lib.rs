//! File formats, a thread pool and the command-line pipelines built on
//! `scopf-core`.

pub mod caseio;
pub mod config;
pub mod pipeline;
pub mod runtime;
