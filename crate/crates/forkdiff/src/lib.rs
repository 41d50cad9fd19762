//! IO, networking and orchestration around `forkdiff-core`.

pub mod cache;
pub mod config;
pub mod crawl;
pub mod error;
pub mod io;
pub mod llm;
pub mod mediawiki;
pub mod pipeline;
pub mod recognizer;
pub mod report;
pub mod stages;
pub mod transport;
