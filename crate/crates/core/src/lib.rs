#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytics;
pub mod cluster;
pub mod diff;
pub mod levenshtein;
pub mod lineage;
pub mod stats;
pub mod taxonomy;
pub mod text;
pub mod wikitext;
