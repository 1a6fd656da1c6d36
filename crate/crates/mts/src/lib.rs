//! File formats, parallel hunting and the `mts` command line, on top of [`mts_core`].

pub mod cli;
pub mod files;
pub mod parallel;
