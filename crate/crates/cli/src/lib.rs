//! Files, reports and the `basket` command line for `basket-core`.

pub mod analysis;
pub mod cli;
pub mod io;
pub mod report;
pub mod runner;
