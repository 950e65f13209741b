//! File formats, reports and the command-line front end over `cevkit-core`.

pub mod cli;
pub mod eval;
pub mod io;
pub mod report;
