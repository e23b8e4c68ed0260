//! Batch front end for the `boxcast` toolkit: membership checks, relative
//! entropy estimates, the verification suite and fixture generation.

pub mod commands;
pub mod fixtures;
pub mod report;
pub mod suite;

pub use commands::{execute, Command, Failure, Options, Outcome};
pub use report::RunReport;
pub use suite::{run_suite, Check, Scope, SuiteParams};
