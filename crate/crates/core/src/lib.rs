//! Generation, repair and coverage-guided evolution of unit tests for focal methods.

pub mod config;
pub mod coverage;
pub mod diagnostics;
pub mod gateway;
pub mod harness;
pub mod ingest;
pub mod ledger;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod preprocess;
pub mod profile;
pub mod prompt;
pub mod repair;
pub mod suite;
pub mod syntax;
