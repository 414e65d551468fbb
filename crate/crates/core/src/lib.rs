//! Human-in-the-loop speech corpus production.
//!
//! The crate is organised by stage of the production line:
//!
//! - [`corpus`]: the four-level metadata schema (dataset, session, utterance,
//!   speaker), loading, validation and aggregation.
//! - [`pretag`]: machine pre-labeling pipeline with pluggable stage adapters.
//! - [`speaker`]: anonymized speaker enrollment database.
//! - [`qc`]: blind test questions, behavior monitoring, real-time validation
//!   and acceptance sampling.
//! - [`packaging`]: distribution-constrained subset selection and emission.
//! - [`orchestrator`]: event-sourced job/assignment service with an HTTP API.
//! - [`sim`]: simulated annotator populations driving the orchestrator.

pub mod corpus;
pub mod orchestrator;
pub mod packaging;
pub mod pretag;
pub mod qc;
pub mod sim;
pub mod speaker;
