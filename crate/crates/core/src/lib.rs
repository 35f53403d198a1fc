//! Context-aware generation of Java logging statements.
//!
//! The library turns a Java source tree into a dataset of logging-completion
//! tasks, enriches each task with statically derived context (call chains,
//! neighbouring logs, in-scope variables, similar in-project examples),
//! prompts a pluggable completion backend, refines the variables used by the
//! tentative statement against project type definitions, and scores the
//! final statements against the ground truth.
//!
//! Modules follow the pipeline order:
//!
//! - [`corpus`]: scan a project, index classes/methods, build samples
//! - [`callgraph`]: class-hierarchy call graph and call-chain slices
//! - [`loggraph`]: log dependency graph and preceding/subsequent log slices
//! - [`scopevars`]: in-scope variable collection and type resolution
//! - [`retrieval`]: BM25 retrieval of similar logged methods
//! - [`promptkit`]: deterministic prompt assembly
//! - [`modelgw`]: completion backends, response parsing, statement decomposition
//! - [`evalkit`]: positioning/level/variable/text metrics and reports
//! - [`pipeline`]: end-to-end orchestration shared by the CLI

pub mod callgraph;
pub mod corpus;
pub mod evalkit;
pub(crate) mod jast;
pub mod level;
pub mod loggraph;
pub mod modelgw;
pub mod pipeline;
pub mod promptkit;
pub mod retrieval;
pub mod scopevars;

pub use level::Level;
