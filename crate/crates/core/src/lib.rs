//! `btq`: behavior trees annotated with qualities and quality requirements.
//!
//! The pipeline is `parser` (text to [`model::BehaviorTreeModel`], validated),
//! then either `codegen` (BehaviorTree.CPP XML) or `engine` (scripted
//! execution) with `monitor` checking hard constraints as nodes finish.

pub mod cli;
pub mod codegen;
pub mod condexpr;
pub mod diagnostic;
pub mod engine;
pub mod model;
pub mod monitor;
pub mod parser;

pub use diagnostic::{Diagnostic, Location, Severity};
pub use model::BehaviorTreeModel;
