//! Uncertainty-aware code suggestions from sampled intents.
//!
//! A suggestion prototype is parsed into a tree, augmented with decision
//! variables for UNSURE regions, truncation points or call selection, and
//! scored against K intent samples through edit-distance decision diagrams.
//! The best annotation is found by dual decomposition over those diagrams.

pub mod diagram;
pub mod error;
pub mod eval;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod solver;
pub mod tree;
pub mod utility;

pub use diagram::{Assignment, Diagram, DiagramSystem, OrderedDiagram, PartialAssignment};
pub use error::{BuildError, DiagramError, EvalError, OracleError, ParseError, PipelineError, SolverError, TreeError};
pub use eval::{Baseline, EvalReport, Evaluator};
pub use parse::{parse_source, Language, LanguageName};
pub use pipeline::{run_pipeline, ExampleRecord, OutputRecord, PipelineOptions};
pub use solver::{solve, SolveOptions, SolverReport};
pub use tree::{AnnotatedSuggestion, Confidence, NodeTree, TaskKind};
pub use utility::{build_system, UtilityConfig};
