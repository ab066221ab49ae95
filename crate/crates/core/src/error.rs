use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("diagram is not ordered: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("explosion guard: more than {0} paths")]
    ExplosionGuard(usize),
    #[error("variable {0} has an empty domain")]
    EmptyDomain(usize),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("empty system")]
    EmptySystem,
    #[error("system is infeasible: {0}")]
    Infeasible(String),
    #[error("rounding dead-end at variable {0}")]
    RoundingDeadEnd(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large: {0} assignments exceed the enumeration guard")]
    TooLarge(u128),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("suggestion is not representable: {0}")]
    NotRepresentable(String),
    #[error("assignment has {got} values but the layout has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("prototype already carries control nodes")]
    AlreadyAugmented,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("edit diagram has no path to the sink")]
    NoSinkPath,
    #[error("no intent samples")]
    NoSamples,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("cursor out of range: {cursor} > {len}")]
    CursorOutOfRange { cursor: usize, len: usize },
    #[error("bad language definition: {0}")]
    Language(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("missing logprobs")]
    MissingLogprobs,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Failures of the end-to-end pipeline; `code()` gives a stable identifier.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("record has no samples")]
    EmptySamples,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::EmptySamples => "empty_samples",
            PipelineError::Config(_) => "config",
            PipelineError::Build(_) => "build",
            PipelineError::Solver(_) => "solver",
            PipelineError::Tree(_) => "decode",
            PipelineError::Eval(_) => "eval",
        }
    }
}
