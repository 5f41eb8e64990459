use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero-norm vector in {context}")]
    ZeroNorm { context: &'static str },

    #[error("token {token:?} is not in the vocabulary")]
    OutOfVocabulary { token: String },

    #[error("no in-vocabulary token in phrase {tokens:?}")]
    AllTokensOov { tokens: Vec<String> },

    #[error("embedding vector for {token:?} in space {space} is all-zero")]
    ZeroVector { token: String, space: &'static str },

    #[error("invalid adjacency matrix: {reason}")]
    InvalidMatrix { reason: String },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    CentralityDiverged { iterations: usize, residual: f64 },

    #[error("value {value} outside the unit interval [0, 1]")]
    OutsideUnitInterval { value: f64 },

    #[error("negative rule weight {weight}")]
    NegativeWeight { weight: f64 },

    #[error("ground rule has no variables")]
    EmptyRule,

    #[error("variable index {var} out of range for problem with {num_vars} variables")]
    VarOutOfRange { var: usize, num_vars: usize },

    #[error("evidence value {value} for variable {var} outside [0, 1]")]
    EvidenceOutOfRange { var: usize, value: f64 },

    #[error("linear constraint has no coefficients")]
    EmptyConstraint,

    #[error("constraints are infeasible (projection residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error(
        "solver exceeded {max_iter} iterations (best objective {objective:.6}, \
         step {step:.3e}, constraint violation {violation:.3e})"
    )]
    SolverMaxIter {
        max_iter: usize,
        objective: f64,
        step: f64,
        violation: f64,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("failed to read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path} as JSON")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid riddle: {reason}")]
    InvalidRiddle { reason: String },

    #[error("all seed confidences are zero; nothing to normalize")]
    ZeroConfidenceMass,

    #[error("no image contributed an inferred target")]
    NoInferredTargets,

    #[error("groundtruth {tokens:?} has no in-vocabulary token; riddle excluded")]
    GroundtruthOov { tokens: Vec<String> },

    #[error("no scored riddles to average")]
    NoScoredRiddles,

    #[error("unknown {kind} {name:?}; known: {known}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
