use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("simplicity violation: duplicate location {coords:?} (line {line})")]
    Simplicity { line: usize, coords: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("singular covariate block at wavenumber {node:?} (condition number {condition:e})")]
    Singular { node: Vec<f64>, condition: f64 },

    #[error("symmetry violation: imaginary residual {residual:e} exceeds tolerance {tolerance:e}")]
    Symmetry { residual: f64, tolerance: f64 },

    #[error("unsupported null: {0}")]
    UnsupportedNull(String),

    #[error("unknown scenario '{0}' (valid: {list})", list = crate::simulate::SCENARIO_IDS.join(", "))]
    UnknownScenario(String),

    #[error("oracle quadrature failed: {0}")]
    Oracle(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
