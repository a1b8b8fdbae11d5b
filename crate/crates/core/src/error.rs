use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("load error at row {row}, column {col}: {msg}")]
    Load { row: usize, col: usize, msg: String },

    /// A dataset oracle ran out of instances. Carries the best ε certified
    /// before the run halted, when the caller was an engine.
    #[error(
        "instance {instance} requested for configuration {config}, but only {available} instances exist{}",
        achieved_epsilon.map(|e| format!(" (achieved epsilon {e})")).unwrap_or_default()
    )]
    InstanceExhausted {
        config: usize,
        instance: usize,
        available: usize,
        achieved_epsilon: Option<f64>,
    },

    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// The configuration sampler cannot supply enough distinct configurations.
    #[error("phase {phase} needs {requested} configurations, but the sampler can supply at most {max_available}")]
    PhaseUnsatisfiable {
        phase: u32,
        requested: usize,
        max_available: usize,
    },

    #[error("no power-of-two captime reaches utility {target}")]
    UnreachableCaptime { target: f64 },

    #[error("invalid {field}: {msg}")]
    Spec { field: String, msg: String },

    #[error("traces are not comparable: {0}")]
    Comparison(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn spec(field: &str, msg: impl Into<String>) -> Self {
        Error::Spec {
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    /// Attach the certified ε to an instance-exhaustion error.
    pub(crate) fn with_epsilon(self, eps: f64) -> Self {
        match self {
            Error::InstanceExhausted {
                config,
                instance,
                available,
                ..
            } => Error::InstanceExhausted {
                config,
                instance,
                available,
                achieved_epsilon: Some(eps),
            },
            other => other,
        }
    }
}
