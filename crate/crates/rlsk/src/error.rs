use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A call violated an operation precondition.
    #[error("parameter error: {0}")]
    Param(String),

    /// An experiment or policy setup is inconsistent (detected before running).
    #[error("configuration error: {0}")]
    Config(String),

    /// World-model evaluation failed (carries the expression location).
    #[error("world model error: {0}")]
    Model(#[from] crate::wmdl::ModelError),

    /// World-model source failed to parse.
    #[error("world model parse failed:\n{}", crate::wmdl::render_diagnostics(.0))]
    Parse(Vec<crate::wmdl::Diagnostic>),

    /// An episode aborted mid-run (policy or model failure at `step`).
    #[error("episode aborted at step {step}: {source}")]
    Episode {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    /// DQN training produced a non-finite parameter.
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
