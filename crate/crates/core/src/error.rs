use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeodexError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("graph is disconnected ({components} components); use minimal_connected_k or a larger K")]
    Disconnected { components: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GeodexError>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GeodexError>;

impl GeodexError {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        GeodexError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &GeodexError {
        match self {
            GeodexError::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// CLI exit code: 1 usage, 2 data, 3 network.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            GeodexError::Config(_) | GeodexError::Argument(_) => 1,
            GeodexError::Network(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
