use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}: {message}")]
    Parse { source_name: String, message: String },
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: ebesr::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(ebesr::Error) -> Self {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    /// 2 for bad configuration or input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Usage(_) => 2,
            CliError::Core { source, .. } if source.is_numerical() => 3,
            CliError::Core { .. } => 2,
            CliError::Io(_) => 1,
        }
    }
}
