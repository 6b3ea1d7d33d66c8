use chatter_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0} identity suite(s) failed")]
    SuiteFailed(usize),
}

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Field { field: field.into(), message: message.into() }
    }

    /// 1 suite failure, 2 invalid input, 3 numerical failure, 4 budget or depth exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SuiteFailed(_) => 1,
            CliError::Json { .. } | CliError::Io { .. } | CliError::Field { .. } | CliError::Csv(_) => 2,
            CliError::Core(e) => match e {
                CoreError::BudgetExceeded { .. } | CoreError::DepthExceeded { .. } => 4,
                CoreError::SingularGoh { .. }
                | CoreError::FullRankGoh
                | CoreError::Degenerate { .. }
                | CoreError::BlowUp { .. }
                | CoreError::IllConditioned(_)
                | CoreError::ZeroMatrix => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::field("x", "y").exit_code(), 2);
        assert_eq!(CliError::SuiteFailed(1).exit_code(), 1);
        assert_eq!(CliError::Core(CoreError::BudgetExceeded { terms: 10, budget: 1 }).exit_code(), 4);
        assert_eq!(CliError::Core(CoreError::SingularGoh { det: 0.0 }).exit_code(), 3);
        assert_eq!(CliError::Core(CoreError::Precondition("n".into())).exit_code(), 2);
    }
}
