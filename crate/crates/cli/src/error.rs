use gsprobe_core::Error as CoreError;
use thiserror::Error;

/// Pipeline stage a core error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Couplings,
    Model,
    Spectrum,
    Evolve,
    Analysis,
    Closure,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Couplings => "couplings",
            Stage::Model => "model",
            Stage::Spectrum => "spectrum",
            Stage::Evolve => "evolve",
            Stage::Analysis => "analysis",
            Stage::Closure => "closure",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{} stage failed: {source}", stage.name())]
    Core { stage: Stage, source: CoreError },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source {
                // these only arise from user-supplied values
                CoreError::Domain(_) | CoreError::Capability { .. } => 2,
                CoreError::Solver { .. }
                | CoreError::IntegrationQuality { .. }
                | CoreError::Convergence { .. } => 4,
                _ => 3,
            },
            CliError::Io(_) | CliError::Output(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

/// Attaches a stage to core results.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> AtStage<T> for gsprobe_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let core = |e| CliError::Core {
            stage: Stage::Evolve,
            source: e,
        };
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(core(CoreError::Domain("x".into())).exit_code(), 2);
        assert_eq!(
            core(CoreError::Solver {
                residual: 1.0,
                tolerance: 0.1
            })
            .exit_code(),
            4
        );
        assert_eq!(core(CoreError::Consistency("x".into())).exit_code(), 3);
        assert_eq!(core(CoreError::Degeneracy { splitting: 0.0 }).exit_code(), 3);
    }

    #[test]
    fn message_names_stage() {
        let e = CliError::Core {
            stage: Stage::Closure,
            source: CoreError::Consistency("drift".into()),
        };
        assert!(e.to_string().starts_with("closure stage failed"));
    }
}
