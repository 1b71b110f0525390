use koopact_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) trait AtStep<T> {
    fn at_step(self, step: usize) -> Result<T>;
}

impl<T> AtStep<T> for std::result::Result<T, CoreError> {
    fn at_step(self, step: usize) -> Result<T> {
        self.map_err(|source| HarnessError::Step { step, source })
    }
}
