use std::path::PathBuf;

use thiserror::Error;

use nvmap_core::fdtd::FdtdError;
use nvmap_core::gridfile::GridFileError;
use nvmap_core::imaging::ImagingError;
use nvmap_core::nv::NvError;
use nvmap_core::scene::SceneError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("missing artifact from stage `{stage}`: {}", path.display())]
    Missing { stage: &'static str, path: PathBuf },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Missing { .. } => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<FdtdError> for CliError {
    fn from(e: FdtdError) -> Self {
        match e {
            FdtdError::NonConvergence { .. } | FdtdError::NonFinite { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<NvError> for CliError {
    fn from(e: NvError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<GridFileError> for CliError {
    fn from(e: GridFileError) -> Self {
        match e {
            GridFileError::Io(io) => CliError::Io(io),
            other => CliError::Validation(other.to_string()),
        }
    }
}
