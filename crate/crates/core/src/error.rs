use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("remeshing failed: {0}")]
    Remesh(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("line search found no Wolfe step after {trials} trials (iteration {iteration}, energy {energy:e})")]
    LineSearch {
        iteration: usize,
        trials: usize,
        energy: f64,
    },

    #[error("{phase} did not converge after {iterations} iterations (a_max = {a_max:.6} mm, limit {limit:.6} mm)")]
    Convergence {
        phase: &'static str,
        iterations: usize,
        a_max: f64,
        limit: f64,
    },

    #[error("local refinement diverged at step {step}: |loss| = {loss:e} mm")]
    Divergence { step: usize, loss: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
