use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver did not converge after {iterations} sweeps (eigenvalue index {index})")]
    EigenNoConvergence { index: usize, iterations: usize },

    #[error("cholesky factorization failed after {attempts} jitter attempts (last jitter {jitter:e})")]
    NotPositiveDefinite { attempts: usize, jitter: f64 },

    #[error("non-finite value produced in layer {layer}")]
    NonFinite { layer: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("coarsening failed at level {level}: {source}")]
    Coarsen {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("newton iteration diverged at step {step}: residual norms {norms:?}")]
    NewtonDiverged { step: usize, norms: Vec<f64> },

    #[error("unphysical state in cell {cell} at t = {time}: {detail}")]
    Unphysical {
        cell: usize,
        time: f64,
        detail: String,
    },

    #[error("non-physical face state on face {face}: {detail}")]
    FaceState { face: usize, detail: String },

    #[error("gauss-newton did not converge at time step {step} after {iterations} iterations (best ratio {best_ratio:e})")]
    GaussNewton {
        step: usize,
        iterations: usize,
        best_ratio: f64,
    },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training produced a non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("zero-norm reference in error metric")]
    ZeroDenominator,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
