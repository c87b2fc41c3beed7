use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-triangle face at line {line} (arity {arity})")]
    NonTriangleFace { line: usize, arity: usize },

    #[error("mesh validation failed ({invariant}): {detail}")]
    InvalidMesh { invariant: &'static str, detail: String },

    #[error("near-degenerate angle in face {face}: |cot| = {cot:.3e}")]
    DegenerateAngle { face: usize, cot: f64 },

    #[error("eigensolver did not converge: {detail}")]
    EigenNotConverged { detail: String },

    #[error("spectral window is not monotone: telescoping difference {diff:.3e} at k={k}, j={j}")]
    NonMonotoneWindow { k: usize, j: i32, diff: f64 },

    #[error("invalid spectral window: {0}")]
    InvalidWindow(String),

    #[error("scale {scale} outside filter bank range [{j_min}, {j_max}]")]
    ScaleOutOfRange { scale: i32, j_min: i32, j_max: i32 },

    #[error(
        "scattering would produce {count} paths, above the cap of {cap}; \
         reduce the depth L or narrow the scale range [j_min, J]"
    )]
    PathCapExceeded { count: u128, cap: u128 },

    #[error("path sets differ between coefficient maps")]
    PathMismatch,

    #[error("{count} warp point(s) farther than {limit:.3e} from the surface: {indices:?}")]
    WarpOffSurface {
        count: usize,
        limit: f64,
        indices: Vec<usize>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid binary data: {0}")]
    Format(String),

    #[error("unexpected end of data")]
    UnexpectedEof,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid training data: {0}")]
    Training(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
