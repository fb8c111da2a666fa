//! Error type shared by all solver layers.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or solver parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Fields living on different meshes were combined.
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    /// The coefficient matrix failed the uniform ellipticity check.
    #[error("non-elliptic coefficients at ({x}, {y}): smallest eigenvalue {eigmin:.3e}")]
    NonElliptic { x: f64, y: f64, eigmin: f64 },

    /// Conjugate gradients hit the iteration cap.
    #[error("linear solve did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolveDiverged { residual: f64, iterations: usize },

    /// Inner convex solve hit its iteration cap; carries the residual history.
    #[error("inner solve did not converge: residual {last:.3e} after {} iterations", trace.len())]
    InnerNoConvergence { last: f64, trace: Vec<f64> },

    /// Outer loop hit its iteration cap; the best report so far is attached.
    #[error("outer loop did not converge: control step {step:.3e}, kkt residual {kkt:.3e}")]
    OuterNoConvergence {
        step: f64,
        kkt: f64,
        report: Box<crate::ocp::SolveReport>,
    },

    /// A refinement-ladder error computation was asked to relate two meshes
    /// that are not in the same refinement lineage.
    #[error("meshes are not in the same refinement lineage")]
    NotSameLineage,

    #[error("at least {min} ladder levels are required, got {got}")]
    TooFewLevels { min: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
