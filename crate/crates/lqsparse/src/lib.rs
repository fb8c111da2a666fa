//! Finite-element solver for the Huber-regularized, L^q-sparse elliptic
//! optimal control problem
//!
//! ```text
//! min  1/2 ||y - y_d||^2  +  alpha/2 ||u||^2  +  beta * integral h_{q,gamma}(u)^q
//! s.t. A y = u + f in Omega,  y = 0 on the boundary,  u_a <= u <= u_b,
//! ```
//!
//! on axis-aligned rectangles, with continuous piecewise-linear states and
//! piecewise-constant controls. The nonconvex penalty is handled through its
//! difference-of-convex splitting: the outer loop linearizes the concave part
//! (`w = j(u)`) and each inner step solves the resulting convex L^1-sparse
//! control problem. A mesh-refinement harness measures experimental orders
//! of convergence of the control error against a fine reference solution.

pub mod eoc;
pub mod error;
pub mod fem;
pub mod func;
pub mod interp;
pub mod io;
pub mod mesh;
pub mod ocp;
pub mod quad;
pub mod scalar;

pub use eoc::{EocTable, LadderConfig};
pub use error::{Error, Result};
pub use fem::{EllipticCoeffs, P0Field, P1Field, SparseSpd, StateSolver};
pub use func::FuncSpec;
pub use interp::InterpStudyResult;
pub use mesh::TriMesh;
pub use ocp::{ProblemSpec, SolveOptions, SolveReport};
pub use scalar::RegParams;
