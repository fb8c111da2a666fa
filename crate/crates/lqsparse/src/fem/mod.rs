//! P1/P0 finite element spaces on triangulations: assembly of the elliptic
//! bilinear form with Dirichlet elimination, sparse SPD solves, and the
//! discrete state/adjoint solution operators.

pub mod assemble;
pub mod multigrid;
mod field;
mod sparse;

pub use assemble::{
    assemble_full_bilinear, assemble_p0_load, assemble_stiffness, solve_adjoint, solve_state,
    tracking_term_sq, DofMap, EllipticCoeffs, MatrixCoeff, ScalarCoeff, StateSolver,
};
pub use field::{element_average, l2_inner_p0, l2_inner_p1, l2_inner_p1_p0, P0Field, P1Field};
pub use sparse::{solve_spd, CgOutcome, SparseSpd};
