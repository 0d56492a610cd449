//! FFT-based computational homogenization of periodic composites.
//!
//! Conductivity and linear or nonlinear elasticity on regular periodic
//! grids, solved through variational principles built on the periodic
//! Green's operators of a uniform reference medium.

// Index loops read closer to the tensor algebra; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod constitutive;
pub mod error;
pub mod fft;
pub mod functionals;
pub mod field;
pub mod green;
pub mod homogenize;
pub mod io;
pub mod stiffness;
pub mod solvers;
pub mod sum;

pub use error::{Error, Result};
pub use field::{Grid, MacroscopicLoad, Physics, TensorField};
pub use green::{GreenOperator, L2Decomposition, Subspace};
pub use stiffness::{Stiffness, StiffnessField};
pub use constitutive::{ConvexPotential, PhaseLaw, PhaseMap, PowerLawPotential, QuadraticPotential};
pub use functionals::{FunctionalEval, Parts};
pub use homogenize::{make_benchmark, obnosov_exact, Benchmark, EffectiveTensor, HomogProblem};
pub use solvers::{
    solve, BetaRule, Functional, InitChoice, Minimizer, ReferenceChoice, Scheme, SchemeConfig, SolveOutcome,
    StopReason,
};
