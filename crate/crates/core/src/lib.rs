//! Subspace estimation from noisy canonical projections.
//!
//! An `r`-dimensional subspace of `ℝᵐ` is observed only through `N = m - r`
//! noisy bases of its restrictions to coordinate sets `Ω_i` of size `r + 1`.
//! Each restriction is a hyperplane of `ℝ^{r+1}`; lifting its unit normal back
//! to `ℝᵐ` gives one column of a normal matrix `B`, and the estimate is
//! `ker Bᵀ`. [`bounds`] evaluates the perturbation bound on the chordal
//! distance between the estimate and the truth, and [`experiments`] runs the
//! Monte-Carlo sweeps.

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod golden;
pub mod io;
pub mod linalg;
pub mod sampling;
pub mod synth;

pub use bounds::{bound_report, perturbation_bound, proof_chain, BoundOptions, BoundReport};
pub use error::{Error, Result};
pub use estimator::{build_normal_matrix, estimate, NormalMatrix, NormalSource, ProjectionSet};
pub use linalg::{chordal_distance, DenseMatrix, SubspaceBasis};
pub use sampling::{gen_omega1, gen_omega2, validate, SamplingPattern, ValidationMode};
