//! The two worked examples: a rank-2 subspace of ℝ⁵ observed through three
//! overlapping 3-coordinate projections, first exactly and then with noise.

use serde::Serialize;

use crate::bounds::{bound_report, BoundOptions, BoundReport};
use crate::error::Result;
use crate::estimator::ProjectionSet;
use crate::linalg::{DenseMatrix, SubspaceBasis};
use crate::sampling::SamplingPattern;

/// Published values for the noisy example, rounded to two decimals.
pub const PUBLISHED_SIGMA_B: f64 = 0.33;
pub const PUBLISHED_BOUND: f64 = 0.59;
pub const PUBLISHED_D_G: f64 = 0.29;

pub fn example_basis() -> DenseMatrix {
    DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0], [1.0, 5.0]])
        .expect("static matrix")
}

/// `{1,2,3}, {2,3,4}, {3,4,5}` in 1-based coordinates.
pub fn example_pattern() -> SamplingPattern {
    SamplingPattern::from_one_based(5, 2, &[&[1, 2, 3], &[2, 3, 4], &[3, 4, 5]])
        .expect("static pattern")
}

/// Noiseless projection bases as printed; each spans the restriction of the
/// example subspace but is not literally a row subset of it.
pub fn example_truth_bases() -> Vec<DenseMatrix> {
    [
        [[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]],
        [[2.0, 2.0], [2.0, 3.0], [2.0, 4.0]],
        [[3.0, 3.0], [3.0, 4.0], [3.0, 5.0]],
    ]
    .iter()
    .map(|rows| DenseMatrix::from_rows(rows).expect("static matrix"))
    .collect()
}

pub fn example_noisy_bases() -> Vec<DenseMatrix> {
    [
        [[1.1, 0.9], [1.2, 1.8], [0.9, 3.2]],
        [[2.1, 2.1], [1.9, 3.1], [2.1, 3.8]],
        [[3.1, 3.1], [2.8, 4.2], [3.1, 4.9]],
    ]
    .iter()
    .map(|rows| DenseMatrix::from_rows(rows).expect("static matrix"))
    .collect()
}

pub fn example1_projections() -> ProjectionSet {
    ProjectionSet::noiseless(example_pattern(), &example_basis()).expect("static example")
}

/// Noisy projections with noise taken relative to the printed noiseless bases.
pub fn example2_projections() -> ProjectionSet {
    ProjectionSet::new(example_pattern(), example_noisy_bases())
        .and_then(|ps| ps.with_truth(example_truth_bases()))
        .expect("static example")
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenReport {
    pub example1: BoundReport,
    pub example2: BoundReport,
    pub published_sigma_b: f64,
    pub published_bound: f64,
    pub published_d_g: f64,
}

pub fn run_golden() -> Result<GoldenReport> {
    let truth = SubspaceBasis::span_of(&example_basis())?;
    let opts = BoundOptions {
        require_epsilon: true,
        ..Default::default()
    };
    let (example1, _) = bound_report(&example1_projections(), Some(&truth), &opts)?;
    let (example2, _) = bound_report(&example2_projections(), Some(&truth), &opts)?;
    Ok(GoldenReport {
        example1,
        example2,
        published_sigma_b: PUBLISHED_SIGMA_B,
        published_bound: PUBLISHED_BOUND,
        published_d_g: PUBLISHED_D_G,
    })
}
