#![allow(dead_code)]

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subspace_perturb::linalg::DenseMatrix;
use subspace_perturb::sampling::SamplingPattern;
use subspace_perturb::synth::fill_standard_normal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let mut v = vec![0.0; rows * cols];
    fill_standard_normal(rng, &mut v);
    DenseMatrix::from_row_major(rows, cols, &v).unwrap()
}

/// `m - r` independent uniformly random `(r+1)`-subsets of `0..m`.
pub fn random_pattern(rng: &mut ChaCha8Rng, m: usize, r: usize) -> SamplingPattern {
    let omegas = (0..m - r)
        .map(|_| {
            let mut s = index::sample(rng, m, r + 1).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    SamplingPattern::new(m, r, omegas).unwrap()
}
