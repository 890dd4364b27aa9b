//! Seeded generation of random subspaces, noisy projections and complete
//! Monte-Carlo trials.
//!
//! # Random streams
//!
//! All randomness comes from ChaCha8 generators. A trial is identified by a
//! base `seed` and a 64-bit `stream` key; each purpose below gets its own
//! generator, seeded with `splitmix64(seed ^ PURPOSE)` and positioned on
//! ChaCha stream `stream`:
//!
//! | purpose        | draws                                   |
//! |----------------|-----------------------------------------|
//! | `SUBSPACE`     | the `m × r` basis `U`                   |
//! | `NOISE + slot` | the noise matrices for pattern `slot`   |
//! | `NOISE_LEVEL`  | the noise scale of a noise-sweep trial  |
//!
//! Keeping `U` on its own stream means every sampling pattern in a sweep sees
//! the same subspace for a given trial, with fresh noise per pattern.
//! Normal deviates use the Box-Muller transform, so each trial consumes a
//! fixed number of uniforms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{bound_report, BoundOptions};
use crate::error::{Error, Result};
use crate::estimator::{restrict_rows, ProjectionSet};
use crate::linalg::{DenseMatrix, SubspaceBasis};
use crate::sampling::{gen_omega1, gen_omega2, SamplingPattern};

pub mod purpose {
    pub const SUBSPACE: u64 = 0x5355_4253_5041_4345;
    pub const NOISE: u64 = 0x4e4f_4953_4500_0000;
    pub const NOISE_LEVEL: u64 = 0x4c45_5645_4c00_0000;
}

const MAX_REDRAWS: usize = 3;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for one purpose of one trial.
pub fn stream_rng(seed: u64, purpose: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ purpose));
    rng.set_stream(stream);
    rng
}

/// Uniform on `(0, 1]`.
fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Fills `out` with standard normal deviates via Box-Muller, two per pair of
/// uniforms.
pub fn fill_standard_normal<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for chunk in out.chunks_mut(2) {
        let u1 = open_unit(rng);
        let u2 = rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        chunk[0] = radius * angle.cos();
        if let Some(second) = chunk.get_mut(1) {
            *second = radius * angle.sin();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisDistribution {
    /// i.i.d. standard normal entries.
    #[default]
    Normal,
    /// i.i.d. uniform entries on `(0, 1]`.
    Uniform,
}

impl std::str::FromStr for BasisDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Parse(format!(
                "unknown basis distribution {other:?}"
            ))),
        }
    }
}

fn check_dims(m: usize, r: usize) -> Result<()> {
    if r == 0 || r >= m {
        Err(Error::InvalidDimensions { m, r })
    } else {
        Ok(())
    }
}

/// Random `m × r` basis, returned raw and orthonormalized. Rank-deficient
/// draws are replaced by fresh ones, at most three times.
pub fn random_subspace<R: RngCore + ?Sized>(
    m: usize,
    r: usize,
    rng: &mut R,
    dist: BasisDistribution,
) -> Result<(DenseMatrix, SubspaceBasis)> {
    check_dims(m, r)?;
    let mut last_err = None;
    for _ in 0..MAX_REDRAWS {
        let mut entries = vec![0.0; m * r];
        match dist {
            BasisDistribution::Normal => fill_standard_normal(rng, &mut entries),
            BasisDistribution::Uniform => entries.iter_mut().for_each(|x| *x = open_unit(rng)),
        }
        let raw = DenseMatrix::from_row_major(m, r, &entries)?;
        match SubspaceBasis::span_of(&raw) {
            Ok(basis) => return Ok((raw, basis)),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one draw"))
}

/// `Vᵢ = U^Ωᵢ + Zᵢ` with `Zᵢ` i.i.d. `N(0, noise_std²)`.
pub fn make_noisy_projections<R: RngCore + ?Sized>(
    u: &DenseMatrix,
    p: &SamplingPattern,
    noise_std: f64,
    rng: &mut R,
) -> Result<ProjectionSet> {
    let mut u_list = Vec::with_capacity(p.len());
    let mut z_list = Vec::with_capacity(p.len());
    for omega in p.omegas() {
        let u_omega = restrict_rows(u, omega)?;
        let mut z = vec![0.0; u_omega.rows() * u_omega.cols()];
        fill_standard_normal(rng, &mut z);
        z.iter_mut().for_each(|x| *x *= noise_std);
        z_list.push(DenseMatrix::from_row_major(
            u_omega.rows(),
            u_omega.cols(),
            &z,
        )?);
        u_list.push(u_omega);
    }
    ProjectionSet::from_parts(p.clone(), u_list, z_list)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternKind {
    Omega1,
    Omega2,
    File(SamplingPattern),
}

impl PatternKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Omega1 => "omega1",
            Self::Omega2 => "omega2",
            Self::File(_) => "file",
        }
    }

    /// Noise substream slot, distinct per kind.
    pub fn slot(&self) -> u64 {
        match self {
            Self::Omega1 => 1,
            Self::Omega2 => 2,
            Self::File(_) => 3,
        }
    }

    pub fn pattern(&self, m: usize, r: usize) -> Result<SamplingPattern> {
        match self {
            Self::Omega1 => gen_omega1(m, r),
            Self::Omega2 => gen_omega2(m, r),
            Self::File(p) if p.m() == m && p.r() == r => Ok(p.clone()),
            Self::File(p) => Err(Error::InvalidConfig {
                field: "pattern",
                message: format!(
                    "file pattern is for m={}, r={}, trial has m={m}, r={r}",
                    p.m(),
                    p.r()
                ),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub m: usize,
    pub r: usize,
    pub pattern: PatternKind,
    pub noise_std: f64,
    pub seed: u64,
    /// Stream key selecting this trial's random draws.
    pub stream: u64,
    pub basis: BasisDistribution,
}

impl TrialConfig {
    pub fn new(m: usize, r: usize, pattern: PatternKind, noise_std: f64, seed: u64) -> Self {
        Self {
            m,
            r,
            pattern,
            noise_std,
            seed,
            stream: 0,
            basis: BasisDistribution::Normal,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.m, self.r)?;
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "noise_std",
                message: format!("must be finite and >= 0, got {}", self.noise_std),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Degenerate,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Degenerate => "degenerate",
        }
    }
}

/// Outcome of one trial; numeric fields are `None` for degenerate trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub m: usize,
    pub r: usize,
    pub pattern: &'static str,
    pub noise_std: f64,
    pub seed: u64,
    pub stream: u64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub sigma_b: Option<f64>,
    pub d_g: Option<f64>,
    pub bound: Option<f64>,
    pub sqrt_r: f64,
    pub status: TrialStatus,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }

    /// Error exceeds the bound (only meaningful for ok trials).
    pub fn violates_bound(&self) -> bool {
        matches!((self.d_g, self.bound), (Some(d), Some(b)) if d > b)
    }

    /// `bound / d_G`, when both are available and the error is nonzero.
    pub fn ratio(&self) -> Option<f64> {
        match (self.bound, self.d_g) {
            (Some(b), Some(d)) if d > 0.0 => Some(b / d),
            _ => None,
        }
    }
}

/// Draws `U`, the noisy projections, runs the estimator and evaluates the bound.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialRecord> {
    cfg.validate()?;
    let pattern = cfg.pattern.pattern(cfg.m, cfg.r)?;
    let mut subspace_rng = stream_rng(cfg.seed, purpose::SUBSPACE, cfg.stream);
    let mut noise_rng = stream_rng(cfg.seed, purpose::NOISE + cfg.pattern.slot(), cfg.stream);

    let mut record = TrialRecord {
        m: cfg.m,
        r: cfg.r,
        pattern: cfg.pattern.label(),
        noise_std: cfg.noise_std,
        seed: cfg.seed,
        stream: cfg.stream,
        epsilon: None,
        delta: None,
        sigma_b: None,
        d_g: None,
        bound: None,
        sqrt_r: (cfg.r as f64).sqrt(),
        status: TrialStatus::Degenerate,
    };

    let (raw, truth) = match random_subspace(cfg.m, cfg.r, &mut subspace_rng, cfg.basis) {
        Ok(x) => x,
        Err(e) if e.is_numerical() => return Ok(record),
        Err(e) => return Err(e),
    };
    let ps = make_noisy_projections(&raw, &pattern, cfg.noise_std, &mut noise_rng)?;
    match bound_report(&ps, Some(&truth), &BoundOptions::default()) {
        Ok((rep, _)) => {
            record.epsilon = rep.epsilon;
            record.delta = Some(rep.delta);
            record.sigma_b = Some(rep.sigma_b);
            record.d_g = rep.d_g;
            record.bound = rep.bound;
            record.status = TrialStatus::Ok;
            Ok(record)
        }
        Err(e) if e.is_numerical() => Ok(record),
        Err(e) => Err(e),
    }
}

/// Draws a noise scale for a noise-sweep trial, log-uniform or uniform on
/// `[lo, hi]`.
pub fn draw_noise_level(seed: u64, stream: u64, lo: f64, hi: f64, log_scale: bool) -> f64 {
    let mut rng = stream_rng(seed, purpose::NOISE_LEVEL, stream);
    let u = rng.random::<f64>();
    if log_scale {
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    } else {
        lo + u * (hi - lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::epsilon_of;

    #[test]
    fn random_subspace_is_deterministic() {
        let a = random_subspace(
            5,
            2,
            &mut ChaCha8Rng::seed_from_u64(42),
            BasisDistribution::Normal,
        )
        .unwrap();
        let b = random_subspace(
            5,
            2,
            &mut ChaCha8Rng::seed_from_u64(42),
            BasisDistribution::Normal,
        )
        .unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn random_subspace_entry_mean_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| {
                random_subspace(5, 2, &mut rng, BasisDistribution::Normal)
                    .unwrap()
                    .0
                    .get(3, 1)
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn hyperplane_and_invalid_dims() {
        let (raw, basis) = random_subspace(
            6,
            5,
            &mut ChaCha8Rng::seed_from_u64(1),
            BasisDistribution::Normal,
        )
        .unwrap();
        assert_eq!((raw.rows(), raw.cols(), basis.dim()), (6, 5, 5));
        assert!(random_subspace(
            3,
            3,
            &mut ChaCha8Rng::seed_from_u64(1),
            BasisDistribution::Normal
        )
        .is_err());
    }

    #[test]
    fn uniform_basis_in_unit_interval() {
        let (raw, _) = random_subspace(
            8,
            3,
            &mut ChaCha8Rng::seed_from_u64(3),
            BasisDistribution::Uniform,
        )
        .unwrap();
        assert!(raw.to_row_major().iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn zero_noise_projections_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (u, _) = random_subspace(10, 7, &mut rng, BasisDistribution::Normal).unwrap();
        let p = gen_omega1(10, 7).unwrap();
        let ps = make_noisy_projections(&u, &p, 0.0, &mut rng).unwrap();
        assert_eq!(ps.v_list(), ps.u_list().unwrap());
        assert_eq!(epsilon_of(ps.z_list().unwrap()).unwrap(), 0.0);
        assert!(ps.is_consistent());
    }

    #[test]
    fn projections_are_bit_identical_per_seed() {
        let p = gen_omega2(10, 7).unwrap();
        let make = || {
            let mut rng = stream_rng(11, purpose::NOISE, 4);
            let (u, _) = random_subspace(10, 7, &mut rng, BasisDistribution::Normal).unwrap();
            make_noisy_projections(&u, &p, 1e-3, &mut rng).unwrap()
        };
        let (a, b) = (make(), make());
        for (x, y) in a.v_list().iter().zip(b.v_list()) {
            let bits = |m: &DenseMatrix| {
                m.to_row_major()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(x), bits(y));
        }
    }

    #[test]
    fn small_noise_gives_small_epsilon() {
        let p = gen_omega1(10, 7).unwrap();
        let mut hits = 0;
        for s in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (u, _) = random_subspace(10, 7, &mut rng, BasisDistribution::Normal).unwrap();
            let ps = make_noisy_projections(&u, &p, 1e-5, &mut rng).unwrap();
            let eps = epsilon_of(ps.z_list().unwrap()).unwrap();
            if eps > 0.0 && eps < 1e-3 {
                hits += 1;
            }
        }
        assert_eq!(hits, 200);
    }

    #[test]
    fn zero_noise_trial_is_exact() {
        let cfg = TrialConfig::new(10, 7, PatternKind::Omega2, 0.0, 3);
        let rec = run_trial(&cfg).unwrap();
        assert!(rec.is_ok());
        assert!(rec.d_g.unwrap() <= 1e-8);
        assert_eq!(rec.bound, Some(0.0));
    }

    #[test]
    fn noisy_trial_respects_bound_and_is_repeatable() {
        let cfg = TrialConfig::new(10, 7, PatternKind::Omega1, 1e-5, 1234).with_stream(9);
        let a = run_trial(&cfg).unwrap();
        let b = run_trial(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.is_ok());
        assert!(a.d_g.unwrap() <= a.bound.unwrap());
        assert!(a.d_g.unwrap() <= a.sqrt_r);
    }

    #[test]
    fn patterns_share_the_subspace_draw() {
        let mut r1 = stream_rng(5, purpose::SUBSPACE, 2);
        let mut r2 = stream_rng(5, purpose::SUBSPACE, 2);
        assert_eq!(r1.next_u64(), r2.next_u64());
        let mut n1 = stream_rng(5, purpose::NOISE + 1, 2);
        let mut n2 = stream_rng(5, purpose::NOISE + 2, 2);
        assert_ne!(n1.next_u64(), n2.next_u64());
        let mut s3 = stream_rng(5, purpose::SUBSPACE, 3);
        assert_ne!(
            stream_rng(5, purpose::SUBSPACE, 2).next_u64(),
            s3.next_u64()
        );
    }

    #[test]
    fn noise_level_range() {
        for s in 0..500 {
            let x = draw_noise_level(1, s, 1e-8, 1e-2, true);
            assert!((1e-8..=1e-2).contains(&x));
            let y = draw_noise_level(1, s, 1e-8, 1e-2, false);
            assert!((1e-8..=1e-2).contains(&y));
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = TrialConfig::new(10, 7, PatternKind::Omega1, -1.0, 0);
        assert!(matches!(
            run_trial(&cfg),
            Err(Error::InvalidConfig {
                field: "noise_std",
                ..
            })
        ));
        let cfg = TrialConfig::new(7, 7, PatternKind::Omega1, 0.0, 0);
        assert!(run_trial(&cfg).is_err());
    }
}
