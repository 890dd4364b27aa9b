//! Sampling patterns `{Ω_i}` and their identifiability conditions.
//!
//! Coordinates are 0-based everywhere. A pattern with `N` projections over
//! `m` coordinates is identifiable for an `r`-dimensional subspace when
//!
//! * C1: every `|Ω_i| = r + 1`,
//! * C2: `N = m − r`,
//! * C3: every nonempty subset of `ℓ` projections covers at least `ℓ + r`
//!   coordinates.
//!
//! C3 is checked either by exhaustive subset enumeration or by the rank of
//! the noiseless normal matrix of a random (generic) subspace.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{build_normal_matrix, NormalSource, ProjectionSet};
use crate::linalg::singular_spectrum;
use crate::synth::{random_subspace, BasisDistribution};

/// Largest `N` for which [`ValidationMode::Auto`] enumerates subsets.
pub const BRUTE_FORCE_MAX_PROJECTIONS: usize = 22;

/// Independent generic subspaces drawn by the rank-based C3 check.
pub const DEFAULT_GENERIC_TRIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPattern")]
pub struct SamplingPattern {
    m: usize,
    r: usize,
    omegas: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawPattern {
    m: usize,
    r: usize,
    omegas: Vec<Vec<usize>>,
}

impl TryFrom<RawPattern> for SamplingPattern {
    type Error = Error;

    fn try_from(raw: RawPattern) -> Result<Self> {
        SamplingPattern::new(raw.m, raw.r, raw.omegas)
    }
}

impl SamplingPattern {
    /// Each set must be strictly increasing and inside `[0, m)`.
    pub fn new(m: usize, r: usize, omegas: Vec<Vec<usize>>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidPattern("pattern has no projections".into()));
        }
        if r == 0 || r >= m {
            return Err(Error::InvalidDimensions { m, r });
        }
        for (i, omega) in omegas.iter().enumerate() {
            if omega.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidPattern(format!(
                    "projection {i} is not sorted and duplicate-free: {omega:?}"
                )));
            }
            if let Some(&bad) = omega.iter().find(|&&k| k >= m) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    bound: m,
                });
            }
        }
        Ok(Self { m, r, omegas })
    }

    /// Converts 1-based coordinate sets, as written in the literature.
    pub fn from_one_based(m: usize, r: usize, omegas: &[&[usize]]) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(omegas.len());
        for omega in omegas {
            let mut set = Vec::with_capacity(omega.len());
            for &k in omega.iter() {
                if k == 0 {
                    return Err(Error::InvalidPattern("1-based index 0".into()));
                }
                set.push(k - 1);
            }
            zero_based.push(set);
        }
        Self::new(m, r, zero_based)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omegas(&self) -> &[Vec<usize>] {
        &self.omegas
    }

    pub fn omega(&self, i: usize) -> &[usize] {
        &self.omegas[i]
    }

    /// The `m × N` 0/1 indicator matrix; column `i` marks `Ω_i`.
    pub fn indicator(&self) -> Vec<Vec<u8>> {
        let mut out = vec![vec![0u8; self.len()]; self.m];
        for (i, omega) in self.omegas.iter().enumerate() {
            for &k in omega {
                out[k][i] = 1;
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pattern serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_dims(m: usize, r: usize) -> Result<()> {
    if r == 0 || r >= m {
        Err(Error::InvalidDimensions { m, r })
    } else {
        Ok(())
    }
}

/// Ones block over the first `r` coordinates stacked on an identity:
/// column `i` is `{0, …, r−1} ∪ {r + i}`.
pub fn gen_omega1(m: usize, r: usize) -> Result<SamplingPattern> {
    check_dims(m, r)?;
    let omegas = (0..m - r)
        .map(|i| (0..r).chain(std::iter::once(r + i)).collect())
        .collect();
    SamplingPattern::new(m, r, omegas)
}

/// Staircase band: column `i` is `{i, …, i + r}`.
pub fn gen_omega2(m: usize, r: usize) -> Result<SamplingPattern> {
    check_dims(m, r)?;
    let omegas = (0..m - r).map(|i| (i..=i + r).collect()).collect();
    SamplingPattern::new(m, r, omegas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C3Method {
    BruteForce,
    GenericRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    /// Brute force up to [`BRUTE_FORCE_MAX_PROJECTIONS`] projections.
    #[default]
    Auto,
    Brute,
    Generic,
}

impl std::str::FromStr for ValidationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "brute" => Ok(Self::Brute),
            "generic" => Ok(Self::Generic),
            other => Err(Error::Parse(format!("unknown validation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub c1_ok: bool,
    pub c2_ok: bool,
    pub c3_ok: bool,
    pub c3_method: C3Method,
    /// Lexicographically smallest violating subset, brute force only.
    pub violating_subset: Option<Vec<usize>>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.c1_ok && self.c2_ok && self.c3_ok
    }
}

pub fn validate(p: &SamplingPattern, mode: ValidationMode, rng_seed: u64) -> ValidationReport {
    let r = p.r();
    let c1_ok = p.omegas().iter().all(|o| o.len() == r + 1);
    let c2_ok = p.len() == p.m() - r;
    let use_brute = match mode {
        ValidationMode::Brute => true,
        ValidationMode::Auto => p.len() <= BRUTE_FORCE_MAX_PROJECTIONS,
        // The rank certificate assumes hyperplane projections.
        ValidationMode::Generic => !c1_ok && p.len() <= BRUTE_FORCE_MAX_PROJECTIONS,
    };
    if use_brute {
        let violating_subset = c3_brute_force(p);
        ValidationReport {
            c1_ok,
            c2_ok,
            c3_ok: violating_subset.is_none(),
            c3_method: C3Method::BruteForce,
            violating_subset,
        }
    } else {
        let c3_ok = c1_ok && c3_generic_rank(p, rng_seed, DEFAULT_GENERIC_TRIALS).unwrap_or(false);
        ValidationReport {
            c1_ok,
            c2_ok,
            c3_ok,
            c3_method: C3Method::GenericRank,
            violating_subset: None,
        }
    }
}

/// Fixed-width coordinate set used by the subset enumeration.
#[derive(Clone)]
struct CoordSet(Vec<u64>);

impl CoordSet {
    fn new(m: usize) -> Self {
        Self(vec![0; m.div_ceil(64)])
    }

    fn from_indices(m: usize, idx: &[usize]) -> Self {
        let mut s = Self::new(m);
        for &k in idx {
            s.0[k / 64] |= 1 << (k % 64);
        }
        s
    }

    fn union_into(&self, other: &Self, out: &mut Self) {
        for ((o, a), b) in out.0.iter_mut().zip(&self.0).zip(&other.0) {
            *o = a | b;
        }
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Enumerates every nonempty subset of projections in lexicographic order of
/// their sorted index lists and returns the first one covering fewer than
/// `|S| + r` coordinates.
pub fn c3_brute_force(p: &SamplingPattern) -> Option<Vec<usize>> {
    let n = p.len();
    let sets: Vec<CoordSet> = p
        .omegas()
        .iter()
        .map(|o| CoordSet::from_indices(p.m(), o))
        .collect();
    // unions[d] is the coverage of the first d+1 chosen projections.
    let mut unions: Vec<CoordSet> = vec![CoordSet::new(p.m()); n + 1];
    let mut chosen: Vec<usize> = Vec::with_capacity(n);

    fn dfs(
        start: usize,
        sets: &[CoordSet],
        unions: &mut [CoordSet],
        chosen: &mut Vec<usize>,
        r: usize,
    ) -> bool {
        for i in start..sets.len() {
            let depth = chosen.len();
            let (lo, hi) = unions.split_at_mut(depth + 1);
            lo[depth].union_into(&sets[i], &mut hi[0]);
            chosen.push(i);
            if hi[0].count() < chosen.len() + r {
                return true;
            }
            if dfs(i + 1, sets, unions, chosen, r) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    if dfs(0, &sets, &mut unions, &mut chosen, p.r()) {
        Some(chosen)
    } else {
        None
    }
}

/// Rank certificate for C3: for a generic subspace the noiseless normal matrix
/// has full column rank `N` exactly when every subset of projections covers
/// enough coordinates. Returns true iff all `trials` random draws give rank `N`.
pub fn c3_generic_rank(p: &SamplingPattern, rng_seed: u64, trials: usize) -> Result<bool> {
    let r = p.r();
    if let Some((i, o)) = p
        .omegas()
        .iter()
        .enumerate()
        .find(|(_, o)| o.len() != r + 1)
    {
        return Err(Error::InvalidPattern(format!(
            "projection {i} has {} coordinates, the rank check needs {}",
            o.len(),
            r + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..trials.max(1) {
        let rank = generic_normal_rank(p, &mut rng)?;
        if rank < p.len() {
            return Ok(false);
        }
    }
    Ok(true)
}

const GENERIC_REDRAWS: usize = 3;

fn generic_normal_rank(p: &SamplingPattern, rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut last_err = None;
    for _ in 0..GENERIC_REDRAWS {
        let (raw, _) = random_subspace(p.m(), p.r(), rng, BasisDistribution::Normal)?;
        let ps = ProjectionSet::noiseless(p.clone(), &raw)?;
        match build_normal_matrix(&ps, NormalSource::Observed) {
            Ok(a) => return Ok(singular_spectrum(a.as_dense()).numerical_rank()),
            Err(e) if e.is_numerical() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one draw"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapStats {
    pub max_overlap: usize,
    pub min_overlap: usize,
    pub mean_overlap: f64,
    pub disjoint_pairs: usize,
}

/// Pairwise `|Ω_i ∩ Ω_j|` statistics over all `i < j`.
pub fn overlap_stats(p: &SamplingPattern) -> Result<OverlapStats> {
    let n = p.len();
    if n < 2 {
        return Err(Error::TooFewProjections(n));
    }
    let (mut max, mut min, mut sum, mut disjoint, mut pairs) = (0, usize::MAX, 0usize, 0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let k = intersection_len(p.omega(i), p.omega(j));
            max = max.max(k);
            min = min.min(k);
            sum += k;
            pairs += 1;
            if k == 0 {
                disjoint += 1;
            }
        }
    }
    Ok(OverlapStats {
        max_overlap: max,
        min_overlap: min,
        mean_overlap: sum as f64 / pairs as f64,
        disjoint_pairs: disjoint,
    })
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}
