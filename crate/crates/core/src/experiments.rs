//! Monte-Carlo sweeps over noise level, ambient dimension and subspace
//! dimension, with CSV output.
//!
//! Trials run on a rayon pool but rows are always emitted in
//! (grid point, pattern, trial) order, so a fixed seed gives byte-identical
//! output regardless of thread count.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::synth::{
    draw_noise_level, run_trial, BasisDistribution, PatternKind, TrialConfig, TrialRecord,
};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "SUBSPACE_PERTURB_THREADS";

pub const CSV_HEADER: [&str; 14] = [
    "experiment",
    "pattern",
    "m",
    "r",
    "noise_std",
    "trial",
    "seed",
    "epsilon",
    "delta",
    "sigma_B",
    "error_dG",
    "bound",
    "sqrt_r",
    "status",
];

pub const AGG_HEADER: [&str; 16] = [
    "experiment",
    "pattern",
    "m",
    "r",
    "noise_std",
    "n_ok",
    "n_degenerate",
    "mean_error",
    "median_error",
    "mean_bound",
    "median_bound",
    "mean_ratio",
    "median_ratio",
    "min_ratio",
    "mean_sigma_B",
    "median_sigma_B",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Noise,
    Ambient,
    Subspace,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Noise => "noise",
            Self::Ambient => "ambient",
            Self::Subspace => "subspace",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(Self::Noise),
            "ambient" => Ok(Self::Ambient),
            "subspace" => Ok(Self::Subspace),
            other => Err(Error::Parse(format!("unknown sweep kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "log" => Ok(Self::Log),
            other => Err(Error::Parse(format!("unknown scale {other:?}"))),
        }
    }
}

/// Integer grid over `m` (ambient sweep) or `r` (subspace sweep).
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Range {
        start: usize,
        stop: usize,
        points: usize,
        scale: Scale,
    },
    Values(Vec<usize>),
}

impl Grid {
    pub fn linear(start: usize, stop: usize, points: usize) -> Self {
        Self::Range {
            start,
            stop,
            points,
            scale: Scale::Linear,
        }
    }

    /// Grid points, rounded to the nearest integer; endpoints are exact.
    pub fn values(&self) -> Vec<usize> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Range {
                start, points: 0, ..
            } => {
                let _ = start;
                Vec::new()
            }
            Self::Range {
                start, points: 1, ..
            } => vec![*start],
            Self::Range {
                start,
                stop,
                points,
                scale,
            } => {
                let (a, b) = (*start as f64, *stop as f64);
                let n = (*points - 1) as f64;
                (0..*points)
                    .map(|k| {
                        let t = k as f64 / n;
                        let x = match scale {
                            Scale::Linear => a + t * (b - a),
                            Scale::Log => (a.ln() + t * (b.ln() - a.ln())).exp(),
                        };
                        x.round() as usize
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRange {
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
}

impl Default for NoiseRange {
    fn default() -> Self {
        Self {
            lo: 1e-8,
            hi: 1e-2,
            scale: Scale::Log,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Fixed ambient dimension (noise and subspace sweeps).
    pub m: usize,
    /// Fixed subspace dimension (noise and ambient sweeps).
    pub r: usize,
    /// Fixed noise scale (ambient and subspace sweeps).
    pub noise_std: f64,
    /// Noise-scale distribution (noise sweep).
    pub noise_range: NoiseRange,
    /// Values of `m` (ambient) or `r` (subspace); unused by the noise sweep.
    pub grid: Grid,
    pub trials_per_point: usize,
    pub patterns: Vec<PatternKind>,
    pub base_seed: u64,
    pub basis: BasisDistribution,
}

impl SweepSpec {
    pub fn noise_default() -> Self {
        Self {
            kind: SweepKind::Noise,
            m: 10,
            r: 7,
            noise_std: 0.0,
            noise_range: NoiseRange::default(),
            grid: Grid::Values(vec![10]),
            trials_per_point: 1000,
            patterns: vec![PatternKind::Omega1, PatternKind::Omega2],
            base_seed: 0,
            basis: BasisDistribution::Normal,
        }
    }

    pub fn ambient_default() -> Self {
        Self {
            kind: SweepKind::Ambient,
            m: 0,
            r: 7,
            noise_std: 1e-5,
            grid: Grid::linear(10, 200, 20),
            trials_per_point: 100,
            ..Self::noise_default()
        }
    }

    pub fn subspace_default() -> Self {
        Self {
            kind: SweepKind::Subspace,
            m: 50,
            r: 0,
            noise_std: 1e-5,
            grid: Grid::linear(3, 47, 23),
            trials_per_point: 100,
            ..Self::noise_default()
        }
    }

    pub fn default_for(kind: SweepKind) -> Self {
        match kind {
            SweepKind::Noise => Self::noise_default(),
            SweepKind::Ambient => Self::ambient_default(),
            SweepKind::Subspace => Self::subspace_default(),
        }
    }

    /// The `(m, r)` of every grid point.
    pub fn points(&self) -> Vec<(usize, usize)> {
        match self.kind {
            SweepKind::Noise => vec![(self.m, self.r)],
            SweepKind::Ambient => self
                .grid
                .values()
                .into_iter()
                .map(|m| (m, self.r))
                .collect(),
            SweepKind::Subspace => self
                .grid
                .values()
                .into_iter()
                .map(|r| (self.m, r))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field, message: String| Err(Error::InvalidConfig { field, message });
        if self.trials_per_point == 0 {
            return invalid("trials", "need at least one trial per point".into());
        }
        if self.patterns.is_empty() {
            return invalid("patterns", "need at least one sampling pattern".into());
        }
        let points = self.points();
        if points.is_empty() {
            return invalid("grid", "grid is empty".into());
        }
        for (m, r) in points {
            if r == 0 || r >= m {
                let field = match self.kind {
                    SweepKind::Noise => "r",
                    SweepKind::Ambient => "grid",
                    SweepKind::Subspace => "grid",
                };
                return invalid(
                    field,
                    format!("grid point m={m}, r={r} violates 1 <= r < m"),
                );
            }
            for p in &self.patterns {
                if let PatternKind::File(pat) = p {
                    if pat.m() != m || pat.r() != r {
                        return invalid(
                            "pattern",
                            format!("file pattern is for m={}, r={}", pat.m(), pat.r()),
                        );
                    }
                }
            }
        }
        match self.kind {
            SweepKind::Noise => {
                let NoiseRange { lo, hi, scale } = self.noise_range;
                let lo_ok = if scale == Scale::Log {
                    lo > 0.0
                } else {
                    lo >= 0.0
                };
                if !(lo_ok && hi >= lo && hi.is_finite()) {
                    return invalid(
                        "noise_range",
                        format!("invalid range [{lo}, {hi}] for {scale:?} scale"),
                    );
                }
            }
            _ => {
                if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
                    return invalid(
                        "noise_std",
                        format!("must be finite and >= 0, got {}", self.noise_std),
                    );
                }
            }
        }
        if self.trials_per_point > u32::MAX as usize {
            return invalid("trials", "too many trials per point".into());
        }
        Ok(())
    }
}

/// One raw output row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub experiment: SweepKind,
    pub trial: usize,
    pub record: TrialRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub experiment: SweepKind,
    pub pattern: &'static str,
    pub m: usize,
    pub r: usize,
    /// Fixed noise scale; `None` for the noise sweep.
    pub noise_std: Option<f64>,
    pub n_ok: usize,
    pub n_degenerate: usize,
    pub mean_error: Option<f64>,
    pub median_error: Option<f64>,
    pub mean_bound: Option<f64>,
    pub median_bound: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub mean_sigma_b: Option<f64>,
    pub median_sigma_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn ok_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.record.is_ok())
    }

    pub fn degenerate_count(&self) -> usize {
        self.rows.len() - self.ok_rows().count()
    }

    pub fn violations(&self) -> usize {
        self.ok_rows().filter(|r| r.record.violates_bound()).count()
    }

    pub fn aggregate(&self, pattern: &str, m: usize, r: usize) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.pattern == pattern && a.m == m && a.r == r)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows_csv(&self.rows, w)
    }

    pub fn write_agg_csv<W: Write>(&self, w: W) -> Result<()> {
        write_agg_csv(&self.aggregates, w)
    }

    /// Writes raw rows to `path` and aggregates to the sibling `*_agg.csv`.
    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        let agg = agg_path(path);
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        self.write_agg_csv(std::io::BufWriter::new(std::fs::File::create(&agg)?))?;
        Ok(agg)
    }
}

/// `dir/name.csv` → `dir/name_agg.csv`.
pub fn agg_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    let ext = path
        .extension()
        .map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_agg.{ext}"))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v}"))
}

pub fn write_rows_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        let rec = &row.record;
        out.write_record([
            row.experiment.as_str().to_string(),
            rec.pattern.to_string(),
            rec.m.to_string(),
            rec.r.to_string(),
            format!("{}", rec.noise_std),
            row.trial.to_string(),
            rec.seed.to_string(),
            opt(rec.epsilon),
            opt(rec.delta),
            opt(rec.sigma_b),
            opt(rec.d_g),
            opt(rec.bound),
            format!("{}", rec.sqrt_r),
            rec.status.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_agg_csv<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(AGG_HEADER)?;
    for a in rows {
        out.write_record([
            a.experiment.as_str().to_string(),
            a.pattern.to_string(),
            a.m.to_string(),
            a.r.to_string(),
            opt(a.noise_std),
            a.n_ok.to_string(),
            a.n_degenerate.to_string(),
            opt(a.mean_error),
            opt(a.median_error),
            opt(a.mean_bound),
            opt(a.median_bound),
            opt(a.mean_ratio),
            opt(a.median_ratio),
            opt(a.min_ratio),
            opt(a.mean_sigma_b),
            opt(a.median_sigma_b),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the worker cap from [`THREADS_ENV`].
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Stream key of trial `trial` at grid point `point`.
pub fn stream_key(point: usize, trial: usize) -> u64 {
    ((point as u64) << 32) | trial as u64
}

struct Job {
    point: usize,
    trial: usize,
    cfg: TrialConfig,
}

fn jobs(spec: &SweepSpec) -> Vec<Job> {
    let mut out = Vec::new();
    for (point, (m, r)) in spec.points().into_iter().enumerate() {
        for pattern in &spec.patterns {
            for trial in 0..spec.trials_per_point {
                let stream = stream_key(point, trial);
                let noise_std = match spec.kind {
                    SweepKind::Noise => {
                        let NoiseRange { lo, hi, scale } = spec.noise_range;
                        draw_noise_level(spec.base_seed, stream, lo, hi, scale == Scale::Log)
                    }
                    _ => spec.noise_std,
                };
                let mut cfg = TrialConfig::new(m, r, pattern.clone(), noise_std, spec.base_seed)
                    .with_stream(stream);
                cfg.basis = spec.basis;
                out.push(Job { point, trial, cfg });
            }
        }
    }
    out
}

/// Runs every trial of the sweep; `threads` caps the worker pool.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let jobs = jobs(spec);
    let run = || -> Result<Vec<(usize, SweepRow)>> {
        jobs.par_iter()
            .map(|job| {
                run_trial(&job.cfg).map(|record| {
                    (
                        job.point,
                        SweepRow {
                            experiment: spec.kind,
                            trial: job.trial,
                            record,
                        },
                    )
                })
            })
            .collect()
    };
    let indexed = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig {
                field: "threads",
                message: e.to_string(),
            })?
            .install(run)?,
        None => run()?,
    };
    let aggregates = aggregate(spec, &indexed);
    Ok(SweepResult {
        spec: spec.clone(),
        rows: indexed.into_iter().map(|(_, row)| row).collect(),
        aggregates,
    })
}

fn check_kind(spec: &SweepSpec, kind: SweepKind) -> Result<()> {
    if spec.kind == kind {
        Ok(())
    } else {
        Err(Error::InvalidConfig {
            field: "kind",
            message: format!(
                "expected a {} sweep, got {}",
                kind.as_str(),
                spec.kind.as_str()
            ),
        })
    }
}

pub fn sweep_noise(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepResult> {
    check_kind(spec, SweepKind::Noise)?;
    run_sweep(spec, threads)
}

pub fn sweep_ambient(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepResult> {
    check_kind(spec, SweepKind::Ambient)?;
    run_sweep(spec, threads)
}

pub fn sweep_subspace(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepResult> {
    check_kind(spec, SweepKind::Subspace)?;
    run_sweep(spec, threads)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn aggregate(spec: &SweepSpec, rows: &[(usize, SweepRow)]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for (point, (m, r)) in spec.points().into_iter().enumerate() {
        for pattern in &spec.patterns {
            let group: Vec<&TrialRecord> = rows
                .iter()
                .filter(|(p, row)| *p == point && row.record.pattern == pattern.label())
                .map(|(_, row)| &row.record)
                .collect();
            let ok: Vec<&TrialRecord> = group.iter().copied().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            let errors = col(|r| r.d_g);
            let bounds = col(|r| r.bound);
            let ratios = col(TrialRecord::ratio);
            let sigmas = col(|r| r.sigma_b);
            out.push(AggregateRow {
                experiment: spec.kind,
                pattern: pattern.label(),
                m,
                r,
                noise_std: (spec.kind != SweepKind::Noise).then_some(spec.noise_std),
                n_ok: ok.len(),
                n_degenerate: group.len() - ok.len(),
                mean_error: mean(&errors),
                median_error: median(&errors),
                mean_bound: mean(&bounds),
                median_bound: median(&bounds),
                mean_ratio: mean(&ratios),
                median_ratio: median(&ratios),
                min_ratio: ratios.iter().copied().reduce(f64::min),
                mean_sigma_b: mean(&sigmas),
                median_sigma_b: median(&sigmas),
            });
        }
    }
    out
}
