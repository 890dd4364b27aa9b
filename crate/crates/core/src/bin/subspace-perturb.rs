use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use subspace_perturb::bounds::{bound_report, BoundOptions};
use subspace_perturb::error::Error;
use subspace_perturb::estimator::{build_normal_matrix, estimate, NormalSource, ProjectionSet};
use subspace_perturb::experiments::{
    self, threads_from_env, Grid, NoiseRange, Scale, SweepKind, SweepSpec,
};
use subspace_perturb::golden;
use subspace_perturb::io;
use subspace_perturb::linalg::SubspaceBasis;
use subspace_perturb::sampling::{gen_omega1, gen_omega2, validate, ValidationMode};
use subspace_perturb::synth::{BasisDistribution, PatternKind};

#[derive(Parser)]
#[command(
    name = "subspace-perturb",
    version,
    about = "Subspace estimation from noisy canonical projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a generated sampling pattern as JSON.
    GenPattern {
        #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=2))]
        kind: u8,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the identifiability conditions of a pattern.
    Validate {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate the subspace from projection bases `V_<i>.csv`.
    Estimate {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        projections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the perturbation bound.
    Bound(BoundArgs),
    /// Run a Monte-Carlo sweep.
    Sweep {
        #[arg(value_enum)]
        kind: KindArg,
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Recompute both worked examples.
    Golden,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long)]
    projections: PathBuf,
    /// Full m×r ground-truth basis, for the chordal error.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory of noise matrices `Z_<i>.csv`; defaults to the projections
    /// directory when it contains them.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Emit a single JSON object (the default output is key=value lines).
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of omega1, omega2.
    #[arg(long, value_delimiter = ',', value_enum)]
    patterns: Option<Vec<PatternArg>>,
    /// Grid as `start:stop:points`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Linear)]
    grid_scale: ScaleArg,
    #[arg(long)]
    noise_min: Option<f64>,
    #[arg(long)]
    noise_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Log)]
    noise_scale: ScaleArg,
    #[arg(long, value_enum, default_value_t = BasisArg::Normal)]
    basis: BasisArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Brute,
    Generic,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Noise,
    Ambient,
    Subspace,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Omega1,
    Omega2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Normal,
    Uniform,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Linear => Scale::Linear,
            ScaleArg::Log => Scale::Log,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let numerical = e.downcast_ref::<Error>().is_some_and(Error::is_numerical);
            if numerical {
                let err = e.downcast_ref::<Error>().expect("checked above");
                eprintln!(
                    "{}",
                    json!({ "error": format!("{err:?}"), "message": err.to_string() })
                );
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::GenPattern { kind, m, r, out } => {
            let p = if kind == 1 {
                gen_omega1(m, r)?
            } else {
                gen_omega2(m, r)?
            };
            match out {
                Some(path) => std::fs::write(&path, p.to_json() + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{}", p.to_json()),
            }
        }
        Command::Validate {
            pattern,
            mode,
            seed,
        } => {
            let p = load_pattern(&pattern)?;
            let mode = match mode {
                ModeArg::Auto => ValidationMode::Auto,
                ModeArg::Brute => ValidationMode::Brute,
                ModeArg::Generic => ValidationMode::Generic,
            };
            let report = validate(&p, mode, seed);
            let mut value = serde_json::to_value(&report)?;
            value["all_ok"] = json!(report.all_ok());
            println!("{value}");
        }
        Command::Estimate {
            pattern,
            projections,
            out,
        } => {
            let p = load_pattern(&pattern)?;
            let v = io::load_projection_dir(&projections, "V", p.len())
                .with_context(|| format!("reading projections from {}", projections.display()))?;
            let ps = ProjectionSet::new(p, v)?;
            let est = estimate(&build_normal_matrix(&ps, NormalSource::Observed)?)?;
            io::save_matrix(&est.basis.to_dense(), &out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Bound(args) => bound(args)?,
        Command::Sweep { kind, args } => sweep(kind, args)?,
        Command::Golden => {
            let rep = golden::run_golden()?;
            let within = |x: Option<f64>, target: f64, tol: f64| {
                x.is_some_and(|x| (x - target).abs() <= tol)
            };
            let e1 = &rep.example1;
            let e2 = &rep.example2;
            let checks = json!({
                "example1_exact": e1.d_g.is_some_and(|d| d <= 1e-9) && e1.bound == Some(0.0),
                "example2_sigma_B": within(Some(e2.sigma_b), golden::PUBLISHED_SIGMA_B, 0.01),
                "example2_d_G": within(e2.d_g, golden::PUBLISHED_D_G, 0.01),
                "example2_bound_holds": e2.bound_holds() == Some(true),
            });
            let mut value = serde_json::to_value(&rep)?;
            value["checks"] = checks;
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(())
}

fn load_pattern(path: &Path) -> anyhow::Result<subspace_perturb::SamplingPattern> {
    io::load_pattern(path).with_context(|| format!("reading pattern {}", path.display()))
}

fn bound(args: BoundArgs) -> anyhow::Result<()> {
    let p = load_pattern(&args.pattern)?;
    let n = p.len();
    let v = io::load_projection_dir(&args.projections, "V", n)
        .with_context(|| format!("reading projections from {}", args.projections.display()))?;
    let mut ps = ProjectionSet::new(p, v)?;
    let noise = match &args.noise {
        Some(dir) => Some(io::load_projection_dir(dir, "Z", n)?),
        None => io::load_optional_projection_dir(&args.projections, "Z", n)?,
    };
    if let Some(z) = noise {
        ps = ps.with_noise(z)?;
    }
    let truth = match &args.truth {
        Some(path) => Some(SubspaceBasis::span_of(&io::load_matrix(path)?)?),
        None => None,
    };
    let opts = BoundOptions {
        epsilon_override: args.epsilon,
        delta_override: args.delta,
        require_epsilon: false,
    };
    let (rep, _) = bound_report(&ps, truth.as_ref(), &opts)?;
    if args.json {
        let value = json!({
            "epsilon": rep.epsilon,
            "delta": rep.delta,
            "sigma_B": rep.sigma_b,
            "bound": rep.bound,
            "sqrt_r": rep.sqrt_r,
            "d_G": rep.d_g,
        });
        println!("{value}");
    } else {
        let fmt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| v.to_string());
        println!("epsilon={}", fmt(rep.epsilon));
        println!("delta={}", rep.delta);
        println!("sigma_B={}", rep.sigma_b);
        println!("bound={}", fmt(rep.bound));
        println!("bound_per_unit_epsilon={}", rep.bound_per_unit_epsilon);
        println!("sqrt_r={}", rep.sqrt_r);
        println!("d_G={}", fmt(rep.d_g));
    }
    Ok(())
}

fn parse_grid(s: &str, scale: Scale) -> anyhow::Result<Grid> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, points] = parts.as_slice() else {
        bail!("--grid must be start:stop:points, got {s:?}");
    };
    let parse = |x: &str| -> anyhow::Result<usize> {
        x.trim()
            .parse()
            .with_context(|| format!("--grid: {x:?} is not a nonnegative integer"))
    };
    Ok(Grid::Range {
        start: parse(start)?,
        stop: parse(stop)?,
        points: parse(points)?,
        scale,
    })
}

fn sweep(kind: KindArg, a: SweepArgs) -> anyhow::Result<()> {
    let kind = match kind {
        KindArg::Noise => SweepKind::Noise,
        KindArg::Ambient => SweepKind::Ambient,
        KindArg::Subspace => SweepKind::Subspace,
    };
    let mut spec = SweepSpec::default_for(kind);
    if let Some(m) = a.m {
        spec.m = m;
    }
    if let Some(r) = a.r {
        spec.r = r;
    }
    if let Some(s) = a.noise_std {
        spec.noise_std = s;
    }
    if let Some(t) = a.trials {
        spec.trials_per_point = t;
    }
    if let Some(g) = &a.grid {
        spec.grid = parse_grid(g, a.grid_scale.into())?;
    }
    if let Some(ps) = &a.patterns {
        spec.patterns = ps
            .iter()
            .map(|p| match p {
                PatternArg::Omega1 => PatternKind::Omega1,
                PatternArg::Omega2 => PatternKind::Omega2,
            })
            .collect();
    }
    let defaults = NoiseRange::default();
    spec.noise_range = NoiseRange {
        lo: a.noise_min.unwrap_or(defaults.lo),
        hi: a.noise_max.unwrap_or(defaults.hi),
        scale: a.noise_scale.into(),
    };
    spec.base_seed = a.seed;
    spec.basis = match a.basis {
        BasisArg::Normal => BasisDistribution::Normal,
        BasisArg::Uniform => BasisDistribution::Uniform,
    };

    let result = experiments::run_sweep(&spec, threads_from_env())?;
    let agg = result
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "{} rows ({} degenerate, {} bound violations) -> {}, aggregates -> {}",
        result.rows.len(),
        result.degenerate_count(),
        result.violations(),
        a.out.display(),
        agg.display()
    );
    Ok(())
}
