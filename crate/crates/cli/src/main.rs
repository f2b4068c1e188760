//! `ampsynth`: synthesize a potential for a target far-field pattern, run
//! forward scattering solves and print verification reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampsynth::config::RunConfig;
use ampsynth::forward::{scattering_amplitude, solve_scattering};
use ampsynth::grids::{BallGrid, ComplexField, SphereGrid};
use ampsynth::harmonics::HarmonicCoeffs;
use ampsynth::io::{self, PatternInput};
use ampsynth::report::{format_f64, KeyValues};
use ampsynth::specfun::HarmonicIndex;
use ampsynth::synthesis::{synthesize, SynthesisParams, Target};
use ampsynth::verify::{lemma1_csv, lemma1_study, roundtrip, smallness_probe};
use ampsynth::{Error, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

#[derive(Parser)]
#[command(name = "ampsynth", version, about = "Potential synthesis for prescribed scattering amplitudes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build q for a target pattern and write it as a field file.
    Synthesize {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Shrink the pattern until the denominator check passes.
        #[arg(long)]
        autoscale: bool,
    },
    /// Solve the scattering problem for a potential and write its amplitude.
    Forward {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize, scatter and compare with the target. Exit status 1 if epsilon is missed.
    Verify {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        autoscale: bool,
    },
    /// Convergence studies written as CSV.
    Study {
        #[command(subcommand)]
        kind: Study,
    },
    /// Write a target pattern in coefficient form.
    Pattern {
        #[command(subcommand)]
        kind: PatternKind,
    },
}

#[derive(Subcommand)]
enum Study {
    /// Density residual against truncation degree.
    Lemma1 {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        degrees: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `v(c)/c` against `||h||^2` for `q = c conj(h) e^{-ik alpha.x}`.
    Smallness {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Field file with h; a smooth default profile is used otherwise.
        #[arg(long)]
        density: Option<PathBuf>,
        /// L2 norm the default profile is scaled to.
        #[arg(long, default_value_t = 0.1)]
        h_norm: f64,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        c_values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PatternKind {
    /// `value * Y_lm`.
    Harmonic {
        #[arg(long)]
        l: usize,
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        im: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform random coefficients up to `degree`, rescaled to `norm`.
    Random {
        #[arg(long)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        norm: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => 2,
        Error::DenominatorTooSmall { .. } => 3,
        Error::SolverFailure { .. } => 4,
        _ => 1,
    }
}

fn with_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn read(path: &Path) -> Result<String> {
    io::read_text(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::parse(&read(p)?).map_err(|e| with_path(p, e)),
        None => Ok(RunConfig::default()),
    }
}

fn load_target(path: &Path, config: &RunConfig, sphere: &SphereGrid) -> Result<Target> {
    match io::read_pattern_input(&read(path)?).map_err(|e| with_path(path, e))? {
        PatternInput::Coefficients(c) => Ok(Target::from_coefficients(sphere, c)),
        PatternInput::Samples(s) => {
            if s.order != sphere.order() {
                return Err(Error::GridMismatch(format!(
                    "pattern sampled on sphere_order={} but config has sphere_order={}",
                    s.order,
                    sphere.order()
                )));
            }
            Target::from_samples(sphere, s, config.l_max)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_synthesize(pattern: &Path, config: Option<&Path>, out: &Path, autoscale: bool) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let sphere = cfg.sphere_grid()?;
    let grid = cfg.ball_spec().build()?;
    let target = load_target(pattern, &cfg, &sphere)?;
    let params = SynthesisParams {
        k: cfg.k,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        max_degree: cfg.l_max,
        denom_threshold: cfg.denom_threshold,
        autoscale,
    };
    let result = synthesize(&target, &sphere, &grid, &params)?;
    let mut kv = result.report.key_values();
    kv.push("autoscale", autoscale);
    kv.extend_prefixed("config.", &cfg.key_values());
    print!("{kv}");
    match result.q {
        Some(q) => {
            fs::write(out, io::write_field(&q, grid.nodes())?)?;
            Ok(ExitCode::SUCCESS)
        }
        None => Err(Error::DenominatorTooSmall {
            min_modulus: result.report.denom_min_modulus,
            threshold: result.report.denom_threshold,
        }),
    }
}

fn cmd_forward(potential: &Path, config: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let q = io::read_field(&read(potential)?).map_err(|e| with_path(potential, e))?;
    if q.spec != cfg.ball_spec() {
        return Err(Error::GridMismatch(format!(
            "potential grid (radial_count={}, angular_order={}, b={}) differs from config (radial_count={}, angular_order={}, b=1)",
            q.spec.radial_count, q.spec.angular_order, q.spec.radius, cfg.radial_count, cfg.angular_order
        )));
    }
    let grid = q.spec.build()?;
    let sphere = cfg.sphere_grid()?;
    let solution = solve_scattering(&grid, &q, cfg.k, cfg.alpha)?;
    let amplitude = scattering_amplitude(&grid, &q, &solution.u, &sphere, cfg.k)?;
    fs::write(out, io::write_pattern(&amplitude, &sphere)?)?;
    let mut kv = KeyValues::new();
    kv.push("solver_method", solution.method.name());
    kv.push_f64("solver_residual", solution.relative_residual);
    kv.push(
        "condition_estimate",
        solution.condition_estimate.map_or("none".to_string(), format_f64),
    );
    kv.push("iterations", solution.iterations);
    kv.extend_prefixed("config.", &cfg.key_values());
    print!("{kv}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(pattern: &Path, config: Option<&Path>, autoscale: bool) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let sphere = cfg.sphere_grid()?;
    let target = load_target(pattern, &cfg, &sphere)?;
    let report = roundtrip(&target, &cfg, autoscale)?;
    print!("{}", report.key_values());
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// `(1 - |x|^2) e^{i x_1}`, scaled to the requested norm.
fn default_density(grid: &BallGrid, norm: f64) -> Result<ComplexField> {
    let h = grid.sample(|x| Complex64::from_polar(1.0 - x.dot(x), x.x));
    let n = grid.l2_norm(&h)?;
    Ok(h.scaled(norm / n))
}

fn cmd_study(kind: &Study) -> Result<ExitCode> {
    match kind {
        Study::Lemma1 {
            pattern,
            config,
            degrees,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let sphere = cfg.sphere_grid()?;
            let grid = cfg.ball_spec().build()?;
            let target = load_target(pattern, &cfg, &sphere)?;
            let entries = lemma1_study(&target, &sphere, &grid, degrees, cfg.k)?;
            emit(out.as_deref(), &lemma1_csv(&entries))?;
            let residuals: Vec<f64> = entries.iter().filter_map(|e| e.residual).collect();
            let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
            eprintln!("monotone={monotone}");
        }
        Study::Smallness {
            config,
            density,
            h_norm,
            c_values,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let h = match density {
                Some(p) => io::read_field(&read(p)?).map_err(|e| with_path(p, e))?,
                None => default_density(&cfg.ball_spec().build()?, *h_norm)?,
            };
            let grid = h.spec.build()?;
            let study = smallness_probe(&grid, &h, c_values, cfg.k, cfg.alpha)?;
            emit(out.as_deref(), &study.csv())?;
            match study.slope() {
                Some(s) => eprintln!("slope={}", format_f64(s)),
                None => eprintln!("slope=nan"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pattern(kind: &PatternKind) -> Result<ExitCode> {
    let (coeffs, out) = match kind {
        PatternKind::Harmonic { l, m, re, im, out } => {
            let idx = HarmonicIndex::new(*l, *m)?;
            let mut c = HarmonicCoeffs::zeros(*l);
            c.set(idx, Complex64::new(*re, *im))?;
            (c, out)
        }
        PatternKind::Random {
            degree,
            seed,
            norm,
            out,
        } => {
            let mut rng = rand::rngs::StdRng::seed_from_u64(*seed);
            let mut c = HarmonicCoeffs::zeros(*degree);
            for idx in HarmonicIndex::upto(*degree) {
                c.set(idx, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))?;
            }
            let scale = norm / c.energy().sqrt();
            (c.scaled(scale), out)
        }
    };
    fs::write(out, io::write_coefficients(&coeffs))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Synthesize {
            pattern,
            config,
            out,
            autoscale,
        } => cmd_synthesize(pattern, config.as_deref(), out, *autoscale),
        Command::Forward {
            potential,
            config,
            out,
        } => cmd_forward(potential, config.as_deref(), out),
        Command::Verify {
            pattern,
            config,
            autoscale,
        } => cmd_verify(pattern, config.as_deref(), *autoscale),
        Command::Study { kind } => cmd_study(kind),
        Command::Pattern { kind } => cmd_pattern(kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Parse { line: 1, message: String::new() }), 2);
        assert_eq!(
            exit_code(&Error::DenominatorTooSmall {
                min_modulus: 0.0,
                threshold: 0.1
            }),
            3
        );
        assert_eq!(
            exit_code(&Error::SolverFailure {
                reason: String::new(),
                condition_estimate: None
            }),
            4
        );
        assert_eq!(exit_code(&Error::InvalidArgument(String::new())), 1);
    }

    #[test]
    fn default_density_has_requested_norm() {
        let grid = BallGrid::new(6, 6, 1.0).unwrap();
        let h = default_density(&grid, 0.1).unwrap();
        assert!((grid.l2_norm(&h).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
