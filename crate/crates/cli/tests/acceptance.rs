//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ampsynth::config::RunConfig;
use ampsynth::forward::{incident_field, scattering_amplitude, solve_scattering};
use ampsynth::grids::{l2_norm_sphere, BallGrid, ComplexField, SphereGrid};
use ampsynth::harmonics::HarmonicCoeffs;
use ampsynth::io;
use ampsynth::specfun::{plane_wave_partial_sum, radial_moment_g, HarmonicIndex};
use ampsynth::synthesis::{synthesize, synthesize_h, synthesize_q, SynthesisParams, Target};
use ampsynth::verify::{lemma1_study, roundtrip, smallness_probe};
use ampsynth::{Complex64, Vec3};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

const ALPHA: Vec3 = Vec3::new(0.0, 0.0, 1.0);

fn y10_target(sphere: &SphereGrid, amplitude: f64) -> Target {
    let mut c = HarmonicCoeffs::zeros(1);
    c.set(HarmonicIndex::new(1, 0).unwrap(), Complex64::new(amplitude, 0.0))
        .unwrap();
    Target::from_coefficients(sphere, c)
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

fn criterion_1() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    let k = 2.0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x = random_unit(&mut rng) * (2.5 * rng.random::<f64>().cbrt());
        let beta = random_unit(&mut rng);
        let exact = Complex64::from_polar(1.0, -k * beta.dot(x));
        worst = worst.max((plane_wave_partial_sum(x, beta, k, 30) - exact).norm());
    }
    check(worst <= 1e-10, format!("max error {worst:e} (limit 1e-10)"))
}

/// `j_l(x)` from its power series, independent of the recurrences in the library.
fn bessel_series(l: usize, x: f64) -> f64 {
    let mut double_fact = 1.0;
    for i in (1..=2 * l + 1).step_by(2) {
        double_fact *= i as f64;
    }
    let mut term = x.powi(l as i32) / double_fact;
    let mut sum = term;
    for n in 1..200 {
        term *= -x * x / (2.0 * n as f64 * (2 * l + 2 * n + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Tanh-sinh rule on `[0, 1]` with step `h`.
fn tanh_sinh(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let mut sum = 0.0;
    let n = (4.0 / h).ceil() as i64;
    for i in -n..=n {
        let t = i as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let x = 0.5 * (1.0 + u.tanh());
        let w = 0.25 * PI * t.cosh() / u.cosh().powi(2);
        if x > 0.0 && x < 1.0 && w > 0.0 {
            sum += w * f(x);
        }
    }
    h * sum
}

fn criterion_2() -> Outcome {
    let mut closed: f64 = 0.0;
    for k in [0.5, 1.0, 2.0, 5.0] {
        let exact = (2.0 / (PI * k)).sqrt() * (k.sin() - k * k.cos()) / (k * k);
        closed = closed.max((radial_moment_g(0, k).map_err(err)? - exact).abs());
    }
    let mut rules: f64 = 0.0;
    for l in 0..=20 {
        for k in [0.5, 1.0, 2.0, 5.0] {
            let other = (2.0 * k / PI).sqrt() * tanh_sinh(|r| r * r * bessel_series(l, k * r), 1.0 / 64.0);
            rules = rules.max((radial_moment_g(l, k).map_err(err)? - other).abs());
        }
    }
    check(
        closed <= 1e-12 && rules <= 1e-10,
        format!("closed-form error {closed:e} (limit 1e-12), rule disagreement {rules:e} (limit 1e-10)"),
    )
}

fn criterion_3() -> Outcome {
    let grid = BallGrid::new(12, 12, 1.0).map_err(err)?;
    let sphere = SphereGrid::new(12).map_err(err)?;
    let k = 1.0;
    let zero = grid.zeros();
    let sol = solve_scattering(&grid, &zero, k, ALPHA).map_err(err)?;
    let u0 = incident_field(&grid, k, ALPHA);
    let amp0 = scattering_amplitude(&grid, &zero, &sol.u, &sphere, k).map_err(err)?;
    let exact_zero = sol.u == u0 && amp0.values.iter().all(|v| *v == Complex64::new(0.0, 0.0));

    let q = grid.sample(|x| Complex64::new(1.0 - x.dot(x), 0.5 * x.z));
    let born = scattering_amplitude(&grid, &q, &u0, &sphere, k).map_err(err)?;
    let mut scaled = Vec::new();
    for c in [1e-2, 1e-3] {
        let cq = q.scaled(c);
        let u = solve_scattering(&grid, &cq, k, ALPHA).map_err(err)?.u;
        let amp = scattering_amplitude(&grid, &cq, &u, &sphere, k).map_err(err)?;
        let diff = amp.difference(&born.scaled(c)).map_err(err)?;
        scaled.push(l2_norm_sphere(&diff, &sphere).map_err(err)? / (c * c));
    }
    let ratio = scaled[0] / scaled[1];
    check(
        exact_zero && (0.5..=2.0).contains(&ratio),
        format!(
            "q=0 exact: {exact_zero}; ||A_cq - c A_born||/c^2 = {:e}, {:e}; ratio {ratio:.4} (limit [0.5, 2])",
            scaled[0], scaled[1]
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = RunConfig::default();
    let sphere = cfg.sphere_grid().map_err(err)?;
    let grid = cfg.ball_spec().build().map_err(err)?;
    let target = y10_target(&sphere, 0.05);
    let h = synthesize_h(&target.coeffs, cfg.k, 1, &grid).map_err(err)?;
    let q = synthesize_q(&grid, &h, cfg.k, cfg.alpha, cfg.denom_threshold)
        .map_err(err)?
        .q;
    let u = solve_scattering(&grid, &q, cfg.k, cfg.alpha).map_err(err)?.u;
    let worst = q
        .values
        .iter()
        .zip(&u.values)
        .zip(&h.values)
        .map(|((q, u), h)| (q * u - h).norm())
        .fold(0.0, f64::max);
    check(worst <= 1e-6, format!("max |q u - h| = {worst:e} (limit 1e-6)"))
}

fn criterion_5() -> Outcome {
    let mut errors = Vec::new();
    let mut details = Vec::new();
    for (radial, order) in [(24, 16), (48, 32)] {
        let cfg = RunConfig {
            epsilon: 2.5e-3,
            radial_count: radial,
            angular_order: order,
            sphere_order: order,
            ..RunConfig::default()
        };
        let sphere = cfg.sphere_grid().map_err(err)?;
        let start = Instant::now();
        let report = roundtrip(&y10_target(&sphere, 0.05), &cfg, false).map_err(err)?;
        details.push(format!(
            "{radial}x{order}: error {:e} via {} in {:.0}s",
            report.achieved_error,
            report.solver_method,
            start.elapsed().as_secs_f64()
        ));
        errors.push(report.achieved_error);
    }
    let reduction = errors[0] / errors[1];
    check(
        errors[0] <= 2.5e-3 && reduction >= 3.0,
        format!(
            "{}; reduction {reduction:.3} (limits: error <= 2.5e-3, reduction >= 3)",
            details.join(", ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = RunConfig::default();
    let sphere = cfg.sphere_grid().map_err(err)?;
    let grid = cfg.ball_spec().build().map_err(err)?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    let mut c = HarmonicCoeffs::zeros(3);
    for idx in HarmonicIndex::upto(3) {
        c.set(idx, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .unwrap();
    }
    let c = c.scaled(0.05 / c.energy().sqrt());
    let target = Target::from_coefficients(&sphere, c);
    let entries = lemma1_study(&target, &sphere, &grid, &[0, 1, 2, 3, 4], cfg.k).map_err(err)?;
    let residuals: Vec<f64> = entries.iter().map(|e| e.residual.unwrap_or(f64::NAN)).collect();
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
    check(
        monotone && residuals[3] <= 1e-8,
        format!("residuals {residuals:?}; monotone {monotone}; at L=3 limit 1e-8"),
    )
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig::default();
    let grid = cfg.ball_spec().build().map_err(err)?;
    let raw = grid.sample(|x| Complex64::from_polar(1.0 - x.dot(x), x.x));
    let h: ComplexField = raw.scaled(0.1 / grid.l2_norm(&raw).map_err(err)?);
    let study = smallness_probe(&grid, &h, &[1e-2, 1e-3, 1e-4], cfg.k, cfg.alpha).map_err(err)?;
    let slope = study.slope().unwrap_or(f64::NAN);
    let deviations: Vec<f64> = study.deviations().iter().map(|d| d.unwrap_or(f64::NAN)).collect();
    check(
        (0.9..=1.1).contains(&slope),
        format!("deviations {deviations:?}; slope {slope:.4} (limit [0.9, 1.1])"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = RunConfig::default();
    let sphere = cfg.sphere_grid().map_err(err)?;
    let grid = cfg.ball_spec().build().map_err(err)?;
    let mut unit = HarmonicCoeffs::zeros(1);
    unit.set(HarmonicIndex::new(1, 1).unwrap(), Complex64::new(1.0, 0.0))
        .unwrap();
    let base = Target::from_coefficients(&sphere, unit);
    let params = |autoscale| SynthesisParams {
        k: cfg.k,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        max_degree: cfg.l_max,
        denom_threshold: cfg.denom_threshold,
        autoscale,
    };
    let mut details = Vec::new();
    let mut ok = true;
    for magnitude in [5.0, 10.0, 20.0] {
        let target = base.scaled(magnitude);
        let plain = synthesize(&target, &sphere, &grid, &params(false)).map_err(err)?;
        let scaled = synthesize(&target, &sphere, &grid, &params(true)).map_err(err)?;
        let t = scaled.report.scale;
        let gap = (scaled.report.denom_min_modulus - cfg.denom_threshold).abs() / cfg.denom_threshold;
        let mut below_pass = true;
        for i in 1..=40 {
            let s = t * i as f64 / 40.0;
            let r = synthesize(&target.scaled(s), &sphere, &grid, &params(false)).map_err(err)?;
            below_pass &= r.report.condition_passed;
        }
        ok &= !plain.report.condition_passed && gap <= 0.1 && below_pass;
        details.push(format!(
            "|f|={magnitude}: unscaled min {:.3e}, t*={t:.6e}, min at t* {:.6e}, all below pass {below_pass}",
            plain.report.denom_min_modulus, scaled.report.denom_min_modulus
        ));
    }
    check(ok, details.join("; "))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let pattern = dir.path().join("pattern.txt");
    let config = dir.path().join("run.cfg");
    let mut c = HarmonicCoeffs::zeros(1);
    c.set(HarmonicIndex::new(1, 0).unwrap(), Complex64::new(0.05, 0.0))
        .unwrap();
    std::fs::write(&pattern, io::write_coefficients(&c)).map_err(err)?;
    std::fs::write(&config, "k=1\nalpha=0,0,1\nepsilon=2.5e-3\n").map_err(err)?;
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_ampsynth"))
            .args(["verify", "--pattern"])
            .arg(&pattern)
            .arg("--config")
            .arg(&config)
            .output()
    };
    let a = run().map_err(err)?;
    let b = run().map_err(err)?;
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    check(
        same && a.status.success() && b.status.success(),
        format!(
            "{} report bytes, identical {same}, exit codes {:?} {:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("plane-wave expansion", criterion_1),
        ("radial moment oracles", criterion_2),
        ("forward solver sanity", criterion_3),
        ("q u = h identity", criterion_4),
        ("round trip and grid refinement", criterion_5),
        ("truncation study", criterion_6),
        ("smallness probe slope", criterion_7),
        ("denominator autoscale", criterion_8),
        ("determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS [{name}] {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL [{name}] {detail} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
