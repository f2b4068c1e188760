//! End-to-end checks: round trip through an independent scattering solve,
//! the truncation study for the density and the small-potential probe.

use std::f64::consts::PI;
use std::fmt::Write as _;

use log::warn;
use num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::forward::{
    far_field_transform, operator_norm_bound, scattering_amplitude, solve_scattering_with, SolveOptions,
};
use crate::geom::Vec3;
use crate::grids::{l2_norm_sphere, BallGrid, ComplexField, SphereGrid};
use crate::report::{format_f64, KeyValues};
use crate::synthesis::{predicted_residual, synthesize, synthesize_h, SynthesisParams, Target};

/// Outcome of synthesize-then-scatter for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripReport {
    pub config: RunConfig,
    pub autoscale: bool,
    pub node_count: usize,
    pub epsilon_target: f64,
    /// `||A_q - t f||` on the sphere grid, `t` being [`RoundTripReport::scale`].
    pub achieved_error: f64,
    pub degree_used: usize,
    pub tail_energy: f64,
    /// `||A_h - t f||`: truncation plus quadrature error of the density stage.
    pub predicted_residual: f64,
    /// `||A_q - A_h||`: error contributed by the division and the scattering solve.
    pub forward_error: f64,
    pub denom_min_modulus: f64,
    pub qu_minus_h_max: f64,
    pub solver_method: &'static str,
    pub solver_residual: f64,
    pub condition_estimate: Option<f64>,
    pub scale: f64,
    pub passed: bool,
}

impl RoundTripReport {
    /// Upper bound from the triangle inequality, `predicted_residual + forward_error`.
    pub fn error_bound(&self) -> f64 {
        self.predicted_residual + self.forward_error
    }

    pub fn key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("passed", self.passed);
        kv.push_f64("epsilon_target", self.epsilon_target);
        kv.push_f64("achieved_error", self.achieved_error);
        kv.push("L_used", self.degree_used);
        kv.push_f64("tail_energy", self.tail_energy);
        kv.push_f64("tail_bound", self.tail_energy.sqrt());
        kv.push_f64("predicted_residual", self.predicted_residual);
        kv.push_f64("forward_error", self.forward_error);
        kv.push_f64("error_bound", self.error_bound());
        kv.push_f64("denom_min_modulus", self.denom_min_modulus);
        kv.push_f64("qu_minus_h_max", self.qu_minus_h_max);
        kv.push_f64("scale", self.scale);
        kv.push("solver_method", self.solver_method);
        kv.push_f64("solver_residual", self.solver_residual);
        kv.push(
            "condition_estimate",
            self.condition_estimate.map_or("none".to_string(), format_f64),
        );
        kv.push("grid.nodes", self.node_count);
        kv.push("autoscale", self.autoscale);
        kv.extend_prefixed("config.", &self.config.key_values());
        kv
    }
}

/// Synthesizes `q` for `target`, solves the scattering problem for it and
/// compares the resulting amplitude with the target.
///
/// Without `autoscale` a failed denominator check is returned as
/// [`Error::DenominatorTooSmall`].
pub fn roundtrip(target: &Target, config: &RunConfig, autoscale: bool) -> Result<RoundTripReport> {
    roundtrip_with(target, config, autoscale, &SolveOptions::default())
}

pub fn roundtrip_with(
    target: &Target,
    config: &RunConfig,
    autoscale: bool,
    solve: &SolveOptions,
) -> Result<RoundTripReport> {
    config.validate()?;
    let sphere = config.sphere_grid()?;
    sphere.check(&target.samples)?;
    let grid = config.ball_spec().build()?;
    let params = SynthesisParams {
        k: config.k,
        alpha: config.alpha,
        epsilon: config.epsilon,
        max_degree: config.l_max,
        denom_threshold: config.denom_threshold,
        autoscale,
    };
    let synthesis = synthesize(target, &sphere, &grid, &params)?;
    let report = &synthesis.report;
    let Some(q) = synthesis.q.as_ref() else {
        return Err(Error::DenominatorTooSmall {
            min_modulus: report.denom_min_modulus,
            threshold: report.denom_threshold,
        });
    };
    let solution = solve_scattering_with(&grid, q, config.k, config.alpha, solve)?;
    let amplitude = scattering_amplitude(&grid, q, &solution.u, &sphere, config.k)?;
    let scaled_f = target.samples.scaled(report.scale);
    let achieved_error = l2_norm_sphere(&amplitude.difference(&scaled_f)?, &sphere)?;
    let amplitude_h = far_field_transform(&grid, &synthesis.h, &sphere, config.k)?.scaled(-1.0 / (4.0 * PI));
    let forward_error = l2_norm_sphere(&amplitude.difference(&amplitude_h)?, &sphere)?;
    let qu_minus_h_max = q
        .values
        .iter()
        .zip(&solution.u.values)
        .zip(&synthesis.h.values)
        .map(|((q, u), h)| (q * u - h).norm())
        .fold(0.0, f64::max);
    Ok(RoundTripReport {
        config: *config,
        autoscale,
        node_count: grid.len(),
        epsilon_target: config.epsilon,
        achieved_error,
        degree_used: report.degree_used,
        tail_energy: report.tail_energy,
        predicted_residual: report.predicted_residual,
        forward_error,
        denom_min_modulus: report.denom_min_modulus,
        qu_minus_h_max,
        solver_method: solution.method.name(),
        solver_residual: solution.relative_residual,
        condition_estimate: solution.condition_estimate,
        scale: report.scale,
        passed: achieved_error <= config.epsilon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Entry {
    pub degree: usize,
    /// `None` when the degree is unreachable at this wavenumber.
    pub residual: Option<f64>,
    pub h_norm: Option<f64>,
}

impl Lemma1Entry {
    pub fn unreachable(&self) -> bool {
        self.residual.is_none()
    }
}

/// Residual `||f + (1/4pi) int e^{-ik alpha'.x} h_L dx||` of the analytic density
/// truncated at each degree in `degrees` (strictly increasing).
pub fn lemma1_study(
    target: &Target,
    sphere: &SphereGrid,
    grid: &BallGrid,
    degrees: &[usize],
    k: f64,
) -> Result<Vec<Lemma1Entry>> {
    if degrees.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("degrees must be strictly increasing".into()));
    }
    let mut entries = Vec::with_capacity(degrees.len());
    for &degree in degrees {
        match synthesize_h(&target.coeffs, k, degree, grid) {
            Ok(h) => entries.push(Lemma1Entry {
                degree,
                residual: Some(predicted_residual(grid, &h, sphere, &target.samples, k)?),
                h_norm: Some(grid.l2_norm(&h)?),
            }),
            Err(Error::UnreachableDegree { .. }) => entries.push(Lemma1Entry {
                degree,
                residual: None,
                h_norm: None,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(entries)
}

pub fn lemma1_csv(entries: &[Lemma1Entry]) -> String {
    let mut out = String::from("L,residual,h_norm,unreachable\n");
    for e in entries {
        let num = |v: Option<f64>| v.map_or("nan".to_string(), format_f64);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.degree,
            num(e.residual),
            num(e.h_norm),
            u8::from(e.unreachable())
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessEntry {
    pub c: f64,
    pub operator_bound: f64,
    /// `None` when the entry was skipped because the bound reached 1.
    pub value: Option<Complex64>,
}

impl SmallnessEntry {
    pub fn ratio(&self) -> Option<Complex64> {
        self.value.map(|v| v / self.c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessStudy {
    pub h_norm_sq: f64,
    pub entries: Vec<SmallnessEntry>,
}

impl SmallnessStudy {
    /// `|v(c)/c - ||h||^2|` per entry.
    pub fn deviations(&self) -> Vec<Option<f64>> {
        self.entries
            .iter()
            .map(|e| e.ratio().map(|r| (r - self.h_norm_sq).norm()))
            .collect()
    }

    /// Log-log slope of the deviation against `c` over the computed entries.
    pub fn slope(&self) -> Option<f64> {
        let (cs, ds): (Vec<f64>, Vec<f64>) = self
            .entries
            .iter()
            .zip(self.deviations())
            .filter_map(|(e, d)| d.map(|d| (e.c, d)))
            .unzip();
        loglog_slope(&cs, &ds)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("c,operator_bound,value_re,value_im,ratio_re,ratio_im,h_norm_sq,deviation,skipped\n");
        for (e, d) in self.entries.iter().zip(self.deviations()) {
            let nan = || "nan".to_string();
            let (vr, vi) = e.value.map_or((nan(), nan()), |v| (format_f64(v.re), format_f64(v.im)));
            let (rr, ri) = e.ratio().map_or((nan(), nan()), |v| (format_f64(v.re), format_f64(v.im)));
            let _ = writeln!(
                out,
                "{},{},{vr},{vi},{rr},{ri},{},{},{}",
                format_f64(e.c),
                format_f64(e.operator_bound),
                format_f64(self.h_norm_sq),
                d.map_or_else(nan, format_f64),
                u8::from(e.value.is_none())
            );
        }
        out
    }
}

/// For each `c`, sets `q = c conj(h) e^{-ik alpha.x}`, solves for `u` and
/// records `v(c) = int_D h q u dx`, which tends to `c ||h||^2` as `c -> 0`.
pub fn smallness_probe(
    grid: &BallGrid,
    h: &ComplexField,
    c_values: &[f64],
    k: f64,
    alpha: Vec3,
) -> Result<SmallnessStudy> {
    grid.check(h)?;
    if c_values.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidArgument("c values must be positive".into()));
    }
    let h_norm = grid.l2_norm(h)?;
    let base: Vec<Complex64> = grid
        .nodes()
        .iter()
        .zip(&h.values)
        .map(|(x, hv)| hv.conj() * Complex64::from_polar(1.0, -k * alpha.dot(*x)))
        .collect();
    let mut entries = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let q = ComplexField {
            spec: grid.spec(),
            values: base.iter().map(|b| b * c).collect(),
        };
        let operator_bound = operator_norm_bound(grid, &q)?;
        if operator_bound >= 1.0 {
            warn!("skipping c = {c:e}: operator bound {operator_bound:e} is not below 1");
            entries.push(SmallnessEntry {
                c,
                operator_bound,
                value: None,
            });
            continue;
        }
        let u = solve_scattering_with(grid, &q, k, alpha, &SolveOptions::default())?.u;
        let value = h
            .values
            .iter()
            .zip(&q.values)
            .zip(&u.values)
            .zip(grid.weights())
            .map(|(((h, q), u), &w)| h * q * u * w)
            .sum();
        entries.push(SmallnessEntry {
            c,
            operator_bound,
            value: Some(value),
        });
    }
    Ok(SmallnessStudy {
        h_norm_sq: h_norm * h_norm,
        entries,
    })
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than two
/// usable points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}
