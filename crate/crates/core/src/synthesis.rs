//! Construction of the potential.
//!
//! The target pattern is matched degree by degree with an auxiliary density
//! `h` that is constant in `r` inside the unit ball:
//!
//! ```text
//! h(x) = sum_{l<=L} h_lm Y_lm(x/|x|),   h_lm = f_lm / ( -(-i)^l sqrt(pi/(2k)) g(l, k) )
//! ```
//!
//! whose far-field integral `-(1/4pi) int e^{-ik alpha'.x} h dx` equals the
//! truncated pattern. The potential then follows pointwise from
//!
//! ```text
//! q(x) = h(x) / ( e^{ik alpha.x} - int g(x, y) h(y) dy )
//! ```
//!
//! which makes `q u = h` for the scattering solution `u` of `q`. The division
//! is only safe when the bracket stays away from zero on the grid; its
//! smallest modulus is reported and compared against a threshold.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{apply_volume_kernel, far_field_transform, incident_field, inverse_norm1_estimate};
use crate::geom::Vec3;
use crate::grids::{l2_norm_sphere, BallGrid, PatternSamples, SphereGrid};
use crate::harmonics::{analyze, synthesize_pattern, tail_energy, HarmonicCoeffs};
use crate::report::KeyValues;
use crate::specfun::{radial_moment_g, spherical_harmonics_upto, HarmonicIndex};

pub use crate::grids::ComplexField;

/// Degrees whose radial moment falls below this cannot be matched.
pub const RADIAL_MOMENT_FLOOR: f64 = 1e-14;
pub const DEFAULT_DENOMINATOR_THRESHOLD: f64 = 0.1;
/// Tikhonov floor on the unit-diagonal normal matrix of the least-squares route.
pub const RIDGE_FLOOR: f64 = 1e-12;
/// Condition estimate above which the ridge floor is considered active.
pub const RIDGE_WARNING_CONDITION: f64 = 1e8;
/// Relative back-off from the exact threshold crossing when autoscaling.
const AUTOSCALE_MARGIN: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn check_unit_ball(grid: &BallGrid) -> Result<()> {
    if (grid.radius() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "the analytic density is defined on the unit ball, grid radius is {}",
            grid.radius()
        )));
    }
    Ok(())
}

/// `-(-i)^l sqrt(pi/(2k)) g(l, k)`: the factor mapping `h_lm` to `f_lm`.
fn degree_transfer(l: usize, k: f64) -> Result<Complex64> {
    let g = radial_moment_g(l, k)?;
    if g.abs() < RADIAL_MOMENT_FLOOR {
        return Err(Error::UnreachableDegree {
            degree: l,
            k,
            value: g,
            floor: RADIAL_MOMENT_FLOOR,
        });
    }
    let minus_i_pow = match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    Ok(-minus_i_pow * (PI / (2.0 * k)).sqrt() * g)
}

/// Angular coefficients `h_lm` of the density for every `l <= degree`.
pub fn density_coefficients(f: &HarmonicCoeffs, k: f64, degree: usize) -> Result<HarmonicCoeffs> {
    let mut h = HarmonicCoeffs::zeros(degree);
    for l in 0..=degree {
        let transfer = degree_transfer(l, k)?;
        for m in -(l as i64)..=l as i64 {
            let idx = HarmonicIndex::new(l, m)?;
            h.set(idx, f.get(idx) / transfer)?;
        }
    }
    Ok(h)
}

/// Samples the `r`-independent density matching `f` through degree `degree`.
pub fn synthesize_h(f: &HarmonicCoeffs, k: f64, degree: usize, grid: &BallGrid) -> Result<ComplexField> {
    check_unit_ball(grid)?;
    let h = density_coefficients(f, k, degree)?;
    let sphere = grid.sphere();
    let angular: Vec<Complex64> = sphere
        .angles()
        .iter()
        .map(|&(t, p)| {
            spherical_harmonics_upto(degree, t, p)
                .iter()
                .zip(h.values())
                .map(|(y, c)| y * c)
                .sum()
        })
        .collect();
    Ok(ComplexField {
        spec: grid.spec(),
        values: (0..grid.len())
            .map(|j| angular[grid.angular_index(j)])
            .collect(),
    })
}

/// `|| f(alpha') + (1/4pi) int_D e^{-ik alpha'.x} h(x) dx ||_{L^2(S^2)}` with the
/// volume integral done by ball quadrature at every sphere node.
pub fn predicted_residual(
    grid: &BallGrid,
    h: &ComplexField,
    sphere: &SphereGrid,
    f: &PatternSamples,
    k: f64,
) -> Result<f64> {
    sphere.check(f)?;
    let far = far_field_transform(grid, h, sphere, k)?;
    let residual = PatternSamples {
        order: f.order,
        values: f
            .values
            .iter()
            .zip(&far.values)
            .map(|(a, b)| a + b / (4.0 * PI))
            .collect(),
    };
    l2_norm_sphere(&residual, sphere)
}

/// Volume potential `int_D g(x_j, y) h(y) dy` at every node, self-cell included.
pub fn volume_potential(grid: &BallGrid, h: &ComplexField, k: f64) -> Result<Vec<Complex64>> {
    grid.check(h)?;
    if h.values.iter().all(|&v| v == ZERO) {
        return Ok(vec![ZERO; grid.len()]);
    }
    Ok(apply_volume_kernel(grid, k, &h.values))
}

/// `d_j = e^{ik alpha.x_j} - int_D g(x_j, y) h(y) dy`.
pub fn denominators(grid: &BallGrid, h: &ComplexField, k: f64, alpha: Vec3) -> Result<Vec<Complex64>> {
    let potential = volume_potential(grid, h, k)?;
    Ok(incident_field(grid, k, alpha)
        .values
        .iter()
        .zip(&potential)
        .map(|(a, b)| a - b)
        .collect())
}

fn min_modulus(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct SynthesizedPotential {
    pub q: ComplexField,
    pub denom_min_modulus: f64,
}

/// `q_j = h_j / d_j`, provided `min_j |d_j|` exceeds `threshold`.
pub fn synthesize_q(
    grid: &BallGrid,
    h: &ComplexField,
    k: f64,
    alpha: Vec3,
    threshold: f64,
) -> Result<SynthesizedPotential> {
    let d = denominators(grid, h, k, alpha)?;
    let denom_min_modulus = min_modulus(&d);
    if !(denom_min_modulus > threshold) {
        return Err(Error::DenominatorTooSmall {
            min_modulus: denom_min_modulus,
            threshold,
        });
    }
    Ok(SynthesizedPotential {
        q: divide(h, &d),
        denom_min_modulus,
    })
}

fn divide(h: &ComplexField, d: &[Complex64]) -> ComplexField {
    ComplexField {
        spec: h.spec,
        values: h.values.iter().zip(d).map(|(a, b)| a / b).collect(),
    }
}

/// Smallest `t > 0` at which some `|u0_j - t z_j|` drops to `threshold`.
///
/// Each denominator is affine in the scale of `h`, so the crossing is the
/// smaller root of a quadratic per node. `None` when no node ever crosses.
pub fn first_threshold_crossing(u0: &[Complex64], potential: &[Complex64], threshold: f64) -> Option<f64> {
    u0.iter()
        .zip(potential)
        .filter_map(|(&a, &z)| {
            let zz = z.norm_sqr();
            let c = a.norm_sqr() - threshold * threshold;
            if zz == 0.0 {
                return None;
            }
            if c <= 0.0 {
                return Some(0.0);
            }
            let b = (a * z.conj()).re;
            let disc = b * b - zz * c;
            (b > 0.0 && disc >= 0.0).then(|| c / (b + disc.sqrt()))
        })
        .min_by(f64::total_cmp)
}

/// Outcome of scaling `h` back until the denominators clear the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Autoscale {
    pub factor: f64,
    pub denom_min_modulus: f64,
}

/// Largest `t <= 1` such that every scale in `(0, t]` passes the denominator check.
pub fn autoscale(grid: &BallGrid, h: &ComplexField, k: f64, alpha: Vec3, threshold: f64) -> Result<Autoscale> {
    let u0 = incident_field(grid, k, alpha).values;
    let z = volume_potential(grid, h, k)?;
    let at = |t: f64| -> f64 {
        min_modulus(
            &u0.iter()
                .zip(&z)
                .map(|(a, b)| a - b * t)
                .collect::<Vec<_>>(),
        )
    };
    let full = at(1.0);
    if full > threshold {
        return Ok(Autoscale {
            factor: 1.0,
            denom_min_modulus: full,
        });
    }
    let crossing = first_threshold_crossing(&u0, &z, threshold).unwrap_or(1.0);
    let factor = (crossing * (1.0 - AUTOSCALE_MARGIN)).min(1.0);
    Ok(Autoscale {
        factor,
        denom_min_modulus: at(factor),
    })
}

/// Inputs of the end-to-end construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisParams {
    pub k: f64,
    pub alpha: Vec3,
    pub epsilon: f64,
    pub max_degree: usize,
    pub denom_threshold: f64,
    pub autoscale: bool,
}

/// Target pattern in both coefficient and sample form.
#[derive(Debug, Clone)]
pub struct Target {
    pub coeffs: HarmonicCoeffs,
    pub samples: PatternSamples,
    /// Energy the sphere grid sees beyond `coeffs.degree()`.
    pub unresolved_energy: f64,
}

impl Target {
    /// Analyze grid samples up to `max_degree` (capped by what the grid resolves).
    pub fn from_samples(sphere: &SphereGrid, samples: PatternSamples, max_degree: usize) -> Result<Self> {
        let degree = max_degree.min(sphere.max_analysis_degree());
        let coeffs = analyze(sphere, &samples, degree)?;
        let norm = l2_norm_sphere(&samples, sphere)?;
        let unresolved_energy = (norm * norm - coeffs.energy()).max(0.0);
        Ok(Self {
            coeffs,
            samples,
            unresolved_energy,
        })
    }

    pub fn from_coefficients(sphere: &SphereGrid, coeffs: HarmonicCoeffs) -> Self {
        let samples = synthesize_pattern(&coeffs, sphere);
        Self {
            coeffs,
            samples,
            unresolved_energy: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.scaled(factor),
            samples: self.samples.scaled(factor),
            unresolved_energy: self.unresolved_energy * factor * factor,
        }
    }
}

/// Smallest degree whose tail (plus unresolved energy) is below `epsilon^2 / 4`.
///
/// Returns `(degree, tail, budget_met)`; if no admissible degree exists the
/// highest available one is returned with `budget_met = false`.
pub fn choose_truncation(target: &Target, epsilon: f64, max_degree: usize) -> Result<(usize, f64, bool)> {
    let top = max_degree.min(target.coeffs.degree());
    let budget = epsilon * epsilon / 4.0;
    for l in 0..=top {
        let tail = tail_energy(&target.coeffs, l)? + target.unresolved_energy;
        if tail < budget {
            return Ok((l, tail, true));
        }
    }
    let tail = tail_energy(&target.coeffs, top)? + target.unresolved_energy;
    Ok((top, tail, false))
}

/// Diagnostics of one synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisReport {
    pub degree_used: usize,
    pub tail_energy: f64,
    pub tail_budget_met: bool,
    pub predicted_residual: f64,
    pub denom_min_modulus: f64,
    pub denom_threshold: f64,
    pub condition_passed: bool,
    /// Factor applied to the target (1 unless autoscaling kicked in).
    pub scale: f64,
    pub h_norm: f64,
    pub q_max_modulus: f64,
}

impl SynthesisReport {
    pub fn key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("degree_used", self.degree_used);
        kv.push_f64("tail_energy", self.tail_energy);
        kv.push("tail_budget_met", self.tail_budget_met);
        kv.push_f64("predicted_residual", self.predicted_residual);
        kv.push_f64("denom_min_modulus", self.denom_min_modulus);
        kv.push_f64("denom_threshold", self.denom_threshold);
        kv.push("condition_passed", self.condition_passed);
        kv.push_f64("scale", self.scale);
        kv.push_f64("h_norm", self.h_norm);
        kv.push_f64("q_max_modulus", self.q_max_modulus);
        kv
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub h: ComplexField,
    /// `None` when the denominator check failed and autoscaling was off.
    pub q: Option<ComplexField>,
    pub report: SynthesisReport,
}

/// Truncate, build `h`, check the denominators and build `q`.
pub fn synthesize(target: &Target, sphere: &SphereGrid, grid: &BallGrid, params: &SynthesisParams) -> Result<Synthesis> {
    let (degree, tail, budget_met) = choose_truncation(target, params.epsilon, params.max_degree)?;
    let mut h = synthesize_h(&target.coeffs, params.k, degree, grid)?;
    let mut d = denominators(grid, &h, params.k, params.alpha)?;
    let mut denom_min = min_modulus(&d);
    let mut scale = 1.0;
    if !(denom_min > params.denom_threshold) && params.autoscale {
        let fit = autoscale(grid, &h, params.k, params.alpha, params.denom_threshold)?;
        scale = fit.factor;
        h = h.scaled(scale);
        d = denominators(grid, &h, params.k, params.alpha)?;
        denom_min = min_modulus(&d);
    }
    let passed = denom_min > params.denom_threshold;
    let scaled_target = target.samples.scaled(scale);
    let predicted = predicted_residual(grid, &h, sphere, &scaled_target, params.k)?;
    let q = passed.then(|| divide(&h, &d));
    let report = SynthesisReport {
        degree_used: degree,
        tail_energy: tail * scale * scale,
        tail_budget_met: budget_met,
        predicted_residual: predicted,
        denom_min_modulus: denom_min,
        denom_threshold: params.denom_threshold,
        condition_passed: passed,
        scale,
        h_norm: grid.l2_norm(&h)?,
        q_max_modulus: q.as_ref().map_or(f64::NAN, |q| q.max_modulus()),
    };
    Ok(Synthesis { h, q, report })
}

/// One basis function `r^power Y_lm(x/|x|)` of the least-squares route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisFunction {
    pub index: HarmonicIndex,
    pub power: u32,
}

/// Basis ordered by degree, then order, then radial power; prefixes are nested.
pub fn least_squares_basis(count: usize, radial_terms: usize) -> Vec<BasisFunction> {
    let radial_terms = radial_terms.max(1);
    HarmonicIndex::upto(usize::MAX / 4)
        .flat_map(|index| {
            (0..radial_terms as u32).map(move |power| BasisFunction { index, power })
        })
        .take(count)
        .collect()
}

#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub h: ComplexField,
    pub coefficients: Vec<Complex64>,
    pub residual: f64,
    /// The ridge floor materially regularized the solve.
    pub ridge_active: bool,
    pub condition_estimate: f64,
}

/// Minimizes `|| f + (1/4pi) int e^{-ik alpha'.x} h dx ||` over `h` in the span
/// of a nested polynomial-times-harmonic basis, through equilibrated normal
/// equations with a ridge floor.
pub struct LeastSquaresProblem<'a> {
    grid: &'a BallGrid,
    sphere: &'a SphereGrid,
    basis: Vec<BasisFunction>,
    samples: Vec<Vec<Complex64>>,
    columns: Vec<Vec<Complex64>>,
    target: Vec<Complex64>,
}

impl<'a> LeastSquaresProblem<'a> {
    pub fn new(
        grid: &'a BallGrid,
        sphere: &'a SphereGrid,
        f: &PatternSamples,
        max_basis: usize,
        radial_terms: usize,
        k: f64,
    ) -> Result<Self> {
        sphere.check(f)?;
        if max_basis == 0 {
            return Err(Error::InvalidArgument("basis size must be at least 1".into()));
        }
        let basis = least_squares_basis(max_basis, radial_terms);
        let lmax = basis.iter().map(|b| b.index.l()).max().unwrap_or(0);
        let ylm: Vec<Vec<Complex64>> = grid
            .sphere()
            .angles()
            .iter()
            .map(|&(t, p)| spherical_harmonics_upto(lmax, t, p))
            .collect();
        let radii: Vec<f64> = (0..grid.len()).map(|j| grid.radii()[grid.radial_index(j)]).collect();
        let mut samples = Vec::with_capacity(basis.len());
        let mut columns = Vec::with_capacity(basis.len());
        for b in &basis {
            let values: Vec<Complex64> = (0..grid.len())
                .map(|j| ylm[grid.angular_index(j)][b.index.flat()] * radii[j].powi(b.power as i32))
                .collect();
            let field = ComplexField {
                spec: grid.spec(),
                values,
            };
            let far = far_field_transform(grid, &field, sphere, k)?;
            columns.push(far.values.iter().map(|v| v / (4.0 * PI)).collect());
            samples.push(field.values);
        }
        Ok(Self {
            grid,
            sphere,
            basis,
            samples,
            columns,
            target: f.values.clone(),
        })
    }

    pub fn basis(&self) -> &[BasisFunction] {
        &self.basis
    }

    /// Fit with the first `n` basis functions.
    pub fn fit(&self, n: usize) -> Result<LeastSquaresFit> {
        if n == 0 || n > self.basis.len() {
            return Err(Error::InvalidArgument(format!(
                "basis size {n} outside 1..={}",
                self.basis.len()
            )));
        }
        let w = self.sphere.weights();
        let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter()
                .zip(b)
                .zip(w)
                .map(|((x, y), &wi)| x.conj() * y * wi)
                .sum()
        };
        let diag: Vec<f64> = (0..n)
            .map(|j| inner(&self.columns[j], &self.columns[j]).re)
            .collect();
        let scale: Vec<f64> = diag
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let normal = Mat::<Complex64>::from_fn(n, n, |i, j| {
            let v = inner(&self.columns[i], &self.columns[j]) * (scale[i] * scale[j]);
            if i == j {
                v + RIDGE_FLOOR
            } else {
                v
            }
        });
        let norm1 = (0..n)
            .map(|j| normal.col_as_slice(j).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let lu = normal.partial_piv_lu();
        let mut rhs = Mat::<Complex64>::from_fn(n, 1, |i, _| -inner(&self.columns[i], &self.target) * scale[i]);
        lu.solve_in_place(&mut rhs);
        let condition_estimate = norm1 * inverse_norm1_estimate(&lu, n);
        let ridge_active = condition_estimate > RIDGE_WARNING_CONDITION;
        if ridge_active {
            warn!(
                "least-squares normal equations are ill-conditioned (estimate {condition_estimate:e}); ridge {RIDGE_FLOOR:e} is active"
            );
        }
        let coefficients: Vec<Complex64> = (0..n).map(|i| rhs[(i, 0)] * scale[i]).collect();
        let mut residual_values = self.target.clone();
        let mut h = vec![ZERO; self.grid.len()];
        for (j, &c) in coefficients.iter().enumerate() {
            for (r, col) in residual_values.iter_mut().zip(&self.columns[j]) {
                *r += c * col;
            }
            for (hv, s) in h.iter_mut().zip(&self.samples[j]) {
                *hv += c * s;
            }
        }
        let residual = l2_norm_sphere(
            &PatternSamples {
                order: self.sphere.order(),
                values: residual_values,
            },
            self.sphere,
        )?;
        Ok(LeastSquaresFit {
            h: ComplexField {
                spec: self.grid.spec(),
                values: h,
            },
            coefficients,
            residual,
            ridge_active,
            condition_estimate,
        })
    }
}

/// Single least-squares fit with `basis_size` functions (radial powers `1, r`).
pub fn least_squares_h(
    grid: &BallGrid,
    sphere: &SphereGrid,
    f: &PatternSamples,
    basis_size: usize,
    k: f64,
) -> Result<LeastSquaresFit> {
    LeastSquaresProblem::new(grid, sphere, f, basis_size, 2, k)?.fit(basis_size)
}
