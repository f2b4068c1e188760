//! Special functions: spherical Bessel functions, orthonormal spherical
//! harmonics, the radial Bessel moments that link target harmonic
//! coefficients to angular densities in the unit ball, and the truncated
//! plane-wave expansion.

mod bessel;
mod ylm;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::quadrature::integrate_adaptive;

pub use bessel::{spherical_bessel_j, spherical_bessel_j_upto};
pub use ylm::{harmonic_count, spherical_harmonic, spherical_harmonics_upto, HarmonicIndex};

/// Absolute tolerance handed to the adaptive rule for radial moments.
const RADIAL_MOMENT_TOL: f64 = 1e-14;
const RADIAL_MOMENT_MAX_INTERVALS: usize = 4000;

/// `g(l, k) = int_0^1 r^{3/2} J_{l+1/2}(k r) dr`.
///
/// With `J_{l+1/2}(kr) = sqrt(2kr/pi) j_l(kr)` the integrand is the smooth
/// function `sqrt(2k/pi) r^2 j_l(kr)`, integrated by adaptive Gauss-Kronrod.
/// The ball radius is fixed at 1.
pub fn radial_moment_g(l: usize, k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!(
            "wavenumber must be positive and finite, got {k}"
        )));
    }
    let prefactor = (2.0 * k / PI).sqrt();
    let integral = integrate_adaptive(
        |r| r * r * spherical_bessel_j_upto(l, k * r)[l],
        0.0,
        1.0,
        RADIAL_MOMENT_TOL / prefactor,
        RADIAL_MOMENT_MAX_INTERVALS,
    )?;
    Ok(prefactor * integral)
}

/// Truncated expansion
/// `sum_{l<=L, |m|<=l} 4 pi i^l j_l(k r) conj(Y_lm(-x0)) Y_lm(beta)` of `e^{-ik beta.x}`.
pub fn plane_wave_partial_sum(x: Vec3, beta: Vec3, k: f64, degree: usize) -> Complex64 {
    let r = x.norm();
    let jl = spherical_bessel_j_upto(degree, (k * r).abs());
    let (tx, px) = (-x).angles();
    let (tb, pb) = beta.angles();
    let y_x = spherical_harmonics_upto(degree, tx, px);
    let y_b = spherical_harmonics_upto(degree, tb, pb);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut i_pow = Complex64::new(1.0, 0.0);
    for (l, &jl) in jl.iter().enumerate() {
        let start = l * l;
        let angular: Complex64 = (start..start + 2 * l + 1)
            .map(|i| y_x[i].conj() * y_b[i])
            .sum();
        sum += i_pow * (4.0 * PI * jl) * angular;
        i_pow *= Complex64::i();
    }
    sum
}
