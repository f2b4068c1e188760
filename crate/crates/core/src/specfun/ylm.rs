use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Degree and order of a spherical harmonic, `|m| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HarmonicIndex {
    l: usize,
    m: i64,
}

impl HarmonicIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!(
                "harmonic order m={m} exceeds degree l={l}"
            )));
        }
        Ok(Self { l, m })
    }

    pub fn l(self) -> usize {
        self.l
    }

    pub fn m(self) -> i64 {
        self.m
    }

    /// Position in the dense `(l, m)` layout `l^2 + l + m`.
    pub fn flat(self) -> usize {
        ((self.l * self.l + self.l) as i64 + self.m) as usize
    }

    /// Inverse of [`HarmonicIndex::flat`].
    pub fn from_flat(index: usize) -> Self {
        let l = (index as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
        let m = index as i64 - (l * l + l) as i64;
        Self { l, m }
    }

    /// All indices with degree `<= lmax`, in flat order.
    pub fn upto(lmax: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..=lmax).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| HarmonicIndex { l, m }))
    }
}

/// Number of harmonics with degree `<= lmax`.
pub fn harmonic_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Orthonormal spherical harmonic `Y_{l,m}(theta, phi)` with the Condon-Shortley phase.
pub fn spherical_harmonic(idx: HarmonicIndex, theta: f64, phi: f64) -> Result<Complex64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "polar angle must lie in [0, pi], got {theta}"
        )));
    }
    Ok(spherical_harmonics_upto(idx.l(), theta, phi)[idx.flat()])
}

/// All `Y_{l,m}(theta, phi)` for `l <= lmax`, in flat `(l, m)` order.
///
/// Normalized associated Legendre functions are built with the standard
/// stable recurrences in `l` at fixed `m`; negative orders follow from
/// `Y_{l,-m} = (-1)^m conj(Y_{l,m})`.
pub fn spherical_harmonics_upto(lmax: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let (st, ct) = theta.sin_cos();
    let st = st.abs();
    let mut out = vec![Complex64::new(0.0, 0.0); harmonic_count(lmax)];
    let mut pmm = (0.25 / PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * st;
        }
        let phase = Complex64::from_polar(1.0, m as f64 * phi);
        let mut store = |l: usize, p: f64| {
            let y = phase * p;
            out[l * l + l + m] = y;
            if m > 0 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out[l * l + l - m] = y.conj() * sign;
            }
        };
        store(m, pmm);
        if m == lmax {
            break;
        }
        let mf = m as f64;
        let mut p_lm2 = pmm;
        let mut p_lm1 = (2.0 * mf + 3.0).sqrt() * ct * pmm;
        store(m + 1, p_lm1);
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let p = a * (ct * p_lm1 - b * p_lm2);
            store(l, p);
            p_lm2 = p_lm1;
            p_lm1 = p;
        }
    }
    out
}
