//! Spherical-harmonic analysis and synthesis of patterns on the unit sphere.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::SphereGrid;
use crate::specfun::{harmonic_count, spherical_harmonics_upto, HarmonicIndex};

pub use crate::grids::PatternSamples;

/// Coefficients `c_{l,m}` for `l <= degree`, stored densely in flat `(l, m)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    degree: usize,
    values: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(degree: usize) -> Self {
        Self {
            degree,
            values: vec![Complex64::new(0.0, 0.0); harmonic_count(degree)],
        }
    }

    pub fn from_values(degree: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != harmonic_count(degree) {
            return Err(Error::LengthMismatch {
                expected: harmonic_count(degree),
                actual: values.len(),
            });
        }
        Ok(Self { degree, values })
    }

    /// Truncation degree `L`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `c_{l,m}`, zero beyond the stored degree.
    pub fn get(&self, idx: HarmonicIndex) -> Complex64 {
        self.values
            .get(idx.flat())
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn set(&mut self, idx: HarmonicIndex, value: Complex64) -> Result<()> {
        if idx.l() > self.degree {
            return Err(Error::InvalidArgument(format!(
                "degree {} exceeds coefficient table degree {}",
                idx.l(),
                self.degree
            )));
        }
        self.values[idx.flat()] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (HarmonicIndex, Complex64)> + '_ {
        HarmonicIndex::upto(self.degree).zip(self.values.iter().copied())
    }

    /// Copy with degree changed to `degree`, zero-padding or truncating.
    pub fn resized(&self, degree: usize) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); harmonic_count(degree)];
        let keep = values.len().min(self.values.len());
        values[..keep].copy_from_slice(&self.values[..keep]);
        Self { degree, values }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            degree: self.degree,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `sum |c_{l,m}|^2`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// `c_{l,m} = sum_i w_i s_i conj(Y_{l,m}(node_i))` for `l <= degree`.
///
/// Requires the grid to integrate degree-`2 * degree` products exactly.
pub fn analyze(grid: &SphereGrid, samples: &PatternSamples, degree: usize) -> Result<HarmonicCoeffs> {
    grid.check(samples)?;
    if grid.order() < 2 * degree {
        return Err(Error::InsufficientExactness {
            order: grid.order(),
            degree,
        });
    }
    let mut coeffs = HarmonicCoeffs::zeros(degree);
    for ((&(theta, phi), &w), &s) in grid.angles().iter().zip(grid.weights()).zip(&samples.values) {
        if s == Complex64::new(0.0, 0.0) {
            continue;
        }
        let ws = s * w;
        let y = spherical_harmonics_upto(degree, theta, phi);
        for (c, yv) in coeffs.values.iter_mut().zip(&y) {
            *c += ws * yv.conj();
        }
    }
    Ok(coeffs)
}

/// Pointwise `sum c_{l,m} Y_{l,m}` at the grid nodes.
pub fn synthesize_pattern(coeffs: &HarmonicCoeffs, grid: &SphereGrid) -> PatternSamples {
    grid.sample(|theta, phi| {
        spherical_harmonics_upto(coeffs.degree, theta, phi)
            .iter()
            .zip(&coeffs.values)
            .map(|(y, c)| y * c)
            .sum()
    })
}

/// `sum_{l > cutoff} |c_{l,m}|^2`.
pub fn tail_energy(full: &HarmonicCoeffs, cutoff: usize) -> Result<f64> {
    if cutoff > full.degree {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} exceeds coefficient degree {}",
            full.degree
        )));
    }
    Ok(full.values[harmonic_count(cutoff)..]
        .iter()
        .map(|v| v.norm_sqr())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::l2_norm_sphere;
    use crate::specfun::spherical_harmonic;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn idx(l: usize, m: i64) -> HarmonicIndex {
        HarmonicIndex::new(l, m).unwrap()
    }

    #[test]
    fn single_harmonic_analyzes_to_unit_coefficient() {
        let grid = SphereGrid::new(8).unwrap();
        let target = idx(2, -1);
        let samples = grid.sample(|t, p| spherical_harmonic(target, t, p).unwrap());
        let c = analyze(&grid, &samples, 4).unwrap();
        for (i, v) in c.iter() {
            let expect = if i == target { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-10, "{i:?}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let grid = SphereGrid::new(6).unwrap();
        let c = analyze(&grid, &PatternSamples::zeros(&grid), 3).unwrap();
        assert_eq!(c.energy(), 0.0);
    }

    #[test]
    fn analyze_requires_exactness() {
        let grid = SphereGrid::new(6).unwrap();
        let err = analyze(&grid, &PatternSamples::zeros(&grid), 4).unwrap_err();
        assert!(matches!(err, Error::InsufficientExactness { order: 6, degree: 4 }));
    }

    #[test]
    fn constant_coefficient_gives_unit_pattern() {
        let grid = SphereGrid::new(4).unwrap();
        let mut c = HarmonicCoeffs::zeros(0);
        c.set(idx(0, 0), Complex64::new((4.0 * PI).sqrt(), 0.0)).unwrap();
        let s = synthesize_pattern(&c, &grid);
        assert!(s.values.iter().all(|v| (v - 1.0).norm() < 1e-14));
    }

    #[test]
    fn tail_energy_cases() {
        let mut c = HarmonicCoeffs::zeros(3);
        c.set(idx(1, 0), Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(tail_energy(&c, 3).unwrap(), 0.0);
        assert_eq!(tail_energy(&c, 0).unwrap(), 1.0);
        assert_eq!(tail_energy(&c, 1).unwrap(), 0.0);
        assert!(tail_energy(&c, 4).is_err());
    }

    #[test]
    fn smooth_pattern_tail_decays_super_algebraically() {
        let grid = SphereGrid::new(40).unwrap();
        let f = grid.sample(|t, _| Complex64::new(t.cos().exp(), 0.0));
        let c = analyze(&grid, &f, 20).unwrap();
        let tails: Vec<f64> = (0..12).map(|l| tail_energy(&c, l).unwrap()).collect();
        // Successive ratios shrink: faster than any fixed power of L.
        for l in 2..10 {
            let ratio_here = tails[l + 1] / tails[l];
            let ratio_before = tails[l] / tails[l - 1];
            assert!(ratio_here < ratio_before, "l={l}");
        }
        assert!(tails[11] < 1e-20);
    }

    #[test]
    fn truncation_error_equals_tail() {
        let grid = SphereGrid::new(24).unwrap();
        let mut full = HarmonicCoeffs::zeros(6);
        for (i, c) in full.values.iter_mut().enumerate() {
            *c = Complex64::new(1.0 / (1.0 + i as f64), 0.3 * (i as f64).sin());
        }
        let f = synthesize_pattern(&full, &grid);
        for cutoff in 0..6 {
            let approx = synthesize_pattern(&analyze(&grid, &f, cutoff).unwrap(), &grid);
            let err = l2_norm_sphere(&f.difference(&approx).unwrap(), &grid).unwrap();
            assert!((err - tail_energy(&full, cutoff).unwrap().sqrt()).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), harmonic_count(5))
        ) {
            let grid = SphereGrid::new(10).unwrap();
            let values = raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let coeffs = HarmonicCoeffs::from_values(5, values).unwrap();
            let pattern = synthesize_pattern(&coeffs, &grid);
            let back = analyze(&grid, &pattern, 5).unwrap();
            for (a, b) in back.values().iter().zip(coeffs.values()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            let norm = l2_norm_sphere(&pattern, &grid).unwrap();
            prop_assert!((norm * norm - coeffs.energy()).abs() < 1e-10);
        }

        #[test]
        fn analysis_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let grid = SphereGrid::new(8).unwrap();
            let f = grid.sample(|t, p| Complex64::new(t.cos() * p.sin(), t.sin()));
            let g = grid.sample(|t, p| Complex64::new((2.0 * t).cos(), p.cos()));
            let combo = PatternSamples {
                order: 8,
                values: f.values.iter().zip(&g.values).map(|(x, y)| x * a + y * b).collect(),
            };
            let cf = analyze(&grid, &f, 4).unwrap();
            let cg = analyze(&grid, &g, 4).unwrap();
            let cc = analyze(&grid, &combo, 4).unwrap();
            for i in 0..cc.values().len() {
                let expect = cf.values()[i] * a + cg.values()[i] * b;
                prop_assert!((cc.values()[i] - expect).norm() < 1e-12);
            }
        }
    }
}
