//! Product quadrature grids on the unit sphere and on a ball centred at the
//! origin, and the complex sample containers that live on them.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::quadrature::GaussLegendre;

/// Gauss-Legendre in `cos(theta)` times a uniform rule in `phi`.
///
/// Nodes are stored theta-major: node `i_theta * n_phi + i_phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    order: usize,
    n_theta: usize,
    n_phi: usize,
    angles: Vec<(f64, f64)>,
    directions: Vec<Vec3>,
    weights: Vec<f64>,
}

impl SphereGrid {
    /// Grid integrating every spherical polynomial of degree `<= order` exactly.
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "sphere grid order must be at least 2, got {order}"
            )));
        }
        let n_theta = order / 2 + 1;
        let n_phi = order + 1;
        let rule = GaussLegendre::new(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut angles = Vec::with_capacity(n_theta * n_phi);
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        // Ascending theta means descending cos(theta).
        for (&t, &w) in rule.nodes.iter().rev().zip(rule.weights.iter().rev()) {
            let theta = t.acos();
            for j in 0..n_phi {
                let phi = j as f64 * dphi;
                angles.push((theta, phi));
                directions.push(Vec3::from_angles(theta, phi));
                weights.push(w * dphi);
            }
        }
        Ok(Self {
            order,
            n_theta,
            n_phi,
            angles,
            directions,
            weights,
        })
    }

    /// Polynomial exactness degree.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(theta, phi)` of each node.
    pub fn angles(&self) -> &[(f64, f64)] {
        &self.angles
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    /// Solid-angle weights, summing to `4 pi`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest harmonic degree whose products are still integrated exactly.
    pub fn max_analysis_degree(&self) -> usize {
        self.order / 2
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> Complex64) -> PatternSamples {
        PatternSamples {
            order: self.order,
            values: self.angles.iter().map(|&(t, p)| f(t, p)).collect(),
        }
    }

    pub fn integrate(&self, samples: &PatternSamples) -> Result<Complex64> {
        self.check(samples)?;
        Ok(self
            .weights
            .iter()
            .zip(&samples.values)
            .map(|(&w, &v)| v * w)
            .sum())
    }

    pub(crate) fn check(&self, samples: &PatternSamples) -> Result<()> {
        if samples.values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: samples.values.len(),
            });
        }
        if samples.order != self.order {
            return Err(Error::GridMismatch(format!(
                "pattern sampled on a sphere grid of order {}, expected order {}",
                samples.order, self.order
            )));
        }
        Ok(())
    }
}

/// `(sum_i w_i |s_i|^2)^{1/2}`, the discrete `L^2(S^2)` norm.
pub fn l2_norm_sphere(samples: &PatternSamples, grid: &SphereGrid) -> Result<f64> {
    grid.check(samples)?;
    Ok(grid
        .weights
        .iter()
        .zip(&samples.values)
        .map(|(&w, v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Parameters that fully determine a [`BallGrid`]; this is also what field files carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallGridSpec {
    pub radial_count: usize,
    pub angular_order: usize,
    pub radius: f64,
}

impl BallGridSpec {
    pub fn new(radial_count: usize, angular_order: usize, radius: f64) -> Self {
        Self {
            radial_count,
            angular_order,
            radius,
        }
    }

    pub fn build(self) -> Result<BallGrid> {
        BallGrid::new(self.radial_count, self.angular_order, self.radius)
    }
}

/// Gauss-Legendre in `r` (with the `r^2` Jacobian folded into the weights)
/// times a [`SphereGrid`].
///
/// Node `j = i_r * sphere.len() + i_angle`. Each node also carries the radius
/// of the ball with the same volume as its weight, used for the singular
/// self-cell term of the volume integral operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BallGrid {
    spec: BallGridSpec,
    sphere: SphereGrid,
    radii: Vec<f64>,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    self_radii: Vec<f64>,
}

impl BallGrid {
    pub fn new(radial_count: usize, angular_order: usize, radius: f64) -> Result<Self> {
        if radial_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "ball grid needs at least 2 radial nodes, got {radial_count}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let sphere = SphereGrid::new(angular_order)?;
        let rule = GaussLegendre::new(radial_count);
        let (radii, radial_weights): (Vec<f64>, Vec<f64>) = rule
            .on_interval(0.0, radius)
            .map(|(r, w)| (r, w * r * r))
            .unzip();
        let n = radial_count * sphere.len();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (&r, &wr) in radii.iter().zip(&radial_weights) {
            for (&dir, &wa) in sphere.directions().iter().zip(sphere.weights()) {
                nodes.push(dir * r);
                weights.push(wr * wa);
            }
        }
        let self_radii = weights
            .iter()
            .map(|&v| (3.0 * v / (4.0 * PI)).cbrt())
            .collect();
        Ok(Self {
            spec: BallGridSpec::new(radial_count, angular_order, radius),
            sphere,
            radii,
            nodes,
            weights,
            self_radii,
        })
    }

    pub fn spec(&self) -> BallGridSpec {
        self.spec
    }

    pub fn radius(&self) -> f64 {
        self.spec.radius
    }

    pub fn sphere(&self) -> &SphereGrid {
        &self.sphere
    }

    /// Radial node positions, ascending.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Volume weights, summing to `4/3 pi b^3`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn self_radii(&self) -> &[f64] {
        &self.self_radii
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Angular node index of ball node `j`.
    pub fn angular_index(&self, j: usize) -> usize {
        j % self.sphere.len()
    }

    /// Radial node index of ball node `j`.
    pub fn radial_index(&self, j: usize) -> usize {
        j / self.sphere.len()
    }

    pub fn sample(&self, f: impl Fn(Vec3) -> Complex64) -> ComplexField {
        ComplexField {
            spec: self.spec,
            values: self.nodes.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zeros(&self) -> ComplexField {
        ComplexField {
            spec: self.spec,
            values: vec![Complex64::new(0.0, 0.0); self.len()],
        }
    }

    pub fn integrate(&self, field: &ComplexField) -> Result<Complex64> {
        self.check(field)?;
        Ok(self
            .weights
            .iter()
            .zip(&field.values)
            .map(|(&w, &v)| v * w)
            .sum())
    }

    /// Discrete `L^2` norm over the ball.
    pub fn l2_norm(&self, field: &ComplexField) -> Result<f64> {
        self.check(field)?;
        Ok(self
            .weights
            .iter()
            .zip(&field.values)
            .map(|(&w, v)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub(crate) fn check(&self, field: &ComplexField) -> Result<()> {
        if field.values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: field.values.len(),
            });
        }
        if field.spec != self.spec {
            return Err(Error::GridMismatch(format!(
                "field lives on {:?}, expected {:?}",
                field.spec, self.spec
            )));
        }
        Ok(())
    }
}

/// Complex samples at the nodes of a [`SphereGrid`] of the given order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSamples {
    pub order: usize,
    pub values: Vec<Complex64>,
}

impl PatternSamples {
    pub fn zeros(grid: &SphereGrid) -> Self {
        Self {
            order: grid.order(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            order: self.order,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise `self - other`; both must come from the same grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.order != other.order || self.values.len() != other.values.len() {
            return Err(Error::GridMismatch(format!(
                "cannot subtract patterns on grids of order {} and {}",
                self.order, other.order
            )));
        }
        Ok(Self {
            order: self.order,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Complex samples at the nodes of a [`BallGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub spec: BallGridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{spherical_harmonic, HarmonicIndex};

    fn ylm(l: usize, m: i64) -> impl Fn(f64, f64) -> Complex64 {
        let idx = HarmonicIndex::new(l, m).unwrap();
        move |t, p| spherical_harmonic(idx, t, p).unwrap()
    }

    #[test]
    fn sphere_weights_sum_to_four_pi() {
        for order in [2, 3, 8, 16, 31] {
            let g = SphereGrid::new(order).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn sphere_grid_rejects_low_order() {
        assert!(SphereGrid::new(1).is_err());
    }

    #[test]
    fn sphere_integrals_of_harmonics() {
        let g = SphereGrid::new(8).unwrap();
        let i10 = g.integrate(&g.sample(ylm(1, 0))).unwrap();
        assert!(i10.norm() < 1e-12);
        let y21 = g.sample(ylm(2, 1));
        assert!((l2_norm_sphere(&y21, &g).unwrap() - 1.0).abs() < 1e-10);
        let y32 = g.sample(ylm(3, 2));
        assert!((l2_norm_sphere(&y32, &g).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_norms_of_constants() {
        let g = SphereGrid::new(6).unwrap();
        let one = g.sample(|_, _| Complex64::new(1.0, 0.0));
        assert!((l2_norm_sphere(&one, &g).unwrap() - (4.0 * PI).sqrt()).abs() < 1e-13);
        assert_eq!(l2_norm_sphere(&PatternSamples::zeros(&g), &g).unwrap(), 0.0);
    }

    #[test]
    fn sphere_norm_rejects_mismatch() {
        let g = SphereGrid::new(6).unwrap();
        let other = SphereGrid::new(8).unwrap();
        let s = PatternSamples::zeros(&other);
        assert!(l2_norm_sphere(&s, &g).is_err());
        let short = PatternSamples {
            order: 6,
            values: vec![Complex64::new(0.0, 0.0); 3],
        };
        assert!(matches!(
            l2_norm_sphere(&short, &g),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ball_volume_and_moments() {
        for &b in &[1.0, 0.5, 2.0] {
            let g = BallGrid::new(6, 4, b).unwrap();
            let vol: f64 = g.weights().iter().sum();
            assert!((vol - 4.0 / 3.0 * PI * b.powi(3)).abs() < 1e-10 * vol);
            let r2 = g.sample(|x| Complex64::new(x.dot(x), 0.0));
            let i = g.integrate(&r2).unwrap();
            assert!((i.re - 4.0 * PI / 5.0 * b.powi(5)).abs() < 1e-10);
            let y10 = g.sample(|x| {
                let (t, p) = x.angles();
                ylm(1, 0)(t, p)
            });
            assert!(g.integrate(&y10).unwrap().norm() < 1e-12);
            assert!(g.nodes().iter().all(|x| x.norm() < b));
        }
    }

    #[test]
    fn self_radii_reproduce_weights() {
        let g = BallGrid::new(4, 4, 1.0).unwrap();
        for (&rho, &v) in g.self_radii().iter().zip(g.weights()) {
            assert!((4.0 / 3.0 * PI * rho.powi(3) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn ball_grid_rejects_bad_parameters() {
        assert!(BallGrid::new(1, 4, 1.0).is_err());
        assert!(BallGrid::new(4, 1, 1.0).is_err());
        assert!(BallGrid::new(4, 4, 0.0).is_err());
    }

    #[test]
    fn node_layout_is_radial_major() {
        let g = BallGrid::new(3, 4, 1.0).unwrap();
        let n_ang = g.sphere().len();
        for j in 0..g.len() {
            let x = g.nodes()[j];
            let r = g.radii()[g.radial_index(j)];
            let dir = g.sphere().directions()[g.angular_index(j)];
            assert!((x - dir * r).norm() < 1e-15);
        }
        assert_eq!(g.len(), 3 * n_ang);
    }

    #[test]
    fn radial_oscillation_converges_under_refinement() {
        let k = 5.0;
        let integral = |nr: usize, order: usize| {
            let g = BallGrid::new(nr, order, 1.0).unwrap();
            g.integrate(&g.sample(|x| Complex64::from_polar(1.0, k * x.norm())))
                .unwrap()
        };
        let coarse = integral(16, 8);
        let fine = integral(32, 16);
        assert!((coarse - fine).norm() <= 1e-8 * fine.norm());
    }
}
