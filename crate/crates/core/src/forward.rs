//! Forward scattering: the Lippmann-Schwinger equation `u = u0 - T u`,
//! `T u = int_D g(x, y) q(y) u(y) dy`, discretized on a [`BallGrid`] by a
//! Nystrom rule with an analytic self-cell term, and the far-field amplitude
//! `A_q(alpha') = -(1/4pi) int_D e^{-ik alpha'.x} q u dx`.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::grids::{BallGrid, ComplexField, PatternSamples, SphereGrid};

/// Largest node count solved by dense LU; beyond this the operator is applied matrix-free.
pub const DENSE_NODE_LIMIT: usize = 8000;
/// Neumann iteration is only attempted below this operator-norm bound.
pub const NEUMANN_BOUND_LIMIT: f64 = 0.9;
/// Dense solves whose condition estimate exceeds this are reported as failures.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Relative residual every accepted solution must satisfy.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Outgoing free-space Green's function `e^{ikr} / (4 pi r)`.
#[inline]
pub fn green(k: f64, r: f64) -> Complex64 {
    let (s, c) = (k * r).sin_cos();
    Complex64::new(c, s) / (4.0 * PI * r)
}

/// `int_{|y| < rho} e^{ik|y|} / (4 pi |y|) dy = int_0^rho r e^{ikr} dr`.
pub fn self_cell_integral(rho: f64, k: f64) -> Complex64 {
    let z = k * rho;
    if z.abs() < 1.0 {
        // sum_n (ik)^n rho^{n+2} / (n! (n+2))
        let ik_rho = Complex64::new(0.0, z);
        let mut term = Complex64::new(rho * rho, 0.0); // (ik rho)^n rho^2 / n!
        let mut sum = term / 2.0;
        for n in 1..40 {
            term *= ik_rho / n as f64;
            let add = term / (n + 2) as f64;
            sum += add;
            if add.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        let e = Complex64::from_polar(1.0, z);
        (e * Complex64::new(1.0, -z) - 1.0) / (k * k)
    }
}

/// Self-cell terms `S(rho_j, k)` for every node.
pub fn self_cell_terms(grid: &BallGrid, k: f64) -> Vec<Complex64> {
    grid.self_radii()
        .iter()
        .map(|&rho| self_cell_integral(rho, k))
        .collect()
}

/// `(K x)_j = sum_{i != j} g(x_j, x_i) v_i x_i + S(rho_j, k) x_j`, without storing `K`.
///
/// Each node pair is visited once and feeds both rows.
pub fn apply_volume_kernel(grid: &BallGrid, k: f64, density: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(density.len(), grid.len(), "density length must match grid");
    let nodes = grid.nodes();
    let weighted: Vec<Complex64> = density
        .iter()
        .zip(grid.weights())
        .map(|(d, &v)| d * v)
        .collect();
    let mut out: Vec<Complex64> = self_cell_terms(grid, k)
        .iter()
        .zip(density)
        .map(|(s, d)| s * d)
        .collect();
    for j in 0..nodes.len() {
        let xj = nodes[j];
        let wj = weighted[j];
        let mut acc = ZERO;
        for i in (j + 1)..nodes.len() {
            let g = green(k, xj.distance(nodes[i]));
            acc += g * weighted[i];
            out[i] += g * wj;
        }
        out[j] += acc;
    }
    out
}

/// Dense volume-kernel matrix `K` with `K_ji = g(x_j, x_i) v_i`, `K_jj = S(rho_j, k)`.
pub fn assemble_volume_kernel(grid: &BallGrid, k: f64) -> Mat<Complex64> {
    let nodes = grid.nodes();
    let weights = grid.weights();
    let selfs = self_cell_terms(grid, k);
    let n = grid.len();
    let mut mat = Mat::<Complex64>::zeros(n, n);
    for i in 0..n {
        let xi = nodes[i];
        let vi = weights[i];
        let col = mat.col_as_slice_mut(i);
        for (j, entry) in col.iter_mut().enumerate() {
            *entry = if i == j {
                selfs[i]
            } else {
                green(k, nodes[j].distance(xi)) * vi
            };
        }
    }
    mat
}

/// Dense discretization of `T` for a given potential.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: Mat<Complex64>,
    pub k: f64,
}

impl OperatorMatrix {
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        matvec(&self.matrix, x)
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut rows = vec![0.0; n];
        for i in 0..self.matrix.ncols() {
            for (r, v) in rows.iter_mut().zip(self.matrix.col_as_slice(i)) {
                *r += v.norm();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

/// `T = K diag(q)`: entry `(j, i)` is `g(x_j, x_i) q_i v_i` off the diagonal and
/// `q_j S(rho_j, k)` on it.
pub fn assemble_t(grid: &BallGrid, q: &ComplexField, k: f64) -> Result<OperatorMatrix> {
    grid.check(q)?;
    let mut matrix = assemble_volume_kernel(grid, k);
    for (i, &qi) in q.values.iter().enumerate() {
        for entry in matrix.col_as_slice_mut(i) {
            *entry *= qi;
        }
    }
    Ok(OperatorMatrix { matrix, k })
}

fn matvec(mat: &Mat<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![ZERO; mat.nrows()];
    for (i, &xi) in x.iter().enumerate() {
        if xi == ZERO {
            continue;
        }
        for (yj, a) in y.iter_mut().zip(mat.col_as_slice(i)) {
            *yj += a * xi;
        }
    }
    y
}

/// `max|q| * a^2 / 2`, an upper bound for the sup-norm of `T` on a ball of radius `a`
/// (the Newtonian potential of the unit density peaks at `a^2 / 2` at the centre).
pub fn operator_norm_bound(grid: &BallGrid, q: &ComplexField) -> Result<f64> {
    grid.check(q)?;
    Ok(q.max_modulus() * grid.radius().powi(2) / 2.0)
}

/// Incident plane wave `u0 = e^{ik alpha.x}` at the grid nodes.
pub fn incident_field(grid: &BallGrid, k: f64, alpha: Vec3) -> ComplexField {
    grid.sample(|x| Complex64::from_polar(1.0, k * alpha.dot(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Dense LU up to [`DENSE_NODE_LIMIT`] nodes, matrix-free GMRES above.
    Auto,
    Direct,
    Neumann,
    Gmres,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::Auto => "auto",
            SolveMethod::Direct => "direct",
            SolveMethod::Neumann => "neumann",
            SolveMethod::Gmres => "gmres",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual target for the iterative methods.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            tolerance: 1e-13,
            max_iterations: 500,
            restart: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub u: ComplexField,
    /// `||u + T u - u0|| / ||u0||`, recomputed from the operator.
    pub relative_residual: f64,
    /// 1-norm condition estimate of `I + T`; dense solves only.
    pub condition_estimate: Option<f64>,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// Solves `(I + T) u = u0` for the incident wave `e^{ik alpha.x}`.
pub fn solve_scattering(
    grid: &BallGrid,
    q: &ComplexField,
    k: f64,
    alpha: Vec3,
) -> Result<ScatteringSolution> {
    solve_scattering_with(grid, q, k, alpha, &SolveOptions::default())
}

pub fn solve_scattering_with(
    grid: &BallGrid,
    q: &ComplexField,
    k: f64,
    alpha: Vec3,
    options: &SolveOptions,
) -> Result<ScatteringSolution> {
    grid.check(q)?;
    let u0 = incident_field(grid, k, alpha);
    if q.values.iter().all(|&v| v == ZERO) {
        return Ok(ScatteringSolution {
            u: u0,
            relative_residual: 0.0,
            condition_estimate: Some(1.0),
            iterations: 0,
            method: options.method,
        });
    }
    let method = match options.method {
        SolveMethod::Auto if grid.len() <= DENSE_NODE_LIMIT => SolveMethod::Direct,
        SolveMethod::Auto => SolveMethod::Gmres,
        m => m,
    };
    match method {
        SolveMethod::Direct => solve_direct(grid, q, k, &u0),
        SolveMethod::Neumann => {
            let bound = operator_norm_bound(grid, q)?;
            if bound >= NEUMANN_BOUND_LIMIT {
                return Err(Error::InvalidArgument(format!(
                    "Neumann series needs an operator bound below {NEUMANN_BOUND_LIMIT}, got {bound}"
                )));
            }
            solve_iterative(grid, q, k, &u0, options, method)
        }
        SolveMethod::Gmres => solve_iterative(grid, q, k, &u0, options, method),
        SolveMethod::Auto => unreachable!(),
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn solve_direct(
    grid: &BallGrid,
    q: &ComplexField,
    k: f64,
    u0: &ComplexField,
) -> Result<ScatteringSolution> {
    let n = grid.len();
    let t = assemble_t(grid, q, k)?;
    let mut system = t.matrix.clone();
    for i in 0..n {
        system[(i, i)] += ONE;
    }
    let norm1 = (0..n)
        .map(|i| system.col_as_slice(i).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu = system.partial_piv_lu();
    let mut rhs = Mat::<Complex64>::from_fn(n, 1, |i, _| u0.values[i]);
    lu.solve_in_place(&mut rhs);
    let u = rhs.col_as_slice(0).to_vec();
    let condition = norm1 * inverse_norm1_estimate(&lu, n);
    if u.iter().any(|v| !v.is_finite()) || !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SolverFailure {
            reason: format!("I + T is singular or ill-conditioned (condition estimate {condition:e})"),
            condition_estimate: Some(condition),
        });
    }
    let tu = t.apply(&u);
    let residual: Vec<Complex64> = u
        .iter()
        .zip(&tu)
        .zip(&u0.values)
        .map(|((a, b), c)| a + b - c)
        .collect();
    let relative_residual = norm(&residual) / norm(&u0.values);
    if relative_residual > RESIDUAL_LIMIT {
        return Err(Error::SolverFailure {
            reason: format!("dense solve residual {relative_residual:e} exceeds {RESIDUAL_LIMIT:e}"),
            condition_estimate: Some(condition),
        });
    }
    Ok(ScatteringSolution {
        u: ComplexField {
            spec: grid.spec(),
            values: u,
        },
        relative_residual,
        condition_estimate: Some(condition),
        iterations: 1,
        method: SolveMethod::Direct,
    })
}

/// Hager's estimate of `||A^{-1}||_1` from an LU factorization.
pub(crate) fn inverse_norm1_estimate(lu: &impl Solve<Complex64>, n: usize) -> f64 {
    let mut x = Mat::<Complex64>::from_fn(n, 1, |_, _| Complex64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    for iter in 0..5 {
        let mut y = x.clone();
        lu.solve_in_place(&mut y);
        let y = y.col_as_slice(0);
        let y_norm: f64 = y.iter().map(|v| v.norm()).sum();
        if iter > 0 && y_norm <= estimate {
            break;
        }
        estimate = y_norm;
        let mut z = Mat::<Complex64>::from_fn(n, 1, |i, _| {
            let m = y[i].norm();
            if m > 0.0 {
                y[i] / m
            } else {
                ONE
            }
        });
        lu.solve_adjoint_in_place(&mut z);
        let z = z.col_as_slice(0);
        let (jmax, zmax) = z
            .iter()
            .map(|v| v.norm())
            .enumerate()
            .fold((0, 0.0), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
        let ztx: f64 = z
            .iter()
            .zip(x.col_as_slice(0))
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        if iter > 0 && zmax <= ztx {
            break;
        }
        x = Mat::<Complex64>::zeros(n, 1);
        x[(jmax, 0)] = ONE;
    }
    estimate
}

fn solve_iterative(
    grid: &BallGrid,
    q: &ComplexField,
    k: f64,
    u0: &ComplexField,
    options: &SolveOptions,
    method: SolveMethod,
) -> Result<ScatteringSolution> {
    // Small systems keep the dense kernel around; large ones apply it on the fly.
    let dense = (grid.len() <= DENSE_NODE_LIMIT).then(|| assemble_volume_kernel(grid, k));
    let apply_t = |u: &[Complex64]| -> Vec<Complex64> {
        let qu: Vec<Complex64> = u.iter().zip(&q.values).map(|(a, b)| a * b).collect();
        match &dense {
            Some(kmat) => matvec(kmat, &qu),
            None => apply_volume_kernel(grid, k, &qu),
        }
    };
    let (u, iterations) = match method {
        SolveMethod::Neumann => neumann(&apply_t, &u0.values, options)?,
        _ => gmres(
            |x| {
                let tx = apply_t(x);
                x.iter().zip(&tx).map(|(a, b)| a + b).collect()
            },
            &u0.values,
            options,
        )?,
    };
    let tu = apply_t(&u);
    let residual: Vec<Complex64> = u
        .iter()
        .zip(&tu)
        .zip(&u0.values)
        .map(|((a, b), c)| a + b - c)
        .collect();
    let relative_residual = norm(&residual) / norm(&u0.values);
    if relative_residual > RESIDUAL_LIMIT {
        return Err(Error::SolverFailure {
            reason: format!(
                "{} stopped at relative residual {relative_residual:e}",
                method.name()
            ),
            condition_estimate: None,
        });
    }
    Ok(ScatteringSolution {
        u: ComplexField {
            spec: grid.spec(),
            values: u,
        },
        relative_residual,
        condition_estimate: None,
        iterations,
        method,
    })
}

fn neumann(
    apply_t: &impl Fn(&[Complex64]) -> Vec<Complex64>,
    u0: &[Complex64],
    options: &SolveOptions,
) -> Result<(Vec<Complex64>, usize)> {
    let scale = norm(u0);
    let mut u = u0.to_vec();
    for iter in 1..=options.max_iterations {
        let tu = apply_t(&u);
        let next: Vec<Complex64> = u0.iter().zip(&tu).map(|(a, b)| a - b).collect();
        let change = norm(
            &next
                .iter()
                .zip(&u)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        u = next;
        if change <= options.tolerance * scale {
            return Ok((u, iter));
        }
    }
    Err(Error::SolverFailure {
        reason: format!(
            "Neumann series did not converge in {} iterations",
            options.max_iterations
        ),
        condition_estimate: None,
    })
}

/// Restarted GMRES with modified Gram-Schmidt and complex Givens rotations.
fn gmres(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    options: &SolveOptions,
) -> Result<(Vec<Complex64>, usize)> {
    let n = b.len();
    let b_norm = norm(b);
    let target = options.tolerance * b_norm;
    let m = options.restart.max(1);
    let mut x = vec![ZERO; n];
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        if beta <= target {
            return Ok((x, total));
        }
        if total >= options.max_iterations {
            return Err(Error::SolverFailure {
                reason: format!(
                    "GMRES reached {total} iterations at relative residual {:e}",
                    beta / b_norm
                ),
                condition_estimate: None,
            });
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut used = 0;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            total += 1;
            for (i, v) in basis.iter().enumerate() {
                let hij: Complex64 = v.iter().zip(&w).map(|(a, c)| a.conj() * c).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let w_norm = norm(&w);
            h[j + 1][j] = Complex64::new(w_norm, 0.0);
            for i in 0..j {
                let (a, c) = (h[i][j], h[i + 1][j]);
                h[i][j] = a * cs[i] + sn[i] * c;
                h[i + 1][j] = -sn[i].conj() * a + c * cs[i];
            }
            let (a, c) = (h[j][j], h[j + 1][j]);
            let rho = (a.norm_sqr() + c.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = ONE;
            } else {
                cs[j] = a.norm() / rho;
                sn[j] = (a / a.norm()) * c.conj() / rho;
            }
            h[j][j] = cs[j] * a + sn[j] * c;
            h[j + 1][j] = ZERO;
            let gj = g[j];
            g[j] = gj * cs[j];
            g[j + 1] = -sn[j].conj() * gj;
            used = j + 1;
            if g[j + 1].norm() <= target || w_norm == 0.0 || total >= options.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }
        let mut y = vec![ZERO; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for l in (i + 1)..used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (xk, vk) in x.iter_mut().zip(v) {
                *xk += yi * vk;
            }
        }
    }
}

/// `sum_j e^{-ik alpha'_i.x_j} density_j v_j` for every direction `alpha'_i`.
pub fn far_field_transform(
    grid: &BallGrid,
    density: &ComplexField,
    directions: &SphereGrid,
    k: f64,
) -> Result<PatternSamples> {
    grid.check(density)?;
    let weighted: Vec<(Vec3, Complex64)> = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(&density.values)
        .filter(|(_, d)| **d != ZERO)
        .map(|((&x, &v), &d)| (x, d * v))
        .collect();
    let values = directions
        .directions()
        .par_iter()
        .map(|&dir| {
            weighted
                .iter()
                .map(|&(x, wd)| Complex64::from_polar(1.0, -k * dir.dot(x)) * wd)
                .sum()
        })
        .collect();
    Ok(PatternSamples {
        order: directions.order(),
        values,
    })
}

/// Scattering amplitude `A(alpha'_i) = -(1/4pi) sum_j e^{-ik alpha'_i.x_j} q_j u_j v_j`.
pub fn scattering_amplitude(
    grid: &BallGrid,
    q: &ComplexField,
    u: &ComplexField,
    directions: &SphereGrid,
    k: f64,
) -> Result<PatternSamples> {
    grid.check(q)?;
    grid.check(u)?;
    let qu = ComplexField {
        spec: grid.spec(),
        values: q.values.iter().zip(&u.values).map(|(a, b)| a * b).collect(),
    };
    Ok(far_field_transform(grid, &qu, directions, k)?.scaled(-1.0 / (4.0 * PI)))
}
