//! Weighted Poisson solves `∇·(ρ∇u) = g` and the `L²(μ)`-orthogonal
//! projection of vector fields onto gradients.
//!
//! The discrete operator `u ↦ -div(ρ grad u)` is symmetric positive
//! semidefinite with the kernel of the spectral gradient as null space.
//! It is solved by conjugate gradients preconditioned with the inverse of
//! the unweighted Laplacian scaled by the mean density.

use crate::error::{Error, Result};
use crate::manifold::{div, grad, ScalarField, VectorField};
use crate::measure::{integrate, Density};

#[derive(Debug, Clone)]
pub struct SolverOptions<'a> {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: Option<&'a ScalarField>,
}

impl Default for SolverOptions<'_> {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            initial_guess: None,
        }
    }
}

const COMPATIBILITY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn neg_weighted_laplacian(rho: &Density, u: &[f64]) -> Vec<f64> {
    let grid = rho.grid();
    let gu = grad(&ScalarField::from_raw(grid, u.to_vec()));
    div(&gu.weighted(rho.field())).into_values().into_iter().map(|v| -v).collect()
}

fn discrete_norm(v: &[f64], weight: f64) -> f64 {
    (dot(v, v) * weight).sqrt()
}

pub fn solve_weighted_poisson(rho: &Density, g: &ScalarField) -> Result<ScalarField> {
    solve_weighted_poisson_with(rho, g, &SolverOptions::default())
}

/// Returns `u` with `∇·(ρ∇u) = g` and `∫ u dμ = 0`.
pub fn solve_weighted_poisson_with(rho: &Density, g: &ScalarField, opts: &SolverOptions) -> Result<ScalarField> {
    let grid = rho.grid();
    grid.check_same(g.grid())?;
    let integral = g.integral();
    if integral.abs() > COMPATIBILITY_TOL {
        return Err(Error::IncompatibleRhs { integral });
    }
    let sp = grid.spectral();
    let b: Vec<f64> = sp.remove_kernel(g.values()).into_iter().map(|v| -v).collect();
    let b_norm = dot(&b, &b).sqrt();
    let scale = 1.0 / grid.total_volume();

    let mut x = match opts.initial_guess {
        Some(u0) => {
            grid.check_same(u0.grid())?;
            u0.values().to_vec()
        }
        None => vec![0.0; grid.len()],
    };

    if b_norm > 0.0 || opts.initial_guess.is_some() {
        let ax = neg_weighted_laplacian(rho, &x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let target = opts.tol * b_norm;
        let mut z = sp.inverse_neg_laplacian(&r, scale);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut iter = 0;
        while dot(&r, &r).sqrt() > target {
            if iter == opts.max_iter || rz <= 0.0 {
                return Err(Error::SolverStagnation {
                    iterations: iter,
                    residual: dot(&r, &r).sqrt() / b_norm.max(f64::MIN_POSITIVE),
                });
            }
            let ap = neg_weighted_laplacian(rho, &p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::SolverStagnation {
                    iterations: iter,
                    residual: dot(&r, &r).sqrt() / b_norm.max(f64::MIN_POSITIVE),
                });
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = sp.inverse_neg_laplacian(&r, scale);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
            iter += 1;
        }
    }

    let weight = grid.cell_volume();
    let true_res: Vec<f64> = neg_weighted_laplacian(rho, &x)
        .iter()
        .zip(&b)
        .map(|(a, bi)| a - bi)
        .collect();
    let res = discrete_norm(&true_res, weight);
    if res > RESIDUAL_TOL * discrete_norm(&b, weight).max(1.0) {
        return Err(Error::SolverStagnation {
            iterations: opts.max_iter,
            residual: res,
        });
    }

    let u = ScalarField::from_raw(grid, x);
    let mean = integrate(&u, rho)?;
    Ok(u.shifted(-mean))
}

/// Orthogonal projection of `w` onto gradient fields in `L²(μ)`.
///
/// Returns `(∇p, p)` with `∇·(ρ∇p) = ∇·(ρ w)` and `∫ p dμ = 0`.
pub fn project_to_gradients(mu: &Density, w: &VectorField) -> Result<(VectorField, ScalarField)> {
    project_to_gradients_with(mu, w, &SolverOptions::default())
}

pub fn project_to_gradients_with(
    mu: &Density,
    w: &VectorField,
    opts: &SolverOptions,
) -> Result<(VectorField, ScalarField)> {
    mu.grid().check_same(w.grid())?;
    let rhs = div(&w.weighted(mu.field()));
    let p = solve_weighted_poisson_with(mu, &rhs, opts)?;
    Ok((grad(&p), p))
}
