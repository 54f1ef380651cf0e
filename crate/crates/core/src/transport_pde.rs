//! Smooth parallel transport of gradient fields along a geodesic.
//!
//! `V_η` is parallel along the path when
//! `∇·(ρ (∇∂η/∂t + Hess η ∇φ)) = 0`, i.e. `∂η/∂t = ζ` with
//! `∇ζ = -Π_ρ(Hess η ∇φ)`. Time stepping is classical RK4 on the path
//! samples, with the half-step states regenerated from the path.

use serde::{Deserialize, Serialize};

use crate::elliptic::{project_to_gradients_with, SolverOptions};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicPath;
use crate::manifold::{grad, hess, ScalarField, VectorField};
use crate::measure::{integrate, otto_inner, Density};

/// Relative drift of `‖∇η‖²_{μ_t}` beyond which the solve is rejected.
pub const MAX_PAIRING_DRIFT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Prescribe `η(0)` and integrate to `t = 1`.
    Forward,
    /// Prescribe `η(1)` and integrate back to `t = 0`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    Zero,
    /// Start each elliptic solve from the previous stage's `ζ`.
    Previous,
}

#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    pub initial_guess: InitialGuess,
    pub max_drift: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            initial_guess: InitialGuess::Previous,
            max_drift: MAX_PAIRING_DRIFT,
        }
    }
}

/// `η(t_j)` for every path sample, each with `∫ η dμ_{t_j} = 0`.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    eta: Vec<ScalarField>,
    direction: Direction,
    dt: f64,
    pairing_drift: f64,
}

impl TransportSolution {
    pub fn steps(&self) -> usize {
        self.eta.len() - 1
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn eta(&self, j: usize) -> &ScalarField {
        &self.eta[j]
    }

    pub fn gradient(&self, j: usize) -> VectorField {
        grad(&self.eta[j])
    }

    /// Largest relative deviation of `‖∇η(t_j)‖²` from its prescribed value.
    pub fn pairing_drift(&self) -> f64 {
        self.pairing_drift
    }
}

fn normalized(eta: ScalarField, mu: &Density) -> Result<ScalarField> {
    let mean = integrate(&eta, mu)?;
    Ok(eta.shifted(-mean))
}

/// `ζ` with `∇·(ρ∇ζ) = -∇·(ρ Hess η ∇φ)`.
fn rate(mu: &Density, phi: &ScalarField, eta: &ScalarField, guess: Option<&ScalarField>) -> Result<ScalarField> {
    let w = hess(eta).contract(&grad(phi));
    let neg = guess.map(|g| g.scaled(-1.0));
    let opts = SolverOptions {
        initial_guess: neg.as_ref(),
        ..SolverOptions::default()
    };
    let (_, p) = project_to_gradients_with(mu, &w, &opts)?;
    Ok(p.scaled(-1.0))
}

pub fn solve_parallel_pde(path: &GeodesicPath, eta_end: &ScalarField, direction: Direction) -> Result<TransportSolution> {
    solve_parallel_pde_with(path, eta_end, direction, &TransportOptions::default())
}

pub fn solve_parallel_pde_with(
    path: &GeodesicPath,
    eta_end: &ScalarField,
    direction: Direction,
    opts: &TransportOptions,
) -> Result<TransportSolution> {
    path.grid().check_same(eta_end.grid())?;
    let steps = path.steps();
    let dt = path.dt();
    let (start, sign) = match direction {
        Direction::Forward => (0, 1.0),
        Direction::Backward => (steps, -1.0),
    };
    let mut eta: Vec<Option<ScalarField>> = vec![None; steps + 1];
    let first = normalized(eta_end.clone(), path.density(start))?;
    let reference = otto_inner(path.density(start), &grad(&first), &grad(&first))?;
    eta[start] = Some(first);

    let mut guess: Option<ScalarField> = None;
    let mut stage = |mu: &Density, phi: &ScalarField, e: &ScalarField| -> Result<ScalarField> {
        let g = match opts.initial_guess {
            InitialGuess::Previous => guess.as_ref(),
            InitialGuess::Zero => None,
        };
        let z = rate(mu, phi, e, g)?;
        guess = Some(z.clone());
        Ok(z)
    };

    let mut drift: f64 = 0.0;
    for n in 0..steps {
        let (j0, j1) = match direction {
            Direction::Forward => (n, n + 1),
            Direction::Backward => (steps - n, steps - n - 1),
        };
        let mid = path.midpoint_state(j0.min(j1))?;
        let h = sign * dt;
        let e0 = eta[j0].as_ref().expect("previous step filled");
        let k1 = stage(path.density(j0), path.potential(j0), e0)?;
        let k2 = stage(&mid.density, &mid.potential, &e0.add_scaled(0.5 * h, &k1))?;
        let k3 = stage(&mid.density, &mid.potential, &e0.add_scaled(0.5 * h, &k2))?;
        let k4 = stage(path.density(j1), path.potential(j1), &e0.add_scaled(h, &k3))?;
        let incr = k1.add_scaled(2.0, &k2).add_scaled(2.0, &k3).add_scaled(1.0, &k4);
        let next = if incr.max_abs() == 0.0 && path.density(j1) == path.density(j0) {
            // stationary step: avoid re-normalization round-off
            e0.clone()
        } else {
            normalized(e0.add_scaled(h / 6.0, &incr), path.density(j1))?
        };

        let g = grad(&next);
        let pairing = otto_inner(path.density(j1), &g, &g)?;
        if reference > 0.0 {
            drift = drift.max((pairing - reference).abs() / reference);
        } else {
            drift = drift.max(pairing);
        }
        if drift > opts.max_drift {
            return Err(Error::ResolutionInsufficient { drift });
        }
        eta[j1] = Some(next);
    }

    Ok(TransportSolution {
        eta: eta.into_iter().map(|e| e.expect("all steps filled")).collect(),
        direction,
        dt,
        pairing_drift: drift,
    })
}

/// `j ↦ ∫ ⟨∇η_a, ∇η_b⟩ dμ_{t_j}`.
pub fn pairing_series(path: &GeodesicPath, a: &TransportSolution, b: &TransportSolution) -> Result<Vec<f64>> {
    if a.steps() != path.steps() || b.steps() != path.steps() {
        return Err(Error::InvalidArgument("solutions not sampled on the path's times".into()));
    }
    (0..=path.steps())
        .map(|j| otto_inner(path.density(j), &a.gradient(j), &b.gradient(j)))
        .collect()
}

/// Largest relative deviation of a series from its first value (absolute
/// when the first value is zero).
pub fn relative_drift(series: &[f64]) -> f64 {
    let first = series.first().copied().unwrap_or(0.0);
    let scale = if first.abs() > 0.0 { first.abs() } else { 1.0 };
    series.iter().map(|v| (v - first).abs() / scale).fold(0.0, f64::max)
}

/// Residual of `d/dt ∫⟨∇f,∇η⟩dμ_t = ∫⟨∇∂f/∂t, ∇η⟩dμ_t + ∫Hess f(∇η,∇φ)dμ_t`
/// over the interior samples, with `f` given at every path time and both
/// time derivatives taken by central differences.
pub fn pairing_derivative_check(path: &GeodesicPath, sol: &TransportSolution, f: &[ScalarField]) -> Result<f64> {
    let steps = path.steps();
    if f.len() != steps + 1 || sol.steps() != steps {
        return Err(Error::InvalidArgument("f and η must be sampled at every path time".into()));
    }
    let dt = path.dt();
    let pair = |j: usize| otto_inner(path.density(j), &grad(&f[j]), &sol.gradient(j));
    let mut worst: f64 = 0.0;
    for j in 1..steps {
        let lhs = (pair(j + 1)? - pair(j - 1)?) / (2.0 * dt);
        let df = f[j + 1].add_scaled(-1.0, &f[j - 1]).scaled(0.5 / dt);
        let g_eta = sol.gradient(j);
        let first = otto_inner(path.density(j), &grad(&df), &g_eta)?;
        let second = integrate(&hess(&f[j]).apply(&g_eta, &path.velocity(j)), path.density(j))?;
        worst = worst.max((lhs - first - second).abs());
    }
    Ok(worst)
}
