//! Per-leg error indicators of the Q-step transport.

use super::{a_potential, b_potential, leg_l, leg_w, normalized, Leg, SchemeOutput};
use crate::error::Result;
use crate::manifold::{grad, VectorField};
use crate::measure::{otto_inner, otto_norm, solve2, GridMap};
use crate::weak::{TestBattery, Trig};

#[derive(Debug, Clone, PartialEq)]
pub struct LegDiagnostics {
    pub leg: usize,
    /// `‖W_σ(1) − L_σ(1)‖_{μ_{i,1}} / ‖∇σ‖_{μ_{i,0}}`.
    pub wl_gap: f64,
    /// `max ‖(AB − I)∇f‖ / ‖∇f‖` over the trigonometric battery modes.
    pub ab_gap: f64,
    /// Finite-difference `‖D_{∂u} W‖` along the leg's particle paths.
    pub jacobi_derivative: f64,
    /// `|‖∇σ_i‖ − 1|` on unit-norm data, accumulated from `t = 1`.
    pub norm_drift: f64,
    /// `max_x ‖dF_{i,1}⁻¹ − I‖`, the deviation of the transition matrices.
    pub transition_gap: f64,
    /// Cosine between `𝒱_Q(i/Q)` and `∇φ(i/Q)` in `L²(μ)`.
    pub velocity_cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeDiagnostics {
    pub legs: Vec<LegDiagnostics>,
}

impl SchemeDiagnostics {
    fn max(&self, f: impl Fn(&LegDiagnostics) -> f64) -> f64 {
        self.legs.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_wl_gap(&self) -> f64 {
        self.max(|l| l.wl_gap)
    }

    pub fn max_ab_gap(&self) -> f64 {
        self.max(|l| l.ab_gap)
    }

    pub fn max_jacobi_derivative(&self) -> f64 {
        self.max(|l| l.jacobi_derivative)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.max(|l| l.norm_drift)
    }

    pub fn max_transition_gap(&self) -> f64 {
        self.max(|l| l.transition_gap)
    }
}

/// Lagrangian value of `W_σ(u)` at the particle `F_{i,u}(x)`, for every
/// grid node `x`. In flat charts `dexp_{u∇φ}` is the identity, so this is
/// `∇σ(x)` for every `u`.
fn lagrangian_w(sigma_grad: &VectorField, _u: f64) -> VectorField {
    sigma_grad.clone()
}

pub(super) fn ab_gap(leg: &Leg) -> Result<f64> {
    let grid = leg.start_density().grid();
    let end = leg.end_density();
    let battery = TestBattery::standard(grid);
    let mut worst: f64 = 0.0;
    for f in battery.functions().iter().filter(|f| f.power == 0 && f.mode != Trig::Constant) {
        let p = normalized(f.mode.sample(grid), end)?;
        let g = grad(&p);
        let n = otto_norm(end, &g)?;
        if n == 0.0 {
            continue;
        }
        let ab = a_potential(leg, &b_potential(leg, &p)?)?;
        worst = worst.max(otto_norm(end, &grad(&ab).sub(&g))? / n);
    }
    Ok(worst)
}

fn transition_gap(leg: &Leg) -> f64 {
    let map = &leg.end().map;
    (0..map.grid().len())
        .map(|k| {
            let j = map.eval_node(k).1;
            let c0 = solve2(j, [1.0, 0.0]);
            let c1 = solve2(j, [0.0, 1.0]);
            let m = [[c0[0] - 1.0, c1[0]], [c0[1], c1[1] - 1.0]];
            (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Builds the per-leg table for a finished run.
pub fn scheme_diagnostics(output: &SchemeOutput, legs: &[Leg]) -> Result<SchemeDiagnostics> {
    let mut rows = Vec::with_capacity(legs.len());
    for leg in legs {
        let i = leg.index();
        let sigma = &output.leg_potentials()[i];
        let start = leg.start_density();
        let g = grad(sigma);
        let n0 = otto_norm(start, &g)?;

        let wl_gap = if n0 == 0.0 {
            0.0
        } else {
            let w = leg_w(leg, sigma, 1.0)?;
            let l = leg_l(leg, sigma, 1.0)?;
            otto_norm(leg.end_density(), &w.sub(&l))? / n0
        };

        let du = 1.0 / 3.0;
        let jacobi_derivative = lagrangian_w(&g, 2.0 * du).sub(&lagrangian_w(&g, du)).max_norm() / du;

        let velocity = grad(leg.potential());
        let vn = otto_norm(start, &velocity)?;
        let velocity_cosine = if vn == 0.0 || n0 == 0.0 {
            0.0
        } else {
            otto_inner(start, &g, &velocity)? / (vn * n0)
        };

        rows.push(LegDiagnostics {
            leg: i,
            wl_gap,
            ab_gap: ab_gap(leg)?,
            jacobi_derivative,
            norm_drift: if output.input_norm() == 0.0 { 0.0 } else { (n0 - 1.0).abs() },
            transition_gap: transition_gap(leg),
            velocity_cosine,
        });
    }
    Ok(SchemeDiagnostics { legs: rows })
}
