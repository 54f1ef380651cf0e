//! The weak form of parallel transport, checked against a battery of test
//! functions `f(t, x) = t^a T(x)`:
//!
//! `∫⟨∇f(1),V1⟩dμ1 − ∫⟨∇f(0),V0⟩dμ0 = ∫₀¹∫(⟨∇∂f/∂t,V⟩ + Hess f(V,∇φ)) dμ_t dt`.

use crate::error::{Error, Result};
use crate::geodesic::GeodesicPath;
use crate::manifold::{grad, hess, GridKind, Grid, ScalarField, VectorField};
use crate::measure::{integrate, otto_inner};
use serde::{Deserialize, Serialize};

/// A real trigonometric mode on the flat grid, `cos(k·x)` or `sin(k·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Constant,
    Cos([i32; 2]),
    Sin([i32; 2]),
}

impl Trig {
    pub fn sample(&self, grid: &Grid) -> ScalarField {
        match *self {
            Trig::Constant => ScalarField::constant(grid, 1.0),
            Trig::Cos(k) => grid.sample(|x| (k[0] as f64 * x[0] + k[1] as f64 * x[1]).cos()),
            Trig::Sin(k) => grid.sample(|x| (k[0] as f64 * x[0] + k[1] as f64 * x[1]).sin()),
        }
    }
}

/// `f(t, x) = t^power · mode(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestFunction {
    pub power: u32,
    pub mode: Trig,
}

impl TestFunction {
    fn time_factor(&self, t: f64) -> f64 {
        t.powi(self.power as i32)
    }

    fn time_factor_derivative(&self, t: f64) -> f64 {
        match self.power {
            0 => 0.0,
            p => p as f64 * t.powi(p as i32 - 1),
        }
    }

    pub fn value(&self, grid: &Grid, t: f64) -> ScalarField {
        self.mode.sample(grid).scaled(self.time_factor(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestBattery {
    functions: Vec<TestFunction>,
}

impl TestBattery {
    pub fn new(functions: Vec<TestFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidArgument("empty test battery".into()));
        }
        Ok(Self { functions })
    }

    /// Every mode combined with `t^0, t^1, t^2`.
    pub fn from_modes(modes: &[Trig]) -> Result<Self> {
        let functions = (0..3)
            .flat_map(|power| modes.iter().map(move |&mode| TestFunction { power, mode }))
            .collect();
        Self::new(functions)
    }

    /// 21 modes per grid, 63 functions.
    ///
    /// S¹: the constant and `cos kx, sin kx` for `k ≤ 10`. T²: the
    /// constant, axis modes up to 3, and the diagonals `x ± y`, `2x + y`,
    /// `x + 2y`.
    pub fn standard(grid: &Grid) -> Self {
        let mut ks: Vec<[i32; 2]> = Vec::new();
        match grid.kind() {
            GridKind::Circle => ks.extend((1..=10).map(|k| [k, 0])),
            GridKind::Torus => {
                ks.extend((1..=3).flat_map(|k| [[k, 0], [0, k]]));
                ks.extend([[1, 1], [1, -1], [2, 1], [1, 2]]);
            }
        }
        let mut modes = vec![Trig::Constant];
        for k in ks {
            modes.push(Trig::Cos(k));
            modes.push(Trig::Sin(k));
        }
        Self::from_modes(&modes).expect("non-empty")
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// A vector field sampled at a subset of path times: `(j, V(t_j))` pairs
/// with strictly increasing `j`, starting at 0 and ending at `T`.
pub type TimeSamples = [(usize, VectorField)];

/// `|LHS − RHS|` of the weak identity for every battery element, with
/// time integrals by the trapezoid rule over the given samples.
pub fn weak_residuals(
    path: &GeodesicPath,
    v: &TimeSamples,
    v0: &VectorField,
    v1: &VectorField,
    battery: &TestBattery,
) -> Result<Vec<f64>> {
    let grid = path.grid();
    let steps = path.steps();
    grid.check_same(v0.grid())?;
    grid.check_same(v1.grid())?;
    match (v.first(), v.last()) {
        (Some((0, _)), Some((last, _))) if *last == steps => {}
        _ => return Err(Error::InvalidArgument("samples must span t = 0 to t = 1".into())),
    }
    if v.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("sample indices must increase".into()));
    }
    for (_, f) in v {
        grid.check_same(f.grid())?;
    }

    let mut modes: Vec<Trig> = Vec::new();
    for f in battery.functions() {
        if !modes.contains(&f.mode) {
            modes.push(f.mode);
        }
    }
    let velocities: Vec<VectorField> = v.iter().map(|(j, _)| path.velocity(*j)).collect();

    // Per mode: endpoint pairings and the per-sample integrands
    // P(t) = ∫⟨∇T, V⟩dμ_t and H(t) = ∫Hess T(V, ∇φ)dμ_t.
    struct ModeData {
        end: f64,
        start: f64,
        p: Vec<f64>,
        h: Vec<f64>,
    }
    let data = modes
        .iter()
        .map(|mode| {
            let t_field = mode.sample(grid);
            let g = grad(&t_field);
            let hs = hess(&t_field);
            let end = otto_inner(path.density(steps), &g, v1)?;
            let start = otto_inner(path.density(0), &g, v0)?;
            let mut p = Vec::with_capacity(v.len());
            let mut h = Vec::with_capacity(v.len());
            for ((j, vf), phi_grad) in v.iter().zip(&velocities) {
                p.push(otto_inner(path.density(*j), &g, vf)?);
                h.push(integrate(&hs.apply(vf, phi_grad), path.density(*j))?);
            }
            Ok(ModeData { end, start, p, h })
        })
        .collect::<Result<Vec<_>>>()?;

    let times: Vec<f64> = v.iter().map(|(j, _)| path.time(*j)).collect();
    let residuals = battery
        .functions()
        .iter()
        .map(|f| {
            let d = &data[modes.iter().position(|m| *m == f.mode).expect("collected")];
            let lhs = f.time_factor(1.0) * d.end - f.time_factor(0.0) * d.start;
            let integrand: Vec<f64> = times
                .iter()
                .enumerate()
                .map(|(i, &t)| f.time_factor_derivative(t) * d.p[i] + f.time_factor(t) * d.h[i])
                .collect();
            let rhs: f64 = times
                .windows(2)
                .zip(integrand.windows(2))
                .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
                .sum();
            (lhs - rhs).abs()
        })
        .collect();
    Ok(residuals)
}

/// Largest weak-form residual over the battery.
pub fn weak_residual(
    path: &GeodesicPath,
    v: &TimeSamples,
    v0: &VectorField,
    v1: &VectorField,
    battery: &TestBattery,
) -> Result<f64> {
    Ok(weak_residuals(path, v, v0, v1, battery)?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::generate_geodesic;
    use crate::measure::Density;
    use crate::transport_pde::{solve_parallel_pde, Direction, TransportSolution};
    use std::f64::consts::PI;

    fn s1_path(n: usize, steps: usize, amp: f64) -> GeodesicPath {
        let grid = Grid::circle(n).unwrap();
        let mu0 = Density::new(grid.sample(|x| (1.0 + 0.3 * x[0].cos()) / (2.0 * PI))).unwrap();
        generate_geodesic(&mu0, &grid.sample(|x| amp * x[0].sin()), steps).unwrap()
    }

    fn all_samples(sol: &TransportSolution) -> Vec<(usize, VectorField)> {
        (0..=sol.steps()).map(|j| (j, sol.gradient(j))).collect()
    }

    #[test]
    fn standard_battery_sizes() {
        assert_eq!(TestBattery::standard(&Grid::circle(32).unwrap()).len(), 63);
        assert_eq!(TestBattery::standard(&Grid::torus(32).unwrap()).len(), 63);
        let b = TestBattery::standard(&Grid::circle(32).unwrap());
        assert!(b.functions().iter().any(|f| f.power == 1 && f.mode == Trig::Cos([1, 0])));
        assert!(TestBattery::new(vec![]).is_err());
    }

    #[test]
    fn zero_fields_give_zero() {
        let path = s1_path(64, 10, 0.2);
        let z = VectorField::zeros(path.grid());
        let v: Vec<_> = (0..=10).map(|j| (j, z.clone())).collect();
        let r = weak_residual(&path, &v, &z, &z, &TestBattery::standard(path.grid())).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn constant_field_on_constant_path() {
        let path = s1_path(64, 10, 0.0);
        let g = grad(&path.grid().sample(|x| x[0].cos()));
        let v: Vec<_> = (0..=10).map(|j| (j, g.clone())).collect();
        let r = weak_residual(&path, &v, &g, &g, &TestBattery::standard(path.grid())).unwrap();
        assert!(r <= 1e-10, "{r}");
    }

    #[test]
    fn pde_solution_is_weak_solution() {
        let path = s1_path(256, 100, 0.2);
        let sol = solve_parallel_pde(&path, &path.grid().sample(|x| (2.0 * x[0]).cos()), Direction::Backward).unwrap();
        let battery = TestBattery::standard(path.grid());
        let r = weak_residual(&path, &all_samples(&sol), &sol.gradient(0), &sol.gradient(100), &battery).unwrap();
        assert!(r <= 1e-3, "{r}");
    }

    #[test]
    fn residual_converges_under_refinement() {
        let run = |n, steps| {
            let path = s1_path(n, steps, 0.2);
            let sol =
                solve_parallel_pde(&path, &path.grid().sample(|x| (2.0 * x[0]).cos()), Direction::Backward).unwrap();
            let battery = TestBattery::standard(path.grid());
            weak_residual(&path, &all_samples(&sol), &sol.gradient(0), &sol.gradient(steps), &battery).unwrap()
        };
        let (a, b) = (run(128, 20), run(256, 40));
        assert!(b <= a / 2.0, "{a} {b}");
    }

    #[test]
    fn corrupted_endpoint_is_detected() {
        let path = s1_path(128, 40, 0.2);
        let sol = solve_parallel_pde(&path, &path.grid().sample(|x| (2.0 * x[0]).cos()), Direction::Backward).unwrap();
        let battery = TestBattery::standard(path.grid());
        let v = all_samples(&sol);
        let base = weak_residuals(&path, &v, &sol.gradient(0), &sol.gradient(40), &battery).unwrap();
        let bump = grad(&path.grid().sample(|x| x[0].sin()));
        let bad = weak_residuals(&path, &v, &sol.gradient(0), &sol.gradient(40).add_scaled(1.0, &bump), &battery).unwrap();
        let mut worst_shift: f64 = 0.0;
        for f in battery.functions() {
            let g = grad(&f.value(path.grid(), 1.0));
            worst_shift = worst_shift.max(otto_inner(path.density(40), &g, &bump).unwrap().abs());
        }
        let before = base.iter().cloned().fold(0.0, f64::max);
        let after = bad.iter().cloned().fold(0.0, f64::max);
        assert!(after - before >= 0.9 * worst_shift, "{before} {after} {worst_shift}");
        assert!(after >= 1e-2);
    }

    #[test]
    fn rejects_samples_not_spanning_path() {
        let path = s1_path(64, 10, 0.2);
        let z = VectorField::zeros(path.grid());
        let v: Vec<_> = (0..10).map(|j| (j, z.clone())).collect();
        assert!(weak_residual(&path, &v, &z, &z, &TestBattery::standard(path.grid())).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn residual_is_sublinear(
                a in prop::collection::vec(-1.0f64..1.0, 3),
                b in prop::collection::vec(-1.0f64..1.0, 3),
            ) {
                let path = s1_path(32, 6, 0.2);
                let grid = path.grid().clone();
                let field = |c: &[f64], j: usize| {
                    let s = j as f64 / 6.0;
                    grad(&grid.sample(|x| c[0] * x[0].cos() + c[1] * s * (2.0 * x[0]).sin() + c[2] * (3.0 * x[0]).cos()))
                };
                let va: Vec<_> = (0..=6).map(|j| (j, field(&a, j))).collect();
                let vb: Vec<_> = (0..=6).map(|j| (j, field(&b, j))).collect();
                let vs: Vec<_> = va.iter().zip(&vb).map(|((j, x), (_, y))| (*j, x.add_scaled(1.0, y))).collect();
                let battery = TestBattery::standard(&grid);
                let ra = weak_residual(&path, &va, &va[0].1, &va[6].1, &battery).unwrap();
                let rb = weak_residual(&path, &vb, &vb[0].1, &vb[6].1, &battery).unwrap();
                let rs = weak_residual(&path, &vs, &vs[0].1, &vs[6].1, &battery).unwrap();
                prop_assert!(rs <= ra + rb + 1e-12);
            }
        }
    }
}
