//! Q-step approximate parallel transport along a geodesic of densities.
//!
//! The path is cut into `Q` legs. On leg `i` the map
//! `F_{i,u}(x) = exp_x(u ∇φ_i)` with `φ_i = φ(i/Q) / Q` carries `μ_{i,0}`
//! to `μ_{i,u}`. A gradient `∇σ` at the start of a leg is carried along by
//! `W_σ(u) = dexp(∇σ) ∘ F_{i,u}⁻¹` and projected back onto gradients,
//! `L_σ(u) = Π W_σ(u)`. The leg endpoint map is `A(∇σ) = L_σ(1)`, with
//! approximate inverse `B(∇f) = ∇(f ∘ F_{i,1})`. The transport of `∇η1`
//! inverts `A` leg by leg from `t = 1` back to `t = 0`.
//!
//! Gradient fields are handled through their potentials internally.

mod diagnostics;

pub use diagnostics::{scheme_diagnostics, LegDiagnostics, SchemeDiagnostics};

use std::borrow::Cow;

use crate::elliptic::{project_to_gradients_with, SolverOptions};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicPath;
use crate::manifold::{canonical_potential, dealias, grad, potential_of, ScalarField, VectorField};
use crate::measure::{
    det, integrate, otto_norm, pushforward_with_inverse, Density, DisplacementMap, GridMap, InverseMap,
};
use crate::transport_pde::TransportSolution;

/// Smallest admissible `det dF_{i,u}` on a leg.
pub const MIN_LEG_JACOBIAN: f64 = 0.5;
/// Largest admissible gap between a leg's end density and the path sample.
pub const MAX_ENDPOINT_MISMATCH: f64 = 1e-6;
/// Interior leg parameters at which the transported field is reported.
pub const OUTPUT_U: [f64; 3] = [0.0, 1.0 / 3.0, 2.0 / 3.0];

/// State of a leg at a fixed `u > 0`.
#[derive(Debug, Clone)]
pub struct LegSample {
    u: f64,
    map: DisplacementMap,
    inverse: InverseMap,
    density: Density,
}

impl LegSample {
    pub fn u(&self) -> f64 {
        self.u
    }

    /// `F_{i,u}`.
    pub fn map(&self) -> &DisplacementMap {
        &self.map
    }

    pub fn inverse(&self) -> &InverseMap {
        &self.inverse
    }

    /// `μ_{i,u}`.
    pub fn density(&self) -> &Density {
        &self.density
    }
}

/// One segment `[i/Q, (i+1)/Q]` of the subdivided path.
#[derive(Debug, Clone)]
pub struct Leg {
    index: usize,
    count: usize,
    potential: ScalarField,
    start: Density,
    /// `u = 1/3, 2/3, 1`.
    samples: Vec<LegSample>,
    endpoint_mismatch: f64,
    /// `φ_i(0) ≡ 0`: every map on the leg is the identity.
    stationary: bool,
}

impl Leg {
    fn build(path: &GeodesicPath, index: usize, count: usize) -> Result<Self> {
        let stride = path.steps() / count;
        let start = path.density(index * stride).clone();
        let potential = path.potential(index * stride).scaled(1.0 / count as f64);
        let samples = [1.0 / 3.0, 2.0 / 3.0, 1.0]
            .iter()
            .map(|&u| sample_leg(&potential, &start, u))
            .collect::<Result<Vec<_>>>()?;
        let end = &samples[2].density;
        let endpoint_mismatch = end.field().max_abs_diff(path.density((index + 1) * stride).field());
        let stationary = potential.max_abs() == 0.0;
        Ok(Self {
            index,
            count,
            potential,
            start,
            samples,
            endpoint_mismatch,
            stationary,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// `Q`.
    pub fn count(&self) -> usize {
        self.count
    }

    /// `φ_i(0)`.
    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    /// True when the leg does not move, so `A`, `B` and `L` are identities.
    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    /// `μ_{i,0}`.
    pub fn start_density(&self) -> &Density {
        &self.start
    }

    /// `μ_{i,1}`.
    pub fn end_density(&self) -> &Density {
        &self.samples[2].density
    }

    pub fn end(&self) -> &LegSample {
        &self.samples[2]
    }

    /// `max |μ_{i,1} − μ_{(i+1)/Q}|` against the path sample.
    pub fn endpoint_mismatch(&self) -> f64 {
        self.endpoint_mismatch
    }

    /// Smallest `det dF_{i,u}` over the stored samples.
    pub fn min_jacobian(&self) -> f64 {
        self.samples.iter().map(|s| s.map.min_jacobian()).fold(f64::INFINITY, f64::min)
    }

    /// The state at `u ∈ (0, 1]`; stored samples are borrowed, others built.
    pub fn sample(&self, u: f64) -> Result<Cow<'_, LegSample>> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidArgument(format!("leg parameter {u} outside (0, 1]")));
        }
        match self.samples.iter().find(|s| (s.u - u).abs() < 1e-14) {
            Some(s) => Ok(Cow::Borrowed(s)),
            None => Ok(Cow::Owned(sample_leg(&self.potential, &self.start, u)?)),
        }
    }
}

fn sample_leg(potential: &ScalarField, start: &Density, u: f64) -> Result<LegSample> {
    let map = DisplacementMap::from_potential(potential, u);
    let jac = (0..map.grid().len())
        .map(|k| det(map.eval_node(k).1))
        .fold(f64::INFINITY, f64::min);
    if jac < MIN_LEG_JACOBIAN {
        return Err(Error::NotDiffeomorphic { min_jacobian: jac });
    }
    let (density, inverse) = pushforward_with_inverse(start, &map)?;
    Ok(LegSample { u, map, inverse, density })
}

/// Cuts the path into `Q` legs. `Q = 1` is allowed and gives a single leg.
pub fn build_legs(path: &GeodesicPath, q: usize) -> Result<Vec<Leg>> {
    if q == 0 || path.steps() % q != 0 {
        return Err(Error::Divisibility {
            samples: path.steps(),
            q,
        });
    }
    let legs = (0..q).map(|i| Leg::build(path, i, q)).collect::<Result<Vec<_>>>()?;
    let worst = legs.iter().map(|l| l.endpoint_mismatch).fold(0.0, f64::max);
    if worst > MAX_ENDPOINT_MISMATCH {
        return Err(Error::ResolutionInsufficient { drift: worst });
    }
    Ok(legs)
}

fn normalized(p: ScalarField, mu: &Density) -> Result<ScalarField> {
    let mean = integrate(&p, mu)?;
    Ok(p.shifted(-mean))
}

/// `W_σ(u)` on the grid of `μ_{i,u}`. In the flat charts `dexp` is the
/// identity, so this is `∇σ ∘ F_{i,u}⁻¹`.
pub fn leg_w(leg: &Leg, sigma: &ScalarField, u: f64) -> Result<VectorField> {
    leg.start.grid().check_same(sigma.grid())?;
    if u == 0.0 {
        return Ok(grad(sigma));
    }
    Ok(leg.sample(u)?.inverse.pull_vector(&grad(sigma)))
}

/// Potential of `L_σ(u)`, normalized on `μ_{i,u}`.
pub fn leg_l_potential(leg: &Leg, sigma: &ScalarField, u: f64) -> Result<ScalarField> {
    if u == 0.0 || leg.stationary {
        return normalized(sigma.clone(), &leg.start);
    }
    let s = leg.sample(u)?;
    let w = s.inverse.pull_vector(&grad(sigma));
    let guess = s.inverse.pull(sigma);
    let opts = SolverOptions {
        initial_guess: Some(&guess),
        ..SolverOptions::default()
    };
    let (_, p) = project_to_gradients_with(&s.density, &w, &opts)?;
    Ok(p)
}

/// `L_σ(u) = Π_{μ_{i,u}} W_σ(u)`.
pub fn leg_l(leg: &Leg, sigma: &ScalarField, u: f64) -> Result<VectorField> {
    Ok(grad(&leg_l_potential(leg, sigma, u)?))
}

fn a_potential(leg: &Leg, sigma: &ScalarField) -> Result<ScalarField> {
    leg_l_potential(leg, sigma, 1.0)
}

fn b_potential(leg: &Leg, f: &ScalarField) -> Result<ScalarField> {
    if leg.stationary {
        return normalized(f.clone(), &leg.start);
    }
    // kernel modes are invisible to ∇f but not to f ∘ F
    normalized(dealias(&leg.end().map.compose(&canonical_potential(f))), &leg.start)
}

/// `A_i(∇σ) = L_σ(1)`.
pub fn leg_a(leg: &Leg, grad_sigma: &VectorField) -> Result<VectorField> {
    Ok(grad(&a_potential(leg, &potential_of(grad_sigma)?)?))
}

/// `B_i(∇f) = ∇(f ∘ F_{i,1})`.
pub fn leg_b(leg: &Leg, grad_f: &VectorField) -> Result<VectorField> {
    Ok(grad(&b_potential(leg, &potential_of(grad_f)?)?))
}

#[derive(Debug, Clone, Copy)]
pub struct SchemeOptions {
    /// Target `‖A(∇σ) − v‖` for each leg inversion, on unit-norm data.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Result of inverting `A` on one leg.
#[derive(Debug, Clone)]
pub struct Inversion {
    /// `σ`, normalized on `μ_{i,0}`.
    pub potential: ScalarField,
    /// Potential of `A(∇σ)`, normalized on `μ_{i,1}`.
    pub image: ScalarField,
    /// Zero on stationary legs.
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A(∇σ) = v` by `u_{k+1} = u_k + B(v − A u_k)`, `u_0 = B(v)`,
/// with `v` given by its potential.
pub fn invert_leg_a_potential(leg: &Leg, v: &ScalarField, opts: &SchemeOptions) -> Result<Inversion> {
    let end = leg.end_density();
    let v = normalized(v.clone(), end)?;
    if leg.stationary {
        return Ok(Inversion {
            potential: normalized(v.clone(), &leg.start)?,
            image: v,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut u = b_potential(leg, &v)?;
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let image = a_potential(leg, &u)?;
        // near-Nyquist modes are not resolved by the interpolating maps and
        // would never contract
        let r = dealias(&v.add_scaled(-1.0, &image));
        residual = otto_norm(end, &grad(&r))?;
        if residual <= opts.tol {
            return Ok(Inversion {
                potential: u,
                image,
                iterations: k,
                residual,
            });
        }
        u = u.add_scaled(1.0, &b_potential(leg, &r)?);
    }
    Err(Error::SubdivisionTooCoarse {
        leg: leg.index,
        iterations: opts.max_iter,
        residual,
    })
}

/// `∇σ` with `‖A(∇σ) − v‖_{μ_{i,1}} ≤ tol`.
pub fn invert_leg_a(leg: &Leg, v: &VectorField, tol: f64) -> Result<VectorField> {
    let opts = SchemeOptions {
        tol,
        ..SchemeOptions::default()
    };
    Ok(grad(&invert_leg_a_potential(leg, &potential_of(v)?, &opts)?.potential))
}

/// The transported field `𝒱_Q(t)` at `t = (i + u)/Q`, `u ∈ {0, ⅓, ⅔}`, and
/// at `t = 1`.
#[derive(Debug, Clone)]
pub struct SchemeOutput {
    q: usize,
    steps: usize,
    scale: f64,
    input: VectorField,
    times: Vec<f64>,
    fields: Vec<VectorField>,
    /// `‖𝒱_Q(t)‖ / ‖∇η1‖`, measured on the leg densities.
    relative_norms: Vec<f64>,
    /// Unit-scaled `σ_i`.
    leg_potentials: Vec<ScalarField>,
    /// `L_{σ_i}(1)`, rescaled.
    leg_ends: Vec<VectorField>,
    iterations: Vec<usize>,
}

impl SchemeOutput {
    /// `Q`.
    pub fn q(&self) -> usize {
        self.q
    }

    /// `‖∇η1‖_{μ1}`.
    pub fn input_norm(&self) -> f64 {
        self.scale
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// `𝒱_Q(0)`.
    pub fn initial(&self) -> &VectorField {
        &self.fields[0]
    }

    /// `𝒱_Q(1)`, the input itself.
    pub fn terminal(&self) -> &VectorField {
        &self.input
    }

    pub fn relative_norms(&self) -> &[f64] {
        &self.relative_norms
    }

    /// `sup_t |‖𝒱_Q(t)‖ / ‖∇η1‖ − 1|` (0 for zero input).
    pub fn norm_drift(&self) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.relative_norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn leg_potentials(&self) -> &[ScalarField] {
        &self.leg_potentials
    }

    pub fn leg_ends(&self) -> &[VectorField] {
        &self.leg_ends
    }

    /// Fixed-point iterations used per leg.
    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    /// `(j, 𝒱_Q(t_j))` on the path's time grid, if every output time is
    /// a path sample (`T` divisible by `3Q`).
    pub fn path_samples(&self) -> Option<Vec<(usize, VectorField)>> {
        let per = 3 * self.q;
        if self.steps % per != 0 {
            return None;
        }
        let stride = self.steps / per;
        Some(self.fields.iter().enumerate().map(|(k, f)| (k * stride, f.clone())).collect())
    }
}

/// Runs the backward recursion from `∇η1` on `μ1`.
pub fn run_scheme(path: &GeodesicPath, grad_eta1: &VectorField, q: usize) -> Result<SchemeOutput> {
    let legs = build_legs(path, q)?;
    run_scheme_on(path, &legs, grad_eta1, &SchemeOptions::default())
}

pub fn run_scheme_on(
    path: &GeodesicPath,
    legs: &[Leg],
    grad_eta1: &VectorField,
    opts: &SchemeOptions,
) -> Result<SchemeOutput> {
    let q = legs.len();
    let grid = path.grid();
    grid.check_same(grad_eta1.grid())?;
    let mu1 = path.density(path.steps());
    let scale = otto_norm(mu1, grad_eta1)?;
    let mut times: Vec<f64> = (0..=3 * q).map(|k| k as f64 / (3 * q) as f64).collect();
    *times.last_mut().expect("non-empty") = 1.0;

    if scale == 0.0 {
        let zero = VectorField::zeros(grid);
        return Ok(SchemeOutput {
            q,
            steps: path.steps(),
            scale,
            input: grad_eta1.clone(),
            fields: times.iter().map(|_| zero.clone()).collect(),
            times,
            relative_norms: vec![0.0; 3 * q + 1],
            leg_potentials: vec![ScalarField::zeros(grid); q],
            leg_ends: vec![zero; q],
            iterations: vec![0; q],
        });
    }

    let eta1 = potential_of(grad_eta1)?.scaled(1.0 / scale);
    let mut target = eta1;
    let mut sigmas = vec![ScalarField::zeros(grid); q];
    let mut ends = vec![ScalarField::zeros(grid); q];
    let mut iterations = vec![0; q];
    for leg in legs.iter().rev() {
        let inv = invert_leg_a_potential(leg, &target, opts)?;
        iterations[leg.index] = inv.iterations;
        ends[leg.index] = inv.image;
        target = inv.potential.clone();
        sigmas[leg.index] = inv.potential;
    }

    let mut fields = Vec::with_capacity(3 * q + 1);
    let mut relative_norms = Vec::with_capacity(3 * q + 1);
    for leg in legs {
        let sigma = &sigmas[leg.index];
        for &u in &OUTPUT_U {
            let p = leg_l_potential(leg, sigma, u)?;
            let g = grad(&p);
            let norm = if u == 0.0 {
                otto_norm(leg.start_density(), &g)?
            } else {
                otto_norm(leg.sample(u)?.density(), &g)?
            };
            relative_norms.push(norm);
            fields.push(g.scaled(scale));
        }
    }
    fields.push(grad_eta1.clone());
    relative_norms.push(1.0);

    Ok(SchemeOutput {
        q,
        steps: path.steps(),
        scale,
        input: grad_eta1.clone(),
        times,
        fields,
        relative_norms,
        leg_potentials: sigmas,
        leg_ends: ends.iter().map(|p| grad(p).scaled(scale)).collect(),
        iterations,
    })
}

/// Distances between the scheme output and a PDE solution.
#[derive(Debug, Clone)]
pub struct Comparison {
    /// `‖𝒱_Q − ∇η‖` in `L²([0,1]; L²(μ_t))`.
    pub err_path: f64,
    /// `‖𝒱_Q(0) − ∇η(0)‖_{L²(μ0)}`.
    pub err_0: f64,
    /// Squared contribution of each leg to `err_path²`.
    pub per_leg: Vec<f64>,
}

impl Comparison {
    /// The path error restricted to legs `first..=last`.
    pub fn err_on_legs(&self, first: usize, last: usize) -> f64 {
        self.per_leg[first..=last].iter().sum::<f64>().sqrt()
    }
}

/// Time integral by Simpson's 3/8 rule on each leg over
/// `u ∈ {0, ⅓, ⅔, 1}`, using the left limit `L_{σ_i}(1)` at `u = 1`.
pub fn compare_to_pde(path: &GeodesicPath, output: &SchemeOutput, sol: &TransportSolution) -> Result<Comparison> {
    if sol.steps() != path.steps() || output.steps != path.steps() {
        return Err(Error::InvalidArgument("solution and output must share the path".into()));
    }
    let q = output.q;
    if path.steps() % (3 * q) != 0 {
        return Err(Error::Divisibility {
            samples: path.steps(),
            q: 3 * q,
        });
    }
    let stride = path.steps() / (3 * q);
    let dist = |j: usize, f: &VectorField| otto_norm(path.density(j), &f.sub(&sol.gradient(j)));
    let mut per_leg = Vec::with_capacity(q);
    for i in 0..q {
        let mut e = [0.0; 4];
        for (m, slot) in e.iter_mut().enumerate().take(3) {
            *slot = dist((3 * i + m) * stride, &output.fields[3 * i + m])?.powi(2);
        }
        e[3] = dist((3 * i + 3) * stride, &output.leg_ends[i])?.powi(2);
        per_leg.push((e[0] + 3.0 * e[1] + 3.0 * e[2] + e[3]) / (8.0 * q as f64));
    }
    Ok(Comparison {
        err_path: per_leg.iter().sum::<f64>().sqrt(),
        err_0: dist(0, output.initial())?,
        per_leg,
    })
}
