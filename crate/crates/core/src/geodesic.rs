//! Displacement-interpolation geodesics `μ_t = (F_t)_* μ0` with
//! `F_t(x) = exp_x(t ∇φ0(x))`, and recovery of the velocity potential
//! `φ(t)` from the continuity equation `∂ρ/∂t + ∇·(ρ∇φ) = 0`.

use crate::elliptic::solve_weighted_poisson;
use crate::error::{Error, Result};
use crate::manifold::{div, grad, hess, Grid, ScalarField, VectorField};
use crate::measure::{pushforward_density, Density, DisplacementMap};

/// Half-width of the enclosing interval: the path on `[0, 1]` must extend
/// diffeomorphically to `[-EXTENSION, 1 + EXTENSION]`.
pub const EXTENSION: f64 = 0.1;

const MIN_JACOBIAN: f64 = 1e-6;
/// Step of the independent time-derivative estimate used for residuals.
const RESIDUAL_STEP: f64 = 1e-3;

/// A time-sampled geodesic on `t_j = j / T`, `j = 0..=T`.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    mu0: Density,
    phi0: ScalarField,
    steps: usize,
    /// Number of extra samples before 0 and after 1.
    ext: usize,
    /// Densities at `t = (e - ext) / T` for `e = 0..T + 1 + 2 ext`.
    densities: Vec<Density>,
    potentials: Vec<ScalarField>,
    min_extended_eigenvalue: f64,
    continuity_residual: f64,
}

fn density_at(mu0: &Density, phi0: &ScalarField, t: f64) -> Result<Density> {
    if t == 0.0 {
        return Ok(mu0.clone());
    }
    pushforward_density(mu0, &DisplacementMap::from_potential(phi0, t)).map_err(|e| match e {
        Error::NotDiffeomorphic { min_jacobian } => Error::NotMinimizingGeodesic { min_jacobian, time: t },
        other => other,
    })
}

/// Fourth-order central difference `∂ρ/∂t` from samples at `t ± δ, t ± 2δ`.
fn central_derivative(m2: &Density, m1: &Density, p1: &Density, p2: &Density, step: f64) -> ScalarField {
    let values = m2
        .values()
        .iter()
        .zip(m1.values())
        .zip(p1.values().iter().zip(p2.values()))
        .map(|((a, b), (c, d))| ((a - d) + 8.0 * (c - b)) / (12.0 * step))
        .collect();
    ScalarField::from_raw(m1.grid(), values)
}

/// Smallest eigenvalue of `I + t Hess φ0` over the grid and `t` in `[a, b]`.
fn min_eigenvalue(phi0: &ScalarField, a: f64, b: f64) -> f64 {
    let h = hess(phi0);
    let mut min = f64::INFINITY;
    for k in 0..phi0.grid().len() {
        let m = h.at(k);
        let (lo, hi) = if phi0.grid().dim() == 1 {
            (m[0][0], m[0][0])
        } else {
            let tr = 0.5 * (m[0][0] + m[1][1]);
            let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
            (tr - r, tr + r)
        };
        // eigenvalues of I + tH are affine in t, so endpoints suffice
        for t in [a, b] {
            min = min.min(1.0 + t * lo).min(1.0 + t * hi);
        }
    }
    min
}

fn potential_from_rate(rho: &Density, rate: &ScalarField) -> Result<ScalarField> {
    solve_weighted_poisson(rho, &rate.scaled(-1.0))
}

/// Builds the path from `μ0` and the initial potential `φ0` with `T` steps.
pub fn generate_geodesic(mu0: &Density, phi0: &ScalarField, steps: usize) -> Result<GeodesicPath> {
    mu0.grid().check_same(phi0.grid())?;
    if steps == 0 {
        return Err(Error::InvalidArgument("geodesic needs at least one time step".into()));
    }
    let min_ev = min_eigenvalue(phi0, -EXTENSION, 1.0 + EXTENSION);
    if min_ev <= MIN_JACOBIAN {
        return Err(Error::NotMinimizingGeodesic {
            min_jacobian: min_ev,
            time: if min_eigenvalue(phi0, -EXTENSION, 0.0) <= MIN_JACOBIAN {
                -EXTENSION
            } else {
                1.0 + EXTENSION
            },
        });
    }

    let dt = 1.0 / steps as f64;
    let ext = ((EXTENSION * steps as f64).ceil() as usize).max(2);
    let mut densities = Vec::with_capacity(steps + 1 + 2 * ext);
    for e in 0..steps + 1 + 2 * ext {
        let t = (e as f64 - ext as f64) * dt;
        densities.push(density_at(mu0, phi0, t)?);
    }

    let mut path = GeodesicPath {
        mu0: mu0.clone(),
        phi0: phi0.clone(),
        steps,
        ext,
        densities,
        potentials: Vec::with_capacity(steps + 1),
        min_extended_eigenvalue: min_ev,
        continuity_residual: 0.0,
    };
    for j in 0..=steps {
        let phi = recover_potential(&path, j)?;
        path.potentials.push(phi);
    }
    let stride = (steps / 10).max(1);
    let mut residual: f64 = 0.0;
    for j in (0..=steps).step_by(stride).chain(std::iter::once(steps)) {
        residual = residual.max(continuity_residual(&path, j)?);
    }
    path.continuity_residual = residual;
    Ok(path)
}

/// Solves `∇·(ρ∇φ) = -∂ρ/∂t` at sample `j` with `∫ φ dμ_t = 0`; the time
/// derivative is a fourth-order central difference over neighbouring samples.
pub fn recover_potential(path: &GeodesicPath, j: usize) -> Result<ScalarField> {
    if j > path.steps {
        return Err(Error::InvalidArgument(format!("sample {j} beyond T = {}", path.steps)));
    }
    let e = j + path.ext;
    let d = &path.densities;
    let rate = central_derivative(&d[e - 2], &d[e - 1], &d[e + 1], &d[e + 2], path.dt());
    potential_from_rate(&d[e], &rate)
}

/// `max |∂ρ/∂t + ∇·(ρ∇φ)|` at sample `j`, with `∂ρ/∂t` taken from an
/// independent fine-step difference of the generating map.
pub fn continuity_residual(path: &GeodesicPath, j: usize) -> Result<f64> {
    let t = path.time(j);
    let s = RESIDUAL_STEP;
    let at = |t| density_at(&path.mu0, &path.phi0, t);
    let rate = central_derivative(&at(t - 2.0 * s)?, &at(t - s)?, &at(t + s)?, &at(t + 2.0 * s)?, s);
    let flux = div(&grad(path.potential(j)).weighted(path.density(j).field()));
    Ok(rate.add_scaled(1.0, &flux).max_abs())
}

/// `sup_t ‖φ(t)‖_{C²}` over the samples.
pub fn regularity_report(path: &GeodesicPath) -> f64 {
    regularity_report_on(path, 0, path.steps)
}

/// As [`regularity_report`], restricted to samples `first..=last`.
pub fn regularity_report_on(path: &GeodesicPath, first: usize, last: usize) -> f64 {
    path.potentials[first..=last.min(path.steps)]
        .iter()
        .map(|phi| {
            phi.max_abs()
                .max(grad(phi).max_norm())
                .max(hess(phi).max_norm())
        })
        .fold(0.0, f64::max)
}

/// Density and potential at an arbitrary time in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PathState {
    pub density: Density,
    pub potential: ScalarField,
}

impl GeodesicPath {
    pub fn grid(&self) -> &Grid {
        self.mu0.grid()
    }

    /// `T`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn initial_density(&self) -> &Density {
        &self.mu0
    }

    pub fn initial_potential(&self) -> &ScalarField {
        &self.phi0
    }

    pub fn density(&self, j: usize) -> &Density {
        &self.densities[j + self.ext]
    }

    pub fn potential(&self, j: usize) -> &ScalarField {
        &self.potentials[j]
    }

    pub fn velocity(&self, j: usize) -> VectorField {
        grad(&self.potentials[j])
    }

    /// Times of the retained extended samples.
    pub fn extended_times(&self) -> Vec<f64> {
        (0..self.densities.len())
            .map(|e| (e as f64 - self.ext as f64) * self.dt())
            .collect()
    }

    pub fn extended_densities(&self) -> &[Density] {
        &self.densities
    }

    /// Smallest eigenvalue of `dF_t` over `t ∈ [-0.1, 1.1]`.
    pub fn min_extended_jacobian(&self) -> f64 {
        self.min_extended_eigenvalue
    }

    /// Largest continuity residual over the checked samples.
    pub fn continuity_residual(&self) -> f64 {
        self.continuity_residual
    }

    /// Whether `φ0 ≡ 0`, i.e. the path is constant.
    pub fn is_constant(&self) -> bool {
        self.phi0.max_abs() == 0.0
    }

    /// State at `t = (j + ½) Δt`. Only the density is regenerated; the
    /// time derivative uses the staggered fourth-order stencil over the
    /// stored samples `j - 1 ..= j + 2`.
    pub fn midpoint_state(&self, j: usize) -> Result<PathState> {
        if j >= self.steps {
            return Err(Error::InvalidArgument(format!("midpoint {j} beyond T = {}", self.steps)));
        }
        let t = (j as f64 + 0.5) * self.dt();
        let density = density_at(&self.mu0, &self.phi0, t)?;
        let e = j + self.ext;
        let d = &self.densities;
        let values = d[e - 1]
            .values()
            .iter()
            .zip(d[e].values())
            .zip(d[e + 1].values().iter().zip(d[e + 2].values()))
            .map(|((a, b), (c, dd))| ((a - dd) + 27.0 * (c - b)) / (24.0 * self.dt()))
            .collect();
        let rate = ScalarField::from_raw(self.grid(), values);
        let potential = potential_from_rate(&density, &rate)?;
        Ok(PathState { density, potential })
    }

    /// Regenerates the state at an arbitrary `t`, using the path's own time
    /// step for the derivative stencil so that off-sample states are
    /// consistent with the stored samples.
    pub fn state_at(&self, t: f64) -> Result<PathState> {
        let pos = t * self.steps as f64;
        if (pos - pos.round()).abs() < 1e-9 && pos.round() >= 0.0 && pos.round() as usize <= self.steps {
            let j = pos.round() as usize;
            return Ok(PathState {
                density: self.density(j).clone(),
                potential: self.potential(j).clone(),
            });
        }
        let dt = self.dt();
        let at = |t| density_at(&self.mu0, &self.phi0, t);
        let density = at(t)?;
        let rate = central_derivative(&at(t - 2.0 * dt)?, &at(t - dt)?, &at(t + dt)?, &at(t + 2.0 * dt)?, dt);
        let potential = potential_from_rate(&density, &rate)?;
        Ok(PathState { density, potential })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::integrate;
    use std::f64::consts::PI;

    fn s1(n: usize) -> (Density, ScalarField) {
        let grid = Grid::circle(n).unwrap();
        let mu0 = Density::new(grid.sample(|x| (1.0 + 0.3 * x[0].cos()) / (2.0 * PI))).unwrap();
        let phi0 = grid.sample(|x| 0.2 * x[0].sin());
        (mu0, phi0)
    }

    #[test]
    fn zero_potential_gives_constant_path() {
        let (mu0, phi0) = s1(64);
        let path = generate_geodesic(&mu0, &phi0.scaled(0.0), 10).unwrap();
        for j in 0..=10 {
            assert_eq!(path.density(j), &mu0);
            assert_eq!(path.potential(j).max_abs(), 0.0);
        }
        assert_eq!(regularity_report(&path), 0.0);
        assert!(path.continuity_residual() < 1e-10);
    }

    #[test]
    fn initial_velocity_recovered() {
        let (mu0, phi0) = s1(256);
        let path = generate_geodesic(&mu0, &phi0, 100).unwrap();
        let v = path.velocity(0);
        let expected = mu0.grid().sample(|x| 0.2 * x[0].cos());
        let err = v.comp(0).iter().zip(expected.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-4, "{err}");
        for j in [0, 37, 100] {
            assert!(integrate(path.potential(j), path.density(j)).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn velocity_follows_hamilton_jacobi() {
        // Particles move on straight lines, so ∇φ(t)(F_t(x)) = ∇φ0(x).
        let (mu0, phi0) = s1(128);
        let path = generate_geodesic(&mu0, &phi0, 50).unwrap();
        let j = 30;
        let t = path.time(j);
        let v = path.velocity(j);
        let grid = mu0.grid();
        for k in (0..grid.len()).step_by(7) {
            let y = grid.coord(k)[0];
            let (mut lo, mut hi) = (y - 1.0, y + 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid + 0.2 * t * mid.cos() < y {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            assert!((v.comp(0)[k] - 0.2 * x.cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn densities_match_change_of_variables() {
        let (mu0, phi0) = s1(256);
        let path = generate_geodesic(&mu0, &phi0, 100).unwrap();
        let grid = mu0.grid();
        let mut err: f64 = 0.0;
        for j in (0..=100).step_by(5) {
            let a = 0.2 * path.time(j);
            for k in 0..grid.len() {
                let y = grid.coord(k)[0];
                let (mut lo, mut hi) = (y - 1.0, y + 1.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mid + a * mid.cos() < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let x = 0.5 * (lo + hi);
                let exact = (1.0 + 0.3 * x.cos()) / (2.0 * PI) / (1.0 - a * x.sin());
                err = err.max((path.density(j).values()[k] - exact).abs());
            }
        }
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn torus_mass_conserved() {
        let grid = Grid::torus(32).unwrap();
        let mu0 = Density::normalized(grid.sample(|x| 1.0 + 0.2 * x[0].cos() * x[1].cos())).unwrap();
        let phi0 = grid.sample(|x| 0.1 * x[0].sin() + 0.15 * x[1].sin());
        let path = generate_geodesic(&mu0, &phi0, 20).unwrap();
        for j in 0..=20 {
            assert!((path.density(j).mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn extended_interval_is_retained() {
        let (mu0, phi0) = s1(64);
        let path = generate_geodesic(&mu0, &phi0, 40).unwrap();
        let times = path.extended_times();
        assert!(times[0] <= -EXTENSION + 1e-12);
        assert!(*times.last().unwrap() >= 1.0 + EXTENSION - 1e-12);
        assert!(path.min_extended_jacobian() > 0.7);
    }

    #[test]
    fn large_potential_rejected() {
        let (mu0, phi0) = s1(64);
        let err = generate_geodesic(&mu0, &phi0.scaled(5.0), 10).unwrap_err();
        assert!(matches!(err, Error::NotMinimizingGeodesic { .. }));
    }

    #[test]
    fn regularity_monotone_under_restriction() {
        let (mu0, phi0) = s1(128);
        let path = generate_geodesic(&mu0, &phi0, 20).unwrap();
        let full = regularity_report(&path);
        assert!(full.is_finite() && full > 0.0);
        assert!(regularity_report_on(&path, 0, 10) <= full);
    }

    #[test]
    fn regularity_stable_under_refinement() {
        let (mu0, phi0) = s1(256);
        let a = regularity_report(&generate_geodesic(&mu0, &phi0, 20).unwrap());
        let (mu0, phi0) = s1(512);
        let b = regularity_report(&generate_geodesic(&mu0, &phi0, 20).unwrap());
        assert!((a - b).abs() <= 0.05 * b);
    }

    #[test]
    fn continuity_residual_converges_in_dt() {
        let (mu0, phi0) = s1(256);
        let r = |t| continuity_residual(&generate_geodesic(&mu0, &phi0, t).unwrap(), 5).unwrap();
        let (r10, r20) = (r(10), r(20));
        // fourth-order stencil: at least second order
        assert!(r20 <= r10 / 4.0, "{r10} {r20}");
    }

    #[test]
    fn off_sample_state_matches_neighbours() {
        let (mu0, phi0) = s1(128);
        let path = generate_geodesic(&mu0, &phi0, 40).unwrap();
        let mid = path.state_at(0.5 * (path.time(10) + path.time(11))).unwrap();
        let avg = path.potential(10).add_scaled(1.0, path.potential(11)).scaled(0.5);
        assert!(mid.potential.max_abs_diff(&avg) < 1e-3);
        let staggered = path.midpoint_state(10).unwrap();
        assert!(staggered.potential.max_abs_diff(&mid.potential) < 1e-6);
        assert!(staggered.density.field().max_abs_diff(mid.density.field()) < 1e-14);
        let exact = path.state_at(path.time(10)).unwrap();
        assert_eq!(&exact.potential, path.potential(10));
    }
}
