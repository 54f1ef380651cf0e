//! Probability densities on grids, the Otto inner product, and pushforward
//! of densities under near-identity diffeomorphisms.

use crate::error::{Error, Result};
use crate::manifold::{grad, hess, Coord, Grid, ScalarField, Stencil, VectorField};

/// Smallest admissible grid density value.
pub const DENSITY_FLOOR: f64 = 1e-8;

const MASS_TOL: f64 = 1e-10;
const MIN_JACOBIAN: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

pub type Mat2 = [[f64; 2]; 2];

/// An absolutely continuous probability measure `ρ dvol` sampled on a grid.
///
/// Quadrature is the uniform periodic rule with weight `h^dim` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    field: ScalarField,
}

impl Density {
    /// Rejects (never clips) values below [`DENSITY_FLOOR`] and
    /// unnormalized input.
    pub fn new(field: ScalarField) -> Result<Self> {
        let min = field.values().iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min >= DENSITY_FLOOR) {
            return Err(Error::InvalidDensity(format!(
                "minimum value {min:.3e} below floor {DENSITY_FLOOR:e}"
            )));
        }
        let mass = field.integral();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDensity(format!("total mass {mass:.15} differs from 1")));
        }
        Ok(Self { field })
    }

    /// Divides by the total mass first.
    pub fn normalized(field: ScalarField) -> Result<Self> {
        let mass = field.integral();
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity("non-positive total mass".into()));
        }
        Self::new(field.scaled(1.0 / mass))
    }

    pub fn uniform(grid: &Grid) -> Self {
        Self {
            field: ScalarField::constant(grid, 1.0 / grid.total_volume()),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn weight(&self) -> f64 {
        self.grid().cell_volume()
    }

    pub fn mass(&self) -> f64 {
        self.field.integral()
    }

    pub fn min(&self) -> f64 {
        self.values().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Finitely many weighted atoms; weights are nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<T> {
    atoms: Vec<(T, f64)>,
}

impl<T> AtomicMeasure<T> {
    pub fn new(atoms: Vec<(T, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("atomic measure needs at least one atom".into()));
        }
        if atoms.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("atom weights must be nonnegative".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("atom weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(T, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Pushforward under `f`; weights and ordering are kept.
    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<AtomicMeasure<U>> {
        let atoms = self
            .atoms
            .iter()
            .map(|(a, w)| Ok((f(a)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AtomicMeasure { atoms })
    }
}

/// `∫ f dμ`.
pub fn integrate(f: &ScalarField, mu: &Density) -> Result<f64> {
    f.grid().check_same(mu.grid())?;
    let s: f64 = f.values().iter().zip(mu.values()).map(|(a, r)| a * r).sum();
    Ok(s * mu.weight())
}

/// `∫ ⟨X, Y⟩ dμ`, the Otto metric on gradient representatives.
pub fn otto_inner(mu: &Density, x: &VectorField, y: &VectorField) -> Result<f64> {
    x.grid().check_same(mu.grid())?;
    y.grid().check_same(mu.grid())?;
    integrate(&x.dot(y), mu)
}

pub fn otto_norm(mu: &Density, x: &VectorField) -> Result<f64> {
    Ok(otto_inner(mu, x, x)?.max(0.0).sqrt())
}

/// A map `F(x) = x + d(x)` of the flat chart with Jacobian `dF`.
pub trait GridMap {
    fn grid(&self) -> &Grid;

    /// Displacement `d(x)` and Jacobian `dF(x)` at an arbitrary point.
    fn eval(&self, x: Coord) -> (Coord, Mat2);

    /// Same at grid node `idx`; implementations with stored node values
    /// should return them exactly.
    fn eval_node(&self, idx: usize) -> (Coord, Mat2) {
        self.eval(self.grid().coord(idx))
    }

    /// Same at `node + offset`.
    fn eval_near(&self, idx: usize, offset: Coord) -> (Coord, Mat2) {
        let y = self.grid().coord(idx);
        self.eval([y[0] + offset[0], y[1] + offset[1]])
    }
}

/// Closure-backed [`GridMap`], mostly for analytic maps.
pub struct FnMap<F> {
    grid: Grid,
    f: F,
}

impl<F: Fn(Coord) -> (Coord, Mat2)> FnMap<F> {
    pub fn new(grid: &Grid, f: F) -> Self {
        Self { grid: grid.clone(), f }
    }
}

impl<F: Fn(Coord) -> (Coord, Mat2)> GridMap for FnMap<F> {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn eval(&self, x: Coord) -> (Coord, Mat2) {
        (self.f)(x)
    }
}

/// A grid-sampled displacement and Jacobian, interpolated off the grid.
#[derive(Debug, Clone)]
pub struct DisplacementMap {
    grid: Grid,
    displacement: VectorField,
    /// Row-major Jacobian entries `[J00, J01, J10, J11]` (only `J00` on S¹).
    jacobian: Vec<Vec<f64>>,
}

impl DisplacementMap {
    pub fn new(displacement: VectorField, jacobian: Vec<Vec<f64>>) -> Result<Self> {
        let grid = displacement.grid().clone();
        let expected = grid.dim() * grid.dim();
        if jacobian.len() != expected || jacobian.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("Jacobian field shape".into()));
        }
        Ok(Self {
            grid,
            displacement,
            jacobian,
        })
    }

    /// `F(x) = exp_x(scale ∇φ(x))` in the flat chart.
    pub fn from_potential(phi: &ScalarField, scale: f64) -> Self {
        let grid = phi.grid().clone();
        let displacement = grad(phi).scaled(scale);
        let h = hess(phi);
        let jacobian = match grid.dim() {
            1 => vec![h.comps()[0].iter().map(|v| 1.0 + scale * v).collect()],
            _ => {
                let c = h.comps();
                vec![
                    c[0].iter().map(|v| 1.0 + scale * v).collect(),
                    c[1].iter().map(|v| scale * v).collect(),
                    c[1].iter().map(|v| scale * v).collect(),
                    c[2].iter().map(|v| 1.0 + scale * v).collect(),
                ]
            }
        };
        Self {
            grid,
            displacement,
            jacobian,
        }
    }

    pub fn displacement(&self) -> &VectorField {
        &self.displacement
    }

    fn jac_from(&self, read: impl Fn(&[f64]) -> f64) -> Mat2 {
        match self.grid.dim() {
            1 => [[read(&self.jacobian[0]), 0.0], [0.0, 1.0]],
            _ => [
                [read(&self.jacobian[0]), read(&self.jacobian[1])],
                [read(&self.jacobian[2]), read(&self.jacobian[3])],
            ],
        }
    }

    /// `f ∘ F` sampled on the grid.
    pub fn compose(&self, f: &ScalarField) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|k| Stencil::at_displaced(&self.grid, k, self.displacement.at(k)).eval(f.values()))
            .collect();
        ScalarField::from_raw(&self.grid, values)
    }

    /// Smallest `det dF` over the grid nodes.
    pub fn min_jacobian(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| det(self.eval_node(k).1))
            .fold(f64::INFINITY, f64::min)
    }
}

impl GridMap for DisplacementMap {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn eval(&self, x: Coord) -> (Coord, Mat2) {
        let s = Stencil::at_point(&self.grid, x);
        (s.eval_vector(&self.displacement), self.jac_from(|c| s.eval(c)))
    }

    fn eval_node(&self, idx: usize) -> (Coord, Mat2) {
        (self.displacement.at(idx), self.jac_from(|c| c[idx]))
    }

    fn eval_near(&self, idx: usize, offset: Coord) -> (Coord, Mat2) {
        let s = Stencil::at_displaced(&self.grid, idx, offset);
        (s.eval_vector(&self.displacement), self.jac_from(|c| s.eval(c)))
    }
}

pub(crate) fn det(m: Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Solves `m z = r`; on S¹ the padded second row is the identity.
pub(crate) fn solve2(m: Mat2, r: Coord) -> Coord {
    let d = det(m);
    [
        (m[1][1] * r[0] - m[0][1] * r[1]) / d,
        (m[0][0] * r[1] - m[1][0] * r[0]) / d,
    ]
}

/// Preimages `F⁻¹(y)` of every grid node `y`, stored as offsets `x − y`,
/// with interpolation stencils and `dF` at the preimages.
#[derive(Debug, Clone)]
pub struct InverseMap {
    grid: Grid,
    offsets: Vec<Coord>,
    stencils: Vec<Stencil>,
    jacobians: Vec<Mat2>,
}

impl InverseMap {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `x − y` for the preimage `x` of node `y`.
    pub fn offset(&self, idx: usize) -> Coord {
        self.offsets[idx]
    }

    /// `dF` at the preimage of node `idx`.
    pub fn jacobian(&self, idx: usize) -> Mat2 {
        self.jacobians[idx]
    }

    /// `f ∘ F⁻¹` on the grid.
    pub fn pull(&self, f: &ScalarField) -> ScalarField {
        let values = self.stencils.iter().map(|s| s.eval(f.values())).collect();
        ScalarField::from_raw(&self.grid, values)
    }

    /// Componentwise `X ∘ F⁻¹` on the grid.
    pub fn pull_vector(&self, x: &VectorField) -> VectorField {
        let comps = x
            .comps()
            .iter()
            .map(|c| self.stencils.iter().map(|s| s.eval(c)).collect())
            .collect();
        VectorField::from_raw(&self.grid, comps)
    }

    pub fn min_jacobian(&self) -> f64 {
        self.jacobians.iter().map(|&j| det(j)).fold(f64::INFINITY, f64::min)
    }
}

/// Damped Newton inversion of `F` at every grid node, starting from
/// `x = y − d(y)`.
pub fn invert_map(map: &impl GridMap) -> Result<InverseMap> {
    let grid = map.grid().clone();
    let dim = grid.dim();
    let mut offsets = Vec::with_capacity(grid.len());
    let mut stencils = Vec::with_capacity(grid.len());
    let mut jacobians = Vec::with_capacity(grid.len());
    let mut min_jac = f64::INFINITY;
    let res_norm = |r: Coord| (r[0] * r[0] + r[1] * r[1]).sqrt();

    for k in 0..grid.len() {
        let (d0, _) = map.eval_node(k);
        let mut off = [-d0[0], -d0[1]];
        if dim == 1 {
            off[1] = 0.0;
        }
        let (mut d, mut jac) = map.eval_near(k, off);
        let mut r = [off[0] + d[0], if dim == 1 { 0.0 } else { off[1] + d[1] }];
        let mut iter = 0;
        while res_norm(r) > NEWTON_TOL {
            if iter == NEWTON_MAX_ITER {
                return Err(Error::NotDiffeomorphic { min_jacobian: min_jac.min(det(jac)) });
            }
            if det(jac) < MIN_JACOBIAN {
                return Err(Error::NotDiffeomorphic { min_jacobian: det(jac) });
            }
            let step = solve2(jac, r);
            let mut lambda = 1.0;
            loop {
                let trial = [off[0] - lambda * step[0], off[1] - lambda * step[1]];
                let (td, tj) = map.eval_near(k, trial);
                let tr = [trial[0] + td[0], if dim == 1 { 0.0 } else { trial[1] + td[1] }];
                if res_norm(tr) < res_norm(r) || lambda < 1e-3 {
                    off = trial;
                    d = td;
                    jac = tj;
                    r = tr;
                    break;
                }
                lambda *= 0.5;
            }
            iter += 1;
        }
        let _ = d;
        let j = det(jac);
        min_jac = min_jac.min(j);
        if j < MIN_JACOBIAN {
            return Err(Error::NotDiffeomorphic { min_jacobian: j });
        }
        offsets.push(off);
        stencils.push(Stencil::at_displaced(&grid, k, off));
        jacobians.push(jac);
    }
    Ok(InverseMap {
        grid,
        offsets,
        stencils,
        jacobians,
    })
}

/// `F_* μ0`, with density `ρ0(x) / |det dF(x)|` at `y = F(x)`.
pub fn pushforward_density(mu0: &Density, map: &impl GridMap) -> Result<Density> {
    pushforward_with_inverse(mu0, map).map(|(d, _)| d)
}

/// Like [`pushforward_density`], also returning the computed inverse map.
pub fn pushforward_with_inverse(mu0: &Density, map: &impl GridMap) -> Result<(Density, InverseMap)> {
    mu0.grid().check_same(map.grid())?;
    let inv = invert_map(map)?;
    let values = inv
        .stencils
        .iter()
        .zip(&inv.jacobians)
        .map(|(s, &j)| s.eval(mu0.values()) / det(j).abs())
        .collect();
    let density = Density::new(ScalarField::from_raw(mu0.grid(), values))?;
    Ok((density, inv))
}
