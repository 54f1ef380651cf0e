//! Grid-sampled scalar, vector and symmetric tensor fields on the flat
//! periodic model manifolds (S¹ and T²).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::spectral::Spectral;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Circle,
    Torus,
}

impl GridKind {
    pub fn dim(self) -> usize {
        match self {
            GridKind::Circle => 1,
            GridKind::Torus => 2,
        }
    }
}

/// Chart coordinates of a grid point; the second entry is unused on S¹.
pub type Coord = [f64; 2];

/// A uniform periodic grid on `[0, 2π)^dim` with cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    kind: GridKind,
    n: usize,
    spectral: Arc<Spectral>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({:?}, n = {})", self.kind, self.n)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.n == other.n
    }
}

impl Grid {
    pub fn new(kind: GridKind, n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be even and at least 16, got {n}"
            )));
        }
        Ok(Self {
            kind,
            n,
            spectral: Arc::new(Spectral::new(n, kind.dim())),
        })
    }

    pub fn circle(n: usize) -> Result<Self> {
        Self::new(GridKind::Circle, n)
    }

    pub fn torus(n: usize) -> Result<Self> {
        Self::new(GridKind::Torus, n)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Volume of one cell, the uniform quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    pub fn total_volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim() as i32)
    }

    /// Integer axis indices of a flat node index.
    pub fn indices(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx % self.n, idx / self.n],
        }
    }

    pub fn coord(&self, idx: usize) -> Coord {
        let h = self.spacing();
        let [i, j] = self.indices(idx);
        match self.dim() {
            1 => [i as f64 * h, 0.0],
            _ => [i as f64 * h, j as f64 * h],
        }
    }

    pub fn sample(&self, f: impl Fn(Coord) -> f64) -> ScalarField {
        let values = (0..self.len()).map(|k| f(self.coord(k))).collect();
        ScalarField {
            grid: self.clone(),
            values,
        }
    }

    pub fn sample_vector(&self, f: impl Fn(Coord) -> Coord) -> VectorField {
        let mut comps = vec![Vec::with_capacity(self.len()); self.dim()];
        for k in 0..self.len() {
            let v = f(self.coord(k));
            for (a, comp) in comps.iter_mut().enumerate() {
                comp.push(v[a]);
            }
        }
        VectorField {
            grid: self.clone(),
            comps,
        }
    }

    pub(crate) fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &ScalarField) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Self::from_raw(&self.grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain integral against the volume form.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: &Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("vector field shape".into()));
        }
        if comps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    pub(crate) fn from_raw(grid: &Grid, comps: Vec<Vec<f64>>) -> Self {
        Self {
            grid: grid.clone(),
            comps,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid, vec![vec![0.0; grid.len()]; grid.dim()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn comp(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn at(&self, idx: usize) -> Coord {
        let mut v = [0.0; 2];
        for (a, comp) in self.comps.iter().enumerate() {
            v[a] = comp[idx];
        }
        v
    }

    pub fn scaled(&self, s: f64) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| s * v).collect())
            .collect();
        Self::from_raw(&self.grid, comps)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &VectorField) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Self::from_raw(&self.grid, comps)
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        self.add_scaled(-1.0, other)
    }

    /// Pointwise Euclidean inner product.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        let mut values = vec![0.0; self.grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((s, x), y) in values.iter_mut().zip(a).zip(b) {
                *s += x * y;
            }
        }
        ScalarField::from_raw(&self.grid, values)
    }

    /// Componentwise product with a scalar field.
    pub fn weighted(&self, w: &ScalarField) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().zip(w.values()).map(|(x, y)| x * y).collect())
            .collect();
        Self::from_raw(&self.grid, comps)
    }

    pub fn max_norm(&self) -> f64 {
        self.dot(self).max_abs().sqrt()
    }
}

/// Symmetric 2-tensor field, stored as `[xx]` on S¹ and `[xx, xy, yy]` on T².
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// The tensor at node `idx` as a dense 2×2 matrix (zero-padded on S¹).
    pub fn at(&self, idx: usize) -> [[f64; 2]; 2] {
        match self.comps.len() {
            1 => [[self.comps[0][idx], 0.0], [0.0, 0.0]],
            _ => {
                let (xx, xy, yy) = (self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]);
                [[xx, xy], [xy, yy]]
            }
        }
    }

    /// Bilinear form `T(a, b)` evaluated pointwise.
    pub fn apply(&self, a: &VectorField, b: &VectorField) -> ScalarField {
        let dim = self.grid.dim();
        let values = (0..self.grid.len())
            .map(|k| {
                let t = self.at(k);
                let (u, v) = (a.at(k), b.at(k));
                let mut s = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        s += t[i][j] * u[i] * v[j];
                    }
                }
                s
            })
            .collect();
        ScalarField::from_raw(&self.grid, values)
    }

    /// Matrix-vector product `T · v` pointwise.
    pub fn contract(&self, v: &VectorField) -> VectorField {
        let dim = self.grid.dim();
        let mut comps = vec![vec![0.0; self.grid.len()]; dim];
        for k in 0..self.grid.len() {
            let t = self.at(k);
            let x = v.at(k);
            for i in 0..dim {
                comps[i][k] = (0..dim).map(|j| t[i][j] * x[j]).sum();
            }
        }
        VectorField::from_raw(&self.grid, comps)
    }

    /// Largest pointwise operator norm (Frobenius bound on T²).
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| {
                let t = self.at(k);
                (t[0][0] * t[0][0] + 2.0 * t[0][1] * t[0][1] + t[1][1] * t[1][1]).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

pub fn grad(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let hat = grid.spectral().forward(f.values());
    let comps = (0..grid.dim())
        .map(|a| grid.spectral().derivative(&hat, &[a]))
        .collect();
    VectorField::from_raw(grid, comps)
}

pub fn hess(f: &ScalarField) -> SymTensorField {
    let grid = f.grid();
    let sp = grid.spectral();
    let hat = sp.forward(f.values());
    let comps = match grid.dim() {
        1 => vec![sp.derivative(&hat, &[0, 0])],
        _ => vec![
            sp.derivative(&hat, &[0, 0]),
            sp.derivative(&hat, &[0, 1]),
            sp.derivative(&hat, &[1, 1]),
        ],
    };
    SymTensorField {
        grid: grid.clone(),
        comps,
    }
}

pub fn div(x: &VectorField) -> ScalarField {
    let grid = x.grid();
    let comps: Vec<&[f64]> = x.comps().iter().map(|c| c.as_slice()).collect();
    ScalarField::from_raw(grid, grid.spectral().divergence(&comps))
}

/// `∇·(ρ X)` for a grid density `ρ`.
pub fn weighted_div(rho: &crate::measure::Density, x: &VectorField) -> Result<ScalarField> {
    rho.grid().check_same(x.grid())?;
    Ok(div(&x.weighted(rho.field())))
}

/// The potential `p` with `∇p = X` and zero Lebesgue mean; rejects fields
/// that are not gradients to within `1e-8` (relative, sup norm).
pub fn potential_of(x: &VectorField) -> Result<ScalarField> {
    let grid = x.grid();
    let neg = div(x).scaled(-1.0);
    let p = ScalarField::from_raw(grid, grid.spectral().inverse_neg_laplacian(neg.values(), 1.0));
    let gap = grad(&p).sub(x).max_norm();
    if gap > 1e-8 * x.max_norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("field is not a gradient (gap {gap:.3e})")));
    }
    Ok(p)
}

/// `f` with its components in the kernel of the spectral gradient removed
/// (the constant and the Nyquist modes), so that it depends only on `∇f`.
pub fn canonical_potential(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    ScalarField::from_raw(grid, grid.spectral().remove_kernel(f.values()))
}

/// `f` restricted to the modes with `|k_a| ≤ N/3` on every axis, the band
/// in which products and compositions of resolved fields stay resolved.
pub fn dealias(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    ScalarField::from_raw(grid, grid.spectral().low_pass(f.values(), grid.n() as f64 / 3.0))
}
