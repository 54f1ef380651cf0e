//! Local periodic Lagrange interpolation at off-grid points.

use super::field::{Coord, Grid, ScalarField, VectorField};

/// Stencil width per axis: high order on S¹ where it is cheap, lower on T².
fn width(dim: usize) -> usize {
    match dim {
        1 => 16,
        _ => 10,
    }
}

#[derive(Debug, Clone)]
struct AxisStencil {
    nodes: Vec<usize>,
    weights: Vec<f64>,
}

impl AxisStencil {
    /// `s` is the position in grid units.
    fn new(s: f64, n: usize, m: usize) -> Self {
        let base = s.floor();
        let frac = s - base;
        let base = base as i64;
        let lo = base - (m as i64) / 2 + 1;
        let nodes = (0..m)
            .map(|j| (lo + j as i64).rem_euclid(n as i64) as usize)
            .collect();
        let offsets: Vec<f64> = (0..m).map(|j| (lo + j as i64 - base) as f64).collect();
        let weights = if frac == 0.0 {
            offsets.iter().map(|&o| if o == 0.0 { 1.0 } else { 0.0 }).collect()
        } else {
            (0..m)
                .map(|j| {
                    let mut w = 1.0;
                    for k in 0..m {
                        if k != j {
                            w *= (frac - offsets[k]) / (offsets[j] - offsets[k]);
                        }
                    }
                    w
                })
                .collect()
        };
        Self { nodes, weights }
    }
}

/// Precomputed interpolation weights for one evaluation point.
#[derive(Debug, Clone)]
pub struct Stencil {
    axes: Vec<AxisStencil>,
    n: usize,
}

impl Stencil {
    /// Stencil for the point `node + displacement`; exact when the
    /// displacement is zero.
    pub fn at_displaced(grid: &Grid, node: usize, displacement: Coord) -> Self {
        let h = grid.spacing();
        let idx = grid.indices(node);
        let m = width(grid.dim());
        let axes = (0..grid.dim())
            .map(|a| AxisStencil::new(idx[a] as f64 + displacement[a] / h, grid.n(), m))
            .collect();
        Self { axes, n: grid.n() }
    }

    pub fn at_point(grid: &Grid, x: Coord) -> Self {
        let h = grid.spacing();
        let m = width(grid.dim());
        let axes = (0..grid.dim())
            .map(|a| AxisStencil::new(x[a] / h, grid.n(), m))
            .collect();
        Self { axes, n: grid.n() }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        match self.axes.len() {
            1 => {
                let ax = &self.axes[0];
                ax.nodes.iter().zip(&ax.weights).map(|(&i, &w)| w * values[i]).sum()
            }
            _ => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let mut s = 0.0;
                for (&j, &wy) in ay.nodes.iter().zip(&ay.weights) {
                    if wy == 0.0 {
                        continue;
                    }
                    let row = &values[j * self.n..(j + 1) * self.n];
                    let inner: f64 = ax.nodes.iter().zip(&ax.weights).map(|(&i, &wx)| wx * row[i]).sum();
                    s += wy * inner;
                }
                s
            }
        }
    }

    pub fn eval_vector(&self, v: &VectorField) -> Coord {
        let mut out = [0.0; 2];
        for (a, comp) in v.comps().iter().enumerate() {
            out[a] = self.eval(comp);
        }
        out
    }
}

pub fn interpolate(f: &ScalarField, x: Coord) -> f64 {
    Stencil::at_point(f.grid(), x).eval(f.values())
}
