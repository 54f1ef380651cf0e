//! Geometry kernels for S¹, T² and S², and spectral differential operators
//! on the periodic grids of the flat models.

mod field;
mod interp;
mod point;
mod spectral;

pub use field::{canonical_potential, dealias, div, grad, hess, potential_of, weighted_div, Coord, Grid, GridKind, ScalarField, SymTensorField, VectorField};
pub use interp::{interpolate, Stencil};
pub use point::{
    dexp, dexp_inverse, exp_map, geodesic_transport, geodesic_velocity_at_end, log_map, project_tangent,
    ManifoldKind, Point, Tangent,
};
