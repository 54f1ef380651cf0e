//! Parallel transport along Wasserstein geodesics over the circle, the flat
//! torus and the round sphere.
//!
//! * [`geodesic`] builds displacement geodesics of densities on a periodic grid.
//! * [`transport_pde`] integrates the parallel transport equation.
//! * [`weak`] checks the integrated form against a battery of test functions.
//! * [`scheme`] is the discrete construction through `Q` legs.
//! * [`delta`] is the same construction for point masses on the sphere.
//! * [`scenario`] holds the built-in experiment set-ups.

pub mod delta;
pub mod elliptic;
pub mod error;
pub mod geodesic;
pub mod manifold;
pub mod measure;
pub mod scenario;
pub mod scheme;
pub mod transport_pde;
pub mod weak;

pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/transport-pde.md")]
    mod transport_pde {}
    #[doc = include_str!("../../../book/src/weak-form.md")]
    mod weak_form {}
    #[doc = include_str!("../../../book/src/scheme.md")]
    mod scheme {}
    #[doc = include_str!("../../../book/src/delta.md")]
    mod delta {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
