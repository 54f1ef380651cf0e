//! Pointwise geometry of the model manifolds: exponential map, its
//! differential and Riemannian parallel transport along geodesics.
//!
//! S¹ and T² use global angle charts in which geodesics are straight lines,
//! so `dexp` and transport are the identity on chart components. S² is
//! embedded in ℝ³ and its tangent vectors are 3-vectors orthogonal to the
//! base point.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::field::{Grid, GridKind};
use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", deny_unknown_fields)]
pub enum ManifoldKind {
    Circle { resolution: usize },
    Torus2 { resolution: usize },
    Sphere2,
}

impl ManifoldKind {
    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            ManifoldKind::Circle { .. } => 1,
            ManifoldKind::Torus2 { .. } | ManifoldKind::Sphere2 => 2,
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self, ManifoldKind::Sphere2)
    }

    /// The periodic grid, if the manifold carries one.
    pub fn grid(&self) -> Option<Result<Grid>> {
        match *self {
            ManifoldKind::Circle { resolution } => Some(Grid::new(GridKind::Circle, resolution)),
            ManifoldKind::Torus2 { resolution } => Some(Grid::new(GridKind::Torus, resolution)),
            ManifoldKind::Sphere2 => None,
        }
    }
}

/// A point in chart coordinates: angles for S¹/T², a unit 3-vector for S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point(pub [f64; 3]);

/// A tangent vector in the chart of its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent(pub [f64; 3]);

impl Point {
    pub fn angle(theta: f64) -> Self {
        Point([theta.rem_euclid(TAU), 0.0, 0.0])
    }

    pub fn angles(a: f64, b: f64) -> Self {
        Point([a.rem_euclid(TAU), b.rem_euclid(TAU), 0.0])
    }

    /// Normalizes `v` onto the unit sphere.
    pub fn sphere(v: [f64; 3]) -> Self {
        let n = norm3(v);
        Point([v[0] / n, v[1] / n, v[2] / n])
    }
}

impl Tangent {
    pub const ZERO: Tangent = Tangent([0.0; 3]);

    pub fn new(v: [f64; 3]) -> Self {
        Tangent(v)
    }

    pub fn norm(&self) -> f64 {
        norm3(self.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Tangent([s * self.0[0], s * self.0[1], s * self.0[2]])
    }

    pub fn add(&self, other: &Tangent) -> Self {
        Tangent(add3(self.0, other.0))
    }

    pub fn sub(&self, other: &Tangent) -> Self {
        Tangent(sub3(self.0, other.0))
    }

    pub fn dot(&self, other: &Tangent) -> f64 {
        dot3(self.0, other.0)
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale3(s: f64, a: [f64; 3]) -> [f64; 3] {
    [s * a[0], s * a[1], s * a[2]]
}

/// Removes the component of `w` along the unit vector `x`.
pub fn project_tangent(x: &Point, w: &Tangent) -> Tangent {
    Tangent(sub3(w.0, scale3(dot3(x.0, w.0), x.0)))
}

/// Unit velocity direction `e` and length `θ` of a sphere geodesic, with the
/// unit tangent `cos θ e − sin θ x` at its endpoint.
struct GreatCircle {
    theta: f64,
    e: [f64; 3],
    end_dir: [f64; 3],
}

impl GreatCircle {
    fn new(x: &Point, v: &Tangent) -> Option<Self> {
        let v = project_tangent(x, v);
        let theta = v.norm();
        if theta == 0.0 {
            return None;
        }
        let e = scale3(1.0 / theta, v.0);
        let end_dir = sub3(scale3(theta.cos(), e), scale3(theta.sin(), x.0));
        Some(Self { theta, e, end_dir })
    }
}

fn sinc(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        1.0 - theta * theta / 6.0
    } else {
        theta.sin() / theta
    }
}

pub fn exp_map(m: &ManifoldKind, x: &Point, v: &Tangent) -> Point {
    match m {
        ManifoldKind::Circle { .. } => Point::angle(x.0[0] + v.0[0]),
        ManifoldKind::Torus2 { .. } => Point::angles(x.0[0] + v.0[0], x.0[1] + v.0[1]),
        ManifoldKind::Sphere2 => match GreatCircle::new(x, v) {
            None => *x,
            Some(g) => Point::sphere(add3(scale3(g.theta.cos(), x.0), scale3(g.theta.sin(), g.e))),
        },
    }
}

/// Inverse of `exp_map` within the injectivity radius.
pub fn log_map(m: &ManifoldKind, x: &Point, y: &Point) -> Tangent {
    let wrap = |d: f64| (d + PI).rem_euclid(TAU) - PI;
    match m {
        ManifoldKind::Circle { .. } => Tangent([wrap(y.0[0] - x.0[0]), 0.0, 0.0]),
        ManifoldKind::Torus2 { .. } => {
            Tangent([wrap(y.0[0] - x.0[0]), wrap(y.0[1] - x.0[1]), 0.0])
        }
        ManifoldKind::Sphere2 => {
            let c = dot3(x.0, y.0);
            let perp = sub3(y.0, scale3(c, x.0));
            let s = norm3(perp);
            if s == 0.0 {
                return Tangent::ZERO;
            }
            let angle = s.atan2(c);
            Tangent(scale3(angle / s, perp))
        }
    }
}

/// `d exp_x |_v (w)`, a tangent vector at `exp_map(m, x, v)`.
///
/// On S² the radial part of `w` is carried along the geodesic unchanged and
/// the orthogonal part is scaled by `sin θ / θ`, which is the Jacobi field
/// with `j(0) = 0`, `j'(0) = w` evaluated at `t = 1`.
pub fn dexp(m: &ManifoldKind, x: &Point, v: &Tangent, w: &Tangent) -> Tangent {
    match m {
        ManifoldKind::Circle { .. } | ManifoldKind::Torus2 { .. } => *w,
        ManifoldKind::Sphere2 => {
            let w = project_tangent(x, w);
            match GreatCircle::new(x, v) {
                None => w,
                Some(g) => {
                    let radial = dot3(w.0, g.e);
                    let perp = sub3(w.0, scale3(radial, g.e));
                    Tangent(add3(scale3(radial, g.end_dir), scale3(sinc(g.theta), perp)))
                }
            }
        }
    }
}

/// Solves `dexp(m, x, v, z) = w` for `z` at `x`, given `w` at `exp_map(m, x, v)`.
pub fn dexp_inverse(m: &ManifoldKind, x: &Point, v: &Tangent, w: &Tangent) -> Result<Tangent> {
    match m {
        ManifoldKind::Circle { .. } | ManifoldKind::Torus2 { .. } => Ok(*w),
        ManifoldKind::Sphere2 => match GreatCircle::new(x, v) {
            None => Ok(project_tangent(x, w)),
            Some(g) => {
                if g.theta >= PI {
                    return Err(Error::ConjugateRadius { length: g.theta });
                }
                let y = exp_map(m, x, v);
                let w = project_tangent(&y, w);
                let radial = dot3(w.0, g.end_dir);
                let perp = sub3(w.0, scale3(radial, g.end_dir));
                Ok(Tangent(add3(scale3(radial, g.e), scale3(1.0 / sinc(g.theta), perp))))
            }
        },
    }
}

/// Parallel transport of `w` along `t ↦ exp_x(t v)` from `t = 0` to `t = 1`.
pub fn geodesic_transport(m: &ManifoldKind, x: &Point, v: &Tangent, w: &Tangent) -> Tangent {
    match m {
        ManifoldKind::Circle { .. } | ManifoldKind::Torus2 { .. } => *w,
        ManifoldKind::Sphere2 => {
            let w = project_tangent(x, w);
            match GreatCircle::new(x, v) {
                None => w,
                Some(g) => {
                    let radial = dot3(w.0, g.e);
                    let perp = sub3(w.0, scale3(radial, g.e));
                    Tangent(add3(scale3(radial, g.end_dir), perp))
                }
            }
        }
    }
}

/// The velocity `γ'(1)` of `t ↦ exp_x(t v)`, i.e. `v` transported to the endpoint.
pub fn geodesic_velocity_at_end(m: &ManifoldKind, x: &Point, v: &Tangent) -> Tangent {
    geodesic_transport(m, x, v, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S2: ManifoldKind = ManifoldKind::Sphere2;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        norm3(sub3(a, b)) <= tol
    }

    /// Central difference of `exp_map` in direction `w`, with the result
    /// expressed as a 3-vector.
    fn fd_dexp(m: &ManifoldKind, x: &Point, v: &Tangent, w: &Tangent, eps: f64) -> [f64; 3] {
        let plus = exp_map(m, x, &v.add(&w.scaled(eps)));
        let minus = exp_map(m, x, &v.sub(&w.scaled(eps)));
        scale3(0.5 / eps, sub3(plus.0, minus.0))
    }

    #[test]
    fn exp_examples() {
        let c = ManifoldKind::Circle { resolution: 16 };
        assert!((exp_map(&c, &Point::angle(1.0), &Tangent([0.5, 0.0, 0.0])).0[0] - 1.5).abs() < 1e-15);

        let y = exp_map(&S2, &Point::sphere([1.0, 0.0, 0.0]), &Tangent([0.0, PI / 2.0, 0.0]));
        assert!(close(y.0, [0.0, 1.0, 0.0], 1e-15));

        let t = ManifoldKind::Torus2 { resolution: 16 };
        let y = exp_map(&t, &Point::angles(0.1, 6.2), &Tangent([0.0, 0.2, 0.0]));
        assert!((y.0[0] - 0.1).abs() < 1e-15);
        assert!((y.0[1] - (0.2 - (TAU - 6.2))).abs() < 1e-12);
    }

    #[test]
    fn exp_at_zero_is_identity() {
        let x = Point::sphere([0.3, -0.4, 0.5]);
        assert_eq!(exp_map(&S2, &x, &Tangent::ZERO), x);
        let x = Point::angles(1.0, 2.0);
        assert_eq!(exp_map(&ManifoldKind::Torus2 { resolution: 16 }, &x, &Tangent::ZERO), x);
    }

    #[test]
    fn sphere_dexp_norms_match_finite_differences() {
        let x = Point::sphere([1.0, 0.0, 0.0]);
        for &theta in &[0.3, 1.0, 1.4] {
            let v = Tangent([0.0, theta, 0.0]);
            // orthogonal direction: expected norm sin θ / θ
            let w = Tangent([0.0, 0.0, 1.0]);
            let fd = fd_dexp(&S2, &x, &v, &w, 1e-4);
            let exact = dexp(&S2, &x, &v, &w);
            assert!(close(fd, exact.0, 1e-7));
            assert!((exact.norm() - theta.sin() / theta).abs() < 1e-14);
            // radial direction: Gauss lemma
            let w = Tangent([0.0, 1.0, 0.0]);
            let fd = fd_dexp(&S2, &x, &v, &w, 1e-4);
            assert!((norm3(fd) - 1.0).abs() < 1e-7);
            assert!((dexp(&S2, &x, &v, &w).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dexp_error_is_second_order_in_eps() {
        let x = Point::sphere([0.2, -0.5, 0.8]);
        let v = project_tangent(&x, &Tangent([0.7, 0.4, 0.1]));
        let w = project_tangent(&x, &Tangent([-0.3, 0.9, 0.5]));
        let exact = dexp(&S2, &x, &v, &w);
        let e3 = norm3(sub3(fd_dexp(&S2, &x, &v, &w, 1e-3), exact.0));
        let e4 = norm3(sub3(fd_dexp(&S2, &x, &v, &w, 1e-4), exact.0));
        // C ε² with one C for both step sizes
        assert!(e3 < 1.0 * 1e-6, "{e3}");
        assert!(e4 < 1.0 * 1e-8, "{e4}");
    }

    #[test]
    fn transport_along_equator_fixes_ez() {
        let x = Point::sphere([1.0, 0.0, 0.0]);
        let v = Tangent([0.0, PI / 2.0, 0.0]);
        let out = geodesic_transport(&S2, &x, &v, &Tangent([0.0, 0.0, 1.0]));
        assert!(close(out.0, [0.0, 0.0, 1.0], 1e-15));
        // velocity goes to the velocity
        let vel = geodesic_velocity_at_end(&S2, &x, &v);
        assert!(close(vel.0, [-PI / 2.0, 0.0, 0.0], 1e-14));
    }

    #[test]
    fn transport_is_isometric_and_invertible() {
        let x = Point::sphere([0.6, 0.0, 0.8]);
        let v = project_tangent(&x, &Tangent([0.3, 1.1, -0.2]));
        let w = project_tangent(&x, &Tangent([1.0, -0.5, 0.3]));
        let y = exp_map(&S2, &x, &v);
        let tw = geodesic_transport(&S2, &x, &v, &w);
        assert!((tw.norm() - w.norm()).abs() < 1e-12);
        assert!(dot3(tw.0, y.0).abs() < 1e-12);
        let back_v = geodesic_velocity_at_end(&S2, &x, &v).scaled(-1.0);
        let back = geodesic_transport(&S2, &y, &back_v, &tw);
        assert!(close(back.0, w.0, 1e-12));
    }

    #[test]
    fn dexp_inverse_round_trip() {
        let x = Point::sphere([0.0, 0.6, 0.8]);
        let v = project_tangent(&x, &Tangent([1.2, 0.3, -0.2]));
        let z = project_tangent(&x, &Tangent([0.4, -0.7, 0.1]));
        let w = dexp(&S2, &x, &v, &z);
        let back = dexp_inverse(&S2, &x, &v, &w).unwrap();
        assert!(close(back.0, z.0, 1e-12));
    }

    #[test]
    fn dexp_inverse_rejects_conjugate_points() {
        let x = Point::sphere([1.0, 0.0, 0.0]);
        let v = Tangent([0.0, PI, 0.0]);
        assert!(matches!(
            dexp_inverse(&S2, &x, &v, &Tangent([0.0, 0.0, 1.0])),
            Err(Error::ConjugateRadius { .. })
        ));
    }

    #[test]
    fn log_inverts_exp() {
        let x = Point::sphere([0.2, 0.3, -0.9]);
        let v = project_tangent(&x, &Tangent([0.5, -1.0, 0.2]));
        let y = exp_map(&S2, &x, &v);
        assert!(close(log_map(&S2, &x, &y).0, v.0, 1e-12));
        let t = ManifoldKind::Torus2 { resolution: 16 };
        let v = Tangent([0.4, -0.9, 0.0]);
        let x = Point::angles(6.1, 0.2);
        assert!(close(log_map(&t, &x, &exp_map(&t, &x, &v)).0, v.0, 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn tangent_at(x: &Point, a: f64, b: f64, c: f64) -> Tangent {
            project_tangent(x, &Tangent([a, b, c]))
        }

        proptest! {
            #[test]
            fn transport_linear_and_norm_preserving(
                p in prop::array::uniform3(-1.0f64..1.0),
                v in prop::array::uniform3(-1.0f64..1.0),
                w1 in prop::array::uniform3(-1.0f64..1.0),
                w2 in prop::array::uniform3(-1.0f64..1.0),
            ) {
                prop_assume!(norm3(p) > 0.1);
                let x = Point::sphere(p);
                let v = tangent_at(&x, v[0], v[1], v[2]);
                let w1 = tangent_at(&x, w1[0], w1[1], w1[2]);
                let w2 = tangent_at(&x, w2[0], w2[1], w2[2]);
                let t = |w: &Tangent| geodesic_transport(&S2, &x, &v, w);
                let sum = t(&w1.add(&w2));
                prop_assert!(close(sum.0, t(&w1).add(&t(&w2)).0, 1e-12));
                prop_assert!((t(&w1).norm() - w1.norm()).abs() < 1e-12);
            }

            #[test]
            fn sphere_points_stay_unit(
                p in prop::array::uniform3(-1.0f64..1.0),
                v in prop::array::uniform3(-2.0f64..2.0),
            ) {
                prop_assume!(norm3(p) > 0.1);
                let x = Point::sphere(p);
                let y = exp_map(&S2, &x, &tangent_at(&x, v[0], v[1], v[2]));
                prop_assert!((norm3(y.0) - 1.0).abs() < 1e-12);
            }
        }
    }
}
