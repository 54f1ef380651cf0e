//! Transport of tangent-space measures along a geodesic of point masses.
//!
//! Along `c(t) = δ_{γ(t)}` a tangent vector of the Wasserstein space is a
//! probability measure on `T_{γ(t)}M`. One leg of the scheme pulls such a
//! measure back by `(d exp_{γ_i(0)})⁻¹` at the leg velocity, and the product
//! over all legs is compared with the pushforward by Riemannian parallel
//! transport.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::manifold::{dexp_inverse, exp_map, geodesic_transport, project_tangent, ManifoldKind, Point, Tangent};
use crate::measure::AtomicMeasure;

pub type TangentMeasure = AtomicMeasure<Tangent>;

/// `t ↦ exp_x(t v)` on `[0, 1]`, cut into `q` legs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGeodesic {
    manifold: ManifoldKind,
    base: Point,
    velocity: Tangent,
    q: usize,
}

impl DeltaGeodesic {
    /// On the sphere the velocity is projected onto `T_x S²` and its length
    /// must not exceed a quarter turn.
    pub fn new(manifold: ManifoldKind, base: Point, velocity: Tangent, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("leg count must be positive".into()));
        }
        let (base, velocity) = match manifold {
            ManifoldKind::Sphere2 => {
                let base = Point::sphere(base.0);
                (base, project_tangent(&base, &velocity))
            }
            ManifoldKind::Circle { .. } => (Point::angle(base.0[0]), Tangent([velocity.0[0], 0.0, 0.0])),
            ManifoldKind::Torus2 { .. } => {
                (Point::angles(base.0[0], base.0[1]), Tangent([velocity.0[0], velocity.0[1], 0.0]))
            }
        };
        if !velocity.0.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("velocity must be finite".into()));
        }
        if !manifold.is_flat() && velocity.norm() > FRAC_PI_2 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "geodesic length {} exceeds a quarter great circle",
                velocity.norm()
            )));
        }
        Ok(Self { manifold, base, velocity, q })
    }

    pub fn manifold(&self) -> &ManifoldKind {
        &self.manifold
    }

    pub fn base(&self) -> Point {
        self.base
    }

    pub fn velocity(&self) -> Tangent {
        self.velocity
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn with_q(&self, q: usize) -> Result<Self> {
        Self::new(self.manifold, self.base, self.velocity, q)
    }

    pub fn point_at(&self, t: f64) -> Point {
        exp_map(&self.manifold, &self.base, &self.velocity.scaled(t))
    }

    /// `γ'(t)`, a tangent vector at `point_at(t)`.
    pub fn velocity_at(&self, t: f64) -> Tangent {
        geodesic_transport(&self.manifold, &self.base, &self.velocity.scaled(t), &self.velocity)
    }

    /// Start point and velocity of leg `i`, `u ↦ γ((i + u)/q)`.
    pub fn leg(&self, i: usize) -> (Point, Tangent) {
        let t = i as f64 / self.q as f64;
        (self.point_at(t), self.velocity_at(t).scaled(1.0 / self.q as f64))
    }

    /// Parallel transport from `T_{γ(1)}M` back to `T_{γ(0)}M`.
    pub fn reverse_transport(&self, w: &Tangent) -> Tangent {
        let end = self.point_at(1.0);
        let back = self.velocity_at(1.0).scaled(-1.0);
        geodesic_transport(&self.manifold, &end, &back, w)
    }
}

/// Pulls `ν` on `T_{exp(start, leg_velocity)}M` back to `T_{start}M` through
/// `(d exp_{start}|_{leg_velocity})⁻¹`.
pub fn delta_leg_map(
    m: &ManifoldKind,
    start: &Point,
    leg_velocity: &Tangent,
    nu: &TangentMeasure,
) -> Result<TangentMeasure> {
    nu.try_map(|w| dexp_inverse(m, start, leg_velocity, w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRun {
    /// `P_0 ∘ … ∘ P_{Q−1}` applied to `ν₁`.
    pub nu0: TangentMeasure,
    /// `Π_* ν₁`.
    pub reference: TangentMeasure,
    /// `(Σ_k w_k |a_k − b_k|²)^{1/2}` between matching atoms.
    pub err: f64,
}

/// Atoms of `nu1` are tangent vectors at `γ(1)`.
pub fn run_delta_scheme(g: &DeltaGeodesic, nu1: &TangentMeasure) -> Result<DeltaRun> {
    let m = g.manifold();
    let end = g.point_at(1.0);
    let nu1 = nu1.try_map(|w| Ok(tangent_at(m, &end, w)))?;
    let mut nu = nu1.clone();
    for i in (0..g.q()).rev() {
        let (start, v) = g.leg(i);
        nu = delta_leg_map(m, &start, &v, &nu)?;
    }
    let reference = nu1.try_map(|w| Ok(g.reverse_transport(w)))?;
    let err = atomwise_distance(&nu, &reference);
    Ok(DeltaRun { nu0: nu, reference, err })
}

fn tangent_at(m: &ManifoldKind, x: &Point, w: &Tangent) -> Tangent {
    match m {
        ManifoldKind::Sphere2 => project_tangent(x, w),
        _ => *w,
    }
}

/// Coupling distance of two measures whose atoms are paired by index.
pub fn atomwise_distance(a: &TangentMeasure, b: &TangentMeasure) -> f64 {
    a.atoms()
        .iter()
        .zip(b.atoms())
        .map(|((x, w), (y, _))| w * x.sub(y).norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::log_map;
    use proptest::prelude::*;

    const S2: ManifoldKind = ManifoldKind::Sphere2;

    fn single(w: [f64; 3]) -> TangentMeasure {
        AtomicMeasure::new(vec![(Tangent(w), 1.0)]).unwrap()
    }

    fn tilted() -> DeltaGeodesic {
        let x = Point::sphere([1.0, 0.2, 0.4]);
        let v = project_tangent(&x, &Tangent([0.1, 1.0, -0.3]));
        DeltaGeodesic::new(S2, x, v.scaled(1.2 / v.norm()), 1).unwrap()
    }

    fn cloud(g: &DeltaGeodesic) -> TangentMeasure {
        let end = g.point_at(1.0);
        let raw = [
            [0.3, 0.1, -0.2],
            [-0.1, 0.4, 0.2],
            [0.0, -0.2, 0.45],
            [0.25, 0.25, 0.25],
            [-0.35, 0.0, 0.1],
        ];
        let atoms = raw.iter().map(|w| (project_tangent(&end, &Tangent(*w)), 0.2)).collect();
        AtomicMeasure::new(atoms).unwrap()
    }

    #[test]
    fn flat_legs_translate_charts() {
        let torus = ManifoldKind::Torus2 { resolution: 32 };
        let g = DeltaGeodesic::new(torus, Point::angles(0.3, 6.0), Tangent([1.5, -2.0, 0.0]), 5).unwrap();
        let nu = AtomicMeasure::new(vec![(Tangent([0.2, 0.1, 0.0]), 0.5), (Tangent([-1.0, 3.0, 0.0]), 0.5)]).unwrap();
        for q in [1, 5] {
            let run = run_delta_scheme(&g.with_q(q).unwrap(), &nu).unwrap();
            assert_eq!(run.nu0, nu);
            assert_eq!(run.err, 0.0);
        }
    }

    #[test]
    fn zero_atom_is_fixed() {
        let g = tilted().with_q(8).unwrap();
        let run = run_delta_scheme(&g, &single([0.0; 3])).unwrap();
        assert_eq!(run.nu0.atoms()[0].0.norm(), 0.0);
    }

    #[test]
    fn orthogonal_atom_is_rescaled_to_unit_norm() {
        let theta = 0.9;
        let x = Point::sphere([1.0, 0.0, 0.0]);
        let v = Tangent([0.0, theta, 0.0]);
        let w = Tangent([0.0, 0.0, theta.sin() / theta]);
        let out = delta_leg_map(&S2, &x, &v, &single(w.0)).unwrap();
        assert!((out.atoms()[0].0.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn equator_quarter_arc_keeps_vertical_atom() {
        let g = DeltaGeodesic::new(S2, Point::sphere([1.0, 0.0, 0.0]), Tangent([0.0, FRAC_PI_2, 0.0]), 64).unwrap();
        let run = run_delta_scheme(&g, &single([0.0, 0.0, 0.1])).unwrap();
        let z = run.nu0.atoms()[0].0;
        assert!(z.sub(&Tangent([0.0, 0.0, 0.1])).norm() <= 1e-3, "{z:?}");
        assert!(run.reference.atoms()[0].0.sub(&Tangent([0.0, 0.0, 0.1])).norm() <= 1e-15);
    }

    #[test]
    fn velocity_limit_enforced() {
        let x = Point::sphere([0.0, 0.0, 1.0]);
        assert!(DeltaGeodesic::new(S2, x, Tangent([1.6, 0.0, 0.0]), 4).is_err());
        assert!(DeltaGeodesic::new(S2, x, Tangent([FRAC_PI_2, 0.0, 0.0]), 4).is_ok());
        assert!(DeltaGeodesic::new(S2, x, Tangent([0.1, 0.0, 0.0]), 0).is_err());
    }

    #[test]
    fn error_decays_at_first_order() {
        let g = tilted();
        let nu = cloud(&g);
        let errs: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&q| run_delta_scheme(&g.with_q(q).unwrap(), &nu).unwrap().err)
            .collect();
        assert!(errs[0] > 1e-6);
        assert!(errs.windows(2).all(|w| w[1] <= 0.75 * w[0]), "{errs:?}");
    }

    #[test]
    fn weights_and_count_preserved() {
        let g = tilted().with_q(16).unwrap();
        let nu = cloud(&g);
        let run = run_delta_scheme(&g, &nu).unwrap();
        assert_eq!(run.nu0.len(), nu.len());
        for ((_, a), (_, b)) in run.nu0.atoms().iter().zip(nu.atoms()) {
            assert_eq!(a, b);
        }
        let start = g.base();
        for (z, _) in run.nu0.atoms() {
            assert!(z.dot(&Tangent(start.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn finite_step_matches_closed_form() {
        let g = tilted().with_q(8).unwrap();
        let (start, v) = g.leg(3);
        let end = exp_map(&S2, &start, &v);
        let w = project_tangent(&end, &Tangent([0.2, -0.3, 0.5]));
        let exact = dexp_inverse(&S2, &start, &v, &w).unwrap();
        let s = 1e-3;
        let moved = exp_map(&S2, &end, &w.scaled(s));
        let fd = log_map(&S2, &start, &moved).sub(&v).scaled(1.0 / s);
        assert!(fd.sub(&exact).norm() <= 10.0 * s * w.norm(), "{:?} {:?}", fd, exact);
    }

    proptest! {
        #[test]
        fn per_leg_norm_inflation_is_small(
            q in 4usize..64,
            i in 0usize..4,
            w in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let g = tilted().with_q(q).unwrap();
            let (start, v) = g.leg(i);
            let end = exp_map(&S2, &start, &v);
            let w = project_tangent(&end, &Tangent(w));
            prop_assume!(w.norm() > 1e-6);
            let z = dexp_inverse(&S2, &start, &v, &w).unwrap();
            let ratio = z.norm() / w.norm();
            let theta = v.norm();
            prop_assert!(ratio >= 1.0 - 1e-12);
            prop_assert!(ratio <= 1.0 + theta * theta / 5.0);
        }
    }
}
