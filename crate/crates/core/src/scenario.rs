//! Built-in experiment set-ups.

use serde::{Deserialize, Serialize};

use crate::delta::{DeltaGeodesic, TangentMeasure};
use crate::error::{Error, Result};
use crate::geodesic::{generate_geodesic, GeodesicPath};
use crate::manifold::{grad, project_tangent, Grid, ManifoldKind, Point, ScalarField, Tangent, VectorField};
use crate::measure::{AtomicMeasure, Density};
use crate::weak::Trig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    S1Default,
    T2Default,
    SphereDeltaDefault,
    TorusDeltaDefault,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::S1Default,
        ScenarioName::T2Default,
        ScenarioName::SphereDeltaDefault,
        ScenarioName::TorusDeltaDefault,
    ];

    pub fn is_delta(&self) -> bool {
        matches!(self, ScenarioName::SphereDeltaDefault | ScenarioName::TorusDeltaDefault)
    }
}

/// `coef · mode(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coef: f64,
    pub mode: Trig,
}

impl TrigTerm {
    pub fn new(coef: f64, mode: Trig) -> Self {
        Self { coef, mode }
    }
}

/// `Σ coef · mode(x)` on the grid.
pub fn sample_terms(grid: &Grid, terms: &[TrigTerm]) -> ScalarField {
    terms
        .iter()
        .fold(ScalarField::zeros(grid), |acc, t| acc.add_scaled(t.coef, &t.mode.sample(grid)))
}

/// A displacement geodesic of densities on a periodic grid together with a
/// terminal field `∇η1` to transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridScenario {
    pub manifold: ManifoldKind,
    /// Unnormalized initial density.
    pub density: Vec<TrigTerm>,
    pub potential: Vec<TrigTerm>,
    pub terminal: Vec<TrigTerm>,
    pub steps: usize,
}

impl GridScenario {
    pub fn s1_default() -> Self {
        Self {
            manifold: ManifoldKind::Circle { resolution: 256 },
            density: vec![TrigTerm::new(1.0, Trig::Constant), TrigTerm::new(0.3, Trig::Cos([1, 0]))],
            potential: vec![TrigTerm::new(0.2, Trig::Sin([1, 0]))],
            terminal: vec![TrigTerm::new(1.0, Trig::Cos([1, 0])), TrigTerm::new(1.0, Trig::Sin([2, 0]))],
            steps: 960,
        }
    }

    /// `μ0 ∝ 1 + 0.2 cos x cos y`, written as two diagonal modes.
    pub fn t2_default() -> Self {
        Self {
            manifold: ManifoldKind::Torus2 { resolution: 64 },
            density: vec![
                TrigTerm::new(1.0, Trig::Constant),
                TrigTerm::new(0.1, Trig::Cos([1, 1])),
                TrigTerm::new(0.1, Trig::Cos([1, -1])),
            ],
            potential: vec![TrigTerm::new(0.1, Trig::Sin([1, 0])), TrigTerm::new(0.15, Trig::Sin([0, 1]))],
            terminal: vec![TrigTerm::new(1.0, Trig::Cos([1, 0])), TrigTerm::new(1.0, Trig::Cos([0, 1]))],
            steps: 192,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        self.manifold
            .grid()
            .unwrap_or_else(|| Err(Error::InvalidArgument("scenario manifold has no grid".into())))
    }

    pub fn initial_density(&self) -> Result<Density> {
        Density::normalized(sample_terms(&self.grid()?, &self.density))
    }

    pub fn initial_potential(&self) -> Result<ScalarField> {
        Ok(sample_terms(&self.grid()?, &self.potential))
    }

    pub fn terminal_potential(&self) -> Result<ScalarField> {
        Ok(sample_terms(&self.grid()?, &self.terminal))
    }

    pub fn terminal_field(&self) -> Result<VectorField> {
        Ok(grad(&self.terminal_potential()?))
    }

    /// Multiplies the initial potential by `s`.
    pub fn with_potential_scale(mut self, s: f64) -> Self {
        for t in &mut self.potential {
            t.coef *= s;
        }
        self
    }

    pub fn path(&self) -> Result<GeodesicPath> {
        generate_geodesic(&self.initial_density()?, &self.initial_potential()?, self.steps)
    }
}

/// A geodesic of point masses `δ_{exp_x(tv)}` and a cloud of atoms in the
/// tangent space at its endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaScenario {
    pub manifold: ManifoldKind,
    pub base: [f64; 3],
    pub velocity: [f64; 3],
    /// `(vector, weight)`; projected onto the tangent space at `γ(1)`.
    pub atoms: Vec<([f64; 3], f64)>,
}

impl DeltaScenario {
    /// A great-circle arc of length about 1.04 tilted against the coordinate
    /// planes, with five equally weighted atoms of norm at most 0.5.
    pub fn sphere_delta_default() -> Self {
        Self {
            manifold: ManifoldKind::Sphere2,
            base: [1.0, 0.2, 0.4],
            velocity: [0.1, 1.0, -0.3],
            atoms: Self::cloud(),
        }
    }

    pub fn torus_delta_default() -> Self {
        Self {
            manifold: ManifoldKind::Torus2 { resolution: 64 },
            base: [0.3, 1.1, 0.0],
            velocity: [1.0, -0.6, 0.0],
            atoms: Self::cloud().into_iter().map(|(w, p)| ([w[0], w[1], 0.0], p)).collect(),
        }
    }

    fn cloud() -> Vec<([f64; 3], f64)> {
        vec![
            ([0.3, 0.1, -0.2], 0.2),
            ([-0.1, 0.4, 0.2], 0.2),
            ([0.0, -0.2, 0.45], 0.2),
            ([0.25, 0.25, 0.25], 0.2),
            ([-0.35, 0.0, 0.1], 0.2),
        ]
    }

    /// On the sphere the velocity is projected onto the tangent plane at the
    /// normalized base point.
    pub fn geodesic(&self, q: usize) -> Result<DeltaGeodesic> {
        let base = match self.manifold {
            ManifoldKind::Sphere2 => Point::sphere(self.base),
            _ => Point(self.base),
        };
        let mut v = Tangent(self.velocity);
        if self.manifold == ManifoldKind::Sphere2 {
            v = project_tangent(&base, &v);
        }
        DeltaGeodesic::new(self.manifold, base, v, q)
    }

    pub fn terminal_measure(&self) -> Result<TangentMeasure> {
        let end = self.geodesic(1)?.point_at(1.0);
        let atoms = self
            .atoms
            .iter()
            .map(|(w, p)| {
                let w = Tangent(*w);
                let w = if self.manifold == ManifoldKind::Sphere2 { project_tangent(&end, &w) } else { w };
                (w, *p)
            })
            .collect();
        AtomicMeasure::new(atoms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Grid(GridScenario),
    Delta(DeltaScenario),
}

impl Scenario {
    pub fn builtin(name: ScenarioName) -> Self {
        match name {
            ScenarioName::S1Default => Scenario::Grid(GridScenario::s1_default()),
            ScenarioName::T2Default => Scenario::Grid(GridScenario::t2_default()),
            ScenarioName::SphereDeltaDefault => Scenario::Delta(DeltaScenario::sphere_delta_default()),
            ScenarioName::TorusDeltaDefault => Scenario::Delta(DeltaScenario::torus_delta_default()),
        }
    }

    pub fn manifold(&self) -> ManifoldKind {
        match self {
            Scenario::Grid(g) => g.manifold,
            Scenario::Delta(d) => d.manifold,
        }
    }
}
