use serde::{Deserialize, Serialize};
use wptlab::manifold::ManifoldKind;
use wptlab::scenario::{GridScenario, Scenario, ScenarioName, TrigTerm};
use wptlab::transport_pde::InitialGuess;

/// A problem with the configuration document itself.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SchemaError {}

fn schema(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub manifold: Option<ManifoldKind>,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    #[serde(default)]
    pub potential_scale: Option<f64>,
    /// Terms of `η1`; grid scenarios only.
    #[serde(default)]
    pub terminal: Option<Vec<TrigTerm>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_q")]
    pub q: Vec<usize>,
    /// Sample stride of per-time tables; defaults to a tenth of the steps.
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default = "default_scheme_tol")]
    pub scheme_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_q() -> Vec<usize> {
    vec![8, 16, 32, 64]
}

fn default_scheme_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            steps: None,
            q: default_q(),
            stride: None,
            scheme_tol: default_scheme_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default)]
    pub label: Option<String>,
    /// Worker threads for sweep points; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_guess")]
    pub initial_guess: InitialGuess,
    /// Amplitude of `∇ sin x` added to the terminal field before the weak
    /// residual is evaluated.
    #[serde(default)]
    pub corrupt_endpoint: f64,
}

fn default_guess() -> InitialGuess {
    InitialGuess::Previous
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            label: None,
            threads: None,
            initial_guess: default_guess(),
            corrupt_endpoint: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub mass: f64,
    pub continuity_residual: f64,
    pub pairing_drift: f64,
    pub weak_residual: f64,
    /// `err_0 / ‖∇η1‖` at every Q.
    pub relative_err_0: f64,
    /// Bound on `err(2Q) / err(Q)` between consecutive Q values.
    pub contraction: f64,
    pub norm_drift: f64,
    /// `c` in `‖𝒱_Q(0)‖ ≥ ‖∇η1‖ − c/Q`.
    pub norm_deficit: f64,
    /// Delta-case error at the largest Q.
    pub delta_err: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: 1e-10,
            continuity_residual: 1e-4,
            pairing_drift: 1e-4,
            weak_residual: 1e-3,
            relative_err_0: 0.05,
            contraction: 0.75,
            norm_drift: 0.1,
            norm_deficit: 2.0,
            delta_err: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Also write grid dumps under `fields/`.
    #[serde(default)]
    pub fields: bool,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let raw: Config = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        raw.resolve()
    }

    /// Fills every default from the named scenario and validates the result.
    pub fn resolve(mut self) -> Result<Self, SchemaError> {
        let base = Scenario::builtin(self.scenario.name);
        let native = base.manifold();
        let manifold = match self.manifold {
            None => native,
            Some(m) => {
                if std::mem::discriminant(&m) != std::mem::discriminant(&native) {
                    return Err(schema(format!(
                        "scenario {:?} lives on {:?}, not {:?}",
                        self.scenario.name, native, m
                    )));
                }
                m
            }
        };
        if let Some(Err(e)) = manifold.grid() {
            return Err(schema(e.to_string()));
        }
        self.manifold = Some(manifold);

        match base {
            Scenario::Grid(g) => {
                let scale = self.scenario.potential_scale.unwrap_or(1.0);
                if !scale.is_finite() {
                    return Err(schema("potential_scale must be finite"));
                }
                self.scenario.potential_scale = Some(scale);
                let terminal = self.scenario.terminal.take().unwrap_or(g.terminal);
                if terminal.is_empty() || terminal.iter().any(|t| !t.coef.is_finite()) {
                    return Err(schema("terminal needs at least one finite term"));
                }
                self.scenario.terminal = Some(terminal);
                let steps = self.discretization.steps.unwrap_or(g.steps);
                if steps < 4 {
                    return Err(schema("steps must be at least 4"));
                }
                self.discretization.steps = Some(steps);
            }
            Scenario::Delta(_) => {
                if self.scenario.potential_scale.is_some() || self.scenario.terminal.is_some() {
                    return Err(schema("delta scenarios take no potential_scale or terminal"));
                }
                if self.discretization.steps.is_some() {
                    return Err(schema("delta scenarios take no steps"));
                }
            }
        }
        let d = &self.discretization;
        if d.q.is_empty() || d.q.contains(&0) {
            return Err(schema("q must list positive leg counts"));
        }
        if !(d.scheme_tol > 0.0) || d.max_iter == 0 {
            return Err(schema("scheme_tol and max_iter must be positive"));
        }
        if d.stride == Some(0) {
            return Err(schema("stride must be positive"));
        }
        if self.experiment.threads == Some(0) {
            return Err(schema("threads must be positive"));
        }
        Ok(self)
    }

    /// The grid scenario with all overrides applied.
    pub fn grid_scenario(&self) -> Result<GridScenario, SchemaError> {
        let Scenario::Grid(g) = Scenario::builtin(self.scenario.name) else {
            return Err(schema(format!("{:?} is not a grid scenario", self.scenario.name)));
        };
        let mut g = g.with_potential_scale(self.scenario.potential_scale.unwrap_or(1.0));
        g.manifold = self.manifold.unwrap_or(g.manifold);
        if let Some(t) = &self.scenario.terminal {
            g.terminal = t.clone();
        }
        if let Some(s) = self.discretization.steps {
            g.steps = s;
        }
        Ok(g)
    }

    pub fn stride(&self, steps: usize) -> usize {
        self.discretization.stride.unwrap_or((steps / 10).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = Config::parse(r#"{"scenario": {"name": "s1-default"}}"#).unwrap();
        assert_eq!(c.manifold, Some(ManifoldKind::Circle { resolution: 256 }));
        assert_eq!(c.discretization.steps, Some(960));
        assert_eq!(c.discretization.q, vec![8, 16, 32, 64]);
        assert_eq!(c.scenario.terminal.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Config::parse(r#"{"scenario": {"name": "s1-default", "extra": 1}}"#).is_err());
        assert!(Config::parse(r#"{"scenario": {"name": "s1-default"}, "bogus": {}}"#).is_err());
        assert!(Config::parse(r#"{"scenario": {"name": "nowhere"}}"#).is_err());
        assert!(Config::parse(r#"{"scenario": {"name": "s1-default"}, "manifold": {"kind": "circle", "resolution": 64, "x": 1}}"#).is_err());
    }

    #[test]
    fn manifold_must_match_scenario() {
        let bad = r#"{"scenario": {"name": "s1-default"}, "manifold": {"kind": "torus2", "resolution": 32}}"#;
        assert!(Config::parse(bad).is_err());
        let odd = r#"{"scenario": {"name": "s1-default"}, "manifold": {"kind": "circle", "resolution": 33}}"#;
        assert!(Config::parse(odd).is_err());
        let ok = r#"{"scenario": {"name": "s1-default"}, "manifold": {"kind": "circle", "resolution": 64}}"#;
        assert_eq!(Config::parse(ok).unwrap().manifold, Some(ManifoldKind::Circle { resolution: 64 }));
    }

    #[test]
    fn delta_scenarios_reject_grid_options() {
        assert!(Config::parse(r#"{"scenario": {"name": "sphere-delta-default"}, "discretization": {"steps": 10}}"#).is_err());
        assert!(Config::parse(r#"{"scenario": {"name": "torus-delta-default"}}"#).is_ok());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = Config::parse(r#"{"scenario": {"name": "t2-default", "potential_scale": 0.5}}"#).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let again = Config::parse(&text).unwrap();
        assert_eq!(serde_json::to_string(&again).unwrap(), text);
        let g = again.grid_scenario().unwrap();
        assert_eq!(g.potential[0].coef, 0.05);
    }
}
