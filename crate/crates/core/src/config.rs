//! Run configuration read from TOML.
//!
//! Every block has defaults, so an empty file describes the J = 0 state on a
//! 32 x 32 unit square. Unknown keys are rejected and every validation error
//! names the offending key.

use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};
use crate::grid::{
    build_current_profile, build_grid, ContactSegment, CurrentProfile, Edge, Grid, Mesh,
    ProfileShape,
};
use crate::leading_order::LeadingOrderOptions;
use crate::linsolve::SolverSettings;
use crate::stability::{SpectrumMode, SpectrumOptions};
use crate::steady::SteadyOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: ParamsConfig,
    pub solver: SolverConfig,
    pub sweep: Option<SweepConfig>,
    pub evolve: EvolveConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridConfig::default(),
            params: ParamsConfig::default(),
            solver: SolverConfig::default(),
            sweep: None,
            evolve: EvolveConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Empty means the whole left edge injects and the whole right edge extracts.
    pub contacts: Vec<ContactSegment>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 32,
            ny: 32,
            lx: 1.0,
            ly: 1.0,
            contacts: Vec::new(),
        }
    }
}

/// `amplitude` and `delta` are alternative ways to set the current strength;
/// with `delta` the amplitude is chosen so that `epsilon * norm_j = delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub epsilon: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub shape: ProfileShape,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            epsilon: 0.5,
            sigma: 1.0,
            amplitude: None,
            delta: None,
            shape: ProfileShape::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Picard stopping tolerance on the H-norm increment.
    pub tol: f64,
    pub max_iter: usize,
    pub stall_window: usize,
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
    /// Linear solves inside the leading-order pipeline and the time stepper.
    pub inner_tol: f64,
    /// Linear solves inside each Picard step.
    pub picard_inner_tol: f64,
    pub inner_max_iter: usize,
    pub delta_guard: f64,
    /// Time step; defaults to `dt_guard * epsilon^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub dt_guard: f64,
    pub t_final: f64,
    pub spectrum_mode: SpectrumMode,
    pub eig_residual_tol: f64,
    pub stability_margin: f64,
    /// Worker threads for sweeps; the command line flag takes precedence.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 200,
            stall_window: 3,
            corrector_tol: 1e-10,
            corrector_max_iter: 100,
            inner_tol: 1e-12,
            picard_inner_tol: 1e-13,
            inner_max_iter: 20_000,
            delta_guard: 0.5,
            dt: None,
            dt_guard: 0.1,
            t_final: 10.0,
            spectrum_mode: SpectrumMode::Auto,
            eig_residual_tol: 1e-6,
            stability_margin: 1e-6,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Delta,
    Epsilon,
    Sigma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Sigma => "sigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeAssertion {
    /// A sweep.csv column, e.g. `one_minus_rho0_inf`.
    pub quantity: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub assert: Vec<SlopeAssertion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    /// Seeded complex noise scaled to the requested L2 norm.
    Random,
    /// Global rotation `u_s e^{i theta}` with `theta` the perturbation size.
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub perturbation: f64,
    pub kind: PerturbationKind,
    pub seed: u64,
    /// Time between trajectory samples.
    pub sample_interval: f64,
    pub fit_window: [f64; 2],
    pub compare_spectrum: bool,
    /// Largest accepted `|rate - min Re lambda| / min Re lambda`; unchecked when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_tolerance: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            perturbation: 1e-3,
            kind: PerturbationKind::Random,
            seed: 1,
            sample_interval: 0.1,
            fit_window: [2.0, 5.0],
            compare_spectrum: true,
            rate_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub dump_fields: bool,
    pub eigenpairs: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "glc-out".into(),
            dump_fields: false,
            eigenpairs: 4,
        }
    }
}

fn config_err(key: &str, message: impl Into<String>) -> GlcError {
    GlcError::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_err(&key, e.into_inner().message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx < 4 {
            return Err(config_err("grid.nx", "needs at least 4 cells"));
        }
        if g.ny < 4 {
            return Err(config_err("grid.ny", "needs at least 4 cells"));
        }
        positive("grid.lx", g.lx)?;
        positive("grid.ly", g.ly)?;
        let p = &self.params;
        if !(p.epsilon > 0.0 && p.epsilon <= 1.0) {
            return Err(config_err(
                "params.epsilon",
                format!("must lie in (0, 1], got {}", p.epsilon),
            ));
        }
        positive("params.sigma", p.sigma)?;
        match (p.amplitude, p.delta) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "params.delta",
                    "set either amplitude or delta, not both",
                ))
            }
            (Some(a), None) if !a.is_finite() || a < 0.0 => {
                return Err(config_err(
                    "params.amplitude",
                    format!("must be finite and nonnegative, got {a}"),
                ))
            }
            (None, Some(d)) if !d.is_finite() || d < 0.0 => {
                return Err(config_err(
                    "params.delta",
                    format!("must be finite and nonnegative, got {d}"),
                ))
            }
            _ => {}
        }
        let s = &self.solver;
        for (key, v) in [
            ("solver.tol", s.tol),
            ("solver.corrector_tol", s.corrector_tol),
            ("solver.inner_tol", s.inner_tol),
            ("solver.picard_inner_tol", s.picard_inner_tol),
            ("solver.delta_guard", s.delta_guard),
            ("solver.dt_guard", s.dt_guard),
            ("solver.t_final", s.t_final),
            ("solver.eig_residual_tol", s.eig_residual_tol),
            ("solver.stability_margin", s.stability_margin),
        ] {
            positive(key, v)?;
        }
        if let Some(dt) = s.dt {
            positive("solver.dt", dt)?;
        }
        for (key, v) in [
            ("solver.max_iter", s.max_iter),
            ("solver.stall_window", s.stall_window),
            ("solver.corrector_max_iter", s.corrector_max_iter),
            ("solver.inner_max_iter", s.inner_max_iter),
            ("solver.threads", s.threads),
        ] {
            if v == 0 {
                return Err(config_err(key, "must be at least 1"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(config_err("sweep.values", "sweep list is empty"));
            }
            for v in &sw.values {
                positive("sweep.values", *v)?;
            }
            if sw.values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_err(
                    "sweep.values",
                    "values must be strictly increasing",
                ));
            }
            if sw.axis == SweepAxis::Epsilon && sw.values.iter().any(|e| *e > 1.0) {
                return Err(config_err(
                    "sweep.values",
                    "epsilon values must lie in (0, 1]",
                ));
            }
            for a in &sw.assert {
                if !crate::report::SWEEP_COLUMNS.contains(&a.quantity.as_str()) {
                    return Err(config_err(
                        "sweep.assert.quantity",
                        format!("unknown column `{}`", a.quantity),
                    ));
                }
                if !(a.min <= a.max) {
                    return Err(config_err("sweep.assert.max", "max must not be below min"));
                }
            }
        }
        let e = &self.evolve;
        if !(e.perturbation >= 0.0 && e.perturbation.is_finite()) {
            return Err(config_err(
                "evolve.perturbation",
                "must be finite and nonnegative",
            ));
        }
        positive("evolve.sample_interval", e.sample_interval)?;
        if !(e.fit_window[0] >= 0.0 && e.fit_window[1] > e.fit_window[0]) {
            return Err(config_err("evolve.fit_window", "needs 0 <= start < end"));
        }
        if let Some(t) = e.rate_tolerance {
            positive("evolve.rate_tolerance", t)?;
        }
        if self.output.eigenpairs == 0 {
            return Err(config_err("output.eigenpairs", "must be at least 1"));
        }
        self.build_grid()
            .map_err(|e| config_err("grid.contacts", e.to_string()))?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let mesh = Mesh::new(g.nx, g.ny, g.lx, g.ly)?;
        let contacts = if g.contacts.is_empty() {
            vec![
                ContactSegment::full(Edge::Left, &mesh, 1.0),
                ContactSegment::full(Edge::Right, &mesh, -1.0),
            ]
        } else {
            g.contacts.clone()
        };
        build_grid(g.nx, g.ny, g.lx, g.ly, &contacts)
    }

    /// The boundary current this configuration asks for.
    pub fn build_profile(&self, grid: &Grid) -> Result<CurrentProfile> {
        let p = &self.params;
        match (p.amplitude, p.delta) {
            (_, Some(delta)) if delta > 0.0 => {
                let unit = build_current_profile(grid, 1.0, p.shape)?;
                build_current_profile(grid, delta / (p.epsilon * unit.norm_j), p.shape)
            }
            (Some(a), None) => build_current_profile(grid, a, p.shape),
            _ => Ok(CurrentProfile::zero(grid)),
        }
    }

    /// Copy with the sweep variable set to `value`.
    pub fn at_sweep_point(&self, axis: SweepAxis, value: f64) -> RunConfig {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            SweepAxis::Delta => {
                c.params.amplitude = None;
                c.params.delta = Some(value);
            }
            SweepAxis::Epsilon => c.params.epsilon = value,
            SweepAxis::Sigma => c.params.sigma = value,
        }
        c
    }

    pub fn inner_settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.solver.inner_tol,
            max_iter: self.solver.inner_max_iter,
        }
    }

    pub fn leading_order_options(&self) -> LeadingOrderOptions {
        LeadingOrderOptions {
            tol: self.solver.corrector_tol,
            max_iter: self.solver.corrector_max_iter,
            delta_guard: self.solver.delta_guard,
            inner: self.inner_settings(),
        }
    }

    pub fn steady_options(&self) -> SteadyOptions {
        SteadyOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            stall_window: self.solver.stall_window,
            inner: SolverSettings {
                tol: self.solver.picard_inner_tol,
                max_iter: self.solver.inner_max_iter,
            },
        }
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            margin: self.solver.stability_margin,
            residual_tol: self.solver.eig_residual_tol,
            ..SpectrumOptions::default()
        }
    }

    pub fn dt(&self) -> f64 {
        self.solver
            .dt
            .unwrap_or(self.solver.dt_guard * self.params.epsilon * self.params.epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match RunConfig::from_toml(text) {
            Err(GlcError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
[grid]
nx = 16
ny = 8
lx = 2.0
ly = 1.0
contacts = [
  { edge = "left", start = 0.25, end = 0.75, polarity = 1.0 },
  { edge = "right", start = 0.25, end = 0.75, polarity = -1.0 },
]
[params]
epsilon = 0.25
delta = 0.1
shape = "bump"
[sweep]
axis = "delta"
values = [0.02, 0.04]
assert = [{ quantity = "one_minus_rho0_inf", min = 1.85, max = 2.15 }]
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.grid.contacts.len(), 2);
        assert_eq!(c.params.shape, ProfileShape::Bump);
        let again = RunConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of("[grid]\nnx = \"a\""), "grid.nx");
        assert_eq!(key_of("[params]\nepsilon = 2.0"), "params.epsilon");
        assert_eq!(key_of("[solver]\ntol = -1.0"), "solver.tol");
        assert_eq!(
            key_of("[sweep]\naxis = \"delta\"\nvalues = []"),
            "sweep.values"
        );
        assert_eq!(
            key_of("[sweep]\naxis = \"delta\"\nvalues = [0.2, 0.1]"),
            "sweep.values"
        );
        assert_eq!(
            key_of("[params]\namplitude = 1.0\ndelta = 0.1"),
            "params.delta"
        );
        assert_eq!(
            key_of("[sweep]\naxis = \"mass\"\nvalues = [1.0]"),
            "sweep.axis"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[grid]\nnz = 4").unwrap_err();
        assert!(err.to_string().contains("nz"), "{err}");
    }

    #[test]
    fn delta_sets_the_profile_norm() {
        let c = RunConfig::from_toml("[params]\nepsilon = 0.5\ndelta = 0.1").unwrap();
        let g = c.build_grid().unwrap();
        let p = c.build_profile(&g).unwrap();
        assert!((0.5 * p.norm_j - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sweep_point_overrides_axis() {
        let c = RunConfig::from_toml("[params]\namplitude = 3.0").unwrap();
        let d = c.at_sweep_point(SweepAxis::Delta, 0.04);
        assert_eq!((d.params.amplitude, d.params.delta), (None, Some(0.04)));
        let e = c.at_sweep_point(SweepAxis::Epsilon, 0.25);
        assert_eq!((e.params.epsilon, e.params.amplitude), (0.25, Some(3.0)));
    }
}
