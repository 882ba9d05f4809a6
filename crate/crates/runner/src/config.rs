//! Run configuration: versioned JSON, unknown fields rejected.

use std::path::{Path, PathBuf};

use qtomo::group::{ConvolutionSemigroup, GroupContext};
use qtomo::ops::{random_density, random_density_embedded, DensityOperator, Operator};
use qtomo::semigroup::TwirlMethod;
use qtomo::weyl::RepDescriptor;
use serde::{Deserialize, Serialize};

use crate::error::RunnerError;

/// The only schema version this build reads.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dequantize,
    Evolve,
    IntertwineCheck,
    StarCheck,
    GeneratorCheck,
    BochnerCheck,
}

impl ExperimentKind {
    pub fn needs_semigroup(self) -> bool {
        !matches!(self, Self::Dequantize | Self::StarCheck)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dequantize => "dequantize",
            Self::Evolve => "evolve",
            Self::IntertwineCheck => "intertwine_check",
            Self::StarCheck => "star_check",
            Self::GeneratorCheck => "generator_check",
            Self::BochnerCheck => "bochner_check",
        }
    }
}

/// Where the input state comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Seeded random density; on the plane it lives on the first `support` Fock levels.
    Random {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<usize>,
    },
    /// `|n><n|`.
    Basis { n: usize },
    /// JSON operator file, relative paths resolved against the config file.
    File { path: PathBuf },
}

/// Default support of random states on the plane.
pub const DEFAULT_PLANE_SUPPORT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Identities evaluated by exact finite sums.
    pub exact: f64,
    /// Grid identities with closed-form routes.
    pub closed_form: f64,
    /// Star-product homomorphism on the plane.
    pub star: f64,
    /// Finite generator estimate against the analytic generator.
    pub generator_finite: f64,
    /// Plane generator estimate against the multiplication symbol.
    pub generator_plane: f64,
    /// Density checks (Hermiticity, trace, positivity).
    pub density: f64,
    /// Relative error of fitted covariance slopes.
    pub slope: f64,
    /// Monte Carlo agreement, in standard errors.
    pub sigmas: f64,
    /// `exp(t L)` against the direct twirl sum.
    pub matrix_exp: f64,
    /// Heat-equation residual on the Wigner side.
    pub heat: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: 1e-12,
            closed_form: 1e-8,
            star: 1e-4,
            generator_finite: 1e-8,
            generator_plane: 1e-6,
            density: 1e-10,
            slope: 1e-3,
            sigmas: 5.0,
            matrix_exp: 1e-10,
            heat: 2e-3,
        }
    }
}

fn default_time_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_generator_step() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    pub representation: RepDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<ConvolutionSemigroup>,
    pub state: StateSpec,
    #[serde(default = "default_time_grid")]
    pub time_grid: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Twirl evaluation; defaults to exact on Z_d^2 and Monte Carlo on the plane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twirl: Option<TwirlMethod>,
    #[serde(default = "default_generator_step")]
    pub generator_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn field<T>(name: &str, message: impl Into<String>) -> Result<T, RunnerError> {
    Err(RunnerError::Config { field: name.to_string(), message: message.into() })
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::Parse(e.to_string()))
    }

    /// Reads and validates a config file; relative state paths become absolute.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let StateSpec::File { path: state } = &mut cfg.state {
            if state.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                *state = base.join(&*state);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides every seed in the config.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let StateSpec::Random { seed: s, .. } = &mut self.state {
            *s = seed;
        }
        if let Some(TwirlMethod::MonteCarlo { seed: s, .. }) = &mut self.twirl {
            *s = seed;
        }
        self
    }

    pub fn context(&self) -> GroupContext {
        self.representation.context()
    }

    pub fn twirl_method(&self) -> TwirlMethod {
        self.twirl.unwrap_or(match self.context() {
            GroupContext::Plane => TwirlMethod::MonteCarlo { samples: 200_000, seed: 0 },
            GroupContext::Finite { .. } => TwirlMethod::Exact,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut out = Vec::new();
        if let StateSpec::Random { seed, .. } = self.state {
            out.push(seed);
        }
        if let TwirlMethod::MonteCarlo { seed, .. } = self.twirl_method() {
            out.push(seed);
        }
        out
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.version != CONFIG_VERSION {
            return field("version", format!("expected {CONFIG_VERSION}, got {}", self.version));
        }
        if let Err(e) = self.representation.validate() {
            return field("representation", e.to_string());
        }
        let ctx = self.context();
        match (&self.semigroup, self.experiment.needs_semigroup()) {
            (None, true) => return field("semigroup", format!("required by {}", self.experiment.name())),
            (Some(sg), _) => {
                if let Err(e) = sg.validate() {
                    return field("semigroup", e.to_string());
                }
                if sg.context() != ctx {
                    return field("semigroup", format!("lives on {:?} but the representation is on {ctx:?}", sg.context()));
                }
            }
            (None, false) => {}
        }
        self.validate_time_grid()?;
        self.validate_state()?;
        let t = &self.tolerances;
        let tols = [
            ("tolerances.exact", t.exact),
            ("tolerances.closed_form", t.closed_form),
            ("tolerances.star", t.star),
            ("tolerances.generator_finite", t.generator_finite),
            ("tolerances.generator_plane", t.generator_plane),
            ("tolerances.density", t.density),
            ("tolerances.slope", t.slope),
            ("tolerances.sigmas", t.sigmas),
            ("tolerances.matrix_exp", t.matrix_exp),
            ("tolerances.heat", t.heat),
        ];
        for (name, v) in tols {
            if !(v > 0.0) || !v.is_finite() {
                return field(name, format!("must be positive and finite, got {v}"));
            }
        }
        if let Some(TwirlMethod::MonteCarlo { samples, .. }) = self.twirl {
            if samples == 0 {
                return field("twirl.samples", "must be at least 1");
            }
        }
        if !(self.generator_step > 0.0) || !self.generator_step.is_finite() {
            return field("generator_step", format!("must be positive, got {}", self.generator_step));
        }
        Ok(())
    }

    fn validate_time_grid(&self) -> Result<(), RunnerError> {
        let g = &self.time_grid;
        if g.is_empty() {
            return field("time_grid", "must not be empty");
        }
        if g[0] != 0.0 {
            return field("time_grid", format!("must start at 0, starts at {}", g[0]));
        }
        if g.iter().any(|t| !t.is_finite()) {
            return field("time_grid", "entries must be finite");
        }
        if let Some(w) = g.windows(2).find(|w| w[1] <= w[0]) {
            return field("time_grid", format!("must be strictly increasing ({} then {})", w[0], w[1]));
        }
        Ok(())
    }

    fn validate_state(&self) -> Result<(), RunnerError> {
        let dim = self.representation.dim();
        match &self.state {
            StateSpec::Random { support: Some(k), .. } if *k == 0 || *k > dim => {
                field("state.support", format!("must lie in 1..={dim}, got {k}"))
            }
            StateSpec::Basis { n } if *n >= dim => field("state.n", format!("must be below the dimension {dim}, got {n}")),
            StateSpec::File { path } if !path.is_file() => field("state.path", format!("{} does not exist", path.display())),
            _ => Ok(()),
        }
    }

    /// Materializes the input state.
    pub fn build_state(&self) -> Result<DensityOperator, RunnerError> {
        let dim = self.representation.dim();
        let plane = self.context() == GroupContext::Plane;
        let built = match &self.state {
            StateSpec::Random { seed, support } => match (support, plane) {
                (Some(k), _) => random_density_embedded(dim, *k, *seed),
                (None, true) => random_density_embedded(dim, DEFAULT_PLANE_SUPPORT.min(dim), *seed),
                (None, false) => random_density(dim, *seed),
            },
            StateSpec::Basis { n } => DensityOperator::basis_state(dim, *n),
            StateSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
                let op: Operator = serde_json::from_str(&text).map_err(|e| RunnerError::Config {
                    field: "state.path".into(),
                    message: format!("not an operator file: {e}"),
                })?;
                if op.dim() != dim {
                    return field("state.path", format!("operator has dimension {}, representation {dim}", op.dim()));
                }
                DensityOperator::new(op)
            }
        };
        built.map_err(|e| RunnerError::Config { field: "state".into(), message: e.to_string() })
    }
}

/// Human-readable description of the config format, printed by `qtomo schema`.
pub fn schema() -> serde_json::Value {
    serde_json::json!({
        "version": CONFIG_VERSION,
        "type": "object",
        "additionalProperties": false,
        "required": ["version", "experiment", "representation", "state"],
        "properties": {
            "version": { "const": CONFIG_VERSION },
            "experiment": { "enum": ["dequantize", "evolve", "intertwine_check", "star_check", "generator_check", "bochner_check"] },
            "representation": { "oneOf": [
                { "kind": "discrete_weyl", "d": "odd integer >= 3" },
                { "kind": "fock_displacement", "n_fock": "integer in 8..=64", "grid": { "n": "even integer", "half_width": "number > 0" } }
            ]},
            "semigroup": { "oneOf": [
                { "kind": "compound_poisson", "d": "integer", "base": { "support": "[[a, b], ...]", "weights": "[w, ...]" }, "rate": "number > 0" },
                { "kind": "gaussian", "drift": "[q, p]", "diffusion": "[[a, b], [b, c]] positive semidefinite" }
            ], "description": "required unless experiment is dequantize or star_check" },
            "state": { "oneOf": [
                { "kind": "random", "seed": "integer", "support": "optional integer" },
                { "kind": "basis", "n": "integer" },
                { "kind": "file", "path": "operator JSON {dim, re, im}" }
            ]},
            "time_grid": { "type": "array", "description": "starts at 0, strictly increasing", "default": default_time_grid() },
            "tolerances": Tolerances::default(),
            "twirl": { "oneOf": [ { "kind": "exact" }, { "kind": "monte_carlo", "samples": "integer", "seed": "integer" } ] },
            "generator_step": { "type": "number", "default": default_generator_step() },
            "output_dir": { "type": "string" }
        }
    })
}
