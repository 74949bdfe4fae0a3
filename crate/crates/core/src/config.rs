//! TOML run configuration: a declarative description of a scenario, its
//! sampler family, and the detection mode, parsed into the runtime types.

use crate::detector::{Algorithm, ThresholdExponent};
use crate::error::{Error, Result};
use crate::forcing::{BackgroundSource, BurstEvent, BurstTrain, DecayProfile, NoiseModel};
use crate::sampling::SamplerSet;
use crate::semigroup::SemigroupModel;
use crate::solver::{ModelParams, Scenario};
use crate::space::{FunctionExpr, Representation, SpaceElement, DEFAULT_N_GRID};
use serde::Deserialize;

/// Human-readable description of the config file format, printed by
/// `--print-schema`.
pub const SCHEMA: &str = r#"Run configuration (TOML)

[space]
representation = "grid-l2" | "abstract"   # function space realization
n_grid = 1025                             # grid-l2: sample-point count (>= 2)
dim = 1                                   # abstract: coordinate count

[semigroup]
kind = "scalar" | "diagonal" | "matrix"
a = 1.0                 # scalar: T(t) = e^{at} I
lambdas = [ -1.0, 0.5 ] # diagonal: T(t) = diag(e^{lambda_k t})
rows = [[0.0, 1.0], [-1.0, 0.0]]  # matrix: generator A, row-major
m = 1.0                 # matrix: growth constant M (>= 1)
growth = 0.0            # matrix: growth exponent a in |T(t)| <= M e^{at}

[initial]               # u(0); one of:
function = { kind = "const", c = 0.0 }    # grid-l2 elements
coeffs = [0.0]                            # abstract elements

[decay]
kind = "exponential" | "exp-mix"
rho = 1.0               # envelope rate: 0 < phi(t) <= e^{-rho t}
terms = [[0.5, 2.0], [0.5, 1.0]]  # exp-mix: [weight, rate] pairs;
                                  # weights sum to 1, rates >= rho

[[burst]]               # zero or more, strictly increasing positive times
time = 0.25
function = { kind = "sin", c = 3.0 }      # or coeffs = [...]

[background]
kind = "zero" | "exp" | "sin"   # eta = 0, x e^{-Lt}, or x sin(Lt)
rate = 0.01                      # the L above
function = { kind = "poly", coeffs = [0.0, 1.0] }  # the x; or coeffs

[noise]
sigma = 1e-3            # measurements are exact values + uniform [-sigma, sigma]
seed = 1

[[sampler]]             # one or more measurement functionals g
function = { kind = "const", c = 1.0 }    # or coeffs = [...]

[run]
beta = 0.015            # sampling step
horizon = 1.0           # scan horizon T
algorithm = "alg1" | "alg2"
d_gap = 8.6             # alg2: minimum extra burst gap D
h_bound = 2.6           # optional: uniform shape-norm bound H (default: realized max)
threshold_exponent = "rho-beta" | "beta"  # middle threshold term variant

Function kinds: sin {c}, cos {c}, poly {coeffs ascending}, const {c}.
"#;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub semigroup: SemigroupConfig,
    pub initial: ElementSpec,
    pub decay: DecayConfig,
    #[serde(default, rename = "burst")]
    pub bursts: Vec<BurstConfig>,
    pub background: BackgroundConfig,
    pub noise: NoiseConfig,
    #[serde(rename = "sampler")]
    pub samplers: Vec<ElementSpec>,
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpaceConfig {
    pub representation: ReprConfig,
    pub n_grid: Option<usize>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReprConfig {
    GridL2,
    Abstract,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SemigroupConfig {
    pub kind: String,
    pub a: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub rows: Option<Vec<Vec<f64>>>,
    pub m: Option<f64>,
    pub growth: Option<f64>,
}

/// An element given either as a closed-form function (grid-l2) or raw
/// coordinates (abstract).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ElementSpec {
    pub function: Option<FunctionExpr>,
    pub coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DecayConfig {
    pub kind: String,
    pub rho: f64,
    pub terms: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BurstConfig {
    pub time: f64,
    #[serde(flatten)]
    pub shape: ElementSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BackgroundConfig {
    pub kind: String,
    #[serde(default)]
    pub rate: f64,
    #[serde(flatten)]
    pub x: ElementSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunSection {
    pub beta: f64,
    pub horizon: f64,
    pub algorithm: String,
    pub d_gap: Option<f64>,
    pub h_bound: Option<f64>,
    pub threshold_exponent: Option<String>,
}

/// A parsed configuration resolved into runtime objects. Keeps the source
/// config so element functions can be re-sampled at other resolutions.
#[derive(Debug, Clone)]
pub struct BuiltRun {
    pub scenario: Scenario,
    pub samplers: SamplerSet,
    pub algorithm: Algorithm,
    pub exponent: ThresholdExponent,
    pub config: RunConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    fn grid_points(&self) -> usize {
        self.space.n_grid.unwrap_or(DEFAULT_N_GRID)
    }

    /// Resolve one element spec at the scenario's representation, with the
    /// grid resolution scaled by `resolution` (1 = scenario grid).
    pub fn element(&self, spec: &ElementSpec, resolution: usize) -> Result<SpaceElement> {
        match self.space.representation {
            ReprConfig::GridL2 => {
                let expr = spec.function.as_ref().ok_or_else(|| {
                    Error::Config("grid-l2 elements need a `function` entry".into())
                })?;
                let n = self.grid_points();
                let n_scaled = (n - 1) * resolution + 1;
                Ok(SpaceElement::from_function(expr, n_scaled))
            }
            ReprConfig::Abstract => {
                let coeffs = spec
                    .coeffs
                    .as_ref()
                    .ok_or_else(|| Error::Config("abstract elements need a `coeffs` entry".into()))?;
                if resolution != 1 {
                    return Err(Error::Config(
                        "abstract elements have no grid to refine".into(),
                    ));
                }
                Ok(SpaceElement::new(coeffs.clone(), Representation::Abstract))
            }
        }
    }

    fn expected_dim(&self) -> Result<usize> {
        match self.space.representation {
            ReprConfig::GridL2 => {
                let n = self.grid_points();
                if n < 2 {
                    return Err(Error::Config(format!("n-grid must be >= 2, got {n}")));
                }
                Ok(n)
            }
            ReprConfig::Abstract => {
                self.space.dim.ok_or_else(|| Error::Config("abstract space needs `dim`".into()))
            }
        }
    }

    fn build_semigroup(&self) -> Result<SemigroupModel> {
        let sg = &self.semigroup;
        match sg.kind.as_str() {
            "scalar" => {
                let a = sg.a.ok_or_else(|| Error::Config("scalar semigroup needs `a`".into()))?;
                Ok(SemigroupModel::scalar(a))
            }
            "diagonal" => {
                let l = sg
                    .lambdas
                    .clone()
                    .ok_or_else(|| Error::Config("diagonal semigroup needs `lambdas`".into()))?;
                SemigroupModel::diagonal(l)
            }
            "matrix" => {
                let rows = sg
                    .rows
                    .clone()
                    .ok_or_else(|| Error::Config("matrix semigroup needs `rows`".into()))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("matrix rows must form a square matrix".into()));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let a_mat = nalgebra::DMatrix::from_row_slice(n, n, &flat);
                let m = sg.m.unwrap_or(1.0);
                let growth = sg
                    .growth
                    .ok_or_else(|| Error::Config("matrix semigroup needs `growth`".into()))?;
                SemigroupModel::matrix(a_mat, m, growth)
            }
            other => Err(Error::Config(format!("unknown semigroup kind `{other}`"))),
        }
    }

    fn build_decay(&self) -> Result<DecayProfile> {
        match self.decay.kind.as_str() {
            "exponential" => DecayProfile::exponential(self.decay.rho),
            "exp-mix" => {
                let terms = self
                    .decay
                    .terms
                    .clone()
                    .ok_or_else(|| Error::Config("exp-mix decay needs `terms`".into()))?;
                DecayProfile::exp_mix(self.decay.rho, terms)
            }
            other => Err(Error::Config(format!("unknown decay kind `{other}`"))),
        }
    }

    fn build_background(&self) -> Result<BackgroundSource> {
        let repr = match self.space.representation {
            ReprConfig::GridL2 => Representation::GridL2,
            ReprConfig::Abstract => Representation::Abstract,
        };
        match self.background.kind.as_str() {
            "zero" => Ok(BackgroundSource::zero(self.expected_dim()?, repr)),
            "exp" => BackgroundSource::exp_profile(
                self.element(&self.background.x, 1)?,
                self.background.rate,
            ),
            "sin" => BackgroundSource::sin_profile(
                self.element(&self.background.x, 1)?,
                self.background.rate,
            ),
            other => Err(Error::Config(format!("unknown background kind `{other}`"))),
        }
    }

    pub fn build(self) -> Result<BuiltRun> {
        let dim = self.expected_dim()?;
        let semigroup = self.build_semigroup()?;
        let decay = self.build_decay()?;
        let u0 = self.element(&self.initial, 1)?;
        if u0.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: u0.dim() });
        }
        let repr = u0.representation();
        let bursts = if self.bursts.is_empty() {
            BurstTrain::empty(dim, repr, decay)
        } else {
            let events = self
                .bursts
                .iter()
                .map(|b| Ok(BurstEvent { time: b.time, shape: self.element(&b.shape, 1)? }))
                .collect::<Result<Vec<_>>>()?;
            BurstTrain::new(events, decay, self.run.h_bound)?
        };
        let background = self.build_background()?;
        let noise = NoiseModel::new(self.noise.sigma, self.noise.seed)?;
        let params = ModelParams::new(self.decay.rho, self.run.beta, self.noise.sigma, self.run.horizon)?
            .with_d_gap(self.run.d_gap.unwrap_or(0.0))?;
        let scenario = Scenario::new(semigroup, u0, bursts, background, noise, params)?;
        let samplers = SamplerSet::new(
            self.samplers
                .iter()
                .map(|s| self.element(s, 1))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let algorithm = match self.run.algorithm.as_str() {
            "alg1" => Algorithm::Alg1,
            "alg2" => Algorithm::Alg2,
            other => return Err(Error::Config(format!("unknown algorithm `{other}`"))),
        };
        let exponent = match self.run.threshold_exponent.as_deref() {
            None | Some("rho-beta") => ThresholdExponent::RhoBeta,
            Some("beta") => ThresholdExponent::Beta,
            Some(other) => {
                return Err(Error::Config(format!("unknown threshold-exponent `{other}`")))
            }
        };
        Ok(BuiltRun { scenario, samplers, algorithm, exponent, config: self })
    }
}
