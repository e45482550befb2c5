//! Scenario configuration: JSON file, per-scenario defaults and CLI overrides.
//!
//! Every field is optional in the file except `scenario`. Resolution order is
//! scenario defaults (desk or full scale), then the file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wsp::covariance::{DEFAULT_EPSILON, DEFAULT_HUBER_K};
use wsp::simulate::TruthConstructor;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    DiamondSweep,
    ToeplitzPath,
    RobustT,
    Nonparanormal,
    MatrixData,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::DiamondSweep => "diamond_sweep",
            Scenario::ToeplitzPath => "toeplitz_path",
            Scenario::RobustT => "robust_t",
            Scenario::Nonparanormal => "nonparanormal",
            Scenario::MatrixData => "matrix_data",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Gaussian,
    T,
    Nonparanormal,
    MatrixNormal,
}

/// Pilot covariance used in front of the solver. `Population` plugs in the
/// true `Σ` and draws no data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Sample,
    Huber,
    Spearman,
    Kendall,
    Gemini,
    Population,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sample => "sample",
            EstimatorKind::Huber => "huber",
            EstimatorKind::Spearman => "spearman",
            EstimatorKind::Kendall => "kendall",
            EstimatorKind::Gemini => "gemini",
            EstimatorKind::Population => "population",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub count: usize,
    pub decades: f64,
    #[serde(default = "default_grid_max")]
    pub max: f64,
}

fn default_grid_max() -> f64 {
    1.0
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            count: 30,
            decades: 2.0,
            max: 1.0,
        }
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        wsp::scio::log_grid(self.max, self.count, self.decades)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// The file format. Mirrors [`ScenarioConfig`] with every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<Scenario>,
    truth: Option<TruthConstructor>,
    sampler: Option<Sampler>,
    n: Option<usize>,
    p: Option<usize>,
    m: Option<usize>,
    f: Option<usize>,
    rho: Option<OneOrMany<f64>>,
    rho_b: Option<f64>,
    #[serde(alias = "estimator")]
    estimators: Option<OneOrMany<EstimatorKind>>,
    #[serde(alias = "K_const")]
    k_const: Option<f64>,
    epsilon: Option<f64>,
    mu_g0: Option<f64>,
    sigma_g0: Option<f64>,
    nu: Option<f64>,
    lambda_b: Option<f64>,
    q: Option<OneOrMany<f64>>,
    grid: Option<GridSpec>,
    replications: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub truth: TruthConstructor,
    pub sampler: Sampler,
    pub n: usize,
    pub p: usize,
    /// Column-factor dimension for matrix data.
    pub m: usize,
    /// Row-factor dimension for matrix data.
    pub f: usize,
    pub rho: Vec<f64>,
    /// Toeplitz parameter of the row-factor truth for matrix data.
    pub rho_b: f64,
    pub estimators: Vec<EstimatorKind>,
    pub k_const: f64,
    pub epsilon: f64,
    pub mu_g0: f64,
    pub sigma_g0: f64,
    pub nu: f64,
    /// Fixed penalty of the row factor for matrix data.
    pub lambda_b: f64,
    pub q: Vec<f64>,
    pub grid: GridSpec,
    pub replications: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Values supplied on the command line; each one overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paper_scale: bool,
}

impl ScenarioConfig {
    /// Defaults for `scenario`; `paper_scale` selects the full dimensions.
    pub fn defaults(scenario: Scenario, paper_scale: bool) -> Self {
        let (truth, sampler, rho, estimators) = match scenario {
            Scenario::DiamondSweep => (
                TruthConstructor::DiamondBlock,
                Sampler::Gaussian,
                (-13..=13).map(|k| k as f64 / 20.0).collect(),
                vec![EstimatorKind::Sample],
            ),
            Scenario::ToeplitzPath => (
                TruthConstructor::Toeplitz,
                Sampler::Gaussian,
                vec![0.2, 0.5, 0.8],
                vec![EstimatorKind::Sample],
            ),
            Scenario::RobustT => (
                TruthConstructor::Toeplitz,
                Sampler::T,
                vec![0.5],
                vec![EstimatorKind::Huber, EstimatorKind::Sample],
            ),
            Scenario::Nonparanormal => (
                TruthConstructor::CorrelationOfInverse,
                Sampler::Nonparanormal,
                vec![0.5],
                vec![EstimatorKind::Spearman, EstimatorKind::Kendall],
            ),
            Scenario::MatrixData => (
                TruthConstructor::CorrelationOfInverse,
                Sampler::MatrixNormal,
                vec![0.5],
                vec![EstimatorKind::Gemini],
            ),
            Scenario::Custom => (
                TruthConstructor::Toeplitz,
                Sampler::Gaussian,
                vec![0.5],
                vec![EstimatorKind::Sample],
            ),
        };
        let (m, f) = if paper_scale { (80, 40) } else { (16, 8) };
        Self {
            scenario,
            truth,
            sampler,
            n: if scenario == Scenario::MatrixData { 3 } else { 200 },
            p: if paper_scale { 100 } else { 40 },
            m,
            f,
            rho,
            rho_b: 0.2,
            estimators,
            k_const: DEFAULT_HUBER_K,
            epsilon: DEFAULT_EPSILON,
            mu_g0: 0.05,
            sigma_g0: 0.4,
            nu: 3.5,
            lambda_b: 0.15,
            q: vec![0.5],
            grid: GridSpec::default(),
            replications: 20,
            seed: 1,
            out: PathBuf::from("wsp-out"),
        }
    }

    /// Parses and resolves a JSON document; `path` is used only in messages.
    pub fn from_json(text: &str, path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config {
            path: path.map(Path::to_path_buf),
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        let located = |key: &str, message: String| CliError::Config {
            path: path.map(Path::to_path_buf),
            line: locate_key(text, key),
            column: None,
            message,
        };
        let scenario = raw
            .scenario
            .ok_or_else(|| located("scenario", "missing required field `scenario`".into()))?;
        let mut cfg = Self::defaults(scenario, overrides.paper_scale);
        if scenario != Scenario::Custom {
            for (key, set) in [("truth", raw.truth.is_some()), ("sampler", raw.sampler.is_some())] {
                if set {
                    return Err(located(
                        key,
                        format!(
                            "`{key}` is fixed by scenario {}; use the custom scenario",
                            scenario.name()
                        ),
                    ));
                }
            }
        }
        if let Some(v) = raw.truth {
            cfg.truth = v;
        }
        if let Some(v) = raw.sampler {
            cfg.sampler = v;
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = raw.$field {
                    cfg.$field = v;
                }
            )*};
        }
        take!(
            n,
            p,
            m,
            f,
            rho_b,
            k_const,
            epsilon,
            mu_g0,
            sigma_g0,
            nu,
            lambda_b,
            grid,
            replications,
            seed,
            out
        );
        if let Some(v) = raw.rho {
            cfg.rho = v.into_vec();
        }
        if let Some(v) = raw.estimators {
            cfg.estimators = v.into_vec();
        }
        if let Some(v) = raw.q {
            cfg.q = v.into_vec();
        }
        cfg.apply(overrides);
        cfg.validate().map_err(|(key, message)| located(key, message))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, Some(path), overrides)
    }

    fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = out.clone();
        }
    }

    /// Checks every invariant, reporting the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        fn fail<T>(key: &'static str, message: impl Into<String>) -> std::result::Result<T, (&'static str, String)> {
            Err((key, message.into()))
        }
        let matrix = self.scenario == Scenario::MatrixData;
        if matrix {
            if self.n < 1 {
                return fail("n", "n must be at least 1");
            }
            if self.m < 1 || self.f < 1 {
                return fail(if self.m < 1 { "m" } else { "f" }, "matrix dimensions must be positive");
            }
        } else {
            if self.n < 2 {
                return fail("n", format!("n must be at least 2, got {}", self.n));
            }
            if self.p < 1 {
                return fail("p", "p must be positive");
            }
        }
        if self.replications < 1 {
            return fail("replications", "replications must be at least 1");
        }
        if self.grid.count < 1 {
            return fail("grid", "grid count must be at least 1");
        }
        if !(self.grid.max > 0.0 && self.grid.max.is_finite()) || !(self.grid.decades >= 0.0) {
            return fail("grid", "grid needs a positive max and nonnegative decades");
        }
        if self.grid.count > 1 && self.grid.decades == 0.0 {
            return fail("grid", "a grid with several points needs positive decades");
        }
        if self.rho.is_empty() {
            return fail("rho", "rho list is empty");
        }
        for &rho in &self.rho {
            let ok = match self.truth {
                TruthConstructor::DiamondBlock => rho.abs() < std::f64::consts::FRAC_1_SQRT_2,
                _ => rho.abs() < 1.0,
            };
            if !ok {
                return fail(
                    "rho",
                    format!("rho = {rho} is outside the range of the {:?} truth", self.truth),
                );
            }
        }
        if matrix && !(self.rho_b.abs() < 1.0) {
            return fail("rho_b", "rho_b must lie in (-1, 1)");
        }
        if self.truth == TruthConstructor::DiamondBlock && !matrix && !self.p.is_multiple_of(4) {
            return fail("p", format!("diamond truth needs p divisible by 4, got {}", self.p));
        }
        if self.q.is_empty() || self.q.iter().any(|q| !(0.0..1.0).contains(q)) {
            return fail("q", "q values must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon", "epsilon must be positive");
        }
        if !(self.k_const > 0.0) {
            return fail("k_const", "k_const must be positive");
        }
        if !(self.nu > 2.0) {
            return fail("nu", "nu must exceed 2");
        }
        if !(self.sigma_g0 > 0.0) || !self.mu_g0.is_finite() {
            return fail("sigma_g0", "transform needs finite mu_g0 and positive sigma_g0");
        }
        if !(self.lambda_b > 0.0) {
            return fail("lambda_b", "lambda_b must be positive");
        }
        if self.estimators.is_empty() {
            return fail("estimators", "no estimator selected");
        }
        for &e in &self.estimators {
            if (e == EstimatorKind::Gemini) != matrix {
                return fail(
                    "estimators",
                    format!(
                        "estimator {} does not apply to scenario {}",
                        e.name(),
                        self.scenario.name()
                    ),
                );
            }
            if e == EstimatorKind::Huber && self.p < 2 {
                return fail("p", "the Huber pilot needs p >= 2");
            }
        }
        if (self.sampler == Sampler::MatrixNormal) != matrix {
            return fail("sampler", "the matrix_normal sampler is used by matrix_data only");
        }
        if self.sampler == Sampler::Nonparanormal && self.truth != TruthConstructor::CorrelationOfInverse {
            return fail(
                "truth",
                "the nonparanormal sampler needs a correlation truth (correlation_of_inverse)",
            );
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        if self.scenario == Scenario::MatrixData {
            self.m * self.f
        } else {
            self.p
        }
    }
}

/// 1-based line of the first `"key"` in `text`.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|at| text[..at].bytes().filter(|&b| b == b'\n').count() + 1)
}
