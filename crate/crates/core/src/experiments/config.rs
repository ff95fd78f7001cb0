//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bayes::SmoothDensity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bvm,
    Contraction,
    Functional,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Bvm => "bvm",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Functional => "functional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    GaussianSequence,
    FourierRegression,
    SplineRegression,
}

/// Sieve dimension as a function of `n`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KRule {
    Fixed { value: usize },
    /// `n^exponent`.
    Power { exponent: f64 },
    /// `n^{1/(1+2α)}`.
    AlphaRate { alpha: f64 },
    /// `√n / ln n`.
    SqrtOverLog,
    /// `√(n / ln n)`.
    SqrtOfNOverLog,
    /// `n / ln n`.
    NOverLog,
    /// One value per grid point.
    Custom { values: Vec<usize> },
}

impl KRule {
    fn raw(&self, n: usize, index: usize) -> Result<f64> {
        let nf = n as f64;
        Ok(match self {
            KRule::Fixed { value } => *value as f64,
            KRule::Power { exponent } => nf.powf(*exponent),
            KRule::AlphaRate { alpha } => nf.powf(1.0 / (1.0 + 2.0 * alpha)),
            KRule::SqrtOverLog => nf.sqrt() / nf.ln(),
            KRule::SqrtOfNOverLog => (nf / nf.ln()).sqrt(),
            KRule::NOverLog => nf / nf.ln(),
            KRule::Custom { values } => *values
                .get(index)
                .ok_or_else(|| Error::Config(format!("custom k rule has no value for grid point {index}")))?
                as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaRule {
    /// `σ_n = n^{-1/2}`.
    InverseSqrt,
    Constant { value: f64 },
}

impl SigmaRule {
    pub fn sigma(&self, n: usize) -> f64 {
        match self {
            SigmaRule::InverseSqrt => 1.0 / (n as f64).sqrt(),
            SigmaRule::Constant { value } => *value,
        }
    }
}

/// `coefficient · n^exponent`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScaleRule {
    Constant {
        value: f64,
    },
    Power {
        #[serde(default = "one")]
        coefficient: f64,
        exponent: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ScaleRule {
    pub fn value(&self, n: usize) -> f64 {
        match self {
            ScaleRule::Constant { value } => *value,
            ScaleRule::Power { coefficient, exponent } => coefficient * (n as f64).powf(*exponent),
        }
    }
}

/// Prior variances of the coefficients `θ_1, …, θ_k`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VarianceRule {
    /// `1/k` for `j ≤ k/2` and `4^α / n` beyond.
    Split { alpha: f64 },
    /// `scale · j^{-exponent}`.
    Power { scale: f64, exponent: f64 },
    Constant { value: f64 },
}

impl VarianceRule {
    pub fn variances(&self, n: usize, k: usize) -> Vec<f64> {
        (1..=k)
            .map(|j| match self {
                VarianceRule::Split { alpha } => {
                    if 2 * j <= k {
                        1.0 / k as f64
                    } else {
                        4f64.powf(*alpha) / n as f64
                    }
                }
                VarianceRule::Power { scale, exponent } => scale * (j as f64).powf(-exponent),
                VarianceRule::Constant { value } => *value,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    GaussianIso { scale: f64 },
    UniformBox { half_width: f64 },
    StudentT { df: f64, scale: f64 },
    Flat,
}

impl DensityConfig {
    pub fn density(&self) -> SmoothDensity {
        match self {
            DensityConfig::GaussianIso { scale } => SmoothDensity::GaussianIso { scale: *scale },
            DensityConfig::UniformBox { half_width } => SmoothDensity::UniformBox { half_width: *half_width },
            DensityConfig::StudentT { df, scale } => SmoothDensity::ProductStudentT { df: *df, scale: *scale },
            DensityConfig::Flat => SmoothDensity::Flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    IsotropicGaussian { tau: ScaleRule },
    CoordinateGaussian { variances: VarianceRule },
    Smooth { density: DensityConfig },
    /// Improper flat prior; its posterior is the limiting Gaussian itself.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolderShape {
    AbsPower,
    Sine,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruthConfig {
    Sobolev {
        alpha: f64,
        #[serde(default = "one")]
        radius: f64,
        /// Power-decay exponent of the coefficients.
        decay: Option<f64>,
        coefficients: Option<Vec<f64>>,
        prefix: Option<usize>,
    },
    Holder {
        alpha: f64,
        shape: HolderShape,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKindConfig {
    LinearRiemann,
    QuadraticNorm,
    ThetaQuadratic,
}

/// Where `Γ` is evaluated when standardizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaAt {
    /// At the projected truth `F_Φ`.
    #[default]
    Truth,
    /// At the projected data `Y_Φ`.
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FunctionalConfig {
    pub kind: FunctionalKindConfig,
    /// Weight function of the linear functional: `one` or `phi-<j>`.
    #[serde(default)]
    pub g: Option<String>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub gamma: GammaAt,
}

fn default_level() -> f64 {
    0.95
}

/// Weight function named in a functional config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFunction {
    /// `φ_j` of the trigonometric basis; `φ_1 ≡ 1`.
    Fourier(usize),
}

impl FunctionalConfig {
    pub fn weight(&self) -> Result<WeightFunction> {
        let name = self.g.as_deref().unwrap_or("one");
        if name == "one" {
            return Ok(WeightFunction::Fourier(1));
        }
        name.strip_prefix("phi-")
            .and_then(|j| j.parse::<usize>().ok())
            .filter(|j| *j >= 1)
            .map(WeightFunction::Fourier)
            .ok_or_else(|| Error::Config(format!("unknown weight function '{name}' (use 'one' or 'phi-<j>')")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateRule {
    /// `√(k/n)`.
    SqrtKOverN,
    /// `n^{-α/(1+2α)}`.
    Minimax { alpha: f64 },
    /// `k/√n`.
    KOverSqrtN,
}

impl RateRule {
    pub fn rate(&self, n: usize, k: usize) -> f64 {
        let (nf, kf) = (n as f64, k as f64);
        match self {
            RateRule::SqrtKOverN => (kf / nf).sqrt(),
            RateRule::Minimax { alpha } => nf.powf(-alpha / (1.0 + 2.0 * alpha)),
            RateRule::KOverSqrtN => kf / nf.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ContractionConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_rate")]
    pub rate: RateRule,
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 5.0, 8.0]
}

fn default_rate() -> RateRule {
    RateRule::SqrtKOverN
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            rate: default_rate(),
        }
    }
}

/// `M_n = factor · k · (ln n)²` for the condition checker.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConditionsConfig {
    #[serde(default = "one")]
    pub m_factor: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_probes() -> usize {
    4096
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            m_factor: 1.0,
            probes: default_probes(),
        }
    }
}

impl ConditionsConfig {
    pub fn m_n(&self, n: usize, k: usize) -> f64 {
        self.m_factor * k as f64 * (n as f64).ln().powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: Model,
    pub n_grid: Vec<usize>,
    pub k_rule: KRule,
    #[serde(default)]
    pub sigma_rule: Option<SigmaRule>,
    pub prior: PriorConfig,
    pub truth: TruthConfig,
    #[serde(default)]
    pub functional: Option<FunctionalConfig>,
    #[serde(default)]
    pub contraction: ContractionConfig,
    #[serde(default)]
    pub conditions: ConditionsConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Monte Carlo draws per replicate for TV estimates and sampled posteriors.
    #[serde(default = "default_draws")]
    pub mc_draws: usize,
    #[serde(default = "default_order")]
    pub spline_order: usize,
}

fn default_replicates() -> usize {
    200
}

fn default_draws() -> usize {
    20_000
}

fn default_order() -> usize {
    4
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn sigma_rule(&self) -> SigmaRule {
        self.sigma_rule.clone().unwrap_or(match self.model {
            Model::GaussianSequence => SigmaRule::InverseSqrt,
            _ => SigmaRule::Constant { value: 1.0 },
        })
    }

    /// `k` at grid point `index`: floored, at least 2, and capped by the
    /// design's rank requirements.
    pub fn k_for(&self, index: usize) -> Result<usize> {
        let n = self.n_grid[index];
        let raw = self.k_rule.raw(n, index)?;
        let mut k = ((raw + 1e-9).floor() as usize).max(2);
        let cap = match self.model {
            Model::FourierRegression if n.is_multiple_of(2) => n - 1,
            _ => n,
        };
        k = k.min(cap);
        if self.model == Model::SplineRegression && k < self.spline_order {
            return Err(Error::Config(format!(
                "k = {k} at n = {n} is below the spline order {}",
                self.spline_order
            )));
        }
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing".into());
        }
        if self.n_grid[0] < 2 {
            return bad("sample sizes must be at least 2".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if let KRule::Custom { values } = &self.k_rule {
            if values.len() != self.n_grid.len() {
                return bad(format!("custom k rule has {} values for {} grid points", values.len(), self.n_grid.len()));
            }
        }
        if let SigmaRule::Constant { value } = self.sigma_rule() {
            if !(value > 0.0) || !value.is_finite() {
                return bad(format!("sigma must be positive, got {value}"));
            }
        }
        for i in 0..self.n_grid.len() {
            self.k_for(i)?;
        }
        match &self.prior {
            PriorConfig::IsotropicGaussian { tau } => {
                if self.n_grid.iter().any(|&n| !(tau.value(n) > 0.0)) {
                    return bad("tau must be positive on the grid".into());
                }
            }
            PriorConfig::CoordinateGaussian { variances } => {
                for (i, &n) in self.n_grid.iter().enumerate() {
                    if variances.variances(n, self.k_for(i)?).iter().any(|v| !(*v > 0.0)) {
                        return bad("prior variances must be positive".into());
                    }
                }
            }
            PriorConfig::Smooth { .. } | PriorConfig::Flat => {}
        }
        match (&self.truth, self.model) {
            (TruthConfig::Holder { .. }, Model::GaussianSequence) => {
                return bad("function-valued truths need a regression model".into());
            }
            (TruthConfig::Sobolev { decay, coefficients, .. }, _)
                if decay.is_some() == coefficients.is_some() => {
                    return bad("sobolev truth needs exactly one of 'decay' or 'coefficients'".into());
                }
            _ => {}
        }
        match (self.experiment, &self.functional) {
            (ExperimentKind::Functional, None) => return bad("functional experiment needs a [functional] section".into()),
            (_, Some(f)) => {
                if !(f.level > 0.0 && f.level < 1.0) {
                    return bad(format!("credible level must lie in (0, 1), got {}", f.level));
                }
                if let Some(b) = &f.b {
                    if b.len() != 1 {
                        return bad("configured functionals are scalar, so b must have length 1".into());
                    }
                }
                if f.kind == FunctionalKindConfig::LinearRiemann {
                    f.weight()?;
                }
                if f.kind == FunctionalKindConfig::ThetaQuadratic && self.model == Model::SplineRegression {
                    return bad("theta-quadratic functional has no target value for spline coefficients".into());
                }
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::Contraction && self.contraction.lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("contraction radii must be positive".into());
        }
        if matches!(self.prior, PriorConfig::Smooth { .. } | PriorConfig::CoordinateGaussian { .. }) && self.mc_draws == 0 {
            return bad("sampled posteriors need mc-draws > 0".into());
        }
        Ok(())
    }
}
