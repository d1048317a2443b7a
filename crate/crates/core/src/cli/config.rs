//! Run configuration: one TOML file with a section per subcommand.
//!
//! ```toml
//! seed = 7
//!
//! [network]
//! kind = "fc"          # or "conv"
//! n0 = 2
//! widths = [6]         # conv: channels = [C0, C1, ...], mask = 3
//! d = 1
//!
//! [data]
//! train = "train.csv"  # conv: JSON {"x": [[[..]]], "y": [..]}
//! test = "test.csv"
//!
//! [sampler]
//! method = "is"        # or "mh"
//! n_samples = 100000
//!
//! [predict]
//! beta = 10.0
//! ```
//!
//! Unknown keys are rejected. Relative data paths resolve against the
//! directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::conv::ConvNetworkSpec;
use crate::fc::FcNetworkSpec;
use crate::ldp::MinimizeOptions;
use crate::posterior::{MhSettings, SamplerChoice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Required by every subcommand except `verify`.
    #[serde(default)]
    pub network: Option<NetworkConfig>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub sample_prior: SamplePriorConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub evidence: EvidenceConfig,
    #[serde(default)]
    pub ldp: LdpConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    Fc {
        n0: usize,
        widths: Vec<usize>,
        #[serde(default = "one")]
        d: usize,
        #[serde(default)]
        precisions: Option<Vec<f64>>,
    },
    Conv {
        n0: usize,
        channels: Vec<usize>,
        mask: usize,
        #[serde(default)]
        precisions: Option<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

/// A validated architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    Fc(FcNetworkSpec),
    Conv(ConvNetworkSpec),
}

impl NetworkConfig {
    pub fn build(&self) -> Result<Architecture, CliError> {
        match self {
            Self::Fc {
                n0,
                widths,
                d,
                precisions,
            } => {
                let p = precisions.clone().unwrap_or_else(|| vec![1.0; widths.len() + 1]);
                FcNetworkSpec::new(*n0, widths.clone(), *d, p)
                    .map(Architecture::Fc)
                    .map_err(|e| CliError::config(e.to_string()))
            }
            Self::Conv {
                n0,
                channels,
                mask,
                precisions,
            } => {
                let p = precisions.clone().unwrap_or_else(|| vec![1.0; channels.len()]);
                ConvNetworkSpec::new(*n0, channels.clone(), *mask, p)
                    .map(Architecture::Conv)
                    .map_err(|e| CliError::config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Is,
    Mh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    pub n_samples: usize,
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_size: f64,
    pub n_chains: usize,
    pub adapt: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let mh = MhSettings::default();
        Self {
            method: SamplerMethod::Is,
            n_samples: 100_000,
            n_steps: mh.n_steps,
            burn_in: mh.burn_in,
            thin: mh.thin,
            step_size: mh.step_size,
            n_chains: mh.n_chains,
            adapt: mh.adapt,
        }
    }
}

impl SamplerConfig {
    pub fn mh(&self) -> MhSettings {
        MhSettings {
            n_steps: self.n_steps,
            burn_in: self.burn_in,
            thin: self.thin,
            step_size: self.step_size,
            n_chains: self.n_chains,
            adapt: self.adapt,
        }
    }

    pub fn choice(&self) -> SamplerChoice {
        match self.method {
            SamplerMethod::Is => SamplerChoice::Is { n: self.n_samples },
            SamplerMethod::Mh => SamplerChoice::Mh(self.mh()),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.n_samples == 0 {
            return Err(CliError::config("sampler.n_samples must be positive"));
        }
        self.mh().validate().map_err(|e| CliError::config(format!("sampler: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplePriorConfig {
    pub n_samples: usize,
    /// Largest |z| accepted between the two samplers.
    pub z_threshold: f64,
}

impl Default for SamplePriorConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            z_threshold: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub beta: f64,
    pub allow_rank_deficient: bool,
    /// Weight draws for the brute-force comparison enabled by `--oracle`.
    pub oracle_samples: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            allow_rank_deficient: false,
            oracle_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMethodName {
    Quadrature,
    MonteCarlo,
    BesselClosedForm,
    LogConvolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvidenceConfig {
    /// Finite inverse temperature; omitted for the zero-temperature limit only.
    pub beta: Option<f64>,
    pub zero_temperature: bool,
    pub methods: Vec<EvidenceMethodName>,
    pub mc_samples: usize,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            beta: None,
            zero_temperature: true,
            methods: vec![EvidenceMethodName::BesselClosedForm, EvidenceMethodName::LogConvolution],
            mc_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    Lazy,
    Meanfield,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpConfig {
    pub objective: ObjectiveName,
    pub beta: f64,
    /// Random starting points besides the identity.
    pub random_starts: usize,
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Width ladder for the concentration probe; empty skips the probe.
    pub widths: Vec<usize>,
    /// Prior draws per rung in the lazy probe.
    pub n_draws: usize,
    /// `α` for the scalar saddle; requires D = 1 and equal widths.
    pub saddle_alpha: Option<f64>,
}

impl Default for LdpConfig {
    fn default() -> Self {
        let o = MinimizeOptions::default();
        Self {
            objective: ObjectiveName::Lazy,
            beta: 1.0,
            random_starts: 10,
            gradient_tol: o.gradient_tol,
            max_iterations: o.max_iterations,
            widths: vec![10, 100, 1000],
            n_draws: 20_000,
            saddle_alpha: None,
        }
    }
}

impl LdpConfig {
    pub fn options(&self) -> MinimizeOptions {
        MinimizeOptions {
            gradient_tol: self.gradient_tol,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Multiplies every sample count of the verify suite.
    pub scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl RunConfig {
    /// Default config for `verify` runs without a file.
    pub fn verify_only() -> Self {
        Self {
            seed: 0,
            out: None,
            network: None,
            data: DataConfig::default(),
            sampler: SamplerConfig::default(),
            sample_prior: SamplePriorConfig::default(),
            predict: PredictConfig::default(),
            evidence: EvidenceConfig::default(),
            ldp: LdpConfig::default(),
            verify: VerifyConfig::default(),
        }
    }

    pub fn architecture(&self) -> Result<Architecture, CliError> {
        self.network
            .as_ref()
            .ok_or_else(|| CliError::config("missing [network] section"))?
            .build()
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unzip();
            CliError::config(e.message().to_string()).at(line, column)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.train, &mut cfg.data.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(n) = &self.network {
            n.build()?;
        }
        positive("verify.scale", self.verify.scale)?;
        self.sampler.validate()?;
        if self.sample_prior.n_samples == 0 {
            return Err(CliError::config("sample_prior.n_samples must be positive"));
        }
        positive("sample_prior.z_threshold", self.sample_prior.z_threshold)?;
        positive("predict.beta", self.predict.beta)?;
        if self.predict.oracle_samples == 0 {
            return Err(CliError::config("predict.oracle_samples must be positive"));
        }
        if let Some(b) = self.evidence.beta {
            positive("evidence.beta", b)?;
        }
        if self.evidence.mc_samples == 0 {
            return Err(CliError::config("evidence.mc_samples must be positive"));
        }
        positive("ldp.beta", self.ldp.beta)?;
        positive("ldp.gradient_tol", self.ldp.gradient_tol)?;
        if self.ldp.max_iterations == 0 || self.ldp.n_draws == 0 {
            return Err(CliError::config("ldp.max_iterations and ldp.n_draws must be positive"));
        }
        if self.ldp.widths.len() == 1 || self.ldp.widths.contains(&0) {
            return Err(CliError::config("ldp.widths needs at least two positive rungs or none"));
        }
        if let Some(a) = self.ldp.saddle_alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(CliError::config("ldp.saddle_alpha must be non-negative"));
            }
        }
        Ok(())
    }
}

/// 1-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
