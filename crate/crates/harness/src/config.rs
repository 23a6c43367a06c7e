//! Experiment configuration, read from TOML with `--set` style overrides.

use std::path::{Path, PathBuf};

use csi_ppp_core::denoisers::{CnnDenoiser, Denoiser, IdentityDenoiser, SoftThresholdDenoiser};
use csi_ppp_core::linalg::OrthoMethod;
use csi_ppp_core::solver::{Estimate, SolverConfig, TuneGrid, ZPath};
use csi_ppp_core::transform::ChannelSample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::load_dataset;
use crate::error::{HarnessError, Result};
use crate::synthetic::SyntheticConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Projection seed shared by the UE and the BS.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub quantization: QuantizationConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tuning: Option<TuningSection>,
    #[serde(default)]
    pub denoiser: DenoiserConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_nd")]
    pub nd: usize,
    pub eval: DataSource,
    /// Source of the quantizer clip level; the eval set when absent.
    #[serde(default)]
    pub calibration: Option<DataSource>,
    #[serde(default)]
    pub tuning: Option<DataSource>,
}

fn default_nd() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Path(PathBuf),
    Synthetic(SyntheticConfig),
}

impl DataSource {
    pub fn load(&self, base: &Path) -> Result<Vec<ChannelSample>> {
        match self {
            DataSource::Path(p) => {
                let path = base.join(p);
                load_dataset(&path).map_err(|source| HarnessError::Dataset { path, source })
            }
            DataSource::Synthetic(cfg) => Ok(cfg.generate()?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    #[serde(with = "ortho_method")]
    pub method: OrthoMethod,
    /// Compression ratios as `"1/4"` style fractions or decimals.
    pub crs: Vec<CompressionRatio>,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            method: OrthoMethod::Svd,
            crs: ["1/4", "1/8", "1/16", "1/32"].iter().map(|s| CompressionRatio::Text(s.to_string())).collect(),
        }
    }
}

mod ortho_method {
    use csi_ppp_core::linalg::OrthoMethod;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &OrthoMethod, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(m.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<OrthoMethod, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CompressionRatio {
    Value(f64),
    Text(String),
}

impl CompressionRatio {
    pub fn value(&self) -> Result<f64> {
        let v = match self {
            CompressionRatio::Value(v) => *v,
            CompressionRatio::Text(s) => parse_ratio(s)?,
        };
        if !(v > 0.0 && v <= 1.0) {
            return Err(HarnessError::config(format!("compression ratio {v} is outside (0, 1]")));
        }
        Ok(v)
    }

    /// Feedback length for an `n`-dimensional CSI vector.
    pub fn measurements(&self, n: usize) -> Result<usize> {
        let m = (self.value()? * n as f64).round() as usize;
        if m == 0 {
            return Err(HarnessError::config(format!("compression ratio {self:?} leaves no measurements at N={n}")));
        }
        Ok(m.min(n))
    }
}

fn parse_ratio(s: &str) -> Result<f64> {
    let bad = || HarnessError::config(format!("cannot parse compression ratio {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationConfig {
    pub mu: f64,
    pub bits: Vec<u8>,
    /// Also evaluate unquantized feedback.
    pub unquantized: bool,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        QuantizationConfig {
            mu: csi_ppp_core::encoder::DEFAULT_MU,
            bits: vec![],
            unquantized: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Z,
    H,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZPathKind {
    Direct,
    Woodbury,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: f64,
    pub rho0: f64,
    pub alpha: f64,
    pub max_iters: usize,
    /// Support size of the initial estimate; `M / 4` when absent.
    pub init_sparsity: Option<usize>,
    pub tol: f64,
    pub estimate: EstimateKind,
    pub z_path: ZPathKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            lambda: d.lambda,
            rho0: d.rho0,
            alpha: d.alpha,
            max_iters: d.max_iters,
            init_sparsity: d.init_sparsity,
            tol: d.tol,
            estimate: EstimateKind::Z,
            z_path: ZPathKind::Woodbury,
        }
    }
}

impl SolverSection {
    pub fn to_solver(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            rho0: self.rho0,
            alpha: self.alpha,
            max_iters: self.max_iters,
            init_sparsity: self.init_sparsity,
            tol: self.tol,
            estimate: match self.estimate {
                EstimateKind::Z => Estimate::Z,
                EstimateKind::H => Estimate::H,
            },
            z_path: match self.z_path {
                ZPathKind::Direct => ZPath::Direct,
                ZPathKind::Woodbury => ZPath::Woodbury,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    pub lambdas: Vec<f64>,
    pub rho0s: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Upper bound on tuning samples drawn from the tuning source.
    #[serde(default = "default_tuning_samples")]
    pub samples: usize,
}

fn default_tuning_samples() -> usize {
    50
}

impl TuningSection {
    pub fn grid(&self) -> TuneGrid {
        TuneGrid {
            lambdas: self.lambdas.clone(),
            rho0s: self.rho0s.clone(),
            alphas: self.alphas.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DenoiserConfig {
    Identity,
    Soft { gain: f64 },
    Cnn { weights: PathBuf },
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig::Soft { gain: 1.0 }
    }
}

/// What the manifest records about the denoiser actually used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiserInfo {
    pub kind: String,
    pub name: String,
    pub gain: Option<f64>,
    pub weights: Option<PathBuf>,
    pub sha256: Option<String>,
    pub parameters: Option<usize>,
}

impl DenoiserConfig {
    pub fn build(&self, base: &Path) -> Result<(Box<dyn Denoiser>, DenoiserInfo)> {
        match self {
            DenoiserConfig::Identity => Ok((
                Box::new(IdentityDenoiser),
                DenoiserInfo {
                    kind: "identity".into(),
                    name: IdentityDenoiser.name(),
                    gain: None,
                    weights: None,
                    sha256: None,
                    parameters: None,
                },
            )),
            DenoiserConfig::Soft { gain } => {
                let d = SoftThresholdDenoiser::new(*gain).map_err(|e| HarnessError::config(e.to_string()))?;
                let info = DenoiserInfo {
                    kind: "soft".into(),
                    name: d.name(),
                    gain: Some(*gain),
                    weights: None,
                    sha256: None,
                    parameters: None,
                };
                Ok((Box::new(d), info))
            }
            DenoiserConfig::Cnn { weights } => {
                let path = base.join(weights);
                let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
                let model = csi_ppp_core::denoisers::read_weights(&bytes)
                    .map_err(|e| HarnessError::Core(e.into()))?;
                let info = DenoiserInfo {
                    kind: "cnn".into(),
                    name: "cnn".into(),
                    gain: None,
                    weights: Some(path),
                    sha256: Some(sha256_hex(&bytes)),
                    parameters: Some(model.parameter_count()),
                };
                Ok((Box::new(CnnDenoiser::new(model)), info))
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmseDomain {
    /// Normalized truncated angular-delay matrix, the solver's own domain.
    Truncated,
    /// Full angular-delay matrix after zero padding, at the true scale.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Omp,
    LsInit,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Omp => "omp",
            Baseline::LsInit => "ls-init",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub nmse_domain: NmseDomain,
    pub baselines: Vec<Baseline>,
    /// Atoms for the OMP baseline; the solver's initial sparsity when absent.
    pub omp_sparsity: Option<usize>,
    /// Number of leading samples whose solver traces are exported.
    pub trace_samples: usize,
    /// Cap on evaluated samples; all when absent.
    pub max_samples: Option<usize>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            nmse_domain: NmseDomain::Truncated,
            baselines: vec![],
            omp_sparsity: None,
            trace_samples: 10,
            max_samples: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    /// Fails with a config error when a dataset or weights file named by the
    /// config does not exist under `base`.
    pub fn check_paths(&self, base: &Path) -> Result<()> {
        let mut paths: Vec<(&str, &PathBuf)> = Vec::new();
        for (key, src) in [("data.eval", Some(&self.data.eval)), ("data.calibration", self.data.calibration.as_ref()), ("data.tuning", self.data.tuning.as_ref())] {
            if let Some(DataSource::Path(p)) = src {
                paths.push((key, p));
            }
        }
        if let DenoiserConfig::Cnn { weights } = &self.denoiser {
            paths.push(("denoiser.weights", weights));
        }
        for (key, p) in paths {
            if !base.join(p).is_file() {
                return Err(HarnessError::config(format!("{key}: {} does not exist", base.join(p).display())));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.nd == 0 {
            return Err(HarnessError::config("data.nd must be positive"));
        }
        if self.projection.crs.is_empty() {
            return Err(HarnessError::config("projection.crs is empty"));
        }
        for cr in &self.projection.crs {
            cr.value()?;
        }
        if !(self.quantization.mu > 0.0 && self.quantization.mu.is_finite()) {
            return Err(HarnessError::config("quantization.mu must be positive"));
        }
        if let Some(b) = self.quantization.bits.iter().find(|b| !(2..=16).contains(*b)) {
            return Err(HarnessError::config(format!("quantization bits {b} outside 2..=16")));
        }
        if self.quantization.bits.is_empty() && !self.quantization.unquantized {
            return Err(HarnessError::config("no quantization cells: set bits or unquantized = true"));
        }
        self.solver.to_solver().validate().map_err(|e| HarnessError::config(format!("solver: {e}")))?;
        if let Some(t) = &self.tuning {
            if t.grid().points().is_empty() {
                return Err(HarnessError::config("tuning grid is empty"));
            }
            if t.samples == 0 {
                return Err(HarnessError::config("tuning.samples must be positive"));
            }
            if self.data.tuning.is_none() {
                return Err(HarnessError::config("tuning requires data.tuning"));
            }
        }
        if let DenoiserConfig::Soft { gain } = self.denoiser {
            if !(gain > 0.0 && gain.is_finite()) {
                return Err(HarnessError::config("denoiser gain must be positive"));
            }
        }
        Ok(())
    }
}

/// Applies `dotted.key=value`; the value is read as TOML, or as a bare
/// string when that fails.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("override {assignment:?} is not key=value")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::config(format!("override {key}: {part} is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
