//! Sweeps over compression ratios and quantization levels.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use csi_ppp_core::denoisers::Denoiser;
use csi_ppp_core::encoder::{generate_projection, ProjectionCode, QuantizerConfig};
use csi_ppp_core::metrics::{MetricsReport, SampleMetrics, REPORT_SNRS_DB};
use csi_ppp_core::solver::{tune, SolverConfig, TraceRecord, TuneInstance, TuneOutcome};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::{DenoiserInfo, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::pipeline::{prepare_samples, reconstruct, score, Method, MethodContext, PreparedSample};

pub const RESULTS_HEADER: &str = "method,cr,bits,nmse_db,cos,rate_0db,rate_10db,rate_20db,samples";
pub const TRACES_HEADER: &str = "method,cr,bits,sample,iter,rho,sigma,residual,nmse";
pub const TUNING_HEADER: &str = "cr,lambda,rho0,alpha,mean_nmse_db,failures,selected";

/// Records every tunable as it is read so the manifest can be checked
/// against actual use.
#[derive(Clone, Debug, Default)]
pub struct Consumed(BTreeMap<String, String>);

impl Consumed {
    pub fn take<T: Display>(&mut self, key: &str, value: T) -> T {
        self.0.insert(key.to_string(), value.to_string());
        value
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub cr: f64,
    pub bits: Option<u8>,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub method: String,
    pub cr: f64,
    pub bits: Option<u8>,
    pub sample: usize,
    pub record: TraceRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEntry {
    pub cr: f64,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub method: String,
    /// The 18-byte seed exchange, hex encoded.
    pub code: String,
    pub clip: Option<f64>,
    pub tuned: bool,
    pub lambda: f64,
    pub rho0: f64,
    pub alpha: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub method: String,
    pub cr: f64,
    pub m: usize,
    pub bits: Option<u8>,
    pub status: String,
    pub error: Option<String>,
    pub samples: usize,
    pub lambda: f64,
    pub rho0: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub init_sparsity: usize,
    pub omp_sparsity: Option<usize>,
    pub clip: Option<f64>,
    pub mu: Option<f64>,
    pub ridge_fallbacks: usize,
    pub nmse_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    /// The per-sample normalization scale is taken from the true channel.
    pub scale_oracle: bool,
    /// Denoiser training steps performed during this run.
    pub retraining_steps: u64,
    pub clip_source: String,
    pub eval_samples: usize,
    pub denoiser: DenoiserInfo,
    pub config: ExperimentConfig,
    pub consumed: BTreeMap<String, String>,
    pub projections: Vec<ProjectionEntry>,
    pub cells: Vec<CellEntry>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

pub struct ExperimentOutput {
    pub results: Vec<ResultRow>,
    pub traces: Vec<TraceRow>,
    pub tuning: Vec<(f64, TuneOutcome)>,
    pub manifest: Manifest,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn bits_label(bits: Option<u8>) -> String {
    bits.map_or_else(|| "none".to_string(), |b| b.to_string())
}

fn feedback(a: &csi_ppp_core::linalg::RealMatrix, samples: &[PreparedSample]) -> Vec<DVector<f64>> {
    samples.iter().map(|s| a * s.vector.values()).collect()
}

fn max_abs(ys: &[DVector<f64>]) -> f64 {
    ys.iter().flat_map(|y| y.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Loaded {
    eval: Vec<PreparedSample>,
    calibration: Option<Vec<PreparedSample>>,
    tuning: Option<Vec<PreparedSample>>,
}

fn load_all(cfg: &ExperimentConfig, base: &Path, log: &mut Consumed) -> Result<Loaded> {
    let nd = log.take("data.nd", cfg.data.nd);
    let mut eval = prepare_samples(&cfg.data.eval.load(base)?, nd)?;
    if let Some(cap) = cfg.evaluation.max_samples {
        eval.truncate(log.take("evaluation.max_samples", cap));
    }
    if eval.is_empty() {
        return Err(HarnessError::config("evaluation dataset is empty"));
    }
    let calibration = match &cfg.data.calibration {
        Some(src) => Some(prepare_samples(&src.load(base)?, nd)?),
        None => None,
    };
    let tuning = match (&cfg.tuning, &cfg.data.tuning) {
        (Some(t), Some(src)) => {
            let mut v = prepare_samples(&src.load(base)?, nd)?;
            v.truncate(log.take("tuning.samples", t.samples));
            log.take("tuning.lambdas", format!("{:?}", t.lambdas));
            log.take("tuning.rho0s", format!("{:?}", t.rho0s));
            log.take("tuning.alphas", format!("{:?}", t.alphas));
            if v.is_empty() {
                return Err(HarnessError::config("tuning dataset is empty"));
            }
            Some(v)
        }
        _ => None,
    };
    Ok(Loaded { eval, calibration, tuning })
}

fn record_solver(log: &mut Consumed, cfg: &ExperimentConfig) -> SolverConfig {
    let s = &cfg.solver;
    log.take("solver.lambda", s.lambda);
    log.take("solver.rho0", s.rho0);
    log.take("solver.alpha", s.alpha);
    log.take("solver.max_iters", s.max_iters);
    log.take("solver.tol", s.tol);
    log.take("solver.estimate", format!("{:?}", s.estimate).to_lowercase());
    log.take("solver.z_path", format!("{:?}", s.z_path).to_lowercase());
    if let Some(k) = s.init_sparsity {
        log.take("solver.init_sparsity", k);
    }
    s.to_solver()
}

fn tune_for(
    code: &ProjectionCode,
    tuning: &[PreparedSample],
    cfg: &ExperimentConfig,
    template: &SolverConfig,
    denoiser: &dyn Denoiser,
) -> Result<TuneOutcome> {
    let t = cfg.tuning.as_ref().expect("caller checked");
    let a = code.matrix()?;
    let instances: Vec<TuneInstance> = tuning
        .iter()
        .map(|s| TuneInstance { y: a * s.vector.values(), truth: s.vector.clone() })
        .collect();
    let shape = tuning[0].vector.shape();
    Ok(tune(&instances, a, shape, &t.grid(), template, denoiser)?)
}

/// Tuning only: the selected schedule per compression ratio.
pub fn run_tuning(cfg: &ExperimentConfig, base: &Path) -> Result<Vec<(f64, TuneOutcome)>> {
    if cfg.tuning.is_none() {
        return Err(HarnessError::config("no [tuning] section"));
    }
    let mut log = Consumed::default();
    let loaded = load_all(cfg, base, &mut log)?;
    let tuning = loaded.tuning.expect("tuning configured");
    let template = record_solver(&mut log, cfg);
    let (denoiser, _) = cfg.denoiser.build(base)?;
    let n = tuning[0].vector.len();
    let mut out = Vec::new();
    for cr in &cfg.projection.crs {
        let code = generate_projection(cfg.seed, cr.measurements(n)?, n, cfg.projection.method)?;
        out.push((cr.value()?, tune_for(&code, &tuning, cfg, &template, denoiser.as_ref())?));
    }
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut log = Consumed::default();
    let loaded = load_all(cfg, base, &mut log)?;
    let template = record_solver(&mut log, cfg);
    let (denoiser, denoiser_info) = cfg.denoiser.build(base)?;
    log.take("denoiser.kind", &denoiser_info.kind);
    if let Some(g) = denoiser_info.gain {
        log.take("denoiser.gain", g);
    }
    if let Some(w) = &denoiser_info.weights {
        log.take("denoiser.weights", w.display());
    }
    let seed = log.take("seed", cfg.seed);
    let method_name = log.take("projection.method", cfg.projection.method.name());
    let mu = log.take("quantization.mu", cfg.quantization.mu);
    let domain = cfg.evaluation.nmse_domain;
    log.take("evaluation.nmse_domain", format!("{domain:?}").to_lowercase());
    let trace_samples = log.take("evaluation.trace_samples", cfg.evaluation.trace_samples);

    let eval = &loaded.eval;
    let n = eval[0].vector.len();
    let clip_samples = loaded.calibration.as_deref().unwrap_or(eval);
    let clip_source = if loaded.calibration.is_some() { "calibration" } else { "eval" };

    let mut bit_cells: Vec<Option<u8>> = Vec::new();
    if cfg.quantization.unquantized {
        bit_cells.push(None);
    }
    bit_cells.extend(cfg.quantization.bits.iter().map(|b| Some(*b)));
    log.take("quantization.unquantized", cfg.quantization.unquantized);
    log.take("quantization.bits", format!("{:?}", cfg.quantization.bits));

    let mut methods = vec![(Method::Ppp, format!("ppp-{}", denoiser.name()))];
    for b in &cfg.evaluation.baselines {
        methods.push((Method::Baseline(*b), b.name().to_string()));
    }
    let baseline_names: Vec<&str> = cfg.evaluation.baselines.iter().map(|b| b.name()).collect();
    log.take("evaluation.baselines", format!("{baseline_names:?}"));
    if let Some(k) = cfg.evaluation.omp_sparsity {
        log.take("evaluation.omp_sparsity", k);
    }

    let mut results = Vec::new();
    let mut traces = Vec::new();
    let mut tuning_out = Vec::new();
    let mut projections = Vec::new();
    let mut cells = Vec::new();

    for cr in &cfg.projection.crs {
        let ratio = cr.value()?;
        let m = cr.measurements(n)?;
        log.take(&format!("projection.crs[{ratio}]"), m);
        let mut entry = ProjectionEntry {
            cr: ratio,
            m,
            n,
            seed,
            method: method_name.to_string(),
            code: String::new(),
            clip: None,
            tuned: false,
            lambda: template.lambda,
            rho0: template.rho0,
            alpha: template.alpha,
            error: None,
        };
        let prepared = (|| -> Result<_> {
            let code = generate_projection(seed, m, n, cfg.projection.method)?;
            entry.code = hex(&code.to_bytes());
            let a = code.matrix()?.clone();
            let clip = max_abs(&feedback(&a, clip_samples));
            entry.clip = Some(clip);
            let mut solver = template.clone();
            if let Some(tuning) = &loaded.tuning {
                let outcome = tune_for(&code, tuning, cfg, &template, denoiser.as_ref())?;
                solver = outcome.best.clone();
                entry.tuned = true;
                tuning_out.push((ratio, outcome));
            }
            entry.lambda = solver.lambda;
            entry.rho0 = solver.rho0;
            entry.alpha = solver.alpha;
            Ok((a, clip, solver))
        })();
        let (a, clip, solver) = match prepared {
            Ok(v) => v,
            Err(e) => {
                log::error!("CR {ratio}: {e}");
                entry.error = Some(e.to_string());
                projections.push(entry);
                continue;
            }
        };
        projections.push(entry);

        let clean = feedback(&a, eval);
        let k = solver.sparsity_for(m);
        let omp_k = cfg.evaluation.omp_sparsity.unwrap_or(k).min(m);
        let ctx = MethodContext { solver: &solver, denoiser: denoiser.as_ref(), omp_sparsity: omp_k };

        for &bits in &bit_cells {
            let quant = match bits {
                Some(b) => match QuantizerConfig::new(mu, b, clip) {
                    Ok(q) => Some(q),
                    Err(e) => {
                        for (_, name) in &methods {
                            cells.push(failed_cell(name, ratio, m, bits, &solver, k, e.to_string()));
                        }
                        continue;
                    }
                },
                None => None,
            };
            let ys: Vec<DVector<f64>> = match &quant {
                Some(q) => clean
                    .iter()
                    .map(|y| q.dequantize(&q.quantize(y.as_slice())).map(DVector::from_vec))
                    .collect::<csi_ppp_core::Result<_>>()?,
                None => clean.clone(),
            };
            for (method, name) in &methods {
                log::info!("{name} CR {ratio} bits {}", bits_label(bits));
                let mut metrics: Vec<SampleMetrics> = Vec::with_capacity(eval.len());
                let mut cell_traces = Vec::new();
                let mut ridge = 0;
                let outcome = (|| -> Result<()> {
                    for (i, (s, y)) in eval.iter().zip(&ys).enumerate() {
                        let rec = reconstruct(*method, &a, y, &s.vector, &ctx)?;
                        ridge += usize::from(rec.ridge_fallback);
                        if let (Some(tr), true) = (&rec.trace, i < trace_samples) {
                            cell_traces.extend(tr.records.iter().map(|r| TraceRow {
                                method: name.clone(),
                                cr: ratio,
                                bits,
                                sample: i,
                                record: *r,
                            }));
                        }
                        metrics.push(score(s, &rec.estimate, domain)?);
                    }
                    Ok(())
                })();
                let mut cell = CellEntry {
                    method: name.clone(),
                    cr: ratio,
                    m,
                    bits,
                    status: "ok".into(),
                    error: None,
                    samples: eval.len(),
                    lambda: solver.lambda,
                    rho0: solver.rho0,
                    alpha: solver.alpha,
                    max_iters: solver.max_iters,
                    init_sparsity: k,
                    omp_sparsity: matches!(method, Method::Baseline(crate::config::Baseline::Omp)).then_some(omp_k),
                    clip: quant.map(|q| q.clip()),
                    mu: quant.map(|q| q.mu()),
                    ridge_fallbacks: ridge,
                    nmse_db: None,
                };
                match outcome.and_then(|_| Ok(MetricsReport::aggregate(&metrics, &REPORT_SNRS_DB)?)) {
                    Ok(report) => {
                        cell.nmse_db = Some(report.nmse_db);
                        results.push(ResultRow { method: name.clone(), cr: ratio, bits, report });
                        traces.extend(cell_traces);
                    }
                    Err(e) => {
                        log::error!("{name} CR {ratio} bits {}: {e}", bits_label(bits));
                        cell.status = "failed".into();
                        cell.error = Some(e.to_string());
                    }
                }
                cells.push(cell);
            }
        }
    }

    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scale_oracle: true,
        retraining_steps: 0,
        clip_source: clip_source.into(),
        eval_samples: eval.len(),
        denoiser: denoiser_info,
        config: cfg.clone(),
        consumed: log.entries().clone(),
        projections,
        cells,
    };
    Ok(ExperimentOutput { results, traces, tuning: tuning_out, manifest })
}

fn failed_cell(name: &str, cr: f64, m: usize, bits: Option<u8>, s: &SolverConfig, k: usize, error: String) -> CellEntry {
    CellEntry {
        method: name.to_string(),
        cr,
        m,
        bits,
        status: "failed".into(),
        error: Some(error),
        samples: 0,
        lambda: s.lambda,
        rho0: s.rho0,
        alpha: s.alpha,
        max_iters: s.max_iters,
        init_sparsity: k,
        omp_sparsity: None,
        clip: None,
        mu: None,
        ridge_fallbacks: 0,
        nmse_db: None,
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let rate = |db: f64| r.report.rate_at(db).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.method,
            r.cr,
            bits_label(r.bits),
            r.report.nmse_db,
            r.report.cos,
            rate(0.0),
            rate(10.0),
            rate(20.0),
            r.report.sample_count
        ));
    }
    out
}

pub fn traces_csv(rows: &[TraceRow]) -> String {
    let mut out = format!("{TRACES_HEADER}\n");
    for t in rows {
        let r = &t.record;
        let nmse = r.nmse.map(|v| format!("{:.6}", csi_ppp_core::metrics::to_db(v))).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{:e},{:e},{:e},{}\n",
            t.method,
            t.cr,
            bits_label(t.bits),
            t.sample,
            r.iter,
            r.rho,
            r.sigma,
            r.residual,
            nmse
        ));
    }
    out
}

pub fn tuning_csv(tuning: &[(f64, TuneOutcome)]) -> String {
    let mut out = format!("{TUNING_HEADER}\n");
    for (cr, t) in tuning {
        for (i, r) in t.report.iter().enumerate() {
            out.push_str(&format!(
                "{cr},{:e},{:e},{},{:.6},{},{}\n",
                r.lambda,
                r.rho0,
                r.alpha,
                r.mean_nmse_db(),
                r.failures,
                u8::from(i == t.best_index)
            ));
        }
    }
    out
}

/// Writes `results.csv`, `traces.csv`, `manifest.toml` and, when tuning ran,
/// `tuning.csv`. Returns the files written.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files = vec![
        (dir.join("results.csv"), results_csv(&out.results)),
        (dir.join("traces.csv"), traces_csv(&out.traces)),
        (dir.join("manifest.toml"), out.manifest.to_toml()),
    ];
    if !out.tuning.is_empty() {
        files.push((dir.join("tuning.csv"), tuning_csv(&out.tuning)));
    }
    for (path, text) in &files {
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
