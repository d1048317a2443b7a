//! Subcommand bodies. Each returns a [`Report`] whose payload depends only on
//! the config and seed.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Architecture, EvidenceMethodName, ObjectiveName, RunConfig};
use super::data::{load_conv, load_fc, ConvData, FcData};
use super::report::{Provenance, Report, SCHEMA_VERSION};
use super::{CliError, ErrorKind};
use crate::equivalence::{conv_prior_equivalence, fc_prior_equivalence};
use crate::evidence::{evidence_finite_beta, evidence_zero_temperature, zero_temperature_log_scale, EvidenceMethod};
use crate::fc::FcNetworkSpec;
use crate::ldp::{
    concentration_probe, minimize_rate, rate_meanfield, saddle_scalar_solve, saddle_scalar_zero_temperature,
    MeanFieldObjective, ProbeRegime, RateObjective, RatePoint,
};
use crate::linalg::SpdMatrix;
use crate::posterior::{predictive_mixture, weightspace_posterior_oracle, ConvModel, FcModel, MixtureModel, PredictiveMixture};
use crate::rng::RngStream;
use crate::stats::combined_z;
use crate::verify::{format_table, run_suite};
use crate::wishart::standard_normal_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SamplePrior,
    Predict,
    Evidence,
    Ldp,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::SamplePrior => "sample-prior",
            Self::Predict => "predict",
            Self::Evidence => "evidence",
            Self::Ldp => "ldp",
            Self::Verify => "verify",
        }
    }
}

/// Parsed command line; flags override the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub oracle: bool,
}

/// What the binary should do once a report exists.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    /// Human-readable text for stdout (verify table), if any.
    pub text: Option<String>,
    /// Set when `verify` found failing checks.
    pub failure: Option<CliError>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

fn load_config(inv: &Invocation) -> Result<RunConfig, CliError> {
    let mut cfg = match &inv.config {
        Some(p) => RunConfig::load(p)?,
        None if inv.command == Command::Verify => RunConfig::verify_only(),
        None => return Err(CliError::config("--config is required for this subcommand")),
    };
    if let Some(s) = inv.seed {
        cfg.seed = s;
    }
    if inv.out.is_some() {
        cfg.out = inv.out.clone();
    }
    Ok(cfg)
}

fn require<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("missing {what}")))
}

enum Loaded {
    Fc(FcNetworkSpec, FcData),
    Conv(crate::conv::ConvNetworkSpec, ConvData),
}

fn load_train(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let path = require(cfg.data.train.as_ref(), "data.train")?;
    Ok(match cfg.architecture()? {
        Architecture::Fc(s) => {
            let d = load_fc(path, s.n0, s.d)?;
            Loaded::Fc(s, d)
        }
        Architecture::Conv(s) => {
            let d = load_conv(path, s.c0(), s.n0)?;
            Loaded::Conv(s, d)
        }
    })
}

fn labels(y: Option<DVector<f64>>) -> Result<DVector<f64>, CliError> {
    y.ok_or_else(|| CliError::data("training data has no label columns"))
}

fn sample_prior(cfg: &RunConfig) -> Result<Value, CliError> {
    let stream = RngStream::new(cfg.seed, 0);
    let n = cfg.sample_prior.n_samples;
    let (arch, r) = match load_train(cfg)? {
        Loaded::Fc(s, d) => ("fc", fc_prior_equivalence(&s, &d.x, n, &stream)?),
        Loaded::Conv(s, d) => ("conv", conv_prior_equivalence(&s, &d.x, n, &stream)?),
    };
    Ok(json!({
        "architecture": arch,
        "equivalence": r,
        "z_threshold": cfg.sample_prior.z_threshold,
        "passed": r.passes(cfg.sample_prior.z_threshold),
    }))
}

fn predictive_json(p: &PredictiveMixture) -> Value {
    let m = &p.mixture;
    json!({
        "mean": vec_of(&p.mean),
        "mean_se": vec_of(&p.mean_se),
        "cov": matrix_rows(&p.cov),
        "var_se": vec_of(&p.var_se),
        "diagnostics": {
            "sampler": m.sampler,
            "draws": m.len(),
            "ess": m.ess,
            "acceptance_rate": m.acceptance_rate,
            "log_normalizer": m.log_normalizer,
            "warnings": m.warnings,
        }
    })
}

fn predict_points<M: MixtureModel>(
    model: &M,
    tests: &[M::Input],
    y: &DVector<f64>,
    cfg: &RunConfig,
    oracle: bool,
) -> Result<Vec<Value>, CliError> {
    let root = RngStream::new(cfg.seed, 0);
    let beta = cfg.predict.beta;
    let choice = cfg.sampler.choice();
    let mut out = Vec::with_capacity(tests.len());
    for (t, x0) in tests.iter().enumerate() {
        let s = root.split(t as u64);
        let p = predictive_mixture(model, x0, y, beta, &choice, &s.split(0), cfg.predict.allow_rank_deficient)?;
        let mut v = predictive_json(&p);
        if oracle {
            let o = weightspace_posterior_oracle(model, x0, y, beta, cfg.predict.oracle_samples, &s.split(1))?;
            let d = p.mean.len();
            let zm: Vec<f64> = (0..d).map(|i| combined_z(p.mean[i] - o.mean[i], p.mean_se[i].hypot(o.mean_se[i]))).collect();
            let zv: Vec<f64> = (0..d)
                .map(|i| combined_z(p.cov[(i, i)] - o.var[i], p.var_se[i].hypot(o.var_se[i])))
                .collect();
            v["oracle"] = json!({
                "mean": vec_of(&o.mean),
                "mean_se": vec_of(&o.mean_se),
                "var": vec_of(&o.var),
                "var_se": vec_of(&o.var_se),
                "ess": o.ess,
                "z_mean": zm,
                "z_var": zv,
            });
        }
        out.push(v);
    }
    Ok(out)
}

fn predict(cfg: &RunConfig, oracle: bool) -> Result<Value, CliError> {
    let test_path = require(cfg.data.test.as_ref(), "data.test")?;
    let points = match load_train(cfg)? {
        Loaded::Fc(s, d) => {
            let t = load_fc(test_path, s.n0, s.d)?;
            let tests: Vec<DVector<f64>> = t.x.column_iter().map(|c| c.into_owned()).collect();
            let y = labels(d.y)?;
            predict_points(&FcModel::new(s, d.x)?, &tests, &y, cfg, oracle)?
        }
        Loaded::Conv(s, d) => {
            let t = load_conv(test_path, s.c0(), s.n0)?;
            let y = labels(d.y)?;
            predict_points(&ConvModel::new(s, d.x)?, &t.x, &y, cfg, oracle)?
        }
    };
    Ok(json!({ "beta": cfg.predict.beta, "test_points": points }))
}

fn fc_only(cfg: &RunConfig, what: &str) -> Result<(FcNetworkSpec, FcData), CliError> {
    match load_train(cfg)? {
        Loaded::Fc(s, d) => Ok((s, d)),
        Loaded::Conv(..) => Err(CliError::config(format!("{what} is implemented for fully-connected networks"))),
    }
}

fn evidence(cfg: &RunConfig) -> Result<Value, CliError> {
    let (spec, data) = fc_only(cfg, "evidence")?;
    let y = labels(data.y)?;
    let x = &data.x;
    let ec = &cfg.evidence;
    let root = RngStream::new(cfg.seed, 0);
    let method = |name: EvidenceMethodName, k: u64| match name {
        EvidenceMethodName::Quadrature => EvidenceMethod::Quadrature,
        EvidenceMethodName::MonteCarlo => EvidenceMethod::MonteCarlo {
            n_samples: ec.mc_samples,
            stream: root.split(k),
        },
        EvidenceMethodName::BesselClosedForm => EvidenceMethod::BesselClosedForm,
        EvidenceMethodName::LogConvolution => EvidenceMethod::LogConvolution,
    };
    let finite_names = [EvidenceMethodName::Quadrature, EvidenceMethodName::MonteCarlo];
    let zero_names = [
        EvidenceMethodName::BesselClosedForm,
        EvidenceMethodName::LogConvolution,
        EvidenceMethodName::MonteCarlo,
    ];
    let mut payload = json!({});
    let mut finite_best = None;
    if let Some(beta) = ec.beta {
        let mut results = Vec::new();
        for &name in ec.methods.iter().filter(|n| finite_names.contains(n)) {
            if name == EvidenceMethodName::Quadrature && spec.depth() > crate::evidence::MAX_QUADRATURE_LAYERS {
                continue;
            }
            results.push(evidence_finite_beta(&spec, x, &y, beta, &method(name, 0))?);
        }
        finite_best = results.first().map(|r| r.log_value);
        payload["finite_beta"] = json!({ "beta": beta, "results": results, "gaps": gaps(&results) });
    }
    let mut zero_best = None;
    if ec.zero_temperature {
        let mut results = Vec::new();
        for &name in ec.methods.iter().filter(|n| zero_names.contains(n)) {
            if name == EvidenceMethodName::BesselClosedForm && spec.depth() != 1 {
                continue;
            }
            results.push(evidence_zero_temperature(&spec, x, &y, &method(name, 1))?);
        }
        zero_best = results.first().map(|r| r.log_value);
        payload["zero_temperature"] = json!({
            "omega": crate::evidence::omega(&spec, x, &y)?,
            "results": results,
            "gaps": gaps(&results),
        });
    }
    if let (Some(beta), Some(f), Some(z)) = (ec.beta, finite_best, zero_best) {
        let scaled = f + zero_temperature_log_scale(&spec, x, beta)?;
        payload["limit_gap"] = json!({
            "scaled_finite_log_value": scaled,
            "relative_gap": (scaled - z).exp() - 1.0,
        });
    }
    Ok(payload)
}

/// Pairwise relative gaps `|Z_i/Z_j − 1|`.
fn gaps(results: &[crate::evidence::EvidenceResult]) -> Vec<Value> {
    let mut out = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            out.push(json!({
                "methods": [results[i].method, results[j].method],
                "relative_gap": ((results[i].log_value - results[j].log_value).exp() - 1.0).abs(),
            }));
        }
    }
    out
}

fn point_json(p: &RatePoint) -> Value {
    json!({
        "qs": p.qs.iter().map(|q| matrix_rows(q.matrix())).collect::<Vec<_>>(),
        "value": p.value,
        "gradient_norm": p.gradient_norm,
        "iterations": p.iterations,
        "converged": p.converged,
    })
}

fn random_start(dim: usize, depth: usize, stream: &RngStream) -> Vec<SpdMatrix> {
    let mut rng = stream.rng();
    (0..depth)
        .map(|_| {
            let a = standard_normal_matrix(dim, dim, &mut rng);
            SpdMatrix::new(&a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.2).expect("shifted Gram is PD")
        })
        .collect()
}

fn ldp(cfg: &RunConfig) -> Result<Value, CliError> {
    let lc = &cfg.ldp;
    let spec = match cfg.architecture()? {
        Architecture::Fc(s) => s,
        Architecture::Conv(_) => return Err(CliError::config("ldp is implemented for fully-connected networks")),
    };
    let root = RngStream::new(cfg.seed, 0);
    let needs_data = lc.objective == ObjectiveName::Meanfield || lc.saddle_alpha.is_some();
    let data = if needs_data {
        let (_, d) = fc_only(cfg, "ldp")?;
        Some((d.x.clone(), labels(d.y)?))
    } else {
        None
    };
    let (d, depth) = (spec.d, spec.depth());
    let objective = match (&lc.objective, &data) {
        (ObjectiveName::Lazy, _) => RateObjective::Lazy { dim: d, depth },
        (ObjectiveName::Meanfield, Some((x, y))) => {
            RateObjective::MeanField(MeanFieldObjective::new(&FcModel::new(spec.clone(), x.clone())?, y, lc.beta)?)
        }
        (ObjectiveName::Meanfield, None) => unreachable!("data loaded for mean-field objectives"),
    };
    let opts = lc.options();
    let starts: Vec<Option<Vec<SpdMatrix>>> = std::iter::once(None)
        .chain((0..lc.random_starts).map(|k| Some(random_start(d, depth, &root.split(k as u64)))))
        .collect();
    let points = starts
        .par_iter()
        .map(|init| minimize_rate(&objective, init.as_deref(), &opts))
        .collect::<crate::Result<Vec<_>>>()?;
    let best = points
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least the identity start");
    let mut payload = json!({
        "objective": lc.objective,
        "starts": points.iter().map(point_json).collect::<Vec<_>>(),
        "minimizer": point_json(best),
        "all_converged": points.iter().all(|p| p.converged),
    });
    match &objective {
        RateObjective::Lazy { .. } => {
            let dist = points
                .iter()
                .flat_map(|p| p.qs.iter().map(|q| (q.matrix() - DMatrix::<f64>::identity(d, d)).norm()))
                .fold(0.0f64, f64::max);
            payload["max_distance_to_identity"] = json!(dist);
        }
        RateObjective::MeanField(m) => {
            let i0 = best.value;
            let rates = points
                .iter()
                .map(|p| rate_meanfield(&p.qs, m, i0))
                .collect::<crate::Result<Vec<_>>>()?;
            let (phi, r) = m.phi_parts(&best.qs)?;
            payload["infimum"] = json!(i0);
            payload["rate_at_starts"] = json!(rates);
            payload["phi_at_minimizer"] = json!(phi);
            payload["logdet_term_at_minimizer"] = json!(r);
        }
    }
    if lc.widths.len() >= 2 {
        let regime = match &data {
            Some((x, y)) if lc.objective == ObjectiveName::Meanfield => ProbeRegime::MeanField {
                x: x.clone(),
                y: y.clone(),
                beta: lc.beta,
                settings: cfg.sampler.mh(),
            },
            _ => ProbeRegime::Lazy { n_draws: lc.n_draws },
        };
        payload["concentration"] = json!(concentration_probe(&spec, &regime, &lc.widths, &root.split(1 << 32))?);
    }
    if let (Some(alpha), Some((x, y))) = (lc.saddle_alpha, &data) {
        let s = saddle_scalar_solve(&spec, x, y, alpha, lc.beta)?;
        let (z, sensitivity) = saddle_scalar_zero_temperature(&spec, x, y, alpha)?;
        payload["saddle"] = json!({
            "alpha": alpha,
            "at_beta": s,
            "large_beta": z,
            "large_beta_sensitivity": sensitivity,
        });
    }
    Ok(payload)
}

fn verify(cfg: &RunConfig) -> (Value, String, bool) {
    let results = run_suite(cfg.seed, cfg.verify.scale);
    let ok = results.iter().all(|r| r.passed);
    let table = format_table(&results);
    (json!({ "checks": results, "all_passed": ok }), table, ok)
}

/// Runs a subcommand inside a pool of `threads` workers.
pub fn run(inv: &Invocation) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let cfg = load_config(inv)?;
    let threads = match inv.threads {
        Some(0) => return Err(CliError::config("--threads must be positive")),
        Some(n) => n,
        None => rayon::current_num_threads(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {threads} threads: {e}")))?;
    let (payload, text, failure) = pool.install(|| -> Result<_, CliError> {
        Ok(match inv.command {
            Command::SamplePrior => (sample_prior(&cfg)?, None, None),
            Command::Predict => (predict(&cfg, inv.oracle)?, None, None),
            Command::Evidence => (evidence(&cfg)?, None, None),
            Command::Ldp => (ldp(&cfg)?, None, None),
            Command::Verify => {
                let (p, table, ok) = verify(&cfg);
                let failure = (!ok).then(|| CliError::new(ErrorKind::Verify, "one or more verify checks failed"));
                (p, Some(table), failure)
            }
        })
    })?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: inv.command.name().into(),
        config: serde_json::to_value(&cfg).expect("config serializes"),
        payload,
        provenance: Provenance::new(
            cfg.seed,
            threads,
            start.elapsed().as_secs_f64(),
            inv.config.as_ref().map(|p| p.display().to_string()),
        ),
    };
    if let Some(path) = &cfg.out {
        std::fs::write(path, report.to_json())
            .map_err(|e| CliError::data(format!("cannot write report: {e}")).in_file(path.clone()))?;
    }
    Ok(Outcome { report, text, failure })
}
