//! Desk-scale oracle-equivalence suite behind `dlnk verify`.
//!
//! Every check pairs a library computation with an independent route to the
//! same quantity and reports the discrepancy against a fixed threshold.
//! `scale` multiplies all Monte Carlo sample counts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::conv::{backward_tmap, kernel_conv, spectrum_lemma_check, ConvNetworkSpec};
use crate::equivalence::{conv_prior_equivalence, fc_prior_equivalence};
use crate::error::Result;
use crate::evidence::{evidence_zero_temperature, EvidenceMethod};
use crate::fc::{gram_fc, FcNetworkSpec};
use crate::ldp::{concentration_probe, log_cholesky, minimize_rate, MinimizeOptions, ProbeRegime, RateObjective};
use crate::linalg::SpdMatrix;
use crate::posterior::{posterior_mixing_is, predictive_mixture, weightspace_posterior_oracle, FcModel, SamplerChoice};
use crate::quadrature::integrate;
use crate::rng::RngStream;
use crate::stats::combined_z;
use crate::wishart::{standard_normal_matrix, wishart_laplace_check};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Discrepancy measure compared against `threshold` (smaller is better).
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn below(name: &str, statistic: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: statistic <= threshold,
            statistic,
            threshold,
            detail,
        }
    }
}

fn scaled(n: usize, scale: f64) -> usize {
    ((n as f64 * scale).round() as usize).max(1000)
}

fn random_spd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SpdMatrix {
    let a = standard_normal_matrix(dim, dim + 2, rng);
    SpdMatrix::new(&a * a.transpose() / (dim + 2) as f64 + DMatrix::identity(dim, dim) * 0.1).expect("shifted Gram is PD")
}

fn fc_prior(scale: f64, stream: &RngStream) -> Result<CheckResult> {
    let spec = FcNetworkSpec::unit(3, vec![8, 8], 2)?;
    let x = standard_normal_matrix(3, 2, &mut stream.split(99).rng());
    let r = fc_prior_equivalence(&spec, &x, scaled(100_000, scale), stream)?;
    Ok(CheckResult::below(
        "fc prior: mixture vs weight space",
        r.max_abs_z,
        4.0,
        format!("{} moments, max |z|", r.z_scores.len()),
    ))
}

fn conv_prior(scale: f64, stream: &RngStream) -> Result<CheckResult> {
    let spec = ConvNetworkSpec::unit(3, vec![2, 6], 3)?;
    let mut rng = stream.split(99).rng();
    let x: Vec<DMatrix<f64>> = (0..2).map(|_| standard_normal_matrix(2, 3, &mut rng)).collect();
    let r = conv_prior_equivalence(&spec, &x, scaled(100_000, scale), stream)?;
    Ok(CheckResult::below(
        "conv prior: mixture vs weight space",
        r.max_abs_z,
        4.0,
        format!("{} moments, max |z|", r.z_scores.len()),
    ))
}

fn predictive(scale: f64, stream: &RngStream) -> Result<CheckResult> {
    let spec = FcNetworkSpec::unit(2, vec![6], 1)?;
    let mut rng = stream.split(99).rng();
    let x = standard_normal_matrix(2, 3, &mut rng);
    let y = DVector::from_vec(vec![0.8, -0.4, 0.3]);
    let x0 = DVector::from_vec(vec![0.5, -1.0]);
    let model = FcModel::new(spec, x)?;
    let beta = 10.0;
    let choice = SamplerChoice::Is {
        n: scaled(200_000, scale),
    };
    let mix = predictive_mixture(&model, &x0, &y, beta, &choice, &stream.split(0), true)?;
    let oracle = weightspace_posterior_oracle(&model, &x0, &y, beta, scaled(1_000_000, scale), &stream.split(1))?;
    let zm = combined_z(mix.mean[0] - oracle.mean[0], mix.mean_se[0].hypot(oracle.mean_se[0]));
    let zv = combined_z(mix.cov[(0, 0)] - oracle.var[0], mix.var_se[0].hypot(oracle.var_se[0]));
    Ok(CheckResult::below(
        "predictive: mixture vs weight-space posterior",
        zm.abs().max(zv.abs()),
        4.0,
        format!("z(mean) = {zm:.2}, z(var) = {zv:.2}"),
    ))
}

/// Posterior mean of `Q` for D = L = 1 by 1-D quadrature.
fn quadrature_posterior_mean(spec: &FcNetworkSpec, x: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> f64 {
    let eig = gram_fc(spec, x).symmetric_eigen();
    let yt = eig.eigenvectors.transpose() * y;
    let a = spec.widths[0] as f64 / 2.0;
    let log_post = |q: f64| {
        let mut s = (a - 1.0) * q.ln() - a * q;
        for (k, v) in eig.eigenvalues.iter().zip(yt.iter()) {
            let c = q * k.max(0.0) + 1.0 / beta;
            s -= 0.5 * (v * v / c + c.ln());
        }
        s
    };
    let hi = 40.0;
    let shift = log_post(1.0);
    let z = integrate(|q| (log_post(q) - shift).exp(), 0.0, hi, 1e-14, 1e-12, 4000).value;
    let m = integrate(|q| q * (log_post(q) - shift).exp(), 0.0, hi, 1e-14, 1e-12, 4000).value;
    m / z
}

fn mixing_quadrature(scale: f64, stream: &RngStream) -> Result<CheckResult> {
    let spec = FcNetworkSpec::unit(3, vec![8], 1)?;
    let x = standard_normal_matrix(3, 3, &mut stream.split(99).rng());
    let y = DVector::from_vec(vec![1.1, -0.7, 0.4]);
    let beta = 4.0;
    let model = FcModel::new(spec.clone(), x.clone())?;
    let w = posterior_mixing_is(&model, &y, beta, scaled(200_000, scale), stream)?;
    let (mean, _) = w.expect(|m| m.q_top.matrix()[(0, 0)]);
    let exact = quadrature_posterior_mean(&spec, &x, &y, beta);
    Ok(CheckResult::below(
        "mixing posterior mean: importance sampling vs quadrature",
        (mean / exact - 1.0).abs(),
        5e-3,
        format!("IS {mean:.5}, quadrature {exact:.5}"),
    ))
}

fn evidence_forms() -> Result<CheckResult> {
    let spec = FcNetworkSpec::unit(5, vec![9], 1)?;
    let x = standard_normal_matrix(5, 3, &mut RngStream::new(5, 5).rng());
    let y = DVector::from_vec(vec![0.6, -0.2, 1.0]);
    let b = evidence_zero_temperature(&spec, &x, &y, &EvidenceMethod::BesselClosedForm)?;
    let c = evidence_zero_temperature(&spec, &x, &y, &EvidenceMethod::LogConvolution)?;
    let rel = ((b.log_value - c.log_value).exp() - 1.0).abs();
    Ok(CheckResult::below(
        "evidence: Bessel closed form vs log-convolution",
        rel,
        1e-6,
        format!("ln Z = {:.8}", b.log_value),
    ))
}

fn lazy_minimizer(stream: &RngStream) -> Result<CheckResult> {
    let obj = RateObjective::Lazy { dim: 2, depth: 3 };
    let mut rng = stream.rng();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let init: Vec<SpdMatrix> = (0..3).map(|_| random_spd(2, &mut rng)).collect();
        let pt = minimize_rate(&obj, Some(&init), &MinimizeOptions::default())?;
        for q in &pt.qs {
            worst = worst.max((q.matrix() - DMatrix::<f64>::identity(2, 2)).norm());
        }
    }
    Ok(CheckResult::below(
        "lazy rate: minimizer is the identity",
        worst,
        1e-6,
        "max Frobenius distance over 10 random starts".into(),
    ))
}

fn rate_gradients(stream: &RngStream) -> Result<CheckResult> {
    let spec = FcNetworkSpec::unit(3, vec![5, 5], 2)?;
    let mut rng = stream.rng();
    let x = standard_normal_matrix(3, 3, &mut rng);
    let y = DVector::from_fn(6, |i, _| (i as f64 * 0.9).cos());
    let model = FcModel::new(spec, x)?;
    let obj = RateObjective::MeanField(crate::ldp::MeanFieldObjective::new(&model, &y, 3.0)?);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let qs: Vec<SpdMatrix> = (0..2).map(|_| random_spd(2, &mut rng)).collect();
        let theta = log_cholesky(&qs)?;
        let (_, g) = obj.value_gradient(&theta)?;
        let h = 1e-5;
        let mut diff = 0.0;
        for i in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let fd = (obj.value_gradient(&tp)?.0 - obj.value_gradient(&tm)?.0) / (2.0 * h);
            diff += (fd - g[i]).powi(2);
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(diff.sqrt() / gn.max(1.0));
    }
    Ok(CheckResult::below(
        "mean-field rate: analytic vs finite-difference gradient",
        worst,
        1e-6,
        "max relative error over 20 random points".into(),
    ))
}

fn concentration(scale: f64, stream: &RngStream) -> Result<CheckResult> {
    let spec = FcNetworkSpec::unit(2, vec![4, 4], 2)?;
    let t = concentration_probe(
        &spec,
        &ProbeRegime::Lazy {
            n_draws: scaled(20_000, scale),
        },
        &[10, 100, 1000],
        stream,
    )?;
    Ok(CheckResult::below(
        "lazy concentration: log-log slope",
        (t.log_log_slope + 0.5).abs(),
        0.1,
        format!("slope {:.4}, target -0.5", t.log_log_slope),
    ))
}

fn laplace(scale: f64, stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.split(99).rng();
    let mut worst = 0.0f64;
    for k in 0..5u64 {
        let dim = 1 + (k as usize % 3);
        let v = random_spd(dim, &mut rng);
        let c = random_spd(dim, &mut rng).into_matrix();
        let r = wishart_laplace_check(&v, dim + 3, &c, 0.7, scaled(100_000, scale), &stream.split(k))?;
        worst = worst.max(r.z_score().abs());
    }
    Ok(CheckResult::below(
        "Wishart Laplace identity",
        worst,
        4.0,
        "max |z| over 5 configurations".into(),
    ))
}

fn spectrum(stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.rng();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (n0, p) = (3, 2);
        let k = random_spd(n0 * p, &mut rng).into_matrix();
        let s = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let (lhs, rhs) = spectrum_lemma_check(&k, &s)?;
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    Ok(CheckResult::below(
        "determinant spectrum lemma",
        worst,
        1e-8,
        "max relative gap over 10 instances".into(),
    ))
}

fn kernel_positivity(stream: &RngStream) -> Result<CheckResult> {
    let spec = ConvNetworkSpec::unit(4, vec![2, 6, 6], 3)?;
    let mut rng = stream.rng();
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let qs: Vec<SpdMatrix> = (0..2).map(|_| random_spd(4, &mut rng)).collect();
        let tq = backward_tmap(&spec, &qs)?;
        let x: Vec<DMatrix<f64>> = (0..5).map(|_| standard_normal_matrix(2, 4, &mut rng)).collect();
        let k = kernel_conv(&spec, &x, tq.matrix());
        worst = worst.min(k.symmetric_eigen().eigenvalues.min());
    }
    Ok(CheckResult::below(
        "conv kernel positivity",
        -worst,
        1e-10,
        format!("smallest eigenvalue {worst:.3e}"),
    ))
}

/// Runs every check; a check whose computation fails is reported as failed.
pub fn run_suite(seed: u64, scale: f64) -> Vec<CheckResult> {
    let root = RngStream::new(seed, 0);
    let s = |i: u64| root.split(i);
    let runs: Vec<(&str, Box<dyn Fn() -> Result<CheckResult>>)> = vec![
        ("fc prior: mixture vs weight space", Box::new(move || fc_prior(scale, &s(0)))),
        ("conv prior: mixture vs weight space", Box::new(move || conv_prior(scale, &s(1)))),
        ("predictive: mixture vs weight-space posterior", Box::new(move || predictive(scale, &s(2)))),
        ("mixing posterior mean: importance sampling vs quadrature", Box::new(move || mixing_quadrature(scale, &s(3)))),
        ("evidence: Bessel closed form vs log-convolution", Box::new(evidence_forms)),
        ("lazy rate: minimizer is the identity", Box::new(move || lazy_minimizer(&s(5)))),
        ("mean-field rate: analytic vs finite-difference gradient", Box::new(move || rate_gradients(&s(6)))),
        ("lazy concentration: log-log slope", Box::new(move || concentration(scale, &s(7)))),
        ("Wishart Laplace identity", Box::new(move || laplace(scale, &s(8)))),
        ("determinant spectrum lemma", Box::new(move || spectrum(&s(9)))),
        ("conv kernel positivity", Box::new(move || kernel_positivity(&s(10)))),
    ];
    runs.into_iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| CheckResult {
                name: name.into(),
                passed: false,
                statistic: f64::NAN,
                threshold: f64::NAN,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}

/// Plain-text pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{}  {:<width$}  {:>11.3e} <= {:<9.1e} {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold,
            r.detail
        ));
    }
    let passed = results.iter().filter(|r| r.passed).count();
    out.push_str(&format!("{passed}/{} checks passed\n", results.len()));
    out
}
