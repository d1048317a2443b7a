use dlnk::conv::ConvNetworkSpec;
use dlnk::fc::{sample_mixing, FcNetworkSpec};
use dlnk::posterior::{
    joint_posterior_moments, meanfield_mixing, phi_beta, phi_parts, posterior_mixing_is, posterior_mixing_mh, predictive_mixture,
    predictive_moments, weightspace_posterior_oracle, ConvModel, FcModel, MhSettings, MixtureModel, SamplerChoice,
    SigmaBlocks,
};
use dlnk::quadrature::integrate;
use dlnk::wishart::standard_normal_matrix;
use dlnk::{MixingSample, RngStream};
use nalgebra::{DMatrix, DVector};

fn fc_instance(n0: usize, width: usize, p: usize, seed: u64) -> (FcModel, DVector<f64>) {
    let spec = FcNetworkSpec::unit(n0, vec![width], 1).unwrap();
    let x = standard_normal_matrix(n0, p, &mut RngStream::new(seed, 0).rng());
    let y = DVector::from_fn(p, |i, _| (1.3 * i as f64 + 0.4).sin());
    (FcModel::new(spec, x).unwrap(), y)
}

/// Posterior mean of the scalar `Q` for one hidden layer, by quadrature over
/// the Gamma prior times `e^{−Φ/2}` written in the eigenbasis of the Gram.
fn quadrature_mean(model: &FcModel, y: &DVector<f64>, beta: f64) -> f64 {
    let eig = model.gram().clone().symmetric_eigen();
    let yt = eig.eigenvectors.transpose() * y;
    let a = model.spec.widths[0] as f64 / 2.0;
    let log_post = |q: f64| {
        let mut s = (a - 1.0) * q.ln() - a * q;
        for (k, v) in eig.eigenvalues.iter().zip(yt.iter()) {
            let c = q * k.max(0.0) + 1.0 / beta;
            s -= 0.5 * (v * v / c + c.ln());
        }
        s
    };
    let shift = log_post(1.0);
    let z = integrate(|q| (log_post(q) - shift).exp(), 0.0, 40.0, 1e-14, 1e-12, 4000).value;
    let m = integrate(|q| q * (log_post(q) - shift).exp(), 0.0, 40.0, 1e-14, 1e-12, 4000).value;
    m / z
}

fn q_top(m: &MixingSample) -> f64 {
    m.q_top.matrix()[(0, 0)]
}

#[test]
fn phi_spot_values() {
    let s = DMatrix::from_element(1, 1, 1.0);
    let y = DVector::from_element(1, 2.0);
    assert!((phi_beta(&s, &y, 1.0).unwrap() - (2.0 + 2f64.ln())).abs() < 1e-14);
    assert_eq!(phi_beta(&DMatrix::zeros(2, 2), &DVector::zeros(2), 3.0).unwrap(), 0.0);
}

#[test]
fn tiny_beta_posterior_is_the_prior() {
    let (model, y) = fc_instance(3, 6, 3, 1);
    let w = posterior_mixing_is(&model, &y, 1e-12, 100_000, &RngStream::new(1, 1)).unwrap();
    let weights = w.weights();
    let max = weights.iter().cloned().fold(0.0, f64::max);
    let min = weights.iter().cloned().fold(1.0, f64::min);
    assert!(max / min - 1.0 < 1e-9);
    let (m, se) = w.expect(q_top);
    assert!(((m - 1.0) / se).abs() < 4.0);

    let settings = MhSettings {
        n_steps: 40_000,
        ..MhSettings::default()
    };
    let w = posterior_mixing_mh(&model, &y, 1e-12, &settings, &RngStream::new(1, 2)).unwrap();
    let (m, se) = w.expect(q_top);
    assert!(((m - 1.0) / se).abs() < 4.0, "mean {m} ± {se}");
    let (m2, se2) = w.expect(|s| q_top(s).powi(2));
    // E[Q²] = 1 + 2/N for Q ~ Gamma(N/2, rate N/2)
    assert!(((m2 - (1.0 + 2.0 / 6.0)) / se2).abs() < 4.0, "second moment {m2} ± {se2}");
}

#[test]
fn zero_labels_shrink_the_mixing_posterior() {
    let (model, _) = fc_instance(3, 6, 3, 2);
    let y = DVector::zeros(3);
    let beta = 5.0;
    let w = posterior_mixing_is(&model, &y, beta, 400_000, &RngStream::new(2, 1)).unwrap();
    let (m, se) = w.expect(q_top);
    let exact = quadrature_mean(&model, &y, beta);
    assert!(exact < 1.0);
    assert!(((m - exact) / se).abs() < 4.0, "IS {m} ± {se}, quadrature {exact}");
}

#[test]
fn samplers_match_quadrature() {
    let (model, y) = fc_instance(3, 8, 3, 3);
    let beta = 4.0;
    let exact = quadrature_mean(&model, &y, beta);
    let w = posterior_mixing_is(&model, &y, beta, 1_000_000, &RngStream::new(3, 1)).unwrap();
    let (is, _) = w.expect(q_top);
    assert!((is / exact - 1.0).abs() < 5e-3, "IS {is} quadrature {exact}");
    let settings = MhSettings {
        n_steps: 100_000,
        burn_in: 5_000,
        ..MhSettings::default()
    };
    let w = posterior_mixing_mh(&model, &y, beta, &settings, &RngStream::new(3, 2)).unwrap();
    let (mh, _) = w.expect(q_top);
    assert!((mh / exact - 1.0).abs() < 5e-3, "MH {mh} quadrature {exact}");
}

#[test]
fn samplers_agree_on_mean_phi() {
    let spec = FcNetworkSpec::unit(3, vec![5, 6], 2).unwrap();
    let x = standard_normal_matrix(3, 3, &mut RngStream::new(4, 0).rng());
    let model = FcModel::new(spec, x).unwrap();
    let y = DVector::from_fn(6, |i, _| 0.5 * (i as f64).cos());
    let beta = 2.0;
    let a = posterior_mixing_is(&model, &y, beta, 200_000, &RngStream::new(4, 1)).unwrap();
    let b = posterior_mixing_mh(&model, &y, beta, &MhSettings::default(), &RngStream::new(4, 2)).unwrap();
    let (ma, sa) = a.mean_se(&a.phis);
    let (mb, sb) = b.mean_se(&b.phis);
    assert!(((ma - mb) / sa.hypot(sb)).abs() < 4.0, "IS {ma} ± {sa}, MH {mb} ± {sb}");
}

#[test]
fn interpolation_at_large_beta() {
    let spec = FcNetworkSpec::unit(2, vec![5], 1).unwrap();
    let x = DMatrix::from_column_slice(2, 1, &[0.7, -1.1]);
    let model = FcModel::new(spec, x.clone()).unwrap();
    let y = DVector::from_element(1, 0.9);
    let mix = sample_mixing(&model.spec, &mut RngStream::new(5, 0).rng()).unwrap();
    let big = model.with_test_input(&x.column(0).into_owned()).unwrap();
    let blocks = SigmaBlocks::split(&big.kernel(&mix).unwrap(), 1).unwrap();
    let p = predictive_moments(&blocks, &y, 1e10).unwrap();
    assert!((p.mean[0] - 0.9).abs() < 1e-8);
    assert!(p.cov[(0, 0)].abs() < 1e-8);
    let p = predictive_moments(&blocks, &DVector::zeros(1), 3.0).unwrap();
    assert_eq!(p.mean[0], 0.0);
}

#[test]
fn predictive_shrinks_to_zero_at_small_beta() {
    let (model, y) = fc_instance(4, 6, 3, 6);
    let x0 = DVector::from_vec(vec![0.3, 1.0, -0.5, 0.2]);
    let r = predictive_mixture(&model, &x0, &y, 1e-9, &SamplerChoice::Is { n: 20_000 }, &RngStream::new(6, 0), false)
        .unwrap();
    assert!(r.mean[0].abs() < 1e-6);
}

#[test]
fn conv_predictive_matches_weightspace_posterior() {
    let spec = ConvNetworkSpec::unit(2, vec![2, 3], 1).unwrap();
    let mut rng = RngStream::new(7, 0).rng();
    let x: Vec<DMatrix<f64>> = (0..2).map(|_| standard_normal_matrix(2, 2, &mut rng)).collect();
    let x0 = standard_normal_matrix(2, 2, &mut rng);
    let y = DVector::from_vec(vec![0.6, -0.3]);
    let model = ConvModel::new(spec, x).unwrap();
    let beta = 5.0;
    let mix = predictive_mixture(&model, &x0, &y, beta, &SamplerChoice::Is { n: 200_000 }, &RngStream::new(7, 1), false)
        .unwrap();
    let oracle = weightspace_posterior_oracle(&model, &x0, &y, beta, 1_000_000, &RngStream::new(7, 2)).unwrap();
    let zm = (mix.mean[0] - oracle.mean[0]) / mix.mean_se[0].hypot(oracle.mean_se[0]);
    let zv = (mix.cov[(0, 0)] - oracle.var[0]) / mix.var_se[0].hypot(oracle.var_se[0]);
    assert!(zm.abs() < 4.0 && zv.abs() < 4.0, "z(mean) {zm}, z(var) {zv}");
}

#[test]
fn meanfield_weights_split_phi() {
    // shared draws: plain log-weight −(Φ° + R)/2, mean-field −(N/2)Φ° − R/2
    let (model, y) = fc_instance(2, 7, 2, 8);
    let s = RngStream::new(8, 0);
    let a = posterior_mixing_is(&model, &y, 2.0, 5000, &s).unwrap();
    let b = meanfield_mixing(&model, &y, 2.0, 5000, &s).unwrap();
    for i in 0..a.len() {
        let mix = a.mixing(i);
        assert_eq!(mix, b.mixing(i));
        let (phi0, r) = phi_parts(&model.kernel(&mix).unwrap(), &y, 2.0).unwrap();
        assert!((a.log_weights[i] + 0.5 * (phi0 + r)).abs() < 1e-10);
        assert!((b.log_weights[i] + 3.5 * phi0 + 0.5 * r).abs() < 1e-10);
    }
}

#[test]
fn conditional_variance_decreases_in_beta() {
    let spec = FcNetworkSpec::unit(3, vec![4, 5], 2).unwrap();
    let mut rng = RngStream::new(9, 0).rng();
    let x = standard_normal_matrix(3, 2, &mut rng);
    let model = FcModel::new(spec.clone(), x).unwrap();
    let x0 = DVector::from_vec(vec![0.2, -0.4, 1.0]);
    let y = DVector::from_fn(4, |i, _| i as f64 - 1.5);
    for _ in 0..20 {
        let mix = sample_mixing(&spec, &mut rng).unwrap();
        let mut last = f64::INFINITY;
        for beta in [0.1, 1.0, 10.0, 100.0] {
            let g = joint_posterior_moments(&model, &x0, &y, beta, &mix).unwrap();
            let c = g.cov.view((0, 0), (2, 2)).into_owned();
            let tr = c.trace();
            assert!(c.symmetric_eigen().eigenvalues.min() >= -1e-12);
            assert!(tr <= last + 1e-12);
            last = tr;
        }
    }
}

#[test]
fn retained_predictive_covariances_are_psd() {
    let spec = FcNetworkSpec::unit(3, vec![4], 2).unwrap();
    let x = standard_normal_matrix(3, 2, &mut RngStream::new(10, 0).rng());
    let model = FcModel::new(spec, x).unwrap();
    let y = DVector::from_vec(vec![0.1, 0.5, -0.2, 0.3]);
    let x0 = DVector::from_vec(vec![1.0, 0.0, -1.0]);
    let r = predictive_mixture(&model, &x0, &y, 3.0, &SamplerChoice::Is { n: 5000 }, &RngStream::new(10, 1), false)
        .unwrap();
    for i in 0..r.mixture.len() {
        let c = r.mixture.predictive(i).unwrap().cov;
        assert!(c.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }
}

#[test]
fn permuting_training_pairs_leaves_the_prediction() {
    let (model, y) = fc_instance(5, 6, 4, 11);
    let order = [2usize, 0, 3, 1];
    let yp = DVector::from_fn(4, |i, _| y[order[i]]);
    let mp = model.permuted(&order);
    let x0 = DVector::from_vec(vec![0.5, 0.5, -0.2, 0.1, 0.9]);
    let s = RngStream::new(11, 1);
    let a = predictive_mixture(&model, &x0, &y, 2.0, &SamplerChoice::Is { n: 10_000 }, &s, false).unwrap();
    let b = predictive_mixture(&mp, &x0, &yp, 2.0, &SamplerChoice::Is { n: 10_000 }, &s, false).unwrap();
    assert!((a.mean[0] - b.mean[0]).abs() < 1e-10);
    assert!((a.cov[(0, 0)] - b.cov[(0, 0)]).abs() < 1e-10);
}
