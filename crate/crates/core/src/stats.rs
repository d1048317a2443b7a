//! Monte-Carlo summaries: running moments, z-scores, weights and ESS.

use nalgebra::DVector;

/// Running mean and variance of a vector-valued statistic (Welford/Chan).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: DVector<f64>,
    m2: DVector<f64>,
}

impl MeanAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(dim),
            m2: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.push_slice(x.as_slice());
    }

    pub fn push_slice(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.n += 1;
        let n = self.n as f64;
        for (i, &xi) in x.iter().enumerate() {
            let d = xi - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (xi - self.mean[i]);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        for i in 0..self.dim() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    /// Merges parts in the given order.
    pub fn merge_all<I: IntoIterator<Item = Self>>(parts: I, dim: usize) -> Self {
        let mut acc = Self::new(dim);
        for p in parts {
            acc.merge(&p);
        }
        acc
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> DVector<f64> {
        if self.n < 2 {
            return DVector::zeros(self.dim());
        }
        &self.m2 / (self.n as f64 - 1.0)
    }

    pub fn std_error(&self) -> DVector<f64> {
        let n = self.n.max(1) as f64;
        self.variance().map(|v| (v / n).sqrt())
    }
}

/// z-scores `(a − b)/sqrt(se_a² + se_b²)` between two accumulators.
/// Entries whose combined standard error vanishes score 0 when the means
/// coincide and ∞ otherwise.
pub fn z_scores(a: &MeanAccumulator, b: &MeanAccumulator) -> Vec<f64> {
    let sa = a.std_error();
    let sb = b.std_error();
    (0..a.dim())
        .map(|i| {
            let se = (sa[i] * sa[i] + sb[i] * sb[i]).sqrt();
            let d = a.mean()[i] - b.mean()[i];
            combined_z(d, se)
        })
        .collect()
}

/// `d / se` with the degenerate-zero convention of [`z_scores`].
pub fn combined_z(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d / se
    } else if d.abs() <= 1e-300 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Feature map turning a draw into first, second and selected fourth moments.
#[derive(Debug, Clone)]
pub struct MomentFeatures {
    dim: usize,
    fourth: Vec<[usize; 4]>,
}

impl MomentFeatures {
    pub fn new(dim: usize, fourth: Vec<[usize; 4]>) -> Self {
        assert!(fourth.iter().flatten().all(|&i| i < dim));
        Self { dim, fourth }
    }

    /// First moments, all second moments `i ≤ j`, and the diagonal fourth
    /// moments `E[s_i⁴]` plus the mixed `E[s_0² s_last²]`.
    pub fn standard(dim: usize) -> Self {
        let mut fourth: Vec<[usize; 4]> = (0..dim).map(|i| [i, i, i, i]).collect();
        if dim > 1 {
            fourth.push([0, 0, dim - 1, dim - 1]);
        }
        Self::new(dim, fourth)
    }

    pub fn len(&self) -> usize {
        self.dim + self.dim * (self.dim + 1) / 2 + self.fourth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_first(&self) -> usize {
        self.dim
    }

    pub fn n_second(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.dim {
            out.push(format!("E[s{i}]"));
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(format!("E[s{i} s{j}]"));
            }
        }
        for f in &self.fourth {
            out.push(format!("E[s{} s{} s{} s{}]", f[0], f[1], f[2], f[3]));
        }
        out
    }

    pub fn write(&self, s: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(s);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(s[i] * s[j]);
            }
        }
        for f in &self.fourth {
            out.push(s[f[0]] * s[f[1]] * s[f[2]] * s[f[3]]);
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Self-normalized weights from log weights.
pub fn normalized_weights(log_w: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_w);
    log_w.iter().map(|l| (l - lse).exp()).collect()
}

/// Kish effective sample size `(Σw)²/Σw²`.
pub fn ess_from_log_weights(log_w: &[f64]) -> f64 {
    if log_w.is_empty() {
        return 0.0;
    }
    let w = normalized_weights(log_w);
    1.0 / w.iter().map(|x| x * x).sum::<f64>()
}

/// Self-normalized weighted mean of `f` and its delta-method standard error.
pub fn weighted_mean_se(weights: &[f64], f: &[f64]) -> (f64, f64) {
    let sw: f64 = weights.iter().sum();
    let mean = weights.iter().zip(f).map(|(w, x)| w * x).sum::<f64>() / sw;
    let var = weights
        .iter()
        .zip(f)
        .map(|(w, x)| (w / sw).powi(2) * (x - mean).powi(2))
        .sum::<f64>();
    (mean, var.sqrt())
}

/// Effective sample size of a correlated chain via Geyer's initial positive
/// sequence estimator.
pub fn autocorrelation_ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        x[..n - lag]
            .iter()
            .zip(&x[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = acf(2 * k) + acf(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64)
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Mode of a weighted Gaussian kernel density estimate, located on a
/// 2000-point grid spanning the samples. Bandwidth follows Silverman's rule
/// with the Kish effective sample size.
pub fn kde_mode(samples: &[f64], weights: &[f64]) -> f64 {
    let sw: f64 = weights.iter().sum();
    let mean = samples.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / sw;
    let var = samples.iter().zip(weights).map(|(x, w)| w * (x - mean).powi(2)).sum::<f64>() / sw;
    let ess = sw * sw / weights.iter().map(|w| w * w).sum::<f64>();
    let h = 1.06 * var.sqrt() * ess.powf(-0.2);
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m = 2000;
    (0..=m)
        .map(|i| lo + (hi - lo) * i as f64 / m as f64)
        .map(|t| {
            let d: f64 = samples
                .iter()
                .zip(weights)
                .map(|(x, w)| w * (-0.5 * ((t - x) / h).powi(2)).exp())
                .sum();
            (t, d)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t)
        .unwrap_or(mean)
}
