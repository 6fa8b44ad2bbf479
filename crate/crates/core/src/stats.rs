//! Summary statistics, log-log rate regression and normality diagnostics.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Root mean square of `xs` and its delta-method standard error.
pub fn rms_with_se(xs: &[f64]) -> (f64, f64) {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let ms = mean(&sq);
    let rms = ms.sqrt();
    let se = if rms > 0.0 && xs.len() > 1 { standard_error(&sq) / (2.0 * rms) } else { 0.0 };
    (rms, se)
}

/// Pearson correlation; 0 when either sample is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Result of fitting `log e = a − slope · log n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    /// Decay rate: `e ∝ n^{−slope}`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_ci_95: [f64; 2],
}

/// Weighted least squares on `(log n, log e)` with weights `(e / se)^2`,
/// the inverse variance of `log e`. Zero standard errors fall back to equal
/// weights.
pub fn fit_log_log(ns: &[f64], errors: &[f64], ses: &[f64]) -> Result<LogLogFit> {
    let k = ns.len();
    if k < 2 || errors.len() != k || ses.len() != k {
        return Err(Error::DegenerateFit(format!("need at least two points, got {k}")));
    }
    if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::DegenerateFit("errors must be positive and finite".into()));
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let w: Vec<f64> = if ses.iter().all(|s| *s > 0.0) {
        errors.iter().zip(ses).map(|(e, s)| (e / s).powi(2)).collect()
    } else {
        vec![1.0; k]
    };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = (0..k).map(|i| w[i] * (x[i] - xm).powi(2)).sum();
    if sxx <= 1e-14 * sw * (1.0 + xm * xm) {
        return Err(Error::DegenerateFit("all n identical".into()));
    }
    let sxy: f64 = (0..k).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let beta = sxy / sxx;
    let alpha = ym - beta * xm;
    let rss: f64 = (0..k).map(|i| w[i] * (y[i] - alpha - beta * x[i]).powi(2)).sum();
    let tss: f64 = (0..k).map(|i| w[i] * (y[i] - ym).powi(2)).sum();
    let r2 = if tss == 0.0 { 1.0 } else { 1.0 - rss / tss };
    let half = if k > 2 {
        let se = (rss / (k as f64 - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, k as f64 - 2.0).map_err(|e| Error::DegenerateFit(e.to_string()))?;
        t.inverse_cdf(0.975) * se
    } else {
        0.0
    };
    Ok(LogLogFit { slope: -beta, intercept: alpha, r2, slope_ci_95: [-beta - half, -beta + half] })
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// One-sample Kolmogorov–Smirnov statistic against `N(0,1)`.
pub fn ks_statistic(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal_cdf(*x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2 j² λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `xs` against `N(0,1)`: `(D, p-value)`, with the small-sample
/// correction `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_test_normal(xs: &[f64]) -> (f64, f64) {
    let d = ks_statistic(xs);
    let rn = (xs.len() as f64).sqrt();
    (d, kolmogorov_q((rn + 0.12 + 0.11 / rn) * d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let ns = [64.0, 128.0, 256.0, 512.0, 1024.0];
        let e: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.8)).collect();
        let se: Vec<f64> = e.iter().map(|x| 0.01 * x).collect();
        let f = fit_log_log(&ns, &e, &se).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.slope_ci_95[1] - f.slope_ci_95[0]).abs() < 1e-9);
    }

    #[test]
    fn degenerate_fits() {
        assert!(fit_log_log(&[1.0, 2.0], &[0.0, 1.0], &[0.1, 0.1]).is_err());
        assert!(fit_log_log(&[1.0], &[1.0], &[0.1]).is_err());
        assert!(fit_log_log(&[2.0, 2.0], &[1.0, 2.0], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn unweighted_fit_matches_hand_computation() {
        // y = ln e: points (0, 0), (1, -1), (2, -1) in ln-space after scaling
        let ns = [1.0, std::f64::consts::E, std::f64::consts::E.powi(2)];
        let e = [1.0, (-1.0f64).exp(), (-1.0f64).exp()];
        let f = fit_log_log(&ns, &e, &[0.0; 3]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.r2 - 0.75).abs() < 1e-12);
        // se = sqrt(rss/(k-2)/sxx) = sqrt((1/6)/1/2), t_{0.975,1} = 12.706
        let half = (f.slope_ci_95[1] - f.slope_ci_95[0]) / 2.0;
        assert!((half - 12.706_204_736 * (1.0f64 / 12.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // tabulated critical values of the Kolmogorov distribution
        assert!((kolmogorov_q(1.358_1) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_q(1.627_6) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_on_normal_quantiles_accepts() {
        let n = 1000;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                Normal::standard().inverse_cdf(p)
            })
            .collect();
        let (d, p) = ks_test_normal(&xs);
        assert!(d <= 0.5 / n as f64 + 1e-9);
        assert!(p > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.5).collect();
        assert!(ks_test_normal(&shifted).1 < 1e-6);
    }

    #[test]
    fn correlation_limits() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        assert!((correlation(&a, &b) - 1.0).abs() < 1e-15);
        let c = [8.0, 6.0, 4.0, 2.0];
        assert!((correlation(&a, &c) + 1.0).abs() < 1e-15);
        assert_eq!(correlation(&a, &[1.0; 4]), 0.0);
    }

    #[test]
    fn rms_and_se() {
        let (r, se) = rms_with_se(&[3.0, -3.0, 3.0, -3.0]);
        assert_eq!(r, 3.0);
        assert_eq!(se, 0.0);
        assert!((variance(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
