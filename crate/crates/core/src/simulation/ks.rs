//! One-sample Kolmogorov-Smirnov test against the standard normal.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Supremum distance between the empirical CDF of `sample` and `Φ`, with an
/// asymptotic p-value using the `sqrt(n) + 0.12 + 0.11/sqrt(n)` small-sample
/// correction.
pub fn ks_standard_normal(sample: &[f64]) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::Dimension("KS test needs at least one observation".into()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("KS sample contains non-finite values".into()));
    }
    let normal = Normal::standard();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal.cdf(x);
            (c - i as f64 / n).max((i + 1) as f64 / n - c)
        })
        .fold(0.0, f64::max);
    let en = n.sqrt();
    let p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * statistic);
    Ok(KsResult { statistic, p_value, n: sorted.len() })
}

/// `P(K > x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)` for the Kolmogorov
/// distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_reference_values() {
        // Classical critical values of the Kolmogorov distribution.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn statistic_by_hand() {
        // Single point at 0: D = max(Φ(0) - 0, 1 - Φ(0)) = 0.5.
        let r = ks_standard_normal(&[0.0]).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_quantiles_pass_shifted_fail() {
        let normal = Normal::standard();
        let n = 400;
        let q: Vec<f64> = (0..n).map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        assert!(ks_standard_normal(&q).unwrap().p_value > 0.99);
        let shifted: Vec<f64> = q.iter().map(|v| v + 0.5).collect();
        assert!(ks_standard_normal(&shifted).unwrap().p_value < 1e-6);
    }
}
