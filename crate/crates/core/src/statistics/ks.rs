//! One-sample Kolmogorov-Smirnov test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function with Stephens' small-sample
/// correction of the argument.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `samples` against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_p_value(d, x.len()),
    })
}

/// KS test against `N(mean, sd^2)`.
pub fn ks_normal(samples: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    let dist = Normal::new(mean, sd).map_err(|e| Error::InvalidArgument(format!("normal law: {e}")))?;
    ks_test(samples, |x| dist.cdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p_value_reference_points() {
        // critical values of the limiting distribution
        assert!((kolmogorov_p_value(1.358 / 1e4f64.sqrt(), 10_000) - 0.05).abs() < 2e-3);
        assert!((kolmogorov_p_value(1.628 / 1e4f64.sqrt(), 10_000) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_p_value(0.0, 100), 1.0);
    }

    #[test]
    fn uniform_samples_pass_and_shifted_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_test(&u, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 0.01);
        let v: Vec<f64> = u.iter().map(|x| x * 0.95).collect();
        assert!(ks_test(&v, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
    }
}
