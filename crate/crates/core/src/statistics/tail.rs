//! Power-law tail estimation: Hill's estimator and log-log regression of
//! the empirical survival function, with percentile bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{loglog_fit, logspace};

const MIN_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailMethod {
    /// Hill estimator on the `k` largest order statistics (`sqrt(n)` if unset).
    Hill { k: Option<usize> },
    /// Least squares of `ln P(X > t)` on `ln t` over `t` in `window`.
    /// Without a window, `t` runs from the upper decile to the 100th largest
    /// sample.
    LoglogRegression { window: Option<(f64, f64)> },
}

impl Default for TailMethod {
    fn default() -> Self {
        TailMethod::Hill { k: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFitConfig {
    pub method: TailMethod,
    /// Bootstrap replicates; `0` disables the interval.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for TailFitConfig {
    fn default() -> Self {
        TailFitConfig {
            method: TailMethod::default(),
            bootstrap: 200,
            seed: 0,
        }
    }
}

/// Fit of `P(X > t) ~ C t^(-beta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub beta_hat: f64,
    pub c_hat: f64,
    pub ci95: Option<(f64, f64)>,
    pub n_samples: usize,
    pub method: TailMethod,
    /// Order statistics used (Hill) or regression nodes (log-log).
    pub points: usize,
}

fn positive_sorted_desc(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("tail samples must be finite".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(|a, b| b.total_cmp(a));
    Ok(x)
}

/// Hill estimate `(alpha, C)` from the `k + 1` largest values, sorted
/// descending.
fn hill_top(top: &[f64], k: usize, n: usize) -> Result<(f64, f64)> {
    let xk = top[k];
    if !(xk > 0.0) {
        return Err(Error::InvalidArgument(format!("order statistic X_(k+1) = {xk} is not positive")));
    }
    let lk = xk.ln();
    let gamma = top[..k].iter().map(|x| x.ln() - lk).sum::<f64>() / k as f64;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("degenerate upper tail".into()));
    }
    let alpha = 1.0 / gamma;
    Ok((alpha, (k as f64 / n as f64) * xk.powf(alpha)))
}

fn hill_k(k: Option<usize>, n: usize) -> Result<usize> {
    let k = k.unwrap_or_else(|| (n as f64).sqrt().floor() as usize);
    if k < 2 || k >= n {
        return Err(Error::InvalidArgument(format!("Hill order k = {k} with n = {n}")));
    }
    Ok(k)
}

const REGRESSION_NODES: usize = 20;

fn default_window(sorted_desc: &[f64]) -> (f64, f64) {
    let n = sorted_desc.len();
    (sorted_desc[n / 10], sorted_desc[100.min(n - 1)])
}

fn regression(sorted_desc: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("regression window ({lo}, {hi})")));
    }
    let n = sorted_desc.len() as f64;
    let mut ts = Vec::with_capacity(REGRESSION_NODES);
    let mut ss = Vec::with_capacity(REGRESSION_NODES);
    for t in logspace(lo, hi, REGRESSION_NODES) {
        // samples are sorted descending, so the exceedances form a prefix
        let count = sorted_desc.partition_point(|x| *x > t);
        if count > 0 {
            ts.push(t);
            ss.push(count as f64 / n);
        }
    }
    let fit = loglog_fit(&ts, &ss)?;
    Ok((-fit.slope, fit.intercept.exp()))
}

fn estimate_sorted(sorted_desc: &[f64], method: TailMethod) -> Result<(f64, f64, usize)> {
    let n = sorted_desc.len();
    match method {
        TailMethod::Hill { k } => {
            let k = hill_k(k, n)?;
            let (a, c) = hill_top(sorted_desc, k, n)?;
            Ok((a, c, k))
        }
        TailMethod::LoglogRegression { window } => {
            let w = window.unwrap_or_else(|| default_window(sorted_desc));
            let (b, c) = regression(sorted_desc, w)?;
            Ok((b, c, REGRESSION_NODES))
        }
    }
}

/// Estimate the tail index and constant of `samples`.
pub fn tail_fit(samples: &[f64], config: &TailFitConfig) -> Result<TailEstimate> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { got: n, need: MIN_SAMPLES });
    }
    let sorted = positive_sorted_desc(samples)?;
    let (beta_hat, c_hat, points) = estimate_sorted(&sorted, config.method)?;

    let ci95 = if config.bootstrap > 0 {
        // a fixed window keeps the replicates comparable
        let method = match config.method {
            TailMethod::LoglogRegression { window: None } => TailMethod::LoglogRegression {
                window: Some(default_window(&sorted)),
            },
            m => m,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut betas = Vec::with_capacity(config.bootstrap);
        let mut buf = vec![0.0; n];
        for _ in 0..config.bootstrap {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            let est = match method {
                TailMethod::Hill { k } => {
                    let k = hill_k(k, n)?;
                    buf.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
                    buf[..k].sort_by(|a, b| b.total_cmp(a));
                    hill_top(&buf, k, n).map(|r| r.0)
                }
                m => {
                    buf.sort_by(|a, b| b.total_cmp(a));
                    estimate_sorted(&buf, m).map(|r| r.0)
                }
            };
            if let Ok(b) = est {
                betas.push(b);
            }
        }
        if betas.len() < config.bootstrap / 2 {
            None
        } else {
            betas.sort_by(f64::total_cmp);
            let q = |p: f64| betas[((p * (betas.len() - 1) as f64).round()) as usize];
            Some((q(0.025), q(0.975)))
        }
    } else {
        None
    };

    Ok(TailEstimate {
        beta_hat,
        c_hat,
        ci95,
        n_samples: n,
        method: config.method,
        points,
    })
}

/// Tail index of `|x|` together with the balance `(n+ - n-) / k` of signs
/// among the `k` largest magnitudes, which estimates the skewness of a
/// stable limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableIndexEstimate {
    pub alpha_hat: f64,
    pub skew: f64,
    pub k: usize,
}

pub fn stable_index(samples: &[f64], k: Option<usize>) -> Result<StableIndexEstimate> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { got: n, need: MIN_SAMPLES });
    }
    let mut x = positive_sorted_desc(samples)?;
    x.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let k = hill_k(k, n)?;
    let pos = x[..k].iter().filter(|v| **v > 0.0).count() as f64;
    let abs: Vec<f64> = x[..=k].iter().map(|v| v.abs()).collect();
    let (alpha_hat, _) = hill_top(&abs, k, n)?;
    Ok(StableIndexEstimate {
        alpha_hat,
        skew: (2.0 * pos - k as f64) / k as f64,
        k,
    })
}
