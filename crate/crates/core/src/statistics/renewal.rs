//! Renewal surrogate for the first-return dynamics and Birkhoff sums of
//! `r^rho` observables.
//!
//! Entries are area-uniform on the strip, each excursion lasts
//! `tau = T + c_bdry` and contributes `vbar = Theta + c_bdry + U + g` with
//! `U ~ U(-a, a)` and the constant `g = -E[Theta + c_bdry]`, so `E[vbar] = 0`.
//! `T` and `Theta` come from a table of integrated passages over
//! `(ln xi, eta)`, which makes millions of excursions per path affordable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_integrator::{IntegratorSettings, SectionConfig};
use crate::observable_integrals::theta_from_entry;
use crate::saddle_model::Saddle;
use crate::statistics::ks::{ks_normal, KsResult};
use crate::statistics::sampling::{check_strip, draw_entry};
use crate::statistics::tail::stable_index;

const NODES_PER_DECADE: f64 = 8.0;
const DECADES: f64 = 13.0;
const ETA_NODES: usize = 17;
const REFINE: usize = 4;

/// Cubic Lagrange stencil on a uniform grid: first index and weights.
fn stencil(pos: f64, n: usize) -> (usize, [f64; 4], usize) {
    if n == 1 {
        return (0, [1.0, 0.0, 0.0, 0.0], 1);
    }
    let base = (pos.floor() as isize).clamp(1, n as isize - 3) as usize;
    let f = pos - base as f64;
    let w = [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ];
    (base - 1, w, 4)
}

/// Tabulated `ln T` and `ln Theta` over the entry strip.
#[derive(Clone, Debug)]
pub struct ReturnTable {
    rho: f64,
    xi_max: f64,
    s_top: f64,
    ds: f64,
    n_s: usize,
    eta_range: (f64, f64),
    n_eta: usize,
    lambda_t: f64,
    lambda_theta: f64,
    ln_t: Vec<f64>,
    ln_theta: Option<Vec<f64>>,
}

impl ReturnTable {
    /// Integrate the passages on the grid nodes.
    pub fn build(
        saddle: &Saddle,
        sections: &SectionConfig,
        xi_max: f64,
        rho: f64,
        settings: &IntegratorSettings,
    ) -> Result<Self> {
        check_strip(sections, xi_max)?;
        if !(rho > -2.0 && rho < 2.0) {
            return Err(Error::InvalidArgument(format!("rho = {rho} outside (-2, 2)")));
        }
        let exps = saddle.exponents();
        let ds = std::f64::consts::LN_10 / NODES_PER_DECADE;
        let n_s = (DECADES * NODES_PER_DECADE).round() as usize + 1;
        let eta_range = sections.eta_range;
        let n_eta = if eta_range.1 > eta_range.0 { ETA_NODES } else { 1 };
        let s_top = xi_max.ln();
        let table = ReturnTable {
            rho,
            xi_max,
            s_top,
            ds,
            n_s,
            eta_range,
            n_eta,
            lambda_t: 1.0 / exps.beta2,
            lambda_theta: (1.0 - 0.5 * rho) / exps.beta2,
            ln_t: Vec::new(),
            ln_theta: None,
        };
        let nodes: Vec<(f64, f64)> = (0..n_eta)
            .flat_map(|j| (0..n_s).map(move |i| (j, i)))
            .map(|(j, i)| (table.eta_node(j), (s_top - i as f64 * ds).exp()))
            .collect();
        let values: Vec<(f64, f64)> = nodes
            .par_iter()
            .map(|&(eta, xi)| {
                let (rec, theta) = theta_from_entry(saddle, &sections.with_eta(eta), xi, rho, settings, false)?;
                Ok((rec.time.ln(), theta.ln()))
            })
            .collect::<Result<_>>()?;
        let ln_t = values.iter().map(|v| v.0).collect();
        let ln_theta = (rho != 0.0).then(|| values.iter().map(|v| v.1).collect());
        Ok(ReturnTable { ln_t, ln_theta, ..table })
    }

    fn eta_node(&self, j: usize) -> f64 {
        if self.n_eta == 1 {
            return self.eta_range.0;
        }
        self.eta_range.0 + (self.eta_range.1 - self.eta_range.0) * j as f64 / (self.n_eta - 1) as f64
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    /// Smallest tabulated entry; below it the leading power law is used.
    pub fn xi_floor(&self) -> f64 {
        (self.s_top - (self.n_s - 1) as f64 * self.ds).exp()
    }

    /// `(T, Theta)` for the passage from `(xi, eta)`.
    #[inline]
    pub fn eval(&self, xi: f64, eta: f64) -> (f64, f64) {
        let s = xi.ln();
        let last = (self.n_s - 1) as f64;
        let pos = (self.s_top - s) / self.ds;
        let (pos_s, excess) = if pos > last { (last, (pos - last) * self.ds) } else { (pos.max(0.0), 0.0) };
        let pos_e = if self.n_eta == 1 {
            0.0
        } else {
            ((eta - self.eta_range.0) / (self.eta_range.1 - self.eta_range.0) * (self.n_eta - 1) as f64)
                .clamp(0.0, (self.n_eta - 1) as f64)
        };
        let (bs, ws, _) = stencil(pos_s, self.n_s);
        let (be, we, ne) = stencil(pos_e, self.n_eta);
        let interp = |data: &[f64]| {
            let mut acc = 0.0;
            for (j, wj) in we.iter().enumerate().take(ne) {
                let row = &data[(be + j) * self.n_s + bs..];
                acc += wj * (ws[0] * row[0] + ws[1] * row[1] + ws[2] * row[2] + ws[3] * row[3]);
            }
            acc
        };
        let ln_t = interp(&self.ln_t) + excess * self.lambda_t;
        let ln_theta = match &self.ln_theta {
            Some(d) => interp(d) + excess * self.lambda_theta,
            None => ln_t,
        };
        (ln_t.exp(), ln_theta.exp())
    }

    /// Strip average of `f(T, Theta)` for a function growing like
    /// `xi^(-lambda)` as `xi -> 0`.
    pub fn strip_average<F: Fn(f64, f64) -> f64>(&self, f: F, lambda: f64) -> Result<f64> {
        if !(lambda < 1.0) {
            return Err(Error::InfiniteMeanConfig { rho: self.rho });
        }
        let k = REFINE * (self.n_s - 1);
        let h = self.ds / REFINE as f64;
        let row_integral = |eta: f64| {
            let mut acc = 0.0;
            for i in 0..=k {
                let s = self.s_top - i as f64 * h;
                let (t, th) = self.eval(s.exp(), eta);
                let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(t, th) * s.exp();
            }
            let xb = self.xi_floor();
            let (tb, thb) = self.eval(xb, eta);
            acc * h / 3.0 + f(tb, thb) * xb / (1.0 - lambda)
        };
        let width = self.eta_range.1 - self.eta_range.0;
        if self.n_eta == 1 {
            return Ok(row_integral(self.eta_range.0) / self.xi_max);
        }
        let m = self.n_eta - 1;
        let he = width / m as f64;
        let mut acc = 0.0;
        for j in 0..=m {
            let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * row_integral(self.eta_node(j));
        }
        Ok(acc * he / 3.0 / (self.xi_max * width))
    }

    /// Tail index of `Theta` under area-uniform entries.
    pub fn theta_tail_index(&self) -> f64 {
        1.0 / self.lambda_theta
    }

    /// Constant `C` of `P(Theta > y) ~ C y^(-alpha)`, from the leading power
    /// law below the table.
    pub fn theta_tail_constant(&self) -> f64 {
        let alpha = self.theta_tail_index();
        let xb = self.xi_floor();
        self.strip_eta_average(|eta| {
            let (_, th) = self.eval(xb, eta);
            // Theta ~ A xi^(-lambda): P(Theta > y) = A^alpha y^-alpha / xi_max
            (th * xb.powf(self.lambda_theta)).powf(alpha) / self.xi_max
        })
    }

    fn strip_eta_average<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        if self.n_eta == 1 {
            return f(self.eta_range.0);
        }
        let m = self.n_eta - 1;
        let mut acc = 0.0;
        for j in 0..=m {
            let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(self.eta_node(j));
        }
        acc / (3.0 * m as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRegime {
    /// Finite variance, `sqrt(t)` scaling.
    GaussianClt,
    /// Borderline tail index 2, `sqrt(t log t)` scaling.
    NonstandardClt,
    /// Tail index in `(1, 2)`, `t^(1/alpha)` scaling.
    Stable,
}

impl LimitRegime {
    /// Regime for an observable whose excursion integrals have tail index
    /// `alpha`. For the reduced family `alpha = 4 / (2 - rho)`.
    pub fn for_index(alpha: f64) -> Self {
        if (alpha - 2.0).abs() < 1e-9 {
            LimitRegime::NonstandardClt
        } else if alpha > 2.0 {
            LimitRegime::GaussianClt
        } else {
            LimitRegime::Stable
        }
    }
}

pub const MODEL_LABEL: &str = "renewal surrogate";
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirkhoffConfig {
    /// Member of the reduced family used by [`birkhoff_experiment`].
    pub gamma: f64,
    pub rho: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub xi_max: f64,
    pub c_bdry: f64,
    /// Half-width of the uniform nuisance added to each excursion.
    pub nuisance: f64,
    /// Draws of `vbar` used for the tail index in the stable regime.
    pub index_samples: usize,
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        BirkhoffConfig {
            gamma: 0.0,
            rho: 0.5,
            horizon: 1e5,
            n_paths: 10_000,
            seed: 0,
            xi_max: 1e-3,
            c_bdry: 1.0,
            nuisance: 1.0,
            index_samples: 1_000_000,
        }
    }
}

impl BirkhoffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > -2.0) {
            return Err(Error::InfiniteMeanConfig { rho: self.rho });
        }
        if !(self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho = {} outside (-2, 1)", self.rho)));
        }
        if !(self.gamma.abs() < 4.0) {
            return Err(Error::GammaOutOfRange(self.gamma));
        }
        if !(self.horizon > 1.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon {} must exceed 1", self.horizon)));
        }
        if self.n_paths < 2 {
            return Err(Error::TooFewSamples { got: self.n_paths, need: 2 });
        }
        if !(self.c_bdry >= 0.0 && self.nuisance >= 0.0) {
            return Err(Error::InvalidArgument("c_bdry and nuisance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawReport {
    pub model: String,
    pub rng: String,
    pub rho: f64,
    pub regime: LimitRegime,
    /// Tail index of `Theta`; absent when it is infinite.
    pub expected_index: Option<f64>,
    pub scaling_used: String,
    pub normalization: f64,
    pub stable_index_hat: Option<f64>,
    pub stable_skew: Option<f64>,
    pub ks_statistic: f64,
    pub p_value: f64,
    /// `theoretical` or `fitted` variance of the reference normal law.
    pub ks_reference: String,
    pub n_paths: usize,
    pub horizon_t: f64,
    pub seed: u64,
    pub mean_return_time: f64,
    pub mean_rate: f64,
    pub normalized_mean: f64,
    pub normalized_variance: f64,
    pub theoretical_variance: Option<f64>,
}

struct Moments {
    mu: f64,
    g: f64,
    rate: f64,
    var_vbar: Option<f64>,
}

fn moments(table: &ReturnTable, cfg: &BirkhoffConfig) -> Result<Moments> {
    let et = table.strip_average(|t, _| t, table.lambda_t)?;
    let eth = table.strip_average(|_, th| th, table.lambda_theta)?;
    let mu = et + cfg.c_bdry;
    let g = -(eth + cfg.c_bdry);
    let var_vbar = table
        .strip_average(|_, th| th * th, 2.0 * table.lambda_theta)
        .ok()
        .map(|m2| m2 - eth * eth + cfg.nuisance * cfg.nuisance / 3.0);
    // E[vbar] vanishes up to quadrature error
    Ok(Moments { mu, g, rate: 0.0, var_vbar })
}

fn normalization(regime: LimitRegime, alpha: f64, t: f64) -> (f64, String) {
    match regime {
        LimitRegime::GaussianClt => (t.sqrt(), "sqrt(t)".into()),
        LimitRegime::NonstandardClt => ((t * t.ln()).sqrt(), "sqrt(t log t)".into()),
        LimitRegime::Stable => (t.powf(1.0 / alpha), format!("t^{:.6}", 1.0 / alpha)),
    }
}

fn simulate_path(table: &ReturnTable, cfg: &BirkhoffConfig, m: &Moments, path: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let t_end = cfg.horizon;
    let (mut elapsed, mut sum) = (0.0, 0.0);
    loop {
        let e = draw_entry(&mut rng, table.xi_max, table.eta_range);
        let u: f64 = rng.random();
        let (t, th) = table.eval(e.xi, e.eta);
        let tau = t + cfg.c_bdry;
        let vbar = th + cfg.c_bdry + cfg.nuisance * (2.0 * u - 1.0) + m.g;
        if elapsed + tau >= t_end {
            // the excursion in progress counts pro rata
            sum += (t_end - elapsed) / tau * vbar;
            break;
        }
        elapsed += tau;
        sum += vbar;
    }
    sum - t_end * m.rate
}

/// Centered Birkhoff sums `S_t` of all paths, unnormalized.
pub fn birkhoff_sums(table: &ReturnTable, cfg: &BirkhoffConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let m = moments(table, cfg)?;
    Ok((0..cfg.n_paths as u64).into_par_iter().map(|p| simulate_path(table, cfg, &m, p)).collect())
}

/// Run the experiment on a prebuilt table; returns the report and the
/// normalized sums.
pub fn birkhoff_with_table(table: &ReturnTable, cfg: &BirkhoffConfig) -> Result<(LimitLawReport, Vec<f64>)> {
    cfg.validate()?;
    if (table.rho - cfg.rho).abs() > 0.0 || table.xi_max != cfg.xi_max {
        return Err(Error::InvalidArgument("table built for a different rho or strip".into()));
    }
    let m = moments(table, cfg)?;
    let alpha = table.theta_tail_index();
    let regime = LimitRegime::for_index(alpha);
    let (norm, scaling_used) = normalization(regime, alpha, cfg.horizon);
    let normalized: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(table, cfg, &m, p) / norm)
        .collect();

    let n = normalized.len() as f64;
    let mean = normalized.iter().sum::<f64>() / n;
    let var = normalized.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let theoretical_variance = match regime {
        LimitRegime::GaussianClt => m.var_vbar.map(|v| v / m.mu),
        LimitRegime::NonstandardClt => Some(table.theta_tail_constant() / m.mu),
        LimitRegime::Stable => None,
    };
    let (ks, ks_reference): (KsResult, &str) = match (regime, theoretical_variance) {
        (LimitRegime::GaussianClt, Some(v)) => (ks_normal(&normalized, 0.0, v.sqrt())?, "theoretical"),
        _ => (ks_normal(&normalized, mean, var.sqrt())?, "fitted"),
    };

    let (stable_index_hat, stable_skew) = if regime == LimitRegime::Stable {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let draws: Vec<f64> = (0..cfg.index_samples)
            .map(|_| {
                let e = draw_entry(&mut rng, table.xi_max, table.eta_range);
                let u: f64 = rng.random();
                table.eval(e.xi, e.eta).1 + cfg.c_bdry + cfg.nuisance * (2.0 * u - 1.0)
            })
            .collect();
        let est = stable_index(&draws, None)?;
        (Some(est.alpha_hat), Some(est.skew))
    } else {
        (None, None)
    };

    let report = LimitLawReport {
        model: MODEL_LABEL.into(),
        rng: RNG_NAME.into(),
        rho: cfg.rho,
        regime,
        expected_index: alpha.is_finite().then_some(alpha),
        scaling_used,
        normalization: norm,
        stable_index_hat,
        stable_skew,
        ks_statistic: ks.statistic,
        p_value: ks.p_value,
        ks_reference: ks_reference.into(),
        n_paths: cfg.n_paths,
        horizon_t: cfg.horizon,
        seed: cfg.seed,
        mean_return_time: m.mu,
        mean_rate: m.rate,
        normalized_mean: mean,
        normalized_variance: var,
        theoretical_variance,
    };
    Ok((report, normalized))
}

/// Build the table for the reduced family member `cfg.gamma` and run the
/// experiment.
pub fn birkhoff_experiment(
    cfg: &BirkhoffConfig,
    sections: &SectionConfig,
    settings: &IntegratorSettings,
) -> Result<(LimitLawReport, Vec<f64>)> {
    cfg.validate()?;
    let saddle = Saddle::reduced(cfg.gamma)?;
    let table = ReturnTable::build(&saddle, sections, cfg.xi_max, cfg.rho, settings)?;
    birkhoff_with_table(&table, cfg)
}
