//! Time integrals `Theta = \int r^rho dt` of homogeneous observables along
//! saddle passages.
//!
//! Depending on `rho` the integral grows like `T^(1 - rho/2)` (`rho < 2`),
//! like `log T` (`rho = 2`) or stays bounded (`rho > 2`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dulac_analysis::{asymptotic_omega, asymptotic_xi, AsymptoticCoeffs};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, loglog_fit};
use crate::flow_integrator::{
    invert_dulac_time, relative_drift, run_planar, DulacRecord, IntegratorSettings, SectionConfig, Stop, Weight,
};
use crate::quadrature::integrate_power_law;
use crate::saddle_model::{Exponents, Saddle};

const QUAD_TOL: f64 = 1e-12;
const RHO_MAX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMethod {
    TrajectoryQuadrature,
    MSubstitution,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageIntegral {
    pub rho: f64,
    #[serde(rename = "T")]
    pub time: f64,
    pub theta: f64,
    pub method: ThetaMethod,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > -2.0) {
        return Err(Error::NonIntegrable(format!("rho = {rho}: r^rho is not integrable along a passage")));
    }
    if !(rho <= RHO_MAX) {
        return Err(Error::InvalidArgument(format!("rho = {rho} above {RHO_MAX}")));
    }
    Ok(())
}

/// Passage from `(xi, eta)` together with `\int w dt` along it.
pub fn weighted_passage(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    weight: Weight<'_>,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<(DulacRecord, f64)> {
    sections.validate()?;
    settings.validate()?;
    if !(xi > 0.0 && xi < sections.zeta0) {
        return Err(Error::InvalidArgument(format!("entry xi = {xi} outside (0, zeta0)")));
    }
    let y0 = [xi.ln(), sections.eta.ln(), 0.0];
    let r = run_planar::<3, _>(saddle, sections, y0, settings, perturbed, weight, 1.0, Stop::Exit, None, |_, _, _| {})?;
    let rec = DulacRecord {
        eta: sections.eta,
        xi,
        omega: r.y[1].exp(),
        time: r.t,
        l_drift: relative_drift(saddle, (y0[0], y0[1]), (r.y[0], r.y[1])),
        steps: r.steps,
        arc_length: r.arc_length,
    };
    Ok((rec, r.y[2]))
}

/// `Theta` for the passage starting at `(xi, eta)`.
pub fn theta_from_entry(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    rho: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<(DulacRecord, f64)> {
    check_rho(rho)?;
    weighted_passage(saddle, sections, xi, Weight::RadiusPower(rho), settings, perturbed)
}

/// `Theta` along the measured passage of duration `t`.
pub fn theta_trajectory(
    saddle: &Saddle,
    sections: &SectionConfig,
    t: f64,
    rho: f64,
    settings: &IntegratorSettings,
) -> Result<PassageIntegral> {
    check_rho(rho)?;
    if !(t >= 10.0) {
        return Err(Error::InvalidArgument(format!("passage time {t} below 10")));
    }
    let xi = invert_dulac_time(saddle, sections, t, settings, false)?;
    let (rec, theta) = theta_from_entry(saddle, sections, xi, rho, settings, false)?;
    Ok(PassageIntegral {
        rho,
        time: rec.time,
        theta,
        method: ThetaMethod::TrajectoryQuadrature,
    })
}

/// Endpoint exponents of the `M`-form integrand, at `0` and at infinity.
pub fn theta_m_exponents(exps: &Exponents, rho: f64) -> (f64, f64) {
    let s = 1.0 - 0.5 * rho;
    (s / exps.beta0 - 1.0, -s / exps.beta2 - 1.0)
}

fn theta_integrand(exps: &Exponents, rho: f64, m: f64) -> f64 {
    let (p0, _) = theta_m_exponents(exps, rho);
    let lm = m.ln();
    let ln_1m2 = if m > 1.0 { 2.0 * lm + (1.0 / (m * m)).ln_1p() } else { (m * m).ln_1p() };
    (p0 * lm - (exps.e() + 0.5 * exps.kappa * rho) * exps.ln_q(m) + 0.5 * rho * ln_1m2).exp()
}

/// `Theta` from the closed `M`-substitution with explicit endpoints:
/// `G^(rho/2 - 1) \int_{omega/zeta0}^{eta/xi} M^((1-rho/2)/beta0 - 1) Q^(-e - kappa rho/2) (1+M^2)^(rho/2) dM`.
pub fn theta_m_endpoints(exps: &Exponents, xi: f64, omega: f64, eta: f64, zeta0: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(xi > 0.0 && omega > 0.0) {
        return Err(Error::NonPositivePoint { x: xi, y: omega });
    }
    let (p0, pinf) = theta_m_exponents(exps, rho);
    let lower = omega / zeta0;
    let upper = eta / xi;
    let integral = integrate_power_law(|m| theta_integrand(exps, rho, m), p0, pinf, lower, upper, QUAD_TOL)?;
    let ln_g = crate::flow_integrator::ln_g(exps, xi, eta);
    Ok(((0.5 * rho - 1.0) * ln_g).exp() * integral)
}

/// `Theta` from the `M`-substitution with the two-term asymptotic endpoints
/// `xi(T)` and `omega(T)`.
pub fn theta_m_form(exps: &Exponents, coeffs: &AsymptoticCoeffs, eta: f64, zeta0: f64, t: f64, rho: f64) -> Result<f64> {
    let xi = asymptotic_xi(coeffs, t)?;
    let omega = asymptotic_omega(coeffs, t)?;
    theta_m_endpoints(exps, xi, omega, eta, zeta0, rho)
}

/// Slope of `Theta` against `ln T` in the logarithmic case `rho = 2`.
pub fn log_slope_prediction(exps: &Exponents) -> f64 {
    exps.beta0 / exps.c0 + exps.beta2 / exps.c2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthRegime {
    Power,
    Logarithmic,
    Bounded,
}

impl GrowthRegime {
    pub fn for_rho(rho: f64) -> Self {
        if (rho - 2.0).abs() < 1e-12 {
            GrowthRegime::Logarithmic
        } else if rho < 2.0 {
            GrowthRegime::Power
        } else {
            GrowthRegime::Bounded
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub rho: f64,
    pub regime: GrowthRegime,
    /// Slope of `ln Theta` against `ln T`.
    pub exponent: f64,
    /// Slope of `Theta` against `ln T`.
    pub log_slope: f64,
    /// `R^2` of the fit matching the regime.
    pub r2: f64,
    pub t_grid: Vec<f64>,
    pub thetas: Vec<f64>,
}

/// Measure `Theta` on a grid of passage times and fit its growth.
pub fn scaling_fit(
    saddle: &Saddle,
    sections: &SectionConfig,
    rho: f64,
    t_grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<ScalingFit> {
    check_rho(rho)?;
    let (lo, hi) = match (t_grid.first(), t_grid.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::TooFewSamples { got: 0, need: 3 }),
    };
    if t_grid.len() < 3 || hi / lo < 99.999 {
        return Err(Error::InvalidArgument("passage-time grid must span two decades".into()));
    }
    let thetas: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| Ok(theta_trajectory(saddle, sections, t, rho, settings)?.theta))
        .collect::<Result<_>>()?;
    let power = loglog_fit(t_grid, &thetas)?;
    let ln_t: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let log = linear_fit(&ln_t, &thetas)?;
    let regime = GrowthRegime::for_rho(rho);
    Ok(ScalingFit {
        rho,
        regime,
        exponent: power.slope,
        log_slope: log.slope,
        r2: if regime == GrowthRegime::Logarithmic { log.r2 } else { power.r2 },
        t_grid: t_grid.to_vec(),
        thetas,
    })
}
