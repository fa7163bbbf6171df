//! Closed-form asymptotics of the Dulac time and map, and their comparison
//! with measured passages.
//!
//! Along a level set of the first integral the ratio `M = y / x` obeys
//! `M' = -G M^(1 - 1/beta0) Q(M)^e` with `Q(M) = c0 + c1 M + c2 M^2` and
//! `e = 1/(2 beta0) + 1/(2 beta2)`, so the passage time is an explicit
//! integral in `M` divided by `G(xi, eta)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, loglog_fit};
use crate::flow_integrator::{self, invert_dulac_time, passage, IntegratorSettings, SectionConfig};
use crate::quadrature::integrate_power_law;
use crate::saddle_model::{Exponents, Saddle};

const QUAD_TOL: f64 = 1e-12;

/// Which of the two `M`-integrals: the one defining `xi0`, or its mirror
/// image defining `omega0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Xi,
    Omega,
}

fn check_exponents(exps: &Exponents) -> Result<()> {
    let fine = |v: f64| v.is_finite() && v > 0.5;
    if !fine(exps.beta0) || !fine(exps.beta2) {
        return Err(Error::NonIntegrable(format!(
            "beta0 = {}, beta2 = {} do not give integrable endpoints",
            exps.beta0, exps.beta2
        )));
    }
    Ok(())
}

/// Endpoint exponents `(p0, pinf)` of the integrand.
pub fn m_exponents(exps: &Exponents, variant: Variant) -> (f64, f64) {
    let b = match variant {
        Variant::Xi => exps.beta0,
        Variant::Omega => exps.beta2,
    };
    let p0 = 1.0 / b - 1.0;
    (p0, p0 - 2.0 * exps.e())
}

/// Integrand of [`m_integral`] at `m > 0`.
pub fn m_integrand(exps: &Exponents, variant: Variant, m: f64) -> f64 {
    let (p0, _) = m_exponents(exps, variant);
    let ln_q = match variant {
        Variant::Xi => exps.ln_q(m),
        // c0 M^2 + c1 M + c2 = M^2 Q(1/M)
        Variant::Omega => 2.0 * m.ln() + exps.ln_q(1.0 / m),
    };
    (p0 * m.ln() - exps.e() * ln_q).exp()
}

/// `\int_lower^upper M^(1/beta0 - 1) Q(M)^(-e) dM`, or the omega variant
/// `\int M^(1/beta2 - 1) (c0 M^2 + c1 M + c2)^(-e) dM`.
pub fn m_integral(exps: &Exponents, lower: f64, upper: f64, variant: Variant) -> Result<f64> {
    check_exponents(exps)?;
    let (p0, pinf) = m_exponents(exps, variant);
    integrate_power_law(|m| m_integrand(exps, variant, m), p0, pinf, lower, upper, QUAD_TOL)
}

/// `G(xi, eta) = xi^(1/beta2) eta^(1/beta0) (c0 xi^2 + c1 xi eta + c2 eta^2)^kappa`.
pub fn g_eval(exps: &Exponents, xi: f64, eta: f64) -> f64 {
    flow_integrator::ln_g(exps, xi, eta).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoeffs {
    pub xi0: f64,
    pub xi1: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub eta: f64,
    pub zeta0: f64,
    pub beta0: f64,
    pub beta2: f64,
}

/// Coefficients of `xi(eta, T) = xi0 T^-beta2 (1 - xi1/T + ...)` and
/// `omega(eta, T) = omega0 T^-beta0 (1 - omega1/T + ...)`.
pub fn coefficients(exps: &Exponents, eta: f64, zeta0: f64) -> Result<AsymptoticCoeffs> {
    if !(eta > 0.0 && zeta0 > 0.0) {
        return Err(Error::NonPositivePoint { x: zeta0, y: eta });
    }
    let ix = m_integral(exps, 0.0, f64::INFINITY, Variant::Xi)?;
    let iw = m_integral(exps, 0.0, f64::INFINITY, Variant::Omega)?;
    let (b0, b2) = (exps.beta0, exps.beta2);
    let xi0 = exps.c2.powf(-1.0 / exps.u) * eta.powf(-exps.a2_over_b2()) * ix.powf(b2);
    let omega0 = exps.c0.powf(-1.0 / exps.v) * zeta0.powf(-exps.b0_over_a0()) * iw.powf(b0);
    // (1/2)(1/(a0 zeta0^2) + 1/(b2 eta^2)) with a0 = c0/(2 beta0), b2 = c2/(2 beta2)
    let s = b0 / (exps.c0 * zeta0 * zeta0) + b2 / (exps.c2 * eta * eta);
    Ok(AsymptoticCoeffs {
        xi0,
        xi1: b2 * s,
        omega0,
        omega1: b0 * s,
        eta,
        zeta0,
        beta0: b0,
        beta2: b2,
    })
}

/// `omega0` obtained from `xi0` through the limit relation between the two
/// rescaled exit coordinates instead of the second integral.
pub fn omega0_from_xi0(exps: &Exponents, xi0: f64, eta: f64, zeta0: f64) -> f64 {
    xi0.powf(exps.beta0 / exps.beta2)
        * eta.powf(1.0 + 2.0 / exps.v)
        * zeta0.powf(-exps.b0_over_a0())
        * (exps.c2 / exps.c0).powf(1.0 / exps.v)
}

fn two_term(lead: f64, beta: f64, corr: f64, t: f64) -> Result<f64> {
    let t_min = 1f64.max(2.0 * corr);
    if !(t > t_min) {
        return Err(Error::TTooSmall { t, t_min });
    }
    Ok(lead * t.powf(-beta) * (1.0 - corr / t))
}

/// Two-term asymptotic entry abscissa for passage time `t`.
pub fn asymptotic_xi(c: &AsymptoticCoeffs, t: f64) -> Result<f64> {
    two_term(c.xi0, c.beta2, c.xi1, t)
}

/// Two-term asymptotic exit ordinate for passage time `t`.
pub fn asymptotic_omega(c: &AsymptoticCoeffs, t: f64) -> Result<f64> {
    two_term(c.omega0, c.beta0, c.omega1, t)
}

/// Leading term of the Dulac map, `omega0 xi0^(-beta0/beta2) xi^(beta0/beta2)`.
pub fn dulac_map_asymptotic(c: &AsymptoticCoeffs, exps: &Exponents, xi: f64) -> f64 {
    let r = exps.beta0 / exps.beta2;
    c.omega0 * (xi / c.xi0).powf(r)
}

/// Passage times at which the perturbed leading coefficients are sampled.
const CALIBRATION_TIMES: (f64, f64) = (1e6, 1e8);

/// Leading coefficients `(xi0, omega0)` of the perturbed field.
///
/// The remainder rescales the entry and exit coordinates by factors that
/// tend to constants different from one, so the unperturbed `xi0` is not the
/// limit of `T^beta2 xi(T)`. The limit is extrapolated from two long
/// passages assuming corrections of order `T^-beta_star`.
pub fn perturbed_leading_coefficients(
    saddle: &Saddle,
    sections: &SectionConfig,
    settings: &IntegratorSettings,
) -> Result<(f64, f64)> {
    let exps = saddle.exponents();
    let long = IntegratorSettings {
        max_steps: settings.max_steps.saturating_mul(10),
        ..settings.clone()
    };
    let (t1, t2) = CALIBRATION_TIMES;
    let scaled = |t: f64| -> Result<(f64, f64)> {
        let xi = invert_dulac_time(saddle, sections, t, &long, true)?;
        let rec = passage(saddle, sections, xi, &long, true)?;
        Ok((xi * t.powf(exps.beta2), rec.omega * t.powf(exps.beta0)))
    };
    let (x1, w1) = scaled(t1)?;
    let (x2, w2) = scaled(t2)?;
    let q = (t2 / t1).powf(exps.beta_star);
    Ok(((q * x2 - x1) / (q - 1.0), (q * w2 - w1) / (q - 1.0)))
}

fn has_remainder(saddle: &Saddle) -> bool {
    saddle.perturbation().is_some_and(|p| p.bound() > 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub t_grid: Vec<f64>,
    pub xi_measured: Vec<f64>,
    pub xi_asymptotic: Vec<f64>,
    pub omega_measured: Vec<f64>,
    pub omega_asymptotic: Vec<f64>,
    /// `|xi_measured / xi_asymptotic - 1|` against the two-term expansion.
    pub rel_errors: Vec<f64>,
    /// Slope of `ln xi_measured` against `ln T`.
    pub fitted_leading_exponent: f64,
    /// Slope of `ln omega_measured` against `ln T`.
    pub fitted_omega_exponent: f64,
    /// Slope of `ln rel_error` against `ln T`, first grid point dropped.
    pub fitted_error_exponent: f64,
    pub regression_r2: f64,
    pub coefficients: AsymptoticCoeffs,
    pub perturbed: bool,
}

/// Measure `xi(eta, T)` and `omega(eta, T)` on a grid of passage times and
/// compare with the asymptotic expansion.
///
/// For a perturbed field with a nonzero remainder the leading coefficients
/// come from [`perturbed_leading_coefficients`]; the `1/T` corrections are
/// those of the cubic part.
pub fn convergence_study(
    saddle: &Saddle,
    sections: &SectionConfig,
    t_grid: &[f64],
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<ConvergenceReport> {
    if t_grid.len() < 3 {
        return Err(Error::TooFewSamples { got: t_grid.len(), need: 3 });
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("passage-time grid must be strictly ascending".into()));
    }
    let exps = saddle.exponents();
    let mut coeffs = coefficients(exps, sections.eta, sections.zeta0)?;
    if perturbed && has_remainder(saddle) {
        (coeffs.xi0, coeffs.omega0) = perturbed_leading_coefficients(saddle, sections, settings)?;
    }
    if let Some(&t0) = t_grid.first() {
        asymptotic_xi(&coeffs, t0)?;
        asymptotic_omega(&coeffs, t0)?;
    }

    let measured: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let xi = invert_dulac_time(saddle, sections, t, settings, perturbed)?;
            let rec = passage(saddle, sections, xi, settings, perturbed)?;
            Ok((xi, rec.omega))
        })
        .collect::<Result<_>>()?;
    let xi_measured: Vec<f64> = measured.iter().map(|m| m.0).collect();
    let omega_measured: Vec<f64> = measured.iter().map(|m| m.1).collect();
    let xi_asymptotic = t_grid.iter().map(|&t| asymptotic_xi(&coeffs, t)).collect::<Result<Vec<_>>>()?;
    let omega_asymptotic = t_grid.iter().map(|&t| asymptotic_omega(&coeffs, t)).collect::<Result<Vec<_>>>()?;
    let rel_errors: Vec<f64> = xi_measured
        .iter()
        .zip(&xi_asymptotic)
        .map(|(m, a)| (m / a - 1.0).abs())
        .collect();

    let lead = loglog_fit(t_grid, &xi_measured)?;
    let omega_fit = loglog_fit(t_grid, &omega_measured)?;
    let (tx, ty): (Vec<f64>, Vec<f64>) = t_grid[1..]
        .iter()
        .zip(&rel_errors[1..])
        .filter(|(_, e)| **e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .unzip();
    let err_fit = linear_fit(&tx, &ty)?;

    Ok(ConvergenceReport {
        t_grid: t_grid.to_vec(),
        xi_measured,
        xi_asymptotic,
        omega_measured,
        omega_asymptotic,
        rel_errors,
        fitted_leading_exponent: lead.slope,
        fitted_omega_exponent: omega_fit.slope,
        fitted_error_exponent: err_fit.slope,
        regression_r2: err_fit.r2,
        coefficients: coeffs,
        perturbed,
    })
}
