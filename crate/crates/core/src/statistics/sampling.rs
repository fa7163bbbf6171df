//! Area-uniform entries on the strip `(0, xi_max] x [eta0, eta1]` and the
//! return times they produce.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dulac_analysis::coefficients;
use crate::error::{Error, Result};
use crate::flow_integrator::{IntegratorSettings, SectionConfig, Weight};
use crate::observable_integrals::weighted_passage;
use crate::saddle_model::Saddle;

/// Budget multiplier for the single retry of a censored passage.
pub const RETRY_FACTOR: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub xi: f64,
    pub eta: f64,
}

pub(crate) fn check_strip(sections: &SectionConfig, xi_max: f64) -> Result<()> {
    sections.validate()?;
    if !(xi_max > 0.0 && xi_max < sections.zeta0) {
        return Err(Error::InvalidArgument(format!(
            "xi_max = {xi_max} must lie in (0, zeta0 = {})",
            sections.zeta0
        )));
    }
    Ok(())
}

/// Draw one entry from `rng`; consumes exactly two uniforms.
#[inline]
pub(crate) fn draw_entry<R: Rng>(rng: &mut R, xi_max: f64, eta_range: (f64, f64)) -> Entry {
    let u: f64 = rng.random();
    let w: f64 = rng.random();
    Entry {
        xi: xi_max * (1.0 - u),
        eta: eta_range.0 + (eta_range.1 - eta_range.0) * w,
    }
}

/// `n` entries uniform with respect to area on the strip.
pub fn sample_entry(sections: &SectionConfig, xi_max: f64, n: usize, seed: u64) -> Result<Vec<Entry>> {
    check_strip(sections, xi_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| draw_entry(&mut rng, xi_max, sections.eta_range)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub xi: f64,
    pub eta: f64,
    /// Return time `T + c_bdry`.
    pub tau: f64,
    /// Observable over the excursion, `Theta + c_bdry`.
    pub vbar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnConfig {
    /// Exponent of the observable `r^rho`; `None` records `vbar = tau`.
    pub rho: Option<f64>,
    /// Time spent outside the saddle chart per excursion.
    pub c_bdry: f64,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        ReturnConfig { rho: None, c_bdry: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSampleSet {
    pub samples: Vec<ReturnSample>,
    /// Passages that ran out of steps even after the retry.
    pub censored: usize,
    /// Passages that needed the retry.
    pub retried: usize,
}

impl TauSampleSet {
    pub fn taus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }
}

enum Outcome {
    Done(ReturnSample, bool),
    Censored,
}

/// Return times of the given entries, one passage each.
pub fn tau_samples(
    saddle: &Saddle,
    sections: &SectionConfig,
    entries: &[Entry],
    config: &ReturnConfig,
    settings: &IntegratorSettings,
) -> Result<TauSampleSet> {
    sections.validate()?;
    settings.validate()?;
    if !(config.c_bdry >= 0.0 && config.c_bdry.is_finite()) {
        return Err(Error::InvalidArgument(format!("c_bdry = {} must be non-negative", config.c_bdry)));
    }
    let rho = config.rho.unwrap_or(0.0);
    if !(rho > -2.0) {
        return Err(Error::NonIntegrable(format!("rho = {rho}")));
    }
    let weight = Weight::RadiusPower(rho);
    let run = |e: &Entry, s: &IntegratorSettings| weighted_passage(saddle, &sections.with_eta(e.eta), e.xi, weight, s, false);

    let outcomes: Vec<Outcome> = entries
        .par_iter()
        .map(|e| {
            let (res, retried) = match run(e, settings) {
                Err(Error::MaxStepsExceeded { .. }) => {
                    let bigger = IntegratorSettings {
                        max_steps: settings.max_steps.saturating_mul(RETRY_FACTOR),
                        ..settings.clone()
                    };
                    (run(e, &bigger), true)
                }
                r => (r, false),
            };
            match res {
                Ok((rec, theta)) => {
                    let tau = rec.time + config.c_bdry;
                    let vbar = if config.rho.is_some() { theta + config.c_bdry } else { tau };
                    Ok(Outcome::Done(ReturnSample { xi: e.xi, eta: e.eta, tau, vbar }, retried))
                }
                Err(Error::MaxStepsExceeded { .. }) => Ok(Outcome::Censored),
                Err(err) => Err(err),
            }
        })
        .collect::<Result<_>>()?;

    let mut set = TauSampleSet {
        samples: Vec::with_capacity(outcomes.len()),
        censored: 0,
        retried: 0,
    };
    for o in outcomes {
        match o {
            Outcome::Done(s, r) => {
                set.retried += r as usize;
                set.samples.push(s);
            }
            Outcome::Censored => {
                set.censored += 1;
                set.retried += 1;
            }
        }
    }
    Ok(set)
}

/// Constant `C*` of `P(tau > t) ~ C* t^(-beta2)` for area-uniform entries:
/// the strip average of `xi0(eta)`.
pub fn expected_tail_constant(saddle: &Saddle, sections: &SectionConfig, xi_max: f64) -> Result<f64> {
    check_strip(sections, xi_max)?;
    let exps = saddle.exponents();
    let base = coefficients(exps, 1.0, sections.zeta0)?.xi0;
    // xi0(eta) = xi0(1) eta^(-a2/b2)
    let p = exps.a2_over_b2();
    let (e0, e1) = sections.eta_range;
    if e1 == e0 {
        return Ok(base * e0.powf(-p) / xi_max);
    }
    let integral = if (p - 1.0).abs() < 1e-12 {
        (e1 / e0).ln()
    } else {
        (e1.powf(1.0 - p) - e0.powf(1.0 - p)) / (1.0 - p)
    };
    Ok(base * integral / (xi_max * (e1 - e0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::ks::ks_test;

    #[test]
    fn entries_are_uniform_and_reproducible() {
        let sec = SectionConfig::default();
        let a = sample_entry(&sec, 1e-3, 20_000, 11).unwrap();
        let b = sample_entry(&sec, 1e-3, 20_000, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|e| e.xi > 0.0 && e.xi <= 1e-3 && (1.0..=1.4).contains(&e.eta)));
        let xs: Vec<f64> = a.iter().map(|e| e.xi / 1e-3).collect();
        let ys: Vec<f64> = a.iter().map(|e| (e.eta - 1.0) / 0.4).collect();
        assert!(ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 1e-3);
        assert!(ks_test(&ys, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 1e-3);
        assert!(sample_entry(&sec, 2.0, 1, 0).is_err());
    }

    #[test]
    fn tail_constant_for_reduced_family() {
        let s = Saddle::reduced(0.0).unwrap();
        let sec = SectionConfig::default();
        // a2/b2 = 3 for gamma = 0
        let c = expected_tail_constant(&s, &sec, 1e-3).unwrap();
        let xi0 = coefficients(s.exponents(), 1.0, 1.0).unwrap().xi0;
        let exact = xi0 * 0.5 * (1.0 - 1.4f64.powi(-2)) / (1e-3 * 0.4);
        assert!((c - exact).abs() < 1e-9 * c);
        assert!((c - 526.3).abs() < 0.5, "{c}");
    }

    #[test]
    fn censoring_is_counted() {
        let s = Saddle::reduced(0.0).unwrap();
        let sec = SectionConfig::default();
        let entries = [Entry { xi: 1e-3, eta: 1.2 }, Entry { xi: 1e-14, eta: 1.2 }];
        let tight = IntegratorSettings {
            max_steps: 30,
            ..Default::default()
        };
        let set = tau_samples(&s, &sec, &entries, &ReturnConfig::default(), &tight).unwrap();
        assert_eq!(set.censored + set.samples.len(), 2);
        assert!(set.censored >= 1);
        let full = tau_samples(&s, &sec, &entries, &ReturnConfig::default(), &IntegratorSettings::default()).unwrap();
        assert_eq!(full.censored, 0);
        assert!(full.samples[1].tau > full.samples[0].tau);
    }
}
