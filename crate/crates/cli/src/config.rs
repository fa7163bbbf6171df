//! Run configuration: one JSON document, overridden by command-line flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, flags,
//! and for the output directory the `NSL_OUT` environment variable.

use std::path::PathBuf;

use nsl_core::flow_integrator::{IntegratorSettings, SectionConfig};
use nsl_core::saddle_model::{Perturbation, Saddle, SaddleParams};
use nsl_core::fit::logspace;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Remainder used by `--perturbed` when the config does not name one.
pub const DEFAULT_QUARTIC_K: f64 = 0.5;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SaddleSpec {
    /// Member of the reduced family `(1, gamma, 3, 3, gamma, 1)`.
    Gamma {
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        perturbation: Option<Perturbation>,
    },
    Params(SaddleParams),
}

impl Default for SaddleSpec {
    fn default() -> Self {
        SaddleSpec::Gamma {
            gamma: 0.0,
            perturbation: None,
        }
    }
}

impl SaddleSpec {
    pub fn params(&self) -> Result<SaddleParams, CliError> {
        Ok(match self {
            SaddleSpec::Gamma { gamma, perturbation } => {
                let mut p = nsl_core::saddle_model::reduced_family(*gamma)?;
                p.perturbation = perturbation.clone();
                p
            }
            SaddleSpec::Params(p) => p.clone(),
        })
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            SaddleSpec::Gamma { gamma, .. } => Some(*gamma),
            SaddleSpec::Params(_) => None,
        }
    }

    /// Validated saddle; with `perturbed` and no remainder configured the
    /// quartic remainder with `K = 0.5` is attached.
    pub fn build(&self, perturbed: bool) -> Result<Saddle, CliError> {
        let mut p = self.params()?;
        if perturbed && p.perturbation.is_none() {
            p.perturbation = Some(Perturbation::Quartic { k: DEFAULT_QUARTIC_K });
        }
        Ok(Saddle::new(p)?)
    }
}

/// Either an explicit list or a log-spaced grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Log { from: f64, to: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Log { from, to, points } => {
                if !(*from > 0.0 && to > from && *points >= 2) {
                    return Err(CliError::config("InvalidGrid", format!("grid {self:?}")));
                }
                Ok(logspace(*from, *to, *points))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DulacBlock {
    pub t_grid: Grid,
}

impl Default for DulacBlock {
    fn default() -> Self {
        DulacBlock {
            t_grid: Grid::Log { from: 1e2, to: 1e4, points: 9 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaBlock {
    pub rhos: Vec<f64>,
    pub t_grid: Grid,
}

impl Default for ThetaBlock {
    fn default() -> Self {
        ThetaBlock {
            rhos: vec![-1.0, 0.0, 1.0, 2.0, 3.0],
            t_grid: Grid::Log { from: 1e3, to: 1e6, points: 13 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsBlock {
    pub n_samples: usize,
    pub xi_max: f64,
    pub c_bdry: f64,
    /// Observable exponent for `vbar`; absent means `vbar = tau`.
    pub rho: Option<f64>,
    /// Window of the log-log regression.
    pub window: Option<(f64, f64)>,
    pub bootstrap: usize,
}

impl Default for TailsBlock {
    fn default() -> Self {
        TailsBlock {
            n_samples: 100_000,
            xi_max: 1e-3,
            c_bdry: 1.0,
            rho: None,
            window: Some((1e2, 1e4)),
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsBlock {
    pub rho: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub xi_max: f64,
    pub c_bdry: f64,
    pub nuisance: f64,
    pub index_samples: usize,
}

impl Default for LimitsBlock {
    fn default() -> Self {
        let b = nsl_core::statistics::BirkhoffConfig::default();
        LimitsBlock {
            rho: b.rho,
            horizon: b.horizon,
            n_paths: b.n_paths,
            xi_max: b.xi_max,
            c_bdry: b.c_bdry,
            nuisance: b.nuisance,
            index_samples: b.index_samples,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub saddle: SaddleSpec,
    pub sections: SectionConfig,
    pub settings: IntegratorSettings,
    pub seed: Option<u64>,
    pub perturbed: bool,
    pub plot: bool,
    pub dulac: DulacBlock,
    pub theta: ThetaBlock,
    pub tails: TailsBlock,
    pub limits: LimitsBlock,
    /// Not echoed: outputs do not depend on where they are written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Not echoed: outputs do not depend on the worker count.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub plot: bool,
    pub perturbed: bool,
}

pub const DEFAULT_OUT: &str = "nsl-out";

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("InvalidConfig", e.to_string()))
    }

    pub fn load(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config("InvalidConfig", format!("{}: {e}", p.display())))?;
                Self::from_json(&text)
            }
        }
    }

    /// Apply flags and the environment.
    pub fn resolve(mut self, o: &Overrides, env_out: Option<PathBuf>) -> Self {
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if env_out.is_some() {
            self.out = env_out;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        self.plot |= o.plot;
        self.perturbed |= o.perturbed;
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::usage("MissingSeed", "this command is stochastic: pass --seed or set \"seed\""))
    }

    pub fn validate_common(&self) -> Result<(), CliError> {
        self.sections.validate()?;
        self.settings.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.saddle.gamma(), Some(0.0));
        assert_eq!(c.dulac.t_grid.values().unwrap().len(), 9);
        assert!(c.seed.is_none());
    }

    #[test]
    fn params_and_gamma_forms() {
        let c = RunConfig::from_json(r#"{"saddle": {"a0": 1, "a1": 0, "a2": 3, "b0": 3, "b1": 0, "b2": 0}}"#).unwrap();
        assert!(c.saddle.gamma().is_none());
        assert!(matches!(c.saddle.build(false), Err(CliError::Config { .. })));
        let c = RunConfig::from_json(r#"{"saddle": {"gamma": 1.5, "perturbation": {"kind": "quartic", "k": 0.2}}}"#).unwrap();
        let s = c.saddle.build(false).unwrap();
        assert!(matches!(s.perturbation(), Some(Perturbation::Quartic { k }) if *k == 0.2));
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn precedence() {
        let c = RunConfig::from_json(r#"{"seed": 3, "out": "a"}"#).unwrap();
        let o = Overrides {
            out: Some("b".into()),
            seed: Some(4),
            ..Default::default()
        };
        let r = c.clone().resolve(&o, None);
        assert_eq!((r.seed, r.out_dir()), (Some(4), PathBuf::from("b")));
        let r = c.resolve(&o, Some("c".into()));
        assert_eq!(r.out_dir(), PathBuf::from("c"));
    }

    #[test]
    fn echo_omits_location_and_threads() {
        let mut c = RunConfig::default();
        c.out = Some("x".into());
        c.threads = Some(3);
        let v = serde_json::to_value(&c).unwrap();
        assert!(v.get("out").is_none() && v.get("threads").is_none());
        let back: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back.dulac, c.dulac);
    }
}
