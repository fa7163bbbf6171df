//! The five subcommands. Each writes its artifacts into the output
//! directory and returns a JSON summary for stdout.

use std::path::PathBuf;

use nsl_core::dulac_analysis::{coefficients, convergence_study, ConvergenceReport};
use nsl_core::observable_integrals::{log_slope_prediction, scaling_fit, theta_m_form, GrowthRegime, ScalingFit};
use nsl_core::saddle_model::{is_divergence_free, validate};
use nsl_core::statistics::{
    birkhoff_experiment, expected_tail_constant, sample_entry, tail_fit, tau_samples, BirkhoffConfig, LimitLawReport,
    ReturnConfig, TailEstimate, TailFitConfig, TailMethod, RNG_NAME,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{write_atomic, write_json, Table};
use crate::plot::{line_plot, Series};

#[derive(Serialize)]
struct Output<'a, R: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    seed: Option<u64>,
    report: R,
}

fn finish<R: Serialize>(cfg: &RunConfig, command: &str, report: R, mut files: Vec<PathBuf>) -> Result<Value, CliError> {
    let path = cfg.out_dir().join(format!("{command}.json"));
    write_json(
        &path,
        &Output {
            command,
            config: cfg,
            seed: cfg.seed,
            report: &report,
        },
    )?;
    files.insert(0, path);
    Ok(json!({
        "command": command,
        "report": serde_json::to_value(&report).unwrap_or(Value::Null),
        "files": files,
    }))
}

fn reject_perturbed(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if cfg.perturbed {
        return Err(CliError::config(
            "PerturbedUnsupported",
            format!("{command} uses the cubic field only; --perturbed applies to dulac"),
        ));
    }
    Ok(())
}

fn plot_file(cfg: &RunConfig, name: &str, svg: String, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = cfg.out_dir().join(name);
    write_atomic(&path, svg.as_bytes())?;
    files.push(path);
    Ok(())
}

#[derive(Serialize)]
pub struct ExponentSummary {
    pub u: f64,
    pub v: f64,
    pub beta0: f64,
    pub beta2: f64,
    pub beta_star: f64,
    pub delta: f64,
    pub kappa: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub divergence_free: bool,
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Value, CliError> {
    let p = cfg.saddle.params()?;
    let e = validate(&p)?;
    let summary = ExponentSummary {
        u: e.u,
        v: e.v,
        beta0: e.beta0,
        beta2: e.beta2,
        beta_star: e.beta_star,
        delta: e.delta,
        kappa: e.kappa,
        c0: e.c0,
        c1: e.c1,
        c2: e.c2,
        divergence_free: is_divergence_free(&p),
    };
    finish(cfg, "validate", summary, Vec::new())
}

fn dulac_table(r: &ConvergenceReport) -> Table {
    let mut t = Table::new(vec!["T", "xi_measured", "xi_asymptotic", "omega_measured", "omega_asymptotic", "rel_error"]);
    for i in 0..r.t_grid.len() {
        t.push(vec![
            r.t_grid[i],
            r.xi_measured[i],
            r.xi_asymptotic[i],
            r.omega_measured[i],
            r.omega_asymptotic[i],
            r.rel_errors[i],
        ]);
    }
    t
}

pub fn cmd_dulac(cfg: &RunConfig) -> Result<Value, CliError> {
    cfg.validate_common()?;
    let saddle = cfg.saddle.build(cfg.perturbed)?;
    let grid = cfg.dulac.t_grid.values()?;
    let report = convergence_study(&saddle, &cfg.sections, &grid, &cfg.settings, cfg.perturbed)?;
    let csv = cfg.out_dir().join("dulac.csv");
    dulac_table(&report).write(&csv)?;
    let mut files = vec![csv];
    if cfg.plot {
        let pts = |v: &[f64]| report.t_grid.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        let svg = line_plot(
            "Dulac time asymptotics",
            "T",
            "entry / exit coordinate",
            &[
                Series { label: "xi measured", points: pts(&report.xi_measured), markers: true },
                Series { label: "xi asymptotic", points: pts(&report.xi_asymptotic), markers: false },
                Series { label: "omega measured", points: pts(&report.omega_measured), markers: true },
                Series { label: "omega asymptotic", points: pts(&report.omega_asymptotic), markers: false },
            ],
            true,
            true,
        )?;
        plot_file(cfg, "dulac.svg", svg, &mut files)?;
        let svg = line_plot(
            "Relative error of the two-term expansion",
            "T",
            "|xi / xi_asym - 1|",
            &[Series { label: "error", points: pts(&report.rel_errors), markers: true }],
            true,
            true,
        )?;
        plot_file(cfg, "dulac_error.svg", svg, &mut files)?;
    }
    finish(cfg, "dulac", report, files)
}

#[derive(Serialize)]
pub struct ThetaEntry {
    #[serde(flatten)]
    pub fit: ScalingFit,
    /// `1 - rho/2` in the power regime.
    pub exponent_predicted: Option<f64>,
    /// Slope against `ln T` in the logarithmic regime.
    pub log_slope_predicted: Option<f64>,
    /// `Theta` from the `M`-form with asymptotic endpoints.
    pub theta_m_form: Vec<Option<f64>>,
}

pub fn cmd_theta(cfg: &RunConfig) -> Result<Value, CliError> {
    cfg.validate_common()?;
    reject_perturbed(cfg, "theta")?;
    let saddle = cfg.saddle.build(false)?;
    let exps = saddle.exponents();
    let grid = cfg.theta.t_grid.values()?;
    let coeffs = coefficients(exps, cfg.sections.eta, cfg.sections.zeta0)?;
    let mut table = Table::new(vec!["rho", "T", "theta", "theta_m_form"]);
    let mut entries = Vec::new();
    for &rho in &cfg.theta.rhos {
        let fit = scaling_fit(&saddle, &cfg.sections, rho, &grid, &cfg.settings)?;
        let m_form: Vec<Option<f64>> = grid
            .iter()
            .map(|&t| theta_m_form(exps, &coeffs, cfg.sections.eta, cfg.sections.zeta0, t, rho).ok())
            .collect();
        for (i, &t) in grid.iter().enumerate() {
            table.push(vec![rho, t, fit.thetas[i], m_form[i].unwrap_or(f64::NAN)]);
        }
        entries.push(ThetaEntry {
            exponent_predicted: (fit.regime == GrowthRegime::Power).then_some(1.0 - 0.5 * rho),
            log_slope_predicted: (fit.regime == GrowthRegime::Logarithmic).then(|| log_slope_prediction(exps)),
            theta_m_form: m_form,
            fit,
        });
    }
    let csv = cfg.out_dir().join("theta.csv");
    table.write(&csv)?;
    let mut files = vec![csv];
    if cfg.plot {
        let labels: Vec<String> = entries.iter().map(|e| format!("rho = {}", e.fit.rho)).collect();
        let series: Vec<Series> = entries
            .iter()
            .zip(&labels)
            .map(|(e, l)| Series {
                label: l,
                points: e.fit.t_grid.iter().copied().zip(e.fit.thetas.iter().copied()).collect(),
                markers: false,
            })
            .collect();
        let svg = line_plot("Observable integrals along passages", "T", "Theta", &series, true, true)?;
        plot_file(cfg, "theta.svg", svg, &mut files)?;
    }
    finish(cfg, "theta", entries, files)
}

#[derive(Serialize)]
pub struct TailsReport {
    pub rng: &'static str,
    pub n_samples: usize,
    pub censored: usize,
    pub retried: usize,
    pub beta2: f64,
    pub expected_c_star: f64,
    pub hill: TailEstimate,
    pub loglog: TailEstimate,
}

pub fn cmd_tails(cfg: &RunConfig) -> Result<Value, CliError> {
    let seed = cfg.require_seed()?;
    cfg.validate_common()?;
    reject_perturbed(cfg, "tails")?;
    let saddle = cfg.saddle.build(false)?;
    let b = &cfg.tails;
    let entries = sample_entry(&cfg.sections, b.xi_max, b.n_samples, seed)?;
    let set = tau_samples(
        &saddle,
        &cfg.sections,
        &entries,
        &ReturnConfig { rho: b.rho, c_bdry: b.c_bdry },
        &cfg.settings,
    )?;
    let taus = set.taus();
    let fit = |method| {
        tail_fit(
            &taus,
            &TailFitConfig {
                method,
                bootstrap: b.bootstrap,
                seed,
            },
        )
    };
    let hill = fit(TailMethod::Hill { k: None })?;
    let loglog = fit(TailMethod::LoglogRegression { window: b.window })?;
    let report = TailsReport {
        rng: RNG_NAME,
        n_samples: set.samples.len(),
        censored: set.censored,
        retried: set.retried,
        beta2: saddle.exponents().beta2,
        expected_c_star: expected_tail_constant(&saddle, &cfg.sections, b.xi_max)?,
        hill,
        loglog,
    };

    let mut table = Table::new(vec!["xi", "eta", "tau", "vbar"]);
    for s in &set.samples {
        table.push(vec![s.xi, s.eta, s.tau, s.vbar]);
    }
    let csv = cfg.out_dir().join("tails_samples.csv");
    table.write(&csv)?;
    let mut files = vec![csv];
    if cfg.plot {
        let mut sorted = taus.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let n = sorted.len() as f64;
        let stride = (sorted.len() / 400).max(1);
        let survival: Vec<(f64, f64)> = sorted
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(i, t)| (*t, (i + 1) as f64 / n))
            .collect();
        let (lo, hi) = (sorted[sorted.len() - 1], sorted[0]);
        let line = |c: f64, beta: f64| vec![(lo, c * lo.powf(-beta)), (hi, c * hi.powf(-beta))];
        let svg = line_plot(
            "Return time survival function",
            "t",
            "P(tau > t)",
            &[
                Series { label: "empirical", points: survival, markers: true },
                Series { label: "C* t^-beta2", points: line(report.expected_c_star, report.beta2), markers: false },
            ],
            true,
            true,
        )?;
        plot_file(cfg, "tails.svg", svg, &mut files)?;
    }
    finish(cfg, "tails", report, files)
}

pub fn cmd_limits(cfg: &RunConfig) -> Result<Value, CliError> {
    let seed = cfg.require_seed()?;
    cfg.validate_common()?;
    reject_perturbed(cfg, "limits")?;
    let gamma = cfg
        .saddle
        .gamma()
        .ok_or_else(|| CliError::config("InvalidConfig", "limits needs a reduced-family saddle given by gamma"))?;
    let b = &cfg.limits;
    let bc = BirkhoffConfig {
        gamma,
        rho: b.rho,
        horizon: b.horizon,
        n_paths: b.n_paths,
        seed,
        xi_max: b.xi_max,
        c_bdry: b.c_bdry,
        nuisance: b.nuisance,
        index_samples: b.index_samples,
    };
    let (report, normalized): (LimitLawReport, Vec<f64>) = birkhoff_experiment(&bc, &cfg.sections, &cfg.settings)?;
    let mut table = Table::new(vec!["path", "s_normalized"]);
    for (i, s) in normalized.iter().enumerate() {
        table.push(vec![i as f64, *s]);
    }
    let csv = cfg.out_dir().join("limits_paths.csv");
    table.write(&csv)?;
    let mut files = vec![csv];
    if cfg.plot {
        let mut sorted = normalized.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let stride = (sorted.len() / 400).max(1);
        let ecdf: Vec<(f64, f64)> = sorted
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(i, s)| (*s, (i + 1) as f64 / n))
            .collect();
        let title = format!("Normalized Birkhoff sums, {}", report.scaling_used);
        let svg = line_plot(&title, "S_t / scale", "empirical CDF", &[Series { label: "paths", points: ecdf, markers: false }], false, false)?;
        plot_file(cfg, "limits.svg", svg, &mut files)?;
    }
    finish(cfg, "limits", report, files)
}
