//! Passages through the saddle between the entry section `y = eta` and the
//! exit section `x = zeta0`.
//!
//! The planar backend integrates in logarithmic coordinates `p = ln x`,
//! `q = ln y`. Near the saddle the field in these coordinates is bounded
//! below by the cubic rates, so the step count grows with `ln T` rather than
//! with `T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rk::{Dense, Dopri5, System};
use crate::saddle_model::{Perturbation, PhasePoint, Saddle};

const STEP_CAP: f64 = 0.1;

/// Entry and exit transversals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionConfig {
    /// Height of the entry section.
    pub eta: f64,
    /// Abscissa of the exit section.
    pub zeta0: f64,
    /// Range of entry heights used for strip sampling.
    pub eta_range: (f64, f64),
}

impl Default for SectionConfig {
    fn default() -> Self {
        SectionConfig {
            eta: 1.0,
            zeta0: 1.0,
            eta_range: (1.0, 1.4),
        }
    }
}

impl SectionConfig {
    pub fn validate(&self) -> Result<()> {
        let (e0, e1) = self.eta_range;
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.eta) || !ok(self.zeta0) || !ok(e0) || !ok(e1) {
            return Err(Error::InvalidSection(format!("{self:?}: all entries must be positive and finite")));
        }
        if e0 > e1 {
            return Err(Error::InvalidSection(format!("eta_range ({e0}, {e1}) is not ordered")));
        }
        if self.eta > e1 {
            return Err(Error::InvalidSection(format!("eta = {} exceeds eta1 = {e1}", self.eta)));
        }
        Ok(())
    }

    /// Copy with a different entry height.
    pub fn with_eta(&self, eta: f64) -> Self {
        SectionConfig { eta, ..self.clone() }
    }

    /// Upper corner of the validity box `[0, 2 zeta0] x [0, 2 eta1]`.
    pub fn validity_box(&self) -> (f64, f64) {
        (2.0 * self.zeta0, 2.0 * self.eta_range.1.max(self.eta))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Two-dimensional integration in logarithmic coordinates.
    #[default]
    Planar,
    /// Scalar equation for the ratio `M = y / x` along a level set.
    ReducedM,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub event_tol: f64,
    pub backend: Backend,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 200_000,
            event_tol: 1e-12,
            backend: Backend::Planar,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-13 && self.rel_tol < 1.0) {
            return Err(Error::InvalidSettings(format!("rel_tol = {} outside [1e-13, 1)", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) || !(self.event_tol > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidSettings(
                "abs_tol, event_tol and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One passage from `(xi, eta)` to `(zeta0, omega)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DulacRecord {
    pub eta: f64,
    pub xi: f64,
    pub omega: f64,
    #[serde(rename = "T")]
    pub time: f64,
    /// Relative change of the first integral between entry and exit.
    pub l_drift: f64,
    pub steps: usize,
    /// Euclidean length of the step polyline.
    pub arc_length: f64,
}

/// A sample of a dense trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// First integral of the cubic part at `(x, y)`.
    pub l: f64,
}

/// Integrand accumulated alongside the orbit.
#[derive(Clone, Copy)]
pub enum Weight<'a> {
    /// `r^rho`.
    RadiusPower(f64),
    /// Arbitrary function of `(x, y)`.
    Custom(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

pub(crate) struct LogFlow<'a> {
    saddle: &'a Saddle,
    perturbed: bool,
    /// `1` forwards, `-1` for the time-reversed field.
    sign: f64,
    weight: Weight<'a>,
}

impl<'a> LogFlow<'a> {
    #[inline]
    fn planar(&self, p: f64, q: f64) -> (f64, f64) {
        let (fp, fq) = self.saddle.log_field(p.exp(), q.exp(), self.perturbed);
        (self.sign * fp, self.sign * fq)
    }
}

/// `r^rho = (x^2 + y^2)^(rho/2)` from logarithmic coordinates.
#[inline]
pub(crate) fn radius_power(p: f64, q: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    let hi = p.max(q);
    let ln_r2 = 2.0 * hi + (-2.0 * (p - q).abs()).exp().ln_1p();
    (0.5 * rho * ln_r2).exp()
}

fn speed_cap(dp: f64, dq: f64) -> f64 {
    let s = dp.hypot(dq);
    if s > 0.0 {
        STEP_CAP / s
    } else {
        f64::INFINITY
    }
}

impl<'a> System<2> for LogFlow<'a> {
    #[inline]
    fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
        let (a, b) = self.planar(y[0], y[1]);
        [a, b]
    }

    fn step_cap(&self, dy: &[f64; 2]) -> f64 {
        speed_cap(dy[0], dy[1])
    }
}

impl<'a> System<3> for LogFlow<'a> {
    #[inline]
    fn rhs(&self, y: &[f64; 3]) -> [f64; 3] {
        let (a, b) = self.planar(y[0], y[1]);
        let w = match self.weight {
            Weight::RadiusPower(rho) => radius_power(y[0], y[1], rho),
            Weight::Custom(f) => f(y[0].exp(), y[1].exp()),
        };
        [a, b, w]
    }

    fn step_cap(&self, dy: &[f64; 3]) -> f64 {
        speed_cap(dy[0], dy[1])
    }
}

/// Where a planar integration stops.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Stop {
    /// First crossing of `x = zeta0`.
    Exit,
    /// First crossing of the diagonal `x = y`.
    Diagonal,
    /// After the given flow time.
    Time(f64),
}

pub(crate) struct RunResult<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub steps: usize,
    pub arc_length: f64,
}

fn check_start(sections: &SectionConfig, settings: &IntegratorSettings, start: PhasePoint) -> Result<()> {
    sections.validate()?;
    settings.validate()?;
    let PhasePoint { x, y } = start;
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::NonPositivePoint { x, y });
    }
    Ok(())
}

fn solver<const N: usize>(settings: &IntegratorSettings, max_steps: usize) -> Dopri5<N> {
    // logarithmic coordinates: an absolute error is a relative error in x, y
    let mut atol = [settings.rel_tol; N];
    let mut rtol = [0.0; N];
    if N == 3 {
        atol[2] = settings.abs_tol;
        rtol[2] = settings.rel_tol;
    }
    let mut s = Dopri5::new(atol, rtol, max_steps);
    s.event_tol = settings.event_tol;
    s
}

/// Generic planar run; `y0` holds `(ln x, ln y[, theta])`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_planar<const N: usize, F>(
    saddle: &Saddle,
    sections: &SectionConfig,
    y0: [f64; N],
    settings: &IntegratorSettings,
    perturbed: bool,
    weight: Weight<'_>,
    sign: f64,
    stop: Stop,
    fixed_step: Option<f64>,
    mut sink: F,
) -> Result<RunResult<N>>
where
    for<'a> LogFlow<'a>: System<N>,
    F: FnMut(&Dense<N>, f64, &[f64; N]),
{
    let flow = LogFlow { saddle, perturbed, sign, weight };
    let mut s = solver::<N>(settings, settings.max_steps);
    s.fixed_step = fixed_step;
    let (bx, by) = sections.validity_box();
    let (lbx, lby) = (bx.ln(), by.ln());
    let ln_zeta = sections.zeta0.ln();
    let (mut px, mut py) = (y0[0].exp(), y0[1].exp());
    let mut arc = 0.0;
    let mut observe = |d: &Dense<N>, t: f64, y: &[f64; N]| -> Result<()> {
        if y[0] > lbx || y[1] > lby {
            return Err(Error::LeftDomain { t, x: y[0].exp(), y: y[1].exp() });
        }
        let (x1, y1) = (y[0].exp(), y[1].exp());
        arc += (x1 - px).hypot(y1 - py);
        px = x1;
        py = y1;
        sink(d, t, y);
        Ok(())
    };
    let out = match stop {
        Stop::Exit => {
            let ev = |y: &[f64; N]| y[0] - ln_zeta;
            s.run(&flow, y0, f64::INFINITY, Some(&ev), &mut observe)?
        }
        Stop::Diagonal => {
            let ev = |y: &[f64; N]| y[0] - y[1];
            s.run(&flow, y0, f64::INFINITY, Some(&ev), &mut observe)?
        }
        Stop::Time(t) => s.run(&flow, y0, t, None::<&fn(&[f64; N]) -> f64>, &mut observe)?,
    };
    debug_assert!(out.event || matches!(stop, Stop::Time(_)));
    Ok(RunResult {
        t: out.t,
        y: out.y,
        steps: out.steps,
        arc_length: arc,
    })
}

pub(crate) fn relative_drift(saddle: &Saddle, a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = saddle.ln_first_integral(b.0, b.1) - saddle.ln_first_integral(a.0, a.1);
    d.exp_m1().abs()
}

fn has_remainder(saddle: &Saddle, perturbed: bool) -> bool {
    perturbed && !matches!(saddle.perturbation(), None | Some(Perturbation::Zero))
}

/// Integrate from `(xi, eta)` until the first crossing of `x = zeta0`.
pub fn passage(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<DulacRecord> {
    check_start(sections, settings, PhasePoint::new(xi, sections.eta))?;
    if xi >= sections.zeta0 {
        return Err(Error::InvalidArgument(format!(
            "entry xi = {xi} must lie below zeta0 = {}",
            sections.zeta0
        )));
    }
    match settings.backend {
        Backend::Planar => passage_planar(saddle, sections, xi, settings, perturbed, settings.max_steps),
        Backend::ReducedM => {
            if has_remainder(saddle, perturbed) {
                return Err(Error::PerturbedUnsupported);
            }
            passage_reduced(saddle, sections, xi, settings)
        }
    }
}

fn passage_planar(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
    max_steps: usize,
) -> Result<DulacRecord> {
    let s = IntegratorSettings {
        max_steps,
        ..settings.clone()
    };
    let y0 = [xi.ln(), sections.eta.ln()];
    let r = run_planar::<2, _>(saddle, sections, y0, &s, perturbed, Weight::RadiusPower(0.0), 1.0, Stop::Exit, None, |_, _, _| {})?;
    Ok(DulacRecord {
        eta: sections.eta,
        xi,
        omega: r.y[1].exp(),
        time: r.t,
        l_drift: relative_drift(saddle, (y0[0], y0[1]), (r.y[0], r.y[1])),
        steps: r.steps,
        arc_length: r.arc_length,
    })
}

/// Passage with a larger step budget, used to rescue entries very close to
/// the stable manifold.
pub fn passage_with_budget(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
    max_steps: usize,
) -> Result<DulacRecord> {
    passage(
        saddle,
        sections,
        xi,
        &IntegratorSettings {
            max_steps,
            ..settings.clone()
        },
        perturbed,
    )
}

struct MFlow {
    ln_g: f64,
    inv_beta0: f64,
    e: f64,
    exps: crate::saddle_model::Exponents,
}

impl System<1> for MFlow {
    #[inline]
    fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
        let s = y[0];
        [-(self.ln_g - s * self.inv_beta0 + self.e * self.exps.ln_q(s.exp())).exp()]
    }

    fn step_cap(&self, dy: &[f64; 1]) -> f64 {
        speed_cap(dy[0], 0.0)
    }
}

/// `ln G(xi, eta)` computed without overflow.
pub(crate) fn ln_g(exps: &crate::saddle_model::Exponents, xi: f64, eta: f64) -> f64 {
    let m = eta / xi;
    // c0 xi^2 + c1 xi eta + c2 eta^2 = xi^2 Q(eta / xi)
    xi.ln() / exps.beta2 + eta.ln() / exps.beta0 + exps.kappa * (2.0 * xi.ln() + exps.ln_q(m))
}

fn passage_reduced(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    settings: &IntegratorSettings,
) -> Result<DulacRecord> {
    let exps = *saddle.exponents();
    let eta = sections.eta;
    let flow = MFlow {
        ln_g: ln_g(&exps, xi, eta),
        inv_beta0: 1.0 / exps.beta0,
        e: exps.e(),
        exps,
    };
    let two_ln_zeta = 2.0 * sections.zeta0.ln();
    let ev = |y: &[f64; 1]| {
        let s = y[0];
        flow.ln_g - s * flow.inv_beta0 - exps.kappa * exps.ln_q(s.exp()) - two_ln_zeta
    };
    let mut s = Dopri5::new([settings.rel_tol], [0.0], settings.max_steps);
    s.event_tol = settings.event_tol;
    let y0 = [(eta / xi).ln()];
    let out = s.run(&flow, y0, f64::INFINITY, Some(&ev), |_, _, _| Ok(()))?;
    let omega = sections.zeta0 * out.y[0].exp();
    let (bx, by) = sections.validity_box();
    if omega > by {
        return Err(Error::LeftDomain { t: out.t, x: bx, y: omega });
    }
    Ok(DulacRecord {
        eta,
        xi,
        omega,
        time: out.t,
        l_drift: relative_drift(saddle, (xi.ln(), eta.ln()), (sections.zeta0.ln(), omega.ln())),
        steps: out.steps,
        arc_length: (sections.zeta0 - xi).hypot(eta - omega),
    })
}

/// Entry abscissa of the shortest passage considered: the diagonal point
/// `(eta, eta)` when it lies left of the exit section.
pub fn xi_cap(sections: &SectionConfig) -> f64 {
    sections.eta.min(sections.zeta0 * (1.0 - 1e-6))
}

/// Passage time from [`xi_cap`], the smallest time [`invert_dulac_time`] accepts.
pub fn t_min(saddle: &Saddle, sections: &SectionConfig, settings: &IntegratorSettings, perturbed: bool) -> Result<f64> {
    Ok(passage(saddle, sections, xi_cap(sections), settings, perturbed)?.time)
}

const MAX_ROOT_ITERATIONS: usize = 200;

/// Entry abscissa whose passage time equals `t`.
///
/// Brackets the root by geometric descent, then runs the Illinois variant of
/// regula falsi on `(ln xi, ln T)`, which is close to linear.
pub fn invert_dulac_time(
    saddle: &Saddle,
    sections: &SectionConfig,
    t: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!("passage time {t} must be positive")));
    }
    let time_of = |ln_xi: f64| -> Result<f64> { Ok(passage(saddle, sections, ln_xi.exp(), settings, perturbed)?.time) };
    let tol = settings.event_tol.max(settings.rel_tol * t);

    let mut s_hi = xi_cap(sections).ln();
    let t_hi = time_of(s_hi)?;
    if t < t_hi {
        return Err(Error::TTooSmall { t, t_min: t_hi });
    }
    if (t_hi - t).abs() <= tol {
        return Ok(s_hi.exp());
    }
    let mut f_hi = t_hi.ln() - t.ln();

    // bracket: T grows roughly like xi^(-1/beta2)
    let beta2 = saddle.exponents().beta2;
    let mut s_lo = s_hi - (beta2 * (t / t_hi.max(1e-3)).ln()).max(1.0);
    let mut f_lo;
    let mut tries = 0;
    loop {
        let tl = time_of(s_lo)?;
        if (tl - t).abs() <= tol {
            return Ok(s_lo.exp());
        }
        f_lo = tl.ln() - t.ln();
        if f_lo > 0.0 {
            break;
        }
        s_hi = s_lo;
        f_hi = f_lo;
        s_lo -= 2.0 * beta2 + 1.0;
        tries += 1;
        if tries > 100 {
            return Err(Error::NoConvergence { iterations: tries });
        }
    }

    // f_lo > 0 at s_lo, f_hi < 0 at s_hi
    let mut side = 0i32;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mut s_mid = (s_lo * f_hi - s_hi * f_lo) / (f_hi - f_lo);
        if !(s_mid > s_lo && s_mid < s_hi) {
            s_mid = 0.5 * (s_lo + s_hi);
        }
        let tm = time_of(s_mid)?;
        if (tm - t).abs() <= tol {
            return Ok(s_mid.exp());
        }
        let fm = tm.ln() - t.ln();
        if fm > 0.0 {
            s_lo = s_mid;
            f_lo = fm;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            s_hi = s_mid;
            f_hi = fm;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
        if s_hi - s_lo <= 4.0 * f64::EPSILON * s_lo.abs().max(1.0) {
            // passage time is only resolved to integration accuracy
            return Ok(if f_lo.abs() < f_hi.abs() { s_lo.exp() } else { s_hi.exp() });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ROOT_ITERATIONS,
    })
}

/// Dense samples of the orbit from `start` to the exit section.
pub fn trajectory_polyline(
    saddle: &Saddle,
    sections: &SectionConfig,
    start: PhasePoint,
    settings: &IntegratorSettings,
    perturbed: bool,
    samples_per_step: usize,
) -> Result<Vec<TrajectoryPoint>> {
    check_start(sections, settings, start)?;
    let point = |t: f64, p: f64, q: f64| TrajectoryPoint {
        t,
        x: p.exp(),
        y: q.exp(),
        l: saddle.ln_first_integral(p, q).exp() * saddle.exponents().delta.signum(),
    };
    let y0 = [start.x.ln(), start.y.ln()];
    let mut pts = vec![point(0.0, y0[0], y0[1])];
    run_planar::<2, _>(saddle, sections, y0, settings, perturbed, Weight::RadiusPower(0.0), 1.0, Stop::Exit, None, |d, t_end, y| {
        for j in 1..=samples_per_step {
            let t = d.t0 + (t_end - d.t0) * j as f64 / (samples_per_step + 1) as f64;
            let z = d.eval(t);
            pts.push(point(t, z[0], z[1]));
        }
        pts.push(point(t_end, y[0], y[1]));
    })?;
    Ok(pts)
}

/// Flow `start` for time `t`; negative `t` integrates the reversed field.
pub fn flow_for_time(
    saddle: &Saddle,
    sections: &SectionConfig,
    start: PhasePoint,
    t: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<PhasePoint> {
    check_start(sections, settings, start)?;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let y0 = [start.x.ln(), start.y.ln()];
    let r = run_planar::<2, _>(saddle, sections, y0, settings, perturbed, Weight::RadiusPower(0.0), sign, Stop::Time(t.abs()), None, |_, _, _| {})?;
    Ok(PhasePoint::new(r.y[0].exp(), r.y[1].exp()))
}

/// Time from `(xi, eta)` to the diagonal `x = y`, and the point reached.
pub fn time_to_diagonal(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<(f64, PhasePoint)> {
    check_start(sections, settings, PhasePoint::new(xi, sections.eta))?;
    if xi >= sections.eta {
        return Err(Error::InvalidArgument(format!("entry xi = {xi} is not above the diagonal")));
    }
    let y0 = [xi.ln(), sections.eta.ln()];
    let r = run_planar::<2, _>(saddle, sections, y0, settings, perturbed, Weight::RadiusPower(0.0), 1.0, Stop::Diagonal, None, |_, _, _| {})?;
    Ok((r.t, PhasePoint::new(r.y[0].exp(), r.y[1].exp())))
}

/// Time from an arbitrary point to the exit section.
pub fn time_to_exit(
    saddle: &Saddle,
    sections: &SectionConfig,
    start: PhasePoint,
    settings: &IntegratorSettings,
    perturbed: bool,
) -> Result<f64> {
    check_start(sections, settings, start)?;
    let y0 = [start.x.ln(), start.y.ln()];
    Ok(run_planar::<2, _>(saddle, sections, y0, settings, perturbed, Weight::RadiusPower(0.0), 1.0, Stop::Exit, None, |_, _, _| {})?.t)
}

/// Passage with a constant step size and no error control.
///
/// Used to probe the convergence order of the scheme.
pub fn passage_fixed_step(
    saddle: &Saddle,
    sections: &SectionConfig,
    xi: f64,
    h: f64,
    settings: &IntegratorSettings,
) -> Result<DulacRecord> {
    check_start(sections, settings, PhasePoint::new(xi, sections.eta))?;
    let y0 = [xi.ln(), sections.eta.ln()];
    let r = run_planar::<2, _>(saddle, sections, y0, settings, false, Weight::RadiusPower(0.0), 1.0, Stop::Exit, Some(h), |_, _, _| {})?;
    Ok(DulacRecord {
        eta: sections.eta,
        xi,
        omega: r.y[1].exp(),
        time: r.t,
        l_drift: relative_drift(saddle, (y0[0], y0[1]), (r.y[0], r.y[1])),
        steps: r.steps,
        arc_length: r.arc_length,
    })
}
