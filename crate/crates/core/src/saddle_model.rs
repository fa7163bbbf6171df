//! Planar cubic neutral saddles
//!
//! ```text
//! x' =  x (a0 x^2 + a1 x y + a2 y^2) + R1(x, y)
//! y' = -y (b0 x^2 + b1 x y + b2 y^2) + R2(x, y)
//! ```
//!
//! The cubic part admits a polynomial-times-monomial first integral exactly
//! when the mixed coefficients are compatible with the hyperbolicity ratios.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;

/// Higher-order terms added to the cubic field.
///
/// Implementations must vanish on the axes in the sense that `R1(0, y) = 0`
/// and `R2(x, 0) = 0`, so the axes stay invariant.
pub trait Remainder: Send + Sync + fmt::Debug {
    fn eval(&self, x: f64, y: f64) -> (f64, f64);

    /// Constant `K` with `|R(x, y)| <= K (x^2 + y^2)^2` on the region of interest.
    fn bound(&self) -> f64;

    /// `(R1 / x, R2 / y)`, the contribution to the logarithmic field.
    fn log_eval(&self, x: f64, y: f64) -> (f64, f64) {
        let (r1, r2) = self.eval(x, y);
        (r1 / x, r2 / y)
    }
}

/// Built-in remainders plus an escape hatch for user code.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Zero,
    /// `R = K (x^4, -y^4)`.
    Quartic { k: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Remainder>),
}

impl Perturbation {
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Perturbation::Zero => (0.0, 0.0),
            Perturbation::Quartic { k } => (k * x.powi(4), -k * y.powi(4)),
            Perturbation::Custom(r) => r.eval(x, y),
        }
    }

    pub fn log_eval(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Perturbation::Zero => (0.0, 0.0),
            Perturbation::Quartic { k } => (k * x.powi(3), -k * y.powi(3)),
            Perturbation::Custom(r) => r.log_eval(x, y),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::Quartic { k } => k.abs(),
            Perturbation::Custom(r) => r.bound(),
        }
    }
}

/// A point of the local chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64) -> Self {
        PhasePoint { x, y }
    }
}

/// Raw coefficients, as read from a configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaddleParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

impl SaddleParams {
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Self {
        SaddleParams {
            a0: a[0],
            a1: a[1],
            a2: a[2],
            b0: b[0],
            b1: b[1],
            b2: b[2],
            perturbation: None,
        }
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Self {
        self.perturbation = Some(p);
        self
    }
}

/// Quantities derived from a validated coefficient set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub u: f64,
    pub v: f64,
    pub delta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta0: f64,
    pub beta2: f64,
    pub beta_star: f64,
    /// `1 - 1/(2 beta0) - 1/(2 beta2)`.
    pub kappa: f64,
}

impl Exponents {
    /// `1/(2 beta0) + 1/(2 beta2)`.
    pub fn e(&self) -> f64 {
        1.0 - self.kappa
    }

    /// Coefficient `a0 = c0 / (2 beta0)`.
    pub fn a0(&self) -> f64 {
        self.c0 / (2.0 * self.beta0)
    }

    /// Coefficient `b2 = c2 / (2 beta2)`.
    pub fn b2(&self) -> f64 {
        self.c2 / (2.0 * self.beta2)
    }

    /// `a2 / b2 = (v + 2) / u`.
    pub fn a2_over_b2(&self) -> f64 {
        (self.v + 2.0) / self.u
    }

    /// `b0 / a0 = (u + 2) / v`.
    pub fn b0_over_a0(&self) -> f64 {
        (self.u + 2.0) / self.v
    }

    /// `Q(M) = c0 + c1 M + c2 M^2`.
    pub fn q(&self, m: f64) -> f64 {
        self.c0 + m * (self.c1 + m * self.c2)
    }

    /// `ln Q(M)`, safe for very large or very small `M > 0`.
    pub fn ln_q(&self, m: f64) -> f64 {
        if m <= 1.0 {
            self.q(m).ln()
        } else {
            let w = 1.0 / m;
            2.0 * m.ln() + (self.c2 + w * (self.c1 + w * self.c0)).ln()
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

/// Check the coefficient set and compute the derived exponents.
pub fn validate(p: &SaddleParams) -> Result<Exponents> {
    let named = [
        ("a0", p.a0),
        ("a1", p.a1),
        ("a2", p.a2),
        ("b0", p.b0),
        ("b1", p.b1),
        ("b2", p.b2),
    ];
    for (name, value) in named {
        if !value.is_finite() {
            return Err(Error::NonFiniteCoefficient { name, value });
        }
    }
    for (name, value) in [("a0", p.a0), ("a2", p.a2), ("b0", p.b0), ("b2", p.b2)] {
        if value < 0.0 {
            return Err(Error::NegativeCoefficient { name, value });
        }
    }
    if let Some(Perturbation::Quartic { k }) = &p.perturbation {
        if !k.is_finite() {
            return Err(Error::NonFiniteCoefficient { name: "k", value: *k });
        }
    }

    let delta = p.a2 * p.b0 - p.a0 * p.b2;
    if delta.abs() <= REL_TOL * (p.a2 * p.b0 + p.a0 * p.b2) {
        return Err(Error::DegenerateDelta { delta });
    }
    let c0 = p.a0 + p.b0;
    let c1 = p.a1 + p.b1;
    let c2 = p.a2 + p.b2;
    let bound = 4.0 * c0 * c2;
    if c1 * c1 >= bound {
        return Err(Error::EllipticityViolation {
            c1_sq: c1 * c1,
            bound,
        });
    }
    let u = 2.0 * p.b2 * c0 / delta;
    let v = 2.0 * p.a0 * c2 / delta;
    let lhs = p.a1 * (u + 1.0);
    let rhs = p.b1 * (v + 1.0);
    if !close(lhs, rhs) {
        return Err(Error::MixedTermMismatch { lhs, rhs });
    }

    let beta0 = c0 / (2.0 * p.a0);
    let beta2 = c2 / (2.0 * p.b2);
    let beta_star = 0.5 * [1.0, p.a2 / p.b2, p.b0 / p.a0].into_iter().fold(f64::INFINITY, f64::min);
    Ok(Exponents {
        u,
        v,
        delta,
        c0,
        c1,
        c2,
        beta0,
        beta2,
        beta_star,
        kappa: delta / (c0 * c2),
    })
}

/// The one-parameter area-preserving family `a = (1, gamma, 3)`, `b = (3, gamma, 1)`.
pub fn reduced_family(gamma: f64) -> Result<SaddleParams> {
    if !gamma.is_finite() || gamma.abs() >= 4.0 {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(SaddleParams::new([1.0, gamma, 3.0], [3.0, gamma, 1.0]))
}

/// True when the cubic part preserves area: `b0 = 3 a0`, `b1 = a1`, `a2 = 3 b2`.
pub fn is_divergence_free(p: &SaddleParams) -> bool {
    let zero = |a: f64, b: f64| (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0);
    zero(3.0 * p.a0, p.b0) && zero(p.a1, p.b1) && zero(p.a2, 3.0 * p.b2)
}

/// Evaluate the vector field at `(x, y)`. No validity checks.
pub fn field_eval(p: &SaddleParams, x: f64, y: f64, perturbed: bool) -> (f64, f64) {
    let fx = x * (p.a0 * x * x + p.a1 * x * y + p.a2 * y * y);
    let fy = -y * (p.b0 * x * x + p.b1 * x * y + p.b2 * y * y);
    match (&p.perturbation, perturbed) {
        (Some(r), true) => {
            let (r1, r2) = r.eval(x, y);
            (fx + r1, fy + r2)
        }
        _ => (fx, fy),
    }
}

/// A coefficient set that passed [`validate`], with its exponents cached.
#[derive(Clone, Debug)]
pub struct Saddle {
    params: SaddleParams,
    exps: Exponents,
    /// Coefficient of `x y` in the quadratic factor of the first integral.
    mixed: f64,
}

impl Saddle {
    /// Validates and additionally requires `a0, b2 > 0`, without which the
    /// first integral and the passage asymptotics are undefined.
    pub fn new(params: SaddleParams) -> Result<Self> {
        let exps = validate(&params)?;
        if params.a0 == 0.0 {
            return Err(Error::ZeroLeadingCoefficient { name: "a0" });
        }
        if params.b2 == 0.0 {
            return Err(Error::ZeroLeadingCoefficient { name: "b2" });
        }
        // equals a1/(v+1) = b1/(u+1) under the compatibility condition
        let mixed = exps.c1 / (exps.u + exps.v + 2.0);
        Ok(Saddle { params, exps, mixed })
    }

    pub fn reduced(gamma: f64) -> Result<Self> {
        Saddle::new(reduced_family(gamma)?)
    }

    pub fn params(&self) -> &SaddleParams {
        &self.params
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exps
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.params.perturbation.as_ref()
    }

    pub fn field(&self, x: f64, y: f64, perturbed: bool) -> (f64, f64) {
        field_eval(&self.params, x, y, perturbed)
    }

    /// `(x'/x, y'/y)` evaluated at `(x, y)`.
    #[inline]
    pub fn log_field(&self, x: f64, y: f64, perturbed: bool) -> (f64, f64) {
        let p = &self.params;
        let fp = p.a0 * x * x + p.a1 * x * y + p.a2 * y * y;
        let fq = -(p.b0 * x * x + p.b1 * x * y + p.b2 * y * y);
        match (&p.perturbation, perturbed) {
            (Some(r), true) => {
                let (r1, r2) = r.log_eval(x, y);
                (fp + r1, fq + r2)
            }
            _ => (fp, fq),
        }
    }

    /// Coefficients `(A, B, C)` of the quadratic factor `A x^2 + B x y + C y^2`.
    pub fn quadratic_factor(&self) -> (f64, f64, f64) {
        (
            self.params.a0 / self.exps.v,
            self.mixed,
            self.params.b2 / self.exps.u,
        )
    }

    /// `ln |L|` from logarithmic coordinates. Never overflows.
    pub fn ln_first_integral(&self, ln_x: f64, ln_y: f64) -> f64 {
        let (a, b, c) = self.quadratic_factor();
        let ln_quad = if ln_x >= ln_y {
            let m = (ln_y - ln_x).exp();
            2.0 * ln_x + (a + m * (b + m * c)).abs().ln()
        } else {
            let m = (ln_x - ln_y).exp();
            2.0 * ln_y + (c + m * (b + m * a)).abs().ln()
        };
        let ln_l = self.exps.u * ln_x + self.exps.v * ln_y + ln_quad;
        if self.exps.delta > 0.0 {
            ln_l
        } else {
            -ln_l
        }
    }

    /// First integral of the cubic part. For `delta < 0` this is the reciprocal
    /// of the monomial-times-quadratic expression.
    pub fn first_integral(&self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::NonPositivePoint { x, y });
        }
        let (a, b, c) = self.quadratic_factor();
        let l = x.powf(self.exps.u) * y.powf(self.exps.v) * (a * x * x + b * x * y + c * y * y);
        Ok(if self.exps.delta > 0.0 { l } else { 1.0 / l })
    }

    pub fn is_divergence_free(&self) -> bool {
        is_divergence_free(&self.params)
    }

    /// Divergence of the cubic part.
    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        let p = &self.params;
        (3.0 * p.a0 - p.b0) * x * x + 2.0 * (p.a1 - p.b1) * x * y + (p.a2 - 3.0 * p.b2) * y * y
    }
}
