//! Adaptive Gauss-Kronrod quadrature and a wrapper for integrands with
//! algebraic behaviour at `0` and `infinity`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive G7-K15 on a finite interval.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let (v, e) = kronrod(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    let mut evals = 15;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS || !total.is_finite() {
            return Err(Error::QuadratureFailure { estimate: total, error: err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(&f, worst.a, m);
        let (v2, e2) = kronrod(&f, m, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult { value, error, evals })
}

/// `\int_lower^upper f(M) dM` for `f` behaving like `M^p0` at `0` and like
/// `M^pinf` at infinity; `upper` may be `f64::INFINITY`.
///
/// Near `0` the substitution `M = s^(1/(p0+1))` removes the algebraic
/// singularity, on `[1, inf)` the substitution `M = s^(-1/q)` with
/// `q = -pinf - 1` maps the tail to a finite interval with a regular
/// integrand, and finite pieces away from the endpoints are integrated in
/// `t = ln M`.
pub fn integrate_power_law<F: Fn(f64) -> f64>(f: F, p0: f64, pinf: f64, lower: f64, upper: f64, rel_tol: f64) -> Result<f64> {
    if !(lower >= 0.0) || !(upper >= lower) || lower.is_infinite() {
        return Err(Error::InvalidArgument(format!("integration range [{lower}, {upper}]")));
    }
    if lower == upper {
        return Ok(0.0);
    }
    if lower == 0.0 && !(p0 > -1.0) {
        return Err(Error::NonIntegrable(format!("exponent {p0} at 0")));
    }
    if upper.is_infinite() && !(pinf < -1.0) {
        return Err(Error::NonIntegrable(format!("exponent {pinf} at infinity")));
    }

    let mut total = 0.0;
    let split = 1.0;

    // piece below the split
    if lower < split {
        let b = upper.min(split);
        total += if lower == 0.0 {
            let a1 = p0 + 1.0;
            let inv = 1.0 / a1;
            let g = |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                let m = s.powf(inv);
                // f(m) m^(1 - a1) / a1, with m^(1-a1) = s^(inv - 1)
                f(m) * (m / s) / a1
            };
            gauss_kronrod(g, 0.0, b.powf(a1), rel_tol, 0.0)?.value
        } else {
            let g = |t: f64| {
                let m = t.exp();
                f(m) * m
            };
            gauss_kronrod(g, lower.ln(), b.ln(), rel_tol, 0.0)?.value
        };
    }

    // piece above the split
    if upper > split {
        let a = lower.max(split);
        total += if upper.is_infinite() {
            let q = -pinf - 1.0;
            let inv = 1.0 / q;
            let g = |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                let m = s.powf(-inv);
                // |dM/ds| = m / (q s)
                f(m) * m / (q * s)
            };
            gauss_kronrod(g, 0.0, a.powf(-q), rel_tol, 0.0)?.value
        } else {
            let g = |t: f64| {
                let m = t.exp();
                f(m) * m
            };
            gauss_kronrod(g, a.ln(), upper.ln(), rel_tol, 0.0)?.value
        };
    }
    Ok(total)
}
