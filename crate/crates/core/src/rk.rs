//! Dormand-Prince 5(4) with dense output, PI step control and a terminal
//! event located on the continuous extension.

use crate::error::{Error, Result};

pub(crate) trait System<const N: usize> {
    fn rhs(&self, y: &[f64; N]) -> [f64; N];

    /// Upper bound on the next step given the current derivative.
    fn step_cap(&self, _dy: &[f64; N]) -> f64 {
        f64::INFINITY
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

/// Continuous extension over one accepted step.
#[derive(Clone, Debug)]
pub(crate) struct Dense<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

struct Stages<const N: usize> {
    y_new: [f64; N],
    k: [[f64; N]; 7],
}

fn stages<const N: usize, S: System<N>>(sys: &S, y: &[f64; N], k1: &[f64; N], h: f64) -> Stages<N> {
    let k2 = sys.rhs(&axpy(y, h, &[(A21, k1)]));
    let k3 = sys.rhs(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = sys.rhs(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = sys.rhs(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = sys.rhs(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y_new = axpy(
        y,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = sys.rhs(&y_new);
    Stages {
        y_new,
        k: [*k1, k2, k3, k4, k5, k6, k7],
    }
}

/// Outcome of a run.
#[derive(Clone, Debug)]
pub(crate) struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub steps: usize,
    pub event: bool,
}

/// Terminal event: integration stops where `g` first crosses zero upwards.
pub(crate) trait Event<const N: usize> {
    fn value(&self, y: &[f64; N]) -> f64;
}

impl<const N: usize, F: Fn(&[f64; N]) -> f64> Event<N> for F {
    fn value(&self, y: &[f64; N]) -> f64 {
        self(y)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Dopri5<const N: usize> {
    pub atol: [f64; N],
    pub rtol: [f64; N],
    pub max_steps: usize,
    pub h_max: f64,
    pub event_tol: f64,
    /// Constant step size without error control.
    pub fixed_step: Option<f64>,
}

impl<const N: usize> Dopri5<N> {
    pub fn new(atol: [f64; N], rtol: [f64; N], max_steps: usize) -> Self {
        Dopri5 {
            atol,
            rtol,
            max_steps,
            h_max: f64::INFINITY,
            event_tol: 1e-12,
            fixed_step: None,
        }
    }

    fn err_norm(&self, y: &[f64; N], y_new: &[f64; N], k: &[[f64; N]; 7], h: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.atol[i] + self.rtol[i] * y[i].abs().max(y_new[i].abs());
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            acc += (e / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<S: System<N>>(&self, sys: &S, y: &[f64; N], f0: &[f64; N]) -> f64 {
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.atol[i] + self.rtol[i] * y[i].abs();
            dnf += (f0[i] / sk).powi(2);
            dny += (y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.h_max);
        let f1 = sys.rhs(&axpy(y, h, &[(1.0, f0)]));
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.atol[i] + self.rtol[i] * y[i].abs();
            der2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        let der12 = (der2.sqrt() / h).max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Integrate from `t = 0` until `t_end` or the event fires.
    ///
    /// `on_step` sees every accepted step, truncated at the event if one fires.
    pub fn run<S, E, F>(
        &self,
        sys: &S,
        y0: [f64; N],
        t_end: f64,
        event: Option<&E>,
        mut on_step: F,
    ) -> Result<Outcome<N>>
    where
        S: System<N>,
        E: Event<N>,
        F: FnMut(&Dense<N>, f64, &[f64; N]) -> Result<()>,
    {
        let mut t = 0.0;
        let mut y = y0;
        let mut k1 = sys.rhs(&y);
        let mut g_prev = event.map(|e| e.value(&y));
        if let Some(g) = g_prev {
            if g >= 0.0 {
                return Ok(Outcome { t, y, steps: 0, event: true });
            }
        }
        let mut h = match self.fixed_step {
            Some(h) => h,
            None => self.initial_step(sys, &y, &k1),
        };
        let expo1 = 0.2 - BETA * 0.75;
        let mut fac_old: f64 = 1e-4;
        let mut steps = 0;
        let mut last_rejected = false;

        loop {
            if steps >= self.max_steps {
                return Err(Error::MaxStepsExceeded { steps, t });
            }
            if t >= t_end {
                return Ok(Outcome { t, y, steps, event: false });
            }
            if self.fixed_step.is_none() {
                h = h.min(sys.step_cap(&k1)).min(self.h_max);
            }
            let mut truncated = false;
            if t + h >= t_end {
                h = t_end - t;
                truncated = true;
            }
            if !(h > 1e-14 * t.abs().max(1.0)) {
                return Err(Error::StepSizeUnderflow { t });
            }
            steps += 1;
            let st = stages(sys, &y, &k1, h);

            let h_next;
            if self.fixed_step.is_none() {
                let err = self.err_norm(&y, &st.y_new, &st.k, h);
                if !err.is_finite() {
                    h *= FAC_MIN;
                    last_rejected = true;
                    continue;
                }
                let fac11 = err.powf(expo1);
                if err > 1.0 {
                    h /= (1.0 / FAC_MIN).min(fac11 / SAFE);
                    last_rejected = true;
                    continue;
                }
                let fac = (fac11 / fac_old.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut hn = h / fac;
                if last_rejected {
                    hn = hn.min(h);
                }
                fac_old = err.max(1e-4);
                h_next = hn;
            } else {
                h_next = h;
            }
            last_rejected = false;

            let dense = self.dense(&y, &st, t, h);
            if let (Some(ev), Some(gp)) = (event, g_prev) {
                let g_new = ev.value(&st.y_new);
                if gp < 0.0 && g_new >= 0.0 {
                    let (t_ev, y_ev) = self.locate(sys, ev, &y, &k1, &dense, t, h);
                    on_step(&dense, t_ev, &y_ev)?;
                    return Ok(Outcome { t: t_ev, y: y_ev, steps, event: true });
                }
                g_prev = Some(g_new);
            }
            on_step(&dense, t + h, &st.y_new)?;

            t = if truncated { t_end } else { t + h };
            y = st.y_new;
            k1 = st.k[6];
            h = h_next;
        }
    }

    fn dense(&self, y: &[f64; N], st: &Stages<N>, t: f64, h: f64) -> Dense<N> {
        let mut r = [[0.0; N]; 5];
        let k = &st.k;
        for i in 0..N {
            let ydiff = st.y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        Dense { t0: t, h, r }
    }

    /// Bisection on the dense output, then a few Newton corrections using
    /// genuine Runge-Kutta substeps so the returned state carries full accuracy.
    #[allow(clippy::too_many_arguments)]
    fn locate<S: System<N>, E: Event<N>>(
        &self,
        sys: &S,
        ev: &E,
        y: &[f64; N],
        k1: &[f64; N],
        dense: &Dense<N>,
        t: f64,
        h: f64,
    ) -> (f64, [f64; N]) {
        let tol = self.event_tol * t.abs().max(1.0);
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if ev.value(&dense.eval(t + mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if mid == lo && mid == hi {
                break;
            }
        }
        let mut tau = 0.5 * (lo + hi);
        let mut y_ev = stages(sys, y, k1, tau).y_new;
        let mut g = ev.value(&y_ev);
        let delta = (1e-7 * h).max(4.0 * tol);
        for _ in 0..3 {
            let gd = (ev.value(&dense.eval(t + tau + delta)) - ev.value(&dense.eval(t + tau - delta)))
                / (2.0 * delta);
            if !(gd.abs() > 0.0) {
                break;
            }
            let cand = (tau - g / gd).clamp(0.0, h);
            let y_c = stages(sys, y, k1, cand).y_new;
            let g_c = ev.value(&y_c);
            if g_c.abs() < g.abs() {
                tau = cand;
                y_ev = y_c;
                g = g_c;
            } else {
                break;
            }
        }
        (t + tau, y_ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl System<1> for Decay {
        fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
            [-y[0]]
        }
    }

    struct Rotation;
    impl System<2> for Rotation {
        fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
            [-y[1], y[0]]
        }
    }

    fn no_event<const N: usize>() -> Option<&'static fn(&[f64; N]) -> f64> {
        None
    }

    #[test]
    fn exponential_decay() {
        let solver = Dopri5::new([1e-12], [1e-12], 100_000);
        let out = solver.run(&Decay, [1.0], 5.0, no_event(), |_, _, _| Ok(())).unwrap();
        assert!((out.y[0] - (-5.0_f64).exp()).abs() < 1e-11);
        assert_eq!(out.t, 5.0);
    }

    #[test]
    fn event_on_rotation() {
        // first upward crossing of y = 0.5 starting at (1, 0) is t = pi/6
        let solver = Dopri5::new([1e-11; 2], [1e-11; 2], 100_000);
        let ev = |y: &[f64; 2]| y[1] - 0.5;
        let out = solver
            .run(&Rotation, [1.0, 0.0], 10.0, Some(&ev), |_, _, _| Ok(()))
            .unwrap();
        assert!(out.event);
        assert!((out.t - std::f64::consts::FRAC_PI_6).abs() < 1e-10, "{}", out.t);
        assert!((out.y[0] - 0.75_f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let solver = Dopri5::new([1e-10; 2], [1e-10; 2], 100_000);
        let mut worst: f64 = 0.0;
        solver
            .run(&Rotation, [1.0, 0.0], 3.0, no_event(), |d, t_end, _| {
                for j in 1..8 {
                    let t = d.t0 + (t_end - d.t0) * j as f64 / 8.0;
                    let y = d.eval(t);
                    worst = worst.max((y[0] - t.cos()).abs()).max((y[1] - t.sin()).abs());
                }
                Ok(())
            })
            .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn fixed_step_is_fifth_order() {
        let err = |h: f64| {
            let mut s = Dopri5::new([1.0], [0.0], 1_000_000);
            s.fixed_step = Some(h);
            let out = s.run(&Decay, [1.0], 2.0, no_event(), |_, _, _| Ok(())).unwrap();
            (out.y[0] - (-2.0_f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 25.0 && ratio < 40.0, "{ratio}");
    }

    #[test]
    fn step_budget() {
        let solver = Dopri5::new([1e-12], [1e-12], 3);
        let r = solver.run(&Decay, [1.0], 100.0, no_event(), |_, _, _| Ok(()));
        assert!(matches!(r, Err(Error::MaxStepsExceeded { .. })));
    }
}
