//! Adaptive Dormand-Prince 5(4) integrator with continuous output.
//!
//! The right-hand side is autonomous: generators are piecewise constant, and
//! callers restart the integrator at every switching time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Steps shorter than this abort the run.
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.h_min >= 0.0
            && self.h_max > 0.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid integrator settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl StepStats {
    pub fn absorb(&mut self, other: StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
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

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Reusable stage buffers for one state length.
pub struct Dopri5 {
    n: usize,
    k: [Vec<C64>; 7],
    y_stage: Vec<C64>,
    y_new: Vec<C64>,
    err: Vec<C64>,
    cont: [Vec<C64>; 5],
    settings: IntegratorSettings,
    /// Step size carried between calls; `None` selects one automatically.
    pub h_hint: Option<f64>,
    pub stats: StepStats,
}

fn zero(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

impl Dopri5 {
    pub fn new(n: usize, settings: IntegratorSettings) -> Self {
        Self {
            n,
            k: std::array::from_fn(|_| zero(n)),
            y_stage: zero(n),
            y_new: zero(n),
            err: zero(n),
            cont: std::array::from_fn(|_| zero(n)),
            settings,
            h_hint: None,
            stats: StepStats::default(),
        }
    }

    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    fn scaled_rms(&self, v: &[C64], y0: &[C64], y1: Option<&[C64]>) -> f64 {
        let s = &self.settings;
        let mut acc = 0.0;
        for i in 0..self.n {
            let mag = match y1 {
                Some(y1) => y0[i].norm().max(y1[i].norm()),
                None => y0[i].norm(),
            };
            let sc = s.atol + s.rtol * mag;
            acc += v[i].norm_sqr() / (sc * sc);
        }
        (acc / self.n.max(1) as f64).sqrt()
    }

    fn initial_step<F>(&mut self, rhs: &mut F, y: &[C64], span: f64) -> f64
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        // k[0] already holds f(y)
        let d0 = self.scaled_rms(y, y, None);
        let d1 = self.scaled_rms(&self.k[0], y, None);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
        .min(span);
        for i in 0..self.n {
            self.y_stage[i] = y[i] + self.k[0][i] * h0;
        }
        rhs(&self.y_stage, &mut self.k[1]);
        self.stats.rhs_evals += 1;
        for i in 0..self.n {
            self.err[i] = self.k[1][i] - self.k[0][i];
        }
        let d2 = self.scaled_rms(&self.err, y, None) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.settings.h_max)
    }

    /// Integrates `y` from `t0` to `t1` in place.
    ///
    /// `outputs` must be sorted and lie in `[t0, t1]`; `on_output` receives
    /// each one with its index in `outputs`.
    pub fn integrate<F, O>(
        &mut self,
        mut rhs: F,
        y: &mut [C64],
        t0: f64,
        t1: f64,
        outputs: &[f64],
        mut on_output: O,
    ) -> Result<()>
    where
        F: FnMut(&[C64], &mut [C64]),
        O: FnMut(usize, f64, &[C64]),
    {
        assert_eq!(y.len(), self.n, "state length");
        let mut next_out = 0usize;
        while next_out < outputs.len() && outputs[next_out] <= t0 {
            on_output(next_out, outputs[next_out], y);
            next_out += 1;
        }
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        if y.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
            // zero stays zero under a linear generator
            for (i, &t) in outputs.iter().enumerate().skip(next_out) {
                on_output(i, t, y);
            }
            return Ok(());
        }

        rhs(y, &mut self.k[0]);
        self.stats.rhs_evals += 1;
        let mut h = match self.h_hint {
            Some(h) if h > 0.0 => h.min(span).min(self.settings.h_max),
            _ => self.initial_step(&mut rhs, y, span),
        };
        let mut t = t0;
        let mut fac_old: f64 = 1e-4;
        let mut steps = 0usize;
        let mut last_rejected = false;

        loop {
            if steps >= self.settings.max_steps {
                return Err(Error::IntegratorDiverged {
                    t,
                    reason: format!("step budget of {} exhausted", self.settings.max_steps),
                    context: None,
                });
            }
            steps += 1;
            let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
            if last {
                h = t1 - t;
            }
            if h < self.settings.h_min && !last {
                return Err(Error::IntegratorDiverged {
                    t,
                    reason: format!("step size {h:.3e} fell below {:.3e}", self.settings.h_min),
                    context: None,
                });
            }
            self.stage(&mut rhs, y, h);
            let err = self.scaled_rms(&self.err, y, Some(&self.y_new));
            if !err.is_finite() {
                if h <= self.settings.h_min {
                    return Err(Error::IntegratorDiverged {
                        t,
                        reason: "non-finite state".into(),
                        context: None,
                    });
                }
                self.stats.rejected += 1;
                h *= FAC_MIN;
                last_rejected = true;
                continue;
            }
            let fac11 = err.powf(0.2 - BETA * 0.75);
            if err <= 1.0 {
                // accepted step
                let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                fac_old = err.max(1e-4);
                self.stats.accepted += 1;
                let t_new = if last { t1 } else { t + h };
                if next_out < outputs.len() && outputs[next_out] <= t_new {
                    self.prepare_dense(y, h);
                    while next_out < outputs.len() && outputs[next_out] <= t_new {
                        let to = outputs[next_out];
                        if to >= t_new {
                            on_output(next_out, to, &self.y_new);
                        } else {
                            let theta = (to - t) / h;
                            self.interpolate(theta);
                            on_output(next_out, to, &self.y_stage);
                        }
                        next_out += 1;
                    }
                }
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                t = t_new;
                last_rejected = false;
                if last {
                    self.h_hint = Some(h_new.min(self.settings.h_max));
                    break;
                }
                h = h_new.min(self.settings.h_max);
            } else {
                self.stats.rejected += 1;
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
                last_rejected = true;
            }
        }
        for (i, &to) in outputs.iter().enumerate().skip(next_out) {
            on_output(i, to, y);
        }
        Ok(())
    }

    fn stage<F>(&mut self, rhs: &mut F, y: &[C64], h: f64)
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        let n = self.n;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ys = &mut self.y_stage;
        for i in 0..n {
            ys[i] = y[i] + k1[i] * (h * A21);
        }
        rhs(ys, k2);
        for i in 0..n {
            ys[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs(ys, k3);
        for i in 0..n {
            ys[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs(ys, k4);
        for i in 0..n {
            ys[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs(ys, k5);
        for i in 0..n {
            ys[i] = y[i]
                + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        rhs(ys, k6);
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] = y[i]
                + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        rhs(yn, k7);
        for i in 0..n {
            self.err[i] =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        self.stats.rhs_evals += 6;
    }

    fn prepare_dense(&mut self, y: &[C64], h: f64) {
        let [k1, _k2, k3, k4, k5, k6, k7] = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.cont;
        for i in 0..self.n {
            let dy = self.y_new[i] - y[i];
            let bspl = k1[i] * h - dy;
            r1[i] = y[i];
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - k7[i] * h - bspl;
            r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7)
                * h;
        }
    }

    fn interpolate(&mut self, theta: f64) {
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.cont;
        for i in 0..self.n {
            self.y_stage[i] =
                r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * theta1) * theta) * theta1) * theta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exponential_decay_and_rotation() {
        let lam = c(-0.3, 2.0);
        let mut ode = Dopri5::new(1, IntegratorSettings::default());
        let mut y = vec![c(1.0, 0.0)];
        let outs: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let mut seen = vec![c(0.0, 0.0); outs.len()];
        ode.integrate(
            |y, dy| dy[0] = lam * y[0],
            &mut y,
            0.0,
            5.0,
            &outs,
            |i, _, v| seen[i] = v[0],
        )
        .unwrap();
        for (i, &t) in outs.iter().enumerate() {
            let exact = (lam * t).exp();
            assert!((seen[i] - exact).norm() < 1e-7, "t={t} {} vs {}", seen[i], exact);
        }
        assert!((y[0] - (lam * 5.0).exp()).norm() < 1e-7);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        // y'' = -y as a first-order system; dense output between steps
        let mut ode = Dopri5::new(2, IntegratorSettings { rtol: 1e-10, atol: 1e-12, ..Default::default() });
        let mut y = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let outs: Vec<f64> = (0..199).map(|i| i as f64 * 0.0502).collect();
        let mut worst: f64 = 0.0;
        ode.integrate(
            |y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &mut y,
            0.0,
            10.0,
            &outs,
            |_, t, v| worst = worst.max((v[0].re - t.cos()).abs()),
        )
        .unwrap();
        assert!(worst < 1e-8, "worst {worst}");
    }

    #[test]
    fn zero_state_is_fixed() {
        let mut ode = Dopri5::new(3, IntegratorSettings::default());
        let mut y = vec![c(0.0, 0.0); 3];
        let mut hits = 0;
        ode.integrate(|y, dy| dy.copy_from_slice(y), &mut y, 0.0, 1.0, &[0.0, 0.5, 1.0], |_, _, _| hits += 1)
            .unwrap();
        assert_eq!(hits, 3);
        assert_eq!(ode.stats.rhs_evals, 0);
    }

    #[test]
    fn step_budget_reports_time() {
        let mut ode = Dopri5::new(1, IntegratorSettings { max_steps: 3, ..Default::default() });
        let mut y = vec![c(1.0, 0.0)];
        let err = ode
            .integrate(|y, dy| dy[0] = y[0] * c(0.0, 50.0), &mut y, 0.0, 100.0, &[], |_, _, _| {})
            .unwrap_err();
        match err {
            Error::IntegratorDiverged { t, .. } => assert!(t > 0.0 && t < 100.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn stiff_blowup_aborts() {
        let mut ode = Dopri5::new(1, IntegratorSettings { h_min: 1e-6, ..Default::default() });
        let mut y = vec![c(1.0, 0.0)];
        // finite-time blow-up y' = y² at t = 1
        let r = ode.integrate(|y, dy| dy[0] = y[0] * y[0], &mut y, 0.0, 2.0, &[], |_, _, _| {});
        assert!(matches!(r, Err(Error::IntegratorDiverged { .. })));
    }
}
