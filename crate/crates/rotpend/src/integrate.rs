//! Adaptive Dormand–Prince 5(4) integration, the time-2π stroboscopic map and
//! finite-difference Jacobians.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{vector_field, ExtendedState, ModelParams, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64, last_state: Vec<f64> },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps {
        t: f64,
        max_steps: usize,
        last_state: Vec<f64>,
    },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64, last_state: Vec<f64> },
    #[error("invalid integrator configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on |h|; `f64::INFINITY` means unbounded.
    pub max_step: f64,
    /// Sample trajectories on a uniform grid with the continuous extension
    /// instead of at the accepted steps.
    pub dense_output: bool,
    /// Grid spacing used when `dense_output` is set.
    pub output_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            dense_output: false,
            output_step: 0.05,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(IntegrationError::Config("tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(IntegrationError::Config("max_step must be positive"));
        }
        if self.dense_output && !(self.output_step > 0.0 && self.output_step.is_finite()) {
            return Err(IntegrationError::Config("output_step must be positive"));
        }
        Ok(())
    }
}

/// An autonomous or time-dependent first-order system of fixed dimension.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]> OdeSystem<N> for F {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

/// The perturbed rotator–pendulum field in unreduced coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedField<'a>(pub &'a ModelParams);

impl OdeSystem<5> for ExtendedField<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 5]) -> [f64; 5] {
        vector_field(y, self.0)
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
// continuous extension of order 4
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// step-size control
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

/// Interpolation data for one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coef: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coef;
        std::array::from_fn(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
    }
}

/// Stateful Dormand–Prince stepper. Works in either time direction.
pub struct DormandPrince<'a, S, const N: usize> {
    sys: &'a S,
    cfg: IntegratorConfig,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    err_old: f64,
    steps: usize,
    last: Option<DenseStep<N>>,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

impl<'a, S: OdeSystem<N>, const N: usize> DormandPrince<'a, S, N> {
    pub fn new(sys: &'a S, t0: f64, y0: [f64; N], cfg: IntegratorConfig) -> Result<Self, IntegrationError> {
        cfg.validate()?;
        let k1 = sys.rhs(t0, &y0);
        Ok(Self {
            sys,
            cfg,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            err_old: 1e-4,
            steps: 0,
            last: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Dense data of the most recent accepted step.
    pub fn last_step(&self) -> Option<&DenseStep<N>> {
        self.last.as_ref()
    }

    fn scale(&self, a: &[f64; N], b: &[f64; N]) -> [f64; N] {
        std::array::from_fn(|i| self.cfg.abs_tol + self.cfg.rel_tol * a[i].abs().max(b[i].abs()))
    }

    fn rms(v: &[f64; N], sc: &[f64; N]) -> f64 {
        (v.iter().zip(sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt()
    }

    /// Initial step heuristic (Hairer, Nørsett & Wanner).
    fn initial_step(&self, dir: f64) -> f64 {
        let sc = self.scale(&self.y, &self.y);
        let d0 = Self::rms(&self.y, &sc);
        let d1 = Self::rms(&self.k1, &sc);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.cfg.max_step);
        let y1 = axpy(&self.y, dir * h0, &[(1.0, &self.k1)]);
        let k2 = self.sys.rhs(self.t + dir * h0, &y1);
        let diff: [f64; N] = std::array::from_fn(|i| k2[i] - self.k1[i]);
        let d2 = Self::rms(&diff, &sc) / h0;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / m).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.cfg.max_step)
    }

    /// Take one accepted step toward `t_end` without overshooting it.
    pub fn step_toward(&mut self, t_end: f64) -> Result<&DenseStep<N>, IntegrationError> {
        let span = t_end - self.t;
        let dir = if span >= 0.0 { 1.0 } else { -1.0 };
        if self.h == 0.0 {
            self.h = self.initial_step(dir);
        }
        let mut h = self.h.abs().min(self.cfg.max_step);
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(IntegrationError::TooManySteps {
                    t: self.t,
                    max_steps: self.cfg.max_steps,
                    last_state: self.y.to_vec(),
                });
            }
            let mut last = false;
            if h >= span.abs() {
                h = span.abs();
                last = true;
            }
            if h < 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(IntegrationError::StepUnderflow {
                    t: self.t,
                    h,
                    last_state: self.y.to_vec(),
                });
            }
            let hs = dir * h;
            let (t, y, k1) = (self.t, &self.y, &self.k1);
            let k2 = self.sys.rhs(t + C2 * hs, &axpy(y, hs, &[(A21, k1)]));
            let k3 = self.sys.rhs(t + C3 * hs, &axpy(y, hs, &[(A31, k1), (A32, &k2)]));
            let k4 = self
                .sys
                .rhs(t + C4 * hs, &axpy(y, hs, &[(A41, k1), (A42, &k2), (A43, &k3)]));
            let k5 = self.sys.rhs(
                t + C5 * hs,
                &axpy(y, hs, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = self.sys.rhs(
                t + hs,
                &axpy(y, hs, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(y, hs, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(IntegrationError::NonFinite {
                    t,
                    last_state: y.to_vec(),
                });
            }
            let k7 = self.sys.rhs(t + hs, &y_new);
            let err_vec: [f64; N] = std::array::from_fn(|i| {
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            });
            let err = Self::rms(&err_vec, &self.scale(y, &y_new));
            // PI controller
            let fac11 = err.powf(0.2 - 0.75 * PI_BETA);
            if err <= 1.0 {
                let fac = (fac11 / self.err_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
                let bspl: [f64; N] = std::array::from_fn(|i| hs * k1[i] - ydiff[i]);
                let coef = [
                    *y,
                    ydiff,
                    bspl,
                    std::array::from_fn(|i| ydiff[i] - hs * k7[i] - bspl[i]),
                    std::array::from_fn(|i| {
                        hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                    }),
                ];
                self.last = Some(DenseStep { t0: t, h: hs, coef });
                self.err_old = err.max(1e-4);
                self.t = if last { t_end } else { t + hs };
                self.y = y_new;
                self.k1 = k7;
                self.steps += 1;
                // a step clipped to land on t_end must not shrink the next proposal
                self.h = if last { (h / fac).max(self.h.abs()) } else { h / fac };
                return Ok(self.last.as_ref().unwrap());
            }
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            self.steps += 1;
        }
    }

    /// Integrate up to `t_end`, returning the final state.
    pub fn advance_to(&mut self, t_end: f64) -> Result<[f64; N], IntegrationError> {
        while self.t != t_end {
            self.step_toward(t_end)?;
        }
        Ok(self.y)
    }

    /// Integrate through the ordered `times` (monotone in the direction of
    /// integration), evaluating the continuous extension at each.
    pub fn sample(&mut self, times: &[f64]) -> Result<Vec<[f64; N]>, IntegrationError> {
        let mut out = Vec::with_capacity(times.len());
        let Some(&t_end) = times.last() else { return Ok(out) };
        let forward = t_end >= self.t;
        let mut idx = 0;
        while idx < times.len() && times[idx] == self.t {
            out.push(self.y);
            idx += 1;
        }
        while idx < times.len() {
            let step = *self.step_toward(t_end)?;
            let reached = |t: f64| if forward { t <= step.t1() } else { t >= step.t1() };
            while idx < times.len() && reached(times[idx]) {
                out.push(if times[idx] == self.t {
                    self.y
                } else {
                    step.eval(times[idx])
                });
                idx += 1;
            }
        }
        Ok(out)
    }
}

/// Integrate `sys` from `(t0, y0)` to `t1`.
pub fn solve_to<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<[f64; N], IntegrationError> {
    DormandPrince::new(sys, t0, y0, *cfg)?.advance_to(t1)
}

/// States at each of the monotone `times`, starting from `(t0, y0)`.
pub fn solve_at<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<[f64; N]>, IntegrationError> {
    DormandPrince::new(sys, t0, y0, *cfg)?.sample(times)
}

/// Marks a discontinuity inside a [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMarker {
    /// Index of the first sample after the jump.
    pub index: usize,
    /// Distance between samples `index - 1` and `index`.
    pub gap: f64,
}

/// Timestamped samples grouped into continuous segments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    pub segment_ids: Vec<usize>,
    pub jumps: Vec<JumpMarker>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.segment_ids.last().map_or(0, |s| s + 1)
    }

    /// Append a continuous segment. A jump marker is recorded against the
    /// previous segment unless this is the first one.
    pub fn push_segment(&mut self, times: &[f64], states: &[ExtendedState]) {
        assert_eq!(times.len(), states.len());
        if times.is_empty() {
            return;
        }
        let id = self.segment_count();
        if let Some(prev) = self.states.last() {
            let gap = prev.distance(&states[0]);
            self.jumps.push(JumpMarker {
                index: self.times.len(),
                gap,
            });
        }
        self.times.extend_from_slice(times);
        self.states.extend_from_slice(states);
        self.segment_ids.extend(std::iter::repeat_n(id, times.len()));
    }

    pub fn first(&self) -> Option<&ExtendedState> {
        self.states.first()
    }

    pub fn last(&self) -> Option<&ExtendedState> {
        self.states.last()
    }

    pub fn max_gap(&self) -> f64 {
        self.jumps.iter().map(|j| j.gap).fold(0.0, f64::max)
    }
}

/// Integrate the extended system over `t_span`, recording either every
/// accepted step or a uniform dense-output grid.
pub fn integrate(
    z0: &ExtendedState,
    t_span: (f64, f64),
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationError> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(IntegrationError::Config("time span must be finite"));
    }
    let field = ExtendedField(params);
    let mut stepper = DormandPrince::new(&field, t0, z0.to_array(), *cfg)?;
    let mut times = vec![t0];
    let mut raw = vec![z0.to_array()];
    if cfg.dense_output {
        let n = ((t1 - t0).abs() / cfg.output_step).ceil().max(1.0) as usize;
        let grid: Vec<f64> = (1..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
        raw.extend(stepper.sample(&grid)?);
        times.extend(grid);
    } else {
        while stepper.time() != t1 {
            stepper.step_toward(t1)?;
            times.push(stepper.time());
            raw.push(*stepper.state());
        }
    }
    let states: Vec<ExtendedState> = raw.iter().map(ExtendedState::from_array).collect();
    let mut traj = Trajectory::default();
    if t1 < t0 {
        times.reverse();
        let mut states = states;
        states.reverse();
        traj.push_segment(&times, &states);
    } else {
        traj.push_segment(&times, &states);
    }
    Ok(traj)
}

/// Time-2π map of the full flow started on the section `s = s0`.
pub fn stroboscopic_map(
    z: &State,
    s0: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<State, IntegrationError> {
    let y = stroboscopic_map_lifted(&ExtendedState::new(*z, s0).to_array(), params, cfg)?;
    Ok(State::new(y[0], y[1], y[2], y[3]))
}

/// Time-2π map on unreduced coordinates `[p, q, I, theta, s]`.
pub fn stroboscopic_map_lifted(
    y: &[f64; 5],
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<[f64; 5], IntegrationError> {
    solve_to(&ExtendedField(params), 0.0, *y, TAU, cfg)
}

/// Central-difference Jacobian of `map` at `x` with component step `h`.
pub fn jacobian_fd<F>(mut map: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    try_jacobian_fd(|z| Ok::<_, std::convert::Infallible>(map(z)), x, h).unwrap_or_else(|e| match e {})
}

/// Fallible variant of [`jacobian_fd`].
pub fn try_jacobian_fd<F, E>(mut map: F, x: &[f64], h: f64) -> Result<DMatrix<f64>, E>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, E>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = map(&xp)?;
        xp[j] = x[j] - h;
        let fm = map(&xp)?;
        xp[j] = x[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(m, n, |i, j| cols[j][i]))
}

/// Eigenvalues of a real 2×2 matrix as (re, im) pairs, larger real part first.
pub fn eigenvalues_2x2(m: &DMatrix<f64>) -> [(f64, f64); 2] {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = a + d;
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        let hi = 0.5 * tr + r;
        // det / hi avoids cancellation in the smaller root
        let det = a * d - b * c;
        let lo = if hi != 0.0 { det / hi } else { 0.5 * tr - r };
        [(hi, 0.0), (lo, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [(0.5 * tr, r), (0.5 * tr, -r)]
    }
}
