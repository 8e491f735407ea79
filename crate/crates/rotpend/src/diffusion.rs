//! Strips of guaranteed action gain, orbits of the iterated function system
//! `{f_ε, σ_ε}` and their assembly into pseudo-orbits of the full flow.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inner::{inner_map_lifted, vanishing_flow_lifted, CylinderField, InnerError};
use crate::integrate::{solve_at, ExtendedField, IntegrationError, IntegratorConfig, Trajectory};
use crate::melnikov::{
    reduced_gradient_closed, tau_star_with, MelnikovError, PhaseFunction, TauBranch, TauSearch, DEGENERACY_THRESHOLD,
    TAU_SCAN_SAMPLES,
};
use crate::model::{cylinder_energy, wrap_angle, ExtendedState, ModelParams, State, Variant};
use crate::scattering::{
    scattering_first_order, shoot_homoclinic, ReducedPoint, ScatteringError, ScatteringJump, ShootingConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("no strip: {0}")]
    NoStrip(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("the scattering map is the identity at eps = 0")]
    NoCoupling,
    #[error("step {step}: no return to the strip within k_max = {k_max} iterates from I = {action}")]
    NoReturn { step: usize, action: f64, k_max: usize },
    #[error("step {step}: net gain {gain:e} below the required {required:e}")]
    NetGainViolation { step: usize, gain: f64, required: f64 },
    #[error("step limit {0} reached before crossing the strip")]
    StepLimit(usize),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Melnikov(#[from] MelnikovError),
    #[error(transparent)]
    Inner(#[from] InnerError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

/// Linear predictor of the channel phase `τ*` over a strip, used as the
/// branch anchor everywhere inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPredictor {
    pub center: (f64, f64),
    pub tau_center: f64,
    pub d_theta: f64,
    pub d_action: f64,
}

impl ChannelPredictor {
    pub fn anchor(&self, action: f64, theta_bar: f64) -> f64 {
        self.tau_center + self.d_theta * (theta_bar - self.center.1) + self.d_action * (action - self.center.0)
    }

    pub fn branch(&self, action: f64, theta_bar: f64) -> TauBranch {
        TauBranch::Anchor(self.anchor(action, theta_bar))
    }
}

/// Rectangle on which a strip is sought.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripSearch {
    /// Full action extent; the strip proper is inset by `margin`.
    pub action_extent: (f64, f64),
    pub theta_range: (f64, f64),
    pub margin: f64,
    /// Grid points per side.
    pub grid: usize,
    pub t0: f64,
}

impl Default for StripSearch {
    fn default() -> Self {
        Self {
            action_extent: (1.08, 1.45),
            theta_range: (3.7, 5.5),
            margin: 0.02,
            grid: 15,
            t0: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    /// `[I1, I2]`.
    pub action_range: (f64, f64),
    pub action_extent: (f64, f64),
    pub theta_range: (f64, f64),
    /// Minimum of `∂𝓛*_ρ/∂θ̄` over the grid.
    pub c: f64,
    pub d_max: f64,
    pub k_max: usize,
    pub t0: f64,
    pub channel: ChannelPredictor,
}

impl StripSpec {
    pub fn contains_angle(&self, theta: f64) -> bool {
        let t = wrap_angle(theta);
        (self.theta_range.0..=self.theta_range.1).contains(&t)
    }
}

/// `ceil(T0 log(1/ε) / 2π)`.
pub fn return_cap(t0: f64, eps: f64) -> usize {
    (t0 * (1.0 / eps).ln() / TAU).ceil() as usize
}

/// `c / (2 d_eff T0)`.
pub fn rho_bar_bound(c: f64, d_eff: f64, t0: f64) -> Result<f64, DiffusionError> {
    if !(c > 0.0 && d_eff > 0.0 && t0 > 0.0) {
        return Err(DiffusionError::Invalid(format!(
            "rho_bar bound needs positive inputs, got c={c}, d={d_eff}, T0={t0}"
        )));
    }
    Ok(c / (2.0 * d_eff * t0))
}

fn grid_points(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    })
}

/// Most nondegenerate critical phase at the centre of the rectangle among
/// those with `∂𝓛*_ρ/∂θ̄ > 0`.
fn gaining_channel(action: f64, theta_bar: f64, params: &ModelParams) -> Option<f64> {
    let f = PhaseFunction::new(action, theta_bar, 0.0, params);
    let half = std::f64::consts::PI * (1.0 + 1.0 / action);
    f.critical_phases(-half, half, TAU_SCAN_SAMPLES)
        .into_iter()
        .filter(|&t| reduced_gradient_closed(action, theta_bar, t, params).d_angle > 0.0)
        .map(|t| (t, f.curvature(t).abs()))
        .filter(|&(_, nd)| nd >= DEGENERACY_THRESHOLD)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t)
}

/// `(I, θ̄, τ, ∂θ̄L*)` at one grid node.
type ChannelSample = (f64, f64, f64, f64);

/// Gradient of the reduced potential on a grid, following one channel by
/// continuation from the centre of the rectangle.
fn channel_grid(
    search: &StripSearch,
    params: &ModelParams,
) -> Result<(ChannelPredictor, Vec<ChannelSample>), DiffusionError> {
    let (ia, ib) = search.action_extent;
    let (ta, tb) = search.theta_range;
    let center = (0.5 * (ia + ib), 0.5 * (ta + tb));
    let tau_c = gaining_channel(center.0, center.1, params)
        .ok_or_else(|| DiffusionError::NoStrip("no critical phase at the centre of the rectangle".into()))?;
    let n = search.grid.max(2);
    let actions: Vec<f64> = grid_points(ia, ib, n).collect();
    let thetas: Vec<f64> = grid_points(ta, tb, n).collect();
    // walk outwards column by column so each anchor comes from a neighbour
    let mid = n / 2;
    let order: Vec<usize> = (0..=mid).rev().chain(mid + 1..n).collect();
    let mut taus = vec![vec![f64::NAN; n]; n];
    let mut start = tau_c;
    for (pos, &j) in order.iter().enumerate() {
        if pos > 0 && j == mid + 1 {
            start = taus[mid][mid];
        }
        let mut anchor = start;
        for (step, &i) in order.iter().enumerate() {
            if step > 0 && i == mid + 1 {
                anchor = taus[mid][j];
            }
            let c = tau_star_with(actions[i], thetas[j], 0.0, params, TauSearch::anchored(anchor)).map_err(|e| {
                DiffusionError::NoStrip(format!("channel lost at I={}, theta={}: {e}", actions[i], thetas[j]))
            })?;
            taus[i][j] = c.tau;
            anchor = c.tau;
        }
        start = taus[mid][j];
    }
    let mut samples = Vec::with_capacity(n * n);
    for (i, &a) in actions.iter().enumerate() {
        for (j, &t) in thetas.iter().enumerate() {
            let g = reduced_gradient_closed(a, t, taus[i][j], params);
            samples.push((a, t, taus[i][j], g.d_angle));
        }
    }
    Ok((fit_predictor(center, &samples), samples))
}

/// Least-squares plane through the sampled phases.
fn fit_predictor(center: (f64, f64), samples: &[(f64, f64, f64, f64)]) -> ChannelPredictor {
    use nalgebra::{Matrix3, Vector3};
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(a, t, tau, _) in samples {
        let row = Vector3::new(1.0, t - center.1, a - center.0);
        ata += row * row.transpose();
        atb += row * tau;
    }
    let x = ata.lu().solve(&atb).unwrap_or_else(Vector3::zeros);
    ChannelPredictor {
        center,
        tau_center: x[0],
        d_theta: x[1],
        d_action: x[2],
    }
}

/// Measure the strip over the search rectangle for the given parameters.
pub fn build_strip(params: &ModelParams, search: &StripSearch) -> Result<StripSpec, DiffusionError> {
    if !params.has_transverse_coupling() {
        return Err(DiffusionError::NoStrip(
            "a10 * a01 = 0 leaves no transverse channel".into(),
        ));
    }
    let (ia, ib) = search.action_extent;
    let (i1, i2) = (ia + search.margin, ib - search.margin);
    if !(i1 < params.omega_star && params.omega_star < i2) {
        return Err(DiffusionError::NoStrip(format!(
            "omega_star = {} is not inside [{i1}, {i2}]",
            params.omega_star
        )));
    }
    if !(search.theta_range.0 < search.theta_range.1 && search.t0 > 0.0) {
        return Err(DiffusionError::Invalid("empty angle range or non-positive T0".into()));
    }
    let (channel, samples) = channel_grid(search, params)?;
    let c = samples.iter().map(|s| s.3).fold(f64::INFINITY, f64::min);
    if !(c > 0.0) {
        return Err(DiffusionError::NoStrip(format!(
            "minimum reduced gradient {c:e} is not positive"
        )));
    }
    let d_max = (ia - params.omega_star).abs().max((ib - params.omega_star).abs());
    let k_max = if params.eps > 0.0 {
        return_cap(search.t0, params.eps)
    } else {
        0
    };
    Ok(StripSpec {
        action_range: (i1, i2),
        action_extent: search.action_extent,
        theta_range: search.theta_range,
        c,
        d_max,
        k_max,
        t0: search.t0,
        channel,
    })
}

/// One application of `f_ε^k ∘ σ_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroStep {
    /// Unreduced `(I, θ)` before the jump, on the section.
    pub start: (f64, f64),
    pub jump: ScatteringJump,
    pub iterates: usize,
    /// Unreduced `(I, θ)` after the inner iterates.
    pub end: (f64, f64),
    /// Section time of the jump.
    pub time: f64,
    pub gain: f64,
    pub inner_loss: f64,
    pub loss_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsOrbit {
    pub start: (f64, f64),
    pub steps: Vec<MacroStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub i_start: f64,
    pub i_end: f64,
    pub i1: f64,
    pub i2: f64,
    pub omega_star: f64,
    pub crossed_omega_star: bool,
    pub macro_steps: usize,
    /// Flow segments of the assembled pseudo-orbit, the initial point included.
    pub segments: usize,
    pub gaps: Vec<f64>,
    pub gap_constant: f64,
    pub gap_bound: f64,
    pub wall_model_time: f64,
    /// `T ε / log(1/ε)`.
    pub time_scaling: f64,
    pub net_gain_per_step: Vec<f64>,
    pub required_gain: f64,
    pub iterates_per_step: Vec<usize>,
    pub max_iterates: usize,
    pub k_max: usize,
    pub c: f64,
    pub d_max: f64,
    pub eps: f64,
    pub rho_bar: f64,
    pub max_inner_loss_excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffuseOptions {
    /// Reduced angle of the starting point; the action starts at the lower extent.
    pub theta_start: f64,
    pub max_steps: usize,
    /// Gap bound `δ(ε) = gap_constant · ε`.
    pub gap_constant: f64,
}

impl Default for DiffuseOptions {
    fn default() -> Self {
        Self {
            theta_start: 3.9,
            max_steps: 100_000,
            gap_constant: 10.0,
        }
    }
}

/// Monitored functional: the action, or the energy when the coupling acts on the cylinder.
fn monitored(action: f64, angle: f64, params: &ModelParams) -> f64 {
    match params.variant {
        Variant::Vanishing => action,
        Variant::NonVanishing => cylinder_energy(action, angle, params),
    }
}

/// Run the IFS orbit across the strip.
pub fn diffuse(
    params: &ModelParams,
    strip: &StripSpec,
    opts: &DiffuseOptions,
    cfg: &IntegratorConfig,
) -> Result<(IfsOrbit, DiffusionReport), DiffusionError> {
    if params.eps == 0.0 {
        return Err(DiffusionError::NoCoupling);
    }
    let k_max = return_cap(strip.t0, params.eps);
    let required = 0.5 * strip.c * params.eps;
    let decay = (-TAU * params.lambda()).exp();
    let (i_lo, _) = strip.action_extent;
    let (_, i2) = strip.action_range;
    let (mut action, mut angle) = (i_lo, opts.theta_start);
    let start = (action, angle);
    let mut steps = Vec::new();
    let mut time = 0.0;
    while action <= i2 {
        let n = steps.len();
        if n >= opts.max_steps {
            return Err(DiffusionError::StepLimit(n));
        }
        let theta_bar = wrap_angle(angle);
        let mut jump = scattering_first_order(
            &ReducedPoint::new(action, theta_bar),
            params,
            strip.channel.branch(action, theta_bar),
        )?;
        // keep the lift continuous
        jump.before.theta_bar = angle;
        jump.after.theta_bar = angle + jump.d_theta;
        let (mut j_i, mut j_th) = (jump.after.action, jump.after.theta_bar);
        let peak = j_i;
        let mut k = 0;
        loop {
            (j_i, j_th) = inner_map_lifted(j_i, j_th, params, cfg)?;
            k += 1;
            if strip.contains_angle(j_th) {
                break;
            }
            if k >= k_max {
                return Err(DiffusionError::NoReturn { step: n, action, k_max });
            }
        }
        let gain = monitored(j_i, j_th, params) - monitored(action, angle, params);
        if gain < required {
            return Err(DiffusionError::NetGainViolation {
                step: n,
                gain,
                required,
            });
        }
        steps.push(MacroStep {
            start: (action, angle),
            jump,
            iterates: k,
            end: (j_i, j_th),
            time,
            gain,
            inner_loss: peak - j_i,
            loss_bound: strip.d_max * (1.0 - decay.powi(k as i32)),
        });
        time += TAU * k as f64;
        (action, angle) = (j_i, j_th);
    }
    let orbit = IfsOrbit { start, steps };
    let report = summarize(&orbit, params, strip, opts, k_max, required);
    Ok((orbit, report))
}

fn summarize(
    orbit: &IfsOrbit,
    params: &ModelParams,
    strip: &StripSpec,
    opts: &DiffuseOptions,
    k_max: usize,
    required: f64,
) -> DiffusionReport {
    let steps = &orbit.steps;
    let i_end = steps.last().map_or(orbit.start.0, |s| s.end.0);
    let wall = steps.iter().map(|s| TAU * s.iterates as f64).sum::<f64>();
    let iterates: Vec<usize> = steps.iter().map(|s| s.iterates).collect();
    DiffusionReport {
        i_start: orbit.start.0,
        i_end,
        i1: strip.action_range.0,
        i2: strip.action_range.1,
        omega_star: params.omega_star,
        crossed_omega_star: orbit.start.0 < params.omega_star && i_end > params.omega_star,
        macro_steps: steps.len(),
        segments: steps.len() + 1,
        gaps: steps.iter().map(|s| s.jump.d_action.hypot(s.jump.d_theta)).collect(),
        gap_constant: opts.gap_constant,
        gap_bound: opts.gap_constant * params.eps,
        wall_model_time: wall,
        time_scaling: wall * params.eps / (1.0 / params.eps).ln(),
        net_gain_per_step: steps.iter().map(|s| s.gain).collect(),
        required_gain: required,
        max_iterates: iterates.iter().copied().max().unwrap_or(0),
        iterates_per_step: iterates,
        k_max,
        c: strip.c,
        d_max: strip.d_max,
        eps: params.eps,
        rho_bar: params.rho_bar,
        max_inner_loss_excess: steps
            .iter()
            .map(|s| s.inner_loss - s.loss_bound)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleOptions {
    /// Samples per period `2π` on inner segments.
    pub samples_per_period: usize,
    /// Maximum number of jumps re-realised by a shot homoclinic orbit; the
    /// earliest eligible jumps are used.
    pub splice_limit: usize,
    pub shooting: ShootingConfig,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            samples_per_period: 16,
            splice_limit: 0,
            shooting: ShootingConfig::default(),
        }
    }
}

/// Outcome of trying to splice one jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceRecord {
    pub step: usize,
    pub spliced: bool,
    pub reason: Option<String>,
}

fn nhim_state(action: f64, angle: f64, s: f64) -> ExtendedState {
    ExtendedState::new(State::on_cylinder(action, angle), s)
}

/// Samples of the inner orbit of `(I, θ)` at section time `t_start` over
/// `[t_from, t_to]` relative to `t_start`.
fn inner_samples(
    (action, angle): (f64, f64),
    t_start: f64,
    (t_from, t_to): (f64, f64),
    dt: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<ExtendedState>), DiffusionError> {
    let n = ((t_to - t_from) / dt).ceil().max(0.0) as usize;
    let rel: Vec<f64> = (0..=n)
        .map(|k| if k == n { t_to } else { t_from + k as f64 * dt })
        .collect();
    let states = match params.variant {
        Variant::Vanishing => rel
            .iter()
            .map(|&t| {
                let (i, th) = vanishing_flow_lifted(action, angle, t, params);
                nhim_state(i, th, t_start + t)
            })
            .collect(),
        Variant::NonVanishing => {
            let ys = solve_at(&CylinderField(params), 0.0, [action, angle, t_start], &rel, cfg)?;
            ys.iter().map(|y| nhim_state(y[0], y[1], y[2])).collect()
        }
    };
    Ok((rel.iter().map(|t| t_start + t).collect(), states))
}

/// Find the homoclinic orbit whose backward footpoint is `target` by a
/// Newton iteration on the seed point of the channel.
fn homoclinic_through(
    target: (f64, f64),
    params: &ModelParams,
    channel: &ChannelPredictor,
    cfg: &ShootingConfig,
) -> Result<crate::scattering::HomoclinicOrbit, DiffusionError> {
    let shoot = |x: &[f64]| -> Result<crate::scattering::HomoclinicOrbit, DiffusionError> {
        let search = TauSearch {
            branch: channel.branch(x[0], wrap_angle(x[1])),
            ..TauSearch::default()
        };
        let crit = tau_star_with(x[0], x[1], 0.0, params, search)?;
        Ok(shoot_homoclinic(x[0], x[1], 0.0, crit.tau, params, cfg)?)
    };
    let mut seed = [target.0, target.1];
    for _ in 0..8 {
        let orbit = shoot(&seed)?;
        let r = [orbit.minus.0 - target.0, orbit.minus.1 - target.1];
        if r[0].hypot(r[1]) < 1e-11 {
            return Ok(orbit);
        }
        let jac = crate::integrate::try_jacobian_fd(|x| shoot(x).map(|o| vec![o.minus.0, o.minus.1]), &seed, 1e-6)?;
        let m = nalgebra::Matrix2::new(jac[(0, 0)], jac[(0, 1)], jac[(1, 0)], jac[(1, 1)]);
        let step = m
            .lu()
            .solve(&nalgebra::Vector2::new(r[0], r[1]))
            .ok_or_else(|| DiffusionError::Invalid("singular footpoint Jacobian".into()))?;
        seed[0] -= step[0];
        seed[1] -= step[1];
    }
    Err(DiffusionError::Invalid("footpoint matching did not converge".into()))
}

/// Assemble the full-space pseudo-orbit: the starting point, then for each
/// macro-step a jump followed by a sampled inner segment.
pub fn assemble_pseudo_orbit(
    orbit: &IfsOrbit,
    params: &ModelParams,
    strip: &StripSpec,
    opts: &AssembleOptions,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, Vec<SpliceRecord>), DiffusionError> {
    let dt = TAU / opts.samples_per_period.max(1) as f64;
    let horizon = opts
        .shooting
        .homoclinic_time
        .unwrap_or_else(|| crate::scattering::default_homoclinic_time(params.eps));
    let mut traj = Trajectory::default();
    traj.push_segment(&[0.0], &[nhim_state(orbit.start.0, orbit.start.1, 0.0)]);
    let mut records = Vec::new();
    let mut prev_spliced = false;
    for (n, step) in orbit.steps.iter().enumerate() {
        let duration = TAU * step.iterates as f64;
        let mut skip = 0.0;
        let mut spliced = false;
        // the previous segment donates its last `horizon`, twice if it was spliced too
        let needed = if prev_spliced { 2.0 * horizon } else { horizon };
        let eligible = n > 0 && TAU * orbit.steps[n - 1].iterates as f64 >= needed && duration >= horizon;
        if eligible && records.iter().filter(|r: &&SpliceRecord| r.spliced).count() < opts.splice_limit {
            let mut record = SpliceRecord {
                step: n,
                spliced: false,
                reason: None,
            };
            match homoclinic_through(step.start, params, &strip.channel, &opts.shooting) {
                Ok(h) => {
                    let entry = inner_samples(step.start, step.time, (-horizon, -horizon), dt, params, cfg)?;
                    splice(
                        &mut traj,
                        step.time,
                        horizon,
                        entry,
                        &h.point,
                        dt,
                        params,
                        &opts.shooting.integrator,
                    )?;
                    record.spliced = true;
                    spliced = true;
                    skip = horizon;
                }
                Err(e) => record.reason = Some(e.to_string()),
            }
            records.push(record);
        }
        let (times, states) = inner_samples(
            (step.jump.after.action, step.jump.after.theta_bar),
            step.time,
            (skip, duration),
            dt,
            params,
            cfg,
        )?;
        traj.push_segment(&times, &states);
        prev_spliced = spliced;
    }
    Ok((traj, records))
}

/// Replace the tail of the current inner segment by a homoclinic excursion
/// through `point` centred on `t_jump`. `entry` is the inner state at
/// `t_jump - horizon` that closes the shortened segment.
#[allow(clippy::too_many_arguments)]
fn splice(
    traj: &mut Trajectory,
    t_jump: f64,
    horizon: f64,
    entry: (Vec<f64>, Vec<ExtendedState>),
    point: &[f64; 5],
    dt: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<(), DiffusionError> {
    let keep = traj
        .times
        .iter()
        .rposition(|&t| t <= t_jump - horizon)
        .map_or(0, |i| i + 1);
    let seg = *traj.segment_ids.last().unwrap_or(&0);
    let seg_start = traj.segment_ids.iter().position(|&s| s == seg).unwrap_or(0);
    let keep = keep.max(seg_start + 1);
    traj.times.truncate(keep);
    traj.states.truncate(keep);
    traj.segment_ids.truncate(keep);
    traj.jumps.retain(|j| j.index < keep);
    if let (Some(&t), Some(z)) = (entry.0.first(), entry.1.first()) {
        if traj.times.last().is_some_and(|&last| last < t) {
            traj.times.push(t);
            traj.states.push(*z);
            traj.segment_ids.push(seg);
        }
    }
    let n = (2.0 * horizon / dt).ceil() as usize;
    let rel: Vec<f64> = (0..=n)
        .map(|k| -horizon + 2.0 * horizon * k as f64 / n as f64)
        .collect();
    let (bwd, fwd): (Vec<f64>, Vec<f64>) = rel.iter().partition(|&&t| t < 0.0);
    let field = ExtendedField(params);
    let mut ys: Vec<[f64; 5]> = solve_at(&field, 0.0, *point, &bwd.iter().rev().copied().collect::<Vec<_>>(), cfg)?;
    ys.reverse();
    ys.extend(solve_at(&field, 0.0, *point, &fwd, cfg)?);
    let states: Vec<ExtendedState> = ys
        .iter()
        .map(|y| {
            let mut z = ExtendedState::from_array(y);
            z.s = wrap_angle(y[4] + t_jump);
            z
        })
        .collect();
    let times: Vec<f64> = rel.iter().map(|t| t + t_jump).collect();
    traj.push_segment(&times, &states);
    Ok(())
}
