//! Scattering map on the cylinder: the first-order formula generated by the
//! reduced potential, and a direct realisation by shooting homoclinic orbits.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inner::{inner_flow_lifted, relaxation_time, InnerError};
use crate::integrate::{solve_at, try_jacobian_fd, ExtendedField, IntegrationError, IntegratorConfig};
use crate::melnikov::{reduced_potential, tau_star_with, MelnikovError, TauBranch, TauSearch};
use crate::model::{cylinder_energy, separatrix, ModelParams, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error(transparent)]
    Melnikov(#[from] MelnikovError),
    #[error("shooting did not converge after {iterations} Newton steps (last correction {step:e})")]
    ShootingDivergence { iterations: usize, step: f64 },
    #[error("footpoint fit residual {residual:e} exceeds tolerance {tol:e}")]
    FootpointFit { residual: f64, tol: f64 },
    #[error("homoclinic integration failed: {0}")]
    Integration(#[from] IntegrationError),
    #[error("inner flow failed: {0}")]
    Inner(#[from] InnerError),
}

/// A point `(I, θ̄)` of the cylinder in the reduced angle `θ̄ = θ - I s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub action: f64,
    pub theta_bar: f64,
}

impl ReducedPoint {
    pub fn new(action: f64, theta_bar: f64) -> Self {
        Self { action, theta_bar }
    }

    /// Rotator angle at clock phase `s`.
    pub fn angle_at(&self, s: f64) -> f64 {
        self.theta_bar + self.action * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FirstOrder,
    Shooting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringJump {
    pub before: ReducedPoint,
    pub after: ReducedPoint,
    pub d_action: f64,
    pub d_theta: f64,
    pub d_energy: f64,
    pub method: Method,
    /// Half-length of the homoclinic excursion; shooting only.
    pub homoclinic_time: Option<f64>,
    /// Footpoint fit residual; shooting only.
    pub residual: Option<f64>,
    pub tau_star: f64,
}

/// First-order scattering map `z ↦ z - ε J ∇𝓛*_ρ(z)`.
pub fn scattering_first_order(
    z: &ReducedPoint,
    params: &ModelParams,
    branch: TauBranch,
) -> Result<ScatteringJump, ScatteringError> {
    let (_, grad, crit) = reduced_potential(z.action, z.theta_bar, params, branch)?;
    let d_action = params.eps * grad.d_angle;
    let d_theta = -params.eps * grad.d_action;
    Ok(ScatteringJump {
        before: *z,
        after: ReducedPoint::new(z.action + d_action, z.theta_bar + d_theta),
        d_action,
        d_theta,
        d_energy: z.action * d_action,
        method: Method::FirstOrder,
        homoclinic_time: None,
        residual: None,
        tau_star: crit.tau,
    })
}

/// `ceil(log(1/ε)) + 5`, or 10 when `ε = 0`.
pub fn default_homoclinic_time(eps: f64) -> f64 {
    if eps > 0.0 {
        (1.0 / eps).ln().ceil() + 5.0
    } else {
        10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Defaults to [`default_homoclinic_time`].
    pub homoclinic_time: Option<f64>,
    pub integrator: IntegratorConfig,
    pub max_newton: usize,
    /// Convergence threshold on the Newton correction.
    pub newton_tol: f64,
    /// Start of the fitted tail as a fraction of the homoclinic time.
    pub tail_fraction: f64,
    pub tail_samples: usize,
    /// Fit residual tolerance in units of `ε²`.
    pub residual_factor: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            homoclinic_time: None,
            integrator: IntegratorConfig::default().with_tolerances(1e-12, 1e-13),
            max_newton: 40,
            newton_tol: 1e-12,
            tail_fraction: 0.6,
            tail_samples: 40,
            residual_factor: 10.0,
        }
    }
}

/// Relative singular-value cutoff used before the final horizon.
const CONTINUATION_CUTOFF: f64 = 0.1;

/// Floor on the fit tolerance so that `ε = 0` is testable at rounding level.
const MIN_FIT_TOL: f64 = 1e-10;

/// A converged homoclinic orbit and its two footpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicOrbit {
    /// `[p, q, I, θ, s]` at the section time 0, unreduced angles.
    pub point: [f64; 5],
    /// Footpoint `(I, θ)` at time 0 of the backward asymptotic inner orbit.
    pub minus: (f64, f64),
    /// Footpoint `(I, θ)` at time 0 of the forward asymptotic inner orbit.
    pub plus: (f64, f64),
    pub homoclinic_time: f64,
    pub residual: f64,
    pub newton_steps: usize,
}

/// Saddle eigenvalues `(μ_u, μ_s)` of the pendulum block at clock phase and
/// angle of the given state.
fn saddle_rates(y: &[f64; 5], params: &ModelParams) -> (f64, f64) {
    let lambda = params.lambda();
    let stiffness = 1.0 + params.eps * params.forcing(y[3], y[4]);
    let root = (lambda * lambda + 4.0 * stiffness).sqrt();
    (0.5 * (-lambda + root), 0.5 * (-lambda - root))
}

/// Unstable coordinate near the saddle `q = 2π`.
fn unstable_coordinate(y: &[f64; 5], params: &ModelParams) -> f64 {
    let (mu_u, mu_s) = saddle_rates(y, params);
    (y[0] - mu_s * (y[1] - std::f64::consts::TAU)) / (mu_u - mu_s)
}

/// Stable coordinate near the saddle `q = 0`.
fn stable_coordinate(y: &[f64; 5], params: &ModelParams) -> f64 {
    let (mu_u, mu_s) = saddle_rates(y, params);
    (y[0] - mu_u * y[1]) / (mu_s - mu_u)
}

struct Shooter<'a> {
    params: &'a ModelParams,
    cfg: &'a IntegratorConfig,
    seed: [f64; 5],
}

impl Shooter<'_> {
    fn point(&self, offset: &[f64]) -> [f64; 5] {
        let mut y = self.seed;
        y[0] += offset[0];
        y[1] += offset[1];
        y
    }

    fn residual(&self, offset: &[f64], horizon: f64) -> Result<Vec<f64>, IntegrationError> {
        let y0 = self.point(offset);
        let field = ExtendedField(self.params);
        let fwd = solve_at(&field, 0.0, y0, &[horizon], self.cfg)?[0];
        let bwd = solve_at(&field, 0.0, y0, &[-horizon], self.cfg)?[0];
        Ok(vec![
            unstable_coordinate(&fwd, self.params),
            stable_coordinate(&bwd, self.params),
        ])
    }

    /// Newton on the two boundary conditions with a truncated pseudo-inverse:
    /// singular values below `cutoff` times the largest are dropped, which also
    /// lets the degenerate `ε = 0` channel converge.
    fn solve(
        &self,
        offset: &mut [f64; 2],
        horizon: f64,
        cutoff: f64,
        max_iter: usize,
        tol: f64,
    ) -> Result<usize, ScatteringError> {
        let mut last = f64::INFINITY;
        for it in 1..=max_iter {
            let r = self.residual(offset, horizon)?;
            if r.iter().all(|v| *v == 0.0) {
                return Ok(it);
            }
            let h = 1e-4 * (-horizon).exp();
            let jac: DMatrix<f64> = try_jacobian_fd(|x| self.residual(x, horizon), offset, h)?;
            let svd = jac.svd(true, true);
            let eps = cutoff * svd.singular_values.max();
            let step = svd
                .solve(&DVector::from_vec(r), eps)
                .map_err(|_| ScatteringError::ShootingDivergence {
                    iterations: it,
                    step: f64::NAN,
                })?;
            offset[0] -= step[0];
            offset[1] -= step[1];
            last = step.norm();
            if !last.is_finite() || last > 1.0 {
                break;
            }
            if last < tol {
                return Ok(it);
            }
        }
        Err(ScatteringError::ShootingDivergence {
            iterations: max_iter,
            step: last,
        })
    }
}

/// Least-squares fit of a tail `(t, I, θ)` to the closed-form inner flow;
/// returns the time-0 footpoint and the RMS residual.
fn fit_vanishing_tail(tail: &[(f64, f64, f64)], params: &ModelParams) -> ((f64, f64), f64) {
    let lambda = params.lambda();
    let w = params.omega_star;
    let n = tail.len();
    let mut a = DMatrix::zeros(2 * n, 2);
    let mut b = DVector::zeros(2 * n);
    for (k, &(t, i, th)) in tail.iter().enumerate() {
        a[(2 * k, 0)] = (-lambda * t).exp();
        b[2 * k] = i - w;
        a[(2 * k + 1, 0)] = relaxation_time(lambda, t);
        a[(2 * k + 1, 1)] = 1.0;
        b[2 * k + 1] = th - w * t;
    }
    // normal equations are well conditioned for two unknowns
    let ata: Matrix2<f64> = (a.transpose() * &a).fixed_view::<2, 2>(0, 0).into();
    let atb: Vector2<f64> = (a.transpose() * &b).fixed_view::<2, 1>(0, 0).into();
    let x = ata.lu().solve(&atb).unwrap_or_else(Vector2::zeros);
    let r = &a * DVector::from_column_slice(x.as_slice()) - &b;
    ((w + x[0], x[1]), (r.norm_squared() / (2 * n) as f64).sqrt())
}

/// Pull each tail sample back to time 0 along the numerical inner flow and average.
fn fit_pullback_tail(
    tail: &[(f64, f64, f64)],
    s0: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<((f64, f64), f64), ScatteringError> {
    let pulled: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(t, i, th)| inner_flow_lifted(i, th, s0 + t, -t, params, cfg))
        .collect::<Result<_, _>>()?;
    let n = pulled.len() as f64;
    let mean = pulled
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / n, acc.1 + p.1 / n));
    let var = pulled
        .iter()
        .map(|p| (p.0 - mean.0).powi(2) + (p.1 - mean.1).powi(2))
        .sum::<f64>()
        / (2.0 * n);
    Ok((mean, var.sqrt()))
}

fn tail_fit(
    tail: &[(f64, f64, f64)],
    s0: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<((f64, f64), f64), ScatteringError> {
    match params.variant {
        Variant::Vanishing => Ok(fit_vanishing_tail(tail, params)),
        Variant::NonVanishing => fit_pullback_tail(tail, s0, params, cfg),
    }
}

/// Shoot the homoclinic orbit through `(I, θ, s)` near the separatrix point
/// at phase `tau`, and extract both footpoints.
pub fn shoot_homoclinic(
    action: f64,
    angle: f64,
    s: f64,
    tau: f64,
    params: &ModelParams,
    cfg: &ShootingConfig,
) -> Result<HomoclinicOrbit, ScatteringError> {
    let horizon = cfg
        .homoclinic_time
        .unwrap_or_else(|| default_homoclinic_time(params.eps));
    let (p0, q0) = separatrix(tau);
    let shooter = Shooter {
        params,
        cfg: &cfg.integrator,
        seed: [p0, q0, action, angle, s],
    };
    let mut offset = [0.0; 2];
    let mut steps = 0;
    // Continuation in the horizon keeps Newton inside its basin. Short
    // horizons cannot resolve the weakly split direction along the
    // separatrix, so it is frozen until the final horizon.
    let mut t = 3.0_f64.min(horizon);
    while t < horizon {
        steps += shooter.solve(&mut offset, t, CONTINUATION_CUTOFF, cfg.max_newton, cfg.newton_tol)?;
        t = (t + 2.0).min(horizon);
    }
    // without coupling the manifolds coincide and that direction is truly null
    let cutoff = if params.eps > 0.0 { 1e-10 } else { CONTINUATION_CUTOFF };
    steps += shooter.solve(&mut offset, horizon, cutoff, cfg.max_newton, cfg.newton_tol)?;
    let point = shooter.point(&offset);
    let t_lo = cfg.tail_fraction * horizon;
    let n = cfg.tail_samples.max(2);
    let fwd_times: Vec<f64> = (0..n)
        .map(|k| t_lo + (horizon - t_lo) * k as f64 / (n - 1) as f64)
        .collect();
    let bwd_times: Vec<f64> = fwd_times.iter().map(|t| -t).collect();
    let field = ExtendedField(params);
    let as_tail = |times: &[f64], ys: Vec<[f64; 5]>| -> Vec<(f64, f64, f64)> {
        times.iter().zip(ys).map(|(t, y)| (*t, y[2], y[3])).collect()
    };
    let fwd = as_tail(&fwd_times, solve_at(&field, 0.0, point, &fwd_times, &cfg.integrator)?);
    let bwd = as_tail(&bwd_times, solve_at(&field, 0.0, point, &bwd_times, &cfg.integrator)?);
    let (plus, r_plus) = tail_fit(&fwd, s, params, &cfg.integrator)?;
    let (minus, r_minus) = tail_fit(&bwd, s, params, &cfg.integrator)?;
    let residual = r_plus.max(r_minus);
    let tol = (cfg.residual_factor * params.eps * params.eps).max(MIN_FIT_TOL);
    if residual > tol {
        return Err(ScatteringError::FootpointFit { residual, tol });
    }
    Ok(HomoclinicOrbit {
        point,
        minus,
        plus,
        homoclinic_time: horizon,
        residual,
        newton_steps: steps,
    })
}

/// Scattering map realised by a shot homoclinic orbit through the channel
/// point over `z` at clock phase `s`.
pub fn scattering_shooting(
    z: &ReducedPoint,
    s: f64,
    params: &ModelParams,
    branch: TauBranch,
    cfg: &ShootingConfig,
) -> Result<(ScatteringJump, HomoclinicOrbit), ScatteringError> {
    let angle = z.angle_at(s);
    let crit = tau_star_with(
        z.action,
        angle,
        s,
        params,
        TauSearch {
            branch,
            ..TauSearch::default()
        },
    )?;
    let orbit = shoot_homoclinic(z.action, angle, s, crit.tau, params, cfg)?;
    Ok((jump_from_orbit(&orbit, s, params, crit.tau), orbit))
}

/// Reduced increments between the two footpoints of `orbit`.
pub fn jump_from_orbit(orbit: &HomoclinicOrbit, s: f64, params: &ModelParams, tau: f64) -> ScatteringJump {
    let (i_m, th_m) = orbit.minus;
    let (i_p, th_p) = orbit.plus;
    let before = ReducedPoint::new(i_m, th_m - i_m * s);
    let after = ReducedPoint::new(i_p, th_p - i_p * s);
    ScatteringJump {
        before,
        after,
        d_action: i_p - i_m,
        d_theta: after.theta_bar - before.theta_bar,
        d_energy: cylinder_energy(i_p, th_p, params) - cylinder_energy(i_m, th_m, params),
        method: Method::Shooting,
        homoclinic_time: Some(orbit.homoclinic_time),
        residual: Some(orbit.residual),
        tau_star: tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn benchmark(eps: f64) -> ModelParams {
        ModelParams::new(eps, 0.06, 1.265, (0.0, 1.0, 1.0), Variant::Vanishing).unwrap()
    }

    #[test]
    fn zero_coupling_is_identity() {
        let p = benchmark(0.0);
        let z = ReducedPoint::new(1.2, 4.3);
        let j = scattering_first_order(&z, &p, TauBranch::Anchor(4.3 / 2.0 - PI)).unwrap();
        assert_eq!(j.after, z);
        assert_eq!((j.d_action, j.d_theta, j.d_energy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn energy_increment_tracks_action() {
        let p = benchmark(1e-3);
        let z = ReducedPoint::new(1.2, 4.3);
        let j = scattering_first_order(&z, &p, TauBranch::Anchor(4.3 / 2.0 - PI)).unwrap();
        assert!(j.d_action > 0.0);
        assert_eq!(j.d_energy, z.action * j.d_action);
    }

    #[test]
    fn single_harmonic_channel_is_refused() {
        let p = ModelParams::new(1e-3, 0.0, 1.2, (0.0, 1.0, 0.0), Variant::Vanishing).unwrap();
        let err = scattering_first_order(&ReducedPoint::new(1.0, 1.0), &p, TauBranch::MaxNondegeneracy).unwrap_err();
        assert_eq!(err, ScatteringError::Melnikov(MelnikovError::MissingHarmonic));
    }

    #[test]
    fn unperturbed_shooting_is_identity() {
        let p = benchmark(0.0);
        let z = ReducedPoint::new(1.2, 4.3);
        let (j, orbit) = scattering_shooting(
            &z,
            0.0,
            &p,
            TauBranch::Anchor(4.3 / 2.0 - PI),
            &ShootingConfig::default(),
        )
        .unwrap();
        assert!(j.d_action.abs() < 1e-9, "dI = {}", j.d_action);
        assert!(j.d_theta.abs() < 1e-9, "dθ = {}", j.d_theta);
        assert!((orbit.minus.0 - 1.2).abs() < 1e-9);
    }

    #[test]
    fn vanishing_tail_fit_is_exact_on_inner_orbits() {
        let p = benchmark(2e-3);
        let tail: Vec<(f64, f64, f64)> = (0..20)
            .map(|k| {
                let t = 6.0 + 0.2 * k as f64;
                let (i, th) = crate::inner::vanishing_flow_lifted(1.4, 2.0, t, &p);
                (t, i, th)
            })
            .collect();
        let ((i0, th0), r) = fit_vanishing_tail(&tail, &p);
        assert!((i0 - 1.4).abs() < 1e-12 && (th0 - 2.0).abs() < 1e-10 && r < 1e-10);
    }
}
