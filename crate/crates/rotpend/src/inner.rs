//! Dynamics on the invariant cylinder `p = q = 0`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{solve_at, solve_to, IntegrationError, IntegratorConfig, OdeSystem};
use crate::model::{cylinder_energy, wrap_angle, ModelParams, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InnerError {
    #[error("operation requires the {expected:?} variant")]
    WrongVariant { expected: Variant },
    #[error("coupling strength must be positive for {0}")]
    NoCoupling(&'static str),
    #[error("inner flow integration failed: {0}")]
    Integration(#[from] IntegrationError),
}

/// A point `(I, theta)` on the cylinder; the angle is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerPoint {
    pub action: f64,
    pub angle: f64,
}

impl InnerPoint {
    pub fn new(action: f64, angle: f64) -> Self {
        Self {
            action,
            angle: wrap_angle(angle),
        }
    }
}

/// `(1 - e^{-λt}) / λ`, stable as `λt → 0`.
pub fn relaxation_time(lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    if x.abs() < 1e-8 {
        t * (1.0 - 0.5 * x + x * x / 6.0)
    } else {
        -(-x).exp_m1() / lambda
    }
}

/// Closed-form cylinder flow of the vanishing variant on unreduced angles.
pub fn vanishing_flow_lifted(action: f64, angle: f64, t: f64, params: &ModelParams) -> (f64, f64) {
    let lambda = params.lambda();
    let w = params.omega_star;
    let offset = action - w;
    (
        offset * (-lambda * t).exp() + w,
        angle + offset * relaxation_time(lambda, t) + w * t,
    )
}

/// Closed-form time-2π map of the vanishing variant on unreduced angles.
pub fn vanishing_map_lifted(action: f64, angle: f64, params: &ModelParams) -> (f64, f64) {
    vanishing_flow_lifted(action, angle, TAU, params)
}

/// Field `[I', theta', s']` restricted to the cylinder.
#[derive(Debug, Clone, Copy)]
pub struct CylinderField<'a>(pub &'a ModelParams);

impl OdeSystem<3> for CylinderField<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 3]) -> [f64; 3] {
        let p = self.0;
        let f0 = p.variant.coupling(0.0);
        [
            -p.lambda() * (y[0] - p.omega_star) - p.eps * f0 * p.forcing_dtheta(y[1]),
            y[0],
            1.0,
        ]
    }
}

/// Cylinder flow on unreduced angles starting at clock phase `s0`.
pub fn inner_flow_lifted(
    action: f64,
    angle: f64,
    s0: f64,
    t: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64), InnerError> {
    match params.variant {
        Variant::Vanishing => Ok(vanishing_flow_lifted(action, angle, t, params)),
        Variant::NonVanishing => {
            let y = solve_to(&CylinderField(params), 0.0, [action, angle, s0], t, cfg)?;
            Ok((y[0], y[1]))
        }
    }
}

pub fn inner_flow(
    z: &InnerPoint,
    s0: f64,
    t: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<InnerPoint, InnerError> {
    let (i, th) = inner_flow_lifted(z.action, z.angle, s0, t, params, cfg)?;
    Ok(InnerPoint::new(i, th))
}

/// Explicit time-2π map; only the vanishing variant has one.
pub fn inner_map_closed(z: &InnerPoint, params: &ModelParams) -> Result<InnerPoint, InnerError> {
    if params.variant != Variant::Vanishing {
        return Err(InnerError::WrongVariant {
            expected: Variant::Vanishing,
        });
    }
    let (i, th) = vanishing_map_lifted(z.action, z.angle, params);
    Ok(InnerPoint::new(i, th))
}

/// Time-2π map on the section `s = 0` for either variant.
pub fn inner_map_lifted(
    action: f64,
    angle: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64), InnerError> {
    inner_flow_lifted(action, angle, 0.0, TAU, params, cfg)
}

/// `n + 1` points of the inner orbit starting at `z0`.
pub fn inner_orbit(
    z0: &InnerPoint,
    n: usize,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<InnerPoint>, InnerError> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut i, mut th) = (z0.action, z0.angle);
    out.push(*z0);
    for _ in 0..n {
        (i, th) = inner_map_lifted(i, th, params, cfg)?;
        out.push(InnerPoint::new(i, th));
    }
    Ok(out)
}

/// Exponential fit of the approach `|I_k - ω*| → 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorFit {
    /// Least-squares slope of `log |I_k - ω*|` against `k`.
    pub slope: f64,
    /// `-slope`, the fitted contraction per iterate.
    pub decay_rate: f64,
    /// `2πλ`.
    pub predicted_rate: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// Iterates discarded before fitting.
    pub transient: usize,
    pub samples: Vec<(usize, f64)>,
    /// Set when the orbit sits on the attractor and no rate can be fitted.
    pub degenerate: bool,
}

/// Iterates discarded by default before fitting the decay.
pub const ATTRACTOR_TRANSIENT: usize = 10;

pub fn attractor_fit(
    z0: &InnerPoint,
    k_max: usize,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<AttractorFit, InnerError> {
    attractor_fit_after(z0, k_max, ATTRACTOR_TRANSIENT, params, cfg)
}

pub fn attractor_fit_after(
    z0: &InnerPoint,
    k_max: usize,
    transient: usize,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<AttractorFit, InnerError> {
    if params.eps <= 0.0 {
        return Err(InnerError::NoCoupling("an attractor fit"));
    }
    let orbit = inner_orbit(z0, k_max, params, cfg)?;
    let samples: Vec<(usize, f64)> = orbit
        .iter()
        .enumerate()
        .map(|(k, z)| (k, (z.action - params.omega_star).abs()))
        .collect();
    let fit_pts: Vec<(f64, f64)> = samples
        .iter()
        .skip(transient)
        .filter(|(_, d)| *d > 0.0)
        .map(|&(k, d)| (k as f64, d.ln()))
        .collect();
    let predicted_rate = TAU * params.lambda();
    if fit_pts.len() < 2 {
        return Ok(AttractorFit {
            slope: 0.0,
            decay_rate: 0.0,
            predicted_rate,
            residual: 0.0,
            transient,
            samples,
            degenerate: true,
        });
    }
    let (slope, intercept) = linear_fit(&fit_pts);
    let residual = (fit_pts
        .iter()
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / fit_pts.len() as f64)
        .sqrt();
    Ok(AttractorFit {
        slope,
        decay_rate: -slope,
        predicted_rate,
        residual,
        transient,
        samples,
        degenerate: false,
    })
}

/// Ordinary least-squares line `y ≈ slope x + intercept`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// One sample of the damped-versus-undamped comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaSample {
    pub t: f64,
    pub action_gap: f64,
    pub angle_gap: f64,
    pub energy_gap: f64,
}

/// Maxima of the normalised gaps between the damped and undamped cylinder flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub horizon: f64,
    /// max |I_λ - I_0| / (1 - e^{-λt})
    pub action_ratio: f64,
    /// max |θ_λ - θ_0| / (λ t² / 2)
    pub angle_ratio: f64,
    /// max |K(z_λ) - K(z_0)| / (1 - e^{-λt})
    pub energy_ratio: f64,
    pub samples: Vec<LemmaSample>,
}

/// Both cylinder flows advanced together so they share one step sequence.
struct PairedCylinder<'a> {
    damped: CylinderField<'a>,
    undamped: CylinderField<'a>,
}

impl OdeSystem<5> for PairedCylinder<'_> {
    fn rhs(&self, t: f64, y: &[f64; 5]) -> [f64; 5] {
        let a = self.damped.rhs(t, &[y[0], y[1], y[4]]);
        let b = self.undamped.rhs(t, &[y[2], y[3], y[4]]);
        [a[0], a[1], b[0], b[1], 1.0]
    }
}

/// Compare the damped flow with its `λ = 0` counterpart up to
/// `t = t0 log(1/ε)` at `n_samples` evenly spaced times.
pub fn inner_lemma_bounds(
    z0: &InnerPoint,
    t0: f64,
    n_samples: usize,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<LemmaReport, InnerError> {
    if params.variant != Variant::NonVanishing {
        return Err(InnerError::WrongVariant {
            expected: Variant::NonVanishing,
        });
    }
    if params.eps <= 0.0 {
        return Err(InnerError::NoCoupling("the damping comparison"));
    }
    let conservative = params.with_rho_bar(0.0);
    let sys = PairedCylinder {
        damped: CylinderField(params),
        undamped: CylinderField(&conservative),
    };
    let horizon = t0 * (1.0 / params.eps).ln();
    let times: Vec<f64> = (1..=n_samples).map(|k| horizon * k as f64 / n_samples as f64).collect();
    let y0 = [z0.action, z0.angle, z0.action, z0.angle, 0.0];
    let states = solve_at(&sys, 0.0, y0, &times, cfg)?;
    let lambda = params.lambda();
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let mut report = LemmaReport {
        horizon,
        action_ratio: 0.0,
        angle_ratio: 0.0,
        energy_ratio: 0.0,
        samples: Vec::new(),
    };
    for (t, y) in times.iter().zip(&states) {
        let s = LemmaSample {
            t: *t,
            action_gap: (y[0] - y[2]).abs(),
            angle_gap: (y[1] - y[3]).abs(),
            energy_gap: (cylinder_energy(y[0], y[1], params) - cylinder_energy(y[2], y[3], params)).abs(),
        };
        let relax = -(-lambda * t).exp_m1();
        report.action_ratio = report.action_ratio.max(ratio(s.action_gap, relax));
        report.angle_ratio = report.angle_ratio.max(ratio(s.angle_gap, 0.5 * lambda * t * t));
        report.energy_ratio = report.energy_ratio.max(ratio(s.energy_gap, relax));
        report.samples.push(s);
    }
    Ok(report)
}

/// Energy-drift constant `d'(d_max + ω*) + d'²/2` built from an action-drift constant `d'`.
pub fn energy_drift_constant(d_prime: f64, d_max: f64, omega_star: f64) -> f64 {
    d_prime * (d_max + omega_star) + 0.5 * d_prime * d_prime
}

/// Leading partial quotients `[a0; a1, a2, ...]` of the continued fraction of `x`.
pub fn continued_fraction(x: f64, terms: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(terms);
    let mut r = x;
    for _ in 0..terms {
        let a = r.floor();
        out.push(a as u64);
        let frac = r - a;
        if frac < 1e-9 {
            break;
        }
        r = 1.0 / frac;
    }
    out
}

/// Heuristic Diophantine flag: the first `terms` partial quotients past the
/// integer part stay below `bound`. Informational only.
pub fn looks_diophantine(x: f64, terms: usize, bound: u64) -> bool {
    let cf = continued_fraction(x, terms + 1);
    cf.len() > terms && cf[1..].iter().all(|&a| a <= bound)
}
