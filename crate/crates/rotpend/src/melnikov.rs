//! Melnikov potential along the upper separatrix, the critical phase `τ*`
//! and the reduced potential on `(I, θ̄)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{separatrix, separatrix_coupling, ModelParams};
use crate::quadrature::QuadratureConfig;

/// `∫ p0(t)² dt` over the separatrix.
pub const DISSIPATION_AREA: f64 = 8.0;

/// Samples of the derivative scan used to bracket critical phases.
pub const TAU_SCAN_SAMPLES: usize = 512;

/// `|d²/dτ²|` below which a critical phase counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Central-difference step of the reduced gradient.
pub const REDUCED_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MelnikovError {
    #[error("no critical phase found at I = {action}, theta = {angle}, s = {phase}")]
    NoRoot { action: f64, angle: f64, phase: f64 },
    #[error("critical phase {tau} is degenerate (second derivative {curvature:e})")]
    DegenerateRoot { tau: f64, curvature: f64 },
    #[error("a10 * a01 = 0: the channel is degenerate unless explicitly allowed")]
    MissingHarmonic,
}

/// `A00 = 4 a00`.
pub fn harmonic_a00(params: &ModelParams) -> f64 {
    4.0 * params.a00
}

/// `A10(I) = 2π I a10 / sinh(πI/2)`, with the limit `4 a10` at `I = 0`.
pub fn harmonic_a10(action: f64, params: &ModelParams) -> f64 {
    let x = 0.5 * PI * action;
    if x.abs() < 1e-8 {
        4.0 * params.a10
    } else {
        4.0 * params.a10 * x / x.sinh()
    }
}

/// `dA10/dI`.
pub fn harmonic_a10_slope(action: f64, params: &ModelParams) -> f64 {
    let x = 0.5 * PI * action;
    if x.abs() < 1e-6 {
        // odd series of 4x/sinh x is -2x/3 + ...
        return -2.0 * PI * params.a10 * x / 3.0;
    }
    2.0 * PI * params.a10 * (x.sinh() - x * x.cosh()) / x.sinh().powi(2)
}

/// `A01 = 2π a01 / sinh(π/2)`.
pub fn harmonic_a01(params: &ModelParams) -> f64 {
    2.0 * PI * params.a01 / (0.5 * PI).sinh()
}

/// Closed form `A00 + A10(I) cos θ + A01 cos s`.
pub fn melnikov_potential_closed(action: f64, angle: f64, phase: f64, params: &ModelParams) -> f64 {
    harmonic_a00(params) + harmonic_a10(action, params) * angle.cos() + harmonic_a01(params) * phase.cos()
}

/// `-∫ (cos q0(t) - 1) g(θ + It, s + t) dt` by quadrature.
pub fn melnikov_potential(action: f64, angle: f64, phase: f64, params: &ModelParams, cfg: &QuadratureConfig) -> f64 {
    -cfg.integrate(|t| separatrix_coupling(t) * params.forcing(angle + action * t, phase + t))
}

/// `∫ p0² dt` by quadrature with the default configuration.
pub fn dissipation_area() -> f64 {
    dissipation_area_with(&QuadratureConfig::default())
}

pub fn dissipation_area_with(cfg: &QuadratureConfig) -> f64 {
    cfg.integrate(|t| separatrix(t).0.powi(2))
}

/// `τ ↦ 𝓛(I, θ - Iτ, s - τ) + ρ (s - τ) A` built from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFunction {
    pub action: f64,
    pub angle: f64,
    pub phase: f64,
    a00: f64,
    a10: f64,
    a01: f64,
    rho: f64,
}

impl PhaseFunction {
    pub fn new(action: f64, angle: f64, phase: f64, params: &ModelParams) -> Self {
        Self {
            action,
            angle,
            phase,
            a00: harmonic_a00(params),
            a10: harmonic_a10(action, params),
            a01: harmonic_a01(params),
            rho: params.rho(),
        }
    }

    fn args(&self, tau: f64) -> (f64, f64) {
        (self.angle - self.action * tau, self.phase - tau)
    }

    pub fn value(&self, tau: f64) -> f64 {
        let (u, v) = self.args(tau);
        self.a00 + self.a10 * u.cos() + self.a01 * v.cos() + self.rho * v * DISSIPATION_AREA
    }

    pub fn slope(&self, tau: f64) -> f64 {
        let (u, v) = self.args(tau);
        self.a10 * self.action * u.sin() + self.a01 * v.sin() - self.rho * DISSIPATION_AREA
    }

    pub fn curvature(&self, tau: f64) -> f64 {
        let (u, v) = self.args(tau);
        -self.a10 * self.action * self.action * u.cos() - self.a01 * v.cos()
    }

    /// All simple zeros of [`Self::slope`] on `[lo, hi]`.
    pub fn critical_phases(&self, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
        let grid: Vec<(f64, f64)> = (0..=samples)
            .map(|k| {
                let t = lo + (hi - lo) * k as f64 / samples as f64;
                (t, self.slope(t))
            })
            .collect();
        grid.windows(2)
            .filter_map(|w| {
                let ((a, fa), (b, fb)) = (w[0], w[1]);
                if fa == 0.0 {
                    Some(a)
                } else if fa * fb < 0.0 {
                    Some(self.polish(a, b, fa))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Newton iteration safeguarded by the bracket `[a, b]`.
    fn polish(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        let mut x = 0.5 * (a + b);
        for _ in 0..100 {
            let fx = self.slope(x);
            if fx == 0.0 {
                return x;
            }
            if fx * fa < 0.0 {
                b = x;
            } else {
                a = x;
                fa = fx;
            }
            let d = self.curvature(x);
            let newton = x - fx / d;
            let next = if d != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }
}

/// Which zero of the splitting function parametrises the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TauBranch {
    /// Largest `|d²/dτ²|` in a window around the origin.
    #[default]
    MaxNondegeneracy,
    /// Zero nearest the given phase.
    Anchor(f64),
}

/// Options for [`tau_star_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TauSearch {
    pub branch: TauBranch,
    /// Accept `a10 * a01 = 0`.
    pub allow_single_harmonic: bool,
}

impl TauSearch {
    pub fn anchored(tau: f64) -> Self {
        Self {
            branch: TauBranch::Anchor(tau),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPhase {
    pub tau: f64,
    /// `|d²/dτ²|` at `tau`.
    pub nondegeneracy: f64,
}

/// Critical phase on the default branch.
pub fn tau_star(action: f64, angle: f64, phase: f64, params: &ModelParams) -> Result<CriticalPhase, MelnikovError> {
    tau_star_with(action, angle, phase, params, TauSearch::default())
}

pub fn tau_star_with(
    action: f64,
    angle: f64,
    phase: f64,
    params: &ModelParams,
    search: TauSearch,
) -> Result<CriticalPhase, MelnikovError> {
    if !search.allow_single_harmonic && !params.has_transverse_coupling() {
        return Err(MelnikovError::MissingHarmonic);
    }
    let f = PhaseFunction::new(action, angle, phase, params);
    let half = PI * (1.0 + 1.0 / action.abs().max(1e-3));
    let center = match search.branch {
        TauBranch::MaxNondegeneracy => 0.0,
        TauBranch::Anchor(t) => t,
    };
    let roots = f.critical_phases(center - half, center + half, TAU_SCAN_SAMPLES);
    let candidate = |tau: f64| CriticalPhase {
        tau,
        nondegeneracy: f.curvature(tau).abs(),
    };
    let chosen = match search.branch {
        TauBranch::MaxNondegeneracy => roots
            .iter()
            .map(|&t| candidate(t))
            .filter(|c| c.nondegeneracy >= DEGENERACY_THRESHOLD)
            .max_by(|a, b| a.nondegeneracy.total_cmp(&b.nondegeneracy)),
        TauBranch::Anchor(t0) => roots
            .iter()
            .copied()
            .min_by(|a, b| (a - t0).abs().total_cmp(&(b - t0).abs()))
            .map(candidate),
    };
    match chosen {
        None if roots.is_empty() => Err(MelnikovError::NoRoot { action, angle, phase }),
        None => Err(MelnikovError::DegenerateRoot {
            tau: roots[0],
            curvature: f.curvature(roots[0]),
        }),
        Some(c) if c.nondegeneracy < DEGENERACY_THRESHOLD => Err(MelnikovError::DegenerateRoot {
            tau: c.tau,
            curvature: f.curvature(c.tau),
        }),
        Some(c) => Ok(c),
    }
}

/// First-order splitting `y^s - y^u` per unit `ε` at phase `tau`, by quadrature
/// of the Poisson bracket along the separatrix.
pub fn splitting_distance(
    tau: f64,
    action: f64,
    angle: f64,
    phase: f64,
    params: &ModelParams,
    cfg: &QuadratureConfig,
) -> f64 {
    // substitute u = tau + t so the integrand stays centred on the window
    let bracket = cfg.integrate(|u| {
        let (p0, q0) = separatrix(u);
        let t = u - tau;
        p0 * q0.sin() * params.forcing(angle + action * t, phase + t)
    });
    -(bracket - params.rho() * DISSIPATION_AREA)
}

/// Closed-form counterpart of [`splitting_distance`].
pub fn splitting_distance_closed(tau: f64, action: f64, angle: f64, phase: f64, params: &ModelParams) -> f64 {
    -PhaseFunction::new(action, angle, phase, params).slope(tau)
}

/// Gradient `(∂/∂I, ∂/∂θ̄)` of the reduced potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedGradient {
    pub d_action: f64,
    pub d_angle: f64,
}

/// Everything known about the channel at one point `(I, θ̄)` of the section `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovEval {
    pub action: f64,
    pub theta_bar: f64,
    /// `𝓛(I, θ̄, 0)`.
    pub potential: f64,
    pub d_potential_d_action: f64,
    pub d_potential_d_angle: f64,
    pub tau_star: f64,
    pub nondegeneracy: f64,
    /// `𝓛*_ρ(I, θ̄)`.
    pub reduced: f64,
    pub reduced_grad: ReducedGradient,
}

/// `𝓛*_ρ(I, θ̄) = 𝓛(I, θ̄ - Iτ*, -τ*) - ρ τ* A` for a given `τ*`.
pub fn reduced_value_at(action: f64, theta_bar: f64, tau: f64, params: &ModelParams) -> f64 {
    PhaseFunction::new(action, theta_bar, 0.0, params).value(tau)
}

/// Reduced potential and its central-difference gradient. The neighbouring
/// evaluations follow the branch found at the centre.
pub fn reduced_potential(
    action: f64,
    theta_bar: f64,
    params: &ModelParams,
    branch: TauBranch,
) -> Result<(f64, ReducedGradient, CriticalPhase), MelnikovError> {
    let center = tau_star_with(
        action,
        theta_bar,
        0.0,
        params,
        TauSearch {
            branch,
            ..TauSearch::default()
        },
    )?;
    let value = reduced_value_at(action, theta_bar, center.tau, params);
    let follow = |i: f64, th: f64| -> Result<f64, MelnikovError> {
        let c = tau_star_with(i, th, 0.0, params, TauSearch::anchored(center.tau))?;
        Ok(reduced_value_at(i, th, c.tau, params))
    };
    let h = REDUCED_FD_STEP;
    let d_action = (follow(action + h, theta_bar)? - follow(action - h, theta_bar)?) / (2.0 * h);
    let d_angle = (follow(action, theta_bar + h)? - follow(action, theta_bar - h)?) / (2.0 * h);
    Ok((value, ReducedGradient { d_action, d_angle }, center))
}

/// Exact gradient of the reduced potential at a known critical phase; the
/// `τ*`-dependence drops out because `τ*` is stationary.
pub fn reduced_gradient_closed(action: f64, theta_bar: f64, tau: f64, params: &ModelParams) -> ReducedGradient {
    let u = theta_bar - action * tau;
    let a10 = harmonic_a10(action, params);
    ReducedGradient {
        d_action: harmonic_a10_slope(action, params) * u.cos() + a10 * u.sin() * tau,
        d_angle: -a10 * u.sin(),
    }
}

/// Full channel evaluation at `(I, θ̄)`.
pub fn evaluate(
    action: f64,
    theta_bar: f64,
    params: &ModelParams,
    branch: TauBranch,
) -> Result<MelnikovEval, MelnikovError> {
    let (reduced, reduced_grad, crit) = reduced_potential(action, theta_bar, params, branch)?;
    Ok(MelnikovEval {
        action,
        theta_bar,
        potential: melnikov_potential_closed(action, theta_bar, 0.0, params),
        d_potential_d_action: harmonic_a10_slope(action, params) * theta_bar.cos(),
        d_potential_d_angle: -harmonic_a10(action, params) * theta_bar.sin(),
        tau_star: crit.tau,
        nondegeneracy: crit.nondegeneracy,
        reduced,
        reduced_grad,
    })
}
