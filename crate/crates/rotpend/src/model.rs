//! Parameters, phase-space types, energies and the perturbed vector field of
//! the rotator–pendulum system.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("coupling strength eps must lie in [0, 1), got {0}")]
    Coupling(f64),
    #[error("dissipation scale rho_bar must be finite and non-negative, got {0}")]
    Dissipation(f64),
    #[error("target frequency omega_star must be positive, got {0}")]
    Frequency(f64),
    #[error("Fourier coefficient {name} is not finite")]
    Coefficient { name: &'static str },
}

/// Which form the pendulum factor `f(q)` of the coupling takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `f(q) = cos q - 1`: the coupling and its first derivative vanish at the saddle.
    #[default]
    Vanishing,
    /// `f(q) = cos q`: the coupling acts on the invariant plane itself.
    NonVanishing,
}

impl Variant {
    pub fn coupling(self, q: f64) -> f64 {
        match self {
            Variant::Vanishing => q.cos() - 1.0,
            Variant::NonVanishing => q.cos(),
        }
    }

    /// `f'(q)`, identical for both variants.
    pub fn coupling_slope(self, q: f64) -> f64 {
        -q.sin()
    }
}

/// Physical and perturbation parameters. The dissipation rate is always
/// derived from `eps` and `rho_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub eps: f64,
    pub rho_bar: f64,
    pub omega_star: f64,
    pub a00: f64,
    pub a10: f64,
    pub a01: f64,
    #[serde(default)]
    pub variant: Variant,
}

impl ModelParams {
    pub fn new(
        eps: f64,
        rho_bar: f64,
        omega_star: f64,
        (a00, a10, a01): (f64, f64, f64),
        variant: Variant,
    ) -> Result<Self, ModelError> {
        let params = Self {
            eps,
            rho_bar,
            omega_star,
            a00,
            a10,
            a01,
            variant,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..1.0).contains(&self.eps) {
            return Err(ModelError::Coupling(self.eps));
        }
        if !(self.rho_bar.is_finite() && self.rho_bar >= 0.0) {
            return Err(ModelError::Dissipation(self.rho_bar));
        }
        if !(self.omega_star.is_finite() && self.omega_star > 0.0) {
            return Err(ModelError::Frequency(self.omega_star));
        }
        for (name, v) in [("a00", self.a00), ("a10", self.a10), ("a01", self.a01)] {
            if !v.is_finite() {
                return Err(ModelError::Coefficient { name });
            }
        }
        Ok(())
    }

    /// `rho = rho_bar / log(1/eps)`, zero when `eps = 0`.
    pub fn rho(&self) -> f64 {
        if self.eps == 0.0 {
            0.0
        } else {
            self.rho_bar / (1.0 / self.eps).ln()
        }
    }

    /// Dissipation rate `lambda = eps * rho`.
    pub fn lambda(&self) -> f64 {
        self.eps * self.rho()
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_rho_bar(mut self, rho_bar: f64) -> Self {
        self.rho_bar = rho_bar;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Time- and angle-dependent factor `g(theta, s)` of the coupling.
    pub fn forcing(&self, theta: f64, s: f64) -> f64 {
        self.a00 + self.a10 * theta.cos() + self.a01 * s.cos()
    }

    pub fn forcing_dtheta(&self, theta: f64) -> f64 {
        -self.a10 * theta.sin()
    }

    /// Both harmonics needed for a transverse homoclinic channel are present.
    pub fn has_transverse_coupling(&self) -> bool {
        self.a10 * self.a01 != 0.0
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` reduced into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// A point `(p, q, I, theta)` of the (non-extended) phase space; angles reduced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub p: f64,
    pub q: f64,
    pub action: f64,
    pub angle: f64,
}

impl State {
    pub fn new(p: f64, q: f64, action: f64, angle: f64) -> Self {
        Self {
            p,
            q: wrap_angle(q),
            action,
            angle: wrap_angle(angle),
        }
    }

    pub fn on_cylinder(action: f64, angle: f64) -> Self {
        Self::new(0.0, 0.0, action, angle)
    }
}

/// A point of the extended phase space with the clock angle `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub state: State,
    pub s: f64,
}

impl ExtendedState {
    pub fn new(state: State, s: f64) -> Self {
        Self {
            state,
            s: wrap_angle(s),
        }
    }

    /// Unreduced coordinates `[p, q, I, theta, s]` as used by the integrator.
    pub fn to_array(&self) -> [f64; 5] {
        let z = &self.state;
        [z.p, z.q, z.action, z.angle, self.s]
    }

    /// Build from unreduced coordinates, reducing the angles.
    pub fn from_array(y: &[f64; 5]) -> Self {
        Self::new(State::new(y[0], y[1], y[2], y[3]), y[4])
    }

    /// Euclidean distance with angular components compared on the circle.
    pub fn distance(&self, other: &Self) -> f64 {
        let (a, b) = (&self.state, &other.state);
        let dp = a.p - b.p;
        let dq = angle_diff(a.q, b.q);
        let di = a.action - b.action;
        let dt = angle_diff(a.angle, b.angle);
        let ds = angle_diff(self.s, other.s);
        (dp * dp + dq * dq + di * di + dt * dt + ds * ds).sqrt()
    }
}

/// Rotator energy `I^2 / 2`.
pub fn rotator_energy(action: f64) -> f64 {
    0.5 * action * action
}

/// Pendulum energy `p^2/2 + cos q - 1`; zero on the separatrix.
pub fn pendulum_energy(p: f64, q: f64) -> f64 {
    // cos q - 1 written as -2 sin^2(q/2) to keep precision near the saddle
    let h = (0.5 * q).sin();
    0.5 * p * p - 2.0 * h * h
}

/// Energy of the averaged motion on the cylinder, `I^2/2 + eps a10 (cos theta - 1)`.
pub fn cylinder_energy(action: f64, angle: f64, params: &ModelParams) -> f64 {
    let h = (0.5 * angle).sin();
    rotator_energy(action) - 2.0 * params.eps * params.a10 * h * h
}

/// Upper separatrix of the pendulum through `(2, π)` at `t = 0`.
pub fn separatrix(t: f64) -> (f64, f64) {
    (2.0 / t.cosh(), 4.0 * t.exp().atan())
}

/// `cos q0(t) - 1` along the upper separatrix, evaluated without cancellation.
pub fn separatrix_coupling(t: f64) -> f64 {
    let c = t.cosh();
    -2.0 / (c * c)
}

/// Right-hand side `[p', q', I', theta', s']` of the extended system.
pub fn vector_field(y: &[f64; 5], params: &ModelParams) -> [f64; 5] {
    let [p, q, action, angle, s] = *y;
    let lambda = params.lambda();
    let eps = params.eps;
    let v = params.variant;
    let g = params.forcing(angle, s);
    [
        q.sin() - eps * v.coupling_slope(q) * g - lambda * p,
        p,
        -lambda * (action - params.omega_star) - eps * v.coupling(q) * params.forcing_dtheta(angle),
        action,
        1.0,
    ]
}

/// Derivative of an extended state, reported in the same field order.
pub fn vector_field_at(z: &ExtendedState, params: &ModelParams) -> [f64; 5] {
    vector_field(&z.to_array(), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bench(eps: f64) -> ModelParams {
        ModelParams::new(eps, 0.7, 1.3, (0.0, 1.0, 1.0), Variant::Vanishing).unwrap()
    }

    #[test]
    fn field_vanishes_on_target_circle() {
        let p = bench(0.01);
        let d = vector_field(&[0.0, 0.0, p.omega_star, 2.1, 4.0], &p);
        assert_eq!(d, [0.0, 0.0, 0.0, p.omega_star, 1.0]);
    }

    #[test]
    fn unperturbed_field() {
        let p = bench(0.0);
        assert_eq!(p.lambda(), 0.0);
        let y = [0.3, 1.1, 0.8, 0.2, 0.9];
        let d = vector_field(&y, &p);
        assert_eq!(d, [1.1f64.sin(), 0.3, 0.0, 0.8, 1.0]);
    }

    #[test]
    fn field_against_hand_evaluation() {
        // z = (1, π, 1, 0, 0): sin q = 0, f'(π) = 0, f(π) = -2, g_θ(0) = 0, g = 2
        let p = bench(0.01);
        let lam = 0.01 * 0.7 / 100f64.ln();
        let d = vector_field(&[1.0, PI, 1.0, 0.0, 0.0], &p);
        let expected_p = -lam;
        let expected_i = 0.3 * lam;
        assert!((d[0] - expected_p).abs() < 1e-15);
        assert_eq!(d[1], 1.0);
        assert!((d[2] - expected_i).abs() < 1e-15);
        assert_eq!(d[3], 1.0);
    }

    #[test]
    fn lambda_from_rho_bar() {
        let p = bench(1e-3);
        assert!((p.rho() - 0.7 / 1000f64.ln()).abs() < 1e-15);
        assert!((p.lambda() - 1e-3 * 0.7 / 1000f64.ln()).abs() < 1e-18);
    }

    #[test]
    fn energies() {
        assert_eq!(pendulum_energy(0.0, 0.0), 0.0);
        assert!(pendulum_energy(2.0, PI).abs() < 1e-15);
        assert_eq!(cylinder_energy(0.0, 0.0, &bench(0.1)), 0.0);
    }

    #[test]
    fn separatrix_values() {
        let (p, q) = separatrix(0.0);
        assert_eq!(p, 2.0);
        assert!((q - PI).abs() < 1e-15);
        let (p, q) = separatrix(20.0);
        assert!(p < 1e-8 && (q - 2.0 * PI).abs() < 1e-8);
        let (p, q) = separatrix(-20.0);
        assert!(p < 1e-8 && q < 1e-8);
        for t in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let (p, q) = separatrix(t);
            assert!((q.cos() - 1.0 + p * p / 2.0).abs() < 1e-14);
            assert!((separatrix_coupling(t) - (q.cos() - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1.0, 0.1, 1.0, (0.0, 1.0, 1.0), Variant::Vanishing).is_err());
        assert!(ModelParams::new(0.1, -1.0, 1.0, (0.0, 1.0, 1.0), Variant::Vanishing).is_err());
        assert!(ModelParams::new(0.1, 0.1, 0.0, (0.0, 1.0, 1.0), Variant::Vanishing).is_err());
    }

    #[test]
    fn wrapping() {
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn action_conserved_without_coupling(
                p in -3.0..3.0f64, q in 0.0..TAU, i in -2.0..2.0f64,
                th in 0.0..TAU, s in 0.0..TAU,
            ) {
                let d = vector_field(&[p, q, i, th, s], &bench(0.0));
                prop_assert_eq!(d[2], 0.0);
            }

            #[test]
            fn saddle_plane_only_damped(
                p in -3.0..3.0f64, i in -2.0..2.0f64, th in 0.0..TAU, s in 0.0..TAU,
                eps in 1e-4..0.5f64,
            ) {
                let params = bench(eps);
                let d = vector_field(&[p, 0.0, i, th, s], &params);
                prop_assert_eq!(d[0], -params.lambda() * p);
            }

            #[test]
            fn separatrix_has_zero_energy(t in -20.0..20.0f64) {
                let (p, q) = separatrix(t);
                prop_assert!(pendulum_energy(p, q).abs() < 1e-12);
            }
        }
    }
}
