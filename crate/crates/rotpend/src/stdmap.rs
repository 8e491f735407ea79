//! Conservative and dissipative standard maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::wrap_angle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StdMapError {
    #[error("dissipation lambda must lie in [0, 1), got {0}")]
    Dissipation(f64),
    #[error("rotation numbers need at least {min} iterates, got {got}")]
    TooFewIterates { min: usize, got: usize },
    #[error("grid must have at least one cell per axis and finite bounds")]
    Grid,
}

/// `I' = (1 - λ) I + μ + ε sin θ`, `θ' = θ + I'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdMapParams {
    pub eps: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl StdMapParams {
    pub fn new(eps: f64, lambda: f64, mu: f64) -> Result<Self, StdMapError> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(StdMapError::Dissipation(lambda));
        }
        Ok(Self { eps, lambda, mu })
    }

    /// Drift written through the attracting frequency, `μ = λ ω*`.
    pub fn with_target(eps: f64, lambda: f64, omega_star: f64) -> Result<Self, StdMapError> {
        Self::new(eps, lambda, lambda * omega_star)
    }

    pub fn conservative(eps: f64) -> Self {
        Self {
            eps,
            lambda: 0.0,
            mu: 0.0,
        }
    }

    /// `μ / λ`, the action of the invariant circle when `ε = 0`.
    pub fn attractor_action(&self) -> Option<f64> {
        (self.lambda > 0.0).then(|| self.mu / self.lambda)
    }
}

/// One iterate on the lifted angle.
pub fn std_map_lifted(action: f64, angle: f64, params: &StdMapParams) -> (f64, f64) {
    let next = (1.0 - params.lambda) * action + params.mu + params.eps * angle.sin();
    (next, angle + next)
}

/// One iterate with the angle reduced into `[0, 2π)`.
pub fn std_map(action: f64, angle: f64, params: &StdMapParams) -> (f64, f64) {
    let (i, th) = std_map_lifted(action, angle, params);
    (i, wrap_angle(th))
}

/// The map in the form `I' = I - λ(I - ω*) + ε sin θ`.
pub fn std_map_targeted(action: f64, angle: f64, eps: f64, lambda: f64, omega_star: f64) -> (f64, f64) {
    let next = action - lambda * (action - omega_star) + eps * angle.sin();
    (next, wrap_angle(angle + next))
}

/// Smallest orbit length accepted by [`rotation_number`].
pub const MIN_ROTATION_ITERATES: usize = 1000;

/// `(θ_n - θ_0) / n` along the lift.
pub fn rotation_number(action: f64, angle: f64, params: &StdMapParams, n_iter: usize) -> Result<f64, StdMapError> {
    if n_iter < MIN_ROTATION_ITERATES {
        return Err(StdMapError::TooFewIterates {
            min: MIN_ROTATION_ITERATES,
            got: n_iter,
        });
    }
    Ok(windowed_rotation(action, angle, params, 0, n_iter))
}

/// Birkhoff average of the angle increment over iterates `skip..n_iter`.
fn windowed_rotation(action: f64, angle: f64, params: &StdMapParams, skip: usize, n_iter: usize) -> f64 {
    let (mut i, mut th) = (action, angle);
    let mut start = th;
    for k in 0..n_iter {
        if k == skip {
            start = th;
        }
        (i, th) = std_map_lifted(i, th, params);
    }
    (th - start) / (n_iter - skip) as f64
}

/// Rectangle of initial conditions, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinGrid {
    pub action_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub n_action: usize,
    pub n_theta: usize,
}

impl BasinGrid {
    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let actions = Self::axis(self.action_range.0, self.action_range.1, self.n_action);
        let thetas = Self::axis(self.theta_range.0, self.theta_range.1, self.n_theta);
        actions
            .iter()
            .flat_map(|&i| thetas.iter().map(move |&t| (i, t)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub action: f64,
    pub theta: f64,
    pub rotation_number: f64,
}

/// Rotation number of every grid cell with the first half of each orbit discarded.
pub fn basin_scan(grid: &BasinGrid, params: &StdMapParams, n_iter: usize) -> Result<Vec<BasinCell>, StdMapError> {
    let finite = [
        grid.action_range.0,
        grid.action_range.1,
        grid.theta_range.0,
        grid.theta_range.1,
    ]
    .iter()
    .all(|v| v.is_finite());
    if grid.n_action == 0 || grid.n_theta == 0 || !finite {
        return Err(StdMapError::Grid);
    }
    if n_iter < MIN_ROTATION_ITERATES {
        return Err(StdMapError::TooFewIterates {
            min: MIN_ROTATION_ITERATES,
            got: n_iter,
        });
    }
    Ok(grid
        .points()
        .into_par_iter()
        .map(|(i, t)| BasinCell {
            action: i,
            theta: t,
            rotation_number: windowed_rotation(i, t, params, n_iter / 2, n_iter),
        })
        .collect())
}

/// Distinct values of a raster after rounding to `resolution`.
pub fn plateaus(cells: &[BasinCell], resolution: f64) -> Vec<f64> {
    let mut keys: Vec<i64> = cells
        .iter()
        .map(|c| (c.rotation_number / resolution).round() as i64)
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter().map(|k| k as f64 * resolution).collect()
}

/// Orbits `(k, I, θ)` of each initial condition, angles reduced.
pub fn phase_portrait(initial: &[(f64, f64)], params: &StdMapParams, n_iter: usize) -> Vec<Vec<(usize, f64, f64)>> {
    initial
        .par_iter()
        .map(|&(i0, t0)| {
            let mut out = Vec::with_capacity(n_iter + 1);
            let (mut i, mut t) = (i0, wrap_angle(t0));
            out.push((0, i, t));
            for k in 1..=n_iter {
                (i, t) = std_map(i, t, params);
                out.push((k, i, t));
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn free_rotation() {
        let p = StdMapParams::conservative(0.0);
        let (i, t) = std_map(0.7, 1.0, &p);
        assert_eq!(i, 0.7);
        assert!((t - 1.7).abs() < 1e-15);
    }

    #[test]
    fn invariant_circle_without_kick() {
        let p = StdMapParams::new(0.0, 0.1, 0.05).unwrap();
        let (i, _) = std_map(0.5, 2.0, &p);
        assert!((i - 0.5).abs() < 1e-15);
    }

    #[test]
    fn target_form_agrees() {
        let p = StdMapParams::with_target(0.3, 0.2, 1.1).unwrap();
        for (i, t) in [(0.1, 0.2), (2.0, 5.0), (-1.0, 3.0)] {
            let (a, b) = std_map(i, t, &p);
            let (c, d) = std_map_targeted(i, t, 0.3, 0.2, 1.1);
            assert!((a - c).abs() < 1e-15 && (b - d).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_short_orbits_and_bad_lambda() {
        let p = StdMapParams::conservative(0.0);
        assert!(rotation_number(0.3, 0.0, &p, 10).is_err());
        assert!(StdMapParams::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rigid_rotation_number() {
        let p = StdMapParams::conservative(0.0);
        assert!((rotation_number(0.3, 0.0, &p, 10_000).unwrap() - 0.3).abs() < 1e-3);
    }

    #[test]
    fn uniform_raster_without_kick() {
        let p = StdMapParams::new(0.0, 0.05, 0.04).unwrap();
        let grid = BasinGrid {
            action_range: (0.0, 2.0),
            theta_range: (0.0, TAU),
            n_action: 4,
            n_theta: 3,
        };
        let cells = basin_scan(&grid, &p, 4000).unwrap();
        assert!(cells.iter().all(|c| (c.rotation_number - 0.8).abs() < 1e-3));
    }

    #[test]
    fn raster_is_periodic_in_angle() {
        let p = StdMapParams::new(0.6, 0.1, 0.1).unwrap();
        let a = BasinGrid {
            action_range: (0.0, 1.0),
            theta_range: (0.3, 0.3),
            n_action: 5,
            n_theta: 1,
        };
        let b = BasinGrid {
            theta_range: (0.3 + TAU, 0.3 + TAU),
            ..a
        };
        let (ra, rb) = (basin_scan(&a, &p, 2000).unwrap(), basin_scan(&b, &p, 2000).unwrap());
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x.rotation_number - y.rotation_number).abs() < 1e-9);
        }
    }
}
