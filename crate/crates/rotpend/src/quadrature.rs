//! Quadrature over a truncated real line for integrands decaying like sech².

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("truncation half-width t_cut = {0} is below the minimum of 20")]
    Truncation(f64),
    #[error("quadrature tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("Gauss-Legendre order must be between 2 and 64, got {0}")]
    Order(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Fixed Gauss–Legendre rule on unit-width panels.
    GaussLegendre,
    AdaptiveSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub t_cut: f64,
    pub scheme: Scheme,
    /// Target accuracy of the adaptive scheme.
    pub tol: f64,
    /// Nodes per Gauss–Legendre panel.
    pub order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            t_cut: 40.0,
            scheme: Scheme::GaussLegendre,
            tol: 1e-10,
            order: 16,
        }
    }
}

/// Smallest admissible truncation; the sech² tail beyond it is below 1e-16.
pub const MIN_T_CUT: f64 = 20.0;

impl QuadratureConfig {
    pub fn adaptive() -> Self {
        Self {
            scheme: Scheme::AdaptiveSimpson,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.t_cut >= MIN_T_CUT) {
            return Err(QuadratureError::Truncation(self.t_cut));
        }
        if !(self.tol > 0.0) {
            return Err(QuadratureError::Tolerance(self.tol));
        }
        if !(2..=64).contains(&self.order) {
            return Err(QuadratureError::Order(self.order));
        }
        Ok(())
    }

    /// Bound on the neglected tail of a sech²-weighted integrand.
    pub fn tail_bound(&self) -> f64 {
        4.0 * (-2.0 * self.t_cut).exp()
    }

    /// `∫ f` over `[-t_cut, t_cut]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.integrate_over(f, -self.t_cut, self.t_cut)
    }

    /// `∫ f` over `[a, b]` with the configured scheme.
    pub fn integrate_over<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        match self.scheme {
            Scheme::GaussLegendre => gauss_legendre_panels(&f, a, b, self.order),
            Scheme::AdaptiveSimpson => adaptive_simpson(&f, a, b, self.tol),
        }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn cached_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=64)
            .map(|k| {
                if k < 2 {
                    (vec![], vec![])
                } else {
                    gauss_legendre_rule(k)
                }
            })
            .collect()
    });
    &rules[n]
}

/// Composite Gauss–Legendre rule on panels of width at most 1.
pub fn gauss_legendre_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let (nodes, weights) = cached_rule(order.clamp(2, 64));
    let panels = (b - a).abs().ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    (0..panels)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * width;
            nodes
                .iter()
                .zip(weights)
                .map(|(x, w)| w * f(mid + half * x))
                .sum::<f64>()
                * half
        })
        .sum()
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    // seed on unit panels so narrow features are not skipped
    let panels = (b - a).abs().ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let local_tol = tol / panels as f64;
    (0..panels)
        .map(|k| {
            let (x0, x1) = (a + k as f64 * width, a + (k + 1) as f64 * width);
            let (f0, f1, fm) = (f(x0), f(x1), f(0.5 * (x0 + x1)));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson_step(f, x0, x1, f0, fm, f1, whole, local_tol, 50)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
