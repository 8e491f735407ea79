#![allow(dead_code)]

use rotpend::model::{ModelParams, Variant};

pub const OMEGA_STAR: f64 = 1.265;

/// `a00 = 0`, `a10 = a01 = 1` with the given coupling and dissipation scale.
pub fn benchmark(eps: f64, rho_bar: f64) -> ModelParams {
    ModelParams::new(eps, rho_bar, OMEGA_STAR, (0.0, 1.0, 1.0), Variant::Vanishing).unwrap()
}

pub fn non_vanishing(eps: f64, rho_bar: f64) -> ModelParams {
    benchmark(eps, rho_bar).with_variant(Variant::NonVanishing)
}

pub fn unperturbed() -> ModelParams {
    benchmark(0.0, 0.0)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    rotpend::inner::linear_fit(&pts).0
}
