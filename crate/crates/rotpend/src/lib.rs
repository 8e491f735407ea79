//! Numerical laboratory for a dissipative rotator–pendulum system: the
//! perturbed flow, dynamics on the invariant cylinder, Melnikov theory along
//! the separatrix, scattering maps, and pseudo-orbits that diffuse across the
//! attracting circle.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod inner;
pub mod integrate;
pub mod io;
pub mod melnikov;
pub mod model;
pub mod quadrature;
pub mod scattering;
pub mod stdmap;
