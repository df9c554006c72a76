//! Steklov spectra of warped-product hollow spheres and the inverse-problem
//! machinery around them: Weyl–Titchmarsh data, Simon asymptotics,
//! transformation-operator kernels, Müntz moment bounds and Calderón
//! comparisons.

pub mod asymptotics;
pub mod compare;
pub mod config;
pub mod dnmap;
pub mod error;
pub mod families;
pub mod geometry;
pub mod io;
pub mod muntz;
pub mod numerics;
pub mod ode;
pub mod par;
pub mod stability;
pub mod transform;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{LabError, Result};
pub use geometry::{ConformalFactor, FactorForm, Potential};
pub use ode::{ScaledValue, WeylData};
