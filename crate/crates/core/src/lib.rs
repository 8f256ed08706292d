//! Subwavelength atom arrays inside an optical cavity.
//!
//! Units throughout: wavelength λ = 1, free-space decay rate γ = 1, so
//! q = 2π and times are in units of 1/γ. Wavevectors passed to functions
//! are absolute (radians per λ); helpers that print them divide by [`Q`].
//!
//! The crate is organised bottom-up:
//!
//! - [`greens`]: the free-space dyadic Green's function and the scalar
//!   dipole-dipole kernel, its second longitudinal derivative and its
//!   transverse-momentum representation.
//! - [`lattice_sums`]: cooperative decay and shift of the infinite array,
//!   by reciprocal (diffraction-order) and real-space summation.
//! - [`confined`]: kernel matrices on a finite array, the cavity-confined
//!   kernel and the projected (non-confined) kernel.
//! - [`cavity_dynamics`]: the driven cavity coupled to the array, both as a
//!   two-oscillator model and site-resolved.
//! - [`optomech`] and [`om_dynamics`]: optomechanical parameters of the
//!   moving array and their mean-field dynamics.

// Range guards are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod cavity_dynamics;
pub mod config;
pub mod confined;
pub mod error;
pub mod fft2;
pub mod greens;
pub mod lattice_sums;
pub mod ode;
pub mod om_dynamics;
pub mod optomech;
pub mod output;
pub mod quad;
pub mod regime;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Wavenumber of the atomic transition, 2π/λ with λ = 1.
pub const Q: f64 = 2.0 * std::f64::consts::PI;

/// Wavelength (the length unit).
pub const LAMBDA: f64 = 1.0;

/// Free-space spontaneous emission rate (the rate unit).
pub const GAMMA: f64 = 1.0;
