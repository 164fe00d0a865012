//! Model of a membrane oscillator coupled through a cavity-enhanced light
//! field to the center-of-mass mode of a trapped atomic ensemble.
//!
//! The crate is organized bottom-up:
//!
//! * [`constants`]: CODATA physical constants.
//! * [`params`]: validated system parameters and derived scales.
//! * [`optics`]: transfer-matrix response of slabs and compound cavities.
//! * [`rates`]: coupling rates, diffusion rates, and the thermal occupation
//!   of the membrane bath.
//! * [`thermal`]: absorption heating of the membrane (analytic disc model
//!   and a finite-difference solver on the square geometry).
//! * [`dynamics`]: linear Gaussian dynamics of the two-mode system
//!   (steady state, time evolution, spectra, adiabatic cooling limit).
//! * [`sweep`]: parameter sweeps and optimization on top of the above.
//!
//! All quantities are SI; angular frequencies are rad/s throughout.

// Validation guards are written as negated accepting comparisons
// (`!(x > 0.0)`) so that NaN inputs fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod optics;
pub mod params;
pub mod rates;
pub mod sweep;
pub mod thermal;

pub use error::{Error, Result};
