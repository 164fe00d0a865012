//! Physical constants, CODATA 2018 values, SI units.

/// Fundamental constants bundled for passing into formulas.
///
/// Values are fixed at construction; there is no way to mutate them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant [J s].
    pub hbar: f64,
    /// Boltzmann constant [J/K].
    pub k_b: f64,
    /// Speed of light in vacuum [m/s].
    pub c: f64,
    /// Vacuum permittivity [F/m].
    pub epsilon_0: f64,
}

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum [m/s].
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity [F/m].
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

impl PhysicalConstants {
    /// CODATA 2018 values.
    pub const fn codata() -> Self {
        Self {
            hbar: HBAR,
            k_b: K_B,
            c: C,
            epsilon_0: EPSILON_0,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata()
    }
}
