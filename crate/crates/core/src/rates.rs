//! Coherent couplings and incoherent rates of the effective two-mode model.
//!
//! Rate conventions: plain s^-1 (amplitude rates), not multiplied by 2 pi.
//! The effective coupling factorizes as g = 2 g_at g_m, and the membrane
//! radiation-pressure diffusion obeys gamma_m_diff = 2 g_m^2; both are
//! identities of the construction and re-checked against their independent
//! closed forms in tests.

use serde::Serialize;

use crate::constants::{C, HBAR, K_B};
use crate::error::{Error, Result};
use crate::optics::{self, CavityModel};
use crate::params::{Placement, SystemParams};
use crate::thermal::{self, ThermalConfig};

/// Every rate of the effective model, evaluated at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSet {
    /// Membrane-field coupling [s^-1].
    pub g_m: f64,
    /// Atom-field coupling [s^-1].
    pub g_at: f64,
    /// Effective membrane-atom coupling 2 g_at g_m [s^-1].
    pub g: f64,
    /// Mechanical linewidth omega_m/Q_m [s^-1].
    pub gamma_m: f64,
    /// Membrane radiation-pressure diffusion 2 g_m^2 [s^-1].
    pub gamma_m_diff: f64,
    /// Atomic momentum diffusion [s^-1].
    pub gamma_at_diff: f64,
    /// Effective bath occupation at T0 + delta_T.
    pub n_m_bar: f64,
    /// Thermal decoherence gamma_m * n_m_bar [s^-1].
    pub gamma_m_th: f64,
    /// Laser-induced temperature rise of the membrane center [K].
    pub delta_t: f64,
    /// Membrane frequency [rad/s], carried for model assembly.
    pub omega_m: f64,
    /// Atomic trap frequency [rad/s], carried for model assembly.
    pub omega_at: f64,
}

/// |r_m| used by the rate formulas: the override when present, otherwise
/// the slab value at the laser wavenumber.
pub fn membrane_reflectivity(sys: &SystemParams) -> Result<f64> {
    match sys.membrane.r_m_override {
        Some(r) => Ok(r),
        None => Ok(optics::slab(sys.membrane.n_m, sys.membrane.d_m, sys.derived.k_l)?
            .r
            .norm()),
    }
}

/// Membrane-field coupling magnitude.
///
/// On the slope the buildup factor is the ideal resonant value 2 F/pi; at
/// an explicit position the exact |T(omega_L)|^2 of the re-tuned loaded
/// cavity is used together with sin(2 k_L ell). The sign of the sine is a
/// phase convention, so the magnitude is returned; at an intensity node
/// the linear coupling vanishes.
pub fn coupling_gm(sys: &SystemParams) -> Result<f64> {
    let d = &sys.derived;
    let r_m = membrane_reflectivity(sys)?;
    let prefactor = d.alpha * d.k_l * d.l_m / std::f64::consts::PI.sqrt();
    match sys.membrane.placement {
        Placement::OnSlope => {
            Ok(prefactor * r_m * 2.0 * sys.cavity.finesse / std::f64::consts::PI)
        }
        Placement::AtPosition(ell) => {
            let model = CavityModel::from_system(sys)?;
            let t2 = optics::cavity_response(&model, d.omega_l)?.t_w.norm_sqr();
            Ok(prefactor * r_m * (2.0 * d.k_l * ell).sin().abs() * t2)
        }
    }
}

/// Coupling for the movable-end-mirror variant, 2 alpha k_L l_m F/pi^{3/2}.
pub fn coupling_gm_mirror(sys: &SystemParams) -> f64 {
    let d = &sys.derived;
    2.0 * d.alpha * d.k_l * d.l_m * sys.cavity.finesse / std::f64::consts::PI.powf(1.5)
}

/// Atom-field coupling omega_at sqrt(pi) sqrt(N) / (2 alpha k_L l_at).
pub fn coupling_gat(sys: &SystemParams) -> f64 {
    let d = &sys.derived;
    sys.atoms.omega_at * std::f64::consts::PI.sqrt() * sys.atoms.n_atoms.sqrt()
        / (2.0 * d.alpha * d.k_l * d.l_at)
}

/// Thermal link to the frame [W/K]: the direct override, or the analytic
/// circular-membrane value from the film conductivity.
pub fn resolve_thermal_link(sys: &SystemParams) -> Result<f64> {
    match (sys.membrane.k_th, sys.membrane.kappa_th) {
        (Some(k), None) => Ok(k),
        (None, Some(kappa_th)) => {
            let cfg = ThermalConfig::from_system(sys, kappa_th)?;
            Ok(thermal::analytic_circular(&cfg)?.k_th)
        }
        (None, None) => Err(Error::Validation(
            "thermal rates need membrane.k_th or membrane.kappa_th".into(),
        )),
        (Some(_), Some(_)) => unreachable!("rejected at validation"),
    }
}

/// Populates the full [`RateSet`] at the given parameter point.
pub fn full_rates(sys: &SystemParams) -> Result<RateSet> {
    let d = &sys.derived;
    let g_m = coupling_gm(sys)?;
    let g_at = coupling_gat(sys);
    let k_th = resolve_thermal_link(sys)?;
    let p_abs =
        sys.membrane.abs2 * 4.0 * sys.cavity.finesse * sys.cavity.power_p / std::f64::consts::PI;
    let delta_t = p_abs / k_th;
    let n_m_bar = K_B * (sys.membrane.t0 + delta_t) / (HBAR * sys.membrane.omega_m);
    let gamma_m = sys.membrane.omega_m / sys.membrane.q_m;
    let gamma_at_diff =
        (d.k_l * d.l_at).powi(2) * sys.atoms.gamma_se * d.v0 / (HBAR * sys.atoms.delta.abs());
    Ok(RateSet {
        g_m,
        g_at,
        g: 2.0 * g_at * g_m,
        gamma_m,
        gamma_m_diff: 2.0 * g_m * g_m,
        gamma_at_diff,
        n_m_bar,
        gamma_m_th: gamma_m * n_m_bar,
        delta_t,
        omega_m: sys.membrane.omega_m,
        omega_at: sys.atoms.omega_at,
    })
}

/// The factorized coupling in the resonant on-slope configuration,
/// compared against the full pipeline.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingEstimate {
    /// omega_at sqrt(m omega_at/(M omega_m)) |r_m| sqrt(N) (2F/pi).
    pub g_factorized: f64,
    /// g from [`full_rates`].
    pub g_full: f64,
    /// |g_factorized - g_full| / g_full.
    pub rel_dev: f64,
}

/// Evaluates the closed-form factorization of g and confirms it matches
/// the full pipeline. Requires the resonant on-slope configuration.
pub fn scaling_estimate(sys: &SystemParams) -> Result<ScalingEstimate> {
    if (sys.atoms.omega_at / sys.membrane.omega_m - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(
            "scaling_estimate requires omega_at = omega_m".into(),
        ));
    }
    if sys.membrane.placement != Placement::OnSlope {
        return Err(Error::Validation(
            "scaling_estimate requires on-slope placement".into(),
        ));
    }
    let r_m = membrane_reflectivity(sys)?;
    let g_factorized = sys.atoms.omega_at
        * (sys.atoms.mass * sys.atoms.omega_at / (sys.membrane.mass * sys.membrane.omega_m))
            .sqrt()
        * r_m
        * sys.atoms.n_atoms.sqrt()
        * 2.0
        * sys.cavity.finesse
        / std::f64::consts::PI;
    let g_full = full_rates(sys)?.g;
    Ok(ScalingEstimate {
        g_factorized,
        g_full,
        rel_dev: (g_factorized - g_full).abs() / g_full,
    })
}

/// Radiation-pressure diffusion via its independent closed form,
/// (4P/Mc^2)(omega_L/omega_m) |r_m|^2 (2F/pi)^2; equals 2 g_m^2 when the
/// laser frequency is tied to the wavenumber by omega_L = c k_L.
pub fn gamma_m_diff_radiation_route(sys: &SystemParams) -> Result<f64> {
    let r_m = membrane_reflectivity(sys)?;
    Ok(4.0 * sys.cavity.power_p / (sys.membrane.mass * C * C)
        * (sys.derived.omega_l / sys.membrane.omega_m)
        * r_m
        * r_m
        * (2.0 * sys.cavity.finesse / std::f64::consts::PI).powi(2))
}
