//! Transfer-matrix optics of the 1D cavity model.
//!
//! The cavity is bounded by a perfect mirror at z = 0 and a lossless
//! dielectric slab acting as the output coupler. A second slab inside the
//! cavity models the membrane. The output-coupler slab is synthesized from
//! the requested finesse as a quarter-wave layer at the design frequency,
//! which makes its reflection real and positive there.
//!
//! A membrane with appreciable reflectivity shifts the bare resonance by
//! hundreds of linewidths, so construction re-tunes the mirror position to
//! the half-wave condition of the *loaded* cavity nearest the configured
//! length. The design frequency is then a resonance by construction.

use num_complex::Complex64;

use crate::constants::C;
use crate::error::{Error, Result};
use crate::params::{Placement, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);
const TWO_I: Complex64 = Complex64::new(0.0, 2.0);

/// Amplitude reflection and transmission of a lossless dielectric slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabResponse {
    /// Amplitude reflection coefficient.
    pub r: Complex64,
    /// Amplitude transmission coefficient.
    pub t: Complex64,
}

/// Geometric description of one slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    /// Refractive index, >= 1.
    pub n: f64,
    /// Thickness [m].
    pub d: f64,
}

/// Reflection/transmission of a slab of index `n`, thickness `d`, at
/// vacuum wavenumber `k`.
pub fn slab(n: f64, d: f64, k: f64) -> Result<SlabResponse> {
    if !(n >= 1.0) {
        return Err(Error::Validation(format!("slab index must be >= 1, got {n}")));
    }
    if !(d > 0.0) || !(k > 0.0) {
        return Err(Error::Validation(
            "slab thickness and wavenumber must be > 0".into(),
        ));
    }
    let kdn = k * d * n;
    let den = TWO_I * n * kdn.cos() + (1.0 + n * n) * kdn.sin();
    Ok(SlabResponse {
        r: (n * n - 1.0) * kdn.sin() / den,
        t: TWO_I * n / den,
    })
}

/// Which 1D geometry the model describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Fixed perfect mirror, membrane slab at `ell`, output slab at the far end.
    MembraneInMiddle {
        /// Membrane slab.
        membrane: Slab,
        /// Membrane position measured from the perfect mirror [m].
        ell: f64,
    },
    /// No internal slab; the oscillating element is the end mirror itself.
    MovableMirror,
}

/// Resolved optical geometry, resonant at `omega_l` by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityModel {
    pub kind: Geometry,
    /// Output-coupler slab.
    pub mirror: Slab,
    /// Operating mirror position [m] (half-wave condition of the loaded
    /// cavity nearest the configured length).
    pub length: f64,
    /// Length requested at construction [m].
    pub length_configured: f64,
    pub finesse: f64,
    /// Design angular frequency [rad/s].
    pub omega_l: f64,
    /// Half-linewidth pi c/(2 F L) at the operating length [rad/s].
    pub kappa: f64,
}

/// Output-coupler slab with |r| matching `finesse` and a quarter-wave
/// thickness at `k_l`, so the reflection is real positive on design.
pub fn mirror_slab_for_finesse(finesse: f64, k_l: f64) -> Result<Slab> {
    if !(finesse >= 1.0) {
        return Err(Error::Validation(format!(
            "finesse must be >= 1, got {finesse}"
        )));
    }
    // Solve F = pi sqrt(r)/(1 - r) for the intensity reflectivity r.
    let pi = std::f64::consts::PI;
    let s = (-pi + (pi * pi + 4.0 * finesse * finesse).sqrt()) / (2.0 * finesse);
    let r = s * s;
    let n = ((1.0 + r) / (1.0 - r)).sqrt();
    Ok(Slab {
        n,
        d: pi / (2.0 * k_l * n),
    })
}

impl CavityModel {
    /// Membrane-in-the-middle geometry. `ell` places the membrane
    /// explicitly; `None` puts it on the intensity slope nearest mid-cavity.
    pub fn membrane_in_middle(
        membrane: Slab,
        ell: Option<f64>,
        finesse: f64,
        length_l: f64,
        lambda_l: f64,
    ) -> Result<Self> {
        if !(length_l > 0.0) || !(lambda_l > 0.0) {
            return Err(Error::Validation(
                "cavity length and wavelength must be > 0".into(),
            ));
        }
        let pi = std::f64::consts::PI;
        let k_l = 2.0 * pi / lambda_l;
        let omega_l = C * k_l;
        let mirror = mirror_slab_for_finesse(finesse, k_l)?;
        let ell = match ell {
            Some(e) => {
                if !(e > 0.0 && e < length_l) {
                    return Err(Error::Validation(
                        "membrane position must satisfy 0 < ell < length".into(),
                    ));
                }
                e
            }
            None => {
                // sin(2 k_L ell) = 1 point nearest L/2.
                let j = (k_l * length_l / 2.0 - pi / 4.0) / pi;
                (pi / 4.0 + pi * j.round()) / k_l
            }
        };
        let sr = slab(membrane.n, membrane.d, k_l)?;
        let gap = Complex64::new(1.0, 0.0) - sr.r * (TWO_I * k_l * ell).exp();
        if gap.norm() < 1e-12 {
            return Err(Error::DegenerateCavity(
                "membrane gap denominator vanished at the design frequency".into(),
            ));
        }
        let a = sr.t * (-I * k_l * membrane.d).exp() / gap;
        let phi = a.arg();
        // Half-wave condition of the loaded cavity nearest the configured L.
        let nu = ((2.0 * k_l * length_l + 2.0 * phi) / (2.0 * pi)).round();
        let length = (pi * nu - phi) / k_l;
        Ok(Self {
            kind: Geometry::MembraneInMiddle { membrane, ell },
            mirror,
            length,
            length_configured: length_l,
            finesse,
            omega_l,
            kappa: pi * C / (2.0 * finesse * length),
        })
    }

    /// Movable-mirror geometry: no internal slab.
    pub fn movable_mirror(finesse: f64, length_l: f64, lambda_l: f64) -> Result<Self> {
        if !(length_l > 0.0) || !(lambda_l > 0.0) {
            return Err(Error::Validation(
                "cavity length and wavelength must be > 0".into(),
            ));
        }
        let pi = std::f64::consts::PI;
        let k_l = 2.0 * pi / lambda_l;
        let mirror = mirror_slab_for_finesse(finesse, k_l)?;
        let nu = (k_l * length_l / pi).round();
        let length = nu * pi / k_l;
        Ok(Self {
            kind: Geometry::MovableMirror,
            mirror,
            length,
            length_configured: length_l,
            finesse,
            omega_l: C * k_l,
            kappa: pi * C / (2.0 * finesse * length),
        })
    }

    /// Membrane geometry from validated system parameters.
    pub fn from_system(sys: &SystemParams) -> Result<Self> {
        let ell = match sys.membrane.placement {
            Placement::OnSlope => None,
            Placement::AtPosition(e) => Some(e),
        };
        Self::membrane_in_middle(
            Slab {
                n: sys.membrane.n_m,
                d: sys.membrane.d_m,
            },
            ell,
            sys.cavity.finesse,
            sys.cavity.length_l,
            sys.atoms.lambda_l,
        )
    }
}

/// Compound response at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityResponse {
    /// Intra-gap factor A_w (1 for the movable-mirror geometry).
    pub a_w: Complex64,
    /// Outside factor T_w; |T_w|^2 is the intensity buildup.
    pub t_w: Complex64,
}

/// Evaluates A_w and T_w at `omega`.
pub fn cavity_response(model: &CavityModel, omega: f64) -> Result<CavityResponse> {
    if !(omega > 0.0) {
        return Err(Error::Validation(format!(
            "cavity_response frequency must be > 0, got {omega}"
        )));
    }
    let k = omega / C;
    let a_w = match model.kind {
        Geometry::MembraneInMiddle { membrane, ell } => {
            let sr = slab(membrane.n, membrane.d, k)?;
            let den = Complex64::new(1.0, 0.0) - sr.r * (TWO_I * k * ell).exp();
            if den.norm() < 1e-12 {
                return Err(Error::DegenerateCavity(format!(
                    "membrane gap denominator |1 - r e^{{2ikl}}| < 1e-12 at omega={omega:e}"
                )));
            }
            sr.t * (-I * k * membrane.d).exp() / den
        }
        Geometry::MovableMirror => Complex64::new(1.0, 0.0),
    };
    let phi = a_w.arg();
    let mir = slab(model.mirror.n, model.mirror.d, k)?;
    let den = Complex64::new(1.0, 0.0)
        - mir.r * (TWO_I * (k * model.length + phi)).exp();
    if den.norm() < 1e-12 {
        return Err(Error::DegenerateCavity(format!(
            "cavity denominator |1 - r e^{{2i(kL+phi)}}| < 1e-12 at omega={omega:e}"
        )));
    }
    let t_w = a_w * mir.t * (-I * k * model.mirror.d).exp() / den;
    Ok(CavityResponse { a_w, t_w })
}

/// Mode function value and its scaled derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitude {
    /// u(z).
    pub u: Complex64,
    /// ubar(z) = u'(z)/(i k).
    pub ubar: Complex64,
}

/// Evaluates the standing-wave mode function at `z` (measured from the
/// perfect mirror). Points strictly inside a slab are out of domain.
pub fn mode_function(model: &CavityModel, omega: f64, z: f64) -> Result<ModeAmplitude> {
    if !(z >= 0.0) {
        return Err(Error::OutOfDomain(format!("z must be >= 0, got {z}")));
    }
    let resp = cavity_response(model, omega)?;
    let k = omega / C;
    let t = resp.t_w;
    let e_plus = (I * k * z).exp();
    let e_minus = (-I * k * z).exp();

    // Region bounds: slab interiors are open intervals, faces belong to
    // the adjacent vacuum regions.
    let (gap_end, inner_end) = match model.kind {
        Geometry::MembraneInMiddle { membrane, ell } => (ell, ell + membrane.d),
        Geometry::MovableMirror => (model.length, model.length),
    };
    let mirror_start = model.length;
    let mirror_end = model.length + model.mirror.d;

    if z <= gap_end {
        // Between the perfect mirror and the first slab: u(0) = 0 exactly.
        return Ok(ModeAmplitude {
            u: t * (e_plus - e_minus) / TWO_I,
            ubar: t * (e_plus + e_minus) / TWO_I,
        });
    }
    if z < inner_end {
        return Err(Error::OutOfDomain(format!(
            "z={z:e} lies inside the membrane slab"
        )));
    }
    if z <= mirror_start {
        let a = resp.a_w;
        return Ok(ModeAmplitude {
            u: t / TWO_I * (e_plus / a.conj() - e_minus / a),
            ubar: t / TWO_I * (e_plus / a.conj() + e_minus / a),
        });
    }
    if z < mirror_end {
        return Err(Error::OutOfDomain(format!(
            "z={z:e} lies inside the mirror slab"
        )));
    }
    // Outside: unit-amplitude standing wave with scattering phase T/T*.
    let s = t / t.conj();
    Ok(ModeAmplitude {
        u: (s * e_plus - e_minus) / TWO_I,
        ubar: (s * e_plus + e_minus) / TWO_I,
    })
}

/// Lorentzian approximation to |T_w|^2 about the resonance nearest `omega`.
pub fn lorentzian_t2(model: &CavityModel, omega: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let fsr = pi * C / model.length;
    let nu = (omega / fsr).round();
    let detuning = omega - nu * fsr;
    let k2 = model.kappa * model.kappa;
    (2.0 * model.finesse / pi) * k2 / (k2 + detuning * detuning)
}

/// One row of a frequency scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanPoint {
    pub omega: f64,
    pub response: CavityResponse,
    /// |T_w|^2.
    pub abs_t2: f64,
    /// arg(T_w), unwrapped along the scan by nearest-branch continuation.
    pub phase: f64,
    pub lorentzian_t2: f64,
}

/// Scans [omega_start, omega_end] inclusive with `points` samples,
/// unwrapping the phase along the way.
///
/// The step must not exceed kappa/20 or unwrapping is unreliable.
pub fn scan(
    model: &CavityModel,
    omega_start: f64,
    omega_end: f64,
    points: usize,
) -> Result<Vec<ScanPoint>> {
    if points < 2 || !(omega_end > omega_start) {
        return Err(Error::Validation(
            "scan needs omega_end > omega_start and at least 2 points".into(),
        ));
    }
    let step = (omega_end - omega_start) / (points - 1) as f64;
    if step > model.kappa / 20.0 {
        return Err(Error::Validation(format!(
            "scan step {step:e} exceeds kappa/20 = {:e}; increase points",
            model.kappa / 20.0
        )));
    }
    let mut out = Vec::with_capacity(points);
    let mut prev_phase: Option<f64> = None;
    for i in 0..points {
        let omega = omega_start + step * i as f64;
        let response = cavity_response(model, omega)?;
        let raw = response.t_w.arg();
        let phase = match prev_phase {
            None => raw,
            Some(p) => {
                let two_pi = 2.0 * std::f64::consts::PI;
                raw - two_pi * ((raw - p) / two_pi).round()
            }
        };
        prev_phase = Some(phase);
        out.push(ScanPoint {
            omega,
            response,
            abs_t2: response.t_w.norm_sqr(),
            phase,
            lorentzian_t2: lorentzian_t2(model, omega),
        });
    }
    Ok(out)
}

/// d(arg T)/d(omega) at `omega`, by a 5-point central difference with
/// nearest-branch unwrapping against the center phase.
pub fn phase_slope_at(model: &CavityModel, omega: f64) -> Result<f64> {
    let h = model.kappa * 1e-3;
    let center = cavity_response(model, omega)?.t_w.arg();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut ph = [0.0; 4];
    for (slot, s) in ph.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
        let raw = cavity_response(model, omega + s * h)?.t_w.arg();
        *slot = raw - two_pi * ((raw - center) / two_pi).round();
    }
    Ok((ph[0] - 8.0 * ph[1] + 8.0 * ph[2] - ph[3]) / (12.0 * h))
}

/// Phase slope at the design frequency (resonant by construction).
pub fn phase_slope(model: &CavityModel) -> Result<f64> {
    phase_slope_at(model, model.omega_l)
}

/// Locates the |T_w|^2 maximum near `omega_guess`: coarse scan over one
/// free spectral range, then golden-section refinement to kappa * 1e-6.
pub fn find_resonance(model: &CavityModel, omega_guess: f64) -> Result<f64> {
    let fsr = std::f64::consts::PI * C / model.length;
    let coarse_step = model.kappa / 20.0;
    let half = fsr / 2.0;
    let n = (2.0 * half / coarse_step).ceil() as usize + 1;
    let mut best = (0.0f64, omega_guess);
    for i in 0..n {
        let omega = omega_guess - half + 2.0 * half * i as f64 / (n - 1) as f64;
        if omega <= 0.0 {
            continue;
        }
        let v = cavity_response(model, omega)?.t_w.norm_sqr();
        if v > best.0 {
            best = (v, omega);
        }
    }
    let (mut lo, mut hi) = (best.1 - coarse_step, best.1 + coarse_step);
    let tol = model.kappa * 1e-6;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let value = |omega: f64| -> Result<f64> {
        Ok(cavity_response(model, omega)?.t_w.norm_sqr())
    };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = value(x1)?;
    let mut f2 = value(x2)?;
    let mut budget = 200;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = value(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = value(x1)?;
        }
        budget -= 1;
        if budget == 0 {
            return Err(Error::Convergence(
                "resonance refinement exceeded its iteration budget".into(),
            ));
        }
    }
    Ok(0.5 * (lo + hi))
}
