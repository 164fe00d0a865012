//! System parameters: input records, validation, and derived quantities.
//!
//! Everything downstream consumes a [`SystemParams`], which is immutable
//! after [`build_system`] and safe to share across worker threads.

use serde::{Deserialize, Serialize};

use crate::constants::{C, EPSILON_0, HBAR, K_B};
use crate::error::{Error, Result};
use crate::rates::RateSet;

/// Where the membrane sits along the cavity axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Maximum-slope point of the intracavity intensity, sin(2 k_L ell) = 1.
    #[default]
    OnSlope,
    /// Explicit distance ell [m] from the perfect left mirror.
    AtPosition(f64),
}

/// Membrane oscillator and slab properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneParams {
    /// Fundamental mode frequency [rad/s].
    pub omega_m: f64,
    /// Effective mode mass [kg].
    pub mass: f64,
    /// Mechanical quality factor.
    pub q_m: f64,
    /// Frame temperature [K].
    pub t0: f64,
    /// Refractive index of the slab.
    pub n_m: f64,
    /// Slab thickness [m].
    pub d_m: f64,
    /// Membrane side length [m].
    pub side_l: f64,
    /// Power absorption coefficient (dimensionless, |a_m|^2-style).
    pub abs2: f64,
    /// Forces |r_m| instead of computing it from (n_m, d_m).
    #[serde(default)]
    pub r_m_override: Option<f64>,
    /// Axial placement; defaults to the intensity slope.
    #[serde(default)]
    pub placement: Placement,
    /// Thermal link to the frame [W/K], if known directly.
    #[serde(default)]
    pub k_th: Option<f64>,
    /// Film thermal conductivity [W/(m K)]; used to derive the link when
    /// `k_th` is absent.
    #[serde(default)]
    pub kappa_th: Option<f64>,
}

/// Trapped atomic ensemble properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomParams {
    /// Trap (center-of-mass) frequency [rad/s].
    pub omega_at: f64,
    /// Single-atom mass [kg].
    pub mass: f64,
    /// Atom number.
    pub n_atoms: f64,
    /// Laser detuning from the atomic transition [rad/s], signed.
    pub delta: f64,
    /// Transition dipole moment [C m].
    pub mu: f64,
    /// Natural linewidth of the transition [rad/s].
    pub gamma_se: f64,
    /// Trap/coupling laser wavelength [m].
    pub lambda_l: f64,
}

/// Cavity and drive properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    /// Cavity finesse.
    pub finesse: f64,
    /// Cavity length [m].
    pub length_l: f64,
    /// Transverse mode area [m^2].
    pub mode_area: f64,
    /// Input running-wave power [W].
    pub power_p: f64,
    /// Beam e^-2 intensity radius on the membrane [m].
    pub waist_membrane: f64,
}

/// Quantities derived once at construction; pure functions of the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    /// Membrane zero-point motion sqrt(hbar/(M omega_m)) [m].
    pub l_m: f64,
    /// Atomic zero-point motion sqrt(hbar/(m omega_at)) [m].
    pub l_at: f64,
    /// Laser wavenumber 2 pi / lambda_L [1/m].
    pub k_l: f64,
    /// Laser angular frequency c k_L [rad/s].
    pub omega_l: f64,
    /// Dimensionless laser amplitude sqrt(2 pi P/(hbar omega_L)).
    pub alpha: f64,
    /// Lattice depth matching the configured trap frequency,
    /// m omega_at^2/(2 k_L^2) [J].
    pub v0: f64,
    /// Cavity half-linewidth pi c/(2 F L) [rad/s].
    pub kappa: f64,
    /// Single-photon field scale hbar omega_L/(pi eps0 c A) [(V/m)^2].
    pub e_wl2: f64,
}

/// JSON configuration document: exactly the three input sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub membrane: MembraneParams,
    pub atoms: AtomParams,
    pub cavity: CavityParams,
}

/// Validated parameter set plus derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub membrane: MembraneParams,
    pub atoms: AtomParams,
    pub cavity: CavityParams,
    pub derived: DerivedQuantities,
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg.to_string()))
    }
}

fn validate(membrane: &MembraneParams, atoms: &AtomParams, cavity: &CavityParams) -> Result<()> {
    let m = membrane;
    require(m.omega_m > 0.0, "membrane.omega_m must be > 0")?;
    require(m.mass > 0.0, "membrane.mass must be > 0")?;
    require(m.q_m > 0.0, "membrane.q_m must be > 0")?;
    require(m.t0 > 0.0, "membrane.t0 must be > 0")?;
    require(m.d_m > 0.0, "membrane.d_m must be > 0")?;
    require(m.side_l > 0.0, "membrane.side_l must be > 0")?;
    require(
        (0.0..1.0).contains(&m.abs2),
        "membrane.abs2 must satisfy 0 <= abs2 < 1",
    )?;
    require(m.n_m > 1.0, "membrane.n_m must be > 1")?;
    if let Some(r) = m.r_m_override {
        require(
            r > 0.0 && r < 1.0,
            "membrane.r_m_override must satisfy 0 < r < 1",
        )?;
    }
    if let Placement::AtPosition(ell) = m.placement {
        require(
            ell > 0.0 && ell < cavity.length_l,
            "membrane.placement position must satisfy 0 < ell < cavity.length_l",
        )?;
    }
    if let Some(k) = m.k_th {
        require(k > 0.0, "membrane.k_th must be > 0")?;
    }
    if let Some(k) = m.kappa_th {
        require(k > 0.0, "membrane.kappa_th must be > 0")?;
    }
    require(
        !(m.k_th.is_some() && m.kappa_th.is_some()),
        "membrane.k_th and membrane.kappa_th are mutually exclusive",
    )?;

    let a = atoms;
    require(a.omega_at > 0.0, "atoms.omega_at must be > 0")?;
    require(a.mass > 0.0, "atoms.mass must be > 0")?;
    require(a.n_atoms >= 1.0, "atoms.n_atoms must be >= 1")?;
    require(a.delta != 0.0 && a.delta.is_finite(), "atoms.delta must be nonzero")?;
    require(a.mu > 0.0, "atoms.mu must be > 0")?;
    require(a.gamma_se > 0.0, "atoms.gamma_se must be > 0")?;
    require(a.lambda_l > 0.0, "atoms.lambda_l must be > 0")?;

    let c = cavity;
    require(c.finesse >= 1.0, "cavity.finesse must be >= 1")?;
    require(c.length_l > 0.0, "cavity.length_l must be > 0")?;
    require(c.mode_area > 0.0, "cavity.mode_area must be > 0")?;
    require(c.power_p > 0.0, "cavity.power_p must be > 0")?;
    require(c.waist_membrane > 0.0, "cavity.waist_membrane must be > 0")?;
    Ok(())
}

/// Validates the three sections and populates [`DerivedQuantities`].
///
/// Fails with the first violated invariant rather than clamping.
pub fn build_system(
    membrane: MembraneParams,
    atoms: AtomParams,
    cavity: CavityParams,
) -> Result<SystemParams> {
    validate(&membrane, &atoms, &cavity)?;
    let k_l = 2.0 * std::f64::consts::PI / atoms.lambda_l;
    let omega_l = C * k_l;
    let derived = DerivedQuantities {
        l_m: (HBAR / (membrane.mass * membrane.omega_m)).sqrt(),
        l_at: (HBAR / (atoms.mass * atoms.omega_at)).sqrt(),
        k_l,
        omega_l,
        alpha: (2.0 * std::f64::consts::PI * cavity.power_p / (HBAR * omega_l)).sqrt(),
        v0: atoms.mass * atoms.omega_at.powi(2) / (2.0 * k_l * k_l),
        kappa: std::f64::consts::PI * C / (2.0 * cavity.finesse * cavity.length_l),
        e_wl2: HBAR * omega_l / (std::f64::consts::PI * EPSILON_0 * C * cavity.mode_area),
    };
    Ok(SystemParams {
        membrane,
        atoms,
        cavity,
        derived,
    })
}

impl SystemParams {
    /// Builds from a parsed JSON configuration.
    pub fn from_config(cfg: Config) -> Result<Self> {
        build_system(cfg.membrane, cfg.atoms, cfg.cavity)
    }

    /// The three input sections, for serialization; derived fields are
    /// recomputed on ingestion so a round trip is lossless.
    pub fn config(&self) -> Config {
        Config {
            membrane: self.membrane.clone(),
            atoms: self.atoms.clone(),
            cavity: self.cavity.clone(),
        }
    }

    /// Reference configuration used by the golden tests and the CLI default.
    pub fn reference() -> Self {
        let membrane = MembraneParams {
            omega_m: 2.0 * std::f64::consts::PI * 400e3,
            mass: 3.6e-11,
            q_m: 1e7,
            t0: 1.6,
            n_m: 2.0,
            d_m: 50e-9,
            side_l: 150e-6,
            abs2: 1e-6,
            r_m_override: Some(0.47),
            placement: Placement::OnSlope,
            k_th: Some(4e-7),
            kappa_th: None,
        };
        let atoms = AtomParams {
            omega_at: 2.0 * std::f64::consts::PI * 400e3,
            mass: 1.44e-25,
            n_atoms: 1e8,
            delta: 2.0 * std::f64::consts::PI * 1.0e9,
            mu: 1.5e-29,
            gamma_se: 2.0 * std::f64::consts::PI * 6.07e6,
            lambda_l: 780e-9,
        };
        let cavity = CavityParams {
            finesse: 450.0,
            length_l: 0.01,
            mode_area: 9.6e-8,
            power_p: 2.8e-3,
            waist_membrane: 15e-6,
        };
        build_system(membrane, atoms, cavity).expect("reference config is valid")
    }
}

/// Laser power that makes the lattice trap frequency equal the configured
/// omega_at: P = m omega_at^2 eps0 c A hbar delta / (4 k_L^2 mu^2).
///
/// Requires blue detuning (delta > 0); the trap forms at intensity minima.
pub fn required_power(atoms: &AtomParams, cavity: &CavityParams) -> Result<f64> {
    if atoms.delta <= 0.0 {
        return Err(Error::DetuningSign(format!(
            "required_power needs delta > 0 (blue detuning), got {:e}",
            atoms.delta
        )));
    }
    let k_l = 2.0 * std::f64::consts::PI / atoms.lambda_l;
    Ok(atoms.mass * atoms.omega_at.powi(2) * EPSILON_0 * C * cavity.mode_area * HBAR * atoms.delta
        / (4.0 * k_l * k_l * atoms.mu * atoms.mu))
}

/// Effective temperature entering the bath occupation, T0 plus the laser
/// induced rise; here only for hierarchy context (full value in rates).
pub fn thermal_occupation(omega_m: f64, temperature: f64) -> f64 {
    K_B * temperature / (HBAR * omega_m)
}

/// Disposition of one separation-of-scales check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

/// One ratio in the separation-of-scales chain.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyCheck {
    /// Which separation this ratio tests, e.g. "kappa >> omega_at".
    pub name: &'static str,
    /// The computed ratio; larger is better.
    pub ratio: f64,
    pub status: CheckStatus,
}

/// Result of [`check_hierarchy`]; report-only, never an error.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyReport {
    pub checks: Vec<HierarchyCheck>,
}

impl HierarchyReport {
    /// True when no check FAILed (WARNs are tolerated but reported).
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

/// Tunables for [`check_hierarchy`].
#[derive(Debug, Clone, Copy)]
pub struct HierarchyOptions {
    /// Light round-trip scale tau [s]; default 1 m / c.
    pub tau: f64,
    /// Field bandwidth theta [rad/s]; default 100 kappa.
    pub theta: f64,
    /// Ratio below which a separation FAILs; default 10.
    pub margin: f64,
}

impl HierarchyOptions {
    /// Defaults stated in the model: tau = 1 m / c, theta = 100 kappa.
    pub fn defaults(system: &SystemParams) -> Self {
        Self {
            tau: 1.0 / C,
            theta: 100.0 * system.derived.kappa,
            margin: 10.0,
        }
    }
}

/// Evaluates the separation-of-scales chain
/// delta >> theta >> {1/tau, kappa} >> {omega_at, omega_m} >> {g_m^2, g_at^2, g_m g_at}.
///
/// The kappa >> omega checks (bad-cavity condition) WARN instead of FAIL
/// down to half the margin; everything else is pass/fail at the margin.
pub fn check_hierarchy(
    system: &SystemParams,
    rates: &RateSet,
    opts: &HierarchyOptions,
) -> HierarchyReport {
    let kappa = system.derived.kappa;
    let inv_tau = 1.0 / opts.tau;
    let omega_min = system.membrane.omega_m.min(system.atoms.omega_at);
    let strict = |name, ratio: f64| HierarchyCheck {
        name,
        ratio,
        status: if ratio >= opts.margin {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
    };
    // Bad-cavity band: >= margin pass, >= margin/2 warn, below fail.
    let banded = |name, ratio: f64| HierarchyCheck {
        name,
        ratio,
        status: if ratio >= opts.margin {
            CheckStatus::Pass
        } else if ratio >= 0.5 * opts.margin {
            CheckStatus::Warn
        } else {
            CheckStatus::Fail
        },
    };
    let checks = vec![
        strict("delta >> theta", system.atoms.delta.abs() / opts.theta),
        strict("theta >> 1/tau", opts.theta * opts.tau),
        strict("theta >> kappa", opts.theta / kappa),
        strict("1/tau >> omega_at", inv_tau / system.atoms.omega_at),
        strict("1/tau >> omega_m", inv_tau / system.membrane.omega_m),
        banded("kappa >> omega_at", kappa / system.atoms.omega_at),
        banded("kappa >> omega_m", kappa / system.membrane.omega_m),
        strict("omega >> g_m^2", omega_min / (rates.g_m * rates.g_m)),
        strict("omega >> g_at^2", omega_min / (rates.g_at * rates.g_at)),
        strict("omega >> g_m*g_at", omega_min / (rates.g_m * rates.g_at)),
    ];
    HierarchyReport { checks }
}
