//! Linear Gaussian dynamics of the coupled membrane/atom pair.
//!
//! Everything here operates on the quadrature basis (x_m, p_m, x_at, p_at)
//! with [x, p] = i and vacuum covariance I/2. The drift keeps the full
//! x_m x_at coupling; the rotating-wave beam splitter appears only as an
//! analytic oracle in tests.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::rates::{self, RateSet};

/// Drift and diffusion of the linear model, basis (x_m, p_m, x_at, p_at).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    /// Drift matrix [1/s].
    pub a: Matrix4<f64>,
    /// Symmetric positive semidefinite diffusion matrix [1/s].
    pub d: Matrix4<f64>,
}

/// Gaussian state: quadrature means and symmetrized covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState {
    /// Product of thermal states with the given occupations, zero mean.
    pub fn thermal(n_m: f64, n_at: f64) -> Self {
        let mut cov = Matrix4::zeros();
        cov[(0, 0)] = n_m + 0.5;
        cov[(1, 1)] = n_m + 0.5;
        cov[(2, 2)] = n_at + 0.5;
        cov[(3, 3)] = n_at + 0.5;
        Self {
            mean: Vector4::zeros(),
            cov,
        }
    }

    pub fn vacuum() -> Self {
        Self::thermal(0.0, 0.0)
    }
}

/// Strength of the auxiliary laser cooling acting on the atomic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingSettings {
    /// Amplitude decay parameter of the atomic mode [1/s].
    pub gamma_cool: f64,
}

impl CoolingSettings {
    pub fn new(gamma_cool: f64) -> Result<Self> {
        if !gamma_cool.is_finite() || gamma_cool < 0.0 {
            return Err(Error::Validation(format!(
                "gamma_cool must be finite and >= 0, got {gamma_cool:e}"
            )));
        }
        Ok(Self { gamma_cool })
    }
}

fn assemble(
    omega_m: f64,
    omega_at: f64,
    g: f64,
    gamma_m: f64,
    gamma_cool: f64,
    d_diag: [f64; 4],
) -> LinearModel {
    let mut a = Matrix4::zeros();
    a[(0, 0)] = -gamma_m / 2.0;
    a[(0, 1)] = omega_m;
    a[(1, 0)] = -omega_m;
    a[(1, 1)] = -gamma_m / 2.0;
    a[(1, 2)] = g;
    a[(2, 2)] = -gamma_cool / 2.0;
    a[(2, 3)] = omega_at;
    a[(3, 0)] = g;
    a[(3, 2)] = -omega_at;
    a[(3, 3)] = -gamma_cool / 2.0;
    let mut d = Matrix4::zeros();
    for (i, v) in d_diag.into_iter().enumerate() {
        d[(i, i)] = v;
    }
    LinearModel { a, d }
}

/// Drift and diffusion from the physical rates.
///
/// The membrane bath (occupation N̄_m) drives both membrane quadratures;
/// the radiation force drives only p_m; the cooling vacuum drives both
/// atomic quadratures; the trap-light force drives only p_at.
pub fn build_model(rates: &RateSet, cooling: &CoolingSettings) -> Result<LinearModel> {
    let c = CoolingSettings::new(cooling.gamma_cool)?;
    let bath = rates.gamma_m * (rates.n_m_bar + 0.5);
    Ok(assemble(
        rates.omega_m,
        rates.omega_at,
        rates.g,
        rates.gamma_m,
        c.gamma_cool,
        [
            bath,
            bath + rates.gamma_m_diff,
            c.gamma_cool / 2.0,
            c.gamma_cool / 2.0 + rates.gamma_at_diff,
        ],
    ))
}

/// Symplectic form for the basis (x_m, p_m, x_at, p_at).
fn symplectic_form() -> Matrix4<f64> {
    let mut omega = Matrix4::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    omega
}

/// (max Re λ, max |λ|) of the drift.
fn drift_spectrum_extents(a: &Matrix4<f64>) -> (f64, f64) {
    let eig = a.complex_eigenvalues();
    let mut max_re = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    for l in eig.iter() {
        max_re = max_re.max(l.re);
        max_abs = max_abs.max(l.norm());
    }
    (max_re, max_abs)
}

/// A model is strictly stable when every drift eigenvalue is safely in
/// the left half plane; marginal (lossless) models do not qualify.
pub fn is_strictly_stable(model: &LinearModel) -> bool {
    let (max_re, max_abs) = drift_spectrum_extents(&model.a);
    max_re < -1e-12 * max_abs.max(f64::MIN_POSITIVE)
}

fn require_stable(model: &LinearModel) -> Result<()> {
    if !is_strictly_stable(model) {
        let (max_re, _) = drift_spectrum_extents(&model.a);
        return Err(Error::UnstableModel(format!(
            "drift not strictly stable, max Re eigenvalue = {max_re:e}"
        )));
    }
    Ok(())
}

const UNIQUE_COV: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

fn unknown_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    UNIQUE_COV
        .iter()
        .position(|&(a, b)| a == lo && b == hi)
        .expect("index pair in range")
}

fn lyapunov_residual(model: &LinearModel, cov: &Matrix4<f64>) -> f64 {
    (model.a * cov + cov * model.a.transpose() + model.d).norm()
}

/// Unique steady covariance of a strictly stable model, zero mean.
///
/// A Σ + Σ Aᵀ + D = 0 solved densely in the 10 unique entries of Σ.
pub fn steady_state(model: &LinearModel) -> Result<GaussianState> {
    require_stable(model)?;
    let a = &model.a;
    let mut m = SMatrix::<f64, 10, 10>::zeros();
    let mut rhs = SVector::<f64, 10>::zeros();
    for (eq, &(i, j)) in UNIQUE_COV.iter().enumerate() {
        for k in 0..4 {
            m[(eq, unknown_index(k, j))] += a[(i, k)];
            m[(eq, unknown_index(i, k))] += a[(j, k)];
        }
        rhs[eq] = -model.d[(i, j)];
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("Lyapunov system is singular".into()))?;
    let mut cov = Matrix4::zeros();
    for (idx, &(i, j)) in UNIQUE_COV.iter().enumerate() {
        cov[(i, j)] = sol[idx];
        cov[(j, i)] = sol[idx];
    }
    let residual = lyapunov_residual(model, &cov);
    if residual > 1e-10 * model.d.norm() {
        return Err(Error::SingularSystem(format!(
            "Lyapunov residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(GaussianState {
        mean: Vector4::zeros(),
        cov,
    })
}

/// Mode occupations (n_m, n_at); a nonzero mean contributes
/// (⟨x⟩² + ⟨p⟩²)/2 per mode.
pub fn occupations(state: &GaussianState) -> (f64, f64) {
    let n = |x: usize, p: usize| {
        (state.cov[(x, x)] + state.cov[(p, p)] - 1.0) / 2.0
            + (state.mean[x] * state.mean[x] + state.mean[p] * state.mean[p]) / 2.0
    };
    (n(0, 1), n(2, 3))
}

/// Min eigenvalue of the Hermitian matrix Σ + (i/2)Ω; non-negative (up
/// to roundoff) exactly for physical covariances.
pub fn min_uncertainty_eig(state: &GaussianState) -> f64 {
    // Embed H = S + iK as the real symmetric [[S, -K], [K, S]]; its
    // spectrum is that of H, doubled.
    let s = state.cov;
    let k = symplectic_form() * 0.5;
    let mut e = SMatrix::<f64, 8, 8>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            e[(i, j)] = s[(i, j)];
            e[(i + 4, j + 4)] = s[(i, j)];
            e[(i, j + 4)] = -k[(i, j)];
            e[(i + 4, j)] = k[(i, j)];
        }
    }
    e.symmetric_eigen().eigenvalues.min()
}

/// Symplectic eigenvalues (ν₁, ν₂) of the covariance, ν ≥ 1/2 for
/// physical states.
pub fn symplectic_eigenvalues(cov: &Matrix4<f64>) -> (f64, f64) {
    let m = symplectic_form() * cov;
    let mut mags: Vec<f64> = m.complex_eigenvalues().iter().map(|l| l.im.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    // The four eigenvalues are ±iν₁, ±iν₂.
    (mags[1], mags[3])
}

/// Substep cap for one evolve call.
const EVOLVE_STEP_BUDGET: u64 = 1 << 26;

fn cov_derivative(model: &LinearModel, cov: &Matrix4<f64>) -> Matrix4<f64> {
    model.a * cov + cov * model.a.transpose() + model.d
}

fn rk4_cov_step(model: &LinearModel, cov: &Matrix4<f64>, h: f64) -> Matrix4<f64> {
    let k1 = cov_derivative(model, cov);
    let k2 = cov_derivative(model, &(cov + k1 * (h / 2.0)));
    let k3 = cov_derivative(model, &(cov + k2 * (h / 2.0)));
    let k4 = cov_derivative(model, &(cov + k3 * h));
    let next = cov + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    // Symmetrize to stop roundoff drift.
    (next + next.transpose()) * 0.5
}

/// Evolves the Gaussian state over the grid, which must start at 0 and
/// increase strictly.
///
/// Means propagate exactly through the matrix exponential; covariances
/// integrate dΣ/dt = AΣ + ΣAᵀ + D with fixed-step RK4, internally
/// subdivided so the step stays at or below (50·max rate)⁻¹. A grid
/// needing more substeps than the budget allows is refused.
pub fn evolve(
    model: &LinearModel,
    initial: &GaussianState,
    t_grid: &[f64],
) -> Result<Vec<GaussianState>> {
    if t_grid.is_empty() || t_grid[0] != 0.0 {
        return Err(Error::Validation("t_grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("t_grid must increase strictly".into()));
    }
    let scale = model
        .a
        .iter()
        .map(|v| v.abs())
        .chain((0..4).map(|i| model.d[(i, i)]))
        .fold(0.0f64, f64::max);
    // Twice tighter than the stability contract (50·rate)⁻¹ so the
    // symplectic invariants survive 10³ oscillation periods to 1e-8.
    let h_max = if scale > 0.0 {
        1.0 / (100.0 * scale)
    } else {
        f64::INFINITY
    };

    let mut required: u64 = 0;
    for w in t_grid.windows(2) {
        let dt = w[1] - w[0];
        required = required.saturating_add(((dt / h_max).ceil() as u64).max(1));
    }
    if required > EVOLVE_STEP_BUDGET {
        return Err(Error::StepSize {
            required,
            budget: EVOLVE_STEP_BUDGET,
        });
    }

    let mut out = Vec::with_capacity(t_grid.len());
    out.push(*initial);
    let mut cov = initial.cov;
    for w in t_grid.windows(2) {
        let dt = w[1] - w[0];
        let n_sub = ((dt / h_max).ceil() as u64).max(1);
        let h = dt / n_sub as f64;
        for _ in 0..n_sub {
            cov = rk4_cov_step(model, &cov, h);
        }
        let mean = (model.a * w[1]).exp() * initial.mean;
        out.push(GaussianState { mean, cov });
    }
    Ok(out)
}

/// One drift eigenvalue reported as oscillation frequency and decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalMode {
    /// |Im λ| [rad/s].
    pub frequency: f64,
    /// −Re λ [1/s].
    pub decay: f64,
}

/// All four drift eigenvalues as (|Im|, −Re), sorted by frequency.
/// Conjugate pairs appear twice.
pub fn normal_modes(model: &LinearModel) -> Vec<NormalMode> {
    let mut modes: Vec<NormalMode> = model
        .a
        .complex_eigenvalues()
        .iter()
        .map(|l| NormalMode {
            frequency: l.im.abs(),
            decay: -l.re,
        })
        .collect();
    modes.sort_by(|a, b| {
        a.frequency
            .partial_cmp(&b.frequency)
            .expect("finite eigenvalues")
    });
    modes
}

/// Quadrature noise spectra on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Angular frequency grid [rad/s].
    pub omega: Vec<f64>,
    pub s_x_m: Vec<f64>,
    pub s_p_m: Vec<f64>,
    pub s_x_at: Vec<f64>,
    pub s_p_at: Vec<f64>,
}

/// S(ω) = M D M† with M = (−iωI − A)⁻¹; diagonal (real) entries per
/// quadrature. Normalized so ∫ S dω / 2π recovers the steady covariance.
pub fn spectrum(model: &LinearModel, omega_grid: &[f64]) -> Result<Spectrum> {
    require_stable(model)?;
    let mut out = Spectrum {
        omega: omega_grid.to_vec(),
        s_x_m: Vec::with_capacity(omega_grid.len()),
        s_p_m: Vec::with_capacity(omega_grid.len()),
        s_x_at: Vec::with_capacity(omega_grid.len()),
        s_p_at: Vec::with_capacity(omega_grid.len()),
    };
    let a_c = model.a.map(|v| Complex64::new(v, 0.0));
    let d_c = model.d.map(|v| Complex64::new(v, 0.0));
    for &w in omega_grid {
        let m = (Matrix4::identity().map(|v: f64| Complex64::new(v, 0.0))
            * Complex64::new(0.0, -w)
            - a_c)
            .try_inverse()
            .ok_or_else(|| {
                Error::SingularSystem(format!("response matrix singular at omega = {w:e}"))
            })?;
        let s = m * d_c * m.adjoint();
        out.s_x_m.push(s[(0, 0)].re.max(0.0));
        out.s_p_m.push(s[(1, 1)].re.max(0.0));
        out.s_x_at.push(s[(2, 2)].re.max(0.0));
        out.s_p_at.push(s[(3, 3)].re.max(0.0));
    }
    Ok(out)
}

/// Adiabatic (rate-equation) prediction for the cooled steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdiabaticCooling {
    /// Sympathetic cooling rate [1/s].
    pub gamma_sym: f64,
    /// Predicted membrane occupation.
    pub n_ss: f64,
    /// Mechanical-noise part.
    pub n_ss_1: f64,
    /// Cooling-backaction part.
    pub n_ss_2: f64,
    /// Trap-light diffusion part.
    pub n_ss_3: f64,
}

/// Occupation balance after adiabatic elimination of the atoms.
pub fn adiabatic_cooling(rates: &RateSet, cooling: &CoolingSettings) -> Result<AdiabaticCooling> {
    if !cooling.gamma_cool.is_finite() || cooling.gamma_cool < 0.0 {
        return Err(Error::Validation(format!(
            "gamma_cool must be finite and >= 0, got {:e}",
            cooling.gamma_cool
        )));
    }
    if cooling.gamma_cool == 0.0 {
        return Err(Error::DivisionDomain(
            "adiabatic cooling formulas need gamma_cool > 0".into(),
        ));
    }
    let gc = cooling.gamma_cool;
    let lorentz = 1.0 + (gc / (4.0 * rates.omega_m)).powi(2);
    let gamma_sym = rates.g * rates.g / gc / lorentz;
    let n_ss_1 = (rates.gamma_m * rates.n_m_bar + rates.gamma_m_diff / 2.0)
        / (rates.gamma_m + gamma_sym);
    let n_ss_2 = (gc / (4.0 * rates.omega_at)).powi(2);
    let n_ss_3 = rates.gamma_at_diff / (2.0 * gc);
    Ok(AdiabaticCooling {
        gamma_sym,
        n_ss: n_ss_1 + n_ss_2 + n_ss_3,
        n_ss_1,
        n_ss_2,
        n_ss_3,
    })
}

/// Closed-form shape of n_ss,1 deep in the cooled regime (γ_m ≪ Γ),
/// exposing how the optimum emerges from the finesse dependence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighCoolingExpansion {
    /// Finesse weight of the heating contribution (dimensionless).
    pub a: f64,
    /// Finesse weight of the support-temperature contribution.
    pub b: f64,
    /// n_ss,1 evaluated from the expansion.
    pub n_ss_1_approx: f64,
}

/// Expansion coefficients of the mechanical-noise occupation in the
/// strongly cooled limit: n₁ ≈ C·P·(1 + a/𝓕) + b·N_support/𝓕².
pub fn high_cooling_expansion(
    sys: &SystemParams,
    cooling: &CoolingSettings,
) -> Result<HighCoolingExpansion> {
    if cooling.gamma_cool <= 0.0 {
        return Err(Error::DivisionDomain(
            "high-cooling expansion needs gamma_cool > 0".into(),
        ));
    }
    let consts = crate::constants::PhysicalConstants::codata();
    let gc = cooling.gamma_cool;
    let r = rates::membrane_reflectivity(sys)?;
    let r2 = r * r;
    let k_th = rates::resolve_thermal_link(sys)?;
    let mem = &sys.membrane;
    let at = &sys.atoms;
    let gamma_m = mem.omega_m / mem.q_m;
    let a = std::f64::consts::PI * consts.k_b * mem.mass * consts.c * consts.c * mem.abs2
        * gamma_m
        / (2.0 * consts.hbar * sys.derived.omega_l * r2 * k_th);
    let b = gc * mem.mass * std::f64::consts::PI.powi(2) * gamma_m
        / (4.0 * at.omega_at * at.omega_at * at.mass * r2 * at.n_atoms);
    let prefactor = 2.0 * gc * sys.derived.omega_l * sys.cavity.power_p
        / (at.n_atoms * at.omega_at.powi(3) * at.mass * consts.c * consts.c);
    let n_support = consts.k_b * mem.t0 / (consts.hbar * mem.omega_m);
    let f = sys.cavity.finesse;
    let n_ss_1_approx = prefactor * (1.0 + a / f) + b * n_support / (f * f);
    Ok(HighCoolingExpansion {
        a,
        b,
        n_ss_1_approx,
    })
}

/// Excitation-exchange time series, with and without noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeDemo {
    pub t: Vec<f64>,
    pub noiseless_n_m: Vec<f64>,
    pub noiseless_n_at: Vec<f64>,
    pub noisy_n_m: Vec<f64>,
    pub noisy_n_at: Vec<f64>,
}

/// Swaps n0 membrane quanta back and forth with the atoms over three
/// exchange periods 2π/g, once without any noise or damping and once
/// with the full diffusion (cooling off).
pub fn exchange_demo(rates: &RateSet, n0: f64) -> Result<ExchangeDemo> {
    if !(rates.g > 0.0) {
        return Err(Error::Validation(format!(
            "exchange demo needs g > 0, got {:e}",
            rates.g
        )));
    }
    if !(n0 >= 0.0) {
        return Err(Error::Validation(format!(
            "initial occupation must be >= 0, got {n0:e}"
        )));
    }
    let points = 600usize;
    let t_end = 3.0 * 2.0 * std::f64::consts::PI / rates.g;
    let t: Vec<f64> = (0..=points)
        .map(|i| t_end * i as f64 / points as f64)
        .collect();
    let initial = GaussianState::thermal(n0, 0.0);

    let clean = assemble(rates.omega_m, rates.omega_at, rates.g, 0.0, 0.0, [0.0; 4]);
    let bath = rates.gamma_m * (rates.n_m_bar + 0.5);
    let noisy = assemble(
        rates.omega_m,
        rates.omega_at,
        rates.g,
        rates.gamma_m,
        0.0,
        [bath, bath + rates.gamma_m_diff, 0.0, rates.gamma_at_diff],
    );

    let mut out = ExchangeDemo {
        t: t.clone(),
        noiseless_n_m: Vec::with_capacity(t.len()),
        noiseless_n_at: Vec::with_capacity(t.len()),
        noisy_n_m: Vec::with_capacity(t.len()),
        noisy_n_at: Vec::with_capacity(t.len()),
    };
    for state in evolve(&clean, &initial, &t)? {
        let (n_m, n_at) = occupations(&state);
        out.noiseless_n_m.push(n_m);
        out.noiseless_n_at.push(n_at);
    }
    for state in evolve(&noisy, &initial, &t)? {
        let (n_m, n_at) = occupations(&state);
        out.noisy_n_m.push(n_m);
        out.noisy_n_at.push(n_at);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table_rates() -> RateSet {
        let sys = SystemParams::reference();
        rates::full_rates(&sys).unwrap()
    }

    fn cooled() -> CoolingSettings {
        CoolingSettings { gamma_cool: 2.2e5 }
    }

    /// Bare oscillator pair for analytic checks; rates in arbitrary
    /// consistent units.
    fn synthetic_rates(
        omega: f64,
        g: f64,
        gamma_m: f64,
        gamma_m_diff: f64,
        gamma_at_diff: f64,
        n_m_bar: f64,
    ) -> RateSet {
        RateSet {
            g_m: 0.0,
            g_at: 0.0,
            g,
            gamma_m,
            gamma_m_diff,
            gamma_at_diff,
            n_m_bar,
            gamma_m_th: gamma_m * n_m_bar,
            delta_t: 0.0,
            omega_m: omega,
            omega_at: omega,
        }
    }

    #[test]
    fn decoupled_lossless_atom_block_oscillates_freely() {
        let r = synthetic_rates(7.0, 0.0, 0.3, 0.0, 0.0, 1.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        let eig = model.a.complex_eigenvalues();
        let mut found = 0;
        for l in eig.iter() {
            if l.re.abs() < 1e-12 && (l.im.abs() - 7.0).abs() < 1e-9 {
                found += 1;
            }
        }
        assert_eq!(found, 2, "atom block eigenvalues not ±i omega_at");
    }

    #[test]
    fn lossless_coupled_drift_is_hamiltonian() {
        let r = synthetic_rates(5.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        // Symplectic generator: Ω A must be symmetric.
        let oa = symplectic_form() * model.a;
        assert!((oa - oa.transpose()).norm() < 1e-12);
        for l in model.a.complex_eigenvalues().iter() {
            assert!(l.re.abs() <= 1e-10 * l.norm().max(1.0));
        }
    }

    #[test]
    fn table_case_is_strictly_stable() {
        let model = build_model(&table_rates(), &cooled()).unwrap();
        for l in model.a.complex_eigenvalues().iter() {
            assert!(l.re < 0.0, "eigenvalue {l} not damped");
        }
        assert!(is_strictly_stable(&model));
    }

    #[test]
    fn diffusion_entries_follow_rates() {
        let r = table_rates();
        let model = build_model(&r, &cooled()).unwrap();
        let bath = r.gamma_m * (r.n_m_bar + 0.5);
        assert_relative_eq!(model.d[(0, 0)], bath, max_relative = 1e-12);
        assert_relative_eq!(model.d[(1, 1)], bath + r.gamma_m_diff, max_relative = 1e-12);
        assert_relative_eq!(model.d[(2, 2)], 1.1e5, max_relative = 1e-12);
        assert_relative_eq!(
            model.d[(3, 3)],
            1.1e5 + r.gamma_at_diff,
            max_relative = 1e-12
        );
        assert_eq!(model.d[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_negative_cooling() {
        assert!(CoolingSettings::new(-1.0).is_err());
        assert!(build_model(&table_rates(), &CoolingSettings { gamma_cool: -1.0 }).is_err());
    }

    #[test]
    fn steady_state_refuses_marginal_model() {
        let r = synthetic_rates(5.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        match steady_state(&model) {
            Err(Error::UnstableModel(_)) => {}
            other => panic!("expected UnstableModel, got {other:?}"),
        }
    }

    #[test]
    fn decoupled_cooled_atom_reaches_vacuum() {
        let r = synthetic_rates(5.0, 0.0, 0.2, 0.1, 0.0, 3.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.8 }).unwrap();
        let state = steady_state(&model).unwrap();
        let (_, n_at) = occupations(&state);
        assert!(n_at.abs() <= 1e-10, "n_at = {n_at:e}");
    }

    #[test]
    fn decoupled_membrane_balances_bath_and_diffusion() {
        let r = synthetic_rates(5.0, 0.0, 0.2, 0.35, 0.0, 3.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.8 }).unwrap();
        let (n_m, _) = occupations(&steady_state(&model).unwrap());
        let expected = r.n_m_bar + r.gamma_m_diff / (2.0 * r.gamma_m);
        assert_relative_eq!(n_m, expected, max_relative = 1e-6);
    }

    #[test]
    fn detailed_balance_without_drive() {
        let r = synthetic_rates(5.0, 0.0, 0.2, 0.0, 0.0, 3.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.8 }).unwrap();
        let (n_m, _) = occupations(&steady_state(&model).unwrap());
        assert_relative_eq!(n_m, 3.0, max_relative = 1e-8);
    }

    #[test]
    fn table_case_cools_into_band() {
        let model = build_model(&table_rates(), &cooled()).unwrap();
        let state = steady_state(&model).unwrap();
        assert!(lyapunov_residual(&model, &state.cov) <= 1e-10 * model.d.norm());
        let (n_m, _) = occupations(&state);
        assert!((0.4..1.5).contains(&n_m), "n_m = {n_m}");
        assert!(min_uncertainty_eig(&state) >= -1e-9);
    }

    #[test]
    fn occupation_conventions() {
        let (n_m, n_at) = occupations(&GaussianState::vacuum());
        assert!(n_m.abs() < 1e-15 && n_at.abs() < 1e-15);
        let (n_m, n_at) = occupations(&GaussianState::thermal(2.5, 0.7));
        assert_relative_eq!(n_m, 2.5, max_relative = 1e-12);
        assert_relative_eq!(n_at, 0.7, max_relative = 1e-12);
        let mut displaced = GaussianState::vacuum();
        displaced.mean[0] = 2.0;
        displaced.mean[1] = 1.0;
        let (n_m, _) = occupations(&displaced);
        assert_relative_eq!(n_m, 2.5, max_relative = 1e-12);
    }

    #[test]
    fn evolve_validates_grid() {
        let model = build_model(&table_rates(), &cooled()).unwrap();
        let s = GaussianState::vacuum();
        assert!(evolve(&model, &s, &[]).is_err());
        assert!(evolve(&model, &s, &[1e-9, 2e-9]).is_err());
        assert!(evolve(&model, &s, &[0.0, 1e-9, 1e-9]).is_err());
    }

    #[test]
    fn evolve_refuses_unpayable_grid() {
        let model = build_model(&table_rates(), &cooled()).unwrap();
        let s = GaussianState::vacuum();
        match evolve(&model, &s, &[0.0, 1e6]) {
            Err(Error::StepSize { required, budget }) => assert!(required > budget),
            other => panic!("expected StepSize, got {other:?}"),
        }
    }

    #[test]
    fn resonant_weak_transfer_is_complete() {
        // g/omega = 1e-2 keeps rotating-wave corrections below the 2%
        // transfer bound; n_m(t) follows cos²(gt/2).
        let omega = 2.0 * std::f64::consts::PI * 1.0e6;
        let g = 1e-2 * omega;
        let r = synthetic_rates(omega, g, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        let initial = GaussianState::thermal(1.0, 0.0);
        let t_transfer = std::f64::consts::PI / g;
        let t: Vec<f64> = (0..=400).map(|i| t_transfer * i as f64 / 400.0).collect();
        let states = evolve(&model, &initial, &t).unwrap();
        let (n_m_end, n_at_end) = occupations(states.last().unwrap());
        assert!(n_m_end < 0.02, "transfer incomplete, n_m = {n_m_end}");
        assert!((n_at_end - 1.0).abs() < 0.03, "n_at = {n_at_end}");
        // Midpoint: half the excitation each.
        let (n_m_half, _) = occupations(&states[200]);
        assert!((n_m_half - 0.5).abs() < 0.03, "n_m(T/2) = {n_m_half}");
    }

    #[test]
    fn hamiltonian_evolution_preserves_phase_space_volume() {
        let omega = 2.0 * std::f64::consts::PI;
        let r = synthetic_rates(omega, 0.3 * omega, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        let initial = GaussianState::thermal(2.0, 0.0);
        let det0 = initial.cov.determinant();
        let t: Vec<f64> = (0..=50).map(|i| 10.0 * i as f64 / 50.0).collect();
        for state in evolve(&model, &initial, &t).unwrap() {
            assert_relative_eq!(state.cov.determinant(), det0, max_relative = 1e-8);
        }
    }

    #[test]
    fn symplectic_spectrum_conserved_over_long_hamiltonian_run() {
        let omega = 2.0 * std::f64::consts::PI;
        let r = synthetic_rates(omega, 0.2 * omega, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        let initial = GaussianState::thermal(3.0, 1.0);
        let (v1_0, v2_0) = symplectic_eigenvalues(&initial.cov);
        // 10^3 oscillation periods of the bare mode.
        let t_end = 1e3;
        let states = evolve(&model, &initial, &[0.0, t_end / 2.0, t_end]).unwrap();
        for s in &states {
            let (v1, v2) = symplectic_eigenvalues(&s.cov);
            assert_relative_eq!(v1, v1_0, max_relative = 1e-8);
            assert_relative_eq!(v2, v2_0, max_relative = 1e-8);
        }
    }

    #[test]
    fn long_time_evolution_reaches_steady_state() {
        let model = build_model(&table_rates(), &cooled()).unwrap();
        let target = steady_state(&model).unwrap();
        let initial = GaussianState::thermal(10.0, 0.0);
        let states = evolve(&model, &initial, &[0.0, 1e-3]).unwrap();
        let last = states.last().unwrap();
        let dev = (last.cov - target.cov).norm() / target.cov.norm();
        assert!(dev <= 1e-6, "relative deviation {dev:e}");
        assert!(min_uncertainty_eig(last) >= -1e-9);
    }

    #[test]
    fn normal_mode_splitting_matches_coupling() {
        let omega = 2.0 * std::f64::consts::PI * 1.0e6;
        let g = 1e-2 * omega;
        let r = synthetic_rates(omega, g, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        let modes = normal_modes(&model);
        assert_eq!(modes.len(), 4);
        let split = modes[3].frequency - modes[0].frequency;
        assert!((split / g - 1.0).abs() < 0.02, "splitting {split} vs g {g}");
    }

    #[test]
    fn normal_modes_decoupled_cases() {
        let r = synthetic_rates(5.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.0 }).unwrap();
        for m in normal_modes(&model) {
            assert_relative_eq!(m.frequency, 5.0, max_relative = 1e-9);
        }
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.8 }).unwrap();
        let atom_decays: Vec<f64> = normal_modes(&model)
            .iter()
            .filter(|m| m.decay > 1e-6)
            .map(|m| m.decay)
            .collect();
        assert_eq!(atom_decays.len(), 2);
        for d in atom_decays {
            assert_relative_eq!(d, 0.4, max_relative = 1e-9);
        }
    }

    #[test]
    fn uncoupled_spectrum_is_lorentzian_at_mode_frequency() {
        let omega = 1e3;
        let gamma = 20.0;
        let r = synthetic_rates(omega, 0.0, gamma, 0.0, 0.0, 2.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 0.5 }).unwrap();
        let grid: Vec<f64> = (0..4000).map(|i| 900.0 + 0.05 * i as f64).collect();
        let s = spectrum(&model, &grid).unwrap();
        let (i_max, &peak) = s
            .s_x_m
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((grid[i_max] - omega).abs() < 1.0);
        // FWHM from half-maximum crossings.
        let half = peak / 2.0;
        let left = s.s_x_m[..i_max].iter().rposition(|&v| v < half).unwrap();
        let right = i_max + s.s_x_m[i_max..].iter().position(|&v| v < half).unwrap();
        let fwhm = grid[right] - grid[left];
        assert!(
            (fwhm / gamma - 1.0).abs() < 0.05,
            "FWHM {fwhm} vs gamma {gamma}"
        );
    }

    #[test]
    fn strong_coupling_spectrum_splits_by_g() {
        let omega = 1e3;
        let g = 100.0;
        let r = synthetic_rates(omega, g, 1.0, 0.0, 0.0, 1.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 1.5 }).unwrap();
        let grid: Vec<f64> = (0..6000).map(|i| 850.0 + 0.05 * i as f64).collect();
        let s = spectrum(&model, &grid).unwrap();
        let mut maxima = Vec::new();
        for (w, freq) in s.s_x_m.windows(3).zip(&grid[1..]) {
            if w[1] > w[0] && w[1] > w[2] {
                maxima.push(*freq);
            }
        }
        assert_eq!(maxima.len(), 2, "expected a doublet, got {maxima:?}");
        let split = maxima[1] - maxima[0];
        assert!((split / g - 1.0).abs() < 0.05, "splitting {split}");
    }

    #[test]
    fn spectrum_integral_recovers_covariance() {
        let omega = 1e3;
        let r = synthetic_rates(omega, 0.0, 50.0, 10.0, 0.0, 2.0);
        let model = build_model(&r, &CoolingSettings { gamma_cool: 40.0 }).unwrap();
        let target = steady_state(&model).unwrap();
        let grid: Vec<f64> = (0..=32000).map(|i| -4000.0 + 0.25 * i as f64).collect();
        let s = spectrum(&model, &grid).unwrap();
        let trapz = |y: &[f64]| -> f64 {
            y.windows(2).map(|w| w[0] + w[1]).sum::<f64>() / 2.0 * 0.25
        };
        let integral = (trapz(&s.s_x_m) + trapz(&s.s_p_m)) / (2.0 * std::f64::consts::PI);
        let expected = target.cov[(0, 0)] + target.cov[(1, 1)];
        assert!(
            (integral / expected - 1.0).abs() < 0.02,
            "integral {integral} vs {expected}"
        );
    }

    #[test]
    fn adiabatic_balance_reference_values() {
        let out = adiabatic_cooling(&table_rates(), &cooled()).unwrap();
        assert_relative_eq!(out.gamma_sym, 2.081087e5, max_relative = 1e-4);
        assert_relative_eq!(out.n_ss, 0.5156588, max_relative = 1e-4);
        assert!(out.n_ss_1 > out.n_ss_2 + out.n_ss_3, "mechanical noise must dominate");
    }

    #[test]
    fn adiabatic_lorentz_factor_at_corner() {
        let r = table_rates();
        let gc = 4.0 * r.omega_m;
        let out = adiabatic_cooling(&r, &CoolingSettings { gamma_cool: gc }).unwrap();
        assert_relative_eq!(
            out.gamma_sym,
            r.g * r.g / gc / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn adiabatic_uncooled_limit() {
        let mut r = table_rates();
        r.g = 0.0;
        let out = adiabatic_cooling(&r, &cooled()).unwrap();
        let expected = r.n_m_bar + r.gamma_m_diff / (2.0 * r.gamma_m);
        assert_relative_eq!(out.n_ss_1, expected, max_relative = 1e-12);
    }

    #[test]
    fn adiabatic_rejects_zero_cooling() {
        match adiabatic_cooling(&table_rates(), &CoolingSettings { gamma_cool: 0.0 }) {
            Err(Error::DivisionDomain(_)) => {}
            other => panic!("expected DivisionDomain, got {other:?}"),
        }
    }

    #[test]
    fn high_cooling_expansion_coefficients() {
        let sys = SystemParams::reference();
        let out = high_cooling_expansion(&sys, &cooled()).unwrap();
        assert_relative_eq!(out.a, 783.6986, max_relative = 1e-6);
        assert_relative_eq!(out.b, 0.2444370, max_relative = 1e-6);
        // Consistency with the unexpanded balance in its own regime.
        let exact = adiabatic_cooling(&table_rates(), &cooled()).unwrap();
        assert!(
            (out.n_ss_1_approx / exact.n_ss_1 - 1.0).abs() < 1e-3,
            "expansion {} vs exact {}",
            out.n_ss_1_approx,
            exact.n_ss_1
        );
    }

    #[test]
    fn exchange_demo_swaps_and_returns() {
        // n0 well above the ~0.8 quanta the noise injects per transfer,
        // so the dip stays visible against the floor.
        let n0 = 10.0;
        let demo = exchange_demo(&table_rates(), n0).unwrap();
        let min_clean = demo
            .noiseless_n_m
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_clean < 0.02 * n0, "noiseless minimum {min_clean}");
        let first_period = demo.t.len() / 3;
        let min_noisy = demo.noisy_n_m[..first_period]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let contrast = 1.0 - min_noisy / n0;
        assert!(contrast > 0.5, "noisy contrast {contrast}, min {min_noisy}");
    }

    #[test]
    fn exchange_demo_vacuum_stays_near_vacuum() {
        let demo = exchange_demo(&table_rates(), 0.0).unwrap();
        let max_clean = demo
            .noiseless_n_m
            .iter()
            .chain(demo.noiseless_n_at.iter())
            .cloned()
            .fold(0.0f64, f64::max);
        // Only counter-rotating terms act, bounded by (g/2 omega)^2.
        assert!(max_clean < 0.01, "vacuum leakage {max_clean}");
    }

    #[test]
    fn exchange_demo_needs_coupling() {
        let r = synthetic_rates(5.0, 0.0, 0.1, 0.0, 0.0, 1.0);
        assert!(exchange_demo(&r, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_stable_models_solve_cleanly(
            omega in 0.5f64..2.0,
            gamma_m in 0.05f64..0.5,
            gamma_cool in 0.05f64..0.5,
            g_frac in 0.0f64..0.3,
            n_bar in 0.0f64..5.0,
            d_m in 0.0f64..0.2,
            d_at in 0.0f64..0.2,
        ) {
            let r = synthetic_rates(omega, g_frac * omega, gamma_m, d_m, d_at, n_bar);
            let model = build_model(&r, &CoolingSettings { gamma_cool }).unwrap();
            let state = steady_state(&model).unwrap();
            prop_assert!(lyapunov_residual(&model, &state.cov) <= 1e-10 * model.d.norm());
            prop_assert!(min_uncertainty_eig(&state) >= -1e-9);
            let (n_m, n_at) = occupations(&state);
            prop_assert!(n_m >= -1e-9 && n_at >= -1e-9);
        }
    }
}
