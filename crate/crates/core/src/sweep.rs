//! Parameter studies: decoherence-to-coupling ratios vs. finesse, the
//! cooled steady-state occupation over (finesse, cooling rate), and
//! optimum location.
//!
//! Grid cells are independent; evaluation parallelizes over cells and the
//! gathered records are ordered by grid index, so results do not depend
//! on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, CoolingSettings};
use crate::error::{Error, Result};
use crate::params::{Config, SystemParams};
use crate::rates::{self, RateSet};

/// Sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisName {
    #[serde(rename = "finesse")]
    Finesse,
    #[serde(rename = "gamma_cool")]
    GammaCool,
    #[serde(rename = "N")]
    NAtoms,
    #[serde(rename = "power_P")]
    PowerP,
    #[serde(rename = "delta")]
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::Validation("axis needs at least 2 points".into()));
        }
        if !(self.min < self.max) {
            return Err(Error::Validation(format!(
                "axis needs min < max, got [{:e}, {:e}]",
                self.min, self.max
            )));
        }
        if self.scale == AxisScale::Log && !(self.min > 0.0) {
            return Err(Error::Validation("log axis needs min > 0".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * f,
                    AxisScale::Log => self.min * (self.max / self.min).powf(f),
                }
            })
            .collect()
    }
}

/// Default finesse axis of the ratio study.
pub fn default_finesse_axis() -> Axis {
    Axis {
        name: AxisName::Finesse,
        min: 50.0,
        max: 1000.0,
        points: 60,
        scale: AxisScale::Log,
    }
}

/// Default cooling-rate axis of the occupation study.
pub fn default_cooling_axis() -> Axis {
    Axis {
        name: AxisName::GammaCool,
        min: 1e4,
        max: 1e6,
        points: 60,
        scale: AxisScale::Log,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub baseline: Config,
    /// Fixed cooling settings; an explicit gamma_cool axis overrides it.
    pub gamma_cool: f64,
}

/// One evaluated grid cell. Cells that fail validation or stability keep
/// their axis values and carry the reason in `status`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub rates: Option<RateSet>,
    pub n_ss_exact: Option<f64>,
    pub n_ss_adiabatic: Option<f64>,
    /// gamma_at_diff / g.
    pub ratio_at: Option<f64>,
    /// gamma_m_diff / g.
    pub ratio_mdiff: Option<f64>,
    /// gamma_m_th / g.
    pub ratio_mth: Option<f64>,
    /// Total decoherence over coupling, the sum of the three above.
    pub ratio_total: Option<f64>,
    pub status: String,
}

fn apply_axis(config: &mut Config, cooling: &mut CoolingSettings, name: AxisName, value: f64) {
    match name {
        AxisName::Finesse => config.cavity.finesse = value,
        AxisName::GammaCool => cooling.gamma_cool = value,
        AxisName::NAtoms => config.atoms.n_atoms = value,
        AxisName::PowerP => config.cavity.power_p = value,
        AxisName::Delta => config.atoms.delta = value,
    }
}

/// Decoherence-to-coupling ratios of a rate snapshot.
pub fn ratios_from_rates(r: &RateSet) -> Option<(f64, f64, f64, f64)> {
    if !(r.g > 0.0) {
        return None;
    }
    let at = r.gamma_at_diff / r.g;
    let mdiff = r.gamma_m_diff / r.g;
    let mth = r.gamma_m_th / r.g;
    Some((at, mdiff, mth, at + mdiff + mth))
}

/// Evaluates one parameter point: rates, ratios, and both steady-state
/// occupations. Never panics on a bad point; failures land in `status`.
pub fn evaluate_point(config: &Config, cooling: &CoolingSettings) -> SweepRecord {
    let mut rec = SweepRecord {
        axis1: f64::NAN,
        axis2: None,
        rates: None,
        n_ss_exact: None,
        n_ss_adiabatic: None,
        ratio_at: None,
        ratio_mdiff: None,
        ratio_mth: None,
        ratio_total: None,
        status: "ok".into(),
    };
    let sys = match SystemParams::from_config(config.clone()) {
        Ok(s) => s,
        Err(e) => {
            rec.status = format!("invalid: {e}");
            return rec;
        }
    };
    let r = match rates::full_rates(&sys) {
        Ok(r) => r,
        Err(e) => {
            rec.status = format!("invalid: {e}");
            return rec;
        }
    };
    if let Some((at, mdiff, mth, total)) = ratios_from_rates(&r) {
        rec.ratio_at = Some(at);
        rec.ratio_mdiff = Some(mdiff);
        rec.ratio_mth = Some(mth);
        rec.ratio_total = Some(total);
    }
    if let Ok(ad) = dynamics::adiabatic_cooling(&r, cooling) {
        rec.n_ss_adiabatic = Some(ad.n_ss);
    }
    match dynamics::build_model(&r, cooling).and_then(|m| dynamics::steady_state(&m)) {
        Ok(state) => {
            let (n_m, _) = dynamics::occupations(&state);
            rec.n_ss_exact = Some(n_m);
        }
        Err(e @ Error::UnstableModel(_)) => rec.status = format!("unstable: {e}"),
        Err(e) => rec.status = format!("invalid: {e}"),
    }
    rec.rates = Some(r);
    rec
}

/// Runs `f` on a dedicated pool of `workers` threads (current pool if
/// None). Cell results are keyed by grid index, so the choice only
/// affects wall time.
pub fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            if n == 0 {
                return Err(Error::Validation("workers must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherentSweep {
    pub records: Vec<SweepRecord>,
    pub argmin_finesse: f64,
    pub min_ratio_total: f64,
}

/// Ratio-vs-finesse study. The drive power stays at the baseline value
/// across the sweep: the trap forms outside the cavity, so its matching
/// condition does not involve the finesse.
pub fn sweep_coherent(spec: &SweepSpec) -> Result<CoherentSweep> {
    spec.axis1.validate()?;
    if spec.axis1.name != AxisName::Finesse || spec.axis2.is_some() {
        return Err(Error::Validation(
            "coherent sweep takes exactly one axis, finesse".into(),
        ));
    }
    let cooling = CoolingSettings::new(spec.gamma_cool)?;
    let values = spec.axis1.values();
    let records: Vec<SweepRecord> = values
        .par_iter()
        .map(|&v| {
            let mut config = spec.baseline.clone();
            let mut c = cooling;
            apply_axis(&mut config, &mut c, spec.axis1.name, v);
            let mut rec = evaluate_point(&config, &c);
            rec.axis1 = v;
            rec
        })
        .collect();
    // This sweep feeds slope fits; a broken cell invalidates the study.
    for rec in &records {
        if rec.status != "ok" {
            return Err(Error::Validation(format!(
                "cell at finesse {:e} failed: {}",
                rec.axis1, rec.status
            )));
        }
    }
    let (argmin_finesse, min_ratio_total) = records
        .iter()
        .filter_map(|r| r.ratio_total.map(|t| (r.axis1, t)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite ratios"))
        .ok_or_else(|| Error::Validation("no cell produced a ratio".into()))?;
    Ok(CoherentSweep {
        records,
        argmin_finesse,
        min_ratio_total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMin {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub n_ss_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingSweep {
    /// Row-major: axis1 outer, axis2 inner.
    pub records: Vec<SweepRecord>,
    pub min: Option<GridMin>,
}

/// Occupation study over finesse and cooling rate. Bad cells are kept
/// with their status; the sweep itself never aborts on one.
pub fn sweep_cooling(spec: &SweepSpec) -> Result<CoolingSweep> {
    spec.axis1.validate()?;
    let axis2 = spec
        .axis2
        .as_ref()
        .ok_or_else(|| Error::Validation("cooling sweep needs a second axis".into()))?;
    axis2.validate()?;
    if spec.axis1.name != AxisName::Finesse || axis2.name != AxisName::GammaCool {
        return Err(Error::Validation(
            "cooling sweep axes must be finesse x gamma_cool".into(),
        ));
    }
    let cooling = CoolingSettings::new(spec.gamma_cool)?;
    let v1 = spec.axis1.values();
    let v2 = axis2.values();
    let cells: Vec<(f64, f64)> = v1
        .iter()
        .flat_map(|&a| v2.iter().map(move |&b| (a, b)))
        .collect();
    let records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(a, b)| {
            let mut config = spec.baseline.clone();
            let mut c = cooling;
            apply_axis(&mut config, &mut c, spec.axis1.name, a);
            apply_axis(&mut config, &mut c, axis2.name, b);
            let mut rec = evaluate_point(&config, &c);
            rec.axis1 = a;
            rec.axis2 = Some(b);
            rec
        })
        .collect();
    let min = records
        .iter()
        .filter(|r| r.status == "ok")
        .filter_map(|r| {
            r.n_ss_exact.map(|n| GridMin {
                axis1: r.axis1,
                axis2: r.axis2,
                n_ss_exact: n,
            })
        })
        .min_by(|a, b| {
            a.n_ss_exact
                .partial_cmp(&b.n_ss_exact)
                .expect("finite occupations")
        });
    Ok(CoolingSweep { records, min })
}

/// What optimize minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Total decoherence over coupling, Γ/g.
    MinTotalRatio,
    /// Exact steady-state membrane occupation.
    MinOccupation,
}

/// Closed search interval; min = max pins the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptRange {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
}

impl OptRange {
    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Validation(format!(
                "range needs finite min <= max, got [{:e}, {:e}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Work in log coordinates for positive ranges.
    fn log_scaled(&self) -> bool {
        self.min > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumRecord {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub objective: Objective,
    pub value: f64,
    pub record: SweepRecord,
    pub trace: Vec<TraceStep>,
}

fn objective_value(rec: &SweepRecord, objective: Objective) -> f64 {
    let v = match objective {
        Objective::MinTotalRatio => rec.ratio_total,
        Objective::MinOccupation => {
            if rec.status == "ok" {
                rec.n_ss_exact
            } else {
                None
            }
        }
    };
    v.unwrap_or(f64::INFINITY)
}

struct Coord {
    range: OptRange,
    log: bool,
}

impl Coord {
    fn new(range: OptRange) -> Self {
        Self {
            log: range.log_scaled(),
            range,
        }
    }

    fn warp(&self, v: f64) -> f64 {
        if self.log {
            v.ln()
        } else {
            v
        }
    }

    fn unwarp(&self, u: f64) -> f64 {
        let v = if self.log { u.exp() } else { u };
        v.clamp(self.range.min, self.range.max)
    }

    fn span(&self) -> f64 {
        self.warp(self.range.max) - self.warp(self.range.min)
    }
}

/// Coarse grid scan plus coordinate descent with shrinking steps.
pub fn optimize(
    objective: Objective,
    range1: OptRange,
    range2: Option<OptRange>,
    baseline: &Config,
    gamma_cool: f64,
) -> Result<OptimumRecord> {
    range1.validate()?;
    if let Some(r2) = &range2 {
        r2.validate()?;
    }
    let cooling = CoolingSettings::new(gamma_cool)?;
    let eval = |a: f64, b: Option<f64>| -> SweepRecord {
        let mut config = baseline.clone();
        let mut c = cooling;
        apply_axis(&mut config, &mut c, range1.name, a);
        if let (Some(r2), Some(bv)) = (&range2, b) {
            apply_axis(&mut config, &mut c, r2.name, bv);
        }
        let mut rec = evaluate_point(&config, &c);
        rec.axis1 = a;
        rec.axis2 = b;
        rec
    };

    let c1 = Coord::new(range1);
    let c2 = range2.map(Coord::new);
    let grid_axis = |c: &Coord, n: usize| -> Vec<f64> {
        if c.range.min == c.range.max {
            return vec![c.range.min];
        }
        let lo = c.warp(c.range.min);
        let hi = c.warp(c.range.max);
        (0..n)
            .map(|i| c.unwarp(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    };
    let (coarse1, coarse2) = match &c2 {
        None => (grid_axis(&c1, 64), vec![]),
        Some(c2) => (grid_axis(&c1, 24), grid_axis(c2, 24)),
    };
    let cells: Vec<(f64, Option<f64>)> = if coarse2.is_empty() {
        coarse1.iter().map(|&a| (a, None)).collect()
    } else {
        coarse1
            .iter()
            .flat_map(|&a| coarse2.iter().map(move |&b| (a, Some(b))))
            .collect()
    };
    let evaluated: Vec<(f64, Option<f64>, SweepRecord)> = cells
        .par_iter()
        .map(|&(a, b)| {
            let rec = eval(a, b);
            (a, b, rec)
        })
        .collect();
    let mut best = evaluated
        .into_iter()
        .map(|(a, b, rec)| {
            let v = objective_value(&rec, objective);
            (a, b, v, rec)
        })
        .min_by(|x, y| x.2.partial_cmp(&y.2).expect("no NaN objective"))
        .expect("grid is nonempty");
    if !best.2.is_finite() {
        return Err(Error::NoFeasiblePoint(
            "every coarse grid cell failed validation or stability".into(),
        ));
    }

    let mut trace = vec![TraceStep {
        axis1: best.0,
        axis2: best.1,
        value: best.2,
    }];
    let mut u1 = c1.warp(best.0);
    let mut u2 = best.1.map(|b| c2.as_ref().expect("axis2 range").warp(b));
    let span1 = c1.span();
    let mut step1 = if span1 > 0.0 {
        span1 / (coarse1.len() - 1).max(1) as f64
    } else {
        0.0
    };
    let mut step2 = match (&c2, &coarse2) {
        (Some(c), v) if v.len() > 1 => c.span() / (v.len() - 1) as f64,
        _ => 0.0,
    };
    for _ in 0..80 {
        if step1 <= span1 * 1e-7 && step2 <= c2.as_ref().map_or(0.0, Coord::span) * 1e-7 {
            break;
        }
        let mut improved = false;
        if step1 > 0.0 {
            for cand in [u1 - step1, u1 + step1] {
                let a = c1.unwarp(cand);
                let rec = eval(a, best.1);
                let v = objective_value(&rec, objective);
                if v < best.2 {
                    best = (a, best.1, v, rec);
                    u1 = c1.warp(a);
                    improved = true;
                    trace.push(TraceStep {
                        axis1: best.0,
                        axis2: best.1,
                        value: best.2,
                    });
                }
            }
        }
        if let (Some(c2ref), Some(u2v)) = (&c2, u2) {
            if step2 > 0.0 {
                for cand in [u2v - step2, u2v + step2] {
                    let b = c2ref.unwarp(cand);
                    let rec = eval(best.0, Some(b));
                    let v = objective_value(&rec, objective);
                    if v < best.2 {
                        best = (best.0, Some(b), v, rec);
                        u2 = Some(c2ref.warp(b));
                        improved = true;
                        trace.push(TraceStep {
                            axis1: best.0,
                            axis2: best.1,
                            value: best.2,
                        });
                    }
                }
            }
        }
        if !improved {
            step1 /= 2.0;
            step2 /= 2.0;
        }
    }
    Ok(OptimumRecord {
        axis1: best.0,
        axis2: best.1,
        objective,
        value: best.2,
        record: best.3,
        trace,
    })
}
