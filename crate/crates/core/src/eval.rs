//! Quality metrics, CVR-factor quantification, and the virtual-event
//! evaluation harness that compares estimator variants against withheld
//! ground truth.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bidir::{
    derive_weights, estimate_baseline, estimate_baseline_oneshot, BidirError, EngineConfig,
    TargetMode, WeightSchedule,
};
use crate::ingest::Dataset;
use crate::timeseries::{CvrEvent, DayKind, Season, Window};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Bidir(#[from] BidirError),
    #[error("empty series")]
    EmptySeries,
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no eligible evaluation days for season {0}")]
    NoEligibleDays(Season),
    #[error("event day {0} not in dataset")]
    UnknownEventDay(NaiveDate),
    #[error("baseline mean is zero; factor undefined")]
    DegenerateBaseline,
    #[error("event has no voltage data and no recorded voltage-reduction depth")]
    MissingVoltage,
}

/// Per-day error statistics averaged across evaluation days.
///
/// `mape`, `nrmse` and `energy_err` are fractional (0.1 = 10 %); `mpe_pct`
/// is a signed percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mape: f64,
    pub nrmse: f64,
    pub energy_err: f64,
    pub mpe_pct: f64,
    pub days: usize,
}

fn day_metrics(actual: &[f64], estimate: &[f64]) -> Result<(f64, f64, f64, f64), EvalError> {
    if actual.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    if actual.len() != estimate.len() {
        return Err(EvalError::LengthMismatch(actual.len(), estimate.len()));
    }
    let t = actual.len() as f64;
    let mut ape_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut abs_err_sum = 0.0;
    let mut err_sum = 0.0;
    let mut actual_sum = 0.0;
    for (&y, &yhat) in actual.iter().zip(estimate) {
        let err = y - yhat;
        ape_sum += (1.0 - yhat / y).abs();
        sq_sum += err * err;
        abs_err_sum += err.abs();
        err_sum += err;
        actual_sum += y;
    }
    let mean = actual_sum / t;
    Ok((
        ape_sum / t,
        (sq_sum / t).sqrt() / mean,
        abs_err_sum / actual_sum,
        err_sum / actual_sum * 100.0,
    ))
}

/// Averages the per-day MAPE, normalized RMSE, energy error, and signed mean
/// percentage error over a set of (actual, estimate) day pairs.
pub fn metrics(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<MetricReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    let mut acc = (0.0, 0.0, 0.0, 0.0);
    for (actual, estimate) in pairs {
        let (mape, nrmse, energy, mpe) = day_metrics(actual, estimate)?;
        acc.0 += mape;
        acc.1 += nrmse;
        acc.2 += energy;
        acc.3 += mpe;
    }
    let n = pairs.len() as f64;
    Ok(MetricReport {
        mape: acc.0 / n,
        nrmse: acc.1 / n,
        energy_err: acc.2 / n,
        mpe_pct: acc.3 / n,
        days: pairs.len(),
    })
}

/// CVR quantification for a single event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrResult {
    pub date: NaiveDate,
    pub cvr_factor: f64,
    pub delta_p_pct: f64,
    pub delta_v_pct: f64,
    /// Per-sample load-reduction percentages over the event window.
    pub per_step_delta_p_pct: Vec<f64>,
}

/// Computes the CVR factor from the restored baseline and the observed
/// (reduced) load: the mean percentage load reduction divided by the mean
/// percentage voltage reduction.
///
/// The voltage reduction comes from the voltage channel when present
/// (baseline taken as the pre-event context mean), otherwise from the
/// event's recorded reduction depth.
pub fn cvr_factor(
    dataset: &Dataset,
    event: &CvrEvent,
    baseline: &[f64],
) -> Result<CvrResult, EvalError> {
    let day = dataset
        .days
        .get(&event.date)
        .ok_or(EvalError::UnknownEventDay(event.date))?;
    let w = event.cvr_window;
    if baseline.len() != w.len {
        return Err(EvalError::LengthMismatch(baseline.len(), w.len));
    }
    let observed = &day.load[w.start..w.end()];
    let base_mean = baseline.iter().sum::<f64>() / w.len as f64;
    if base_mean == 0.0 {
        return Err(EvalError::DegenerateBaseline);
    }
    let obs_mean = observed.iter().sum::<f64>() / w.len as f64;
    let delta_p_pct = (base_mean - obs_mean) / base_mean * 100.0;

    let delta_v_pct = match (&day.voltage, event.delta_v_pct) {
        (Some(volt), _) => {
            let pre = event.pre_window();
            let pre_mean: f64 =
                volt[pre.start..pre.end()].iter().sum::<f64>() / pre.len as f64;
            let in_mean: f64 = volt[w.start..w.end()].iter().sum::<f64>() / w.len as f64;
            if pre_mean == 0.0 {
                return Err(EvalError::DegenerateBaseline);
            }
            (pre_mean - in_mean) / pre_mean * 100.0
        }
        (None, Some(dv)) => dv,
        (None, None) => return Err(EvalError::MissingVoltage),
    };
    if delta_v_pct == 0.0 {
        return Err(EvalError::DegenerateBaseline);
    }

    let per_step_delta_p_pct = baseline
        .iter()
        .zip(observed)
        .map(|(&b, &o)| if b != 0.0 { (b - o) / b * 100.0 } else { 0.0 })
        .collect();

    Ok(CvrResult {
        date: event.date,
        cvr_factor: delta_p_pct / delta_v_pct,
        delta_p_pct,
        delta_v_pct,
        per_step_delta_p_pct,
    })
}

/// Mean CVR factor with a normal-approximation 95 % interval half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrReport {
    pub events: usize,
    pub mean_factor: f64,
    pub ci95_half_width: f64,
    pub per_event: Vec<CvrResult>,
}

pub fn aggregate_cvr_report(results: Vec<CvrResult>) -> Result<CvrReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptySeries);
    }
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.cvr_factor).sum::<f64>() / n;
    let half_width = if results.len() > 1 {
        let var = results
            .iter()
            .map(|r| (r.cvr_factor - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        0.0
    };
    Ok(CvrReport {
        events: results.len(),
        mean_factor: mean,
        ci95_half_width: half_width,
        per_event: results,
    })
}

/// Estimator variants compared by the virtual-event evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Forward,
    Backward,
    Reconciled,
    OneShot,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::Forward => "forward",
            Variant::Backward => "backward",
            Variant::Reconciled => "reconciled",
            Variant::OneShot => "oneshot",
        };
        f.write_str(s)
    }
}

/// Per-variant metric reports, plus per-day per-variant series for
/// downstream analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub season: Season,
    pub window: Window,
    pub target_mode: TargetMode,
    pub by_variant: BTreeMap<String, MetricReport>,
    pub day_results: Vec<DayEvaluation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayEvaluation {
    pub date: NaiveDate,
    pub actual: Vec<f64>,
    pub estimates: BTreeMap<String, Vec<f64>>,
}

/// Configuration of a virtual-event study: which days to treat as events
/// and the window to withhold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirtualProtocol {
    pub season: Season,
    pub window: Window,
    pub max_days: usize,
}

impl VirtualProtocol {
    /// Seasonal conventions: summer events 15:00-18:00, winter 07:00-08:30.
    pub fn seasonal(season: Season, resolution: crate::timeseries::Resolution) -> Self {
        let window = match season {
            Season::Winter => Window::new(resolution.index_of(7, 0), resolution.index_of(8, 30) - resolution.index_of(7, 0)),
            _ => Window::new(resolution.index_of(15, 0), resolution.index_of(18, 0) - resolution.index_of(15, 0)),
        };
        Self { season, window, max_days: usize::MAX }
    }
}

/// Picks the non-CVR days in season with enough surrounding context, marks
/// them as virtual events in a working copy of the dataset, and estimates
/// each with every variant against the withheld ground truth.
pub fn run_virtual_evaluation(
    dataset: &Dataset,
    protocol: &VirtualProtocol,
    cfg: &EngineConfig,
    context_len: usize,
) -> Result<EvaluationReport, EvalError> {
    let template = CvrEvent {
        date: NaiveDate::MIN,
        cvr_window: protocol.window,
        delta_v_pct: None,
        context_len,
    };
    if !template.windows_fit(dataset.resolution.samples_per_day()) {
        return Err(EvalError::LengthMismatch(
            protocol.window.end() + context_len,
            dataset.resolution.samples_per_day(),
        ));
    }
    let eligible: Vec<NaiveDate> = dataset
        .days
        .values()
        .filter(|d| d.kind == DayKind::NonCvr && protocol.season.contains(d.date))
        .map(|d| d.date)
        .take(protocol.max_days)
        .collect();
    if eligible.is_empty() {
        return Err(EvalError::NoEligibleDays(protocol.season));
    }

    // Working copy: evaluation days are re-marked so the similar-day
    // screening (which admits only regular days) never trains on them.
    let mut working = dataset.clone();
    for date in &eligible {
        working.days.get_mut(date).expect("eligible day exists").kind = DayKind::VirtualCvr;
    }

    // One weight schedule serves the whole study (same feeder, window and
    // resolution); derived from the first eligible day with enough history.
    let mut weights: Option<WeightSchedule> = None;
    for date in &eligible {
        let event = CvrEvent { date: *date, ..template.clone() };
        match derive_weights(&working, &event, cfg) {
            Ok(w) => {
                weights = Some(w);
                break;
            }
            Err(BidirError::Similar(_)) | Err(BidirError::InsufficientVirtualDays { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let weights = weights.ok_or(EvalError::NoEligibleDays(protocol.season))?;

    let day_results: Vec<DayEvaluation> = eligible
        .par_iter()
        .map(|date| -> Result<Option<DayEvaluation>, EvalError> {
            let event = CvrEvent { date: *date, ..template.clone() };
            let iterative = match estimate_baseline(&working, &event, cfg, &weights) {
                Ok(e) => e,
                Err(BidirError::Similar(_)) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let oneshot = estimate_baseline_oneshot(&working, &event, cfg, &weights)?;

            let w = event.cvr_window;
            let actual = dataset.days[date].load[w.start..w.end()].to_vec();
            let mut estimates = BTreeMap::new();
            estimates.insert(Variant::Forward.to_string(), oneshot.forward_raw[0].clone());
            estimates.insert(Variant::Backward.to_string(), oneshot.backward_raw[0].clone());
            estimates.insert(Variant::Reconciled.to_string(), iterative.restored);
            estimates.insert(Variant::OneShot.to_string(), oneshot.restored);
            Ok(Some(DayEvaluation { date: *date, actual, estimates }))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    if day_results.is_empty() {
        return Err(EvalError::NoEligibleDays(protocol.season));
    }

    let mut by_variant = BTreeMap::new();
    for variant in [Variant::Forward, Variant::Backward, Variant::Reconciled, Variant::OneShot] {
        let key = variant.to_string();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = day_results
            .iter()
            .map(|d| (d.actual.clone(), d.estimates[&key].clone()))
            .collect();
        by_variant.insert(key, metrics(&pairs)?);
    }

    Ok(EvaluationReport {
        season: protocol.season,
        window: protocol.window,
        target_mode: cfg.target_mode,
        by_variant,
        day_results,
    })
}
