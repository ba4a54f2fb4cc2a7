//! Hybrid temperature+load similar-day screening.
//!
//! Four sets are built around an event: pre/post temperature matches over
//! the context-plus-event windows and pre/post load matches over the context
//! windows alone. The forward training pool is the intersection of the two
//! pre sets, the backward pool of the two post sets.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::timeseries::{slice, Channel, CvrEvent, DayKind, Window};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarError {
    #[error("length mismatch: target {target} vs candidate {candidate}")]
    LengthMismatch { target: usize, candidate: usize },
    #[error("target segment has zero mean; nRMSE undefined")]
    ZeroMeanTarget,
    #[error("empty segment")]
    EmptySegment,
    #[error("insufficient similar days for {direction}: found {found}, required {required}")]
    InsufficientSimilarDays { direction: String, found: usize, required: usize },
    #[error("event day {0} not found in dataset")]
    UnknownEventDay(NaiveDate),
    #[error("event windows do not fit the day")]
    WindowDoesNotFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    /// nRMSE threshold for the forward (pre-event) sets.
    pub eps_f: f64,
    /// nRMSE threshold for the backward (post-event) sets.
    pub eps_b: f64,
    /// Minimum size of each direction's intersection pool.
    pub eps_sim: usize,
    /// Context window length in samples used for matching.
    pub context_len: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        // Thresholds 1.0 are absolute ratios, not percent; minimum pool 5.
        Self { eps_f: 1.0, eps_b: 1.0, eps_sim: 5, context_len: 24 }
    }
}

/// The four membership sets; dates are sorted by construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimilarDaySets {
    pub pre_temp: BTreeSet<NaiveDate>,
    pub pre_load: BTreeSet<NaiveDate>,
    pub post_temp: BTreeSet<NaiveDate>,
    pub post_load: BTreeSet<NaiveDate>,
}

impl SimilarDaySets {
    pub fn forward_pool(&self) -> BTreeSet<NaiveDate> {
        self.pre_temp.intersection(&self.pre_load).copied().collect()
    }

    pub fn backward_pool(&self) -> BTreeSet<NaiveDate> {
        self.post_temp.intersection(&self.post_load).copied().collect()
    }
}

/// Single-segment nRMSE: `sqrt(mean((target - candidate)^2)) / mean(target)`.
pub fn segment_nrmse(target: &[f64], candidate: &[f64]) -> Result<f64, SimilarError> {
    if target.is_empty() {
        return Err(SimilarError::EmptySegment);
    }
    if target.len() != candidate.len() {
        return Err(SimilarError::LengthMismatch {
            target: target.len(),
            candidate: candidate.len(),
        });
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    if mean == 0.0 {
        return Err(SimilarError::ZeroMeanTarget);
    }
    let mse = target
        .iter()
        .zip(candidate)
        .map(|(t, c)| (t - c) * (t - c))
        .sum::<f64>()
        / target.len() as f64;
    Ok(mse.sqrt() / mean)
}

/// Comparison windows around an event with matching context length `w`.
///
/// Temperature comparisons span context plus event (`w + L` samples); load
/// comparisons use the context windows alone (`w` samples).
pub fn screening_windows(event: &CvrEvent, w: usize) -> (Window, Window, Window, Window) {
    let cvr = event.cvr_window;
    let tau_pre = Window::new(cvr.start - w, w + cvr.len);
    let pre_load = Window::new(cvr.start - w, w);
    let tau_post = Window::new(cvr.start, cvr.len + w);
    let post_load = Window::new(cvr.end(), w);
    (tau_pre, pre_load, tau_post, post_load)
}

/// Builds the four similar-day sets for an event. Candidates are non-CVR,
/// non-holiday days; the event's own date is always excluded. Both direction
/// pools must reach `eps_sim` members.
pub fn select_similar_days(
    dataset: &Dataset,
    event: &CvrEvent,
    cfg: &SimilarityConfig,
) -> Result<SimilarDaySets, SimilarError> {
    let target = dataset
        .days
        .get(&event.date)
        .ok_or(SimilarError::UnknownEventDay(event.date))?;
    let samples = target.samples();
    if event.cvr_window.start < cfg.context_len
        || event.cvr_window.end() + cfg.context_len > samples
    {
        return Err(SimilarError::WindowDoesNotFit);
    }
    let (tau_pre, pre_load_w, tau_post, post_load_w) = screening_windows(event, cfg.context_len);

    let t_pre = slice(target, tau_pre, Channel::Temp).expect("window checked");
    let p_pre = slice(target, pre_load_w, Channel::Load).expect("window checked");
    let t_post = slice(target, tau_post, Channel::Temp).expect("window checked");
    let p_post = slice(target, post_load_w, Channel::Load).expect("window checked");

    let mut sets = SimilarDaySets::default();
    for (date, day) in &dataset.days {
        if *date == event.date || day.kind != DayKind::NonCvr {
            continue;
        }
        let cand = |w: Window, ch: Channel| slice(day, w, ch).expect("same geometry");
        if segment_nrmse(&t_pre, &cand(tau_pre, Channel::Temp))? < cfg.eps_f {
            sets.pre_temp.insert(*date);
        }
        if segment_nrmse(&p_pre, &cand(pre_load_w, Channel::Load))? < cfg.eps_f {
            sets.pre_load.insert(*date);
        }
        if segment_nrmse(&t_post, &cand(tau_post, Channel::Temp))? < cfg.eps_b {
            sets.post_temp.insert(*date);
        }
        if segment_nrmse(&p_post, &cand(post_load_w, Channel::Load))? < cfg.eps_b {
            sets.post_load.insert(*date);
        }
    }

    let forward = sets.forward_pool().len();
    if forward < cfg.eps_sim {
        return Err(SimilarError::InsufficientSimilarDays {
            direction: "forward".into(),
            found: forward,
            required: cfg.eps_sim,
        });
    }
    let backward = sets.backward_pool().len();
    if backward < cfg.eps_sim {
        return Err(SimilarError::InsufficientSimilarDays {
            direction: "backward".into(),
            found: backward,
            required: cfg.eps_sim,
        });
    }
    Ok(sets)
}
