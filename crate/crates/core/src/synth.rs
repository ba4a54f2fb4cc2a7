//! Synthetic feeder data with known ground truth.
//!
//! Temperature is a seasonal sinusoid plus a diurnal sinusoid plus smooth
//! AR(1) noise; load is a base level plus a diurnal shape, a
//! temperature-sensitive term above a threshold, and AR(1) noise. A subset
//! of days carries a CVR event whose observed load is scaled down inside
//! the event window; the pre-scaling profile is kept as hidden ground truth.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::sub_seed;
use crate::timeseries::{CvrEvent, DayKind, DayRecord, Resolution, Window};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: usize,
    pub start_date: NaiveDate,
    pub resolution: Resolution,
    pub base_kw: f64,
    /// Amplitude of the diurnal load sinusoid, kW.
    pub diurnal_amp: f64,
    /// kW of extra load per degC above `t0`.
    pub temp_sensitivity: f64,
    pub t0: f64,
    /// Stationary standard deviation of the AR(1) load noise, kW.
    pub noise_sd: f64,
    pub ar_coeff: f64,
    pub temp_base: f64,
    pub seasonal_temp_amp: f64,
    pub diurnal_temp_amp: f64,
    pub temp_noise_sd: f64,
    pub injected_cvr_factor: f64,
    pub injected_delta_v_pct: f64,
    /// How many days carry an injected event, spread evenly over the span.
    pub cvr_day_count: usize,
    pub event_window: Window,
    pub event_context_len: usize,
    /// Amplitude of a half-cycle load rebound starting one hour into the
    /// event; 0 disables it.
    pub rebound_amp: f64,
    pub feeder_id: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let resolution = Resolution::new(15).expect("valid");
        Self {
            seed: 1,
            days: 365,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid"),
            resolution,
            base_kw: 1000.0,
            diurnal_amp: 200.0,
            temp_sensitivity: 15.0,
            t0: 18.0,
            noise_sd: 20.0,
            ar_coeff: 0.7,
            temp_base: 15.0,
            seasonal_temp_amp: 12.0,
            diurnal_temp_amp: 5.0,
            temp_noise_sd: 1.0,
            injected_cvr_factor: 0.8,
            injected_delta_v_pct: 3.0,
            cvr_day_count: 0,
            // 15:00-18:00 at 15-min resolution.
            event_window: Window::new(60, 12),
            event_context_len: 16,
            rebound_amp: 0.0,
            feeder_id: "synth".into(),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.base_kw <= 0.0 {
            return Err(SynthError::InvalidConfig("base_kw must be positive".into()));
        }
        if self.noise_sd < 0.0 || self.temp_noise_sd < 0.0 {
            return Err(SynthError::InvalidConfig("noise_sd must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return Err(SynthError::InvalidConfig("ar_coeff must be in [0, 1)".into()));
        }
        if !(0.0..=1.5).contains(&self.injected_cvr_factor) {
            return Err(SynthError::InvalidConfig("injected_cvr_factor must be in [0, 1.5]".into()));
        }
        if self.days == 0 {
            return Err(SynthError::InvalidConfig("days must be positive".into()));
        }
        let n = self.resolution.samples_per_day();
        if self.cvr_day_count > 0
            && (self.event_window.start < self.event_context_len
                || self.event_window.end() + self.event_context_len > n
                || self.event_window.len < 2)
        {
            return Err(SynthError::InvalidConfig("event window does not fit with context".into()));
        }
        Ok(())
    }

    /// Dates that carry an injected event, spread evenly over the span.
    pub fn cvr_dates(&self) -> Vec<NaiveDate> {
        (0..self.cvr_day_count)
            .map(|k| {
                let idx = (self.days * (2 * k + 1)) / (2 * self.cvr_day_count);
                self.start_date + chrono::Days::new(idx as u64)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// Full-day counterfactual load for each injected CVR day.
    pub ground_truth: BTreeMap<NaiveDate, Vec<f64>>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// AR(1) series with stationary standard deviation `sd`.
fn ar1(rng: &mut ChaCha8Rng, n: usize, coeff: f64, sd: f64) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let innov_sd = sd * (1.0 - coeff * coeff).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut prev = sd * normal(rng);
    for _ in 0..n {
        out.push(prev);
        prev = coeff * prev + innov_sd * normal(rng);
    }
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let n = cfg.resolution.samples_per_day();
    let dt_hours = cfg.resolution.minutes() as f64 / 60.0;
    let cvr_dates: std::collections::BTreeSet<NaiveDate> = cfg.cvr_dates().into_iter().collect();

    let mut dataset = Dataset::new(cfg.resolution, cfg.feeder_id.clone());
    let mut ground_truth = BTreeMap::new();

    for d in 0..cfg.days {
        let date = cfg.start_date + chrono::Days::new(d as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "synth-day", d as u64));
        let doy = date.ordinal() as f64;
        let seasonal = cfg.seasonal_temp_amp
            * (std::f64::consts::TAU * (doy - 202.0) / 365.25).cos();
        let temp_noise = ar1(&mut rng, n, 0.9, cfg.temp_noise_sd);
        let load_noise = ar1(&mut rng, n, cfg.ar_coeff, cfg.noise_sd);

        let mut temperature = Vec::with_capacity(n);
        let mut baseline = Vec::with_capacity(n);
        for t in 0..n {
            let hour = t as f64 * dt_hours;
            let temp = cfg.temp_base
                + seasonal
                + cfg.diurnal_temp_amp * (std::f64::consts::TAU * (hour - 15.0) / 24.0).cos()
                + temp_noise[t];
            let load = cfg.base_kw
                + cfg.diurnal_amp * (std::f64::consts::TAU * (hour - 17.0) / 24.0).cos()
                + cfg.temp_sensitivity * (temp - cfg.t0).max(0.0)
                + load_noise[t];
            temperature.push(temp);
            baseline.push(load);
        }

        let is_cvr = cvr_dates.contains(&date);
        let mut load = baseline.clone();
        let mut voltage = vec![1.0; n];
        if is_cvr {
            let w = cfg.event_window;
            let scale = 1.0 - cfg.injected_cvr_factor * cfg.injected_delta_v_pct / 100.0;
            let first_hour = (60 / cfg.resolution.minutes()) as usize;
            for t in w.start..w.end() {
                load[t] *= scale;
                if cfg.rebound_amp > 0.0 && t >= w.start + first_hour {
                    let span = (w.len - first_hour) as f64;
                    let phase = (t - w.start - first_hour) as f64 / span;
                    load[t] += cfg.rebound_amp * (std::f64::consts::PI * phase).sin();
                }
                voltage[t] = 1.0 - cfg.injected_delta_v_pct / 100.0;
            }
            ground_truth.insert(date, baseline);
            dataset.events.push(CvrEvent {
                date,
                cvr_window: w,
                delta_v_pct: Some(cfg.injected_delta_v_pct),
                context_len: cfg.event_context_len,
            });
        }

        dataset.days.insert(
            date,
            DayRecord {
                date,
                load,
                temperature,
                voltage: Some(voltage),
                kind: if is_cvr { DayKind::Cvr } else { DayKind::NonCvr },
            },
        );
    }
    Ok(SynthOutput { dataset, ground_truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::slice;
    use crate::timeseries::Channel;

    #[test]
    fn same_seed_same_dataset() {
        let cfg = SynthConfig { days: 20, cvr_day_count: 3, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = generate(&SynthConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn noiseless_zero_factor_observed_equals_baseline() {
        let cfg = SynthConfig {
            days: 10,
            noise_sd: 0.0,
            temp_noise_sd: 0.0,
            injected_cvr_factor: 0.0,
            cvr_day_count: 2,
            ..Default::default()
        };
        let out = generate(&cfg).unwrap();
        for (date, truth) in &out.ground_truth {
            assert_eq!(&out.dataset.days[date].load, truth);
        }
    }

    #[test]
    fn injected_scaling_is_exact() {
        let cfg = SynthConfig {
            days: 30,
            noise_sd: 0.0,
            temp_noise_sd: 0.0,
            injected_cvr_factor: 0.8,
            injected_delta_v_pct: 3.0,
            cvr_day_count: 1,
            ..Default::default()
        };
        let out = generate(&cfg).unwrap();
        let (date, truth) = out.ground_truth.iter().next().unwrap();
        let day = &out.dataset.days[date];
        let w = cfg.event_window;
        for t in w.start..w.end() {
            assert!((day.load[t] - truth[t] * 0.976).abs() < 1e-12);
            assert!((day.voltage.as_ref().unwrap()[t] - 0.97).abs() < 1e-12);
        }
        for t in (0..w.start).chain(w.end()..day.samples()) {
            assert_eq!(day.load[t], truth[t]);
        }
    }

    #[test]
    fn afternoon_load_tracks_temperature() {
        let cfg = SynthConfig { days: 120, temp_sensitivity: 25.0, ..Default::default() };
        let out = generate(&cfg).unwrap();
        // Correlation between afternoon-window mean temp and mean load.
        let w = cfg.event_window;
        let mut temps = vec![];
        let mut loads = vec![];
        for day in out.dataset.days.values() {
            let t = slice(day, w, Channel::Temp).unwrap();
            let l = slice(day, w, Channel::Load).unwrap();
            temps.push(t.iter().sum::<f64>() / t.len() as f64);
            loads.push(l.iter().sum::<f64>() / l.len() as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mt, ml) = (mean(&temps), mean(&loads));
        let cov: f64 = temps.iter().zip(&loads).map(|(a, b)| (a - mt) * (b - ml)).sum();
        assert!(cov > 0.0, "afternoon load must correlate positively with temperature");
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SynthConfig { base_kw: -1.0, ..Default::default() };
        assert!(matches!(generate(&bad), Err(SynthError::InvalidConfig(_))));
        let bad = SynthConfig { ar_coeff: 1.0, ..Default::default() };
        assert!(matches!(generate(&bad), Err(SynthError::InvalidConfig(_))));
        let bad = SynthConfig { injected_cvr_factor: 2.0, ..Default::default() };
        assert!(matches!(generate(&bad), Err(SynthError::InvalidConfig(_))));
    }
}
