//! Calendar-indexed time-series data model: day records at a fixed
//! resolution, sample windows within a day, and CVR event geometry.
//!
//! All types are immutable after construction and safe to share across
//! threads.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TimeSeriesError {
    #[error("target resolution {target} min is not a multiple of source {from} min")]
    NonDivisibleResolution { from: u32, target: u32 },
    #[error("resolution must be one of 5, 15, 30, 60 minutes, got {0}")]
    InvalidResolution(u32),
    #[error("window [{start}, {end}) out of bounds for day with {samples} samples")]
    OutOfBounds { start: usize, end: usize, samples: usize },
    #[error("channel {0:?} not present on this day")]
    MissingChannel(Channel),
    #[error("series too short: need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("channel length {got} does not match {expected} samples per day")]
    WrongChannelLength { got: usize, expected: usize },
    #[error("non-finite sample in {0:?} channel")]
    NonFiniteSample(Channel),
}

/// Sampling interval of a dataset. One of 5, 15, 30 or 60 minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    minutes: u32,
}

impl Resolution {
    pub fn new(minutes: u32) -> Result<Self, TimeSeriesError> {
        match minutes {
            5 | 15 | 30 | 60 => Ok(Self { minutes }),
            other => Err(TimeSeriesError::InvalidResolution(other)),
        }
    }

    pub fn minutes(&self) -> u32 {
        self.minutes
    }

    pub fn samples_per_day(&self) -> usize {
        (1440 / self.minutes) as usize
    }

    /// Sample index of a wall-clock time within the day.
    pub fn index_of(&self, hour: u32, minute: u32) -> usize {
        ((hour * 60 + minute) / self.minutes) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayKind {
    NonCvr,
    Cvr,
    VirtualCvr,
    Holiday,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Load,
    Temp,
    Volt,
}

/// Rough season classification by calendar month. `All` disables filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Season {
    Summer,
    Winter,
    All,
}

impl Season {
    pub fn contains(&self, date: NaiveDate) -> bool {
        match self {
            Season::Summer => matches!(date.month(), 6..=8),
            Season::Winter => matches!(date.month(), 12 | 1 | 2),
            Season::All => true,
        }
    }
}

impl std::fmt::Display for Season {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Season::Summer => write!(f, "summer"),
            Season::Winter => write!(f, "winter"),
            Season::All => write!(f, "all"),
        }
    }
}

/// One calendar day of load/temperature(/voltage) samples. The atom of all
/// training and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub load: Vec<f64>,
    pub temperature: Vec<f64>,
    pub voltage: Option<Vec<f64>>,
    pub kind: DayKind,
}

impl DayRecord {
    /// Validates channel lengths and finiteness against the resolution.
    pub fn new(
        date: NaiveDate,
        load: Vec<f64>,
        temperature: Vec<f64>,
        voltage: Option<Vec<f64>>,
        kind: DayKind,
        resolution: Resolution,
    ) -> Result<Self, TimeSeriesError> {
        let n = resolution.samples_per_day();
        for (channel, values) in [(Channel::Load, &load), (Channel::Temp, &temperature)] {
            if values.len() != n {
                return Err(TimeSeriesError::WrongChannelLength { got: values.len(), expected: n });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(TimeSeriesError::NonFiniteSample(channel));
            }
        }
        if let Some(v) = &voltage {
            if v.len() != n {
                return Err(TimeSeriesError::WrongChannelLength { got: v.len(), expected: n });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(TimeSeriesError::NonFiniteSample(Channel::Volt));
            }
        }
        Ok(Self { date, load, temperature, voltage, kind })
    }

    pub fn samples(&self) -> usize {
        self.load.len()
    }

    pub fn channel(&self, channel: Channel) -> Result<&[f64], TimeSeriesError> {
        match channel {
            Channel::Load => Ok(&self.load),
            Channel::Temp => Ok(&self.temperature),
            Channel::Volt => self
                .voltage
                .as_deref()
                .ok_or(TimeSeriesError::MissingChannel(Channel::Volt)),
        }
    }
}

/// A contiguous run of sample indices within a single day. Cross-midnight
/// windows are out of scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn fits(&self, samples_per_day: usize) -> bool {
        self.len > 0 && self.end() <= samples_per_day
    }
}

/// Event geometry plus voltage information; defines the missing segment.
///
/// `cvr_window` covers the samples affected by the event; `context_len` is
/// the number of pre/post samples the forecasting windows require.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrEvent {
    pub date: NaiveDate,
    pub cvr_window: Window,
    pub delta_v_pct: Option<f64>,
    pub context_len: usize,
}

impl CvrEvent {
    /// Pre window `[t_on - W, t_on - 1]` and post window
    /// `[t_off + 1, t_off + W]` must both fit within the day.
    pub fn windows_fit(&self, samples_per_day: usize) -> bool {
        self.cvr_window.len >= 2
            && self.cvr_window.start >= self.context_len
            && self.cvr_window.end() + self.context_len <= samples_per_day
    }

    pub fn pre_window(&self) -> Window {
        Window::new(self.cvr_window.start - self.context_len, self.context_len)
    }

    pub fn post_window(&self) -> Window {
        Window::new(self.cvr_window.end(), self.context_len)
    }
}

/// Block-mean resampling to a coarser resolution. Load, temperature and
/// voltage are all averaged the same way.
pub fn resample(
    day: &DayRecord,
    source: Resolution,
    target: Resolution,
) -> Result<DayRecord, TimeSeriesError> {
    if target.minutes % source.minutes != 0 {
        return Err(TimeSeriesError::NonDivisibleResolution {
            from: source.minutes,
            target: target.minutes,
        });
    }
    let block = (target.minutes / source.minutes) as usize;
    let mean_blocks = |v: &[f64]| -> Vec<f64> {
        v.chunks(block)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    };
    Ok(DayRecord {
        date: day.date,
        load: mean_blocks(&day.load),
        temperature: mean_blocks(&day.temperature),
        voltage: day.voltage.as_ref().map(|v| mean_blocks(v)),
        kind: day.kind,
    })
}

/// Returns exactly `w.len` values of the given channel, chronological.
pub fn slice(day: &DayRecord, w: Window, channel: Channel) -> Result<Vec<f64>, TimeSeriesError> {
    let values = day.channel(channel)?;
    if !w.fits(values.len()) {
        return Err(TimeSeriesError::OutOfBounds {
            start: w.start,
            end: w.end(),
            samples: values.len(),
        });
    }
    Ok(values[w.start..w.end()].to_vec())
}

/// First differences: `out[k] = values[k+1] - values[k]`.
pub fn delta_series(values: &[f64]) -> Result<Vec<f64>, TimeSeriesError> {
    if values.len() < 2 {
        return Err(TimeSeriesError::TooShort(values.len()));
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(load: Vec<f64>, res: Resolution) -> DayRecord {
        let n = res.samples_per_day();
        let mut full = load;
        full.resize(n, full.last().copied().unwrap_or(0.0));
        DayRecord::new(
            NaiveDate::from_ymd_opt(2021, 7, 1).unwrap(),
            full.clone(),
            vec![20.0; n],
            None,
            DayKind::NonCvr,
            res,
        )
        .unwrap()
    }

    #[test]
    fn resample_block_means() {
        let r5 = Resolution::new(5).unwrap();
        let r15 = Resolution::new(15).unwrap();
        let mut load = vec![0.0; r5.samples_per_day()];
        load[0] = 3.0;
        load[1] = 6.0;
        load[2] = 9.0;
        let d = day(load, r5);
        let out = resample(&d, r5, r15).unwrap();
        assert_eq!(out.load[0], 6.0);
        assert_eq!(out.load.len(), r15.samples_per_day());
    }

    #[test]
    fn resample_identity() {
        let r15 = Resolution::new(15).unwrap();
        let d = day((0..96).map(|i| i as f64).collect(), r15);
        assert_eq!(resample(&d, r15, r15).unwrap(), d);
    }

    #[test]
    fn resample_15_to_30() {
        let r15 = Resolution::new(15).unwrap();
        let r30 = Resolution::new(30).unwrap();
        let mut load = vec![0.0; r15.samples_per_day()];
        load[..4].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let out = resample(&day(load, r15), r15, r30).unwrap();
        assert_eq!(&out.load[..2], &[1.5, 3.5]);
    }

    #[test]
    fn resample_rejects_non_multiple() {
        let r30 = Resolution::new(30).unwrap();
        let r5 = Resolution::new(5).unwrap();
        let d = day(vec![1.0], r30);
        assert!(matches!(
            resample(&d, r30, r5),
            Err(TimeSeriesError::NonDivisibleResolution { .. })
        ));
    }

    #[test]
    fn resample_idempotent_and_energy_preserving() {
        let r5 = Resolution::new(5).unwrap();
        let r30 = Resolution::new(30).unwrap();
        let d = day((0..288).map(|i| (i as f64 * 0.7).sin() * 10.0 + 50.0).collect(), r5);
        let once = resample(&d, r5, r30).unwrap();
        let twice = resample(&once, r30, r30).unwrap();
        assert_eq!(once, twice);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&d.load) - mean(&once.load)).abs() < 1e-9);
    }

    #[test]
    fn slice_cases() {
        let r60 = Resolution::new(60).unwrap();
        let d = day((10..34).map(|i| i as f64).collect(), r60);
        let full = slice(&d, Window::new(0, 24), Channel::Load).unwrap();
        assert_eq!(full, d.load);
        assert_eq!(slice(&d, Window::new(2, 2), Channel::Load).unwrap(), vec![12.0, 13.0]);
        assert!(matches!(
            slice(&d, Window::new(23, 3), Channel::Load),
            Err(TimeSeriesError::OutOfBounds { .. })
        ));
        assert!(matches!(
            slice(&d, Window::new(0, 1), Channel::Volt),
            Err(TimeSeriesError::MissingChannel(Channel::Volt))
        ));
    }

    #[test]
    fn delta_series_cases() {
        assert_eq!(delta_series(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(delta_series(&[1.0, 4.0, 2.0]).unwrap(), vec![3.0, -2.0]);
        assert!(matches!(delta_series(&[1.0]), Err(TimeSeriesError::TooShort(1))));
    }

    #[test]
    fn event_window_geometry() {
        let r5 = Resolution::new(5).unwrap();
        // 15:00-18:00 at 5-min: start 180, len 36.
        let ev = CvrEvent {
            date: NaiveDate::from_ymd_opt(2021, 7, 10).unwrap(),
            cvr_window: Window::new(r5.index_of(15, 0), 36),
            delta_v_pct: Some(3.0),
            context_len: 24,
        };
        assert_eq!(ev.cvr_window.start, 180);
        assert!(ev.windows_fit(r5.samples_per_day()));
        assert_eq!(ev.pre_window(), Window::new(156, 24));
        assert_eq!(ev.post_window(), Window::new(216, 24));
    }

    proptest! {
        #[test]
        fn delta_roundtrip(values in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            let deltas = delta_series(&values).unwrap();
            let mut rebuilt = vec![values[0]];
            for d in &deltas {
                rebuilt.push(rebuilt.last().unwrap() + d);
            }
            for (a, b) in values.iter().zip(&rebuilt) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
