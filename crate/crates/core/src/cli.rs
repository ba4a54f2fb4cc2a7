//! Batch command-line front end: synthetic data generation, weight
//! derivation, per-event estimation, virtual-event evaluation, and report
//! aggregation.
//!
//! Exit codes: 2 for configuration problems, 3 for data problems, 4 for
//! algorithmic failures (e.g. not enough similar days). Errors are emitted
//! as JSON on stderr. Flag values override the `--config` file, which
//! overrides resolution-keyed defaults.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bidir::{
    derive_weights, estimate_baseline, BidirError, EngineConfig, TargetMode, WeightCacheFile,
    WeightSchedule,
};
use crate::eval::{
    aggregate_cvr_report, cvr_factor, run_virtual_evaluation, CvrResult, EvalError,
    EvaluationReport, VirtualProtocol,
};
use crate::gbt::{GbtHyperparams, Growth};
use crate::ingest::{self, Dataset, IngestError};
use crate::similar::{SimilarError, SimilarityConfig};
use crate::synth::{generate, SynthConfig, SynthError};
use crate::timeseries::{Resolution, Season, TimeSeriesError};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ALGORITHM: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Bidir(#[from] BidirError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Synth(_) | CliError::Json(_) => EXIT_CONFIG,
            CliError::Ingest(_) | CliError::TimeSeries(_) | CliError::Io(_) => EXIT_DATA,
            CliError::Bidir(_) | CliError::Eval(_) => EXIT_ALGORITHM,
        }
    }

    pub fn error_json(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Ingest(_) => "ingest",
            CliError::TimeSeries(_) => "timeseries",
            CliError::Synth(_) => "synth",
            CliError::Bidir(_) => "engine",
            CliError::Eval(_) => "eval",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        };
        serde_json::json!({ "error": kind, "message": self.to_string() }).to_string()
    }
}

/// Everything a run needs; archived alongside outputs for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub feeder_id: String,
    pub resolution_minutes: u32,
    /// Forecast context window in samples.
    pub forecast_window: usize,
    /// Similar-day matching window in samples.
    pub context_len: usize,
    pub eps_f: f64,
    pub eps_b: f64,
    pub eps_sim: usize,
    pub growth: Growth,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub target_mode: TargetMode,
    pub k_virtual: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_resolution(15)
    }
}

impl RunConfig {
    /// Resolution-keyed defaults: the forecast window spans four hours, the
    /// similar-day window two, and the boosting schedule trades estimator
    /// count against step size as sampling gets coarser.
    pub fn for_resolution(minutes: u32) -> Self {
        let (learning_rate, n_estimators) = match minutes {
            5 => (0.1, 200),
            15 => (0.075, 150),
            30 => (0.1, 100),
            _ => (0.1, 50),
        };
        let per_hour = (60 / minutes.max(1)) as usize;
        Self {
            data: None,
            events: None,
            holidays: None,
            weights: None,
            out_dir: PathBuf::from("out"),
            feeder_id: "feeder".to_string(),
            resolution_minutes: minutes,
            forecast_window: 4 * per_hour,
            context_len: 2 * per_hour,
            eps_f: 1.0,
            eps_b: 1.0,
            eps_sim: 5,
            growth: Growth::LeafWise,
            learning_rate,
            n_estimators,
            max_depth: 7,
            max_leaves: 31,
            target_mode: TargetMode::LoadChange,
            k_virtual: 5,
            seed: 0,
        }
    }

    pub fn resolution(&self) -> Result<Resolution, CliError> {
        Resolution::new(self.resolution_minutes)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn hyperparams(&self) -> GbtHyperparams {
        let mut hp = match self.growth {
            Growth::LeafWise => GbtHyperparams::leaf_wise(
                self.learning_rate,
                self.n_estimators,
                self.max_depth,
            ),
            Growth::LevelWise => {
                GbtHyperparams::level_wise(self.learning_rate, self.n_estimators)
            }
        };
        hp.max_depth = self.max_depth;
        hp.max_leaves = self.max_leaves;
        hp
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            similarity: SimilarityConfig {
                eps_f: self.eps_f,
                eps_b: self.eps_b,
                eps_sim: self.eps_sim,
                context_len: self.context_len,
            },
            forecast_window: self.forecast_window,
            hp: self.hyperparams(),
            target_mode: self.target_mode,
            k_virtual: self.k_virtual,
            seed: self.seed,
        }
    }
}

/// Shared flags mirroring RunConfig; every flag is optional so precedence
/// can be resolved as flags > config file > defaults.
#[derive(Debug, Clone, Args, Default)]
pub struct ConfigOverrides {
    /// JSON RunConfig file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub feeder_id: Option<String>,
    /// Sampling interval in minutes (5, 15, 30 or 60).
    #[arg(long)]
    pub resolution: Option<u32>,
    #[arg(long)]
    pub forecast_window: Option<usize>,
    #[arg(long)]
    pub context_len: Option<usize>,
    #[arg(long)]
    pub eps_f: Option<f64>,
    #[arg(long)]
    pub eps_b: Option<f64>,
    #[arg(long)]
    pub eps_sim: Option<usize>,
    #[arg(long, value_parser = parse_growth)]
    pub growth: Option<Growth>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub n_estimators: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub max_leaves: Option<usize>,
    /// Prediction target: "p" (load level) or "delta-p" (load change).
    #[arg(long, value_parser = parse_target_mode)]
    pub target_mode: Option<TargetMode>,
    #[arg(long)]
    pub k_virtual: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_growth(s: &str) -> Result<Growth, String> {
    match s {
        "leaf-wise" | "leaf" => Ok(Growth::LeafWise),
        "level-wise" | "level" => Ok(Growth::LevelWise),
        other => Err(format!("unknown growth mode {other:?} (leaf-wise or level-wise)")),
    }
}

fn parse_target_mode(s: &str) -> Result<TargetMode, String> {
    match s {
        "p" | "load-level" => Ok(TargetMode::LoadLevel),
        "delta-p" | "load-change" => Ok(TargetMode::LoadChange),
        other => Err(format!("unknown target mode {other:?} (p or delta-p)")),
    }
}

fn parse_season(s: &str) -> Result<Season, String> {
    match s.to_ascii_lowercase().as_str() {
        "summer" => Ok(Season::Summer),
        "winter" => Ok(Season::Winter),
        "all" => Ok(Season::All),
        other => Err(format!("unknown season {other:?} (summer, winter or all)")),
    }
}

impl ConfigOverrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| CliError::Config(format!("bad config file: {e}")))?
            }
            None => match self.resolution {
                Some(m) => RunConfig::for_resolution(m),
                None => RunConfig::default(),
            },
        };
        if let Some(m) = self.resolution {
            if self.config.is_some() && m != cfg.resolution_minutes {
                // Re-key schedule defaults only if the file did not pin them.
                cfg.resolution_minutes = m;
            }
        }
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        if let Some(v) = &self.data {
            cfg.data = Some(v.clone());
        }
        if let Some(v) = &self.events {
            cfg.events = Some(v.clone());
        }
        if let Some(v) = &self.holidays {
            cfg.holidays = Some(v.clone());
        }
        if let Some(v) = &self.weights {
            cfg.weights = Some(v.clone());
        }
        take!(out_dir);
        take!(feeder_id);
        take!(forecast_window);
        take!(context_len);
        take!(eps_f);
        take!(eps_b);
        take!(eps_sim);
        take!(growth);
        take!(learning_rate);
        take!(n_estimators);
        take!(max_depth);
        take!(max_leaves);
        take!(target_mode);
        take!(k_virtual);
        take!(seed);
        cfg.resolution()?; // validate
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cvr-baseline",
    about = "Restores CVR-event load baselines by bidirectional boosted forecasting and quantifies the CVR factor"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic feeder dataset with injected CVR events.
    Synth {
        #[command(flatten)]
        overrides: ConfigOverrides,
        #[arg(long, default_value_t = 365)]
        days: usize,
        #[arg(long, default_value = "2021-01-01")]
        start_date: NaiveDate,
        #[arg(long, default_value_t = 10)]
        cvr_days: usize,
        #[arg(long, default_value_t = 0.8)]
        cvr_factor: f64,
        #[arg(long, default_value_t = 3.0)]
        delta_v_pct: f64,
    },
    /// Derive and cache a reconciliation-weight schedule.
    DeriveWeights {
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Event date the schedule is keyed on; defaults to the first event.
        #[arg(long)]
        event_date: Option<NaiveDate>,
        #[arg(long, value_parser = parse_season, default_value = "all")]
        season: Season,
    },
    /// Restore baselines for every recorded event and quantify CVR factors.
    Estimate {
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Derive the weight schedule in-process instead of loading a cache.
        #[arg(long)]
        derive_inline: bool,
        /// On too few similar days, multiply screening thresholds by 1.25
        /// and retry, up to 3 times.
        #[arg(long)]
        relax_step: bool,
    },
    /// Virtual-event study comparing estimator variants against truth.
    Evaluate {
        #[command(flatten)]
        overrides: ConfigOverrides,
        #[arg(long, value_parser = parse_season, default_value = "summer")]
        season: Season,
        /// Number of virtual event days.
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Aggregate per-event result JSONs into a summary table.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
        /// CvrResult JSON files.
        inputs: Vec<PathBuf>,
    },
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("--data is required".into()))?;
    let (mut dataset, stats) = ingest::load_csv(data, cfg.resolution()?, &cfg.feeder_id)?;
    eprintln!(
        "ingest: {} rows accepted, {} samples interpolated, {} days rejected",
        stats.accepted_rows,
        stats.interpolated_samples,
        stats.rejected_days.len()
    );
    if let Some(events) = &cfg.events {
        ingest::load_events(events, &mut dataset, cfg.context_len)?;
    }
    if let Some(holidays) = &cfg.holidays {
        ingest::apply_holidays(holidays, &mut dataset)?;
    }
    Ok(dataset)
}

pub fn cmd_synth(
    overrides: &ConfigOverrides,
    days: usize,
    start_date: NaiveDate,
    cvr_days: usize,
    factor: f64,
    delta_v_pct: f64,
) -> Result<(), CliError> {
    let cfg = overrides.resolve()?;
    let resolution = cfg.resolution()?;
    let event_window = VirtualProtocol::seasonal(Season::Summer, resolution).window;
    let synth_cfg = SynthConfig {
        seed: cfg.seed,
        days,
        start_date,
        resolution,
        cvr_day_count: cvr_days,
        injected_cvr_factor: factor,
        injected_delta_v_pct: delta_v_pct,
        event_window,
        event_context_len: cfg.context_len,
        feeder_id: cfg.feeder_id.clone(),
        ..SynthConfig::default()
    };
    let out = generate(&synth_cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    ingest::write_csv(&out.dataset, &cfg.out_dir.join("data.csv"))?;
    ingest::write_events(&out.dataset, &cfg.out_dir.join("events.json"))?;
    let truth: Vec<serde_json::Value> = out
        .ground_truth
        .iter()
        .map(|(date, series)| {
            serde_json::json!({ "date": date, "baseline_kw": series })
        })
        .collect();
    fs::write(
        cfg.out_dir.join("truth.json"),
        serde_json::to_string_pretty(&truth)?,
    )?;
    println!(
        "synth: wrote {} days ({} events) to {}",
        out.dataset.days.len(),
        out.dataset.events.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

pub fn cmd_derive_weights(
    overrides: &ConfigOverrides,
    event_date: Option<NaiveDate>,
    season: Season,
) -> Result<(), CliError> {
    let cfg = overrides.resolve()?;
    let dataset = load_dataset(&cfg)?;
    let event = match event_date {
        Some(date) => dataset
            .events
            .iter()
            .find(|e| e.date == date)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("no event on {date}")))?,
        None => dataset
            .events
            .first()
            .cloned()
            .ok_or_else(|| CliError::Config("event file has no events".into()))?,
    };
    let schedule = derive_weights(&dataset, &event, &cfg.engine_config())?;
    let cache = WeightCacheFile::from_schedule(
        &schedule,
        &cfg.feeder_id,
        season,
        cfg.resolution_minutes,
    );
    let path = cfg
        .weights
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("weights.json"));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, serde_json::to_string_pretty(&cache)?)?;
    println!(
        "derive-weights: {} iterations for L={} written to {}",
        schedule.iterations(),
        schedule.event_len,
        path.display()
    );
    Ok(())
}

/// Runs `f`, relaxing the screening thresholds by 1.25x per retry (at most
/// three) when enabled and the failure was a similar-day shortage.
fn with_relaxation<T>(
    engine: &EngineConfig,
    relax: bool,
    mut f: impl FnMut(&EngineConfig) -> Result<T, BidirError>,
) -> Result<T, BidirError> {
    let mut cfg = engine.clone();
    let mut attempt = 0;
    loop {
        match f(&cfg) {
            Err(BidirError::Similar(SimilarError::InsufficientSimilarDays { .. }))
                if relax && attempt < 3 =>
            {
                attempt += 1;
                cfg.similarity.eps_f *= 1.25;
                cfg.similarity.eps_b *= 1.25;
                eprintln!(
                    "relax-step: retry {attempt} with eps_f={:.4} eps_b={:.4}",
                    cfg.similarity.eps_f, cfg.similarity.eps_b
                );
            }
            other => return other,
        }
    }
}

pub fn cmd_estimate(
    overrides: &ConfigOverrides,
    derive_inline: bool,
    relax_step: bool,
) -> Result<(), CliError> {
    let cfg = overrides.resolve()?;
    let dataset = load_dataset(&cfg)?;
    if dataset.events.is_empty() {
        return Err(CliError::Config("no events to estimate (--events missing or empty)".into()));
    }
    let cache: Option<WeightCacheFile> = match &cfg.weights {
        Some(path) if path.exists() => {
            let text = fs::read_to_string(path)?;
            Some(serde_json::from_str(&text)?)
        }
        _ => None,
    };
    if cache.is_none() && !derive_inline {
        return Err(CliError::Config(
            "no weight cache found; pass --weights <file> or --derive-inline".into(),
        ));
    }
    let engine = cfg.engine_config();
    fs::create_dir_all(&cfg.out_dir)?;

    let mut results = Vec::new();
    let events = dataset.events.clone();
    for event in &events {
        let schedule: WeightSchedule = match &cache {
            Some(c) if c.l == event.cvr_window.len => c.schedule(),
            Some(c) => {
                return Err(CliError::Config(format!(
                    "cached schedule is for L={}, event {} has L={}",
                    c.l, event.date, event.cvr_window.len
                )))
            }
            None => with_relaxation(&engine, relax_step, |e| derive_weights(&dataset, event, e))?,
        };
        let estimate = with_relaxation(&engine, relax_step, |e| {
            estimate_baseline(&dataset, event, e, &schedule)
        })?;
        let result = cvr_factor(&dataset, event, &estimate.restored)?;

        let base = cfg.out_dir.join(format!("baseline_{}", event.date));
        let mut csv = String::from("sample_index,baseline_kw,observed_kw\n");
        let observed = &dataset.days[&event.date].load;
        for (j, value) in estimate.restored.iter().enumerate() {
            let idx = event.cvr_window.start + j;
            csv.push_str(&format!("{idx},{},{}\n", fmt6(*value), fmt6(observed[idx])));
        }
        fs::write(base.with_extension("csv"), csv)?;
        fs::write(base.with_extension("json"), serde_json::to_string_pretty(&result)?)?;
        println!(
            "estimate {}: cvr_factor={} delta_p_pct={} delta_v_pct={}",
            event.date,
            fmt6(result.cvr_factor),
            fmt6(result.delta_p_pct),
            fmt6(result.delta_v_pct)
        );
        results.push(result);
    }
    let report = aggregate_cvr_report(results)?;
    fs::write(
        cfg.out_dir.join("cvr_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "estimate: {} events, mean cvr_factor {} +/- {}",
        report.events,
        fmt6(report.mean_factor),
        fmt6(report.ci95_half_width)
    );
    Ok(())
}

/// Long-format CSV rows (day, variant, metric, value) for one evaluation.
fn evaluation_csv(reports: &[(&str, &EvaluationReport)]) -> String {
    let mut out = String::from("day,variant,metric,value\n");
    for (label, report) in reports {
        for day in &report.day_results {
            for (variant, estimate) in &day.estimates {
                let pairs = vec![(day.actual.clone(), estimate.clone())];
                if let Ok(m) = crate::eval::metrics(&pairs) {
                    let variant_label = match (*label, variant.as_str()) {
                        ("p", "reconciled") => "p".to_string(),
                        ("delta_p", "reconciled") => "delta_p".to_string(),
                        ("p", other) => other.to_string(),
                        // Secondary-mode unidirectional rows are redundant.
                        _ => continue,
                    };
                    for (metric, value) in [
                        ("mape", m.mape),
                        ("nrmse", m.nrmse),
                        ("energy_err", m.energy_err),
                        ("mpe_pct", m.mpe_pct),
                    ] {
                        out.push_str(&format!(
                            "{},{},{},{}\n",
                            day.date,
                            variant_label,
                            metric,
                            fmt6(value)
                        ));
                    }
                }
            }
        }
    }
    out
}

pub fn cmd_evaluate(
    overrides: &ConfigOverrides,
    season: Season,
    count: usize,
) -> Result<(), CliError> {
    let cfg = overrides.resolve()?;
    let dataset = load_dataset(&cfg)?;
    let resolution = cfg.resolution()?;
    let mut protocol = VirtualProtocol::seasonal(season, resolution);
    protocol.max_days = count;

    // Run both prediction targets so the report can compare them; the four
    // named variants come from the load-level run.
    let mut engine_p = cfg.engine_config();
    engine_p.target_mode = TargetMode::LoadLevel;
    let mut engine_dp = cfg.engine_config();
    engine_dp.target_mode = TargetMode::LoadChange;
    let report_p = run_virtual_evaluation(&dataset, &protocol, &engine_p, cfg.context_len)?;
    let report_dp = run_virtual_evaluation(&dataset, &protocol, &engine_dp, cfg.context_len)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let csv = evaluation_csv(&[("p", &report_p), ("delta_p", &report_dp)]);
    fs::write(cfg.out_dir.join("evaluation.csv"), csv)?;

    let mut summary = serde_json::Map::new();
    for (variant, m) in &report_p.by_variant {
        summary.insert(variant.clone(), serde_json::to_value(m)?);
    }
    summary.insert("p".into(), serde_json::to_value(&report_p.by_variant["reconciled"])?);
    summary.insert(
        "delta_p".into(),
        serde_json::to_value(&report_dp.by_variant["reconciled"])?,
    );
    fs::write(
        cfg.out_dir.join("evaluation.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(summary))?,
    )?;
    println!(
        "evaluate: {} {} days, reconciled nrmse {}",
        report_p.day_results.len(),
        season,
        fmt6(report_p.by_variant["reconciled"].nrmse)
    );
    Ok(())
}

pub fn cmd_report(out_dir: &Path, inputs: &[PathBuf]) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("report requires at least one CvrResult JSON".into()));
    }
    let mut results: Vec<CvrResult> = Vec::with_capacity(inputs.len());
    for path in inputs {
        let text = fs::read_to_string(path)?;
        results.push(serde_json::from_str(&text)?);
    }
    results.sort_by_key(|r| r.date);
    let report = aggregate_cvr_report(results)?;
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("date,cvr_factor,delta_p_pct,delta_v_pct\n");
    for r in &report.per_event {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.date,
            fmt6(r.cvr_factor),
            fmt6(r.delta_p_pct),
            fmt6(r.delta_v_pct)
        ));
    }
    csv.push_str(&format!(
        "mean,{},,\nci95_half_width,{},,\n",
        fmt6(report.mean_factor),
        fmt6(report.ci95_half_width)
    ));
    fs::write(out_dir.join("cvr_summary.csv"), csv)?;
    fs::write(out_dir.join("cvr_summary.json"), serde_json::to_string_pretty(&report)?)?;
    println!(
        "report: {} events, mean cvr_factor {} +/- {}",
        report.events,
        fmt6(report.mean_factor),
        fmt6(report.ci95_half_width)
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth { overrides, days, start_date, cvr_days, cvr_factor, delta_v_pct } => {
            cmd_synth(overrides, *days, *start_date, *cvr_days, *cvr_factor, *delta_v_pct)
        }
        Command::DeriveWeights { overrides, event_date, season } => {
            cmd_derive_weights(overrides, *event_date, *season)
        }
        Command::Estimate { overrides, derive_inline, relax_step } => {
            cmd_estimate(overrides, *derive_inline, *relax_step)
        }
        Command::Evaluate { overrides, season, count } => cmd_evaluate(overrides, *season, *count),
        Command::Report { out_dir, inputs } => cmd_report(out_dir, inputs),
    }
}
