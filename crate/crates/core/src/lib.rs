//! Restores the counterfactual load profile ("baseline") of a Conservation
//! Voltage Reduction event by iterative bidirectional gradient-boosted
//! forecasting with least-squares reconciliation, then quantifies the CVR
//! effect and the estimation quality.
//!
//! Module map:
//! - [`timeseries`]: calendar-indexed day records, resolutions, windows
//! - [`ingest`]: CSV/JSON ingestion into the data model
//! - [`similar`]: hybrid temperature+load similar-day screening
//! - [`gbt`]: gradient-boosted regression trees (level-wise and leaf-wise)
//! - [`bidir`]: the iterative bidirectional restoration engine
//! - [`eval`]: estimation-quality metrics, CVR factors, virtual-day harness
//! - [`synth`]: synthetic feeder data with known ground truth
//! - [`cli`]: batch command front end

pub mod bidir;
pub mod cli;
pub mod eval;
pub mod gbt;
pub mod ingest;
pub mod similar;
pub mod synth;
pub mod timeseries;

/// Derives a stage-specific sub-seed from the run seed.
///
/// FNV-1a over the seed bytes, the stage name, and an index (e.g. a day
/// ordinal), so parallel per-day work stays reproducible regardless of
/// scheduling.
pub fn sub_seed(seed: u64, stage: &str, index: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf29ce484222325;
    const FNV_PRIME: u64 = 0x100000001b3;
    let mut h = FNV_OFFSET;
    for b in seed
        .to_le_bytes()
        .iter()
        .chain(stage.as_bytes())
        .chain(index.to_le_bytes().iter())
    {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
