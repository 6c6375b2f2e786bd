//! Multi-trial runs, aggregate metrics and the two-proportion test.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{Condition, ExperimentConfig};
use super::trial::{run_trial, TrialRecord, TrialSetup};
use crate::error::Result;
use crate::world::RoomTag;

/// Two-sided two-proportion z-test with pooled variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionTest {
    pub z: f64,
    pub p_value: f64,
}

pub fn two_proportion_z(
    success_a: usize,
    n_a: usize,
    success_b: usize,
    n_b: usize,
) -> ProportionTest {
    if n_a == 0 || n_b == 0 {
        return ProportionTest {
            z: 0.0,
            p_value: 1.0,
        };
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let (pa, pb) = (success_a as f64 / na, success_b as f64 / nb);
    let pooled = (success_a + success_b) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return ProportionTest {
            z: 0.0,
            p_value: if pa == pb { 1.0 } else { 0.0 },
        };
    }
    let z = (pa - pb) / se;
    let normal = Normal::standard();
    ProportionTest {
        z,
        p_value: 2.0 * (1.0 - normal.cdf(z.abs())),
    }
}

/// Mean, population standard deviation and count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub condition: Condition,
    pub trials: usize,
    pub aborted: usize,
    pub anomaly_rooms: usize,
    pub non_anomaly_rooms: usize,
    /// Window scores grouped by the tag of the room the robot stood in;
    /// `None` is the central hall.
    pub per_tag: Vec<(Option<RoomTag>, Summary)>,
}

impl MetricsTable {
    pub fn from_records(condition: Condition, records: &[TrialRecord]) -> Self {
        let mut tags: Vec<Option<RoomTag>> = vec![None];
        tags.extend(RoomTag::ALL.iter().copied().map(Some));
        let per_tag = tags
            .into_iter()
            .filter_map(|t| {
                let v: Vec<f64> = records
                    .iter()
                    .flat_map(|r| r.windows.iter())
                    .filter(|w| w.tag == t)
                    .map(|w| w.score)
                    .collect();
                Summary::of(&v).map(|s| (t, s))
            })
            .collect();
        Self {
            condition,
            trials: records.len(),
            aborted: records.iter().filter(|r| r.aborted.is_some()).count(),
            anomaly_rooms: records.iter().map(|r| r.anomaly_rooms).sum(),
            non_anomaly_rooms: records.iter().map(|r| r.non_anomaly_rooms).sum(),
            per_tag,
        }
    }

    pub fn rooms(&self) -> usize {
        self.anomaly_rooms + self.non_anomaly_rooms
    }

    pub fn anomaly_fraction(&self) -> f64 {
        if self.rooms() == 0 {
            0.0
        } else {
            self.anomaly_rooms as f64 / self.rooms() as f64
        }
    }

    /// Compares this table's anomaly fraction with another's.
    pub fn test_against(&self, other: &MetricsTable) -> ProportionTest {
        two_proportion_z(
            self.anomaly_rooms,
            self.rooms(),
            other.anomaly_rooms,
            other.rooms(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub metrics: MetricsTable,
}

/// Runs every trial of the configured condition (in parallel) and aggregates.
/// Trials that fail outright are recorded as aborted.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let setup = TrialSetup::load(config)?;
    run_with_setup(&setup)
}

pub fn run_with_setup(setup: &TrialSetup) -> Result<ExperimentResult> {
    let cfg = &setup.config;
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            run_trial(setup, i).unwrap_or_else(|e| TrialRecord {
                trial: i,
                condition: cfg.condition,
                seed: super::trial::trial_seed(cfg.seed, i),
                ticks: Vec::new(),
                entries: Vec::new(),
                windows: Vec::new(),
                decisions: Vec::new(),
                anomaly_rooms: 0,
                non_anomaly_rooms: 0,
                ledger_records: 0,
                map_complete: false,
                aborted: Some(e.to_string()),
                weights_before: None,
                weights_after: None,
            })
        })
        .collect();
    let metrics = MetricsTable::from_records(cfg.condition, &records);
    Ok(ExperimentResult { records, metrics })
}
