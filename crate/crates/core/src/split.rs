//! Train/test split construction: stratified random ("dependent") splits and
//! characteristic-holdout ("independent") splits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::SnapshotRecord;
use crate::rng::DetRng;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("holdout value {0} not present in the data")]
    HoldoutAbsent(f64),
    #[error("independent split requires a holdout key and nonempty values")]
    MissingHoldout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Train and test share characteristics; stratified random split.
    Dependent,
    /// Test set is exactly the samples whose holdout field matches.
    Independent,
    /// Plain stratified random split (alias of dependent in behavior).
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldoutKey {
    PowerDbm,
    BandwidthMhz,
}

impl HoldoutKey {
    fn value_of(self, r: &SnapshotRecord) -> f64 {
        match self {
            HoldoutKey::PowerDbm => r.labels.power_dbm as f64,
            HoldoutKey::BandwidthMhz => r.labels.bandwidth_mhz as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_key: Option<HoldoutKey>,
    #[serde(default)]
    pub holdout_values: Vec<f64>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn dependent(test_fraction: f64, seed: u64) -> SplitSpec {
        SplitSpec {
            mode: SplitMode::Dependent,
            holdout_key: None,
            holdout_values: vec![],
            test_fraction,
            seed,
        }
    }

    pub fn independent(key: HoldoutKey, values: Vec<f64>, seed: u64) -> SplitSpec {
        SplitSpec {
            mode: SplitMode::Independent,
            holdout_key: Some(key),
            holdout_values: values,
            test_fraction: 0.2,
            seed,
        }
    }
}

fn matches_holdout(value: f64, holdout: &[f64]) -> bool {
    holdout.iter().any(|&h| (value - h).abs() < 1e-6)
}

/// Splits record indices into (train, test).
///
/// Dependent/random: per-category stratified random selection of
/// `test_fraction`. Independent: the test side is exactly the records whose
/// holdout field is in `holdout_values`; the train side is the complement,
/// and the absence of holdout values from the train side is asserted.
pub fn make_split(
    records: &[SnapshotRecord],
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>), SplitError> {
    if records.is_empty() {
        return Err(SplitError::DegenerateSplit("no records".into()));
    }
    match spec.mode {
        SplitMode::Dependent | SplitMode::Random => {
            if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
                return Err(SplitError::DegenerateSplit(format!(
                    "test fraction {} outside (0, 1)",
                    spec.test_fraction
                )));
            }
            let mut rng = DetRng::new(spec.seed);
            let mut by_class: std::collections::BTreeMap<u8, Vec<usize>> = Default::default();
            for (i, r) in records.iter().enumerate() {
                by_class.entry(r.labels.category.as_u8()).or_default().push(i);
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (_, mut idxs) in by_class {
                rng.shuffle(&mut idxs);
                let n_test = ((idxs.len() as f64 * spec.test_fraction).round() as usize)
                    .min(idxs.len().saturating_sub(1))
                    .max(usize::from(idxs.len() > 1));
                test.extend_from_slice(&idxs[..n_test]);
                train.extend_from_slice(&idxs[n_test..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            if train.is_empty() || test.is_empty() {
                return Err(SplitError::DegenerateSplit("one side is empty".into()));
            }
            Ok((train, test))
        }
        SplitMode::Independent => {
            let key = spec.holdout_key.ok_or(SplitError::MissingHoldout)?;
            if spec.holdout_values.is_empty() {
                return Err(SplitError::MissingHoldout);
            }
            for &h in &spec.holdout_values {
                if !records.iter().any(|r| (key.value_of(r) - h).abs() < 1e-6) {
                    return Err(SplitError::HoldoutAbsent(h));
                }
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, r) in records.iter().enumerate() {
                if matches_holdout(key.value_of(r), &spec.holdout_values) {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
            if train.is_empty() || test.is_empty() {
                return Err(SplitError::DegenerateSplit("one side is empty".into()));
            }
            // Leakage check, asserted on every run.
            assert!(
                train.iter().all(|&i| !matches_holdout(key.value_of(&records[i]), &spec.holdout_values)),
                "holdout value leaked into the training split"
            );
            Ok((train, test))
        }
    }
}

#[cfg(test)]
pub mod tests_support {
    use super::*;
    use crate::channel::ScenarioId;
    use crate::siggen::JammerCategory;
    use crate::spectro::Spectrogram;

    pub fn record(category: JammerCategory, power: f32) -> SnapshotRecord {
        SnapshotRecord {
            snapshot_id: 0,
            labels: crate::dataio::SnapshotLabels {
                category,
                power_dbm: power,
                bandwidth_mhz: 10.0,
                scenario: ScenarioId::S1a,
                position_id: 0,
                area_id: 0,
                angle_deg: 0.0,
                seed: 0,
            },
            spectrogram: Spectrogram { grid: vec![0.0; 1024], n_t: 1, raw_db_range: (0.0, 1.0) },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::record;
    use super::*;
    use crate::siggen::JammerCategory;

    fn records() -> Vec<SnapshotRecord> {
        let mut v = Vec::new();
        for power in [6.0, 8.0, 10.0] {
            for cat in [JammerCategory::Chirp, JammerCategory::Noise] {
                for _ in 0..10 {
                    v.push(record(cat, power));
                }
            }
        }
        v
    }

    #[test]
    fn independent_holdout_never_leaks() {
        let recs = records();
        let spec = SplitSpec::independent(HoldoutKey::PowerDbm, vec![8.0], 1);
        let (train, test) = make_split(&recs, &spec).unwrap();
        assert_eq!(test.len(), 20);
        assert!(test.iter().all(|&i| recs[i].labels.power_dbm == 8.0));
        assert!(train.iter().all(|&i| recs[i].labels.power_dbm != 8.0));
        assert_eq!(train.len() + test.len(), recs.len());
    }

    #[test]
    fn dependent_split_respects_fraction_and_seed() {
        let recs = records();
        let spec = SplitSpec::dependent(0.2, 9);
        let (train_a, test_a) = make_split(&recs, &spec).unwrap();
        let (train_b, test_b) = make_split(&recs, &spec).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        // 60 records, fraction 0.2, stratified over 2 classes of 30.
        assert_eq!(test_a.len(), 12);

        let other = SplitSpec::dependent(0.2, 10);
        let (_, test_c) = make_split(&recs, &other).unwrap();
        assert_ne!(test_a, test_c);
    }

    #[test]
    fn degenerate_and_missing_holdout_rejected() {
        let recs = records();
        assert!(matches!(
            make_split(&recs, &SplitSpec::independent(HoldoutKey::PowerDbm, vec![4.0], 1)),
            Err(SplitError::HoldoutAbsent(_))
        ));
        assert!(matches!(
            make_split(&recs, &SplitSpec::independent(HoldoutKey::PowerDbm, vec![], 1)),
            Err(SplitError::MissingHoldout)
        ));
        assert!(matches!(
            make_split(&[], &SplitSpec::dependent(0.2, 0)),
            Err(SplitError::DegenerateSplit(_))
        ));
        // Holding out every power empties the train side.
        assert!(matches!(
            make_split(
                &recs,
                &SplitSpec::independent(HoldoutKey::PowerDbm, vec![6.0, 8.0, 10.0], 1)
            ),
            Err(SplitError::DegenerateSplit(_))
        ));
    }

    #[test]
    fn sides_are_disjoint_and_cover() {
        let recs = records();
        let (train, test) = make_split(&recs, &SplitSpec::dependent(0.3, 5)).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), recs.len());
    }
}
