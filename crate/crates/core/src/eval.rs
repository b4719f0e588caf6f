//! The eight experiment protocols: task definitions, repeated training runs,
//! cross-scenario matrices, and snapshot-length sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ScenarioId;
use crate::dataio::SnapshotRecord;
use crate::metrics::{self, ConfusionMatrix, MetricError};
use crate::nnet::{self, LabelValue, NetworkParams, NnetError, Sample, TaskHead, TaskKind, TrainConfig};
use crate::rng::{mix_seed, DetRng};
use crate::split::{make_split, HoldoutKey, SplitError, SplitMode, SplitSpec};
use crate::spectro::Spectrogram;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset lacks required labels: {0}")]
    MissingLabels(String),
    #[error("dataset lacks scenario {0}")]
    MissingScenario(ScenarioId),
    #[error("unknown protocol {0}; expected 1..=8")]
    UnknownProtocol(u8),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Label field a task trains on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskField {
    InterferenceType,
    PowerClass { levels: Vec<f64> },
    AreaClass,
    PositionClass { scope: PositionScope },
    ScenarioClass,
    BandwidthRegression,
    PowerRegression,
    AngleRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionScope {
    Hall,
    Gallery,
    Both,
}

impl PositionScope {
    pub fn n_classes(self) -> usize {
        match self {
            PositionScope::Hall => 16,
            PositionScope::Gallery => 30,
            PositionScope::Both => 46,
        }
    }

    fn class_of(self, position_id: u16) -> Option<usize> {
        let id = position_id as usize;
        match self {
            PositionScope::Hall if id < 16 => Some(id),
            PositionScope::Gallery if (16..46).contains(&id) => Some(id - 16),
            PositionScope::Both if id < 46 => Some(id),
            _ => None,
        }
    }
}

impl TaskField {
    pub fn head(&self) -> TaskHead {
        match self {
            TaskField::InterferenceType => TaskHead::classification("interference_type", 7),
            TaskField::PowerClass { levels } => {
                TaskHead::classification("signal_power_class", levels.len() + 1)
            }
            TaskField::AreaClass => TaskHead::classification("antenna_area", 4),
            TaskField::PositionClass { scope } => {
                TaskHead::classification("position", scope.n_classes())
            }
            TaskField::ScenarioClass => TaskHead::classification("scenario", 12),
            TaskField::BandwidthRegression => TaskHead::regression("bandwidth_mhz"),
            TaskField::PowerRegression => TaskHead::regression("power_dbm"),
            TaskField::AngleRegression => TaskHead::regression("angle_deg"),
        }
    }

    pub fn label_of(&self, r: &SnapshotRecord) -> Result<LabelValue, EvalError> {
        let l = &r.labels;
        Ok(match self {
            TaskField::InterferenceType => LabelValue::Class(l.category.as_u8() as usize),
            TaskField::PowerClass { levels } => {
                if l.category == crate::siggen::JammerCategory::None {
                    LabelValue::Class(0)
                } else {
                    let idx = levels
                        .iter()
                        .position(|&p| (p - l.power_dbm as f64).abs() < 1e-6)
                        .ok_or_else(|| {
                            EvalError::MissingLabels(format!(
                                "power {} dBm not in the class levels {levels:?}",
                                l.power_dbm
                            ))
                        })?;
                    LabelValue::Class(idx + 1)
                }
            }
            TaskField::AreaClass => LabelValue::Class(l.area_id as usize),
            TaskField::PositionClass { scope } => LabelValue::Class(
                scope.class_of(l.position_id).ok_or_else(|| {
                    EvalError::MissingLabels(format!(
                        "position {} outside scope {scope:?}",
                        l.position_id
                    ))
                })?,
            ),
            TaskField::ScenarioClass => LabelValue::Class(l.scenario.index()),
            TaskField::BandwidthRegression => LabelValue::Scalar(l.bandwidth_mhz as f64),
            TaskField::PowerRegression => LabelValue::Scalar(l.power_dbm as f64),
            TaskField::AngleRegression => LabelValue::Scalar(l.angle_deg as f64),
        })
    }
}

/// Builds training samples for the given tasks; optionally truncates every
/// snapshot to `n_t` columns.
pub fn build_samples(
    records: &[SnapshotRecord],
    indices: &[usize],
    tasks: &[TaskField],
    n_t: Option<usize>,
) -> Result<Vec<Sample>, EvalError> {
    indices
        .iter()
        .map(|&i| {
            let r = &records[i];
            let labels = tasks.iter().map(|t| t.label_of(r)).collect::<Result<_, _>>()?;
            let spectrogram = match n_t {
                Some(len) if len < r.spectrogram.n_t => r.spectrogram.truncate(len),
                _ => r.spectrogram.clone(),
            };
            Ok(Sample { spectrogram, labels })
        })
        .collect()
}

/// Per-task metrics of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub task_id: String,
    pub kind: TaskKind,
    pub accuracy: f64,
    pub weighted_f2: f64,
    pub mae: f64,
}

/// Per-task aggregate over R repetitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub kind: TaskKind,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f2_mean: f64,
    pub f2_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
}

/// Aggregated protocol result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub repetitions: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub tasks: Vec<TaskResult>,
    /// Confusion matrices of the first repetition (classification tasks).
    #[serde(skip)]
    pub confusions: Vec<Option<ConfusionMatrix>>,
}

impl ResultTable {
    pub fn task(&self, task_id: &str) -> Option<&TaskResult> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "task,kind,accuracy_mean,accuracy_std,f2_mean,f2_std,mae_mean,mae_std\n",
        );
        for t in &self.tasks {
            let kind = match t.kind {
                TaskKind::Classification => "classification",
                TaskKind::Regression => "regression",
            };
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.6},{:.6},{:.6},{:.6}\n",
                t.task_id, kind, t.accuracy_mean, t.accuracy_std, t.f2_mean, t.f2_std, t.mae_mean,
                t.mae_std
            ));
        }
        out
    }
}

/// Trains once and scores every task on the test side.
fn run_once(
    records: &[SnapshotRecord],
    train_idx: &[usize],
    test_idx: &[usize],
    tasks: &[TaskField],
    train_cfg: &TrainConfig,
    n_t: Option<usize>,
    truncate_test_only: bool,
    rng: &mut DetRng,
) -> Result<(Vec<RunMetrics>, Vec<Option<ConfusionMatrix>>, NetworkParams), EvalError> {
    let train_nt = if truncate_test_only { None } else { n_t };
    let train_samples = build_samples(records, train_idx, tasks, train_nt)?;
    let heads: Vec<TaskHead> = tasks.iter().map(|t| t.head()).collect();
    let (params, _trace) = nnet::train(&train_samples, &heads, train_cfg, rng)?;
    let metrics = score(records, test_idx, tasks, &params, n_t)?;
    Ok((metrics.0, metrics.1, params))
}

/// Scores an already-trained network on the given records.
pub fn score(
    records: &[SnapshotRecord],
    test_idx: &[usize],
    tasks: &[TaskField],
    params: &NetworkParams,
    n_t: Option<usize>,
) -> Result<(Vec<RunMetrics>, Vec<Option<ConfusionMatrix>>), EvalError> {
    let test_samples = build_samples(records, test_idx, tasks, n_t)?;
    // Group test samples by snapshot length so each forward batch is
    // homogeneous.
    let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, s) in test_samples.iter().enumerate() {
        by_len.entry(s.spectrogram.n_t).or_default().push(i);
    }

    let mut metrics = Vec::new();
    let mut confusions = Vec::new();
    for (hi, task) in tasks.iter().enumerate() {
        let head = task.head();
        match head.kind {
            TaskKind::Classification => {
                let mut preds = vec![0usize; test_samples.len()];
                let mut truths = vec![0usize; test_samples.len()];
                for idxs in by_len.values() {
                    let batch: Vec<&Spectrogram> =
                        idxs.iter().map(|&i| &test_samples[i].spectrogram).collect();
                    let p = nnet::predict_classes(params, &batch, hi)?;
                    for (k, &i) in idxs.iter().enumerate() {
                        preds[i] = p[k];
                        truths[i] = match test_samples[i].labels[hi] {
                            LabelValue::Class(c) => c,
                            LabelValue::Scalar(_) => unreachable!(),
                        };
                    }
                }
                let accuracy = metrics::accuracy(&preds, &truths)?;
                let f2 = metrics::weighted_f2(&preds, &truths, head.n_c)?;
                let cm = ConfusionMatrix::from_predictions(&preds, &truths, head.n_c)?;
                metrics.push(RunMetrics {
                    task_id: head.task_id.clone(),
                    kind: head.kind,
                    accuracy,
                    weighted_f2: f2,
                    mae: 0.0,
                });
                confusions.push(Some(cm));
            }
            TaskKind::Regression => {
                let mut preds = vec![0.0; test_samples.len()];
                let mut truths = vec![0.0; test_samples.len()];
                for idxs in by_len.values() {
                    let batch: Vec<&Spectrogram> =
                        idxs.iter().map(|&i| &test_samples[i].spectrogram).collect();
                    let p = nnet::predict_regression(params, &batch, hi)?;
                    for (k, &i) in idxs.iter().enumerate() {
                        preds[i] = p[k];
                        truths[i] = match test_samples[i].labels[hi] {
                            LabelValue::Scalar(v) => v,
                            LabelValue::Class(_) => unreachable!(),
                        };
                    }
                }
                let mae = metrics::mae(&preds, &truths)?;
                metrics.push(RunMetrics {
                    task_id: head.task_id.clone(),
                    kind: head.kind,
                    accuracy: 0.0,
                    weighted_f2: 0.0,
                    mae,
                });
                confusions.push(None);
            }
        }
    }
    Ok((metrics, confusions))
}

fn aggregate(
    name: &str,
    runs: &[Vec<RunMetrics>],
    confusions: Vec<Option<ConfusionMatrix>>,
    seed: u64,
    train_size: usize,
    test_size: usize,
) -> ResultTable {
    let n_tasks = runs[0].len();
    let tasks = (0..n_tasks)
        .map(|t| {
            let accs: Vec<f64> = runs.iter().map(|r| r[t].accuracy).collect();
            let f2s: Vec<f64> = runs.iter().map(|r| r[t].weighted_f2).collect();
            let maes: Vec<f64> = runs.iter().map(|r| r[t].mae).collect();
            let (am, asd) = metrics::mean_std(&accs);
            let (fm, fsd) = metrics::mean_std(&f2s);
            let (mm, msd) = metrics::mean_std(&maes);
            TaskResult {
                task_id: runs[0][t].task_id.clone(),
                kind: runs[0][t].kind,
                accuracy_mean: am,
                accuracy_std: asd,
                f2_mean: fm,
                f2_std: fsd,
                mae_mean: mm,
                mae_std: msd,
            }
        })
        .collect();
    ResultTable {
        name: name.into(),
        repetitions: runs.len(),
        seed,
        train_size,
        test_size,
        tasks,
        confusions,
    }
}

/// Protocol-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Independent training repetitions; mean and std are reported.
    pub repetitions: usize,
    pub train: TrainConfig,
    pub split: SplitSpec,
    /// Class levels for signal-power categorization.
    pub power_levels: Vec<f64>,
    /// Snapshot lengths for the ablation protocol.
    pub sweep_lengths: Vec<usize>,
    /// Ablation mode: retrain per length (false) or train at full length and
    /// truncate only at test time (true).
    pub truncate_at_test: bool,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            repetitions: 10,
            train: TrainConfig::default(),
            split: SplitSpec::dependent(0.2, 0),
            power_levels: vec![6.0, 8.0, 10.0],
            sweep_lengths: vec![1, 5, 10, 34],
            truncate_at_test: false,
            seed: 0,
        }
    }
}

/// Repeats train+score `cfg.repetitions` times (repetitions differ in
/// initialization and data order) and aggregates.
pub fn evaluate_tasks(
    name: &str,
    records: &[SnapshotRecord],
    train_idx: &[usize],
    test_idx: &[usize],
    tasks: &[TaskField],
    cfg: &ProtocolConfig,
    n_t: Option<usize>,
) -> Result<ResultTable, EvalError> {
    let runs: Vec<(Vec<RunMetrics>, Vec<Option<ConfusionMatrix>>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = DetRng::new(mix_seed(cfg.seed, 0x1000 + rep as u64));
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = mix_seed(cfg.seed, 0x2000 + rep as u64);
            run_once(
                records,
                train_idx,
                test_idx,
                tasks,
                &train_cfg,
                n_t,
                cfg.truncate_at_test,
                &mut rng,
            )
            .map(|(m, c, _)| (m, c))
        })
        .collect::<Result<_, _>>()?;
    let confusions = runs[0].1.clone();
    let metric_runs: Vec<Vec<RunMetrics>> = runs.into_iter().map(|(m, _)| m).collect();
    Ok(aggregate(name, &metric_runs, confusions, cfg.seed, train_idx.len(), test_idx.len()))
}

/// Cross-scenario accuracy matrix over the given scenario order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossScenarioMatrix {
    pub scenarios: Vec<ScenarioId>,
    /// Row-major; cell (i, j) = accuracy of the model trained on scenario i
    /// tested on scenario j's held-out samples.
    pub accuracy: Vec<f64>,
}

impl CrossScenarioMatrix {
    pub fn at(&self, train: ScenarioId, test: ScenarioId) -> f64 {
        let i = self.scenarios.iter().position(|&s| s == train).unwrap();
        let j = self.scenarios.iter().position(|&s| s == test).unwrap();
        self.accuracy[i * self.scenarios.len() + j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("train\\test");
        for s in &self.scenarios {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        for (i, s) in self.scenarios.iter().enumerate() {
            out.push_str(&s.to_string());
            for j in 0..self.scenarios.len() {
                out.push_str(&format!(",{:.2}", self.accuracy[i * self.scenarios.len() + j]));
            }
            out.push('\n');
        }
        out
    }
}

/// Trains one interference-type model per scenario and tests it against
/// every scenario's held-out samples. The diagonal uses the training
/// scenario's own held-out split.
pub fn cross_scenario_matrix(
    records: &[SnapshotRecord],
    scenarios: &[ScenarioId],
    cfg: &ProtocolConfig,
) -> Result<CrossScenarioMatrix, EvalError> {
    let task = [TaskField::InterferenceType];
    // Per-scenario train/test split.
    let mut splits: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(scenarios.len());
    for (si, &s) in scenarios.iter().enumerate() {
        let idxs: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].labels.scenario == s)
            .collect();
        if idxs.is_empty() {
            return Err(EvalError::MissingScenario(s));
        }
        let scoped: Vec<SnapshotRecord> = idxs.iter().map(|&i| records[i].clone()).collect();
        let (tr, te) = make_split(
            &scoped,
            &SplitSpec::dependent(cfg.split.test_fraction, mix_seed(cfg.seed, 0x3000 + si as u64)),
        )?;
        splits.push((
            tr.into_iter().map(|k| idxs[k]).collect(),
            te.into_iter().map(|k| idxs[k]).collect(),
        ));
    }

    // Train one model per scenario (parallel across cells), then score
    // against every test side.
    let models: Vec<NetworkParams> = (0..scenarios.len())
        .into_par_iter()
        .map(|si| {
            let mut rng = DetRng::new(mix_seed(cfg.seed, 0x4000 + si as u64));
            let samples = build_samples(records, &splits[si].0, &task, None)?;
            let heads: Vec<TaskHead> = task.iter().map(|t| t.head()).collect();
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = mix_seed(cfg.seed, 0x5000 + si as u64);
            let (params, _) = nnet::train(&samples, &heads, &train_cfg, &mut rng)?;
            Ok::<_, EvalError>(params)
        })
        .collect::<Result<_, _>>()?;

    let mut accuracy = vec![0.0; scenarios.len() * scenarios.len()];
    let cells: Vec<(usize, usize, f64)> = (0..scenarios.len() * scenarios.len())
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / scenarios.len(), cell % scenarios.len());
            let (m, _) = score(records, &splits[j].1, &task, &models[i], None)?;
            Ok::<_, EvalError>((i, j, m[0].accuracy))
        })
        .collect::<Result<_, _>>()?;
    for (i, j, acc) in cells {
        accuracy[i * scenarios.len() + j] = acc;
    }
    Ok(CrossScenarioMatrix { scenarios: scenarios.to_vec(), accuracy })
}

/// Per-length results of the snapshot-length ablation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub lengths: Vec<usize>,
    pub tables: Vec<ResultTable>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_t,task,accuracy_mean,accuracy_std,mae_mean,mae_std\n");
        for (len, table) in self.lengths.iter().zip(&self.tables) {
            for t in &table.tasks {
                out.push_str(&format!(
                    "{},{},{:.4},{:.4},{:.6},{:.6}\n",
                    len, t.task_id, t.accuracy_mean, t.accuracy_std, t.mae_mean, t.mae_std
                ));
            }
        }
        out
    }
}

/// Snapshot-length ablation over `cfg.sweep_lengths` with interference-type
/// classification and bandwidth regression heads.
pub fn snapshot_length_sweep(
    records: &[SnapshotRecord],
    cfg: &ProtocolConfig,
) -> Result<SweepResult, EvalError> {
    let tasks = [TaskField::InterferenceType, TaskField::BandwidthRegression];
    let (train_idx, test_idx) = make_split(
        records,
        &SplitSpec::dependent(cfg.split.test_fraction, mix_seed(cfg.seed, 0x6000)),
    )?;
    let mut lengths = cfg.sweep_lengths.clone();
    lengths.sort_unstable();
    let tables: Vec<ResultTable> = lengths
        .par_iter()
        .map(|&len| {
            evaluate_tasks(
                &format!("n_t={len}"),
                records,
                &train_idx,
                &test_idx,
                &tasks,
                cfg,
                Some(len),
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepResult { lengths, tables })
}

/// Everything a protocol run can produce.
#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub protocol: u8,
    pub tables: Vec<ResultTable>,
    pub matrix: Option<CrossScenarioMatrix>,
    pub sweep: Option<SweepResult>,
}

/// Dispatcher over the eight experiment definitions.
pub fn run_protocol(
    protocol: u8,
    records: &[SnapshotRecord],
    cfg: &ProtocolConfig,
) -> Result<ProtocolOutput, EvalError> {
    let mut out = ProtocolOutput { protocol, tables: vec![], matrix: None, sweep: None };
    let dep_split = || -> Result<(Vec<usize>, Vec<usize>), EvalError> {
        Ok(make_split(records, &SplitSpec::dependent(cfg.split.test_fraction, cfg.seed))?)
    };
    match protocol {
        1 => {
            let (tr, te) = dep_split()?;
            out.tables.push(evaluate_tasks(
                "interference type",
                records,
                &tr,
                &te,
                &[TaskField::InterferenceType],
                cfg,
                None,
            )?);
        }
        2 => {
            let (tr, te) = dep_split()?;
            let tasks = [
                TaskField::InterferenceType,
                TaskField::PowerClass { levels: cfg.power_levels.clone() },
            ];
            out.tables.push(evaluate_tasks(
                "type + signal power",
                records,
                &tr,
                &te,
                &tasks,
                cfg,
                None,
            )?);
        }
        3 => {
            let (tr, te) = dep_split()?;
            let tasks = [TaskField::InterferenceType, TaskField::BandwidthRegression];
            out.tables.push(evaluate_tasks(
                "type + bandwidth",
                records,
                &tr,
                &te,
                &tasks,
                cfg,
                None,
            )?);
        }
        4 => {
            let tasks = [
                TaskField::InterferenceType,
                TaskField::PowerClass { levels: cfg.power_levels.clone() },
            ];
            let (tr, te) = dep_split()?;
            out.tables.push(evaluate_tasks("dependent", records, &tr, &te, &tasks, cfg, None)?);
            let spec = if cfg.split.mode == SplitMode::Independent {
                cfg.split.clone()
            } else {
                SplitSpec::independent(HoldoutKey::PowerDbm, vec![8.0], cfg.seed)
            };
            let (tri, tei) = make_split(records, &spec)?;
            out.tables.push(evaluate_tasks(
                "independent",
                records,
                &tri,
                &tei,
                &tasks,
                cfg,
                None,
            )?);
        }
        5 => {
            let (tr, te) = dep_split()?;
            let tasks = [TaskField::InterferenceType, TaskField::AreaClass];
            out.tables.push(evaluate_tasks(
                "type + antenna area",
                records,
                &tr,
                &te,
                &tasks,
                cfg,
                None,
            )?);
        }
        6 => {
            for scope in [PositionScope::Hall, PositionScope::Gallery, PositionScope::Both] {
                let idxs: Vec<usize> = (0..records.len())
                    .filter(|&i| scope.class_of(records[i].labels.position_id).is_some())
                    .collect();
                if idxs.is_empty() {
                    return Err(EvalError::MissingLabels(format!(
                        "no samples for position scope {scope:?}"
                    )));
                }
                let distinct: std::collections::BTreeSet<u16> =
                    idxs.iter().map(|&i| records[i].labels.position_id).collect();
                if distinct.len() < 2 {
                    return Err(EvalError::MissingLabels(format!(
                        "position scope {scope:?} has a single position"
                    )));
                }
                let scoped: Vec<SnapshotRecord> = idxs.iter().map(|&i| records[i].clone()).collect();
                let (tr, te) =
                    make_split(&scoped, &SplitSpec::dependent(cfg.split.test_fraction, cfg.seed))?;
                let tr: Vec<usize> = tr.into_iter().map(|k| idxs[k]).collect();
                let te: Vec<usize> = te.into_iter().map(|k| idxs[k]).collect();
                let tasks = [TaskField::InterferenceType, TaskField::PositionClass { scope }];
                out.tables.push(evaluate_tasks(
                    &format!("localization {scope:?}"),
                    records,
                    &tr,
                    &te,
                    &tasks,
                    cfg,
                    None,
                )?);
            }
        }
        7 => {
            for s in ScenarioId::ALL {
                if !records.iter().any(|r| r.labels.scenario == s) {
                    return Err(EvalError::MissingScenario(s));
                }
            }
            out.matrix = Some(cross_scenario_matrix(records, &ScenarioId::ALL, cfg)?);
        }
        8 => {
            out.sweep = Some(snapshot_length_sweep(records, cfg)?);
        }
        p => return Err(EvalError::UnknownProtocol(p)),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_documented_values() {
        let cfg = ProtocolConfig::default();
        assert_eq!(cfg.repetitions, 10);
        assert_eq!(cfg.power_levels, vec![6.0, 8.0, 10.0]);
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.train.weight_decay, 5e-4);
    }

    #[test]
    fn position_scopes_expose_paper_class_counts() {
        assert_eq!(PositionScope::Hall.n_classes(), 16);
        assert_eq!(PositionScope::Gallery.n_classes(), 30);
        assert_eq!(PositionScope::Both.n_classes(), 46);
        assert_eq!(PositionScope::Hall.class_of(3), Some(3));
        assert_eq!(PositionScope::Hall.class_of(16), None);
        assert_eq!(PositionScope::Gallery.class_of(16), Some(0));
        assert_eq!(PositionScope::Gallery.class_of(45), Some(29));
        assert_eq!(PositionScope::Both.class_of(45), Some(45));
    }

    #[test]
    fn unknown_protocol_rejected() {
        assert!(matches!(
            run_protocol(9, &[], &ProtocolConfig::default()),
            Err(EvalError::UnknownProtocol(9))
        ));
    }

    #[test]
    fn power_class_mapping() {
        use crate::siggen::JammerCategory;
        let field = TaskField::PowerClass { levels: vec![6.0, 8.0, 10.0] };
        assert_eq!(field.head().n_c, 4);
        let mut rec = crate::split::tests_support::record(JammerCategory::Chirp, 8.0);
        assert_eq!(field.label_of(&rec).unwrap(), LabelValue::Class(2));
        rec.labels.category = JammerCategory::None;
        assert_eq!(field.label_of(&rec).unwrap(), LabelValue::Class(0));
        rec.labels.category = JammerCategory::Noise;
        rec.labels.power_dbm = 3.0;
        assert!(field.label_of(&rec).is_err());
    }
}
