//! Synthetic GNSS-band jammer snapshots and robustness evaluation.
//!
//! The pipeline: [`siggen`] synthesizes complex-baseband interference
//! waveforms, [`channel`] applies a scenario-dependent multipath/absorption
//! model, [`spectro`] renders normalized 1024 x N_t spectrogram snapshots,
//! [`dataio`] persists them, [`nnet`] trains a compact multi-task residual
//! CNN, [`uncert`] handles deep ensembles and uncertainty decomposition, and
//! [`eval`] runs the eight experiment protocols.

pub mod channel;
pub mod dataio;
pub mod eval;
pub mod fft;
pub mod metrics;
pub mod nnet;
pub mod plot;
pub mod rng;
pub mod siggen;
pub mod spectro;
pub mod split;
pub mod uncert;

pub use channel::{apply_channel, position_grid, scenario_preset, PositionLabel, PresetTable, ScenarioId};
pub use dataio::{read_records, synthesize_dataset, write_records, Dataset, GenerationPlan, SnapshotRecord};
pub use nnet::{NetworkParams, TaskHead, TrainConfig};
pub use siggen::{synth, waveform_phase, IqBuffer, JammerCategory, JammerSpec};
pub use spectro::{frame_snapshot, normalize, stft_db, Spectrogram};
pub use uncert::{decompose, EnsemblePrediction, UncertaintyReport};
