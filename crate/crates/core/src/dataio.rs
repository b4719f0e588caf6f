//! Dataset synthesis orchestration, the on-disk snapshot format, and
//! manifests.
//!
//! Record file layout (all little-endian): magic `GJAM`, format version u16,
//! then length-prefixed records. Each record is a u32 body length followed
//! by the label block — category u8, power f32 (dBm), bandwidth f32 (MHz),
//! scenario u8, variant u8 (0 = a, 1 = b), position u16, area u8, angle f32
//! (deg), seed u64, n_t u16 — and `n_t * 1024` f32 normalized cells stored
//! column by column (one 1024-bin frequency column per window, frequency
//! index varying fastest). The manifest is a sidecar JSON file.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    apply_channel_with_ref, position_grid, PresetTable, ScenarioId,
};
use crate::rng::{mix_seed, DetRng};
use crate::siggen::{synth, JammerCategory, JammerParams, JammerSpec};
use crate::spectro::{frame_snapshot, Spectrogram, MAX_SNAPSHOT_LEN, WINDOW};

pub const MAGIC: &[u8; 4] = b"GJAM";
pub const FORMAT_VERSION: u16 = 1;
/// Fixed label-block size inside one record body.
const LABEL_BLOCK_LEN: usize = 28;

pub const RECORDS_FILE: &str = "records.gjam";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid generation plan: {0}")]
    PlanInvalid(String),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    VersionMismatch(u16),
    #[error("truncated record: {0}")]
    TruncatedRecord(String),
    #[error("malformed record at index {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
    #[error("manifest does not match records: {0}")]
    ManifestMismatch(String),
    #[error("signal generation failed: {0}")]
    SigGen(#[from] crate::siggen::SigGenError),
    #[error("channel failed: {0}")]
    Channel(#[from] crate::channel::ChannelError),
    #[error("spectrogram failed: {0}")]
    Spectro(#[from] crate::spectro::SpectroError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full per-snapshot label tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotLabels {
    pub category: JammerCategory,
    pub power_dbm: f32,
    pub bandwidth_mhz: f32,
    pub scenario: ScenarioId,
    pub position_id: u16,
    pub area_id: u8,
    pub angle_deg: f32,
    /// RNG seed this snapshot was generated from.
    pub seed: u64,
}

/// One stored snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    /// Index within its dataset file.
    pub snapshot_id: u64,
    pub labels: SnapshotLabels,
    pub spectrogram: Spectrogram,
}

/// Adapter hook: anything that can turn an external file into snapshot
/// records can feed the evaluation pipeline. No concrete importer for the
/// published recordings ships here.
pub trait RecordImporter {
    fn import(&mut self, source: &mut dyn Read) -> Result<Vec<SnapshotRecord>, DataError>;
}

/// One (scenario, category, power, bandwidth, position, count) generation
/// request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRow {
    pub scenario: ScenarioId,
    pub category: JammerCategory,
    pub power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub position_id: u16,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<JammerParams>,
}

/// Dataset generation plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationPlan {
    pub sample_rate_hz: f64,
    pub n_t: usize,
    pub rows: Vec<PlanRow>,
}

impl GenerationPlan {
    pub fn total_count(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(DataError::PlanInvalid("sample rate must be positive".into()));
        }
        if !(1..=MAX_SNAPSHOT_LEN).contains(&self.n_t) {
            return Err(DataError::PlanInvalid(format!("n_t {} outside 1..=34", self.n_t)));
        }
        if self.rows.is_empty() {
            return Err(DataError::PlanInvalid("plan has no rows".into()));
        }
        let grid_len = position_grid().len();
        for (i, row) in self.rows.iter().enumerate() {
            if row.count == 0 {
                return Err(DataError::PlanInvalid(format!("row {i} has count 0")));
            }
            if row.position_id as usize >= grid_len {
                return Err(DataError::PlanInvalid(format!(
                    "row {i} position {} outside grid",
                    row.position_id
                )));
            }
            let mut spec = JammerSpec::new(row.category, row.bandwidth_mhz, row.power_dbm);
            if let Some(p) = &row.params {
                spec.params = p.clone();
            }
            spec.validate(self.sample_rate_hz)
                .map_err(|e| DataError::PlanInvalid(format!("row {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<GenerationPlan, DataError> {
        let plan: GenerationPlan =
            serde_json::from_str(text).map_err(|e| DataError::PlanInvalid(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Manifest sidecar: per-combination counts plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub total: usize,
    /// FNV-1a 64 hash of the preset table JSON the dataset was built with.
    pub preset_hash: String,
    pub counts: Vec<ManifestRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub scenario: ScenarioId,
    pub category: JammerCategory,
    pub power_dbm: f32,
    pub bandwidth_mhz: f32,
    pub count: usize,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

fn manifest_for(records: &[SnapshotRecord], preset_hash: String) -> DatasetManifest {
    let mut counts: BTreeMap<(usize, u8, u32, u32), usize> = BTreeMap::new();
    for r in records {
        let key = (
            r.labels.scenario.index(),
            r.labels.category.as_u8(),
            r.labels.power_dbm.to_bits(),
            r.labels.bandwidth_mhz.to_bits(),
        );
        *counts.entry(key).or_insert(0) += 1;
    }
    DatasetManifest {
        format_version: FORMAT_VERSION,
        total: records.len(),
        preset_hash,
        counts: counts
            .into_iter()
            .map(|((si, cat, pw, bw), count)| ManifestRow {
                scenario: ScenarioId::ALL[si],
                category: JammerCategory::from_u8(cat).unwrap(),
                power_dbm: f32::from_bits(pw),
                bandwidth_mhz: f32::from_bits(bw),
                count,
            })
            .collect(),
    }
}

/// Runs the siggen -> channel -> spectrogram pipeline for every plan row.
/// Record `i` draws from an rng derived as `mix(seed, i)`, so regeneration
/// is byte-identical and generation parallelizes freely.
pub fn synthesize_dataset(
    plan: &GenerationPlan,
    presets: &PresetTable,
    seed: u64,
) -> Result<(Vec<SnapshotRecord>, DatasetManifest), DataError> {
    plan.validate()?;
    presets.validate()?;
    let grid = position_grid();

    // Flatten rows into per-record work items.
    let mut items: Vec<(usize, &PlanRow)> = Vec::with_capacity(plan.total_count());
    let mut idx = 0usize;
    for row in &plan.rows {
        for _ in 0..row.count {
            items.push((idx, row));
            idx += 1;
        }
    }

    let records: Vec<SnapshotRecord> = items
        .par_iter()
        .map(|&(index, row)| -> Result<SnapshotRecord, DataError> {
            let rec_seed = mix_seed(seed, index as u64);
            let mut rng = DetRng::new(rec_seed);
            let mut spec = JammerSpec::new(row.category, row.bandwidth_mhz, row.power_dbm);
            if let Some(p) = &row.params {
                spec.params = p.clone();
            }
            let iq = synth(&spec, plan.n_t * WINDOW, plan.sample_rate_hz, &mut rng)?;
            let cfg = presets.get(row.scenario)?.with_random_phases(&mut rng);
            let pos = &grid[row.position_id as usize];
            let received = apply_channel_with_ref(&iq, &cfg, pos, presets.d_ref_m, &mut rng)?;
            let spectrogram = frame_snapshot(&received, plan.n_t)?;
            Ok(SnapshotRecord {
                snapshot_id: index as u64,
                labels: SnapshotLabels {
                    category: row.category,
                    power_dbm: row.power_dbm as f32,
                    bandwidth_mhz: row.bandwidth_mhz as f32,
                    scenario: row.scenario,
                    position_id: row.position_id,
                    area_id: pos.area_id,
                    angle_deg: pos.angle_deg as f32,
                    seed: rec_seed,
                },
                spectrogram,
            })
        })
        .collect::<Result<_, _>>()?;

    let hash = fnv1a64(presets.to_json_pretty().as_bytes());
    let manifest = manifest_for(&records, format!("{hash:016x}"));
    Ok((records, manifest))
}

pub fn write_records(mut w: impl Write, records: &[SnapshotRecord]) -> Result<(), DataError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for r in records {
        let n_t = r.spectrogram.n_t;
        let body_len = (LABEL_BLOCK_LEN + 4 * WINDOW * n_t) as u32;
        w.write_all(&body_len.to_le_bytes())?;
        w.write_all(&[r.labels.category.as_u8()])?;
        w.write_all(&r.labels.power_dbm.to_le_bytes())?;
        w.write_all(&r.labels.bandwidth_mhz.to_le_bytes())?;
        let (num, var) = r.labels.scenario.to_parts();
        w.write_all(&[num, var])?;
        w.write_all(&r.labels.position_id.to_le_bytes())?;
        w.write_all(&[r.labels.area_id])?;
        w.write_all(&r.labels.angle_deg.to_le_bytes())?;
        w.write_all(&r.labels.seed.to_le_bytes())?;
        w.write_all(&(n_t as u16).to_le_bytes())?;
        for &cell in &r.spectrogram.grid {
            w.write_all(&cell.to_le_bytes())?;
        }
    }
    Ok(())
}

struct RecordReader<R: Read> {
    inner: R,
}

impl<R: Read> RecordReader<R> {
    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<(), DataError> {
        self.inner
            .read_exact(buf)
            .map_err(|_| DataError::TruncatedRecord(what.to_string()))
    }

    fn u8(&mut self, what: &str) -> Result<u8, DataError> {
        let mut b = [0u8; 1];
        self.exact(&mut b, what)?;
        Ok(b[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, DataError> {
        let mut b = [0u8; 2];
        self.exact(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64, DataError> {
        let mut b = [0u8; 8];
        self.exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f32(&mut self, what: &str) -> Result<f32, DataError> {
        let mut b = [0u8; 4];
        self.exact(&mut b, what)?;
        Ok(f32::from_le_bytes(b))
    }
}

pub fn read_records(r: impl Read) -> Result<Vec<SnapshotRecord>, DataError> {
    let mut rd = RecordReader { inner: r };
    let mut magic = [0u8; 4];
    rd.inner.read_exact(&mut magic).map_err(|_| DataError::BadMagic)?;
    if &magic != MAGIC {
        return Err(DataError::BadMagic);
    }
    let mut vb = [0u8; 2];
    rd.inner
        .read_exact(&mut vb)
        .map_err(|_| DataError::TruncatedRecord("version".into()))?;
    let version = u16::from_le_bytes(vb);
    if version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch(version));
    }

    let mut records = Vec::new();
    let mut index = 0usize;
    loop {
        let mut len_bytes = [0u8; 4];
        match rd.inner.read(&mut len_bytes[..1]) {
            Ok(0) => break, // clean end of stream
            Ok(_) => {}
            Err(e) => return Err(DataError::Io(e)),
        }
        rd.exact(&mut len_bytes[1..], "record length")?;
        let body_len = u32::from_le_bytes(len_bytes) as usize;
        let max_body = LABEL_BLOCK_LEN + 4 * WINDOW * MAX_SNAPSHOT_LEN;
        if body_len < LABEL_BLOCK_LEN || body_len > max_body {
            return Err(DataError::MalformedRecord {
                index,
                reason: format!("body length {body_len}"),
            });
        }
        let bad = |reason: String| DataError::MalformedRecord { index, reason };

        let category = JammerCategory::from_u8(rd.u8("category")?)
            .ok_or_else(|| bad("unknown category".into()))?;
        let power_dbm = rd.f32("power")?;
        let bandwidth_mhz = rd.f32("bandwidth")?;
        let num = rd.u8("scenario")?;
        let var = rd.u8("variant")?;
        let scenario =
            ScenarioId::from_parts(num, var).ok_or_else(|| bad(format!("scenario {num}/{var}")))?;
        let position_id = rd.u16("position")?;
        let area_id = rd.u8("area")?;
        let angle_deg = rd.f32("angle")?;
        let seed = rd.u64("seed")?;
        let n_t = rd.u16("n_t")? as usize;

        if !(1..=MAX_SNAPSHOT_LEN).contains(&n_t) {
            return Err(bad(format!("n_t {n_t}")));
        }
        if body_len != LABEL_BLOCK_LEN + 4 * WINDOW * n_t {
            return Err(bad(format!("body length {body_len} inconsistent with n_t {n_t}")));
        }
        if !power_dbm.is_finite() || !bandwidth_mhz.is_finite() || !angle_deg.is_finite() {
            return Err(bad("non-finite label".into()));
        }
        if position_id >= 46 || area_id >= 4 {
            return Err(bad("position or area out of range".into()));
        }

        let mut cells = vec![0u8; 4 * WINDOW * n_t];
        rd.exact(&mut cells, "cells")?;
        let grid: Vec<f32> = cells
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if grid.iter().any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v)) {
            return Err(bad("cell outside [0, 1]".into()));
        }

        records.push(SnapshotRecord {
            snapshot_id: index as u64,
            labels: SnapshotLabels {
                category,
                power_dbm,
                bandwidth_mhz,
                scenario,
                position_id,
                area_id,
                angle_deg,
                seed,
            },
            spectrogram: Spectrogram { grid, n_t, raw_db_range: (crate::spectro::NORM_MIN_DB, crate::spectro::NORM_MAX_DB) },
        });
        index += 1;
    }
    Ok(records)
}

/// A dataset on disk: records plus its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<SnapshotRecord>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Writes `records.gjam` then the manifest (manifest last, so a partial
    /// write never leaves a manifest pointing at missing data).
    pub fn write_dir(
        dir: &Path,
        records: &[SnapshotRecord],
        manifest: &DatasetManifest,
    ) -> Result<(), DataError> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(RECORDS_FILE))?);
        write_records(&mut f, records)?;
        f.flush()?;
        std::fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(manifest).expect("manifest serializes"),
        )?;
        Ok(())
    }

    /// Opens a dataset directory and verifies the manifest against the
    /// record file.
    pub fn open_dir(dir: &Path) -> Result<Dataset, DataError> {
        let f = std::io::BufReader::new(std::fs::File::open(dir.join(RECORDS_FILE))?);
        let records = read_records(f)?;
        let manifest: DatasetManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)
                .map_err(|e| DataError::ManifestMismatch(e.to_string()))?;
        let rebuilt = manifest_for(&records, manifest.preset_hash.clone());
        if rebuilt != manifest {
            return Err(DataError::ManifestMismatch(format!(
                "manifest lists {} records, file holds {}",
                manifest.total,
                records.len()
            )));
        }
        Ok(Dataset { records, manifest })
    }
}

// ---------------------------------------------------------------------------
// Built-in desk-scale plans
// ---------------------------------------------------------------------------

use crate::channel::{DEFAULT_FIXED_POSITION, VARIANT_FIXED_POSITION};

fn fixed_position(id: ScenarioId) -> u16 {
    if id == ScenarioId::S1b {
        VARIANT_FIXED_POSITION as u16
    } else {
        DEFAULT_FIXED_POSITION as u16
    }
}

/// Desk-scale default: 12 scenarios x {None, Chirp, Multitone, Noise} x
/// 2 powers x 25 snapshots = 2,400 records. Bandwidths are chosen per
/// category so the band extent separates the classes even when absorption
/// pushes levels toward the noise floor.
pub fn desk_default_plan() -> GenerationPlan {
    let mut rows = Vec::new();
    for scenario in ScenarioId::ALL {
        let pos = fixed_position(scenario);
        for power in [6.0, 10.0] {
            for (category, bw) in [
                (JammerCategory::None, 0.0),
                (JammerCategory::Chirp, 5.0),
                (JammerCategory::Multitone, 20.0),
                (JammerCategory::Noise, 10.0),
            ] {
                rows.push(PlanRow {
                    scenario,
                    category,
                    power_dbm: power,
                    bandwidth_mhz: bw,
                    position_id: pos,
                    count: 25,
                    params: None,
                });
            }
        }
    }
    GenerationPlan { sample_rate_hz: 100e6, n_t: 34, rows }
}

/// All seven categories in the open hall at full snapshot length;
/// `per_class` snapshots per category spread over that category's bandwidth
/// menu.
pub fn sevenclass_plan(per_class: usize) -> GenerationPlan {
    let pos = DEFAULT_FIXED_POSITION as u16;
    let scenario = ScenarioId::S1a;
    let mut rows = Vec::new();
    let menus: [(JammerCategory, &[f64]); 7] = [
        (JammerCategory::None, &[0.0]),
        (JammerCategory::Noise, &[10.0, 20.0, 40.0]),
        (JammerCategory::Chirp, &[10.0, 30.0, 60.0]),
        (JammerCategory::FreqHopper, &[10.0, 20.0]),
        (JammerCategory::Modulated, &[5.0, 10.0]),
        (JammerCategory::Multitone, &[10.0, 20.0]),
        (JammerCategory::Pulsed, &[10.0, 20.0]),
    ];
    for (category, bws) in menus {
        let share = per_class / bws.len();
        let extra = per_class - share * bws.len();
        for (i, &bw) in bws.iter().enumerate() {
            let count = share + usize::from(i < extra);
            if count == 0 {
                continue;
            }
            for power in [6.0, 10.0] {
                // Split each bandwidth row across the two powers.
                let half = count / 2 + usize::from(power == 6.0 && count % 2 == 1);
                if half == 0 {
                    continue;
                }
                rows.push(PlanRow {
                    scenario,
                    category,
                    power_dbm: power,
                    bandwidth_mhz: bw,
                    position_id: pos,
                    count: half,
                    params: None,
                });
            }
        }
    }
    GenerationPlan { sample_rate_hz: 100e6, n_t: 34, rows }
}

/// Cross-scenario plan over a scenario subset: 4 categories x 2 powers x
/// `per_combo` snapshots per scenario.
pub fn xscen_plan(scenarios: &[ScenarioId], per_combo: usize) -> GenerationPlan {
    let mut rows = Vec::new();
    for &scenario in scenarios {
        let pos = fixed_position(scenario);
        for power in [4.0, 6.0, 10.0] {
            for (category, bw) in [
                (JammerCategory::None, 0.0),
                (JammerCategory::Chirp, 5.0),
                (JammerCategory::Multitone, 20.0),
                (JammerCategory::Noise, 10.0),
            ] {
                rows.push(PlanRow {
                    scenario,
                    category,
                    power_dbm: power,
                    bandwidth_mhz: bw,
                    position_id: pos,
                    count: per_combo,
                    params: None,
                });
            }
        }
    }
    GenerationPlan { sample_rate_hz: 100e6, n_t: 34, rows }
}

/// Snapshot-length ablation plan: five visually distinct categories with a
/// two-point bandwidth menu per category, so bandwidth regression has a
/// spread to resolve.
pub fn sweep_plan(per_combo: usize) -> GenerationPlan {
    let pos = DEFAULT_FIXED_POSITION as u16;
    let scenario = ScenarioId::S1a;
    let mut rows = Vec::new();
    let cats = [
        JammerCategory::Chirp,
        JammerCategory::FreqHopper,
        JammerCategory::Multitone,
        JammerCategory::Noise,
    ];
    for category in cats {
        for bw in [15.0, 45.0] {
            for power in [6.0, 10.0] {
                rows.push(PlanRow {
                    scenario,
                    category,
                    power_dbm: power,
                    bandwidth_mhz: bw,
                    position_id: pos,
                    count: per_combo,
                    params: None,
                });
            }
        }
    }
    for power in [6.0, 10.0] {
        rows.push(PlanRow {
            scenario,
            category: JammerCategory::None,
            power_dbm: power,
            bandwidth_mhz: 0.0,
            position_id: pos,
            count: per_combo * 2,
            params: None,
        });
    }
    GenerationPlan { sample_rate_hz: 100e6, n_t: 34, rows }
}

/// Dependent/independent split study plan: power levels {6, 8, 10} dBm plus
/// the no-interference class.
pub fn split_plan(per_combo: usize) -> GenerationPlan {
    let pos = DEFAULT_FIXED_POSITION as u16;
    let scenario = ScenarioId::S1a;
    let mut rows = Vec::new();
    for power in [6.0, 8.0, 10.0] {
        for (category, bw) in [
            (JammerCategory::Chirp, 10.0),
            (JammerCategory::Multitone, 20.0),
            (JammerCategory::Noise, 20.0),
        ] {
            rows.push(PlanRow {
                scenario,
                category,
                power_dbm: power,
                bandwidth_mhz: bw,
                position_id: pos,
                count: per_combo,
                params: None,
            });
        }
    }
    rows.push(PlanRow {
        scenario,
        category: JammerCategory::None,
        power_dbm: 6.0,
        bandwidth_mhz: 0.0,
        position_id: pos,
        count: per_combo * 3,
        params: None,
    });
    GenerationPlan { sample_rate_hz: 100e6, n_t: 34, rows }
}

/// Localization plan: three categories recorded at every position of the
/// requested scope.
pub fn localization_plan(include_hall: bool, include_gallery: bool, per_pos: usize) -> GenerationPlan {
    let scenario = ScenarioId::S1a;
    let mut rows = Vec::new();
    for pos in position_grid() {
        if (pos.on_gallery && !include_gallery) || (!pos.on_gallery && !include_hall) {
            continue;
        }
        let power = if pos.on_gallery { 6.0 } else { 10.0 };
        for (category, bw) in [
            (JammerCategory::Chirp, 10.0),
            (JammerCategory::Multitone, 20.0),
            (JammerCategory::Noise, 20.0),
        ] {
            rows.push(PlanRow {
                scenario,
                category,
                power_dbm: power,
                bandwidth_mhz: bw,
                position_id: pos.position_id,
                count: per_pos,
                params: None,
            });
        }
    }
    GenerationPlan { sample_rate_hz: 100e6, n_t: 17, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan() -> GenerationPlan {
        GenerationPlan {
            sample_rate_hz: 100e6,
            n_t: 2,
            rows: vec![
                PlanRow {
                    scenario: ScenarioId::S1a,
                    category: JammerCategory::Chirp,
                    power_dbm: 6.0,
                    bandwidth_mhz: 20.0,
                    position_id: 5,
                    count: 3,
                    params: None,
                },
                PlanRow {
                    scenario: ScenarioId::S8,
                    category: JammerCategory::None,
                    power_dbm: 0.0,
                    bandwidth_mhz: 0.0,
                    position_id: 5,
                    count: 2,
                    params: None,
                },
            ],
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let plan = tiny_plan();
        let presets = PresetTable::builtin();
        let (a, ma) = synthesize_dataset(&plan, &presets, 42).unwrap();
        let (b, mb) = synthesize_dataset(&plan, &presets, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        let (c, _) = synthesize_dataset(&plan, &presets, 43).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.len(), 5);
        assert_eq!(ma.total, 5);
    }

    #[test]
    fn zero_count_rows_rejected() {
        let mut plan = tiny_plan();
        plan.rows[0].count = 0;
        assert!(matches!(
            synthesize_dataset(&plan, &PresetTable::builtin(), 1),
            Err(DataError::PlanInvalid(_))
        ));
    }

    #[test]
    fn round_trip_bit_identical() {
        let plan = tiny_plan();
        let (records, _) = synthesize_dataset(&plan, &PresetTable::builtin(), 7).unwrap();
        let mut bytes = Vec::new();
        write_records(&mut bytes, &records).unwrap();
        let back = read_records(bytes.as_slice()).unwrap();
        assert_eq!(records, back);
        // Writing again is byte-identical.
        let mut bytes2 = Vec::new();
        write_records(&mut bytes2, &back).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn heterogeneous_n_t_round_trips() {
        let plan_a = tiny_plan();
        let mut plan_b = tiny_plan();
        plan_b.n_t = 3;
        let presets = PresetTable::builtin();
        let (mut records, _) = synthesize_dataset(&plan_a, &presets, 1).unwrap();
        let (more, _) = synthesize_dataset(&plan_b, &presets, 2).unwrap();
        records.extend(more);
        let mut bytes = Vec::new();
        write_records(&mut bytes, &records).unwrap();
        let back = read_records(bytes.as_slice()).unwrap();
        assert_eq!(back.len(), records.len());
        assert_eq!(back[0].spectrogram.n_t, 2);
        assert_eq!(back[8].spectrogram.n_t, 3);
        for (i, r) in back.iter().enumerate() {
            assert_eq!(r.snapshot_id, i as u64);
            assert_eq!(r.spectrogram, records[i].spectrogram);
        }
    }

    #[test]
    fn corrupted_magic_is_rejected_without_partial_data() {
        let plan = tiny_plan();
        let (records, _) = synthesize_dataset(&plan, &PresetTable::builtin(), 7).unwrap();
        let mut bytes = Vec::new();
        write_records(&mut bytes, &records).unwrap();
        bytes[0] = b'X';
        assert!(matches!(read_records(bytes.as_slice()), Err(DataError::BadMagic)));
    }

    #[test]
    fn truncation_and_version_mismatch_detected() {
        let plan = tiny_plan();
        let (records, _) = synthesize_dataset(&plan, &PresetTable::builtin(), 7).unwrap();
        let mut bytes = Vec::new();
        write_records(&mut bytes, &records).unwrap();

        let cut = &bytes[..bytes.len() - 7];
        assert!(matches!(read_records(cut), Err(DataError::TruncatedRecord(_))));

        let mut vbad = bytes.clone();
        vbad[4] = 99;
        assert!(matches!(read_records(vbad.as_slice()), Err(DataError::VersionMismatch(99))));
    }

    #[test]
    fn dataset_dir_round_trip_with_manifest_check() {
        let dir = tempfile::tempdir().unwrap();
        let plan = tiny_plan();
        let (records, manifest) = synthesize_dataset(&plan, &PresetTable::builtin(), 3).unwrap();
        Dataset::write_dir(dir.path(), &records, &manifest).unwrap();
        let ds = Dataset::open_dir(dir.path()).unwrap();
        assert_eq!(ds.records, records);
        assert_eq!(ds.manifest, manifest);

        // Tampered manifest count must be caught on open.
        let mut broken = manifest.clone();
        broken.total += 1;
        std::fs::write(
            dir.path().join(MANIFEST_FILE),
            serde_json::to_string(&broken).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            Dataset::open_dir(dir.path()),
            Err(DataError::ManifestMismatch(_))
        ));
    }

    #[test]
    fn desk_default_plan_mirrors_documented_shape() {
        let plan = desk_default_plan();
        plan.validate().unwrap();
        assert_eq!(plan.total_count(), 2400);
        assert_eq!(plan.n_t, 34);
        // 12 scenarios x 4 categories x 2 powers.
        assert_eq!(plan.rows.len(), 96);
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = sweep_plan(5);
        let text = plan.to_json_pretty();
        let back = GenerationPlan::from_json(&text).unwrap();
        assert_eq!(plan, back);
        assert!(GenerationPlan::from_json("{}").is_err());
    }
}
