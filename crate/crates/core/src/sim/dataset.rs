//! Dataset manifests, expansion and the parallel dataset builder.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    MotionKind, MotionProfile, Result, SensorModel, SimError, TextureField, TrialSpec,
    PANEL_SIDE_MM, TEXTURE_COUNT, TEXTURE_TABLE_VERSION,
};
use crate::aer::write_events;
use crate::hash::mix_seed;

/// Uniform sampling ranges of the varied-condition protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub depth_mm: (f64, f64),
    pub linear_speed_mm_s: (f64, f64),
    pub angular_speed_deg_s: (f64, f64),
}

impl Default for SamplingRanges {
    fn default() -> Self {
        Self {
            depth_mm: (0.5, 2.5),
            linear_speed_mm_s: (10.0, 50.0),
            angular_speed_deg_s: (10.0, 50.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Fixed-condition protocol: one parameter set, centered start.
    Fixed,
    /// Randomized depth/speeds/start within ranges.
    Varied(SamplingRanges),
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol::Fixed
    }
}

fn default_textures() -> Vec<u8> {
    (1..=TEXTURE_COUNT).collect()
}

fn default_duration() -> u32 {
    super::motion::DEFAULT_DURATION_MS
}

/// User-facing dataset description; expands into a [`DatasetManifest`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub name: String,
    #[serde(default)]
    pub created: String,
    pub motion: MotionKind,
    #[serde(default = "default_textures")]
    pub textures: Vec<u8>,
    pub trials_per_texture: usize,
    #[serde(default)]
    pub protocol: Protocol,
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_ms: u32,
}

/// A fully expanded dataset: one concrete [`TrialSpec`] per trial, with the
/// declared sampling ranges and per-class counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub created: String,
    pub motion: MotionKind,
    pub ranges: Option<SamplingRanges>,
    pub per_class: BTreeMap<u8, usize>,
    pub texture_table_version: u32,
    pub trials: Vec<TrialSpec>,
}

pub fn load_manifest_config(path: &Path) -> Result<ManifestConfig> {
    let file = File::open(path).map_err(|e| SimError::Io { path: path.into(), source: e })?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| SimError::Json { path: path.into(), source: e })
}

/// Expand a config into concrete trials. Randomized parameters are drawn
/// uniformly from the declared ranges with a per-trial seeded generator, so
/// the expansion does not depend on iteration order.
pub fn expand_manifest(config: &ManifestConfig, sensor: &SensorModel) -> Result<DatasetManifest> {
    if config.trials_per_texture == 0 && !config.textures.is_empty() {
        // Zero trials per texture is a valid (empty) dataset.
    }
    for &id in &config.textures {
        if id == 0 || id > TEXTURE_COUNT {
            return Err(SimError::UnknownTexture(id));
        }
    }
    let radius = sensor.footprint_radius_mm();
    let dur_s = f64::from(config.duration_ms) / 1000.0;
    let mut trials = Vec::with_capacity(config.textures.len() * config.trials_per_texture);
    let mut per_class = BTreeMap::new();
    let mut index = 0u64;
    for &texture_id in &config.textures {
        per_class.insert(texture_id, config.trials_per_texture);
        for _ in 0..config.trials_per_texture {
            let trial_seed = mix_seed(config.seed, index);
            let motion = match config.protocol {
                Protocol::Fixed => {
                    let mut m = MotionProfile::fixed_condition(config.motion);
                    m.duration_ms = config.duration_ms;
                    m.slide_distance_mm = m.slide_speed_mm_s * dur_s;
                    m.rotation_deg = m.angular_speed_deg_s * dur_s;
                    m
                }
                Protocol::Varied(ranges) => {
                    sample_motion(config.motion, &ranges, config.duration_ms, radius, trial_seed)
                }
            };
            motion.validate(radius)?;
            trials.push(TrialSpec { texture_id, motion, seed: mix_seed(trial_seed, 0xeeee) });
            index += 1;
        }
    }
    Ok(DatasetManifest {
        name: config.name.clone(),
        created: config.created.clone(),
        motion: config.motion,
        ranges: match config.protocol {
            Protocol::Fixed => None,
            Protocol::Varied(r) => Some(r),
        },
        per_class,
        texture_table_version: TEXTURE_TABLE_VERSION,
        trials,
    })
}

fn sample_motion(
    kind: MotionKind,
    ranges: &SamplingRanges,
    duration_ms: u32,
    radius: f64,
    trial_seed: u64,
) -> MotionProfile {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(trial_seed, 0x5a17));
    let dur_s = f64::from(duration_ms) / 1000.0;
    let uniform = |rng: &mut ChaCha12Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();

    let depth = uniform(&mut rng, ranges.depth_mm);
    let slide_speed =
        if kind.has_slide() { uniform(&mut rng, ranges.linear_speed_mm_s) } else { 0.0 };
    let tap_speed = if kind.has_tap() {
        if kind == MotionKind::Tap {
            super::motion::PURE_TAP_SPEED_MM_S
        } else {
            uniform(&mut rng, ranges.linear_speed_mm_s)
        }
    } else {
        0.0
    };
    let angular = if kind.has_rotate() { uniform(&mut rng, ranges.angular_speed_deg_s) } else { 0.0 };

    let slide_distance = slide_speed * dur_s;
    // Random start keeping the footprint plus travel inside the panel.
    let x_lo = radius;
    let x_hi = PANEL_SIDE_MM - radius - slide_distance;
    let y_lo = radius;
    let y_hi = PANEL_SIDE_MM - radius;
    let start_x = uniform(&mut rng, (x_lo, x_hi));
    let start_y = uniform(&mut rng, (y_lo, y_hi));

    MotionProfile {
        kind,
        depth_mm: depth,
        slide_speed_mm_s: slide_speed,
        slide_distance_mm: slide_distance,
        angular_speed_deg_s: angular,
        rotation_deg: angular * dur_s,
        tap_speed_mm_s: tap_speed,
        duration_ms,
        start_x_mm: start_x,
        start_y_mm: start_y,
    }
}

/// One row of the dataset index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: usize,
    pub file: String,
    pub texture_id: u8,
    pub label: String,
    pub motion: MotionProfile,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub name: String,
    pub created: String,
    pub motion: MotionKind,
    pub texture_table_version: u32,
    pub trials: Vec<IndexEntry>,
}

/// Train/validation/test split over index ids, written next to models so
/// evaluation can prove disjointness from training data.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitFile {
    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .all(|id| seen.insert(*id))
    }
}

pub fn load_index(path: &Path) -> Result<DatasetIndex> {
    let file = File::open(path).map_err(|e| SimError::Io { path: path.into(), source: e })?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| SimError::Json { path: path.into(), source: e })
}

/// Simulate every trial of a manifest into `out_dir/trials/` and write the
/// JSON index. Trials run in parallel; output bytes are independent of the
/// worker count because every trial is seeded from the manifest.
pub fn build_dataset(
    manifest: &DatasetManifest,
    sensor: &SensorModel,
    out_dir: &Path,
) -> Result<DatasetIndex> {
    let trials_dir = out_dir.join("trials");
    std::fs::create_dir_all(&trials_dir)
        .map_err(|e| SimError::Io { path: trials_dir.clone(), source: e })?;

    let fields: BTreeMap<u8, TextureField> = manifest
        .trials
        .iter()
        .map(|t| t.texture_id)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|id| TextureField::standard(id).map(|f| (id, f)))
        .collect::<Result<_>>()?;

    let entries: Vec<IndexEntry> = manifest
        .trials
        .par_iter()
        .enumerate()
        .map(|(id, trial)| -> Result<IndexEntry> {
            let field = &fields[&trial.texture_id];
            let stream = super::simulate_trial(field, sensor, trial)?;
            let file = format!("trials/trial_{id:05}.aert");
            write_events(&stream, &trials_dir.join(format!("trial_{id:05}.aert")))?;
            Ok(IndexEntry {
                id,
                file,
                texture_id: trial.texture_id,
                label: TextureField::label_of(trial.texture_id)?.to_string(),
                motion: trial.motion,
                seed: trial.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let index = DatasetIndex {
        name: manifest.name.clone(),
        created: manifest.created.clone(),
        motion: manifest.motion,
        texture_table_version: manifest.texture_table_version,
        trials: entries,
    };
    write_index(&index, &out_dir.join("index.json"))?;
    Ok(index)
}

pub fn write_index(index: &DatasetIndex, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::Io { path: path.into(), source: e })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, index)
        .map_err(|e| SimError::Json { path: path.into(), source: e })?;
    w.write_all(b"\n").map_err(|e| SimError::Io { path: path.into(), source: e })?;
    w.flush().map_err(|e| SimError::Io { path: path.into(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn config(motion: MotionKind, per: usize, protocol: Protocol) -> ManifestConfig {
        ManifestConfig {
            name: "test".into(),
            created: String::new(),
            motion,
            textures: default_textures(),
            trials_per_texture: per,
            protocol,
            seed: 99,
            duration_ms: 1000,
        }
    }

    #[test]
    fn empty_manifest_builds_empty_index() {
        let cfg = config(MotionKind::Slide, 0, Protocol::Fixed);
        let sensor = SensorModel::default();
        let manifest = expand_manifest(&cfg, &sensor).unwrap();
        assert!(manifest.trials.is_empty());
        let dir = tempdir().unwrap();
        let index = build_dataset(&manifest, &sensor, dir.path()).unwrap();
        assert!(index.trials.is_empty());
        assert!(dir.path().join("index.json").exists());
    }

    #[test]
    fn fixed_manifest_counts_and_balance() {
        let cfg = config(MotionKind::Slide, 7, Protocol::Fixed);
        let manifest = expand_manifest(&cfg, &SensorModel::default()).unwrap();
        assert_eq!(manifest.trials.len(), 70);
        for count in manifest.per_class.values() {
            assert_eq!(*count, 7);
        }
        // Per-texture runs of 7 share motion but differ in seed.
        let seeds: std::collections::HashSet<u64> =
            manifest.trials.iter().map(|t| t.seed).collect();
        assert_eq!(seeds.len(), 70);
    }

    #[test]
    fn varied_sampling_stays_in_ranges() {
        let ranges = SamplingRanges::default();
        let cfg = config(MotionKind::SlideRotate, 30, Protocol::Varied(ranges));
        let manifest = expand_manifest(&cfg, &SensorModel::default()).unwrap();
        for t in &manifest.trials {
            let m = &t.motion;
            assert!(m.depth_mm >= 0.5 && m.depth_mm <= 2.5);
            assert!(m.slide_speed_mm_s >= 10.0 && m.slide_speed_mm_s <= 50.0);
            assert!(m.angular_speed_deg_s >= 10.0 && m.angular_speed_deg_s <= 50.0);
            m.validate(10.0).unwrap();
        }
    }

    #[test]
    fn expansion_is_deterministic() {
        let cfg = config(MotionKind::SlideRotate, 5, Protocol::Varied(SamplingRanges::default()));
        let a = expand_manifest(&cfg, &SensorModel::default()).unwrap();
        let b = expand_manifest(&cfg, &SensorModel::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn split_disjointness_check() {
        let good = SplitFile { train: vec![0, 1], val: vec![2], test: vec![3, 4] };
        assert!(good.is_disjoint());
        let bad = SplitFile { train: vec![0, 1], val: vec![1], test: vec![] };
        assert!(!bad.is_disjoint());
    }
}
