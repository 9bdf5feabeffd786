//! Test-set loading and full-length evaluation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use super::{MetricsError, Result};
use crate::aer::{bin_with, crop, pool, read_events, BinOptions, CropSpec, PoolGrid, SpikeTensor};
use crate::sim::{DatasetIndex, MotionKind, SplitFile};
use crate::snn::{argmax_class, forward, Parameters, Plan};

/// Preprocessing chain configuration shared by training and evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub crop: CropSpec,
    pub grid: PoolGrid,
    pub dt_us: u32,
    pub t_steps: usize,
    pub bin: BinOptions,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            crop: CropSpec::default(),
            grid: PoolGrid::default(),
            dt_us: crate::aer::DEFAULT_DT_US,
            t_steps: crate::aer::DEFAULT_T_STEPS,
            bin: BinOptions::default(),
        }
    }
}

impl PreprocessConfig {
    /// Run the crop/pool/bin chain on one event file.
    pub fn tensor_from_file(&self, path: &Path) -> Result<SpikeTensor> {
        let outcome = read_events(path)?;
        let cropped = crop(&outcome.stream, &self.crop)?;
        let pooled = pool(&cropped, &self.grid)?;
        Ok(bin_with(&pooled, self.dt_us, self.t_steps, self.bin)?.tensor)
    }
}

/// One evaluation trial: preprocessed tensor plus index metadata.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub trial_id: usize,
    pub class: usize,
    pub channels: Vec<SpikeTensor>,
    pub depth_mm: f64,
    pub linear_speed_mm_s: f64,
    pub angular_speed_deg_s: f64,
}

#[derive(Debug, Clone)]
pub struct EvalSet {
    pub motion: MotionKind,
    pub classes: usize,
    pub items: Vec<EvalItem>,
}

/// Load the test split of a dataset, enforcing that the split is disjoint
/// and that requested ids exist.
pub fn load_eval_set(
    dataset_dir: &Path,
    index: &DatasetIndex,
    split: &SplitFile,
    preprocess: &PreprocessConfig,
) -> Result<EvalSet> {
    if !split.is_disjoint() {
        return Err(MetricsError::InvalidArgument(
            "split records overlap between train/val/test".into(),
        ));
    }
    if split.test.is_empty() {
        return Err(MetricsError::InvalidArgument("empty test split".into()));
    }
    let items: Vec<EvalItem> = split
        .test
        .par_iter()
        .map(|&id| -> Result<EvalItem> {
            let entry = index
                .trials
                .get(id)
                .filter(|e| e.id == id)
                .or_else(|| index.trials.iter().find(|e| e.id == id))
                .ok_or_else(|| {
                    MetricsError::InvalidArgument(format!("trial id {id} not in index"))
                })?;
            let tensor = preprocess.tensor_from_file(&dataset_dir.join(&entry.file))?;
            Ok(EvalItem {
                trial_id: id,
                class: usize::from(entry.texture_id),
                channels: vec![tensor],
                depth_mm: entry.motion.depth_mm,
                linear_speed_mm_s: entry.motion.slide_speed_mm_s,
                angular_speed_deg_s: entry.motion.angular_speed_deg_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSet { motion: index.motion, classes: 10, items })
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// (trial id, true class, predicted class), in trial order.
    pub predictions: Vec<(usize, usize, usize)>,
}

/// Full-length accuracy and confusion of a model over a set. Trials are
/// evaluated in parallel with a deterministic ordered reduction.
pub fn evaluate(plan: &Plan, params: &Parameters, set: &EvalSet) -> Result<EvalResult> {
    if set.items.is_empty() {
        return Err(MetricsError::InvalidArgument("empty evaluation set".into()));
    }
    let predictions: Vec<(usize, usize, usize)> = set
        .items
        .par_iter()
        .map(|item| -> Result<(usize, usize, usize)> {
            let out = forward(plan, params, &item.channels)?;
            Ok((item.trial_id, item.class, argmax_class(&out.scores)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = ConfusionMatrix::new(set.classes);
    for &(_, truth, pred) in &predictions {
        confusion.record(truth, pred);
    }
    Ok(EvalResult { accuracy: confusion.accuracy(), confusion, predictions })
}
