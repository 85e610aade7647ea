//! Dataset preparation and the optimization loop.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use scengen_core::code::{DistanceBinning, StructuredScenario};
use scengen_core::encoder::encode_scenario;
use scengen_core::scenario::Scenario;

use crate::checkpoint;
use crate::error::ModelError;
use crate::features::LaneFeatureInput;
use crate::generator::{Generator, GeneratorConfig};
use crate::graph::Graph;
use crate::loss::{compute_loss, extract_targets, LossValues, LossWeights, TrainingTargets};
use crate::optim::{AdamW, AdamWConfig};
use crate::params::Gradients;
use crate::tensor::Element;

/// One scene ready for training: ego-frame scenario, its code, lane rows and targets.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub scenario: Scenario,
    pub code: StructuredScenario,
    pub lanes: LaneFeatureInput,
    pub targets: TrainingTargets,
}

/// Move a scene to its ego frame, encode it, and extract its targets.
pub fn prepare_sample(scenario: &Scenario, config: &GeneratorConfig) -> Result<TrainingSample, ModelError> {
    let canonical = scenario.canonical()?;
    if canonical.horizon() != config.horizon {
        return Err(ModelError::Config(format!(
            "scenario has {} frames, model expects {}",
            canonical.horizon(),
            config.horizon
        )));
    }
    if canonical.map.lanes.len() > config.max_lanes || canonical.agents.len() > config.max_agents {
        return Err(ModelError::Config(format!(
            "scene with {} lanes and {} agents exceeds the model limits",
            canonical.map.lanes.len(),
            canonical.agents.len()
        )));
    }
    let code = encode_scenario(&canonical, &DistanceBinning::GENERATION)?;
    let targets = extract_targets(&canonical)?;
    let lanes = LaneFeatureInput::from_map(&canonical.map, config.coord_scale);
    Ok(TrainingSample { scenario: canonical, code, lanes, targets })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub loss_weights: LossWeights,
    /// Stop after this many optimizer steps even if epochs remain.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            weight_decay: 0.01,
            clip_norm: 1.0,
            loss_weights: LossWeights::default(),
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be non-negative".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.clip_norm > 0.0) || self.weight_decay < 0.0 {
            return Err(ModelError::Config("clip_norm must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_position: f64,
    pub loss_attr: f64,
    pub loss_motion: f64,
    pub lr: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Mean batch loss of every optimizer step, in order.
    pub step_losses: Vec<LossValues>,
    pub best_epoch: usize,
    pub checkpoints: Option<(PathBuf, PathBuf)>,
}

impl TrainReport {
    pub fn steps(&self) -> usize {
        self.step_losses.len()
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, step {step}, batch {batch} (sample {sample}): {losses:?}")]
    Divergence { epoch: usize, step: usize, batch: usize, sample: usize, losses: LossValues },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Seed for the dropout stream of one sample within one step.
fn sample_seed(seed: u64, step: usize, slot: usize) -> u64 {
    let mut z = seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (slot as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loss of one sample in inference mode (no dropout).
pub fn evaluate_sample<T: Element>(model: &Generator<T>, sample: &TrainingSample, weights: &LossWeights) -> Result<LossValues, ModelError> {
    let mut g = Graph::new(model.params());
    let f = model.forward(&mut g, &sample.lanes, &sample.code)?;
    let l = compute_loss(&mut g, &f, &sample.targets, weights);
    Ok(LossValues::read(&g, &l))
}

/// Train in place. With `out_dir`, writes `metrics.jsonl`, `best.safetensors` and `last.safetensors`.
pub fn train<T: Element>(
    model: &mut Generator<T>,
    samples: &[TrainingSample],
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut log = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(BufWriter::new(File::create(dir.join("metrics.jsonl"))?))
        }
        None => None,
    };
    let adam = AdamWConfig { learning_rate: config.learning_rate, weight_decay: config.weight_decay, ..Default::default() };
    let mut opt = AdamW::new(adam, model.params());
    let dropout = T::of(model.config().dropout);
    let clip = T::of(config.clip_norm);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let started = Instant::now();
    let mut epochs = Vec::new();
    let mut step_losses = Vec::new();
    let mut best: Option<(usize, f64)> = None;

    'epochs: for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_sum = LossValues::default();
        let mut epoch_batches = 0usize;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            if config.max_steps.is_some_and(|m| step_losses.len() >= m) {
                break 'epochs;
            }
            let step = step_losses.len();
            let mut grads = Gradients::zeros_like(model.params());
            let mut batch_loss = LossValues::default();
            for (slot, &idx) in chunk.iter().enumerate() {
                let sample = &samples[idx];
                let rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, step, slot));
                let mut g = Graph::training(model.params(), dropout, rng);
                let f = model.forward(&mut g, &sample.lanes, &sample.code)?;
                let l = compute_loss(&mut g, &f, &sample.targets, &config.loss_weights);
                let values = LossValues::read(&g, &l);
                if !values.is_finite() {
                    return Err(TrainError::Divergence { epoch, step: step + 1, batch, sample: idx, losses: values });
                }
                batch_loss.add(&values);
                grads.accumulate(&g.backward(l.total));
            }
            let inv = 1.0 / chunk.len() as f64;
            grads.scale(T::of(inv));
            grads.clip_global_norm(clip);
            opt.step(model.params_mut(), &grads);
            let mean = batch_loss.scaled(inv);
            epoch_sum.add(&mean);
            epoch_batches += 1;
            step_losses.push(mean);
        }
        if epoch_batches == 0 {
            break;
        }
        let m = epoch_sum.scaled(1.0 / epoch_batches as f64);
        let record = EpochRecord {
            epoch,
            loss_total: m.total,
            loss_position: m.position,
            loss_attr: m.attr,
            loss_motion: m.motion,
            lr: config.learning_rate,
            wall_time: started.elapsed().as_secs_f64(),
        };
        log::info!("epoch {epoch}: total {:.4} (pos {:.4}, attr {:.4}, motion {:.4})", m.total, m.position, m.attr, m.motion);
        if let Some(w) = log.as_mut() {
            serde_json::to_writer(&mut *w, &record).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        if best.is_none_or(|(_, b)| m.total < b) {
            best = Some((epoch, m.total));
            if let Some(dir) = out_dir {
                checkpoint::save(model, &dir.join("best.safetensors"))?;
            }
        }
        epochs.push(record);
    }

    let checkpoints = match out_dir {
        Some(dir) => {
            let last = dir.join("last.safetensors");
            checkpoint::save(model, &last)?;
            Some((dir.join("best.safetensors"), last))
        }
        None => None,
    };
    Ok(TrainReport { epochs, step_losses, best_epoch: best.map_or(0, |b| b.0), checkpoints })
}
