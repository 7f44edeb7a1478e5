//! Adam, the mixed-batch BCE training loop and evaluation.

mod eval;
mod experiment;

pub use eval::{evaluate, read_predictions, write_predictions, Aggregate, EvalReport, Prediction};
pub use experiment::{run_experiment, ExperimentPlan, ExperimentReport, MetricRow, RunResult, METRICS_HEADER};

use crate::model::{Gradients, ModelConfig, ModelError, ModelState};
use crate::program::{execute_backward, parse_program, ExecError, Program};
use crate::world::{Dataset, QuestionKind, WorldError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] WorldError),
    #[error("question {item}: {source}")]
    Item { item: usize, source: ExecError },
    #[error("non-finite loss in batch {batch} (epoch {epoch})")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io { path: path.display().to_string(), source }
    }
}

/// Flat JSON training configuration; missing fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Fraction of each epoch drawn from metaconcept questions. `None`
    /// uses every metaconcept question once per epoch.
    pub metaconcept_mix: Option<f64>,
    /// Leading epochs that skip metaconcept questions.
    pub visual_warmup: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    pub dim: usize,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 10,
            metaconcept_mix: None,
            visual_warmup: 0,
            grad_clip: Some(10.0),
            seed: 0,
            dim: 64,
            hidden_width: crate::metaconcept::DEFAULT_HIDDEN_WIDTH,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.metaconcept_mix.is_some_and(|m| !(0.0..=1.0).contains(&m)) {
            return bad("metaconcept_mix must lie in [0, 1]");
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        if self.dim == 0 || self.hidden_width == 0 {
            return bad("dim and hidden_width must be positive");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let c: Self = serde_json::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Adam with bias-corrected moments over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self { learning_rate, beta1, beta2, epsilon, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

/// A parsed question ready for the executor.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub index: usize,
    pub program: Program,
    pub answer: bool,
    pub scene: Option<usize>,
    pub metaconcept: bool,
}

/// Parses the questions of one partition and resolves their scenes.
pub fn prepare_items(dataset: &Dataset, partition: &str) -> Result<Vec<TrainItem>, TrainError> {
    let scenes = dataset.scene_index();
    dataset
        .partition(partition)?
        .iter()
        .map(|&i| {
            let q = &dataset.questions[i];
            let program = parse_program(&q.program)
                .map_err(|e| TrainError::Data(WorldError::Format(format!("question {i}: {e}"))))?;
            let scene = match &q.scene_id {
                Some(id) => Some(*scenes.get(id.as_str()).ok_or_else(|| {
                    TrainError::Data(WorldError::Format(format!("question {i}: unknown scene `{id}`")))
                })?),
                None => None,
            };
            Ok(TrainItem { index: i, program, answer: q.answer, scene, metaconcept: q.kind == QuestionKind::Metaconcept })
        })
        .collect()
}

/// Fresh model for a dataset's vocabulary and feature width.
pub fn init_model(dataset: &Dataset, config: &TrainConfig) -> ModelState {
    let input_dim = dataset
        .scenes
        .iter()
        .flat_map(|s| s.objects.first())
        .map(|o| o.features.len())
        .next()
        .unwrap_or(ModelConfig::default().input_dim);
    let mc = ModelConfig { dim: config.dim, input_dim, hidden_width: config.hidden_width, seed: config.seed };
    ModelState::new(&dataset.ontology.concept_names(), &mc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRun {
    pub model: ModelState,
    /// Mean loss of every batch, in order.
    pub batch_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Epoch schedule: shuffled visual items interleaved with metaconcept items
/// drawn cyclically from a shuffled pool.
fn epoch_order(items: &[TrainItem], mix: Option<f64>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (meta, visual): (Vec<usize>, Vec<usize>) = (0..items.len()).partition(|&i| items[i].metaconcept);
    let n_meta = match mix {
        _ if meta.is_empty() => 0,
        None => meta.len(),
        Some(f) if f >= 1.0 || visual.is_empty() => meta.len(),
        Some(f) => (f / (1.0 - f) * visual.len() as f64).round() as usize,
    };
    let visual = if mix.is_some_and(|f| f >= 1.0) { Vec::new() } else { visual };
    let mut pool = meta;
    pool.shuffle(rng);
    let mut order = visual;
    order.extend(pool.iter().cycle().take(n_meta));
    order.shuffle(rng);
    order
}

pub fn train(dataset: &Dataset, partition: &str, config: &TrainConfig) -> Result<TrainRun, TrainError> {
    config.validate()?;
    let items = prepare_items(dataset, partition)?;
    let features: Vec<Vec<Vec<f64>>> = dataset.scenes.iter().map(|s| s.features()).collect();
    train_items(init_model(dataset, config), &items, &features, config)
}

/// Trains `model` in place of a fresh initialization.
pub fn train_items(
    mut model: ModelState,
    items: &[TrainItem],
    features: &[Vec<Vec<f64>>],
    config: &TrainConfig,
) -> Result<TrainRun, TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7a11);
    let mut params = model.flatten();
    let mut adam = Adam::new(params.len(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut grads = Gradients::zeros_like(&model);
    let mut batch_losses = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut batch_id = 0;
    for epoch in 0..config.epochs {
        let mix = if epoch < config.visual_warmup { Some(0.0) } else { config.metaconcept_mix };
        let order = epoch_order(items, mix, &mut rng);
        let mut epoch_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            grads.reset();
            let mut sum = 0.0;
            for &j in chunk {
                let it = &items[j];
                let f = it.scene.map(|s| features[s].as_slice());
                match execute_backward(&it.program, f, &model, it.answer, &mut grads) {
                    Ok((_, loss)) => sum += loss,
                    Err(ExecError::NonFinite(_)) => return Err(TrainError::NonFinite { epoch, batch: batch_id }),
                    Err(e) => return Err(TrainError::Item { item: it.index, source: e }),
                }
            }
            let n = chunk.len() as f64;
            grads.scale(1.0 / n);
            if let Some(clip) = config.grad_clip {
                let norm = grads.global_norm();
                if !norm.is_finite() {
                    return Err(TrainError::NonFinite { epoch, batch: batch_id });
                }
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            adam.step(&mut params, &grads.flatten());
            if params.iter().any(|x| !x.is_finite()) {
                return Err(TrainError::NonFinite { epoch, batch: batch_id });
            }
            model.unflatten(&params);
            batch_losses.push(sum / n);
            epoch_sum += sum;
            batch_id += 1;
        }
        epoch_losses.push(if order.is_empty() { 0.0 } else { epoch_sum / order.len() as f64 });
    }
    Ok(TrainRun { model, batch_losses, epoch_losses })
}
