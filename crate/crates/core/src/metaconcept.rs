//! Metaconcept operators: one small feed-forward classifier per relation,
//! reading the entailment statistics of a concept pair.

use crate::embedding::{stats_backward, stats_raw, EntailmentStats};
use crate::model::{Gradients, ModelError, ModelState};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const STATS_ARITY: usize = 3;
pub const DEFAULT_HIDDEN_WIDTH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metaconcept {
    Synonym,
    SameKind,
    Hypernym,
    Meronym,
}

impl Metaconcept {
    pub const ALL: [Metaconcept; 4] =
        [Metaconcept::Synonym, Metaconcept::SameKind, Metaconcept::Hypernym, Metaconcept::Meronym];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metaconcept::Synonym => "synonym",
            Metaconcept::SameKind => "same_kind",
            Metaconcept::Hypernym => "hypernym",
            Metaconcept::Meronym => "meronym",
        }
    }

    /// Relations whose truth does not depend on argument order.
    pub fn is_symmetric(&self) -> bool {
        matches!(self, Metaconcept::Synonym | Metaconcept::SameKind)
    }
}

impl fmt::Display for Metaconcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metaconcept {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metaconcept::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModelError::UnknownMetaconcept(s.to_string()))
    }
}

/// Fully connected layer; `weight` is `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: vec![vec![0.0; fan_in]; fan_out], bias: vec![0.0; fan_out] }
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = (0..fan_out)
            .map(|_| (0..fan_in).map(|_| rng.gen_range(-limit..limit)).collect())
            .collect();
        Self { weight, bias: vec![0.0; fan_out] }
    }

    fn fan_in(&self) -> usize {
        self.weight.first().map_or(0, Vec::len)
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// `f_m`: 3 statistics -> tanh hidden layers -> 1 logit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaconceptOperator {
    pub layers: Vec<Dense>,
}

impl MetaconceptOperator {
    pub fn new<R: Rng + ?Sized>(hidden_width: usize, rng: &mut R) -> Self {
        Self { layers: vec![Dense::xavier(STATS_ARITY, hidden_width, rng), Dense::xavier(hidden_width, 1, rng)] }
    }

    pub fn zeros(hidden_width: usize) -> Self {
        Self { layers: vec![Dense::zeros(STATS_ARITY, hidden_width), Dense::zeros(hidden_width, 1)] }
    }

    pub fn hidden_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.bias.len())
    }

    pub fn is_well_formed(&self) -> bool {
        let Some(first) = self.layers.first() else { return false };
        if first.fan_in() != STATS_ARITY || self.layers.last().map(|l| l.bias.len()) != Some(1) {
            return false;
        }
        self.layers.windows(2).all(|w| w[1].fan_in() == w[0].bias.len())
            && self.layers.iter().all(|l| l.weight.len() == l.bias.len())
    }

    pub fn logit(&self, stats: &EntailmentStats) -> f64 {
        self.forward_trace(stats).last().map_or(0.0, |v| v[0])
    }

    /// Pre-activation outputs of every layer; hidden layers are followed by tanh.
    fn forward_trace(&self, stats: &EntailmentStats) -> Vec<Vec<f64>> {
        let mut x = stats.as_array().to_vec();
        let mut trace = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&x);
            if i + 1 < self.layers.len() {
                x = z.iter().map(|v| v.tanh()).collect();
            }
            trace.push(z);
        }
        trace
    }

    /// Accumulates `d_logit * d(logit)/d(params)` into `grad` and returns
    /// `d_logit * d(logit)/d(stats)`.
    pub fn backward(&self, stats: &EntailmentStats, d_logit: f64, grad: &mut MetaconceptOperator) -> [f64; 3] {
        let trace = self.forward_trace(stats);
        let n = self.layers.len();
        let mut upstream = vec![d_logit];
        for li in (0..n).rev() {
            let input: Vec<f64> = if li == 0 {
                stats.as_array().to_vec()
            } else {
                trace[li - 1].iter().map(|v| v.tanh()).collect()
            };
            let layer = &self.layers[li];
            let g = &mut grad.layers[li];
            for (o, &u) in upstream.iter().enumerate() {
                g.bias[o] += u;
                for (gw, x) in g.weight[o].iter_mut().zip(&input) {
                    *gw += u * x;
                }
            }
            let mut down = vec![0.0; input.len()];
            for (o, &u) in upstream.iter().enumerate() {
                for (d, w) in down.iter_mut().zip(&layer.weight[o]) {
                    *d += u * w;
                }
            }
            if li > 0 {
                // through tanh of the previous layer
                for (d, z) in down.iter_mut().zip(&trace[li - 1]) {
                    let t = z.tanh();
                    *d *= 1.0 - t * t;
                }
            }
            upstream = down;
        }
        [upstream[0], upstream[1], upstream[2]]
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability that `a` and `b` stand in relation `m`.
pub fn meta_verify(a: &str, b: &str, m: Metaconcept, model: &ModelState) -> Result<f64, ModelError> {
    let ia = model.concept_index(a)?;
    let ib = model.concept_index(b)?;
    let op = model.operator(m)?;
    let stats = stats_raw(model.concept_coords(ia), model.concept_coords(ib));
    Ok(sigmoid(op.logit(&stats)))
}

/// Forward value plus accumulation of `d_score * d(score)/d(params)` into
/// `grads` (operator weights and both concept embeddings).
pub fn meta_verify_backward(
    a: &str,
    b: &str,
    m: Metaconcept,
    model: &ModelState,
    d_score: f64,
    grads: &mut Gradients,
) -> Result<f64, ModelError> {
    let ia = model.concept_index(a)?;
    let ib = model.concept_index(b)?;
    meta_verify_backward_indexed(ia, ib, m, model, |p| d_score * p * (1.0 - p), grads)
}

/// Index-based backward used by the executor. `d_logit_of` maps the forward
/// score to the adjoint at the logit, so BCE can use `p - y` directly and
/// stay finite when the sigmoid saturates.
pub(crate) fn meta_verify_backward_indexed(
    ia: usize,
    ib: usize,
    m: Metaconcept,
    model: &ModelState,
    d_logit_of: impl FnOnce(f64) -> f64,
    grads: &mut Gradients,
) -> Result<f64, ModelError> {
    let op = model.operator(m)?;
    let (ca, cb) = (model.concept_coords(ia), model.concept_coords(ib));
    let stats = stats_raw(ca, cb);
    let score = sigmoid(op.logit(&stats));
    let d_logit = d_logit_of(score);
    let op_grad = grads.operator_mut(m);
    let d_stats = op.backward(&stats, d_logit, op_grad);
    if ia == ib {
        let mut ga = vec![0.0; ca.len()];
        let mut gb = vec![0.0; cb.len()];
        stats_backward(ca, cb, d_stats, &mut ga, &mut gb);
        for ((g, x), y) in grads.concepts[ia].iter_mut().zip(&ga).zip(&gb) {
            *g += x + y;
        }
    } else {
        let (ga, gb) = grads.concept_pair_mut(ia, ib);
        stats_backward(ca, cb, d_stats, ga, gb);
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model() -> ModelState {
        let names = ["red", "green", "cube", "sphere"].map(String::from);
        ModelState::new(&names, &ModelConfig { dim: 6, input_dim: 4, hidden_width: 5, seed: 3 })
    }

    /// Straight-line forward pass written independently of `forward_trace`.
    fn hand_forward(op: &MetaconceptOperator, s: [f64; 3]) -> f64 {
        let l1 = &op.layers[0];
        let l2 = &op.layers[1];
        let mut out = l2.bias[0];
        for j in 0..l1.bias.len() {
            let z = l1.bias[j] + l1.weight[j][0] * s[0] + l1.weight[j][1] * s[1] + l1.weight[j][2] * s[2];
            out += l2.weight[0][j] * z.tanh();
        }
        out
    }

    #[test]
    fn zero_operator_is_undecided() {
        let mut model = toy_model();
        for m in Metaconcept::ALL {
            *model.operator_mut(m) = MetaconceptOperator::zeros(5);
        }
        for a in ["red", "cube"] {
            for b in ["green", "sphere"] {
                assert_eq!(meta_verify(a, b, Metaconcept::SameKind, &model).unwrap(), 0.5);
            }
        }
    }

    #[test]
    fn forward_matches_hand_rolled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let op = MetaconceptOperator::new(32, &mut rng);
        assert!(op.is_well_formed());
        for s in [[0.3, -1.2, 0.8], [5.0, 5.0, 2.0], [-16.0, 3.0, -4.0]] {
            let stats = EntailmentStats { g1_ab: s[0], g1_ba: s[1], g2: s[2] };
            assert!((op.logit(&stats) - hand_forward(&op, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_names_error() {
        let model = toy_model();
        assert!(matches!(
            meta_verify("red", "blue", Metaconcept::Synonym, &model),
            Err(ModelError::UnknownConcept(_))
        ));
        assert!("antonym".parse::<Metaconcept>().is_err());
        assert_eq!("same_kind".parse::<Metaconcept>().unwrap(), Metaconcept::SameKind);
    }

    #[test]
    fn output_is_deterministic_and_in_range() {
        let model = toy_model();
        let x = meta_verify("red", "cube", Metaconcept::Hypernym, &model).unwrap();
        let y = meta_verify("red", "cube", Metaconcept::Hypernym, &model).unwrap();
        assert_eq!(x.to_bits(), y.to_bits());
        assert!(x > 0.0 && x < 1.0);
    }

    #[test]
    fn final_layer_gradient_is_residual_times_hidden() {
        let model = toy_model();
        let target = 1.0;
        let mut grads = Gradients::zeros_like(&model);
        // BCE through a sigmoid: dL/dlogit = score - y
        let score =
            meta_verify_backward_indexed(0, 2, Metaconcept::SameKind, &model, |p| p - target, &mut grads).unwrap();
        let op = model.operator(Metaconcept::SameKind).unwrap();
        let stats = stats_raw(model.concept_coords(0), model.concept_coords(2));
        let hidden: Vec<f64> = op.layers[0].forward(&stats.as_array()).iter().map(|z| z.tanh()).collect();
        let g = &grads.operator(Metaconcept::SameKind).layers[1];
        for (gw, h) in g.weight[0].iter().zip(&hidden) {
            assert!((gw - (score - target) * h).abs() < 1e-12);
        }
        assert!((g.bias[0] - (score - target)).abs() < 1e-12);
    }

    #[test]
    fn gradients_are_local_to_mentioned_concepts() {
        let model = toy_model();
        let mut grads = Gradients::zeros_like(&model);
        meta_verify_backward("red", "cube", Metaconcept::Synonym, &model, 1.0, &mut grads).unwrap();
        let touched = |name: &str| grads.concepts[model.concept_index(name).unwrap()].iter().any(|&g| g != 0.0);
        assert!(touched("red") && touched("cube"));
        assert!(!touched("green") && !touched("sphere"));
        for m in [Metaconcept::SameKind, Metaconcept::Hypernym, Metaconcept::Meronym] {
            assert!(grads.operator(m).layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = toy_model();
        let mut grads = Gradients::zeros_like(&model);
        meta_verify_backward("green", "sphere", Metaconcept::Meronym, &model, 1.0, &mut grads).unwrap();
        let flat = grads.flatten();
        let params = model.flatten();
        let step = 1e-5;
        for (i, &an) in flat.iter().enumerate() {
            let mut p = params.clone();
            p[i] += step;
            let mut m = params.clone();
            m[i] -= step;
            let f = |v: &[f64]| {
                let mut mm = model.clone();
                mm.unflatten(v);
                meta_verify("green", "sphere", Metaconcept::Meronym, &mm).unwrap()
            };
            let fd = (f(&p) - f(&m)) / (2.0 * step);
            assert!((an - fd).abs() / an.abs().max(1e-4) <= 1e-4, "param {i}: {an} vs {fd}");
        }
    }
}
