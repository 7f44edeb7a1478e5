//! Learnable parameters: concept embeddings, the object encoder and one
//! operator per metaconcept, plus the JSON checkpoint format.

use crate::embedding::{EmbeddingError, EmbeddingVector, ObjectEncoder};
use crate::metaconcept::{Dense, Metaconcept, MetaconceptOperator, DEFAULT_HIDDEN_WIDTH};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unknown metaconcept `{0}`")]
    UnknownMetaconcept(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub input_dim: usize,
    pub hidden_width: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { dim: 64, input_dim: 128, hidden_width: DEFAULT_HIDDEN_WIDTH, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    names: Vec<String>,
    index: HashMap<String, usize>,
    pub concepts: Vec<Vec<f64>>,
    pub encoder: ObjectEncoder,
    /// Indexed in `Metaconcept::ALL` order.
    pub operators: Vec<MetaconceptOperator>,
}

fn op_slot(m: Metaconcept) -> usize {
    Metaconcept::ALL.iter().position(|&x| x == m).expect("ALL lists every metaconcept")
}

impl ModelState {
    /// Fresh parameters for the given concept vocabulary (sorted, deduplicated).
    pub fn new(concept_names: &[String], config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut names = concept_names.to_vec();
        names.sort();
        names.dedup();
        let concepts = names.iter().map(|_| EmbeddingVector::random_concept(config.dim, &mut rng).coords).collect();
        let encoder = ObjectEncoder::random(config.input_dim, config.dim, &mut rng);
        let operators =
            Metaconcept::ALL.iter().map(|_| MetaconceptOperator::new(config.hidden_width, &mut rng)).collect();
        Self::assemble(names, concepts, encoder, operators)
    }

    fn assemble(
        names: Vec<String>,
        concepts: Vec<Vec<f64>>,
        encoder: ObjectEncoder,
        operators: Vec<MetaconceptOperator>,
    ) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self { names, index, concepts, encoder, operators }
    }

    pub fn dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn concept_names(&self) -> &[String] {
        &self.names
    }

    pub fn concept_index(&self, name: &str) -> Result<usize, ModelError> {
        self.index.get(name).copied().ok_or_else(|| ModelError::UnknownConcept(name.to_string()))
    }

    pub fn concept_coords(&self, i: usize) -> &[f64] {
        &self.concepts[i]
    }

    pub fn concept(&self, name: &str) -> Result<EmbeddingVector, ModelError> {
        Ok(EmbeddingVector::concept(self.concepts[self.concept_index(name)?].clone())?)
    }

    pub fn operator(&self, m: Metaconcept) -> Result<&MetaconceptOperator, ModelError> {
        Ok(&self.operators[op_slot(m)])
    }

    pub fn operator_mut(&mut self, m: Metaconcept) -> &mut MetaconceptOperator {
        &mut self.operators[op_slot(m)]
    }

    /// All parameters in a fixed order: concepts, encoder weight rows,
    /// encoder bias, then each operator's layers (weight rows, bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        visit(&self.concepts, &self.encoder, &self.operators, |x| out.push(*x));
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        visit_mut(&mut self.concepts, &mut self.encoder, &mut self.operators, |x| {
            *x = *it.next().expect("flat parameter vector too short")
        });
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        visit(&self.concepts, &self.encoder, &self.operators, |_| n += 1);
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        visit(&self.concepts, &self.encoder, &self.operators, |x| ok &= x.is_finite());
        ok
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            dim: self.dim(),
            concepts: self.names.iter().cloned().zip(self.concepts.iter().cloned()).collect(),
            encoder: EncoderRecord { weight: self.encoder.weight.clone(), bias: self.encoder.bias.clone() },
            metaconcepts: Metaconcept::ALL
                .iter()
                .map(|m| (m.as_str().to_string(), self.operators[op_slot(*m)].clone()))
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::Checkpoint(msg));
        let d_in = ck.encoder.weight.len();
        if ck.encoder.bias.len() != ck.dim {
            return bad(format!("encoder bias has length {}, expected {}", ck.encoder.bias.len(), ck.dim));
        }
        if let Some(row) = ck.encoder.weight.iter().find(|r| r.len() != ck.dim) {
            return bad(format!("encoder row has length {}, expected {}", row.len(), ck.dim));
        }
        let encoder = ObjectEncoder { weight: ck.encoder.weight, bias: ck.encoder.bias };
        debug_assert_eq!(encoder.input_dim(), d_in);
        let mut names = Vec::with_capacity(ck.concepts.len());
        let mut concepts = Vec::with_capacity(ck.concepts.len());
        for (name, coords) in ck.concepts {
            if coords.len() != ck.dim {
                return bad(format!("concept `{name}` has {} coordinates, expected {}", coords.len(), ck.dim));
            }
            names.push(name);
            concepts.push(coords);
        }
        let mut slots: Vec<Option<MetaconceptOperator>> = vec![None; Metaconcept::ALL.len()];
        for (name, op) in ck.metaconcepts {
            let m: Metaconcept = name.parse()?;
            if !op.is_well_formed() {
                return bad(format!("operator `{name}` has inconsistent layer shapes"));
            }
            slots[op_slot(m)] = Some(op);
        }
        let mut operators = Vec::with_capacity(slots.len());
        for (m, slot) in Metaconcept::ALL.iter().zip(slots) {
            match slot {
                Some(op) => operators.push(op),
                None => return bad(format!("missing operator `{m}`")),
            }
        }
        let state = Self::assemble(names, concepts, encoder, operators);
        if !state.all_finite() {
            return bad("non-finite parameter".into());
        }
        Ok(state)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_checkpoint(serde_json::from_str(text)?)
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| io_err(path, source))?;
        Self::from_json(&text)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io { path: path.display().to_string(), source }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelError> {
    let file_name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// On-disk checkpoint layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub dim: usize,
    pub concepts: BTreeMap<String, Vec<f64>>,
    pub encoder: EncoderRecord,
    pub metaconcepts: BTreeMap<String, MetaconceptOperator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderRecord {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn visit_layers<'a>(ops: &'a [MetaconceptOperator], f: &mut impl FnMut(&'a f64)) {
    for l in ops.iter().flat_map(|op| &op.layers) {
        l.weight.iter().flatten().for_each(&mut *f);
        l.bias.iter().for_each(&mut *f);
    }
}

fn visit<'a>(
    concepts: &'a [Vec<f64>],
    encoder: &'a ObjectEncoder,
    ops: &'a [MetaconceptOperator],
    mut f: impl FnMut(&'a f64),
) {
    concepts.iter().flatten().for_each(&mut f);
    encoder.weight.iter().flatten().for_each(&mut f);
    encoder.bias.iter().for_each(&mut f);
    visit_layers(ops, &mut f);
}

fn visit_mut(
    concepts: &mut [Vec<f64>],
    encoder: &mut ObjectEncoder,
    ops: &mut [MetaconceptOperator],
    mut f: impl FnMut(&mut f64),
) {
    concepts.iter_mut().flatten().for_each(&mut f);
    encoder.weight.iter_mut().flatten().for_each(&mut f);
    encoder.bias.iter_mut().for_each(&mut f);
    for l in ops.iter_mut().flat_map(|op| &mut op.layers) {
        l.weight.iter_mut().flatten().for_each(&mut f);
        l.bias.iter_mut().for_each(&mut f);
    }
}

/// Gradient buffers shaped like a `ModelState`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub concepts: Vec<Vec<f64>>,
    pub encoder: ObjectEncoder,
    pub operators: Vec<MetaconceptOperator>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelState) -> Self {
        Self {
            concepts: model.concepts.iter().map(|c| vec![0.0; c.len()]).collect(),
            encoder: ObjectEncoder::zeros(model.input_dim(), model.dim()),
            operators: model
                .operators
                .iter()
                .map(|op| MetaconceptOperator {
                    layers: op.layers.iter().map(|l| Dense::zeros(l.weight[0].len(), l.bias.len())).collect(),
                })
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        visit_mut(&mut self.concepts, &mut self.encoder, &mut self.operators, |x| *x = 0.0);
    }

    pub fn operator(&self, m: Metaconcept) -> &MetaconceptOperator {
        &self.operators[op_slot(m)]
    }

    pub fn operator_mut(&mut self, m: Metaconcept) -> &mut MetaconceptOperator {
        &mut self.operators[op_slot(m)]
    }

    /// Disjoint mutable views of two different concept rows.
    pub fn concept_pair_mut(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        assert_ne!(i, j);
        if i < j {
            let (lo, hi) = self.concepts.split_at_mut(j);
            (&mut lo[i], &mut hi[0])
        } else {
            let (lo, hi) = self.concepts.split_at_mut(i);
            (&mut hi[0], &mut lo[j])
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        visit(&self.concepts, &self.encoder, &self.operators, |x| out.push(*x));
        out
    }

    pub fn scale(&mut self, s: f64) {
        visit_mut(&mut self.concepts, &mut self.encoder, &mut self.operators, |x| *x *= s);
    }

    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        visit(&self.concepts, &self.encoder, &self.operators, |x| sq += x * x);
        sq.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelState {
        let names: Vec<String> = ["sphere", "red", "ball", "cube"].iter().map(|s| s.to_string()).collect();
        ModelState::new(&names, &ModelConfig { dim: 5, input_dim: 3, hidden_width: 4, seed: 9 })
    }

    #[test]
    fn names_are_sorted_and_indexed() {
        let m = model();
        assert_eq!(m.concept_names(), ["ball", "cube", "red", "sphere"]);
        assert_eq!(m.concept_index("red").unwrap(), 2);
        assert!(matches!(m.concept_index("blue"), Err(ModelError::UnknownConcept(_))));
    }

    #[test]
    fn seed_determines_parameters() {
        assert_eq!(model().flatten(), model().flatten());
        let names = vec!["a".to_string()];
        let a = ModelState::new(&names, &ModelConfig { seed: 1, ..ModelConfig::default() });
        let b = ModelState::new(&names, &ModelConfig { seed: 2, ..ModelConfig::default() });
        assert_ne!(a.flatten(), b.flatten());
    }

    #[test]
    fn flatten_roundtrip() {
        let m = model();
        let mut z = m.clone();
        z.unflatten(&vec![0.0; m.num_params()]);
        assert_ne!(z, m);
        z.unflatten(&m.flatten());
        assert_eq!(z, m);
        assert_eq!(Gradients::zeros_like(&m).flatten().len(), m.num_params());
    }

    #[test]
    fn checkpoint_roundtrip_is_byte_exact() {
        let m = model();
        let text = m.to_json();
        let back = ModelState::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["dim"], 5);
        assert!(v["metaconcepts"]["same_kind"]["layers"].is_array());
        assert_eq!(v["encoder"]["weight"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn checkpoint_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = model();
        m.save(&path).unwrap();
        assert_eq!(ModelState::load(&path).unwrap(), m);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn malformed_checkpoints_are_rejected() {
        let m = model();
        let mut ck = m.to_checkpoint();
        ck.concepts.insert("short".into(), vec![0.0; 2]);
        assert!(matches!(ModelState::from_checkpoint(ck), Err(ModelError::Checkpoint(_))));
        let mut ck = m.to_checkpoint();
        ck.metaconcepts.remove("meronym");
        assert!(ModelState::from_checkpoint(ck).is_err());
        let mut ck = m.to_checkpoint();
        let op = ck.metaconcepts.remove("meronym").unwrap();
        ck.metaconcepts.insert("antonym".into(), op);
        assert!(matches!(ModelState::from_checkpoint(ck), Err(ModelError::UnknownMetaconcept(_))));
        assert!(ModelState::from_json("{").is_err());
    }

    #[test]
    fn concept_pair_views_are_disjoint() {
        let m = model();
        let mut g = Gradients::zeros_like(&m);
        {
            let (a, b) = g.concept_pair_mut(3, 1);
            a[0] = 1.0;
            b[0] = 2.0;
        }
        assert_eq!(g.concepts[3][0], 1.0);
        assert_eq!(g.concepts[1][0], 2.0);
        assert!((g.global_norm() - 5f64.sqrt()).abs() < 1e-15);
    }
}
