//! Soft-score execution: masks hold per-object probabilities, Filter
//! multiplies in `Pr(c | o_i)`, Exist takes the hard max.

use super::symbolic::SymbolicFacts;
use super::Program;
use crate::embedding::{conditional_backward, conditional_raw, EmbeddingError};
use crate::metaconcept::{meta_verify_backward_indexed, Metaconcept};
use crate::model::{Gradients, ModelError, ModelState};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("program reads the scene but no scene was given")]
    SceneRequired,
    #[error("{0} over an empty scene")]
    EmptyScene(&'static str),
    #[error("scene has no ground-truth attributes")]
    MissingGroundTruth,
    #[error("program does not produce a boolean")]
    NotBoolean,
    #[error("ill-typed program at {0}")]
    Type(&'static str),
    #[error("non-finite loss {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for ExecError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownConcept(c) => ExecError::UnknownConcept(c),
            ModelError::Embedding(e) => ExecError::Embedding(e),
            other => ExecError::Model(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExecutionResult {
    Score(f64),
    Object(usize),
}

impl ExecutionResult {
    pub fn score(&self) -> Option<f64> {
        match self {
            ExecutionResult::Score(s) => Some(*s),
            ExecutionResult::Object(_) => None,
        }
    }
}

/// Source of atomic scores for the executor.
pub trait ConceptScorer {
    /// `None` when no scene is attached.
    fn num_objects(&self) -> Option<usize>;
    fn filter_scores(&self, concept: &str) -> Result<Vec<f64>, ExecError>;
    fn meta_score(&self, a: &str, b: &str, m: Metaconcept) -> Result<f64, ExecError>;
}

/// Scores from a learned model; objects are encoded once on construction.
pub struct ModelScorer<'a> {
    model: &'a ModelState,
    objects: Option<Vec<Vec<f64>>>,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &'a ModelState, features: Option<&[Vec<f64>]>) -> Result<Self, ExecError> {
        let objects = features.map(|fs| encode_all(model, fs)).transpose()?;
        Ok(Self { model, objects })
    }
}

fn encode_all(model: &ModelState, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ExecError> {
    features
        .iter()
        .map(|f| {
            if f.len() != model.input_dim() {
                return Err(ExecError::Embedding(EmbeddingError::DimensionMismatch {
                    expected: model.input_dim(),
                    found: f.len(),
                }));
            }
            let mut out = vec![0.0; model.dim()];
            model.encoder.encode_into(f, &mut out);
            Ok(out)
        })
        .collect()
}

impl ConceptScorer for ModelScorer<'_> {
    fn num_objects(&self) -> Option<usize> {
        self.objects.as_ref().map(Vec::len)
    }

    fn filter_scores(&self, concept: &str) -> Result<Vec<f64>, ExecError> {
        let c = self.model.concept_coords(self.model.concept_index(concept)?);
        let objs = self.objects.as_ref().ok_or(ExecError::SceneRequired)?;
        Ok(objs.iter().map(|o| conditional_raw(c, o)).collect())
    }

    fn meta_score(&self, a: &str, b: &str, m: Metaconcept) -> Result<f64, ExecError> {
        Ok(crate::metaconcept::meta_verify(a, b, m, self.model)?)
    }
}

/// Ground-truth facts seen through the executor: every atomic score is 0 or 1.
pub struct ExactScorer<'a, F: SymbolicFacts>(pub &'a F);

impl<F: SymbolicFacts> ConceptScorer for ExactScorer<'_, F> {
    fn num_objects(&self) -> Option<usize> {
        self.0.num_objects()
    }

    fn filter_scores(&self, concept: &str) -> Result<Vec<f64>, ExecError> {
        let n = self.0.num_objects().ok_or(ExecError::SceneRequired)?;
        (0..n).map(|i| Ok(if self.0.has_concept(i, concept)? { 1.0 } else { 0.0 })).collect()
    }

    fn meta_score(&self, a: &str, b: &str, m: Metaconcept) -> Result<f64, ExecError> {
        Ok(if self.0.relation(a, b, m)? { 1.0 } else { 0.0 })
    }
}

/// First index of the largest entry.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn mask(program: &Program, scorer: &impl ConceptScorer) -> Result<Vec<f64>, ExecError> {
    match program {
        Program::Scene => Ok(vec![1.0; scorer.num_objects().ok_or(ExecError::SceneRequired)?]),
        Program::Filter(child, c) => {
            let mut m = mask(child, scorer)?;
            for (x, s) in m.iter_mut().zip(scorer.filter_scores(c)?) {
                *x *= s;
            }
            Ok(m)
        }
        _ => Err(ExecError::Type(program.name())),
    }
}

/// Per-object scores of the set an `Exist` or `Locate` node ranges over.
pub fn object_scores(program: &Program, scorer: &impl ConceptScorer) -> Result<Vec<f64>, ExecError> {
    match program {
        Program::Exist(child) | Program::Locate(child) => mask(child, scorer),
        other => mask(other, scorer),
    }
}

pub fn execute(program: &Program, scorer: &impl ConceptScorer) -> Result<ExecutionResult, ExecError> {
    match program {
        Program::Exist(child) => {
            let m = mask(child, scorer)?;
            if m.is_empty() {
                return Err(ExecError::EmptyScene("Exist"));
            }
            Ok(ExecutionResult::Score(m[argmax(&m)]))
        }
        Program::Locate(child) => {
            let m = mask(child, scorer)?;
            if m.is_empty() {
                return Err(ExecError::EmptyScene("Locate"));
            }
            Ok(ExecutionResult::Object(argmax(&m)))
        }
        Program::MetaVerify(a, b, m) => Ok(ExecutionResult::Score(scorer.meta_score(a, b, *m)?)),
        Program::Scene | Program::Filter(..) => Err(ExecError::Type(program.name())),
    }
}

/// Binary cross-entropy of a predicted probability. The probability is kept
/// inside `[1e-15, 1 - 1e-15]` so a saturated sigmoid reports a finite loss.
pub fn bce_loss(p: f64, answer: bool) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    if answer {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

struct Tape<'a> {
    model: &'a ModelState,
    objects: Vec<Vec<f64>>,
    object_grads: Vec<Vec<f64>>,
}

impl Tape<'_> {
    fn mask(&self, program: &Program) -> Result<Vec<f64>, ExecError> {
        match program {
            Program::Scene => Ok(vec![1.0; self.objects.len()]),
            Program::Filter(child, c) => {
                let ci = self.model.concept_index(c)?;
                let mut m = self.mask(child)?;
                for (x, o) in m.iter_mut().zip(&self.objects) {
                    *x *= conditional_raw(self.model.concept_coords(ci), o);
                }
                Ok(m)
            }
            _ => Err(ExecError::Type(program.name())),
        }
    }

    /// Pushes `adjoint` (d loss / d mask) back through a mask-valued node.
    fn backward(&mut self, program: &Program, adjoint: &[f64], grads: &mut Gradients) -> Result<(), ExecError> {
        let Program::Filter(child, c) = program else { return Ok(()) };
        let ci = self.model.concept_index(c)?;
        let concept = self.model.concept_coords(ci);
        let upstream = self.mask(child)?;
        let mut child_adj = vec![0.0; adjoint.len()];
        for i in 0..adjoint.len() {
            if adjoint[i] == 0.0 {
                continue;
            }
            let s = conditional_backward(
                concept,
                &self.objects[i],
                adjoint[i] * upstream[i],
                &mut grads.concepts[ci],
                &mut self.object_grads[i],
            );
            child_adj[i] = adjoint[i] * s;
        }
        if child_adj.iter().any(|&a| a != 0.0) {
            self.backward(child, &child_adj, grads)?;
        }
        Ok(())
    }
}

/// Runs a boolean program, accumulates `d BCE / d params` into `grads` and
/// returns `(score, loss)`. Exist routes its gradient only to the first
/// maximal object.
pub fn execute_backward(
    program: &Program,
    features: Option<&[Vec<f64>]>,
    model: &ModelState,
    answer: bool,
    grads: &mut Gradients,
) -> Result<(f64, f64), ExecError> {
    let y = if answer { 1.0 } else { 0.0 };
    let (score, loss) = match program {
        Program::MetaVerify(a, b, m) => {
            let ia = model.concept_index(a)?;
            let ib = model.concept_index(b)?;
            let p = meta_verify_backward_indexed(ia, ib, *m, model, |p| p - y, grads)?;
            (p, bce_loss(p, answer))
        }
        Program::Exist(child) => {
            let features = features.ok_or(ExecError::SceneRequired)?;
            if features.is_empty() {
                return Err(ExecError::EmptyScene("Exist"));
            }
            let objects = encode_all(model, features)?;
            let n = objects.len();
            let mut tape = Tape { model, objects, object_grads: vec![vec![0.0; model.dim()]; n] };
            let m = tape.mask(child)?;
            let k = argmax(&m);
            let p = m[k];
            let mut adj = vec![0.0; n];
            adj[k] = (p - y) / (p * (1.0 - p));
            tape.backward(child, &adj, grads)?;
            for (f, g) in features.iter().zip(&tape.object_grads) {
                if g.iter().any(|&x| x != 0.0) {
                    model.encoder.backward(f, g, &mut grads.encoder);
                }
            }
            (p, bce_loss(p, answer))
        }
        _ => return Err(ExecError::NotBoolean),
    };
    if !loss.is_finite() {
        return Err(ExecError::NonFinite(loss));
    }
    Ok((score, loss))
}
