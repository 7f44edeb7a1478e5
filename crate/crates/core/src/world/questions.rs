//! Question/program/answer generation over a world.

use super::ontology::Ontology;
use super::scene::Scene;
use super::WorldError;
use crate::metaconcept::Metaconcept;
use crate::program::symbolic::{self, SymbolicFacts, SymbolicValue};
use crate::program::{ExecError, Program};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Visual,
    Metaconcept,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    pub kind: QuestionKind,
    pub program: String,
    pub answer: bool,
    pub scene_id: Option<String>,
    /// Index of the referred object, for `Locate` items only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

/// Ground truth of one scene (or of the ontology alone).
pub struct SceneFacts<'a> {
    pub ontology: &'a Ontology,
    pub scene: Option<&'a Scene>,
}

impl SymbolicFacts for SceneFacts<'_> {
    fn num_objects(&self) -> Option<usize> {
        self.scene.map(|s| s.objects.len())
    }

    fn has_concept(&self, object: usize, concept: &str) -> Result<bool, ExecError> {
        let unknown = || ExecError::UnknownConcept(concept.to_string());
        let scene = self.scene.ok_or(ExecError::SceneRequired)?;
        let attrs = scene.objects[object].attributes.as_ref().ok_or(ExecError::MissingGroundTruth)?;
        let kind = self.ontology.kind_of(concept).map_err(|_| unknown())?;
        let Some(value) = attrs.get(kind) else { return Err(ExecError::MissingGroundTruth) };
        let a = self.ontology.canonical(value).map_err(|_| ExecError::UnknownConcept(value.clone()))?;
        Ok(a == self.ontology.canonical(concept).map_err(|_| unknown())?)
    }

    fn relation(&self, a: &str, b: &str, m: Metaconcept) -> Result<bool, ExecError> {
        self.ontology.relation(a, b, m).map_err(|e| match e {
            WorldError::UnknownConcept(c) => ExecError::UnknownConcept(c),
            _ => ExecError::MissingGroundTruth,
        })
    }
}

/// Template parameters for existence questions.
#[derive(Clone, Debug)]
pub struct VisualQuestionSpec {
    /// Total number of questions.
    pub budget: usize,
    /// Words that may appear.
    pub vocabulary: BTreeSet<String>,
    /// If set, every question mentions at least one of these words.
    pub must_mention: Option<BTreeSet<String>>,
    /// Probability of the two-concept template.
    pub two_concept_fraction: f64,
    /// Sampling weight of a non-canonical synonym relative to its
    /// canonical word.
    pub alias_weight: f64,
}

impl VisualQuestionSpec {
    pub fn new(budget: usize, vocabulary: BTreeSet<String>) -> Self {
        Self { budget, vocabulary, must_mention: None, two_concept_fraction: 0.5, alias_weight: 1.0 }
    }
}

const ATTEMPTS_PER_VISIT: usize = 24;

/// Balanced `Exist(Filter(...))` questions. Scenes are visited round-robin
/// in a shuffled order; answers alternate yes/no, and every answer is
/// computed by the symbolic evaluator.
pub fn generate_visual_questions<R: Rng + ?Sized>(
    scenes: &[Scene],
    ontology: &Ontology,
    spec: &VisualQuestionSpec,
    rng: &mut R,
) -> Result<Vec<QAItem>, WorldError> {
    if spec.budget == 0 {
        return Ok(Vec::new());
    }
    if scenes.is_empty() {
        return Err(WorldError::Infeasible("no scenes to ask about".into()));
    }
    let mut by_kind: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for w in &spec.vocabulary {
        by_kind.entry(ontology.kind_of(w)?).or_default().push(w);
    }
    if !(spec.alias_weight > 0.0 && spec.alias_weight.is_finite()) {
        return Err(WorldError::Infeasible(format!("alias weight must be positive, got {}", spec.alias_weight)));
    }
    let weight = |w: &str| if ontology.canonical(w).is_ok_and(|c| c == w) { 1.0 } else { spec.alias_weight };
    let must: Option<Vec<&str>> = spec.must_mention.as_ref().map(|m| m.iter().map(String::as_str).collect());
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(spec.budget);
    let mut idle_visits = 0;
    let mut cursor = 0;
    while out.len() < spec.budget {
        if idle_visits > 2 * scenes.len() {
            return Err(WorldError::Infeasible(format!(
                "only {} of {} balanced visual questions could be generated",
                out.len(),
                spec.budget
            )));
        }
        let scene = &scenes[order[cursor % order.len()]];
        cursor += 1;
        let want = out.len() % 2 == 0;
        let facts = SceneFacts { ontology, scene: Some(scene) };
        let found = (0..ATTEMPTS_PER_VISIT).find_map(|_| {
            let n = if rng.gen_bool(spec.two_concept_fraction) { 2 } else { 1 };
            let words = propose(scene, ontology, &by_kind, must.as_deref(), n, want, &weight, rng)?;
            let program = Program::exist(Program::filter_chain(&words));
            (symbolic::answer(&program, &facts).ok()? == want).then_some(program)
        });
        match found {
            Some(program) => {
                idle_visits = 0;
                out.push(QAItem {
                    kind: QuestionKind::Visual,
                    program: program.to_string(),
                    answer: want,
                    scene_id: Some(scene.scene_id.clone()),
                    target: None,
                });
            }
            None => idle_visits += 1,
        }
    }
    Ok(out)
}

/// Candidate concept words for one question. Positive proposals are read off
/// a random object; negative ones are drawn uniformly per kind.
fn propose<'v, R: Rng + ?Sized>(
    scene: &Scene,
    ontology: &Ontology,
    by_kind: &BTreeMap<&str, Vec<&'v str>>,
    must: Option<&[&'v str]>,
    n: usize,
    want: bool,
    weight: &impl Fn(&str) -> f64,
    rng: &mut R,
) -> Option<Vec<&'v str>> {
    let mut words: Vec<&'v str> = Vec::with_capacity(n);
    let mut kinds: Vec<&str> = by_kind.keys().copied().collect();
    let first = must.map(|m| *m.choose(rng).expect("must_mention is non-empty"));
    if let Some(f) = first {
        words.push(f);
        let k = ontology.kind_of(f).ok()?;
        kinds.retain(|x| *x != k);
    }
    kinds.shuffle(rng);
    let needed = n.saturating_sub(words.len());
    if kinds.len() < needed {
        return None;
    }
    if want {
        let candidates: Vec<&super::scene::SceneObject> = scene
            .objects
            .iter()
            .filter(|o| {
                first.map_or(true, |f| {
                    let attrs = o.attributes.as_ref();
                    let k = ontology.kind_of(f).ok();
                    match (attrs, k) {
                        (Some(a), Some(k)) => a.get(k).and_then(|v| ontology.canonical(v).ok()) == ontology.canonical(f).ok(),
                        _ => false,
                    }
                })
            })
            .collect();
        let obj = candidates.choose(rng)?;
        let attrs = obj.attributes.as_ref()?;
        for k in kinds.iter().take(needed) {
            let value = attrs.get(*k)?;
            let syn = ontology.synonyms_of(value).ok()?;
            let allowed: Vec<&'v str> = by_kind[k].iter().copied().filter(|w| syn.iter().any(|s| s == w)).collect();
            words.push(allowed.choose_weighted(rng, |w| weight(w)).ok()?);
        }
    } else {
        for k in kinds.iter().take(needed) {
            words.push(by_kind[k].choose_weighted(rng, |w| weight(w)).ok()?);
        }
    }
    words.shuffle(rng);
    Some(words)
}

/// Balanced `MetaVerify` questions over the pairs accepted by `pair_ok`.
/// Symmetric relations emit both argument orders; asymmetric ones draw half
/// of their negatives from reversed positive pairs. `cap` bounds the items
/// per metaconcept.
pub fn generate_metaconcept_questions<R: Rng + ?Sized>(
    ontology: &Ontology,
    metaconcepts: &[Metaconcept],
    pair_ok: impl Fn(&str, &str) -> bool,
    cap: Option<usize>,
    rng: &mut R,
) -> Result<Vec<QAItem>, WorldError> {
    let names = ontology.concept_names();
    let mut out = Vec::new();
    for &m in metaconcepts {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                if i == j || (m.is_symmetric() && j < i) || !pair_ok(a, b) || (m.is_symmetric() && !pair_ok(b, a)) {
                    continue;
                }
                if ontology.relation(a, b, m)? {
                    pos.push((a.as_str(), b.as_str()));
                } else {
                    neg.push((a.as_str(), b.as_str()));
                }
            }
        }
        if pos.is_empty() {
            return Err(WorldError::Infeasible(format!("metaconcept `{m}` has no positive pairs")));
        }
        let per_item = if m.is_symmetric() { 4 } else { 2 };
        let limit = cap.map_or(usize::MAX, |c| (c / per_item).max(1));
        let k = pos.len().min(neg.len()).min(limit);
        pos.shuffle(rng);
        pos.truncate(k);
        let negatives = if m == Metaconcept::Synonym {
            // half of the negatives are distinct values of one kind
            let mut hard: Vec<_> =
                neg.iter().copied().filter(|(a, b)| ontology.kind_of(a).ok() == ontology.kind_of(b).ok()).collect();
            hard.shuffle(rng);
            hard.truncate(k / 2);
            let fill = k - hard.len();
            let spare: Vec<_> = neg.iter().copied().filter(|p| !hard.contains(p)).collect();
            hard.extend(spare.choose_multiple(rng, fill).copied());
            hard
        } else if m.is_symmetric() {
            neg.choose_multiple(rng, k).copied().collect::<Vec<_>>()
        } else {
            let mut reversed: Vec<(&str, &str)> =
                pos.iter().map(|&(a, b)| (b, a)).filter(|r| neg.contains(r)).collect();
            reversed.shuffle(rng);
            reversed.truncate(k / 2);
            let rest: Vec<(&str, &str)> = neg.iter().copied().filter(|p| !reversed.contains(p)).collect();
            let fill = k - reversed.len();
            reversed.extend(rest.choose_multiple(rng, fill).copied());
            reversed
        };
        let mut emit = |a: &str, b: &str, answer: bool| {
            out.push(QAItem {
                kind: QuestionKind::Metaconcept,
                program: Program::meta_verify(a, b, m).to_string(),
                answer,
                scene_id: None,
                target: None,
            })
        };
        for (pairs, answer) in [(&pos, true), (&negatives, false)] {
            for &(a, b) in pairs.iter() {
                emit(a, b, answer);
                if m.is_symmetric() {
                    emit(b, a, answer);
                }
            }
        }
    }
    // interleave so the file is not sorted by answer
    out.shuffle(rng);
    Ok(out)
}

/// `Locate` items: for up to `per_scene` objects, the shortest one- or
/// two-word description (from `vocabulary`) that picks out only that object.
pub fn generate_referential_items<R: Rng + ?Sized>(
    scenes: &[Scene],
    ontology: &Ontology,
    vocabulary: &BTreeSet<String>,
    per_scene: usize,
    rng: &mut R,
) -> Result<Vec<QAItem>, WorldError> {
    let mut out = Vec::new();
    for scene in scenes {
        let facts = SceneFacts { ontology, scene: Some(scene) };
        let mut targets: Vec<usize> = (0..scene.objects.len()).collect();
        targets.shuffle(rng);
        let mut emitted = 0;
        for &t in &targets {
            if emitted == per_scene {
                break;
            }
            let Some(attrs) = scene.objects[t].attributes.as_ref() else { continue };
            let mut words: Vec<&str> = Vec::new();
            for value in attrs.values() {
                let mut syn: Vec<&str> =
                    ontology.synonyms_of(value)?.iter().map(String::as_str).filter(|w| vocabulary.contains(*w)).collect();
                syn.shuffle(rng);
                if let Some(w) = syn.first() {
                    words.push(w);
                }
            }
            words.shuffle(rng);
            let mut candidates: Vec<Vec<&str>> = words.iter().map(|w| vec![*w]).collect();
            let mut pairs = Vec::new();
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    pairs.push(vec![words[i], words[j]]);
                }
            }
            pairs.shuffle(rng);
            candidates.extend(pairs);
            for c in candidates {
                let program = Program::locate(Program::filter_chain(&c));
                let picked = symbolic::evaluate(&program, &facts).map_err(|e| WorldError::Ontology(e.to_string()))?;
                if picked == SymbolicValue::Objects(vec![t]) {
                    out.push(QAItem {
                        kind: QuestionKind::Visual,
                        program: program.to_string(),
                        answer: true,
                        scene_id: Some(scene.scene_id.clone()),
                        target: Some(t),
                    });
                    emitted += 1;
                    break;
                }
            }
        }
    }
    Ok(out)
}
