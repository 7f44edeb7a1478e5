//! Train/test splits for the five experiment protocols, the dataset
//! directory format and a contamination validator.

use super::questions::{
    generate_metaconcept_questions, generate_referential_items, generate_visual_questions, QAItem, QuestionKind,
    SceneFacts, VisualQuestionSpec,
};
use super::scene::{ingest_features, write_scenes, Scene};
use super::{Ontology, World, WorldError, WorldPreset};
use crate::metaconcept::Metaconcept;
use crate::program::{parse_program, symbolic, Program};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    ZeroShotSynonym,
    BiasedSameKind,
    FewShotHypernym,
    MetaconceptGeneralization,
    ReferentialExpression,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::ZeroShotSynonym,
        Experiment::BiasedSameKind,
        Experiment::FewShotHypernym,
        Experiment::MetaconceptGeneralization,
        Experiment::ReferentialExpression,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::ZeroShotSynonym => "zero_shot_synonym",
            Experiment::BiasedSameKind => "biased_same_kind",
            Experiment::FewShotHypernym => "few_shot_hypernym",
            Experiment::MetaconceptGeneralization => "metaconcept_generalization",
            Experiment::ReferentialExpression => "referential_expression",
        }
    }

    /// World presets the protocol can run on; the first is the default.
    pub fn worlds(&self) -> &'static [WorldPreset] {
        match self {
            Experiment::ZeroShotSynonym | Experiment::ReferentialExpression => &[WorldPreset::ClevrLike],
            Experiment::BiasedSameKind => &[WorldPreset::ClevrCogent],
            Experiment::FewShotHypernym => &[WorldPreset::Taxonomy],
            Experiment::MetaconceptGeneralization => &[WorldPreset::ClevrLike, WorldPreset::Taxonomy],
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Experiment {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == norm)
            .ok_or_else(|| WorldError::Format(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub experiment: Experiment,
    /// Fraction of scenes held out for testing where the world has no
    /// predefined test pool.
    pub test_scene_fraction: f64,
    /// Training visual questions per training scene.
    pub questions_per_scene: usize,
    /// Total training visual questions; overrides `questions_per_scene`.
    pub visual_budget: Option<usize>,
    /// Test items per test scene.
    pub test_per_scene: usize,
    /// zero_shot_synonym: number of held-out synonym words.
    pub held_out: usize,
    /// biased_same_kind: pool-B scenes added to training, and how many
    /// leading pool-B scenes are reserved as training candidates.
    pub k: usize,
    pub b_reserve: usize,
    /// Share of training visual questions that filter by two concepts.
    pub two_concept_fraction: f64,
    pub test_two_concept_fraction: f64,
    /// Relative frequency of non-canonical synonyms in training questions.
    #[serde(default = "one")]
    pub alias_weight: f64,
    /// Metaconcepts asked about in training; `None` keeps the protocol's own.
    #[serde(default)]
    pub metaconcepts: Option<Vec<Metaconcept>>,
}

fn one() -> f64 {
    1.0
}

impl SplitSpec {
    fn metaconcepts_or(&self, default: &[Metaconcept]) -> Vec<Metaconcept> {
        self.metaconcepts.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn preset(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            test_scene_fraction: 0.2,
            questions_per_scene: 4,
            visual_budget: None,
            test_per_scene: 2,
            held_out: 3,
            k: 0,
            b_reserve: 200,
            two_concept_fraction: 0.5,
            test_two_concept_fraction: 0.5,
            alias_weight: 1.0,
            metaconcepts: None,
        };
        match experiment {
            Experiment::BiasedSameKind => Self { k: 20, ..base },
            Experiment::ZeroShotSynonym => Self { test_two_concept_fraction: 0.0, ..base },
            Experiment::FewShotHypernym => {
                Self { test_per_scene: 4, two_concept_fraction: 0.0, test_two_concept_fraction: 0.0, ..base }
            }
            Experiment::ReferentialExpression => Self { visual_budget: Some(1000), test_per_scene: 1, ..base },
            _ => base,
        }
    }
}

/// Protocol bookkeeping stored next to the split manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitProtocol {
    pub experiment: Option<Experiment>,
    pub world: Option<WorldPreset>,
    pub seed: u64,
    pub k: usize,
    pub held_out: Vec<String>,
    pub rare_concepts: Vec<String>,
    pub c_train: Vec<String>,
    pub c_test: Vec<String>,
    pub metaconcepts: Vec<Metaconcept>,
    pub train_scenes: Vec<String>,
    pub test_scenes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ontology: Ontology,
    pub scenes: Vec<Scene>,
    pub questions: Vec<QAItem>,
    /// Partition name -> indices into `questions`.
    pub partitions: BTreeMap<String, Vec<usize>>,
    pub protocol: SplitProtocol,
}

fn ids(scenes: &[&Scene]) -> Vec<String> {
    scenes.iter().map(|s| s.scene_id.clone()).collect()
}

fn owned(scenes: &[&Scene]) -> Vec<Scene> {
    scenes.iter().map(|s| (*s).clone()).collect()
}

fn shuffled_split<'a>(world: &'a World, pool: &str, fraction: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<&'a Scene>, Vec<&'a Scene>), WorldError> {
    let mut all = world.pool(pool)?;
    all.shuffle(rng);
    let n_test = ((all.len() as f64) * fraction).round() as usize;
    if n_test == 0 || n_test >= all.len() {
        return Err(WorldError::Infeasible(format!("cannot hold out {fraction} of {} scenes", all.len())));
    }
    let test = all.split_off(all.len() - n_test);
    Ok((all, test))
}

/// Builds the named `train`/`test` partitions for one experiment.
pub fn build_split(spec: &SplitSpec, world: &World, seed: u64) -> Result<Dataset, WorldError> {
    let preset = world.meta.config.preset;
    if !spec.experiment.worlds().contains(&preset) {
        return Err(WorldError::Infeasible(format!(
            "{} needs a {} world, got {}",
            spec.experiment,
            spec.experiment.worlds().iter().map(|w| w.as_str()).collect::<Vec<_>>().join(" or "),
            preset.as_str()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51_17);
    let o = &world.ontology;
    let every: BTreeSet<String> = o.concept_names().into_iter().collect();
    let mut protocol = SplitProtocol {
        experiment: Some(spec.experiment),
        world: Some(preset),
        seed,
        ..Default::default()
    };
    let visual = |scenes: &[&Scene], vocab: BTreeSet<String>, rng: &mut ChaCha8Rng| {
        let budget = spec.visual_budget.unwrap_or(spec.questions_per_scene * scenes.len());
        let mut vs = VisualQuestionSpec::new(budget, vocab);
        vs.two_concept_fraction = spec.two_concept_fraction;
        vs.alias_weight = spec.alias_weight;
        generate_visual_questions(&owned(scenes), o, &vs, rng)
    };
    let (train, test): (Vec<QAItem>, Vec<QAItem>);
    let (train_scenes, test_scenes): (Vec<&Scene>, Vec<&Scene>);
    match spec.experiment {
        Experiment::ZeroShotSynonym => {
            let (tr, te) = shuffled_split(world, "all", spec.test_scene_fraction, &mut rng)?;
            let held = pick_held_out(o, spec.held_out, &mut rng)?;
            let vocab: BTreeSet<String> = every.difference(&held).cloned().collect();
            let mut items = visual(&tr, vocab, &mut rng)?;
            let ms = spec.metaconcepts_or(&[Metaconcept::Synonym]);
            items.extend(generate_metaconcept_questions(o, &ms, |_, _| true, None, &mut rng)?);
            let mut ts = VisualQuestionSpec::new(spec.test_per_scene * te.len(), every.clone());
            ts.must_mention = Some(held.clone());
            ts.two_concept_fraction = spec.test_two_concept_fraction;
            test = generate_visual_questions(&owned(&te), o, &ts, &mut rng)?;
            train = items;
            protocol.held_out = held.into_iter().collect();
            protocol.metaconcepts = ms;
            (train_scenes, test_scenes) = (tr, te);
        }
        Experiment::BiasedSameKind => {
            let a = world.pool("A")?;
            let b = world.pool("B")?;
            if spec.k > spec.b_reserve || spec.b_reserve >= b.len() {
                return Err(WorldError::Infeasible(format!(
                    "k = {} with {} reserved of {} pool-B scenes",
                    spec.k,
                    spec.b_reserve,
                    b.len()
                )));
            }
            let mut tr = a;
            tr.extend(&b[..spec.k]);
            let te: Vec<&Scene> = b[spec.b_reserve..].to_vec();
            let mut items = visual(&tr, every.clone(), &mut rng)?;
            let ms = spec.metaconcepts_or(&[Metaconcept::SameKind]);
            items.extend(generate_metaconcept_questions(o, &ms, |_, _| true, None, &mut rng)?);
            let mut ts = VisualQuestionSpec::new(spec.test_per_scene * te.len(), every.clone());
            ts.two_concept_fraction = spec.test_two_concept_fraction;
            test = generate_visual_questions(&owned(&te), o, &ts, &mut rng)?;
            train = items;
            protocol.k = spec.k;
            protocol.metaconcepts = ms;
            (train_scenes, test_scenes) = (tr, te);
        }
        Experiment::FewShotHypernym => {
            let tr = world.pool("train")?;
            let te = world.pool("test")?;
            let rare: BTreeSet<String> = world.meta.rare_concepts.iter().cloned().collect();
            if rare.is_empty() {
                return Err(WorldError::Infeasible("world has no rare concepts".into()));
            }
            let mut items = visual(&tr, every.clone(), &mut rng)?;
            let ms = spec.metaconcepts_or(&[Metaconcept::Hypernym]);
            items.extend(generate_metaconcept_questions(o, &ms, |_, _| true, None, &mut rng)?);
            let rare_test = te
                .iter()
                .filter(|s| s.objects.iter().any(|ob| ob.attributes.as_ref().is_some_and(|a| a.values().any(|v| rare.contains(v)))))
                .count();
            let mut ts = VisualQuestionSpec::new(spec.test_per_scene * rare_test, every.clone());
            ts.must_mention = Some(rare.clone());
            ts.two_concept_fraction = spec.test_two_concept_fraction;
            test = generate_visual_questions(&owned(&te), o, &ts, &mut rng)?;
            train = items;
            protocol.rare_concepts = rare.into_iter().collect();
            protocol.metaconcepts = ms;
            (train_scenes, test_scenes) = (tr, te);
        }
        Experiment::MetaconceptGeneralization => {
            let tr = match preset {
                // no visual test here, so every species gets all its scenes
                WorldPreset::Taxonomy => [world.pool("train")?, world.pool("test")?].concat(),
                _ => world.pool("all")?,
            };
            let (c_test, ms): (BTreeSet<String>, Vec<Metaconcept>) = match preset {
                WorldPreset::Taxonomy => (taxonomy_test_concepts(o, &mut rng)?, spec.metaconcepts_or(&[Metaconcept::Hypernym])),
                _ => (
                    clevr_test_concepts(o, &mut rng)?,
                    spec.metaconcepts_or(&[Metaconcept::Synonym, Metaconcept::SameKind]),
                ),
            };
            let c_train: BTreeSet<String> = every.difference(&c_test).cloned().collect();
            let mut items = visual(&tr, every.clone(), &mut rng)?;
            items.extend(generate_metaconcept_questions(
                o,
                &ms,
                |a, b| c_train.contains(a) && c_train.contains(b),
                None,
                &mut rng,
            )?);
            train = items;
            test = generate_metaconcept_questions(o, &ms, |a, b| c_test.contains(a) && c_test.contains(b), None, &mut rng)?;
            protocol.c_train = c_train.into_iter().collect();
            protocol.c_test = c_test.into_iter().collect();
            protocol.metaconcepts = ms;
            (train_scenes, test_scenes) = (tr, Vec::new());
        }
        Experiment::ReferentialExpression => {
            let (tr, te) = shuffled_split(world, "all", spec.test_scene_fraction, &mut rng)?;
            let mut items = visual(&tr, every.clone(), &mut rng)?;
            let ms = spec.metaconcepts_or(&[Metaconcept::Synonym, Metaconcept::SameKind]);
            items.extend(generate_metaconcept_questions(o, &ms, |_, _| true, None, &mut rng)?);
            train = items;
            test = generate_referential_items(&owned(&te), o, &every, spec.test_per_scene, &mut rng)?;
            protocol.metaconcepts = ms;
            (train_scenes, test_scenes) = (tr, te);
        }
    }
    protocol.train_scenes = ids(&train_scenes);
    protocol.test_scenes = ids(&test_scenes);
    let mut train = train;
    train.shuffle(&mut rng);
    let n_train = train.len();
    let mut questions = train;
    questions.extend(test);
    let mut partitions = BTreeMap::new();
    partitions.insert("train".to_string(), (0..n_train).collect());
    partitions.insert("test".to_string(), (n_train..questions.len()).collect());
    // keep only the scenes the questions use, in world order
    let used: BTreeSet<&str> = questions.iter().filter_map(|q| q.scene_id.as_deref()).collect();
    let scenes = world.scenes.iter().filter(|s| used.contains(s.scene_id.as_str())).cloned().collect();
    Ok(Dataset { ontology: world.ontology.clone(), scenes, questions, partitions, protocol })
}

/// Synonym words to hold out: every class keeps at least one visible member,
/// and the held-out words name different kinds where possible.
fn pick_held_out(o: &Ontology, n: usize, rng: &mut ChaCha8Rng) -> Result<BTreeSet<String>, WorldError> {
    let mut candidates: Vec<(usize, &String)> = Vec::new();
    for (ci, class) in o.synonym_classes.iter().enumerate() {
        if class.len() > 1 {
            candidates.extend(class.iter().map(|c| (ci, c)));
        }
    }
    candidates.shuffle(rng);
    let mut classes = HashSet::new();
    let mut kinds = HashSet::new();
    let mut out = BTreeSet::new();
    for fresh_kind_only in [true, false] {
        for &(ci, c) in &candidates {
            if out.len() == n {
                break;
            }
            let kind = o.kind_of(c)?;
            if classes.contains(&ci) || (fresh_kind_only && kinds.contains(kind)) {
                continue;
            }
            classes.insert(ci);
            kinds.insert(kind);
            out.insert(c.clone());
        }
    }
    if out.len() < n {
        return Err(WorldError::Infeasible(format!("cannot hold out {n} synonym words")));
    }
    Ok(out)
}

/// Half of the multi-word synonym classes plus half of the single-word ones.
fn clevr_test_concepts(o: &Ontology, rng: &mut ChaCha8Rng) -> Result<BTreeSet<String>, WorldError> {
    let mut multi: Vec<&Vec<String>> = o.synonym_classes.iter().filter(|c| c.len() > 1).collect();
    multi.shuffle(rng);
    let take = multi.len() / 2;
    let mut out: BTreeSet<String> = multi[..take].iter().flat_map(|c| c.iter().cloned()).collect();
    let mut singles: Vec<&Vec<String>> = o.synonym_classes.iter().filter(|c| c.len() == 1).collect();
    singles.shuffle(rng);
    out.extend(singles.iter().take(singles.len() / 2).map(|c| c[0].clone()));
    if take == 0 {
        return Err(WorldError::Infeasible("ontology has no synonym classes to hold out".into()));
    }
    Ok(out)
}

/// One root and all its descendants (plus their parts).
fn taxonomy_test_concepts(o: &Ontology, rng: &mut ChaCha8Rng) -> Result<BTreeSet<String>, WorldError> {
    let roots: Vec<&String> =
        o.concepts.keys().filter(|c| o.ancestors(c).is_ok_and(|a| a.is_empty()) && !o.hypernym_edges.iter().all(|(p, _)| p != *c)).collect();
    let root = roots.choose(rng).ok_or_else(|| WorldError::Infeasible("ontology has no taxonomy".into()))?;
    let mut out: BTreeSet<String> =
        o.concepts.keys().filter(|c| *c == *root || o.ancestors(c).is_ok_and(|a| a.contains(*root))).cloned().collect();
    for (whole, part) in &o.meronym_edges {
        if out.contains(whole) {
            out.insert(part.clone());
        }
    }
    Ok(out)
}

impl Dataset {
    pub fn partition(&self, name: &str) -> Result<&[usize], WorldError> {
        self.partitions
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| WorldError::Format(format!("no partition named `{name}`")))
    }

    pub fn scene_index(&self) -> HashMap<&str, usize> {
        self.scenes.iter().enumerate().map(|(i, s)| (s.scene_id.as_str(), i)).collect()
    }

    /// Writes `ontology.json`, `scenes.jsonl`, `questions.jsonl`,
    /// `split.json` (partition -> QA line indices) and `protocol.json`.
    pub fn save(&self, dir: &Path) -> Result<(), WorldError> {
        std::fs::create_dir_all(dir).map_err(|e| WorldError::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| WorldError::io(&p, e))
        };
        write("ontology.json", self.ontology.to_json())?;
        write("split.json", serde_json::to_string(&self.partitions).expect("manifest serializes"))?;
        write("protocol.json", serde_json::to_string_pretty(&self.protocol).expect("protocol serializes"))?;
        write_scenes(&dir.join("scenes.jsonl"), &self.scenes)?;
        let qp = dir.join("questions.jsonl");
        let f = std::fs::File::create(&qp).map_err(|e| WorldError::io(&qp, e))?;
        let mut w = std::io::BufWriter::new(f);
        for q in &self.questions {
            serde_json::to_writer(&mut w, q).map_err(|e| WorldError::Format(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| WorldError::io(&qp, e))?;
        }
        w.flush().map_err(|e| WorldError::io(&qp, e))
    }

    pub fn load(dir: &Path) -> Result<Self, WorldError> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| WorldError::io(&p, e))
        };
        let ontology = Ontology::from_json(&read("ontology.json")?)?;
        let partitions: BTreeMap<String, Vec<usize>> =
            serde_json::from_str(&read("split.json")?).map_err(|e| WorldError::Format(format!("split.json: {e}")))?;
        let protocol = match dir.join("protocol.json").exists() {
            true => serde_json::from_str(&read("protocol.json")?)
                .map_err(|e| WorldError::Format(format!("protocol.json: {e}")))?,
            false => SplitProtocol::default(),
        };
        let scenes = ingest_features(&dir.join("scenes.jsonl"))?;
        let qp = dir.join("questions.jsonl");
        let f = std::fs::File::open(&qp).map_err(|e| WorldError::io(&qp, e))?;
        let questions = read_questions(std::io::BufReader::new(f))?;
        for (name, idx) in &partitions {
            if let Some(bad) = idx.iter().find(|&&i| i >= questions.len()) {
                return Err(WorldError::Format(format!("partition `{name}` refers to missing question line {bad}")));
            }
        }
        Ok(Self { ontology, scenes, questions, partitions, protocol })
    }

    /// Checks protocol disjointness, program validity and answer
    /// consistency by exhaustive scan.
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Infeasible(format!("split validation: {m}")));
        let train = self.partition("train")?;
        let test = self.partition("test")?;
        let train_set: BTreeSet<usize> = train.iter().copied().collect();
        if test.iter().any(|i| train_set.contains(i)) {
            return bad("train and test share question lines".into());
        }
        let scene_index = self.scene_index();
        let mut programs = Vec::with_capacity(self.questions.len());
        for (i, q) in self.questions.iter().enumerate() {
            let p = parse_program(&q.program).map_err(|e| WorldError::Format(format!("question {i}: {e}")))?;
            let scene = match &q.scene_id {
                Some(id) => Some(&self.scenes[*scene_index.get(id.as_str()).ok_or_else(|| WorldError::Format(format!("question {i}: unknown scene `{id}`")))?]),
                None => None,
            };
            if (q.kind == QuestionKind::Visual) != scene.is_some() || p.uses_scene() != scene.is_some() {
                return bad(format!("question {i}: scene presence does not match its kind"));
            }
            let has_truth = scene.map_or(true, |s| s.objects.iter().all(|o| o.attributes.is_some()));
            if has_truth {
                let facts = SceneFacts { ontology: &self.ontology, scene };
                let truth = symbolic::evaluate(&p, &facts).map_err(|e| WorldError::Format(format!("question {i}: {e}")))?;
                let ok = match (truth, q.target) {
                    (symbolic::SymbolicValue::Bool(b), None) => b == q.answer,
                    (symbolic::SymbolicValue::Objects(objs), Some(t)) => objs == [t],
                    _ => false,
                };
                if !ok {
                    return bad(format!("question {i}: stored answer disagrees with ground truth"));
                }
            }
            programs.push(p);
        }
        let pr = &self.protocol;
        let scene_of = |i: usize| self.questions[i].scene_id.as_deref();
        let train_scenes: BTreeSet<&str> = pr.train_scenes.iter().map(String::as_str).collect();
        let test_scenes: BTreeSet<&str> = pr.test_scenes.iter().map(String::as_str).collect();
        if train_scenes.intersection(&test_scenes).next().is_some() {
            return bad("a scene is in both train and test pools".into());
        }
        if !pr.train_scenes.is_empty() {
            if let Some(&i) = train.iter().find(|&&i| scene_of(i).is_some_and(|s| !train_scenes.contains(s))) {
                return bad(format!("train question {i} uses a non-training scene"));
            }
            if let Some(&i) = test.iter().find(|&&i| scene_of(i).is_some_and(|s| !test_scenes.contains(s))) {
                return bad(format!("test question {i} uses a non-test scene"));
            }
        }
        let mentions = |i: usize, set: &[String]| programs[i].concepts().iter().any(|c| set.iter().any(|s| s == c));
        let within = |i: usize, set: &[String]| programs[i].concepts().iter().all(|c| set.iter().any(|s| s == c));
        match pr.experiment {
            Some(Experiment::ZeroShotSynonym) => {
                if let Some(&i) = train.iter().find(|&&i| self.questions[i].kind == QuestionKind::Visual && mentions(i, &pr.held_out)) {
                    return bad(format!("train visual question {i} mentions a held-out concept"));
                }
                if let Some(&i) = test.iter().find(|&&i| !mentions(i, &pr.held_out)) {
                    return bad(format!("test question {i} does not mention a held-out concept"));
                }
            }
            Some(Experiment::FewShotHypernym) => {
                if let Some(&i) = test.iter().find(|&&i| !mentions(i, &pr.rare_concepts)) {
                    return bad(format!("test question {i} does not mention a rare concept"));
                }
            }
            Some(Experiment::MetaconceptGeneralization) => {
                let train_programs: BTreeSet<&str> = train.iter().map(|&i| self.questions[i].program.as_str()).collect();
                for &i in test {
                    if train_programs.contains(self.questions[i].program.as_str()) {
                        return bad(format!("test question {i} also appears in training"));
                    }
                    if self.questions[i].kind != QuestionKind::Metaconcept || !within(i, &pr.c_test) {
                        return bad(format!("test question {i} is not a C_test metaconcept question"));
                    }
                }
                if let Some(&i) = train.iter().find(|&&i| self.questions[i].kind == QuestionKind::Metaconcept && !within(i, &pr.c_train)) {
                    return bad(format!("train metaconcept question {i} leaves C_train"));
                }
            }
            Some(Experiment::ReferentialExpression) => {
                if let Some(&i) = test.iter().find(|&&i| !matches!(programs[i], Program::Locate(_)) || self.questions[i].target.is_none()) {
                    return bad(format!("test item {i} is not a Locate item"));
                }
            }
            Some(Experiment::BiasedSameKind) | None => {}
        }
        Ok(())
    }
}

pub fn read_questions(reader: impl BufRead) -> Result<Vec<QAItem>, WorldError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| WorldError::Line { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let q: QAItem = serde_json::from_str(&line).map_err(|e| WorldError::Line { line: i + 1, message: e.to_string() })?;
        parse_program(&q.program).map_err(|e| WorldError::Line { line: i + 1, message: e.to_string() })?;
        out.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::WorldConfig;
    use super::*;

    fn world(preset: WorldPreset) -> World {
        let mut c = WorldConfig::preset(preset, 3);
        c.n_scenes = c.n_scenes.min(60);
        c.n_scenes_b = c.n_scenes_b.min(40);
        c.common_train_scenes = c.common_train_scenes.min(4);
        c.test_scenes_per_species = c.test_scenes_per_species.min(2);
        World::generate(&c).unwrap()
    }

    fn spec(e: Experiment) -> SplitSpec {
        let mut s = SplitSpec::preset(e);
        s.b_reserve = 10;
        s.k = s.k.min(5);
        s.visual_budget = s.visual_budget.map(|b| b.min(100));
        s
    }

    #[test]
    fn every_protocol_validates() {
        for e in Experiment::ALL {
            for &w in e.worlds() {
                let d = build_split(&spec(e), &world(w), 1).unwrap();
                d.validate().unwrap_or_else(|err| panic!("{e} on {}: {err}", w.as_str()));
                assert!(!d.partition("train").unwrap().is_empty());
                assert!(!d.partition("test").unwrap().is_empty());
            }
        }
    }

    #[test]
    fn zero_shot_train_never_shows_held_out_words() {
        let d = build_split(&spec(Experiment::ZeroShotSynonym), &world(WorldPreset::ClevrLike), 2).unwrap();
        assert_eq!(d.protocol.held_out.len(), 3);
        for &i in d.partition("train").unwrap() {
            let q = &d.questions[i];
            let p = parse_program(&q.program).unwrap();
            if q.kind == QuestionKind::Visual {
                assert!(p.concepts().iter().all(|c| !d.protocol.held_out.iter().any(|h| h == c)));
            }
        }
        let meta_mentions = d.partition("train").unwrap().iter().any(|&i| {
            let p = parse_program(&d.questions[i].program).unwrap();
            p.metaconcept().is_some() && p.concepts().iter().any(|c| d.protocol.held_out.iter().any(|h| h == c))
        });
        assert!(meta_mentions);
    }

    #[test]
    fn biased_k_zero_uses_no_pool_b_scene() {
        let w = world(WorldPreset::ClevrCogent);
        let mut s = spec(Experiment::BiasedSameKind);
        s.k = 0;
        let d = build_split(&s, &w, 3).unwrap();
        let b: BTreeSet<&String> = w.meta.pools["B"].iter().collect();
        for &i in d.partition("train").unwrap() {
            if let Some(id) = &d.questions[i].scene_id {
                assert!(!b.contains(id));
            }
        }
        s.k = 11;
        assert!(build_split(&s, &w, 3).is_err());
    }

    #[test]
    fn wrong_world_is_rejected() {
        assert!(build_split(&spec(Experiment::FewShotHypernym), &world(WorldPreset::ClevrLike), 0).is_err());
    }

    #[test]
    fn dataset_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let d = build_split(&spec(Experiment::ReferentialExpression), &world(WorldPreset::ClevrLike), 4).unwrap();
        d.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, d);
        back.validate().unwrap();
    }

    #[test]
    fn tampered_answers_fail_validation() {
        let mut d = build_split(&spec(Experiment::ZeroShotSynonym), &world(WorldPreset::ClevrLike), 5).unwrap();
        let i = d.partition("test").unwrap()[0];
        d.questions[i].answer = !d.questions[i].answer;
        assert!(d.validate().is_err());
    }
}
