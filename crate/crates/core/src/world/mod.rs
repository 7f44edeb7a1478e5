//! Synthetic worlds: ontology, scenes with prototype-sum features, question
//! generators and the experiment splits.

pub mod ontology;
pub mod questions;
pub mod scene;
pub mod split;

pub use ontology::{Ontology, OntologySpec};
pub use questions::{
    generate_metaconcept_questions, generate_referential_items, generate_visual_questions, QAItem, QuestionKind,
    SceneFacts, VisualQuestionSpec,
};
pub use scene::{ingest_features, read_scenes, write_scenes, FeatureModel, Scene, SceneObject};
pub use split::{build_split, read_questions, Dataset, Experiment, SplitProtocol, SplitSpec};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid ontology: {0}")]
    Ontology(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl WorldError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        WorldError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorldPreset {
    /// CLEVR attributes, uniform compositions.
    ClevrLike,
    /// CLEVR attributes in two pools with swapped cube/other color palettes.
    ClevrCogent,
    /// One object per scene labelled at every taxonomy rank, with a set of
    /// rare species.
    Taxonomy,
}

impl WorldPreset {
    pub fn as_str(&self) -> &'static str {
        match self {
            WorldPreset::ClevrLike => "clevr-like",
            WorldPreset::ClevrCogent => "clevr-cogent",
            WorldPreset::Taxonomy => "taxonomy",
        }
    }
}

impl std::str::FromStr for WorldPreset {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clevr-like" => Ok(WorldPreset::ClevrLike),
            "clevr-cogent" => Ok(WorldPreset::ClevrCogent),
            "taxonomy" => Ok(WorldPreset::Taxonomy),
            other => Err(WorldError::Format(format!(
                "unknown world preset `{other}` (expected clevr-like, clevr-cogent or taxonomy)"
            ))),
        }
    }
}

/// Palette halves for the two CoGenT-style pools: in pool A cubes take
/// `COGENT_CUBE_COLORS` and spheres/cylinders the other half; pool B swaps.
pub const COGENT_CUBE_COLORS: [&str; 4] = ["gray", "blue", "brown", "yellow"];
pub const COGENT_OTHER_COLORS: [&str; 4] = ["red", "green", "purple", "cyan"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub preset: WorldPreset,
    pub seed: u64,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    /// Strength of the color x shape interaction term in the features.
    #[serde(default)]
    pub entanglement: f64,
    /// Prototype length per kind (default 1).
    #[serde(default)]
    pub salience: BTreeMap<String, f64>,
    pub min_objects: usize,
    pub max_objects: usize,
    /// clevr-like: number of scenes; clevr-cogent: pool A size.
    pub n_scenes: usize,
    /// clevr-cogent: pool B size.
    pub n_scenes_b: usize,
    /// taxonomy: number of rare species and scenes per species.
    pub rare_species: usize,
    pub rare_train_scenes: usize,
    pub common_train_scenes: usize,
    pub test_scenes_per_species: usize,
}

impl WorldConfig {
    pub fn preset(preset: WorldPreset, seed: u64) -> Self {
        let base = Self {
            preset,
            seed,
            feature_dim: 128,
            noise_sigma: 0.1,
            entanglement: 0.0,
            salience: BTreeMap::new(),
            min_objects: 3,
            max_objects: 10,
            n_scenes: 5000,
            n_scenes_b: 0,
            rare_species: 0,
            rare_train_scenes: 0,
            common_train_scenes: 0,
            test_scenes_per_species: 0,
        };
        match preset {
            WorldPreset::ClevrLike => base,
            WorldPreset::ClevrCogent => Self { n_scenes: 4000, n_scenes_b: 700, entanglement: 1.0, ..base },
            WorldPreset::Taxonomy => Self {
                n_scenes: 0,
                min_objects: 1,
                max_objects: 1,
                rare_species: 16,
                rare_train_scenes: 5,
                common_train_scenes: 40,
                test_scenes_per_species: 10,
                ..base
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldMeta {
    pub config: WorldConfig,
    /// Named scene pools (scene ids), e.g. `A`/`B` or `train`/`test`.
    pub pools: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub rare_concepts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub meta: WorldMeta,
    pub ontology: Ontology,
    pub scenes: Vec<Scene>,
}

fn taxonomy_ontology() -> Ontology {
    Ontology::taxonomy(4, &[2, 2, 4])
}

impl World {
    pub fn generate(config: &WorldConfig) -> Result<Self, WorldError> {
        if config.min_objects == 0 || config.min_objects > config.max_objects {
            return Err(WorldError::Infeasible("object count range is empty".into()));
        }
        let ontology = match config.preset {
            WorldPreset::ClevrLike | WorldPreset::ClevrCogent => Ontology::clevr(),
            WorldPreset::Taxonomy => taxonomy_ontology(),
        };
        let features = FeatureModel::new(&ontology, config.feature_dim, config.noise_sigma, config.seed)?
            .entangled(&ontology, config.entanglement, config.seed);
        let mut features = features;
        features.salience = config.salience.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut gen = SceneGen { ontology: &ontology, features: &features, config, scenes: Vec::new() };
        let mut pools = BTreeMap::new();
        let mut rare_concepts = Vec::new();
        match config.preset {
            WorldPreset::ClevrLike => {
                let ids = gen.clevr_pool("s", config.n_scenes, None, &mut rng)?;
                pools.insert("all".to_string(), ids);
            }
            WorldPreset::ClevrCogent => {
                let a = gen.clevr_pool("a", config.n_scenes, Some(false), &mut rng)?;
                let b = gen.clevr_pool("b", config.n_scenes_b, Some(true), &mut rng)?;
                pools.insert("A".to_string(), a);
                pools.insert("B".to_string(), b);
            }
            WorldPreset::Taxonomy => {
                let mut species: Vec<String> = ontology.canonical_of_kind("species").iter().map(|s| s.to_string()).collect();
                if config.rare_species > species.len() {
                    return Err(WorldError::Infeasible(format!(
                        "{} rare species requested, taxonomy has {}",
                        config.rare_species,
                        species.len()
                    )));
                }
                species.shuffle(&mut rng);
                rare_concepts = species[..config.rare_species].to_vec();
                rare_concepts.sort();
                species.sort();
                let mut train = Vec::new();
                let mut test = Vec::new();
                for s in &species {
                    let n = if rare_concepts.contains(s) { config.rare_train_scenes } else { config.common_train_scenes };
                    for _ in 0..n {
                        train.push(gen.taxon_scene(s, &mut rng)?);
                    }
                    for _ in 0..config.test_scenes_per_species {
                        test.push(gen.taxon_scene(s, &mut rng)?);
                    }
                }
                pools.insert("train".to_string(), train);
                pools.insert("test".to_string(), test);
            }
        }
        let scenes = gen.scenes;
        Ok(Self { meta: WorldMeta { config: config.clone(), pools, rare_concepts }, ontology, scenes })
    }

    pub fn scene_index(&self) -> BTreeMap<&str, usize> {
        self.scenes.iter().enumerate().map(|(i, s)| (s.scene_id.as_str(), i)).collect()
    }

    /// Scenes of a named pool, in pool order.
    pub fn pool(&self, name: &str) -> Result<Vec<&Scene>, WorldError> {
        let ids = self
            .meta
            .pools
            .get(name)
            .ok_or_else(|| WorldError::Infeasible(format!("world has no `{name}` scene pool")))?;
        let index = self.scene_index();
        ids.iter()
            .map(|id| {
                index.get(id.as_str()).map(|&i| &self.scenes[i]).ok_or_else(|| WorldError::Format(format!("pool lists unknown scene `{id}`")))
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), WorldError> {
        std::fs::create_dir_all(dir).map_err(|e| WorldError::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| WorldError::io(&p, e))
        };
        write("ontology.json", self.ontology.to_json())?;
        write("world.json", serde_json::to_string_pretty(&self.meta).expect("meta serializes"))?;
        write_scenes(&dir.join("scenes.jsonl"), &self.scenes)
    }

    pub fn load(dir: &Path) -> Result<Self, WorldError> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| WorldError::io(&p, e))
        };
        let ontology = Ontology::from_json(&read("ontology.json")?)?;
        let meta: WorldMeta =
            serde_json::from_str(&read("world.json")?).map_err(|e| WorldError::Format(format!("world.json: {e}")))?;
        let scenes = ingest_features(&dir.join("scenes.jsonl"))?;
        Ok(Self { meta, ontology, scenes })
    }
}

struct SceneGen<'a> {
    ontology: &'a Ontology,
    features: &'a FeatureModel,
    config: &'a WorldConfig,
    scenes: Vec<Scene>,
}

impl SceneGen<'_> {
    fn push(&mut self, prefix: &str, attrs: Vec<BTreeMap<String, String>>, rng: &mut ChaCha8Rng) -> Result<String, WorldError> {
        let scene_id = format!("{prefix}{:05}", self.scenes.len());
        let objects = attrs
            .into_iter()
            .map(|a| {
                let features = self.features.synthesize(self.ontology, &a, rng)?;
                Ok(SceneObject { attributes: Some(a), features })
            })
            .collect::<Result<_, WorldError>>()?;
        self.scenes.push(Scene { scene_id: scene_id.clone(), objects });
        Ok(scene_id)
    }

    /// `swapped`: `None` for uniform colors, otherwise the CoGenT pool.
    fn clevr_pool(
        &mut self,
        prefix: &str,
        n: usize,
        swapped: Option<bool>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<String>, WorldError> {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let count = rng.gen_range(self.config.min_objects..=self.config.max_objects);
            let mut objs = Vec::with_capacity(count);
            for _ in 0..count {
                let mut a = BTreeMap::new();
                for kind in &self.ontology.kinds {
                    let choices = self.ontology.canonical_of_kind(kind);
                    a.insert(kind.clone(), choices.choose(rng).expect("kinds are non-empty").to_string());
                }
                if let Some(swap) = swapped {
                    let is_cube = a["shape"] == "cube";
                    let palette = if is_cube != swap { &COGENT_CUBE_COLORS } else { &COGENT_OTHER_COLORS };
                    a.insert("color".into(), palette.choose(rng).expect("palette").to_string());
                }
                objs.push(a);
            }
            ids.push(self.push(prefix, objs, rng)?);
        }
        Ok(ids)
    }

    fn taxon_scene(&mut self, species: &str, rng: &mut ChaCha8Rng) -> Result<String, WorldError> {
        let mut a = BTreeMap::new();
        a.insert("species".to_string(), species.to_string());
        let mut family = None;
        for anc in self.ontology.ancestors(species)? {
            let kind = self.ontology.kind_of(anc)?.to_string();
            if kind == "family" {
                family = Some(anc.clone());
            }
            a.insert(kind, anc.clone());
        }
        let family = family.ok_or_else(|| WorldError::Ontology(format!("`{species}` has no family")))?;
        let part = self
            .ontology
            .meronym_edges
            .iter()
            .find(|(w, _)| *w == family)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| WorldError::Ontology(format!("`{family}` has no part")))?;
        a.insert("part".to_string(), part);
        self.push("t", vec![a], rng)
    }
}
