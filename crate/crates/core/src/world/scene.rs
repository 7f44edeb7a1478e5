//! Scenes, the prototype-sum feature model and the scene JSONL format.

use super::ontology::Ontology;
use super::WorldError;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// `kind -> concept`, absent for externally extracted features.
    pub attributes: Option<BTreeMap<String, String>>,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn features(&self) -> Vec<Vec<f64>> {
        self.objects.iter().map(|o| o.features.clone()).collect()
    }
}

/// One frozen unit-norm prototype per synonym class. Each kind owns a
/// disjoint block of coordinates and its prototypes are orthonormal inside
/// that block, so same-kind concepts share a subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureModel {
    pub dim: usize,
    pub noise_sigma: f64,
    prototypes: BTreeMap<String, Vec<f64>>,
    /// Length of the per-(first kind, second kind) interaction vector.
    pub entanglement: f64,
    interactions: BTreeMap<(String, String), Vec<f64>>,
    /// Per-kind prototype length; kinds not listed use 1.
    pub salience: BTreeMap<String, f64>,
}

impl FeatureModel {
    pub fn new(ontology: &Ontology, dim: usize, noise_sigma: f64, seed: u64) -> Result<Self, WorldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f0a7);
        let counts: Vec<usize> = ontology.kinds.iter().map(|k| ontology.canonical_of_kind(k).len()).collect();
        let needed: usize = counts.iter().sum();
        if needed > dim {
            return Err(WorldError::Infeasible(format!(
                "{needed} distinct concepts need at least {needed} feature dimensions, have {dim}"
            )));
        }
        // every kind gets one coordinate per prototype, the rest is shared out
        // in proportion to the prototype count
        let spare = dim - needed;
        let mut widths: Vec<usize> = counts.iter().map(|&c| c + spare * c / needed).collect();
        let used: usize = widths.iter().sum();
        let last = widths.len() - 1;
        widths[last] += dim - used;

        let mut prototypes = BTreeMap::new();
        let mut offset = 0;
        for (kind, &width) in ontology.kinds.iter().zip(&widths) {
            let members = ontology.canonical_of_kind(kind);
            let mut basis = random_orthonormal(members.len(), width, &mut rng);
            // values of one kind exclude each other: centre them into a
            // regular simplex so their prototypes point away from each other
            if basis.len() > 1 {
                let n = basis.len() as f64;
                let mean: Vec<f64> = (0..width).map(|j| basis.iter().map(|v| v[j]).sum::<f64>() / n).collect();
                for v in &mut basis {
                    v.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= norm);
                }
            }
            for (c, v) in members.iter().zip(basis) {
                let mut full = vec![0.0; dim];
                full[offset..offset + width].copy_from_slice(&v);
                prototypes.insert(c.to_string(), full);
            }
            offset += width;
        }
        Ok(Self { dim, noise_sigma, prototypes, entanglement: 0.0, interactions: BTreeMap::new(), salience: BTreeMap::new() })
    }

    /// Adds a random direction of length `strength` for every combination
    /// of the ontology's first two kinds, so that e.g. a gray cube and a
    /// gray sphere no longer share their whole color signal.
    pub fn entangled(mut self, ontology: &Ontology, strength: f64, seed: u64) -> Self {
        if strength == 0.0 || ontology.kinds.len() < 2 {
            return self;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe27a_9913);
        for a in ontology.canonical_of_kind(&ontology.kinds[0]) {
            for b in ontology.canonical_of_kind(&ontology.kinds[1]) {
                let v = random_orthonormal(1, self.dim, &mut rng).remove(0);
                self.interactions.insert((a.to_string(), b.to_string()), v);
            }
        }
        self.entanglement = strength;
        self
    }

    pub fn prototype(&self, canonical: &str) -> Option<&[f64]> {
        self.prototypes.get(canonical).map(Vec::as_slice)
    }

    /// Sum of the attribute prototypes plus i.i.d. `N(0, sigma^2)` noise.
    pub fn synthesize<R: Rng + ?Sized>(
        &self,
        ontology: &Ontology,
        attributes: &BTreeMap<String, String>,
        rng: &mut R,
    ) -> Result<Vec<f64>, WorldError> {
        let mut out = vec![0.0; self.dim];
        for kind in &ontology.kinds {
            let c = attributes.get(kind).ok_or_else(|| WorldError::Ontology(format!("object lacks a `{kind}`")))?;
            if ontology.kind_of(c)? != kind {
                return Err(WorldError::Ontology(format!("`{c}` is not a {kind}")));
            }
            let p = &self.prototypes[ontology.canonical(c)?];
            let w = self.salience.get(kind).copied().unwrap_or(1.0);
            for (o, x) in out.iter_mut().zip(p) {
                *o += w * x;
            }
        }
        if !self.interactions.is_empty() {
            let key = |k: &String| -> Result<String, WorldError> { Ok(ontology.canonical(&attributes[k])?.to_string()) };
            let z = &self.interactions[&(key(&ontology.kinds[0])?, key(&ontology.kinds[1])?)];
            for (o, x) in out.iter_mut().zip(z) {
                *o += self.entanglement * x;
            }
        }
        if self.noise_sigma > 0.0 {
            let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| WorldError::Infeasible(e.to_string()))?;
            for o in out.iter_mut() {
                *o += noise.sample(rng);
            }
        }
        Ok(out)
    }
}

fn random_orthonormal<R: Rng + ?Sized>(n: usize, width: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..width).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let p: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= p * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows
}

pub fn write_scenes(path: &Path, scenes: &[Scene]) -> Result<(), WorldError> {
    let file = std::fs::File::create(path).map_err(|e| WorldError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for s in scenes {
        serde_json::to_writer(&mut w, s).map_err(|e| WorldError::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| WorldError::io(path, e))?;
    }
    w.flush().map_err(|e| WorldError::io(path, e))
}

/// Reads a scene JSONL file, checking that every feature vector has the
/// same length. Errors carry 1-based line numbers.
pub fn ingest_features(path: &Path) -> Result<Vec<Scene>, WorldError> {
    let file = std::fs::File::open(path).map_err(|e| WorldError::io(path, e))?;
    read_scenes(std::io::BufReader::new(file))
}

pub fn read_scenes(reader: impl BufRead) -> Result<Vec<Scene>, WorldError> {
    let mut scenes = Vec::new();
    let mut dim: Option<(usize, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| WorldError::Line { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene =
            serde_json::from_str(&line).map_err(|e| WorldError::Line { line: line_no, message: e.to_string() })?;
        for (j, obj) in scene.objects.iter().enumerate() {
            match dim {
                None => dim = Some((obj.features.len(), line_no)),
                Some((d, first)) if d != obj.features.len() => {
                    return Err(WorldError::Line {
                        line: line_no,
                        message: format!(
                            "object {j} has {} features, expected {d} (set by line {first})",
                            obj.features.len()
                        ),
                    })
                }
                _ => {}
            }
            if obj.features.iter().any(|x| !x.is_finite()) {
                return Err(WorldError::Line { line: line_no, message: format!("object {j} has non-finite features") });
            }
        }
        scenes.push(scene);
    }
    Ok(scenes)
}
