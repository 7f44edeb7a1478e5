//! Symbolic ground truth: concepts, kinds, synonym classes and the
//! hypernym/meronym graphs.

use super::WorldError;
use crate::metaconcept::Metaconcept;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    /// Kinds in a fixed order (e.g. color, shape, material, size).
    pub kinds: Vec<String>,
    /// Every concept with its kind.
    pub concepts: BTreeMap<String, String>,
    /// Partition of all concepts; the first member is the canonical one and
    /// is what scene attributes use.
    pub synonym_classes: Vec<Vec<String>>,
    /// Direct `(parent, child)` taxonomy edges.
    #[serde(default)]
    pub hypernym_edges: Vec<(String, String)>,
    /// `(whole, part)` edges.
    #[serde(default)]
    pub meronym_edges: Vec<(String, String)>,
    #[serde(skip)]
    derived: Derived,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Derived {
    class_of: HashMap<String, usize>,
    ancestors: HashMap<String, BTreeSet<String>>,
    meronyms: BTreeSet<(String, String)>,
}

/// Counts-based recipe for a generic ontology.
#[derive(Clone, Debug, PartialEq)]
pub struct OntologySpec {
    /// Flat attribute kinds: `(kind name, number of base concepts)`.
    pub kinds: Vec<(String, usize)>,
    /// Number of extra synonym words, as a fraction of base concepts.
    pub synonym_rate: f64,
    /// Taxonomy levels below the roots (0 = no taxonomy).
    pub taxonomy_depth: usize,
    pub taxonomy_roots: usize,
    pub taxonomy_branching: usize,
    pub seed: u64,
}

impl Ontology {
    pub fn new(
        kinds: Vec<String>,
        concepts: BTreeMap<String, String>,
        synonym_classes: Vec<Vec<String>>,
        hypernym_edges: Vec<(String, String)>,
        meronym_edges: Vec<(String, String)>,
    ) -> Result<Self, WorldError> {
        let mut o = Self { kinds, concepts, synonym_classes, hypernym_edges, meronym_edges, derived: Derived::default() };
        o.rebuild()?;
        Ok(o)
    }

    /// Recomputes lookup tables and validates the invariants. Call after
    /// deserializing.
    pub fn rebuild(&mut self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Ontology(m));
        if self.kinds.len() < 2 {
            return bad("need at least two kinds".into());
        }
        for (c, k) in &self.concepts {
            if !self.kinds.contains(k) {
                return bad(format!("concept `{c}` has undeclared kind `{k}`"));
            }
            if !is_identifier(c) {
                return bad(format!("concept name `{c}` is not a lowercase identifier"));
            }
        }
        let mut class_of = HashMap::new();
        for (i, class) in self.synonym_classes.iter().enumerate() {
            if class.is_empty() {
                return bad("empty synonym class".into());
            }
            for c in class {
                let Some(k) = self.concepts.get(c) else { return bad(format!("synonym of unknown concept `{c}`")) };
                if k != &self.concepts[&class[0]] {
                    return bad(format!("synonyms `{}` and `{c}` have different kinds", class[0]));
                }
                if class_of.insert(c.clone(), i).is_some() {
                    return bad(format!("concept `{c}` is in two synonym classes"));
                }
            }
        }
        if let Some(c) = self.concepts.keys().find(|c| !class_of.contains_key(*c)) {
            return bad(format!("concept `{c}` has no synonym class"));
        }
        for k in &self.kinds {
            let n = self.synonym_classes.iter().filter(|cl| &self.concepts[&cl[0]] == k).count();
            if n < 2 {
                return bad(format!("kind `{k}` has fewer than two distinct concepts"));
            }
        }
        for (a, b) in self.hypernym_edges.iter().chain(&self.meronym_edges) {
            for c in [a, b] {
                if !self.concepts.contains_key(c) {
                    return bad(format!("relation mentions unknown concept `{c}`"));
                }
            }
        }
        let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
        for (p, c) in &self.hypernym_edges {
            parents.entry(c).or_default().push(p);
        }
        let mut ancestors = HashMap::new();
        for c in self.concepts.keys() {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&str> = parents.get(c.as_str()).cloned().unwrap_or_default();
            while let Some(p) = stack.pop() {
                if p == c {
                    return bad(format!("hypernym cycle through `{c}`"));
                }
                if seen.insert(p.to_string()) {
                    stack.extend(parents.get(p).cloned().unwrap_or_default());
                }
            }
            ancestors.insert(c.clone(), seen);
        }
        let meronyms = self.meronym_edges.iter().cloned().collect();
        self.derived = Derived { class_of, ancestors, meronyms };
        Ok(())
    }

    pub fn concept_names(&self) -> Vec<String> {
        self.concepts.keys().cloned().collect()
    }

    pub fn contains(&self, c: &str) -> bool {
        self.concepts.contains_key(c)
    }

    pub fn kind_of(&self, c: &str) -> Result<&str, WorldError> {
        self.concepts.get(c).map(String::as_str).ok_or_else(|| WorldError::UnknownConcept(c.to_string()))
    }

    /// Canonical member of `c`'s synonym class.
    pub fn canonical(&self, c: &str) -> Result<&str, WorldError> {
        let i = self.derived.class_of.get(c).ok_or_else(|| WorldError::UnknownConcept(c.to_string()))?;
        Ok(&self.synonym_classes[*i][0])
    }

    pub fn synonyms_of(&self, c: &str) -> Result<&[String], WorldError> {
        let i = self.derived.class_of.get(c).ok_or_else(|| WorldError::UnknownConcept(c.to_string()))?;
        Ok(&self.synonym_classes[*i])
    }

    /// Canonical concepts of a kind, in class order.
    pub fn canonical_of_kind(&self, kind: &str) -> Vec<&str> {
        self.synonym_classes.iter().map(|cl| cl[0].as_str()).filter(|c| self.concepts[*c] == kind).collect()
    }

    /// Ground truth for `MetaVerify(a, b, m)`.
    pub fn relation(&self, a: &str, b: &str, m: Metaconcept) -> Result<bool, WorldError> {
        let ka = self.kind_of(a)?;
        let kb = self.kind_of(b)?;
        Ok(match m {
            Metaconcept::Synonym => self.derived.class_of[a] == self.derived.class_of[b],
            Metaconcept::SameKind => ka == kb,
            Metaconcept::Hypernym => self.derived.ancestors[b].contains(a),
            Metaconcept::Meronym => self.derived.meronyms.contains(&(a.to_string(), b.to_string())),
        })
    }

    /// Strict ancestors of `c` in the taxonomy.
    pub fn ancestors(&self, c: &str) -> Result<&BTreeSet<String>, WorldError> {
        self.derived.ancestors.get(c).ok_or_else(|| WorldError::UnknownConcept(c.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ontology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let mut o: Ontology = serde_json::from_str(text).map_err(|e| WorldError::Format(format!("ontology: {e}")))?;
        o.rebuild()?;
        Ok(o)
    }

    /// The CLEVR attribute ontology: 15 base values over four kinds plus the
    /// seven synonym words of the original question templates, 22 in total.
    pub fn clevr() -> Self {
        let groups: [(&str, &[&[&str]]); 4] = [
            ("color", &[&["gray"], &["red"], &["blue"], &["green"], &["brown"], &["purple"], &["cyan"], &["yellow"]]),
            ("shape", &[&["cube", "block"], &["sphere", "ball"], &["cylinder"]]),
            ("material", &[&["rubber", "matte"], &["metal", "metallic", "shiny"]]),
            ("size", &[&["large", "big"], &["small", "tiny"]]),
        ];
        let mut concepts = BTreeMap::new();
        let mut classes = Vec::new();
        for (kind, gs) in groups {
            for g in gs {
                for c in *g {
                    concepts.insert(c.to_string(), kind.to_string());
                }
                classes.push(g.iter().map(|s| s.to_string()).collect());
            }
        }
        let kinds = groups.iter().map(|(k, _)| k.to_string()).collect();
        Self::new(kinds, concepts, classes, vec![], vec![]).expect("clevr ontology is valid")
    }

    /// Four-rank taxonomy (order > family > genus > species) with
    /// `roots` orders, the given branching at each rank, and one body-part
    /// concept per family linked by a meronym edge.
    pub fn taxonomy(roots: usize, branching: &[usize; 3]) -> Self {
        let ranks = ["order", "family", "genus", "species"];
        let mut concepts = BTreeMap::new();
        let mut classes: Vec<Vec<String>> = Vec::new();
        let mut edges = Vec::new();
        let mut level: Vec<String> = (0..roots).map(|i| format!("order_{i}")).collect();
        for c in &level {
            concepts.insert(c.clone(), "order".to_string());
            classes.push(vec![c.clone()]);
        }
        let mut families = Vec::new();
        for (r, &b) in branching.iter().enumerate() {
            let rank = ranks[r + 1];
            let mut next = Vec::new();
            for parent in &level {
                for _ in 0..b {
                    let c = format!("{rank}_{}", next.len());
                    concepts.insert(c.clone(), rank.to_string());
                    classes.push(vec![c.clone()]);
                    edges.push((parent.clone(), c.clone()));
                    next.push(c);
                }
            }
            if rank == "family" {
                families = next.clone();
            }
            level = next;
        }
        let mut meronyms = Vec::new();
        for (i, f) in families.iter().enumerate() {
            let p = format!("part_{i}");
            concepts.insert(p.clone(), "part".to_string());
            classes.push(vec![p.clone()]);
            meronyms.push((f.clone(), p));
        }
        let kinds = ranks.iter().map(|s| s.to_string()).chain(["part".to_string()]).collect();
        Self::new(kinds, concepts, classes, edges, meronyms).expect("taxonomy ontology is valid")
    }

    /// Generic ontology from counts. Concepts are named `<kind>_<i>`,
    /// synonym words `<base>_syn`; taxonomy ranks are `rank<d>_<i>`.
    pub fn generate(spec: &OntologySpec) -> Result<Self, WorldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut concepts = BTreeMap::new();
        let mut classes: Vec<Vec<String>> = Vec::new();
        let mut kinds = Vec::new();
        let mut base = Vec::new();
        for (kind, n) in &spec.kinds {
            if *n < 2 {
                return Err(WorldError::Infeasible(format!("kind `{kind}` needs at least two concepts")));
            }
            kinds.push(kind.clone());
            for i in 0..*n {
                let c = format!("{kind}_{i}");
                concepts.insert(c.clone(), kind.clone());
                base.push(classes.len());
                classes.push(vec![c]);
            }
        }
        let mut edges = Vec::new();
        if spec.taxonomy_depth > 0 {
            if spec.taxonomy_roots < 1 || spec.taxonomy_branching < 2 {
                return Err(WorldError::Infeasible("taxonomy needs >= 1 root and branching >= 2".into()));
            }
            let mut level: Vec<String> = Vec::new();
            for d in 0..=spec.taxonomy_depth {
                let kind = format!("rank{d}");
                kinds.push(kind.clone());
                let n = if d == 0 { spec.taxonomy_roots.max(2) } else { level.len() * spec.taxonomy_branching };
                let mut next = Vec::with_capacity(n);
                for i in 0..n {
                    let c = format!("{kind}_{i}");
                    concepts.insert(c.clone(), kind.clone());
                    base.push(classes.len());
                    classes.push(vec![c.clone()]);
                    if d > 0 {
                        edges.push((level[i / spec.taxonomy_branching].clone(), c.clone()));
                    }
                    next.push(c);
                }
                level = next;
            }
        }
        let n_syn = (spec.synonym_rate * base.len() as f64).round() as usize;
        if !(0.0..=1.0).contains(&spec.synonym_rate) || n_syn > base.len() {
            return Err(WorldError::Infeasible(format!(
                "synonym rate {} needs {n_syn} base concepts, only {} exist",
                spec.synonym_rate,
                base.len()
            )));
        }
        let picks: Vec<usize> = base.choose_multiple(&mut rng, n_syn).copied().collect();
        for ci in picks {
            let b = classes[ci][0].clone();
            let s = format!("{b}_syn");
            concepts.insert(s.clone(), concepts[&b].clone());
            classes[ci].push(s);
        }
        Self::new(kinds, concepts, classes, edges, vec![])
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty()
        && b[0].is_ascii_lowercase()
        && b.iter().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'_')
}
