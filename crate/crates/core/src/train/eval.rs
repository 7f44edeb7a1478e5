use super::{prepare_items, TrainError};
use crate::model::ModelState;
use crate::program::{execute, object_scores, ExecutionResult, ModelScorer, Program};
use crate::world::Dataset;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// One scored item. For `Locate` items `answer` is always true, `object`
/// is the chosen object and `score` its filter score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_index: usize,
    pub score: f64,
    pub answer: bool,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub partition: String,
    pub n_items: usize,
    pub accuracy: f64,
    /// Accuracy over visual yes/no questions.
    pub visual_accuracy: Option<f64>,
    /// Accuracy per metaconcept over `MetaVerify` questions.
    pub per_metaconcept: BTreeMap<String, f64>,
    /// Fraction of `Locate` items whose top object is the target.
    pub recall_at_1: Option<f64>,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    /// `(metric, value)` pairs in a stable order.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = vec![("accuracy".to_string(), self.accuracy), ("n_items".to_string(), self.n_items as f64)];
        if let Some(v) = self.visual_accuracy {
            out.push(("accuracy_visual".into(), v));
        }
        for (m, v) in &self.per_metaconcept {
            out.push((format!("accuracy_{m}"), *v));
        }
        if let Some(r) = self.recall_at_1 {
            out.push(("recall_at_1".into(), r));
        }
        out
    }
}

fn frac(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Scores every item of a partition: boolean questions answer yes iff the
/// score is at least 0.5, `Locate` items count when the argmax is the target.
pub fn evaluate(model: &ModelState, dataset: &Dataset, partition: &str) -> Result<EvalReport, TrainError> {
    let items = prepare_items(dataset, partition)?;
    if items.is_empty() {
        return Err(TrainError::Config(format!("partition `{partition}` is empty")));
    }
    let scorers: Vec<Option<ModelScorer>> = {
        let mut used = vec![false; dataset.scenes.len()];
        items.iter().filter_map(|i| i.scene).for_each(|s| used[s] = true);
        dataset
            .scenes
            .iter()
            .zip(used)
            .map(|(s, u)| u.then(|| ModelScorer::new(model, Some(&s.features()))).transpose())
            .collect::<Result<_, _>>()
            .map_err(|e| TrainError::Item { item: 0, source: e })?
    };
    let bare = ModelScorer::new(model, None).map_err(|e| TrainError::Item { item: 0, source: e })?;
    let mut predictions = Vec::with_capacity(items.len());
    let mut visual = (0, 0);
    let mut locate = (0, 0);
    let mut per_meta: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for it in &items {
        let err = |e| TrainError::Item { item: it.index, source: e };
        let scorer = match it.scene {
            Some(s) => scorers[s].as_ref().expect("scorer built for every used scene"),
            None => &bare,
        };
        let pred = match execute(&it.program, scorer).map_err(err)? {
            ExecutionResult::Score(score) => {
                let answer = score >= 0.5;
                Prediction { item_index: it.index, score, answer, correct: answer == it.answer, object: None }
            }
            ExecutionResult::Object(k) => {
                let scores = object_scores(&it.program, scorer).map_err(err)?;
                let target = dataset.questions[it.index].target;
                Prediction { item_index: it.index, score: scores[k], answer: true, correct: target == Some(k), object: Some(k) }
            }
        };
        let c = pred.correct as usize;
        match &it.program {
            Program::MetaVerify(_, _, m) => {
                let e = per_meta.entry(m.as_str().to_string()).or_default();
                e.0 += c;
                e.1 += 1;
            }
            Program::Locate(_) => locate = (locate.0 + c, locate.1 + 1),
            _ => visual = (visual.0 + c, visual.1 + 1),
        }
        predictions.push(pred);
    }
    let hits = predictions.iter().filter(|p| p.correct).count();
    Ok(EvalReport {
        partition: partition.to_string(),
        n_items: predictions.len(),
        accuracy: hits as f64 / predictions.len() as f64,
        visual_accuracy: frac(visual.0, visual.1),
        per_metaconcept: per_meta.into_iter().map(|(k, (h, n))| (k, h as f64 / n as f64)).collect(),
        recall_at_1: frac(locate.0, locate.1),
        predictions,
    })
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), TrainError> {
    let mut buf = Vec::new();
    for p in predictions {
        serde_json::to_writer(&mut buf, p).expect("prediction serializes");
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| TrainError::io(path, e))?;
    f.write_all(&buf).map_err(|e| TrainError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, TrainError> {
    let f = std::fs::File::open(path).map_err(|e| TrainError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| TrainError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            TrainError::Data(crate::world::WorldError::Line { line: i + 1, message: e.to_string() })
        })?);
    }
    Ok(out)
}

/// Mean and sample standard deviation over per-seed values; the deviation
/// is absent for fewer than two runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: Vec<f64>,
    pub mean: f64,
    pub std: Option<f64>,
}

impl Aggregate {
    pub fn new(runs: Vec<f64>) -> Self {
        let n = runs.len() as f64;
        let mean = if runs.is_empty() { f64::NAN } else { runs.iter().sum::<f64>() / n };
        let std = (runs.len() >= 2).then(|| (runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Self { runs, mean, std }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{build_split, Experiment, SplitSpec, World, WorldConfig, WorldPreset};

    fn data() -> Dataset {
        let mut c = WorldConfig::preset(WorldPreset::ClevrLike, 1);
        c.n_scenes = 50;
        let mut s = SplitSpec::preset(Experiment::ReferentialExpression);
        s.visual_budget = Some(80);
        build_split(&s, &World::generate(&c).unwrap(), 1).unwrap()
    }

    #[test]
    fn accuracy_matches_recount_from_predictions_file() {
        let d = data();
        let m = super::super::init_model(&d, &Default::default());
        let dir = tempfile::tempdir().unwrap();
        for part in ["train", "test"] {
            let r = evaluate(&m, &d, part).unwrap();
            let p = dir.path().join(format!("{part}.jsonl"));
            write_predictions(&p, &r.predictions).unwrap();
            let back = read_predictions(&p).unwrap();
            assert_eq!(back, r.predictions);
            let recount = back.iter().filter(|p| p.correct).count() as f64 / back.len() as f64;
            assert_eq!(recount, r.accuracy);
            // the recount also follows from the raw scores and stored answers
            let again = back
                .iter()
                .filter(|p| match p.object {
                    Some(k) => d.questions[p.item_index].target == Some(k),
                    None => (p.score >= 0.5) == d.questions[p.item_index].answer,
                })
                .count() as f64
                / back.len() as f64;
            assert_eq!(again, r.accuracy);
        }
        assert!(evaluate(&m, &d, "test").unwrap().recall_at_1.is_some());
    }

    #[test]
    fn uniform_half_scores_answer_yes() {
        // a zeroed model scores every metaconcept question exactly 0.5
        let d = data();
        let mut m = super::super::init_model(&d, &Default::default());
        for op in &mut m.operators {
            *op = crate::metaconcept::MetaconceptOperator::zeros(op.hidden_width());
        }
        let r = evaluate(&m, &d, "train").unwrap();
        for p in r.predictions.iter().filter(|p| d.questions[p.item_index].scene_id.is_none()) {
            assert_eq!(p.score, 0.5);
            assert!(p.answer);
        }
        let meta: Vec<_> = r.predictions.iter().filter(|p| d.questions[p.item_index].scene_id.is_none()).collect();
        let acc = meta.iter().filter(|p| p.correct).count() as f64 / meta.len() as f64;
        assert!((acc - 0.5).abs() < 0.1, "{acc}");
    }

    #[test]
    fn aggregate_std_needs_two_runs() {
        assert_eq!(Aggregate::new(vec![0.7]).std, None);
        let a = Aggregate::new(vec![1.0, 3.0]);
        assert_eq!(a.mean, 2.0);
        assert!((a.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }
}
