use super::{evaluate, train, write_predictions, Aggregate, EvalReport, TrainConfig, TrainError};
use crate::world::{build_split, Dataset, Experiment, QuestionKind, SplitSpec, World, WorldConfig, WorldPreset};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const METRICS_HEADER: &str = "experiment,preset,seed,partition,metric,value";

/// Everything needed to replicate one protocol over several seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub experiment: Experiment,
    /// One world template per preset the protocol runs on; the seed is
    /// replaced per run.
    pub worlds: Vec<WorldConfig>,
    pub split: SplitSpec,
    pub train: TrainConfig,
    /// Drop metaconcept questions from the training partition.
    pub ablate_metaconcepts: bool,
    /// biased_same_kind: values of k to sweep instead of `split.k`.
    pub sweep_k: Option<Vec<usize>>,
}

impl ExperimentPlan {
    /// Default schedule for each protocol, sized for one CPU core.
    pub fn preset(experiment: Experiment) -> Self {
        let mut worlds: Vec<WorldConfig> = experiment.worlds().iter().map(|&w| WorldConfig::preset(w, 0)).collect();
        let mut split = SplitSpec::preset(experiment);
        let mut train = TrainConfig::default();
        match experiment {
            Experiment::ZeroShotSynonym => train.epochs = 6,
            Experiment::BiasedSameKind => train.epochs = 4,
            Experiment::FewShotHypernym => {
                train.epochs = 30;
                train.metaconcept_mix = Some(0.3);
                worlds[0].noise_sigma = 0.4;
                worlds[0].salience = [("species".to_string(), 0.5)].into();
            }
            Experiment::MetaconceptGeneralization => {
                train.epochs = 3;
                // only the species is rendered; higher taxa and parts are
                // unions of species, and every species is common
                for w in worlds.iter_mut().filter(|w| w.preset == WorldPreset::Taxonomy) {
                    w.salience = ["order", "family", "genus", "part"].iter().map(|k| (k.to_string(), 0.0)).collect();
                    w.rare_species = 0;
                }
            }
            Experiment::ReferentialExpression => {
                train.epochs = 40;
                train.visual_warmup = 20;
                split.alias_weight = 0.05;
            }
        }
        Self { experiment, worlds, split, train, ablate_metaconcepts: false, sweep_k: None }
    }

    pub fn label(&self) -> String {
        match self.ablate_metaconcepts {
            true => format!("{}_ablated", self.experiment),
            false => self.experiment.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub preset: WorldPreset,
    pub k: Option<usize>,
    pub seed: u64,
    pub report: EvalReport,
    pub checkpoint: String,
    pub loss_trace: Vec<f64>,
}

impl RunResult {
    fn preset_label(&self) -> String {
        match self.k {
            Some(k) => format!("{}/k={k}", self.preset.as_str()),
            None => self.preset.as_str().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub preset: String,
    pub seed: u64,
    pub partition: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub runs: Vec<RunResult>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut out = Vec::new();
        for r in &self.runs {
            for (metric, value) in r.report.metrics() {
                out.push(MetricRow {
                    experiment: self.plan.label(),
                    preset: r.preset_label(),
                    seed: r.seed,
                    partition: r.report.partition.clone(),
                    metric,
                    value,
                });
            }
        }
        out
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = format!("{METRICS_HEADER}\n");
        for r in self.rows() {
            writeln!(s, "{},{},{},{},{},{}", r.experiment, r.preset, r.seed, r.partition, r.metric, r.value).unwrap();
        }
        s
    }

    /// Per-seed values of `metric` for the runs matching `preset` and `k`
    /// (`None` matches any).
    pub fn aggregate(&self, preset: Option<WorldPreset>, k: Option<usize>, metric: &str) -> Aggregate {
        let runs = self
            .runs
            .iter()
            .filter(|r| preset.map_or(true, |p| p == r.preset) && k.map_or(true, |k| r.k == Some(k)))
            .filter_map(|r| r.report.metrics().into_iter().find(|(m, _)| m == metric).map(|(_, v)| v))
            .collect();
        Aggregate::new(runs)
    }

    /// Plot-ready sweep table: one row per k with mean and std accuracy.
    pub fn sweep_csv(&self) -> Option<String> {
        let ks = self.plan.sweep_k.as_ref()?;
        let mut s = String::from("k,mean_accuracy,std_accuracy,n_seeds\n");
        for &k in ks {
            let a = self.aggregate(None, Some(k), "accuracy");
            let std = a.std.map(|v| v.to_string()).unwrap_or_default();
            writeln!(s, "{k},{},{std},{}", a.mean, a.runs.len()).unwrap();
        }
        Some(s)
    }

    fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry {
            preset: String,
            metric: String,
            #[serde(flatten)]
            aggregate: Aggregate,
        }
        let mut keys: Vec<(String, Option<WorldPreset>, Option<usize>, String)> = Vec::new();
        for r in &self.runs {
            for (m, _) in r.report.metrics() {
                let key = (r.preset_label(), Some(r.preset), r.k, m);
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
        let entries: Vec<Entry> = keys
            .into_iter()
            .map(|(label, p, k, m)| Entry { aggregate: self.aggregate(p, k, &m), preset: label, metric: m })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "experiment": self.plan.label(),
            "plan": self.plan,
            "results": entries,
        }))
        .expect("summary serializes")
    }

    /// Writes `metrics.csv`, `summary.json`, per-run predictions and
    /// checkpoints, and `sweep.csv` for k sweeps.
    pub fn write(&self, dir: &Path) -> Result<(), TrainError> {
        let mk = |p: &Path| std::fs::create_dir_all(p).map_err(|e| TrainError::io(p, e));
        mk(&dir.join("predictions"))?;
        mk(&dir.join("checkpoints"))?;
        let put = |p: &Path, text: &str| std::fs::write(p, text).map_err(|e| TrainError::io(p, e));
        put(&dir.join("metrics.csv"), &self.metrics_csv())?;
        put(&dir.join("summary.json"), &self.summary_json())?;
        if let Some(s) = self.sweep_csv() {
            put(&dir.join("sweep.csv"), &s)?;
        }
        for r in &self.runs {
            let stem = format!("{}_{}_seed{}", self.plan.label(), r.preset_label().replace("/k=", "_k"), r.seed);
            write_predictions(&dir.join("predictions").join(format!("{stem}.jsonl")), &r.report.predictions)?;
            let ck = dir.join("checkpoints").join(format!("{stem}.json"));
            crate::model::write_atomic(&ck, r.checkpoint.as_bytes())?;
        }
        Ok(())
    }
}

fn ablate(d: &mut Dataset) {
    let q = &d.questions;
    if let Some(train) = d.partitions.get_mut("train") {
        train.retain(|&i| q[i].kind != QuestionKind::Metaconcept);
    }
}

/// Generates worlds and splits, trains one model per seed (and per k when
/// sweeping) and evaluates on the test partition. `progress` receives one
/// line per finished run.
pub fn run_experiment(
    plan: &ExperimentPlan,
    seeds: usize,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentReport, TrainError> {
    let mut runs = Vec::new();
    let ks: Vec<Option<usize>> = match &plan.sweep_k {
        Some(ks) => ks.iter().map(|&k| Some(k)).collect(),
        None => vec![None],
    };
    for template in &plan.worlds {
        for seed in 0..seeds as u64 {
            let world = World::generate(&WorldConfig { seed, ..template.clone() })?;
            for &k in &ks {
                let spec = SplitSpec { k: k.unwrap_or(plan.split.k), ..plan.split.clone() };
                let mut data = build_split(&spec, &world, seed)?;
                if plan.ablate_metaconcepts {
                    ablate(&mut data);
                }
                let run = train(&data, "train", &TrainConfig { seed, ..plan.train.clone() })?;
                let report = evaluate(&run.model, &data, "test")?;
                let r = RunResult {
                    preset: template.preset,
                    k,
                    seed,
                    checkpoint: run.model.to_json(),
                    loss_trace: run.epoch_losses,
                    report,
                };
                let headline = r.report.recall_at_1.unwrap_or(r.report.accuracy);
                progress(&format!("{} {} seed {seed}: {headline:.4}", plan.label(), r.preset_label()));
                runs.push(r);
            }
        }
    }
    Ok(ExperimentReport { plan: plan.clone(), runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(e: Experiment) -> ExperimentPlan {
        let mut p = ExperimentPlan::preset(e);
        for w in &mut p.worlds {
            w.n_scenes = w.n_scenes.min(40);
            w.n_scenes_b = w.n_scenes_b.min(30);
            w.common_train_scenes = w.common_train_scenes.min(2);
            w.test_scenes_per_species = w.test_scenes_per_species.min(1);
        }
        p.split.b_reserve = 10;
        p.split.visual_budget = p.split.visual_budget.map(|b| b.min(60));
        p.train.epochs = 1;
        p
    }

    #[test]
    fn sweep_emits_one_row_per_k_and_seed() {
        let mut p = small(Experiment::BiasedSameKind);
        p.sweep_k = Some(vec![0, 1, 3, 10]);
        let r = run_experiment(&p, 2, |_| {}).unwrap();
        assert_eq!(r.runs.len(), 8);
        let acc: Vec<_> = r.rows().into_iter().filter(|row| row.metric == "accuracy").collect();
        assert_eq!(acc.len(), 8);
        let csv = r.sweep_csv().unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(r.metrics_csv().starts_with(METRICS_HEADER));
    }

    #[test]
    fn ablation_removes_metaconcept_training() {
        let mut p = small(Experiment::ZeroShotSynonym);
        p.ablate_metaconcepts = true;
        let r = run_experiment(&p, 1, |_| {}).unwrap();
        assert!(r.metrics_csv().contains("zero_shot_synonym_ablated,clevr-like,0,test,accuracy,"));
    }

    #[test]
    fn artifacts_are_reproducible() {
        let p = small(Experiment::MetaconceptGeneralization);
        let a = run_experiment(&p, 1, |_| {}).unwrap();
        let b = run_experiment(&p, 1, |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(csv, b.metrics_csv());
        assert!(csv.contains(",taxonomy,0,test,accuracy_hypernym,"));
    }
}
