use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use super::review::{explain_suspects, SuspectConfig};
use super::{
    apply_corrections, make_corruption_plan, review_items, simulate_corrections, CorruptionPlan, SimulatedCorrector,
    WrongChoiceMode,
};
use crate::error::{Error, Result};
use crate::explain::{ExplainConfig, TemplateSet};
use crate::kg::{DatasetSplits, KnowledgeGraph, Triple};
use crate::kge::{link_prediction, train, EmbeddingModel, TrainConfig};
use crate::sfe::{build_augmented_graph, AugmentedGraph, SubstitutionMode};
use crate::surrogate::{evaluate_fidelity_modes, SurrogateConfig, SurrogateMode};

/// Which corrupted facts reach the corrector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionScope {
    /// Every planned corruption.
    #[default]
    AllCorrupted,
    /// Only corruptions that show up as a hop of some explanation.
    Explained,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub corruption_rate: f64,
    /// Corrector accuracy behind `mrr_corrected`.
    pub accuracy: f64,
    pub seeds: Vec<u64>,
    /// Extra corrector accuracies for the accuracy/MRR curve.
    pub sweep: Vec<f64>,
    pub wrong_choice_mode: WrongChoiceMode,
    pub scope: CorrectionScope,
    pub train: TrainConfig,
    /// Misclassified test facts explained per seed (0 skips explaining
    /// unless the scope needs it).
    pub max_explanations: usize,
    pub k_substitution: usize,
    pub surrogate: SurrogateConfig,
    pub explain: ExplainConfig,
    /// Surrogate fidelity of the corrupted model, per mode.
    pub fidelity_modes: Vec<SurrogateMode>,
    /// Also train on the clean data for reference.
    pub clean_reference: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corruption_rate: 0.3,
            accuracy: 0.866,
            seeds: vec![0, 1, 2],
            sweep: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            wrong_choice_mode: WrongChoiceMode::Retain,
            scope: CorrectionScope::AllCorrupted,
            train: TrainConfig::household_long(),
            max_explanations: 5,
            k_substitution: 5,
            surrogate: SurrogateConfig::default(),
            explain: ExplainConfig::default(),
            fidelity_modes: Vec::new(),
            clean_reference: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.corruption_rate) || !unit(self.accuracy) || !self.sweep.iter().all(|&a| unit(a)) {
            return Err(Error::InvalidConfig("rates and accuracies must lie in [0, 1]".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        self.train.validate()?;
        self.surrogate.validate()
    }

    /// The main accuracy plus the sweep, ascending, without duplicates.
    pub fn accuracies(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.sweep.iter().copied().chain([self.accuracy]).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub accuracy: f64,
    pub mrr: f64,
    /// Corrupted facts restored to the original (median over seeds in
    /// the report).
    pub restored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub corrupted: usize,
    pub misclassified: usize,
    pub explained: usize,
    pub disagreements: usize,
    /// Corrupted facts that appeared as an explanation hop.
    pub exposed: usize,
    pub reviewed: usize,
    pub mrr_clean: Option<f64>,
    pub mrr_corrupted: f64,
    pub mrr_corrected: f64,
    pub curve: Vec<CurvePoint>,
    pub fidelity: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub corruption_rate: f64,
    pub correction_accuracy_used: f64,
    /// Medians over seeds from here on.
    pub mrr_clean: Option<f64>,
    pub mrr_corrupted: f64,
    pub mrr_corrected: f64,
    /// `(mrr_corrected - mrr_corrupted) / mrr_corrupted`.
    pub relative_improvement: f64,
    pub fidelity_by_mode: BTreeMap<String, f64>,
    pub curve: Vec<CurvePoint>,
    pub runs: Vec<SeedRun>,
}

/// Middle value; mean of the two middle values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Corrupt, train, explain, correct, retrain, and compare on the clean
/// data, once per seed.
pub fn run_experiment(clean: &DatasetSplits, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    clean.validate()?;
    let runs: Vec<SeedRun> = cfg.seeds.par_iter().map(|&s| run_seed(clean, cfg, s)).collect::<Result<_>>()?;

    let med = |f: &dyn Fn(&SeedRun) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
    let mrr_corrupted = med(&|r| r.mrr_corrupted);
    let mrr_corrected = med(&|r| r.mrr_corrected);
    let curve = cfg
        .accuracies()
        .into_iter()
        .enumerate()
        .map(|(i, accuracy)| CurvePoint {
            accuracy,
            mrr: med(&|r| r.curve[i].mrr),
            restored: med(&|r| r.curve[i].restored as f64).round() as usize,
        })
        .collect();
    let mrr_clean = cfg.clean_reference.then(|| med(&|r| r.mrr_clean.unwrap_or(f64::NAN)));
    let fidelity_by_mode = cfg
        .fidelity_modes
        .iter()
        .map(|m| (m.name().to_string(), med(&|r| r.fidelity.get(m.name()).copied().unwrap_or(f64::NAN))))
        .collect();
    Ok(ExperimentReport {
        corruption_rate: cfg.corruption_rate,
        correction_accuracy_used: cfg.accuracy,
        mrr_clean,
        mrr_corrupted,
        mrr_corrected,
        relative_improvement: (mrr_corrected - mrr_corrupted) / mrr_corrupted,
        fidelity_by_mode,
        curve,
        runs,
    })
}

fn run_seed(clean: &DatasetSplits, cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let tcfg = TrainConfig { seed: cfg.train.seed.wrapping_add(seed), ..cfg.train.clone() };
    let plan = make_corruption_plan(clean, cfg.corruption_rate, seed)?;
    let corrupted = plan.apply(clean);
    let m_hat = train(&corrupted, &tcfg)?;
    let mrr_corrupted = link_prediction(&m_hat, clean)?.mrr;
    info!(seed, corrupted = plan.len(), mrr_corrupted, "trained on corrupted data");

    let mrr_clean = if cfg.clean_reference { Some(link_prediction(&train(clean, &tcfg)?, clean)?.mrr) } else { None };

    let needs_graph =
        cfg.max_explanations > 0 || cfg.scope == CorrectionScope::Explained || !cfg.fidelity_modes.is_empty();
    let graph = needs_graph.then(|| {
        build_augmented_graph(
            &KnowledgeGraph::from_splits(&corrupted),
            &m_hat,
            cfg.k_substitution,
            SubstitutionMode::Both,
        )
    });
    let stage = match &graph {
        Some(g) if cfg.max_explanations > 0 || cfg.scope == CorrectionScope::Explained => {
            explain_misclassified(clean, &m_hat, g, &plan, cfg, seed)?
        }
        _ => ExplainStage::default(),
    };
    let fidelity = match &graph {
        Some(g) if !cfg.fidelity_modes.is_empty() => {
            evaluate_fidelity_modes(&cfg.fidelity_modes, &corrupted, &m_hat, g, &cfg.surrogate)?
                .into_iter()
                .map(|r| (r.mode.name().to_string(), r.mean_f1))
                .collect()
        }
        _ => BTreeMap::new(),
    };

    let mut items = review_items(&plan, &m_hat)?;
    if cfg.scope == CorrectionScope::Explained {
        items.retain(|(_, e, _)| stage.exposed.contains(&e.corrupted));
    }
    let curve = cfg
        .accuracies()
        .into_par_iter()
        .map(|accuracy| {
            let records = simulate_corrections(&items, &SimulatedCorrector::new(accuracy, seed)?);
            let restored = records
                .iter()
                .filter(|r| {
                    let e = plan.find(&r.hop).expect("records come from the plan");
                    r.options[r.chosen] == super::CorrectionOption::Fact(e.original)
                })
                .count();
            let fixed = apply_corrections(&corrupted, &plan, &records, cfg.wrong_choice_mode)?;
            // Nothing changed: retraining would reproduce Θ̂ exactly.
            let mrr =
                if fixed == corrupted { mrr_corrupted } else { link_prediction(&train(&fixed, &tcfg)?, clean)?.mrr };
            Ok(CurvePoint { accuracy, mrr, restored })
        })
        .collect::<Result<Vec<_>>>()?;
    let mrr_corrected = curve.iter().find(|p| p.accuracy == cfg.accuracy).map(|p| p.mrr).unwrap_or(f64::NAN);
    info!(seed, mrr_corrected, "trained on corrected data");

    Ok(SeedRun {
        seed,
        corrupted: plan.len(),
        misclassified: stage.misclassified,
        explained: stage.explained,
        disagreements: stage.disagreements,
        exposed: stage.exposed.len(),
        reviewed: items.len(),
        mrr_clean,
        mrr_corrupted,
        mrr_corrected,
        curve,
        fidelity,
    })
}

#[derive(Default)]
struct ExplainStage {
    misclassified: usize,
    explained: usize,
    disagreements: usize,
    exposed: HashSet<Triple>,
}

fn explain_misclassified(
    clean: &DatasetSplits,
    m: &EmbeddingModel,
    g: &AugmentedGraph,
    plan: &CorruptionPlan,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ExplainStage> {
    let scfg = SuspectConfig {
        max_explanations: cfg.max_explanations,
        seed,
        surrogate: cfg.surrogate.clone(),
        explain: cfg.explain,
    };
    let report = explain_suspects(clean, m, g, &TemplateSet::covering(&clean.vocab), &scfg)?;
    let corrupted: HashSet<Triple> = plan.entries().map(|e| e.corrupted).collect();
    let exposed = report
        .explanations
        .iter()
        .flat_map(|x| x.grounded_paths.iter().flat_map(|p| p.hops.iter().map(|h| h.fact)))
        .filter(|f| corrupted.contains(f))
        .collect();
    Ok(ExplainStage {
        misclassified: report.misclassified,
        explained: report.explanations.len(),
        disagreements: report.disagreements,
        exposed,
    })
}

/// `accuracy,mrr` rows of the report curve.
pub fn write_curve_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut s = String::from("accuracy,mrr\n");
    for p in &report.curve {
        s.push_str(&format!("{},{}\n", p.accuracy, p.mrr));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn accuracy_list_is_sorted_and_unique() {
        let cfg = ExperimentConfig { sweep: vec![1.0, 0.0, 0.5], accuracy: 0.5, ..Default::default() };
        assert_eq!(cfg.accuracies(), vec![0.0, 0.5, 1.0]);
        assert!(ExperimentConfig { accuracy: 1.2, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { seeds: vec![], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn small_experiment_runs_end_to_end() {
        let d = crate::synth::household(&crate::synth::HouseholdConfig::default());
        let cfg = ExperimentConfig {
            seeds: vec![0],
            sweep: vec![0.0, 1.0],
            train: TrainConfig { epochs: 5, ..TrainConfig::household() },
            max_explanations: 2,
            clean_reference: false,
            ..Default::default()
        };
        let r = run_experiment(&d, &cfg).unwrap();
        assert_eq!(r.curve.len(), 3);
        let run = &r.runs[0];
        assert!(run.corrupted > 0);
        assert_eq!(run.reviewed, run.corrupted);
        // Accuracy 0 with retained wrong answers changes nothing.
        assert_eq!(r.curve[0].mrr, r.mrr_corrupted);
        assert_eq!(r.curve[0].restored, 0);
        assert!((r.relative_improvement - (r.mrr_corrected - r.mrr_corrupted) / r.mrr_corrupted).abs() < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        write_curve_csv(&r, &p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("accuracy,mrr\n0,"));
    }
}
