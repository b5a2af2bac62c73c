//! Flat-file state behind the review service.
//!
//! Layout of the state directory:
//!
//! | file | contents |
//! |---|---|
//! | `service.json` | [`ServiceConfig`] |
//! | `dataset.json` | the corrupted dataset under review |
//! | `plan.json` | its [`CorruptionPlan`] |
//! | `checkpoint.json` | current model |
//! | `explanations.json` | current explanation generation |
//! | `corrections.jsonl` | append-only correction log |
//! | `sessions.json`, `jobs.json` | review sessions, retrain jobs |

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Explanation, ExplanationRecord, NamedTriple, TemplateSet};
use crate::feedback::{
    append_jsonl_value, apply_corrections, explain_suspects, make_corruption_plan, now_millis, read_jsonl_values,
    review_hops, CorrectionOption, CorrectionRecord, CorrectionSource, CorruptionPlan, ReviewHop, SuspectConfig,
    WrongChoiceMode, NUM_OPTIONS,
};
use crate::kg::{load_dataset, save_dataset, DatasetFormat, DatasetSplits, KnowledgeGraph, Position, Triple};
use crate::kge::{
    link_prediction, load_checkpoint, save_checkpoint, train, EmbeddingModel, LinkPredictionReport, TrainConfig,
};
use crate::sfe::{build_augmented_graph, Direction, SubstitutionMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub train: TrainConfig,
    pub k_substitution: usize,
    pub substitution: SubstitutionMode,
    pub suspects: SuspectConfig,
    pub templates: Option<PathBuf>,
    pub config_hash: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            train: TrainConfig::household(),
            k_substitution: 5,
            substitution: SubstitutionMode::Both,
            suspects: SuspectConfig::default(),
            templates: None,
            config_hash: String::new(),
        }
    }
}

/// Failures that map onto HTTP statuses.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error(transparent)]
    Internal(#[from] Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionView {
    pub index: usize,
    pub option: CorrectionOption,
    pub fact: Option<NamedTriple>,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopView {
    pub index: usize,
    pub fact: NamedTriple,
    pub slot: Position,
    pub text: String,
    pub options: Vec<OptionView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredExplanation {
    pub id: String,
    pub generation: u32,
    pub query: Triple,
    pub record: ExplanationRecord,
    pub hops: Vec<ReviewHop>,
    pub views: Vec<HopView>,
}

impl StoredExplanation {
    pub fn build(
        id: String,
        generation: u32,
        x: &Explanation,
        m: &EmbeddingModel,
        templates: &TemplateSet,
        vocab: &crate::kg::Vocabulary,
    ) -> Result<Self> {
        let hops = review_hops(x, m)?;
        let views = hops
            .iter()
            .enumerate()
            .map(|(index, h)| {
                let options = h
                    .options
                    .iter()
                    .enumerate()
                    .map(|(i, o)| {
                        Ok(match o {
                            CorrectionOption::Fact(f) => OptionView {
                                index: i,
                                option: *o,
                                fact: Some(NamedTriple::new(f, vocab)),
                                text: templates.render_fact(f, Direction::Forward, vocab)?,
                            },
                            CorrectionOption::NoneOfTheAbove => {
                                OptionView { index: i, option: *o, fact: None, text: "None of the above".into() }
                            }
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(HopView {
                    index,
                    fact: NamedTriple::new(&h.fact, vocab),
                    slot: h.slot,
                    text: templates.render_fact(&h.fact, Direction::Forward, vocab)?,
                    options,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StoredExplanation { id, generation, query: x.query, record: x.record(vocab), hops, views })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Submitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceSummary {
    pub explanation_id: String,
    pub query: NamedTriple,
    pub predicted: bool,
    pub text: String,
    pub status: ReviewStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub id: String,
    pub generation: u32,
    pub status: ReviewStatus,
    pub explanation: ExplanationRecord,
    pub hops: Vec<HopView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub explanation_id: String,
    pub hop_index: usize,
    pub chosen: usize,
    #[serde(default)]
    pub session_id: Option<String>,
}

/// A correction log line: the record plus where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedCorrection {
    pub id: String,
    pub hop_index: usize,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub record: CorrectionRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Submitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub id: String,
    pub queue: Vec<String>,
    pub cursor: usize,
    pub status: SessionStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainJob {
    pub id: String,
    pub status: JobStatus,
    pub before: Option<LinkPredictionReport>,
    pub after: Option<LinkPredictionReport>,
    /// Records that resolved a planned corruption.
    pub applied_records: usize,
    /// Records about facts outside the plan. The presented fact counts as
    /// correct for those, so keeping wrong answers makes them no-ops.
    pub ignored_records: usize,
    pub error: Option<String>,
}

/// Everything a retrain needs, detached from the store.
#[derive(Clone)]
pub struct RetrainInputs {
    pub cfg: ServiceConfig,
    pub base: DatasetSplits,
    pub plan: CorruptionPlan,
    pub model: EmbeddingModel,
    pub records: Vec<CorrectionRecord>,
    pub templates: TemplateSet,
}

pub struct RetrainOutcome {
    pub model: EmbeddingModel,
    pub before: LinkPredictionReport,
    pub after: LinkPredictionReport,
    pub explanations: Vec<Explanation>,
    pub applied: usize,
    pub ignored: usize,
}

/// Apply the planned part of the log to the base dataset, retrain, score
/// both models on it, and explain suspects of the new model.
pub fn run_retrain(inputs: RetrainInputs) -> Result<RetrainOutcome> {
    let (planned, other): (Vec<CorrectionRecord>, Vec<CorrectionRecord>) =
        inputs.records.into_iter().partition(|r| inputs.plan.find(&r.hop).is_some());
    let fixed = apply_corrections(&inputs.base, &inputs.plan, &planned, WrongChoiceMode::Retain)?;
    let before = link_prediction(&inputs.model, &inputs.base)?;
    let model = train(&fixed, &inputs.cfg.train)?;
    let after = link_prediction(&model, &inputs.base)?;
    let explanations = explain_store(&inputs.base, &fixed, &model, &inputs.cfg, &inputs.templates)?;
    Ok(RetrainOutcome { model, before, after, explanations, applied: planned.len(), ignored: other.len() })
}

fn explain_store(
    reference: &DatasetSplits,
    current: &DatasetSplits,
    m: &EmbeddingModel,
    cfg: &ServiceConfig,
    templates: &TemplateSet,
) -> Result<Vec<Explanation>> {
    if cfg.suspects.max_explanations == 0 {
        return Ok(Vec::new());
    }
    let g = build_augmented_graph(&KnowledgeGraph::from_splits(current), m, cfg.k_substitution, cfg.substitution);
    Ok(explain_suspects(reference, m, &g, templates, &cfg.suspects)?.explanations)
}

pub struct Store {
    dir: PathBuf,
    pub cfg: ServiceConfig,
    pub base: DatasetSplits,
    pub plan: CorruptionPlan,
    pub model: EmbeddingModel,
    pub templates: TemplateSet,
    pub generation: u32,
    /// Sorted by id.
    pub explanations: Vec<StoredExplanation>,
    pub corrections: Vec<LoggedCorrection>,
    pub sessions: BTreeMap<String, ReviewSession>,
    pub jobs: BTreeMap<String, RetrainJob>,
}

#[derive(Serialize, Deserialize)]
struct ExplanationFile {
    generation: u32,
    items: Vec<StoredExplanation>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(value)?).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_templates(cfg: &ServiceConfig, vocab: &crate::kg::Vocabulary) -> Result<TemplateSet> {
    match &cfg.templates {
        Some(p) => TemplateSet::load(p),
        None => Ok(TemplateSet::covering(vocab)),
    }
}

impl Store {
    pub fn exists(dir: &Path) -> bool {
        dir.join("service.json").is_file()
    }

    /// Write a fresh store holding `explanations` as generation 0.
    pub fn create(
        dir: &Path,
        cfg: ServiceConfig,
        base: DatasetSplits,
        plan: CorruptionPlan,
        model: EmbeddingModel,
        explanations: &[Explanation],
    ) -> Result<Store> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let templates = load_templates(&cfg, &base.vocab)?;
        let mut store = Store {
            dir: dir.to_path_buf(),
            cfg,
            base,
            plan,
            model,
            templates,
            generation: 0,
            explanations: Vec::new(),
            corrections: Vec::new(),
            sessions: BTreeMap::new(),
            jobs: BTreeMap::new(),
        };
        store.explanations = store.build_generation(0, explanations)?;
        write_json(&dir.join("service.json"), &store.cfg)?;
        save_dataset(&store.base, &dir.join("dataset.json"), DatasetFormat::Json)?;
        write_json(&dir.join("plan.json"), &store.plan)?;
        save_checkpoint(&store.model, &store.cfg.config_hash, &dir.join("checkpoint.json"))?;
        let log = dir.join("corrections.jsonl");
        std::fs::write(&log, "").map_err(|e| Error::io(&log, e))?;
        store.save_explanations()?;
        store.save_sessions()?;
        store.save_jobs()?;
        Ok(store)
    }

    /// Corrupt `clean`, train on the result, and explain its suspects.
    pub fn prepare(dir: &Path, clean: &DatasetSplits, rate: f64, seed: u64, cfg: ServiceConfig) -> Result<Store> {
        let plan = make_corruption_plan(clean, rate, seed)?;
        let base = plan.apply(clean);
        let model = train(&base, &cfg.train)?;
        let templates = load_templates(&cfg, &base.vocab)?;
        let explanations = explain_store(&base, &base, &model, &cfg, &templates)?;
        Store::create(dir, cfg, base, plan, model, &explanations)
    }

    pub fn open(dir: &Path) -> Result<Store> {
        let cfg: ServiceConfig = read_json(&dir.join("service.json"))?;
        let (base, _) = load_dataset(&dir.join("dataset.json"), DatasetFormat::Json)?;
        let plan: CorruptionPlan = read_json(&dir.join("plan.json"))?;
        let (model, _) = load_checkpoint(&dir.join("checkpoint.json"))?;
        let ex: ExplanationFile = read_json(&dir.join("explanations.json"))?;
        let corrections = read_jsonl_values(&dir.join("corrections.jsonl"))?;
        let sessions = read_json(&dir.join("sessions.json"))?;
        let mut jobs: BTreeMap<String, RetrainJob> = read_json(&dir.join("jobs.json"))?;
        let templates = load_templates(&cfg, &base.vocab)?;
        let mut interrupted = false;
        for j in jobs.values_mut() {
            if matches!(j.status, JobStatus::Queued | JobStatus::Running) {
                j.status = JobStatus::Failed;
                j.error = Some("interrupted by a restart".into());
                interrupted = true;
            }
        }
        let store = Store {
            dir: dir.to_path_buf(),
            cfg,
            base,
            plan,
            model,
            templates,
            generation: ex.generation,
            explanations: ex.items,
            corrections,
            sessions,
            jobs,
        };
        if interrupted {
            store.save_jobs()?;
        }
        Ok(store)
    }

    fn build_generation(&self, generation: u32, xs: &[Explanation]) -> Result<Vec<StoredExplanation>> {
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                StoredExplanation::build(
                    format!("g{generation}-{i:04}"),
                    generation,
                    x,
                    &self.model,
                    &self.templates,
                    &self.base.vocab,
                )
            })
            .collect()
    }

    fn save_explanations(&self) -> Result<()> {
        write_json(
            &self.dir.join("explanations.json"),
            &ExplanationFile { generation: self.generation, items: self.explanations.clone() },
        )
    }

    fn save_sessions(&self) -> Result<()> {
        write_json(&self.dir.join("sessions.json"), &self.sessions)
    }

    fn save_jobs(&self) -> Result<()> {
        write_json(&self.dir.join("jobs.json"), &self.jobs)
    }

    fn submitted_ids(&self) -> HashSet<&str> {
        self.sessions
            .values()
            .filter(|s| s.status == SessionStatus::Submitted)
            .flat_map(|s| s.queue.iter().map(String::as_str))
            .collect()
    }

    fn status_of(&self, id: &str) -> ReviewStatus {
        if self.submitted_ids().contains(id) {
            ReviewStatus::Submitted
        } else {
            ReviewStatus::Pending
        }
    }

    fn find(&self, id: &str) -> Option<&StoredExplanation> {
        self.explanations.binary_search_by(|x| x.id.as_str().cmp(id)).ok().map(|i| &self.explanations[i])
    }

    /// Inferences in id order, optionally filtered by status.
    pub fn inferences(&self, status: Option<ReviewStatus>) -> Vec<InferenceSummary> {
        let submitted = self.submitted_ids();
        self.explanations
            .iter()
            .map(|x| {
                let st =
                    if submitted.contains(x.id.as_str()) { ReviewStatus::Submitted } else { ReviewStatus::Pending };
                InferenceSummary {
                    explanation_id: x.id.clone(),
                    query: x.record.query.clone(),
                    predicted: x.record.predicted,
                    text: x.record.text.clone(),
                    status: st,
                }
            })
            .filter(|s| status.is_none_or(|want| s.status == want))
            .collect()
    }

    pub fn explanation(&self, id: &str) -> std::result::Result<ExplanationView, ServiceError> {
        let x = self.find(id).ok_or_else(|| ServiceError::NotFound(format!("no explanation `{id}`")))?;
        Ok(ExplanationView {
            id: x.id.clone(),
            generation: x.generation,
            status: self.status_of(id),
            explanation: x.record.clone(),
            hops: x.views.clone(),
        })
    }

    /// Log a correction. Returns the record and whether it is new; an
    /// identical earlier request returns the earlier record.
    pub fn correct(&mut self, req: &CorrectionRequest) -> std::result::Result<(LoggedCorrection, bool), ServiceError> {
        if req.chosen >= NUM_OPTIONS {
            return Err(ServiceError::Unprocessable(format!("chosen must be below {NUM_OPTIONS}, got {}", req.chosen)));
        }
        let x = self
            .find(&req.explanation_id)
            .ok_or_else(|| ServiceError::NotFound(format!("no explanation `{}`", req.explanation_id)))?;
        let hop = x
            .hops
            .get(req.hop_index)
            .ok_or_else(|| ServiceError::NotFound(format!("explanation `{}` has no hop {}", x.id, req.hop_index)))?
            .clone();
        if let Some(sid) = &req.session_id {
            let s = self.sessions.get(sid).ok_or_else(|| ServiceError::NotFound(format!("no session `{sid}`")))?;
            if s.status == SessionStatus::Submitted {
                return Err(ServiceError::Conflict(format!("session `{sid}` is already submitted")));
            }
        }
        if self.status_of(&req.explanation_id) == ReviewStatus::Submitted {
            return Err(ServiceError::Conflict(format!(
                "explanation `{}` belongs to a submitted session",
                req.explanation_id
            )));
        }
        if let Some(prev) = self.corrections.iter().find(|c| {
            c.record.explanation_id == req.explanation_id
                && c.hop_index == req.hop_index
                && c.record.chosen == req.chosen
        }) {
            return Ok((prev.clone(), false));
        }
        let logged = LoggedCorrection {
            id: format!("c-{:06}", self.corrections.len()),
            hop_index: req.hop_index,
            session_id: req.session_id.clone(),
            record: CorrectionRecord {
                explanation_id: req.explanation_id.clone(),
                hop: hop.fact,
                slot: hop.slot,
                options: hop.options,
                chosen: req.chosen,
                source: CorrectionSource::Human,
                timestamp: now_millis(),
            },
        };
        append_jsonl_value(&self.dir.join("corrections.jsonl"), &logged)?;
        self.corrections.push(logged.clone());
        Ok((logged, true))
    }

    /// Open a session over `queue`, or over every pending inference.
    pub fn create_session(&mut self, queue: Option<Vec<String>>) -> std::result::Result<ReviewSession, ServiceError> {
        let queue = match queue {
            Some(q) => {
                if let Some(bad) = q.iter().find(|id| self.find(id).is_none()) {
                    return Err(ServiceError::NotFound(format!("no explanation `{bad}`")));
                }
                q
            }
            None => self.inferences(Some(ReviewStatus::Pending)).into_iter().map(|s| s.explanation_id).collect(),
        };
        let s = ReviewSession {
            id: format!("s-{:04}", self.sessions.len()),
            queue,
            cursor: 0,
            status: SessionStatus::Open,
        };
        self.sessions.insert(s.id.clone(), s.clone());
        self.save_sessions()?;
        Ok(s)
    }

    pub fn session(&self, id: &str) -> std::result::Result<ReviewSession, ServiceError> {
        self.sessions.get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("no session `{id}`")))
    }

    fn open_session(&mut self, id: &str) -> std::result::Result<&mut ReviewSession, ServiceError> {
        let s = self.sessions.get_mut(id).ok_or_else(|| ServiceError::NotFound(format!("no session `{id}`")))?;
        if s.status == SessionStatus::Submitted {
            return Err(ServiceError::Conflict(format!("session `{id}` is already submitted")));
        }
        Ok(s)
    }

    /// Move the cursor, clamped to the queue length.
    pub fn set_cursor(&mut self, id: &str, cursor: usize) -> std::result::Result<ReviewSession, ServiceError> {
        let s = self.open_session(id)?;
        if cursor > s.queue.len() {
            return Err(ServiceError::Unprocessable(format!("cursor {cursor} beyond queue of {}", s.queue.len())));
        }
        s.cursor = cursor;
        let out = s.clone();
        self.save_sessions()?;
        Ok(out)
    }

    pub fn submit_session(&mut self, id: &str) -> std::result::Result<ReviewSession, ServiceError> {
        let s = self.open_session(id)?;
        s.status = SessionStatus::Submitted;
        s.cursor = s.queue.len();
        let out = s.clone();
        self.save_sessions()?;
        Ok(out)
    }

    /// Queue a retrain unless one is already queued or running.
    pub fn start_job(&mut self) -> std::result::Result<RetrainJob, ServiceError> {
        if let Some(j) = self.jobs.values().find(|j| matches!(j.status, JobStatus::Queued | JobStatus::Running)) {
            return Err(ServiceError::Conflict(
                format!("retrain job `{}` is still {:?}", j.id, j.status).to_lowercase(),
            ));
        }
        let job = RetrainJob {
            id: format!("job-{:04}", self.jobs.len()),
            status: JobStatus::Queued,
            before: None,
            after: None,
            applied_records: 0,
            ignored_records: 0,
            error: None,
        };
        self.jobs.insert(job.id.clone(), job.clone());
        self.save_jobs()?;
        Ok(job)
    }

    pub fn job(&self, id: &str) -> std::result::Result<RetrainJob, ServiceError> {
        self.jobs.get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("no job `{id}`")))
    }

    /// Mark `id` running and snapshot its inputs.
    pub fn begin_job(&mut self, id: &str) -> Result<RetrainInputs> {
        if let Some(j) = self.jobs.get_mut(id) {
            j.status = JobStatus::Running;
        }
        self.save_jobs()?;
        Ok(RetrainInputs {
            cfg: self.cfg.clone(),
            base: self.base.clone(),
            plan: self.plan.clone(),
            model: self.model.clone(),
            records: self.corrections.iter().map(|c| c.record.clone()).collect(),
            templates: self.templates.clone(),
        })
    }

    /// Install a finished retrain: new model, new explanation generation.
    pub fn finish_job(&mut self, id: &str, outcome: Result<RetrainOutcome>) -> Result<()> {
        let mut job = self.jobs.get(id).cloned().ok_or_else(|| Error::InvalidConfig(format!("no job `{id}`")))?;
        match outcome {
            Ok(o) => {
                self.model = o.model;
                self.generation += 1;
                self.explanations = self.build_generation(self.generation, &o.explanations)?;
                save_checkpoint(&self.model, &self.cfg.config_hash, &self.dir.join("checkpoint.json"))?;
                self.save_explanations()?;
                job.status = JobStatus::Done;
                job.before = Some(o.before);
                job.after = Some(o.after);
                job.applied_records = o.applied;
                job.ignored_records = o.ignored;
            }
            Err(e) => {
                job.status = JobStatus::Failed;
                job.error = Some(e.to_string());
            }
        }
        self.jobs.insert(id.to_string(), job);
        self.save_jobs()
    }
}
