//! The `kgrecon` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Artifact, RunConfig};
use crate::error::{Error, Result};
use crate::explain::{explain, NamedTriple};
use crate::feedback::{
    apply_corrections, make_corruption_plan, review_items, run_experiment, simulate_corrections, write_curve_csv,
    write_jsonl, CorruptionPlan, SimulatedCorrector, SuspectConfig,
};
use crate::kg::{save_dataset, DatasetFormat, DatasetSplits, KnowledgeGraph, Triple};
use crate::kge::{link_prediction, load_checkpoint, save_checkpoint, train, train_with_history, EmbeddingModel};
use crate::service::{serve, AppState, ServiceConfig, Store};
use crate::sfe::{build_augmented_graph, AugmentedGraph};
use crate::surrogate::{evaluate_fidelity_modes, SurrogateMode, Surrogates};

#[derive(Debug, Parser)]
#[command(name = "kgrecon", version, about = "Explain and correct knowledge graph embedding inferences")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    LocalDt,
    GlobalDt,
    GlobalLr,
}

impl From<ModeArg> for SurrogateMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::LocalDt => SurrogateMode::LocalDt,
            ModeArg::GlobalDt => SurrogateMode::GlobalDt,
            ModeArg::GlobalLr => SurrogateMode::GlobalLr,
        }
    }
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON or TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dataset directory (tsv) or file (json); synthetic household data if unset.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Entity and relation embedding size.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub k_substitution: Option<usize>,
    #[arg(long, global = true)]
    pub max_path_length: Option<usize>,
    #[arg(long, global = true)]
    pub max_depth: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub n_paths: Option<usize>,
    /// Grounding beam width; 0 searches exhaustively.
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    /// Corruption rate.
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Simulated corrector accuracy.
    #[arg(long, global = true)]
    pub accuracy: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic household dataset.
    Generate,
    /// Train an embedding and save a checkpoint.
    Train,
    /// Filtered link-prediction metrics of a checkpoint.
    LinkPredict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Explain one triple, given as "head relation tail".
    Explain {
        #[arg(long)]
        triple: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Five-fold F1 agreement of surrogate models with the embedding.
    EvaluateFidelity {
        #[arg(long, value_enum)]
        mode: Vec<ModeArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Corrupt a share of each relation's training facts.
    Corrupt,
    /// Answer the review of every planned corruption with a simulated corrector.
    SimulateCorrections {
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Model trained on the corrupted data; trained on the fly if absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the corrected dataset.
        #[arg(long)]
        apply: bool,
    },
    /// Corrupt, train, correct, retrain, and compare, over several seeds.
    RunExperiment,
    /// Run the review service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// State directory; `<out>/service` by default.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Create the store (corrupt, train, explain) when the state directory is empty.
        #[arg(long)]
        init: bool,
        /// Static review UI to serve at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        c.set_seed(s);
    }
    if let Some(v) = &common.out {
        c.out = v.clone();
    }
    if let Some(v) = &common.dataset {
        c.dataset = Some(v.clone());
    }
    if let Some(f) = common.format {
        c.format = match f {
            FormatArg::Tsv => DatasetFormat::Tsv,
            FormatArg::Json => DatasetFormat::Json,
        };
    }
    if let Some(v) = common.epochs {
        c.train.epochs = v;
    }
    if let Some(v) = common.dim {
        c.train.entity_dim = v;
        c.train.relation_dim = v;
    }
    if let Some(v) = common.lr {
        c.train.learning_rate = v;
    }
    if let Some(v) = common.k_substitution {
        c.k_substitution = v;
        c.experiment.k_substitution = v;
    }
    if let Some(v) = common.max_path_length {
        c.surrogate.max_path_length = v;
        c.experiment.surrogate.max_path_length = v;
    }
    if let Some(v) = common.max_depth {
        c.surrogate.tree.max_depth = v;
        c.experiment.surrogate.tree.max_depth = v;
    }
    if let Some(v) = &common.k_grid {
        c.surrogate.k_grid = v.clone();
        c.experiment.surrogate.k_grid = v.clone();
    }
    if let Some(v) = common.n_paths {
        c.explain.n_paths = v;
        c.experiment.explain.n_paths = v;
    }
    if let Some(v) = common.beam {
        let beam = (v > 0).then_some(v);
        c.explain.grounding.beam = beam;
        c.experiment.explain.grounding.beam = beam;
    }
    if let Some(v) = &common.templates {
        c.templates = Some(v.clone());
    }
    if let Some(v) = common.rate {
        c.experiment.corruption_rate = v;
    }
    if let Some(v) = common.accuracy {
        c.experiment.accuracy = v;
    }
    if let Some(v) = &common.seeds {
        c.experiment.seeds = v.clone();
    }
    c.validate()?;
    Ok(c)
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn model_from(cfg: &RunConfig, checkpoint: Option<&PathBuf>) -> Result<EmbeddingModel> {
    let path = checkpoint.cloned().unwrap_or_else(|| cfg.out.join("checkpoint.json"));
    if !path.is_file() {
        return Err(Error::Checkpoint(format!("{} not found; run `kgrecon train` first", path.display())));
    }
    Ok(load_checkpoint(&path)?.0)
}

fn augmented(cfg: &RunConfig, d: &DatasetSplits, m: &EmbeddingModel) -> AugmentedGraph {
    build_augmented_graph(&KnowledgeGraph::from_splits(d), m, cfg.k_substitution, cfg.substitution)
}

fn emit<T: serde::Serialize>(cfg: &RunConfig, hash: &str, kind: &str, file: &str, data: T) -> Result<Value> {
    let a = Artifact::new(kind, hash, data);
    a.write(&cfg.out.join(file))?;
    Ok(serde_json::to_value(a)?)
}

/// Run one parsed command; the returned JSON goes to stdout.
pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = resolve_config(&cli.common)?;
    let hash = cfg.hash();
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    cfg.save(&cfg.out.join("config.json"))?;
    match &cli.command {
        Command::Generate => {
            let d = crate::synth::household(&cfg.synthetic);
            let dir = cfg.out.join("dataset");
            save_dataset(&d, &dir, DatasetFormat::Tsv)?;
            emit(
                &cfg,
                &hash,
                "dataset",
                "dataset.json",
                json!({
                    "path": dir,
                    "entities": d.num_entities(),
                    "relations": d.num_relations(),
                    "train": d.train.len(),
                    "valid": d.valid.len(),
                    "test": d.test.len(),
                }),
            )
        }
        Command::Train => {
            let d = cfg.load_dataset()?;
            let (m, history) = train_with_history(&d, &cfg.train)?;
            let path = cfg.out.join("checkpoint.json");
            save_checkpoint(&m, &hash, &path)?;
            let report = link_prediction(&m, &d)?;
            emit(
                &cfg,
                &hash,
                "train",
                "train_report.json",
                json!({
                    "checkpoint": path,
                    "checkpoint_sha256": file_sha256(&path)?,
                    "epoch_losses": history.epoch_losses,
                    "link_prediction": report,
                }),
            )
        }
        Command::LinkPredict { checkpoint } => {
            let d = cfg.load_dataset()?;
            let m = model_from(&cfg, checkpoint.as_ref())?;
            emit(&cfg, &hash, "link_prediction", "link_prediction.json", link_prediction(&m, &d)?)
        }
        Command::Explain { triple, checkpoint } => {
            let d = cfg.load_dataset()?;
            let m = model_from(&cfg, checkpoint.as_ref())?;
            let q = d.vocab.parse_triple(triple)?;
            let templates = cfg.templates(&d.vocab)?;
            templates.check_covers(&d.vocab)?;
            let g = augmented(&cfg, &d, &m);
            let s = Surrogates::new(&m, &g, cfg.surrogate.clone());
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.surrogate.seed);
            let pool = s.build_pool(q.relation, &[q].into_iter().collect(), &mut rng);
            let local = s.fit_local(&q, &pool)?;
            let row = s.row(&pool, &q);
            let x = explain(&q, &m, &local, &row, &g, &templates, &cfg.explain)?;
            emit(&cfg, &hash, "explanation", "explanation.json", x.record(&d.vocab))
        }
        Command::EvaluateFidelity { mode, checkpoint } => {
            let d = cfg.load_dataset()?;
            let m = model_from(&cfg, checkpoint.as_ref())?;
            let modes: Vec<SurrogateMode> =
                if mode.is_empty() { cfg.modes.clone() } else { mode.iter().map(|&x| x.into()).collect() };
            let g = augmented(&cfg, &d, &m);
            emit(&cfg, &hash, "fidelity", "fidelity.json", evaluate_fidelity_modes(&modes, &d, &m, &g, &cfg.surrogate)?)
        }
        Command::Corrupt => {
            let d = cfg.load_dataset()?;
            let plan = make_corruption_plan(&d, cfg.experiment.corruption_rate, cfg.seed)?;
            let path = cfg.out.join("corrupted.json");
            save_dataset(&plan.apply(&d), &path, DatasetFormat::Json)?;
            emit(&cfg, &hash, "corruption_plan", "plan.json", plan_json(&plan, &d))
        }
        Command::SimulateCorrections { plan, checkpoint, apply } => {
            let d = cfg.load_dataset()?;
            let plan_path = plan.clone().unwrap_or_else(|| cfg.out.join("plan.json"));
            let plan = read_plan(&plan_path)?;
            let corrupted = plan.apply(&d);
            let m = match checkpoint {
                Some(p) => load_checkpoint(p)?.0,
                None => train(&corrupted, &cfg.train)?,
            };
            let items = review_items(&plan, &m)?;
            let corrector = SimulatedCorrector::new(cfg.experiment.accuracy, cfg.seed)?;
            let records = simulate_corrections(&items, &corrector);
            write_jsonl(&cfg.out.join("corrections.jsonl"), &records)?;
            let restored = records
                .iter()
                .zip(&items)
                .filter(|(r, (_, e, _))| r.options[r.chosen] == crate::feedback::CorrectionOption::Fact(e.original))
                .count();
            if *apply {
                let fixed = apply_corrections(&corrupted, &plan, &records, cfg.experiment.wrong_choice_mode)?;
                save_dataset(&fixed, &cfg.out.join("corrected.json"), DatasetFormat::Json)?;
            }
            emit(
                &cfg,
                &hash,
                "corrections",
                "corrections_summary.json",
                json!({
                    "records": records.len(),
                    "restored": restored,
                    "accuracy": cfg.experiment.accuracy,
                    "log": cfg.out.join("corrections.jsonl"),
                }),
            )
        }
        Command::RunExperiment => {
            let d = cfg.load_dataset()?;
            let report = run_experiment(&d, &cfg.experiment)?;
            write_curve_csv(&report, &cfg.out.join("curve.csv"))?;
            emit(&cfg, &hash, "experiment", "experiment.json", report)
        }
        Command::Serve { port, host, state, init, ui } => {
            let dir = state.clone().unwrap_or_else(|| cfg.out.join("service"));
            if *init && !Store::exists(&dir) {
                let d = cfg.load_dataset()?;
                let scfg = ServiceConfig {
                    train: cfg.train.clone(),
                    k_substitution: cfg.k_substitution,
                    substitution: cfg.substitution,
                    suspects: SuspectConfig {
                        max_explanations: cfg.review_explanations,
                        seed: cfg.seed,
                        surrogate: cfg.surrogate.clone(),
                        explain: cfg.explain,
                    },
                    templates: cfg.templates.clone(),
                    config_hash: hash.clone(),
                };
                Store::prepare(&dir, &d, cfg.experiment.corruption_rate, cfg.seed, scfg)?;
            }
            let addr: std::net::SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad address {host}:{port}: {e}")))?;
            let st = AppState::open(&dir)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(&dir, e))?;
            rt.block_on(serve(st, addr, ui.clone()))?;
            Ok(json!({ "stopped": true }))
        }
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PlanFile {
    plan: CorruptionPlan,
    /// Readable form of the same entries.
    entries: Vec<(NamedTriple, NamedTriple)>,
}

fn plan_json(plan: &CorruptionPlan, d: &DatasetSplits) -> PlanFile {
    let entries = plan
        .entries()
        .map(|e| (NamedTriple::new(&e.original, &d.vocab), NamedTriple::new(&e.corrupted, &d.vocab)))
        .collect();
    PlanFile { plan: plan.clone(), entries }
}

fn read_plan(path: &Path) -> Result<CorruptionPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let a: Artifact<PlanFile> = serde_json::from_str(&text)?;
    Ok(a.data.plan)
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parse the process arguments and run. Usage errors exit with 2, failures with 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    match run(&cli) {
        Ok(v) => {
            use std::io::Write;
            // A closed pipe (`| head`) is not a failure of the command.
            let _ = writeln!(
                std::io::stdout().lock(),
                "{}",
                serde_json::to_string_pretty(&v).expect("json values serialize")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Parse a "head relation tail" string against `d`.
pub fn parse_query(d: &DatasetSplits, text: &str) -> Result<Triple> {
    d.vocab.parse_triple(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("kgrecon").chain(args.iter().copied()))
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        let e = parse(&["frobnicate"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(parse(&[]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.toml");
        std::fs::write(&file, "k_substitution = 3\nseed = 5\n[train]\nepochs = 9\nentity_dim = 6\nrelation_dim = 6\n")
            .unwrap();
        let f = file.to_str().unwrap();
        let cli = parse(&["--config", f, "--epochs", "4", "train"]).unwrap();
        let c = resolve_config(&cli.common).unwrap();
        assert_eq!(c.train.epochs, 4);
        assert_eq!(c.k_substitution, 3);
        assert_eq!(c.seed, 5);
        assert_eq!(c.train.entity_dim, 6);
        let cli = parse(&["train", "--seed", "8", "--beam", "0", "--k-grid", "4,8"]).unwrap();
        let c = resolve_config(&cli.common).unwrap();
        assert_eq!((c.seed, c.train.seed), (8, 8));
        assert_eq!(c.explain.grounding.beam, None);
        assert_eq!(c.surrogate.k_grid, vec![4, 8]);
        let cli = parse(&["--accuracy", "1.5", "run-experiment"]).unwrap();
        assert!(resolve_config(&cli.common).is_err());
    }

    #[test]
    fn subcommands_parse() {
        assert!(matches!(parse(&["explain", "--triple", "a r b"]).unwrap().command, Command::Explain { .. }));
        assert!(matches!(
            parse(&["evaluate-fidelity", "--mode", "local-dt", "--mode", "global-lr"]).unwrap().command,
            Command::EvaluateFidelity { ref mode, .. } if mode.len() == 2
        ));
        assert!(matches!(
            parse(&["simulate-corrections", "--accuracy", "0.5"]).unwrap().command,
            Command::SimulateCorrections { .. }
        ));
        assert!(matches!(parse(&["serve", "--port", "9000"]).unwrap().command, Command::Serve { port: 9000, .. }));
        for c in ["train", "link-predict", "corrupt", "run-experiment", "generate"] {
            parse(&[c]).unwrap();
        }
    }
}
