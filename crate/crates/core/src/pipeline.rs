//! Batch runs over a corpus: scoring, ranking and analysis.
//!
//! Every completed evaluation is appended to `evaluations.jsonl` in the
//! output directory. A rerun with the same settings skips keys already in
//! that ledger, and all tables are rebuilt from it sorted by key, so the
//! output does not depend on completion order or worker count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    corpus_stats, failure_table, read_corpus, AnalysisError, CorpusEntry, FailureThresholds,
};
use crate::gridworld::{load_map_dir, GridMap, LoadError};
use crate::guidance::GroundingParams;
use crate::lexicon::Lexicon;
use crate::planner::{
    default_budget, keyword_actor, oracle_actor, write_trajectory, DirectActor, EpisodeParams,
    PlannerError,
};
use crate::scoring::{
    bin_quality, direct_score, evaluate, evaluate_direct, normalize,
    speaker_distribution, utility, EvaluationResult, QualityLabel, ScoringError, SpeakerParams,
    UtilityParams,
};
use crate::translator::{
    build_translator, ChatClient, RemoteActor, ResponseCache, TranslateError, Translator,
    TranslatorConfig, TranslatorKind,
};

pub const LEDGER_FILE: &str = "evaluations.jsonl";
pub const RUN_CONFIG_FILE: &str = "run-config.toml";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Maps(#[from] LoadError),
    #[error(transparent)]
    Corpus(#[from] AnalysisError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

impl PipelineError {
    /// Whether the failure came from an unreachable remote endpoint.
    pub fn is_remote_failure(&self) -> bool {
        matches!(
            self,
            PipelineError::Translate(TranslateError::RemoteUnavailable { .. })
                | PipelineError::Planner(PlannerError::Translate(
                    TranslateError::RemoteUnavailable { .. }
                ))
        )
    }

    /// Whether the failure is a configuration mistake rather than bad data.
    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_) | PipelineError::Translate(TranslateError::Config(_))
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Utility,
    Length,
    Direct,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Utility, Model::Length, Model::Direct];

    pub fn name(self) -> &'static str {
        match self {
            Model::Utility => "utility",
            Model::Length => "length",
            Model::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectActorKind {
    #[default]
    Keyword,
    Oracle,
    Remote,
}

/// Listener settings; `budget = None` uses the per-map default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSettings {
    pub budget: Option<usize>,
    pub fov_radius: usize,
    pub max_replans: u32,
    pub revisit_limit: u32,
    pub stall_limit: usize,
    pub visit_penalty: f64,
    pub epsilon: f64,
    pub kappa: f64,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        let p = EpisodeParams::default();
        Self {
            budget: None,
            fov_radius: p.fov_radius,
            max_replans: p.max_replans,
            revisit_limit: p.revisit_limit,
            stall_limit: p.stall_limit,
            visit_penalty: p.visit_penalty,
            epsilon: p.grounding.epsilon,
            kappa: p.grounding.kappa,
        }
    }
}

impl EpisodeSettings {
    pub fn params_for(&self, map: &GridMap, seed: u64) -> EpisodeParams {
        EpisodeParams {
            budget: self.budget.unwrap_or_else(|| default_budget(map)),
            fov_radius: self.fov_radius,
            max_replans: self.max_replans,
            revisit_limit: self.revisit_limit,
            stall_limit: self.stall_limit,
            rng_seed: seed,
            visit_penalty: self.visit_penalty,
            grounding: GroundingParams {
                epsilon: self.epsilon,
                kappa: self.kappa,
            },
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.budget == Some(0) {
            return bad("episode budget must be at least 1");
        }
        if self.fov_radius == 0 || self.revisit_limit == 0 || self.stall_limit == 0 {
            return bad("fov_radius, revisit_limit and stall_limit must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub maps: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Attempts per (explanation, map).
    pub attempts: usize,
    pub parallelism: usize,
    pub models: Vec<Model>,
    pub direct_actor: DirectActorKind,
    pub write_trajectories: bool,
    pub episode: EpisodeSettings,
    pub utility: UtilityParams,
    pub speaker: SpeakerParams,
    pub translator: TranslatorConfig,
    pub failures: FailureThresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            maps: None,
            corpus: None,
            out: None,
            seed: 0,
            attempts: 10,
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            models: Model::ALL.to_vec(),
            direct_actor: DirectActorKind::Keyword,
            write_trajectories: true,
            episode: EpisodeSettings::default(),
            utility: UtilityParams::default(),
            speaker: SpeakerParams::default(),
            translator: TranslatorConfig::default(),
            failures: FailureThresholds::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.attempts == 0 {
            return Err(PipelineError::Config("attempts must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(PipelineError::Config("parallelism must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(PipelineError::Config("at least one model is required".into()));
        }
        if !(self.speaker.lambda >= 0.0 && self.speaker.lambda.is_finite()) {
            return Err(PipelineError::Config("lambda must be finite and non-negative".into()));
        }
        self.episode.validate()?;
        self.utility.validate()?;
        self.translator.validate()?;
        Ok(())
    }

    fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, PipelineError> {
        field
            .as_deref()
            .ok_or_else(|| PipelineError::Config(format!("missing `{name}` path")))
    }

    /// Settings that change evaluation results. Ledger entries from other
    /// settings are ignored.
    fn fingerprint(&self, lexicon: &Lexicon) -> String {
        #[derive(Serialize)]
        struct Fp<'a> {
            attempts: usize,
            episode: &'a EpisodeSettings,
            translator: TranslatorKind,
            model_name: &'a Option<String>,
            temperature: f64,
            max_samples: u32,
            sees_map: bool,
            script: &'a Option<PathBuf>,
            direct_actor: DirectActorKind,
            lexicon: &'a str,
        }
        let fp = Fp {
            attempts: self.attempts,
            episode: &self.episode,
            translator: self.translator.kind,
            model_name: &self.translator.model_name,
            temperature: self.translator.temperature,
            max_samples: self.translator.max_samples,
            sees_map: self.translator.compiler_sees_map,
            script: &self.translator.script_path,
            direct_actor: self.direct_actor,
            lexicon: lexicon.hash(),
        };
        let json = serde_json::to_string(&fp).expect("fingerprint serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

/// One completed evaluation as stored in the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub explanation_id: String,
    pub map_id: String,
    pub model: Model,
    pub seed: u64,
    pub fingerprint: String,
    pub n: usize,
    pub budget: usize,
    pub replan_mean: f64,
    pub len_min: usize,
    pub succ: f64,
    pub mean_length: f64,
    pub word_count: usize,
}

type Key = (String, String, Model);

impl LedgerRecord {
    fn key(&self) -> Key {
        (self.map_id.clone(), self.explanation_id.clone(), self.model)
    }

    fn from_result(r: &EvaluationResult, model: Model, seed: u64, fp: &str, words: usize) -> Self {
        Self {
            explanation_id: r.explanation_id.clone(),
            map_id: r.map_id.clone(),
            model,
            seed,
            fingerprint: fp.to_string(),
            n: r.n,
            budget: r.budget,
            replan_mean: r.replan_mean,
            len_min: r.len_min,
            succ: r.succ,
            mean_length: r.mean_length,
            word_count: words,
        }
    }

    fn as_result(&self) -> EvaluationResult {
        EvaluationResult {
            explanation_id: self.explanation_id.clone(),
            map_id: self.map_id.clone(),
            n: self.n,
            budget: self.budget,
            attempts: Vec::new(),
            replan_mean: self.replan_mean,
            len_min: self.len_min,
            succ: self.succ,
            mean_length: self.mean_length,
        }
    }

    pub fn raw_score(&self, p: &UtilityParams) -> f64 {
        match self.model {
            Model::Utility => utility(&self.as_result(), p),
            Model::Direct => direct_score(&self.as_result(), p),
            Model::Length => -(self.word_count as f64),
        }
    }
}

/// Reads ledger records, ignoring a torn final line.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRecord>, PipelineError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))?;
    let last = lines.len().saturating_sub(1);
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i == last => tracing::warn!("ignoring torn ledger line {}", i + 1),
            Err(e) => {
                return Err(PipelineError::Config(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// A row of `scores.csv` / `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub map_id: String,
    pub explanation_id: String,
    pub model: Model,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub bin: Option<QualityLabel>,
    pub n: usize,
    pub budget: usize,
    pub replan_mean: Option<f64>,
    pub len_min: Option<usize>,
    pub succ: Option<f64>,
    pub word_count: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub translator: TranslatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub map_id: String,
    pub model: Model,
    pub label: QualityLabel,
    pub selected_explanation_id: String,
    pub members: String,
    pub scores: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRow {
    pub map_id: String,
    pub model: Model,
    pub explanation_id: String,
    pub raw_score: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutput {
    pub rows: Vec<ScoreRow>,
    /// Evaluations run in this invocation.
    pub evaluated: usize,
    /// Evaluations taken from the ledger.
    pub reused: usize,
}

struct Inputs {
    maps: BTreeMap<String, GridMap>,
    entries: Vec<CorpusEntry>,
    lexicon: Lexicon,
    out: PathBuf,
}

fn load_inputs(config: &RunConfig) -> Result<Inputs, PipelineError> {
    config.validate()?;
    let maps_dir = config.require(&config.maps, "maps")?;
    let corpus_path = config.require(&config.corpus, "corpus")?;
    let out = config.require(&config.out, "out")?.to_path_buf();
    let maps: BTreeMap<String, GridMap> = load_map_dir(maps_dir)?
        .into_iter()
        .map(|m| (m.id.clone(), m))
        .collect();
    let file = File::open(corpus_path).map_err(io_err(corpus_path))?;
    let entries = read_corpus(BufReader::new(file))?;
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !maps.contains_key(&e.map_id) {
            return Err(AnalysisError::UnknownMapReference {
                id: e.id.clone(),
                map_id: e.map_id.clone(),
            }
            .into());
        }
        if !seen.insert((&e.map_id, &e.id)) {
            return Err(PipelineError::Config(format!(
                "duplicate explanation `{}` for map `{}`",
                e.id, e.map_id
            )));
        }
    }
    let lexicon = config.translator.lexicon()?;
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    Ok(Inputs {
        maps,
        entries,
        lexicon,
        out,
    })
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

struct DirectFactory {
    kind: DirectActorKind,
    lexicon: Lexicon,
    remote: Option<(Arc<ChatClient>, Arc<ResponseCache>)>,
    samples: u64,
}

impl DirectFactory {
    fn new(config: &RunConfig, lexicon: &Lexicon) -> Result<Self, PipelineError> {
        let remote = if config.direct_actor == DirectActorKind::Remote {
            let cache_dir = config.translator.cache_dir.as_ref().map(|d| d.join("direct"));
            Some((
                Arc::new(ChatClient::new(&config.translator)?),
                Arc::new(ResponseCache::new(cache_dir)),
            ))
        } else {
            None
        };
        Ok(Self {
            kind: config.direct_actor,
            lexicon: lexicon.clone(),
            remote,
            samples: u64::from(config.translator.max_samples.max(1)),
        })
    }

    fn make(&self, map: &GridMap, text: &str, seed: u64) -> Box<dyn DirectActor + Send> {
        match (self.kind, &self.remote) {
            (DirectActorKind::Remote, Some((client, cache))) => Box::new(RemoteActor::new(
                client.clone(),
                cache.clone(),
                seed % self.samples,
            )),
            (DirectActorKind::Oracle, _) => Box::new(oracle_actor(map)),
            _ => Box::new(keyword_actor(&self.lexicon, text, map)),
        }
    }
}

/// Runs (or resumes) all evaluations for `models` and returns the ledger
/// records that match the current settings, sorted by key.
fn ensure_evaluations(
    config: &RunConfig,
    inputs: &Inputs,
    models: &[Model],
) -> Result<(Vec<LedgerRecord>, usize, usize), PipelineError> {
    let fp = config.fingerprint(&inputs.lexicon);
    let ledger_path = inputs.out.join(LEDGER_FILE);
    let mut done: BTreeMap<Key, LedgerRecord> = read_ledger(&ledger_path)?
        .into_iter()
        .filter(|r| r.fingerprint == fp && r.seed == config.seed)
        .map(|r| (r.key(), r))
        .collect();

    let mut todo: Vec<(&CorpusEntry, Model)> = Vec::new();
    for e in &inputs.entries {
        for &m in models {
            if !done.contains_key(&(e.map_id.clone(), e.id.clone(), m)) {
                todo.push((e, m));
            }
        }
    }
    todo.sort_by(|a, b| (&a.0.map_id, &a.0.id, a.1).cmp(&(&b.0.map_id, &b.0.id, b.1)));
    let reused = inputs.entries.len() * models.len() - todo.len();

    let translator: Option<Box<dyn Translator>> = if todo.iter().any(|t| t.1 == Model::Utility) {
        Some(build_translator(&config.translator)?)
    } else {
        None
    };
    let direct = if todo.iter().any(|t| t.1 == Model::Direct) {
        Some(DirectFactory::new(config, &inputs.lexicon)?)
    } else {
        None
    };
    let traj_dir = inputs.out.join("trajectories");
    if config.write_trajectories {
        fs::create_dir_all(&traj_dir).map_err(io_err(&traj_dir))?;
    }
    let ledger = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&ledger_path)
            .map_err(io_err(&ledger_path))?,
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;

    let run_one = |(entry, model): (&CorpusEntry, Model)| -> Result<LedgerRecord, PipelineError> {
        let map = &inputs.maps[&entry.map_id];
        let explanation = entry.explanation();
        let params = config.episode.params_for(map, config.seed);
        let words = explanation.word_count;
        let result = match model {
            Model::Utility => {
                let t = translator.as_deref().expect("built when needed");
                let r = evaluate(&explanation, map, t, &params, config.attempts)?;
                if config.write_trajectories {
                    write_attempts(&traj_dir, &r)?;
                }
                r
            }
            Model::Direct => {
                let f = direct.as_ref().expect("built when needed");
                evaluate_direct(&explanation, map, |s| f.make(map, &entry.text, s), &params, config.attempts)?
            }
            Model::Length => EvaluationResult {
                explanation_id: entry.id.clone(),
                map_id: entry.map_id.clone(),
                n: 0,
                budget: params.budget,
                attempts: Vec::new(),
                replan_mean: 0.0,
                len_min: 0,
                succ: 0.0,
                mean_length: 0.0,
            },
        };
        let record = LedgerRecord::from_result(&result, model, config.seed, &fp, words);
        let mut line = serde_json::to_vec(&record).expect("ledger records serialize");
        line.push(b'\n');
        let mut f = ledger.lock().expect("ledger lock poisoned");
        f.write_all(&line).map_err(io_err(&ledger_path))?;
        f.sync_data().map_err(io_err(&ledger_path))?;
        Ok(record)
    };

    let fresh: Vec<LedgerRecord> =
        pool.install(|| todo.par_iter().map(|&t| run_one(t)).collect::<Result<_, _>>())?;
    let evaluated = fresh.len();
    for r in fresh {
        done.insert(r.key(), r);
    }
    let wanted: BTreeSet<Key> = inputs
        .entries
        .iter()
        .flat_map(|e| models.iter().map(move |&m| (e.map_id.clone(), e.id.clone(), m)))
        .collect();
    let records = done
        .into_iter()
        .filter(|(k, _)| wanted.contains(k))
        .map(|(_, r)| r)
        .collect();
    Ok((records, evaluated, reused))
}

fn write_attempts(dir: &Path, r: &EvaluationResult) -> Result<(), PipelineError> {
    for (i, a) in r.attempts.iter().enumerate() {
        let path = dir.join(format!(
            "{}__{}__{i}.jsonl",
            sanitize(&r.map_id),
            sanitize(&r.explanation_id)
        ));
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        write_trajectory(&mut w, &a.trajectory).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// Raw, normalized and binned scores for every record, sorted by
/// (map, explanation, model).
fn score_rows(config: &RunConfig, records: &[LedgerRecord]) -> Vec<ScoreRow> {
    let u = &config.utility;
    let mut groups: BTreeMap<(&str, Model), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry((&r.map_id, r.model)).or_default().push(i);
    }
    let raw: Vec<f64> = records.iter().map(|r| r.raw_score(u)).collect();
    let mut norm = vec![0.5; records.len()];
    let mut bins: Vec<Option<QualityLabel>> = vec![None; records.len()];
    for ((map_id, _), idx) in &groups {
        let scores: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
        for (&i, v) in idx.iter().zip(normalize(&scores)) {
            norm[i] = v;
        }
        let items: Vec<(String, f64)> = idx
            .iter()
            .map(|&i| (records[i].explanation_id.clone(), norm[i]))
            .collect();
        if let Ok(bs) = bin_quality(map_id, &items) {
            let pos: HashMap<&str, usize> = idx
                .iter()
                .map(|&i| (records[i].explanation_id.as_str(), i))
                .collect();
            for b in bs {
                for m in &b.members {
                    bins[pos[m.as_str()]] = Some(b.label);
                }
            }
        }
    }
    let mut rows: Vec<ScoreRow> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let sim = r.model != Model::Length;
            ScoreRow {
                map_id: r.map_id.clone(),
                explanation_id: r.explanation_id.clone(),
                model: r.model,
                raw_score: raw[i],
                normalized_score: norm[i],
                bin: bins[i],
                n: r.n,
                budget: r.budget,
                replan_mean: (r.model == Model::Utility).then_some(r.replan_mean),
                len_min: sim.then_some(r.len_min),
                succ: sim.then_some(r.succ),
                word_count: r.word_count,
                seed: r.seed,
                alpha: u.alpha,
                beta: u.beta_for(r.budget),
                gamma: u.gamma,
                delta: u.delta,
                lambda: config.speaker.lambda,
                translator: config.translator.kind,
            }
        })
        .collect();
    rows.sort_by(|a, b| (&a.map_id, &a.explanation_id, a.model).cmp(&(&b.map_id, &b.explanation_id, b.model)));
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("rows serialize");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Echoes the effective configuration, minus any API key.
fn write_run_config(config: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    let path = out.join(RUN_CONFIG_FILE);
    let mut echoed = config.clone();
    echoed.translator.api_key = None;
    fs::write(&path, echoed.to_toml()).map_err(io_err(&path))
}

/// Scores every corpus explanation under the configured models and writes
/// `scores.csv`, `scores.jsonl` and `run-config.toml`.
pub fn score(config: &RunConfig) -> Result<ScoreOutput, PipelineError> {
    let inputs = load_inputs(config)?;
    write_run_config(config, &inputs.out)?;
    let (records, evaluated, reused) = ensure_evaluations(config, &inputs, &config.models)?;
    let rows = score_rows(config, &records);
    write_csv(&inputs.out.join("scores.csv"), &rows)?;
    write_jsonl(&inputs.out.join("scores.jsonl"), &rows)?;
    Ok(ScoreOutput {
        rows,
        evaluated,
        reused,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOutput {
    pub bins: Vec<BinRow>,
    pub speaker: Vec<SpeakerRow>,
}

/// Scores, then writes quality bins (`bins.csv`) and the speaker
/// distribution (`speaker.csv`) per map and model. Maps with fewer than
/// three explanations get no bins.
pub fn rank(config: &RunConfig) -> Result<RankOutput, PipelineError> {
    let scored = score(config)?;
    let out = config.require(&config.out, "out")?;
    let mut groups: BTreeMap<(String, Model), Vec<&ScoreRow>> = BTreeMap::new();
    for r in &scored.rows {
        groups.entry((r.map_id.clone(), r.model)).or_default().push(r);
    }
    let mut bins = Vec::new();
    let mut speaker = Vec::new();
    for ((map_id, model), rows) in &groups {
        let items: Vec<(String, f64)> = rows
            .iter()
            .map(|r| (r.explanation_id.clone(), r.normalized_score))
            .collect();
        match bin_quality(map_id, &items) {
            Ok(bs) => bins.extend(bs.into_iter().map(|b| BinRow {
                map_id: map_id.clone(),
                model: *model,
                label: b.label,
                selected_explanation_id: b.selected_explanation_id,
                members: b.members.join(";"),
                scores: b
                    .bin_scores
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
            })),
            Err(e) => tracing::warn!("{e}"),
        }
        let raw: Vec<f64> = rows.iter().map(|r| r.raw_score).collect();
        for (r, p) in rows.iter().zip(speaker_distribution(&raw, &config.speaker)) {
            speaker.push(SpeakerRow {
                map_id: map_id.clone(),
                model: *model,
                explanation_id: r.explanation_id.clone(),
                raw_score: r.raw_score,
                probability: p,
            });
        }
    }
    write_csv(&out.join("bins.csv"), &bins)?;
    write_csv(&out.join("speaker.csv"), &speaker)?;
    Ok(RankOutput { bins, speaker })
}

/// Corpus statistics plus failure categories (from utility-model success
/// rates), written to `analysis.csv`.
pub fn analyze(config: &RunConfig) -> Result<String, PipelineError> {
    let inputs = load_inputs(config)?;
    write_run_config(config, &inputs.out)?;
    let (records, _, _) = ensure_evaluations(config, &inputs, &[Model::Utility])?;
    let maps: Vec<GridMap> = inputs.maps.values().cloned().collect();
    let mut report = corpus_stats(&inputs.entries, &maps, &inputs.lexicon)?;
    let success: HashMap<String, f64> = records
        .iter()
        .map(|r| (r.explanation_id.clone(), r.succ))
        .collect();
    report.failures = failure_table(&inputs.entries, &success, &config.failures, &inputs.lexicon);
    let header = vec![
        ("seed".to_string(), config.seed.to_string()),
        ("attempts".to_string(), config.attempts.to_string()),
        ("translator".to_string(), format!("{:?}", config.translator.kind).to_lowercase()),
        (
            "failure_thresholds".to_string(),
            serde_json::to_string(&config.failures).expect("thresholds serialize"),
        ),
    ];
    let csv = report.to_csv(&header);
    let path = inputs.out.join("analysis.csv");
    fs::write(&path, &csv).map_err(io_err(&path))?;
    Ok(csv)
}
