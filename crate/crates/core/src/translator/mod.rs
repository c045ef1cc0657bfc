//! Explanation-to-program compilers.
//!
//! A [`Translator`] is a (possibly stochastic) map from an explanation and a
//! world to a guidance program. Repeated queries with different seeds sample
//! the compilation distribution; a record holding a parse failure is a
//! normal result that the listener treats as unusable guidance.

mod keyword;
mod remote;

pub use keyword::{keyword_translate, region_for, KeywordTranslator};
pub use remote::{
    build_prompt, extract_fenced_block, ChatClient, RemoteActor, RemoteTranslator, ResponseCache,
    MAX_REPLY_BYTES,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, GridMap};
use crate::guidance::{parse_program, GuidanceProgram, PolicyStep, Region, ValueAnnotation};
use crate::lexicon::Lexicon;

/// Environment variable holding the chat-completion API key.
pub const API_KEY_ENV: &str = "WAYFINDER_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub map_id: String,
    pub text: String,
    pub word_count: usize,
}

impl Explanation {
    pub fn new(id: impl Into<String>, map_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            map_id: map_id.into(),
            word_count: word_count(&text),
            text,
        }
    }
}

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("remote translator unavailable after {attempts} attempt(s): {message}")]
    RemoteUnavailable { attempts: u32, message: String },
    #[error("explanation {explanation} is for map `{expected}`, not `{actual}`")]
    MapMismatch {
        explanation: String,
        expected: String,
        actual: String,
    },
    #[error("translator configuration: {0}")]
    Config(String),
    #[error("compilation cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslatorKind {
    Oracle,
    Keyword,
    Remote,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorConfig {
    pub kind: TranslatorKind,
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    /// Falls back to `WAYFINDER_API_KEY`.
    pub api_key: Option<String>,
    pub temperature: f64,
    /// Number of distinct compilation samples per (explanation, map).
    pub max_samples: u32,
    pub cache_dir: Option<PathBuf>,
    pub compiler_sees_map: bool,
    pub max_in_flight: usize,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    pub request_timeout_secs: u64,
    /// Scripted translator fixture.
    pub script_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self {
            kind: TranslatorKind::Keyword,
            endpoint_url: None,
            model_name: None,
            api_key: None,
            temperature: 0.7,
            max_samples: 5,
            cache_dir: None,
            compiler_sees_map: false,
            max_in_flight: 4,
            retry_attempts: 3,
            retry_base_ms: 1000,
            request_timeout_secs: 60,
            script_path: None,
            lexicon_path: None,
        }
    }
}

impl TranslatorConfig {
    pub fn validate(&self) -> Result<(), TranslateError> {
        if self.max_samples == 0 {
            return Err(TranslateError::Config("max_samples must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(TranslateError::Config("temperature must be finite and >= 0".into()));
        }
        match self.kind {
            TranslatorKind::Remote if self.endpoint_url.is_none() || self.model_name.is_none() => {
                Err(TranslateError::Config(
                    "remote translator needs endpoint_url and model_name".into(),
                ))
            }
            TranslatorKind::Scripted if self.script_path.is_none() => Err(TranslateError::Config(
                "scripted translator needs script_path".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon, TranslateError> {
        match &self.lexicon_path {
            Some(p) => Lexicon::load(p).map_err(|e| TranslateError::Config(e.to_string())),
            None => Ok(Lexicon::builtin()),
        }
    }
}

/// Either a parsed program or the reason the raw output was unusable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileOutcome {
    Program(GuidanceProgram),
    ParseFailure(String),
}

impl CompileOutcome {
    pub fn from_raw(raw: &str) -> Self {
        match parse_program(raw) {
            Ok(p) => CompileOutcome::Program(p),
            Err(e) => CompileOutcome::ParseFailure(e.to_string()),
        }
    }

    pub fn program(&self) -> Option<&GuidanceProgram> {
        match self {
            CompileOutcome::Program(p) => Some(p),
            CompileOutcome::ParseFailure(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilationRecord {
    pub explanation_id: String,
    pub map_id: String,
    pub sample_index: u32,
    pub raw_output: String,
    pub program: CompileOutcome,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct CompileRequest<'a> {
    pub explanation: &'a Explanation,
    pub world: &'a GridMap,
    pub seed: u64,
    /// Zero for the first compilation of an attempt, then one per re-query.
    pub query_index: u32,
}

impl CompileRequest<'_> {
    fn check_map(&self) -> Result<(), TranslateError> {
        if self.explanation.map_id != self.world.id {
            return Err(TranslateError::MapMismatch {
                explanation: self.explanation.id.clone(),
                expected: self.explanation.map_id.clone(),
                actual: self.world.id.clone(),
            });
        }
        Ok(())
    }

    fn record(&self, sample_index: u32, raw_output: String, program: CompileOutcome) -> CompilationRecord {
        CompilationRecord {
            explanation_id: self.explanation.id.clone(),
            map_id: self.world.id.clone(),
            sample_index,
            raw_output,
            program,
            seed: self.seed,
        }
    }
}

pub trait Translator: Send + Sync {
    fn compile(&self, request: &CompileRequest<'_>) -> Result<CompilationRecord, TranslateError>;
}

/// Shortest start-to-goal route as maximal same-direction runs, plus a
/// value region on the goal cell.
pub fn oracle_translate(world: &GridMap) -> GuidanceProgram {
    let path = world
        .shortest_path(world.start(), world.goal())
        .expect("valid maps have a reachable goal");
    let policy_steps = compress_runs(&path);
    let program = GuidanceProgram {
        policy_steps,
        value_annotations: vec![ValueAnnotation {
            region: Region::cell(world.goal()),
            value: crate::guidance::GOTO_VALUE,
        }],
        rules: Vec::new(),
        source_text: String::new(),
    };
    GuidanceProgram {
        source_text: program.serialize(),
        ..program
    }
}

/// Collapses consecutive equal actions into `MOVE` steps.
pub fn compress_runs(actions: &[Action]) -> Vec<PolicyStep> {
    let mut steps: Vec<PolicyStep> = Vec::new();
    for &a in actions {
        match steps.last_mut() {
            Some(PolicyStep::Move { direction, count }) if *direction == a => *count += 1,
            _ => steps.push(PolicyStep::Move {
                direction: a,
                count: 1,
            }),
        }
    }
    steps
}

/// Ground-truth translator: ignores the explanation and emits the optimal
/// route. Used as the utility upper bound.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleTranslator;

impl Translator for OracleTranslator {
    fn compile(&self, request: &CompileRequest<'_>) -> Result<CompilationRecord, TranslateError> {
        let program = oracle_translate(request.world);
        Ok(request.record(0, program.serialize(), CompileOutcome::Program(program)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScriptOrder {
    /// `outputs[query_index mod len]`: forces an exact re-query sequence
    /// within every attempt.
    #[default]
    ByQuery,
    /// `outputs[seed mod len]`.
    BySeed,
}

/// Replays canned raw outputs verbatim.
#[derive(Debug, Clone)]
pub struct ScriptedTranslator {
    outputs: Vec<String>,
    order: ScriptOrder,
}

impl ScriptedTranslator {
    pub fn new(outputs: Vec<String>, order: ScriptOrder) -> Self {
        assert!(!outputs.is_empty(), "scripted translator needs at least one output");
        Self { outputs, order }
    }

    /// Fixture format: raw outputs separated by lines containing only `---`.
    pub fn parse_fixture(text: &str) -> Vec<String> {
        let mut outputs = vec![String::new()];
        for line in text.lines() {
            if line.trim_end() == "---" {
                outputs.push(String::new());
            } else {
                let cur = outputs.last_mut().expect("non-empty");
                cur.push_str(line);
                cur.push('\n');
            }
        }
        outputs
    }

    pub fn load(path: &Path, order: ScriptOrder) -> Result<Self, TranslateError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            TranslateError::Config(format!("reading script {}: {e}", path.display()))
        })?;
        Ok(Self::new(Self::parse_fixture(&text), order))
    }
}

impl Translator for ScriptedTranslator {
    fn compile(&self, request: &CompileRequest<'_>) -> Result<CompilationRecord, TranslateError> {
        let n = self.outputs.len() as u64;
        let idx = match self.order {
            ScriptOrder::ByQuery => u64::from(request.query_index) % n,
            ScriptOrder::BySeed => request.seed % n,
        } as usize;
        let raw = self.outputs[idx].clone();
        let outcome = CompileOutcome::from_raw(&raw);
        Ok(request.record(idx as u32, raw, outcome))
    }
}

/// Builds the translator described by `config`.
pub fn build_translator(config: &TranslatorConfig) -> Result<Box<dyn Translator>, TranslateError> {
    config.validate()?;
    Ok(match config.kind {
        TranslatorKind::Oracle => Box::new(OracleTranslator),
        TranslatorKind::Keyword => Box::new(KeywordTranslator::new(config.lexicon()?)),
        TranslatorKind::Scripted => Box::new(ScriptedTranslator::load(
            config.script_path.as_deref().expect("validated"),
            ScriptOrder::ByQuery,
        )?),
        TranslatorKind::Remote => Box::new(RemoteTranslator::new(config)?),
    })
}

/// Map-checked compile used by the listener.
pub(crate) fn compile_checked(
    translator: &dyn Translator,
    request: &CompileRequest<'_>,
) -> Result<CompilationRecord, TranslateError> {
    request.check_map()?;
    translator.compile(request)
}
