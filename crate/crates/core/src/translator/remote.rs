//! Chat-completion backed translator and direct actor.
//!
//! Replies are cached on disk, one JSON file per key. A key is the SHA-256
//! of the prompt, model, temperature and sample slot, so a slot is fetched
//! from the endpoint at most once.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gridworld::{Action, GridMap};
use crate::planner::{DirectActor, DirectContext};

use super::{
    CompileOutcome, CompileRequest, CompilationRecord, Explanation, TranslateError, Translator,
    TranslatorConfig, API_KEY_ENV,
};

/// Replies larger than this are recorded as parse failures.
pub const MAX_REPLY_BYTES: usize = 16 * 1024;

const SYSTEM_PROMPT: &str = "You convert navigation explanations into a guidance program. \
Follow the grammar exactly and use only information stated in the explanation.";

const GRAMMAR: &str = "\
Program := Section+   (sections in any order, each at most once)
Section := 'POLICY' newline PolicyLine+
         | 'VALUE' newline ValueLine+
         | 'RULES' newline RuleLine+
PolicyLine := 'MOVE' Dir Count | 'GOTO' Row Col
ValueLine  := 'REGION' Row0 Col0 Row1 Col1 Value
RuleLine   := 'IF' Cond 'THEN' PolicyLine
Cond := 'SEE GOAL' | 'SEE WALL' Dir | 'AT' Row0 Col0 Row1 Col1
Dir := 'UP' | 'DOWN' | 'LEFT' | 'RIGHT'
Count := positive integer; Row, Col := non-negative integer; Value := number
Rows are numbered from 0 at the top, columns from 0 at the left. Lines starting with # are comments.";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Message {
    role: String,
    content: String,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Blocking chat-completion client with bounded retries.
#[derive(Debug)]
pub struct ChatClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    attempts: u32,
    backoff: Duration,
    in_flight: Semaphore,
}

impl ChatClient {
    pub fn new(config: &TranslatorConfig) -> Result<Self, TranslateError> {
        let endpoint = config
            .endpoint_url
            .clone()
            .ok_or_else(|| TranslateError::Config("endpoint_url is required".into()))?;
        let model = config
            .model_name
            .clone()
            .ok_or_else(|| TranslateError::Config("model_name is required".into()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs.max(1)))
            .build()
            .map_err(|e| TranslateError::Config(format!("http client: {e}")))?;
        Ok(Self {
            http,
            endpoint,
            model,
            api_key: config
                .api_key
                .clone()
                .or_else(|| std::env::var(API_KEY_ENV).ok()),
            temperature: config.temperature,
            attempts: config.retry_attempts.max(1),
            backoff: Duration::from_millis(config.retry_base_ms),
            in_flight: Semaphore::new(config.max_in_flight),
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Sends one system + user exchange and returns the reply content.
    pub fn complete(&self, user: &str, seed: Option<u64>) -> Result<String, TranslateError> {
        let messages = [
            Message {
                role: "system".into(),
                content: SYSTEM_PROMPT.into(),
            },
            Message {
                role: "user".into(),
                content: user.into(),
            },
        ];
        let body = ChatRequest {
            model: &self.model,
            messages: &messages,
            temperature: self.temperature,
            seed,
        };
        let _permit = self.in_flight.acquire();
        let mut last_error = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.send(&body) {
                Ok(content) => return Ok(content),
                Err(e) => {
                    tracing::warn!(attempt = attempt + 1, error = %e, "chat request failed");
                    last_error = e;
                }
            }
        }
        Err(TranslateError::RemoteUnavailable {
            attempts: self.attempts,
            message: last_error,
        })
    }

    fn send(&self, body: &ChatRequest<'_>) -> Result<String, String> {
        let mut req = self.http.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("endpoint returned {status}"));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| format!("malformed reply: {e}"))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| "reply has no choices".to_string())
    }
}

/// On-disk response cache with per-key write exclusion.
#[derive(Debug)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    /// `None` disables persistence; per-key exclusion still applies.
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn key(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn read<T: DeserializeOwned>(path: &Path) -> Option<T> {
        let text = std::fs::read_to_string(path).ok()?;
        match serde_json::from_str(&text) {
            Ok(v) => Some(v),
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "ignoring unreadable cache entry");
                None
            }
        }
    }

    fn write<T: Serialize>(path: &Path, value: &T) -> Result<(), TranslateError> {
        let err = |e: std::io::Error| TranslateError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let dir = path.parent().expect("cache files live in a directory");
        std::fs::create_dir_all(dir).map_err(err)?;
        let json = serde_json::to_vec_pretty(value).expect("cache records serialize");
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, json).map_err(err)?;
        std::fs::rename(&tmp, path).map_err(err)
    }

    /// Returns the cached value for `key`, or computes, stores and returns
    /// it. Concurrent callers for the same key wait for the first.
    pub fn get_or_insert_with<T, F>(&self, key: &str, compute: F) -> Result<T, TranslateError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, TranslateError>,
    {
        let lock = {
            let mut locks = self.locks.lock().expect("cache lock table poisoned");
            locks.entry(key.to_string()).or_default().clone()
        };
        let _guard = lock.lock().expect("cache key lock poisoned");
        let path = self.path(key);
        if let Some(hit) = path.as_deref().and_then(Self::read) {
            return Ok(hit);
        }
        let value = compute()?;
        if let Some(p) = &path {
            Self::write(p, &value)?;
        }
        Ok(value)
    }
}

/// User prompt for compiling `explanation`. The layout is included only
/// when `sees_map` is set.
pub fn build_prompt(explanation: &Explanation, world: &GridMap, sees_map: bool) -> String {
    let start = world.start();
    let mut out = format!(
        "Guidance language grammar:\n{GRAMMAR}\n\n\
         The map has {h} rows and {w} columns. The listener starts at row {r}, column {c}.\n",
        h = world.height(),
        w = world.width(),
        r = start.row,
        c = start.col,
    );
    if sees_map {
        out.push_str("Map layout ('#' wall, '.' floor, 'S' start, 'G' goal):\n");
        for row in 0..world.height() {
            for col in 0..world.width() {
                let p = crate::gridworld::Position::new(row, col);
                out.push(if p == start {
                    'S'
                } else if p == world.goal() {
                    'G'
                } else if world.is_floor(p) {
                    '.'
                } else {
                    '#'
                });
            }
            out.push('\n');
        }
    }
    out.push_str("\nExplanation:\n\"\"\"\n");
    out.push_str(&explanation.text);
    out.push_str("\n\"\"\"\n\nReply with the program inside a single fenced code block.\n");
    out
}

/// Contents of the first ``` fenced block, without the info string.
pub fn extract_fenced_block(reply: &str) -> Option<&str> {
    let open = reply.find("```")?;
    let after = &reply[open + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let close = body.find("```")?;
    Some(&body[..close])
}

/// Translator backed by a chat-completion endpoint.
#[derive(Debug)]
pub struct RemoteTranslator {
    client: ChatClient,
    cache: ResponseCache,
    samples: u32,
    sees_map: bool,
}

impl RemoteTranslator {
    pub fn new(config: &TranslatorConfig) -> Result<Self, TranslateError> {
        Ok(Self {
            client: ChatClient::new(config)?,
            cache: ResponseCache::new(config.cache_dir.clone()),
            samples: config.max_samples.max(1),
            sees_map: config.compiler_sees_map,
        })
    }
}

impl Translator for RemoteTranslator {
    fn compile(&self, request: &CompileRequest<'_>) -> Result<CompilationRecord, TranslateError> {
        let slot = (request.seed % u64::from(self.samples)) as u32;
        let prompt = build_prompt(request.explanation, request.world, self.sees_map);
        let key = ResponseCache::key(&[
            "compile",
            &prompt,
            self.client.model(),
            &self.client.temperature().to_string(),
            &slot.to_string(),
        ]);
        self.cache.get_or_insert_with(&key, || {
            let reply = self.client.complete(&prompt, Some(u64::from(slot)))?;
            let outcome = if reply.len() > MAX_REPLY_BYTES {
                CompileOutcome::ParseFailure(format!(
                    "reply of {} bytes exceeds the {MAX_REPLY_BYTES} byte limit",
                    reply.len()
                ))
            } else {
                match extract_fenced_block(&reply) {
                    Some(block) => CompileOutcome::from_raw(block),
                    None => CompileOutcome::ParseFailure("reply has no fenced code block".into()),
                }
            };
            let mut record = request.record(slot, reply, outcome);
            record.seed = u64::from(slot);
            Ok(record)
        })
    }
}

/// Direct-action baseline actor: asks the endpoint for the next move from
/// the explanation and the current view.
#[derive(Debug)]
pub struct RemoteActor {
    client: Arc<ChatClient>,
    cache: Arc<ResponseCache>,
    slot: u64,
}

impl RemoteActor {
    pub fn new(client: Arc<ChatClient>, cache: Arc<ResponseCache>, slot: u64) -> Self {
        Self {
            client,
            cache,
            slot,
        }
    }

    pub fn prompt(ctx: &DirectContext<'_>) -> String {
        let recent: Vec<&str> = ctx
            .history
            .iter()
            .rev()
            .take(10)
            .rev()
            .map(|s| s.action.map_or("NONE", Action::token))
            .collect();
        format!(
            "You are navigating a grid to find a treasure. You see only the area around you \
             ('@' you, '#' wall, '.' floor, 'G' treasure, '?' unseen).\n\n\
             Your partner's explanation:\n\"\"\"\n{text}\n\"\"\"\n\n\
             Current view:\n{view}\n\
             Steps taken: {steps}. Recent moves: {recent}.\n\n\
             Reply with exactly one word: UP, DOWN, LEFT or RIGHT.\n",
            text = ctx.explanation.text,
            view = ctx.observation.render(),
            steps = ctx.history.len(),
            recent = if recent.is_empty() {
                "none".to_string()
            } else {
                recent.join(" ")
            },
        )
    }
}

impl DirectActor for RemoteActor {
    fn next_token(&mut self, ctx: &DirectContext<'_>) -> Result<String, TranslateError> {
        let prompt = Self::prompt(ctx);
        let key = ResponseCache::key(&[
            "act",
            &prompt,
            self.client.model(),
            &self.client.temperature().to_string(),
            &self.slot.to_string(),
        ]);
        let reply: String = self
            .cache
            .get_or_insert_with(&key, || self.client.complete(&prompt, Some(self.slot)))?;
        Ok(reply
            .split(|c: char| !c.is_ascii_alphabetic())
            .find(|w| !w.is_empty())
            .unwrap_or("")
            .to_string())
    }
}
