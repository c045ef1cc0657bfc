//! Participant sessions: the three task modes, their event logs and the
//! payloads sent to the browser.
//!
//! Navigate payloads are built from the participant's known map only. The
//! full layout is sent in Explain and Rate sessions and nowhere else.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use wayfinder_core::analysis::{read_corpus, CorpusEntry, QualityCondition};
use wayfinder_core::gridworld::{load_map_dir, Action, GridMap, Observation, Position, SeenCell};
use wayfinder_core::planner::{default_budget, PlannerState};

use crate::clock::Clock;
use crate::store::{EventStore, SessionLog};
use crate::ServiceError;

pub const EXPLAIN_INSTRUCTION: &str = "Please send a message to your partner that will help them find the treasure. Remember that your partner can only see the highlighted area \u{2013} they cannot see the whole map.";
pub const RATE_INSTRUCTION: &str =
    "Please evaluate the following messages by rating how helpful they are for finding the treasure";
pub const NAVIGATE_INSTRUCTION: &str = "Find the treasure in as few steps as possible";

pub const MAX_EXPLANATION_CHARS: usize = 2000;
pub const RATING_MIN: f64 = 0.0;
pub const RATING_MAX: f64 = 100.0;
pub const DEFAULT_IDLE_TIMEOUT_MS: u64 = 30 * 60 * 1000;

/// Order in which participants cycle through explanation quality.
const CONDITION_CYCLE: [QualityCondition; 3] =
    [QualityCondition::Good, QualityCondition::Medium, QualityCondition::Bad];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Explain,
    Rate,
    Navigate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub id: String,
    pub mode: Mode,
    pub map_id: String,
    pub explanation_id: Option<String>,
    pub condition: Option<QualityCondition>,
    pub participant: Option<String>,
    pub fov_radius: usize,
    pub budget: usize,
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpiryReason {
    Budget,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    Observed {
        center: Position,
        window: Vec<String>,
        steps_taken: usize,
    },
    Acted {
        action: Action,
        from: Position,
        to: Position,
        blocked: bool,
    },
    Rated {
        score: f64,
    },
    Explained {
        text: String,
    },
    Completed {
        path_length: usize,
    },
    Expired {
        reason: ExpiryReason,
        steps_taken: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapView {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub rows: Vec<String>,
    pub start: Position,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplanationView {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Window {
    pub center: Position,
    pub radius: usize,
    /// `?` marks cells outside the map.
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Payload {
    Explain {
        instruction: &'static str,
        map: MapView,
        fov_radius: usize,
        closed: bool,
    },
    Rate {
        instruction: &'static str,
        map: MapView,
        explanation: ExplanationView,
        scale: RatingScale,
        closed: bool,
    },
    Navigate {
        instruction: &'static str,
        width: usize,
        height: usize,
        fov_radius: usize,
        budget: usize,
        window: Window,
        /// Everything seen so far, `?` for unseen cells.
        revealed: Vec<String>,
        steps_taken: usize,
        done: bool,
        success: bool,
        path_length: Option<usize>,
        explanation: Option<ExplanationView>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Created {
    pub session_id: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ack {
    pub session_id: String,
    pub closed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub pair_id: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct CreateSession {
    pub mode: Option<Mode>,
    pub map_id: String,
    pub explanation_id: Option<String>,
    pub condition: Option<QualityCondition>,
    pub participant: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub maps_dir: PathBuf,
    /// Explanations offered in Rate and Navigate sessions.
    pub corpus: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub fov_radius: usize,
    /// Per-map default when `None`, matching the simulated listener.
    pub budget: Option<usize>,
    pub idle_timeout_ms: u64,
    pub admin_token: Option<String>,
}

impl ServiceConfig {
    pub fn new(maps_dir: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            maps_dir: maps_dir.into(),
            corpus: None,
            data_dir: data_dir.into(),
            static_dir: None,
            fov_radius: wayfinder_core::gridworld::DEFAULT_FOV_RADIUS,
            budget: None,
            idle_timeout_ms: DEFAULT_IDLE_TIMEOUT_MS,
            admin_token: None,
        }
    }
}

struct Navigation {
    state: PlannerState,
    position: Position,
    steps: usize,
    window: Observation,
}

struct Session {
    header: SessionHeader,
    events: Vec<Event>,
    nav: Option<Navigation>,
    closed: bool,
    success: bool,
    last_activity: u64,
    file: Option<File>,
}

impl Session {
    fn new(header: SessionHeader, world: &GridMap) -> Self {
        let nav = (header.mode == Mode::Navigate).then(|| {
            let start = world.start();
            let window = world.observe_at(start, header.fov_radius, 0);
            let mut state = PlannerState::new((world.width(), world.height()), start);
            state.absorb(&window).expect("first observation is consistent");
            Navigation {
                state,
                position: start,
                steps: 0,
                window,
            }
        });
        let last_activity = header.created_at;
        Self {
            header,
            events: Vec::new(),
            nav,
            closed: false,
            success: false,
            last_activity,
            file: None,
        }
    }

    /// Rebuilds in-memory state from a log, re-deriving every move from
    /// the map so that the log and the engine cannot disagree.
    fn replay(log: SessionLog, world: &GridMap) -> Result<Self, ServiceError> {
        let mut s = Session::new(log.header, world);
        for ev in log.events {
            s.apply(&ev, world)?;
            s.last_activity = ev.at;
            s.events.push(ev);
        }
        Ok(s)
    }

    fn apply(&mut self, ev: &Event, world: &GridMap) -> Result<(), ServiceError> {
        match &ev.body {
            EventBody::Acted { action, from, to, .. } => {
                let nav = self.nav.as_mut().ok_or_else(|| corrupt(&self.header, "move outside Navigate"))?;
                let next = world.step(nav.position, *action);
                if nav.position != *from || next != *to {
                    return Err(corrupt(&self.header, "recorded move disagrees with the map"));
                }
                nav.steps += 1;
                nav.position = next;
                nav.window = world.observe_at(next, self.header.fov_radius, nav.steps);
                nav.state
                    .absorb(&nav.window)
                    .map_err(|e| corrupt(&self.header, &e.to_string()))?;
                nav.state.steps_taken = nav.steps;
            }
            EventBody::Completed { .. } => {
                self.closed = true;
                self.success = true;
            }
            EventBody::Rated { .. } | EventBody::Explained { .. } | EventBody::Expired { .. } => {
                self.closed = true;
            }
            EventBody::Observed { .. } => {}
        }
        Ok(())
    }

    fn expired_idle(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e.body, EventBody::Expired { reason: ExpiryReason::Idle, .. }))
    }

    fn window_rows(obs: &Observation) -> Vec<String> {
        obs.window
            .iter()
            .map(|row| row.iter().map(|c| c.glyph()).collect())
            .collect()
    }
}

fn corrupt(header: &SessionHeader, why: &str) -> ServiceError {
    ServiceError::Storage(format!("session {}: {why}", header.id))
}

fn map_view(world: &GridMap) -> MapView {
    MapView {
        id: world.id.clone(),
        width: world.width(),
        height: world.height(),
        rows: world.to_ascii().lines().filter(|l| !l.starts_with('@')).map(String::from).collect(),
        start: world.start(),
    }
}

fn revealed_rows(state: &PlannerState) -> Vec<String> {
    let (w, _) = state.dims();
    state
        .known_cells()
        .chunks(w)
        .map(|row| row.iter().map(|c| c.glyph()).collect())
        .collect()
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn new_session_id() -> Result<String, ServiceError> {
    let mut bytes = [0u8; 16];
    getrandom::fill(&mut bytes).map_err(|e| ServiceError::Storage(format!("entropy source: {e}")))?;
    Ok(hex::encode(bytes))
}

/// The session registry. Calls on different sessions run concurrently;
/// calls on one session are serialized by its lock.
pub struct Sessions {
    maps: BTreeMap<String, GridMap>,
    explanations: Vec<CorpusEntry>,
    store: EventStore,
    clock: Arc<dyn Clock>,
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    /// Counterbalanced Navigate assignments per participant token.
    assignments: Mutex<HashMap<String, usize>>,
}

impl Sessions {
    pub fn open(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let maps: BTreeMap<String, GridMap> = load_map_dir(&config.maps_dir)
            .map_err(|e| ServiceError::Config(e.to_string()))?
            .into_iter()
            .map(|m| (m.id.clone(), m))
            .collect();
        let explanations = match &config.corpus {
            Some(path) => {
                let file = File::open(path)
                    .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
                read_corpus(std::io::BufReader::new(file)).map_err(|e| ServiceError::Config(e.to_string()))?
            }
            None => Vec::new(),
        };
        let store = EventStore::open(&config.data_dir)?;
        let mut sessions = HashMap::new();
        let mut assignments: HashMap<String, usize> = HashMap::new();
        for log in store.read_all()? {
            let Some(world) = maps.get(&log.header.map_id) else {
                tracing::warn!("session {} refers to unknown map {}", log.header.id, log.header.map_id);
                continue;
            };
            let file = store.reopen(&log)?;
            let mut s = Session::replay(log, world)?;
            s.file = Some(file);
            if let (Mode::Navigate, Some(p), Some(c)) = (s.header.mode, &s.header.participant, s.header.condition) {
                if CONDITION_CYCLE.contains(&c) {
                    *assignments.entry(p.clone()).or_default() += 1;
                }
            }
            sessions.insert(s.header.id.clone(), Arc::new(Mutex::new(s)));
        }
        Ok(Self {
            maps,
            explanations,
            store,
            clock,
            config,
            sessions: RwLock::new(sessions),
            assignments: Mutex::new(assignments),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn maps(&self) -> Vec<MapSummary> {
        self.maps
            .values()
            .map(|m| MapSummary {
                id: m.id.clone(),
                width: m.width(),
                height: m.height(),
                pair_id: m.pair_id.clone(),
            })
            .collect()
    }

    fn explanation(&self, map_id: &str, id: &str) -> Result<&CorpusEntry, ServiceError> {
        let mut any = None;
        for e in self.explanations.iter().filter(|e| e.id == id) {
            if e.map_id == map_id {
                return Ok(e);
            }
            any = Some(e);
        }
        match any {
            Some(e) => Err(ServiceError::Conflict(format!(
                "explanation `{id}` belongs to map `{}`",
                e.map_id
            ))),
            None => Err(ServiceError::NotFound(format!("unknown explanation `{id}`"))),
        }
    }

    fn explanation_for(&self, map_id: &str, condition: QualityCondition) -> Option<&CorpusEntry> {
        self.explanations
            .iter()
            .find(|e| e.map_id == map_id && e.condition == Some(condition))
    }

    /// Explanation and condition for a new Navigate session.
    fn assign(&self, req: &CreateSession) -> Result<(Option<String>, Option<QualityCondition>), ServiceError> {
        if let Some(id) = &req.explanation_id {
            let e = self.explanation(&req.map_id, id)?;
            return Ok((Some(e.id.clone()), e.condition));
        }
        if let Some(c) = req.condition {
            if c == QualityCondition::None {
                return Ok((None, Some(c)));
            }
            let e = self.explanation_for(&req.map_id, c).ok_or_else(|| {
                ServiceError::NotFound(format!("no {c:?} explanation for map `{}`", req.map_id))
            })?;
            return Ok((Some(e.id.clone()), Some(c)));
        }
        let conditioned = CONDITION_CYCLE
            .iter()
            .any(|&c| self.explanation_for(&req.map_id, c).is_some());
        match &req.participant {
            Some(p) if conditioned => {
                let mut counts = self.assignments.lock().expect("assignment lock poisoned");
                let n = counts.entry(p.clone()).or_default();
                // Skip conditions this map has no explanation for.
                for k in 0..CONDITION_CYCLE.len() {
                    let c = CONDITION_CYCLE[(*n + k) % CONDITION_CYCLE.len()];
                    if let Some(e) = self.explanation_for(&req.map_id, c) {
                        *n += k + 1;
                        return Ok((Some(e.id.clone()), Some(c)));
                    }
                }
                unreachable!("some condition has an explanation")
            }
            _ => Ok((None, Some(QualityCondition::None))),
        }
    }

    pub fn create(&self, req: CreateSession) -> Result<Created, ServiceError> {
        let mode = req
            .mode
            .ok_or_else(|| ServiceError::Unprocessable("`mode` is required".into()))?;
        let world = self
            .maps
            .get(&req.map_id)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown map `{}`", req.map_id)))?;
        let (explanation_id, condition) = match mode {
            Mode::Explain => {
                if req.explanation_id.is_some() || req.condition.is_some() {
                    return Err(ServiceError::Conflict("Explain sessions take no explanation".into()));
                }
                (None, None)
            }
            Mode::Rate => {
                let id = req.explanation_id.as_deref().ok_or_else(|| {
                    ServiceError::Conflict("Rate sessions need an `explanation_id`".into())
                })?;
                let e = self.explanation(&req.map_id, id)?;
                (Some(e.id.clone()), e.condition)
            }
            Mode::Navigate => self.assign(&req)?,
        };
        let header = SessionHeader {
            id: new_session_id()?,
            mode,
            map_id: req.map_id.clone(),
            explanation_id,
            condition,
            participant: req.participant.clone(),
            fov_radius: self.config.fov_radius,
            budget: self.config.budget.unwrap_or_else(|| default_budget(world)),
            created_at: self.clock.now_ms(),
        };
        let file = self.store.create(&header)?;
        let mut session = Session::new(header, world);
        session.file = Some(file);
        if let Some(nav) = &session.nav {
            let body = EventBody::Observed {
                center: nav.position,
                window: Session::window_rows(&nav.window),
                steps_taken: 0,
            };
            self.append(&mut session, body)?;
        }
        let payload = self.payload(&session);
        let id = session.header.id.clone();
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(Created {
            session_id: id,
            payload,
        })
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session `{id}`")))
    }

    fn append(&self, session: &mut Session, body: EventBody) -> Result<(), ServiceError> {
        let event = Event {
            seq: session.events.len() as u64,
            at: self.clock.now_ms(),
            body,
        };
        let file = session.file.as_mut().expect("live sessions hold their log");
        self.store.append(file, &session.header.id, &event)?;
        let world = &self.maps[&session.header.map_id];
        session.apply(&event, world)?;
        session.last_activity = event.at;
        session.events.push(event);
        Ok(())
    }

    /// Locks a session for a state-changing call, enforcing mode, closure
    /// and the idle timeout.
    fn open_for(&self, id: &str, mode: Mode, what: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        let handle = self.get(id)?;
        {
            let mut s = handle.lock().expect("session lock poisoned");
            if s.header.mode != mode {
                return Err(ServiceError::Conflict(format!(
                    "{what} is not allowed in a {:?} session",
                    s.header.mode
                )));
            }
            if s.closed {
                return Err(ServiceError::Conflict("session is already finished".into()));
            }
            if self.clock.now_ms().saturating_sub(s.last_activity) > self.config.idle_timeout_ms {
                let steps = s.nav.as_ref().map_or(0, |n| n.steps);
                self.append(
                    &mut s,
                    EventBody::Expired {
                        reason: ExpiryReason::Idle,
                        steps_taken: steps,
                    },
                )?;
                return Err(ServiceError::Conflict("session expired after inactivity".into()));
            }
        }
        Ok(handle)
    }

    pub fn act(&self, id: &str, token: &str) -> Result<Payload, ServiceError> {
        let action: Action = token
            .parse()
            .map_err(|e: wayfinder_core::gridworld::UnknownAction| ServiceError::Unprocessable(e.to_string()))?;
        let handle = self.open_for(id, Mode::Navigate, "moving")?;
        let mut s = handle.lock().expect("session lock poisoned");
        if s.closed {
            return Err(ServiceError::Conflict("session is already finished".into()));
        }
        let world = &self.maps[&s.header.map_id];
        let from = s.nav.as_ref().expect("navigate session").position;
        let to = world.step(from, action);
        self.append(
            &mut s,
            EventBody::Acted {
                action,
                from,
                to,
                blocked: from == to,
            },
        )?;
        let nav = s.nav.as_ref().expect("navigate session");
        let observed = EventBody::Observed {
            center: nav.position,
            window: Session::window_rows(&nav.window),
            steps_taken: nav.steps,
        };
        let steps = nav.steps;
        self.append(&mut s, observed)?;
        if to == world.goal() {
            self.append(&mut s, EventBody::Completed { path_length: steps })?;
        } else if steps >= s.header.budget {
            self.append(
                &mut s,
                EventBody::Expired {
                    reason: ExpiryReason::Budget,
                    steps_taken: steps,
                },
            )?;
        }
        Ok(self.payload(&s))
    }

    pub fn rate(&self, id: &str, score: f64) -> Result<Ack, ServiceError> {
        if !(RATING_MIN..=RATING_MAX).contains(&score) {
            return Err(ServiceError::Unprocessable(format!(
                "score must lie in [{RATING_MIN}, {RATING_MAX}]"
            )));
        }
        let handle = self.open_for(id, Mode::Rate, "rating")?;
        let mut s = handle.lock().expect("session lock poisoned");
        if s.closed {
            return Err(ServiceError::Conflict("session is already rated".into()));
        }
        self.append(&mut s, EventBody::Rated { score })?;
        Ok(Ack {
            session_id: id.to_string(),
            closed: true,
            text: None,
        })
    }

    pub fn explain(&self, id: &str, text: &str) -> Result<Ack, ServiceError> {
        let text = normalize_whitespace(text);
        if text.is_empty() {
            return Err(ServiceError::Unprocessable("explanation text is empty".into()));
        }
        let chars = text.chars().count();
        if chars > MAX_EXPLANATION_CHARS {
            return Err(ServiceError::TooLarge(format!(
                "explanation has {chars} characters, limit is {MAX_EXPLANATION_CHARS}"
            )));
        }
        let handle = self.open_for(id, Mode::Explain, "explaining")?;
        let mut s = handle.lock().expect("session lock poisoned");
        if s.closed {
            return Err(ServiceError::Conflict("session is already finished".into()));
        }
        self.append(&mut s, EventBody::Explained { text: text.clone() })?;
        Ok(Ack {
            session_id: id.to_string(),
            closed: true,
            text: Some(text),
        })
    }

    /// Current participant view, for reloading a page mid-session.
    pub fn view(&self, id: &str) -> Result<Payload, ServiceError> {
        let handle = self.get(id)?;
        let s = handle.lock().expect("session lock poisoned");
        Ok(self.payload(&s))
    }

    /// Header and full event log, for operators.
    pub fn log(&self, id: &str) -> Result<(SessionHeader, Vec<Event>), ServiceError> {
        let handle = self.get(id)?;
        let s = handle.lock().expect("session lock poisoned");
        Ok((s.header.clone(), s.events.clone()))
    }

    pub fn check_admin(&self, token: Option<&str>) -> Result<(), ServiceError> {
        match (&self.config.admin_token, token) {
            (None, _) => Err(ServiceError::Forbidden("operator access is disabled".into())),
            (Some(want), Some(got)) if want.as_bytes() == got.as_bytes() => Ok(()),
            _ => Err(ServiceError::Unauthorized),
        }
    }

    fn payload(&self, s: &Session) -> Payload {
        let world = &self.maps[&s.header.map_id];
        let explanation = s.header.explanation_id.as_ref().and_then(|id| {
            self.explanation(&s.header.map_id, id).ok().map(|e| ExplanationView {
                id: e.id.clone(),
                text: e.text.clone(),
            })
        });
        match s.header.mode {
            Mode::Explain => Payload::Explain {
                instruction: EXPLAIN_INSTRUCTION,
                map: map_view(world),
                fov_radius: s.header.fov_radius,
                closed: s.closed,
            },
            Mode::Rate => Payload::Rate {
                instruction: RATE_INSTRUCTION,
                map: map_view(world),
                explanation: explanation.expect("rate sessions have an explanation"),
                scale: RatingScale {
                    min: RATING_MIN,
                    max: RATING_MAX,
                },
                closed: s.closed,
            },
            Mode::Navigate => {
                let nav = s.nav.as_ref().expect("navigate session");
                Payload::Navigate {
                    instruction: NAVIGATE_INSTRUCTION,
                    width: world.width(),
                    height: world.height(),
                    fov_radius: s.header.fov_radius,
                    budget: s.header.budget,
                    window: Window {
                        center: nav.position,
                        radius: nav.window.radius,
                        cells: Session::window_rows(&nav.window),
                    },
                    revealed: revealed_rows(&nav.state),
                    steps_taken: nav.steps,
                    done: s.closed,
                    success: s.success,
                    path_length: s.success.then_some(nav.steps),
                    explanation,
                }
            }
        }
    }

    /// Finished sessions as corpus records, oldest first. Sessions that
    /// timed out while idle are left out.
    pub fn export(&self, mode: Option<Mode>) -> Vec<CorpusEntry> {
        let handles: Vec<Arc<Mutex<Session>>> =
            self.sessions.read().expect("session map poisoned").values().cloned().collect();
        let mut rows: Vec<(u64, CorpusEntry)> = Vec::new();
        for h in handles {
            let s = h.lock().expect("session lock poisoned");
            if !s.closed || s.expired_idle() || mode.is_some_and(|m| m != s.header.mode) {
                continue;
            }
            let explanation_text = s
                .header
                .explanation_id
                .as_ref()
                .and_then(|id| self.explanation(&s.header.map_id, id).ok())
                .map(|e| e.text.clone());
            let mut entry = CorpusEntry::new(s.header.id.clone(), s.header.map_id.clone(), "");
            for ev in &s.events {
                match &ev.body {
                    EventBody::Explained { text } => entry.text = text.clone(),
                    EventBody::Rated { score } => {
                        entry.rating = Some(*score);
                        entry.text = explanation_text.clone().unwrap_or_default();
                        entry.condition = s.header.condition;
                    }
                    EventBody::Completed { path_length }
                    | EventBody::Expired {
                        reason: ExpiryReason::Budget,
                        steps_taken: path_length,
                    } => {
                        entry.path_length = Some(*path_length);
                        entry.text = explanation_text.clone().unwrap_or_default();
                        entry.condition = s.header.condition;
                    }
                    _ => {}
                }
            }
            rows.push((s.header.created_at, entry));
        }
        rows.sort_by(|a, b| (a.0, &a.1.id).cmp(&(b.0, &b.1.id)));
        rows.into_iter().map(|(_, e)| e).collect()
    }

    /// Field-of-view cells a navigate session has revealed so far.
    pub fn known_map(&self, id: &str) -> Result<Option<Vec<SeenCell>>, ServiceError> {
        let handle = self.get(id)?;
        let s = handle.lock().expect("session lock poisoned");
        Ok(s.nav.as_ref().map(|n| n.state.known_cells().to_vec()))
    }
}
