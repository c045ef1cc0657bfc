//! The listener: accumulates a known map from local observations, acts on
//! grounded guidance, detects when the guidance has failed and re-queries
//! the translator, and runs whole episodes.
//!
//! Action selection precedence at each step:
//! 1. a committed rule move, or the first rule whose condition holds;
//! 2. the policy cursor's prescribed move;
//! 3. a step toward the goal once it has been seen, otherwise the open
//!    neighbor maximizing `V(n) - rho * visits(n)`.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, GridMap, Observation, Position, SeenCell, DEFAULT_FOV_RADIUS};
use crate::guidance::{
    ground, validate, CompiledGuidance, Condition, GroundingParams, PolicyStep,
};
use crate::lexicon::Lexicon;
use crate::seed::derive_seed;
use crate::translator::{
    compile_checked, keyword_translate, CompileOutcome, CompileRequest, Explanation,
    TranslateError, Translator,
};

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("observation at {position} reports {reported:?} but the cell is known {known:?}")]
    InconsistentObservation {
        position: Position,
        known: SeenCell,
        reported: SeenCell,
    },
    #[error("no legal action at {0}: every neighbor is a known wall")]
    NoLegalAction(Position),
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

/// What the listener has learned so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub position: Position,
    width: usize,
    height: usize,
    known: Vec<SeenCell>,
    visit_counts: Vec<u32>,
    pub steps_taken: usize,
    /// Radius of the most recent observation.
    fov_radius: usize,
}

impl PlannerState {
    /// A listener at `position` that has seen nothing yet.
    pub fn new((width, height): (usize, usize), position: Position) -> Self {
        Self {
            position,
            width,
            height,
            known: vec![SeenCell::Unknown; width * height],
            visit_counts: vec![0; width * height],
            steps_taken: 0,
            fov_radius: DEFAULT_FOV_RADIUS,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn index(&self, p: Position) -> Option<usize> {
        (p.row < self.height && p.col < self.width).then(|| p.row * self.width + p.col)
    }

    /// Known state of `p`; off-map cells read as walls.
    pub fn known(&self, p: Position) -> SeenCell {
        self.index(p).map_or(SeenCell::Wall, |i| self.known[i])
    }

    pub fn visits(&self, p: Position) -> u32 {
        self.index(p).map_or(0, |i| self.visit_counts[i])
    }

    pub fn known_goal(&self) -> Option<Position> {
        let i = self.known.iter().position(|&c| c == SeenCell::Goal)?;
        Some(Position::new(i / self.width, i % self.width))
    }

    pub fn resolved_cells(&self) -> usize {
        self.known.iter().filter(|c| c.is_known()).count()
    }

    /// Row-major known map.
    pub fn known_cells(&self) -> &[SeenCell] {
        &self.known
    }

    /// Whether moving `a` from the current position hits a known wall or
    /// the map edge.
    pub fn blocked(&self, a: Action) -> bool {
        match self.position.offset(a) {
            Some(q) => self.known(q) == SeenCell::Wall,
            None => true,
        }
    }

    /// Merges `obs` into the known map and counts a visit at its center.
    pub fn absorb(&mut self, obs: &Observation) -> Result<(), PlannerError> {
        for (pos, seen) in obs.cells() {
            let Some(i) = pos.and_then(|p| self.index(p)) else {
                continue;
            };
            if !seen.is_known() {
                continue;
            }
            let known = self.known[i];
            if known.is_known() && known != seen {
                return Err(PlannerError::InconsistentObservation {
                    position: pos.expect("indexed"),
                    known,
                    reported: seen,
                });
            }
            self.known[i] = seen;
        }
        self.position = obs.center;
        self.fov_radius = obs.radius;
        if let Some(i) = self.index(obs.center) {
            self.visit_counts[i] += 1;
        }
        Ok(())
    }

    /// Goal is inside the current field of view.
    pub fn sees_goal(&self) -> bool {
        self.known_goal().is_some_and(|g| {
            g.row.abs_diff(self.position.row) <= self.fov_radius
                && g.col.abs_diff(self.position.col) <= self.fov_radius
        })
    }

    /// Render of the known map, `?` for unseen cells and `@` for the listener.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                let p = Position::new(row, col);
                out.push(if p == self.position {
                    '@'
                } else {
                    self.known(p).glyph()
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Folds `observation` into `previous`, or into a fresh state.
pub fn ground_state(
    observation: &Observation,
    previous: Option<PlannerState>,
    dims: (usize, usize),
) -> Result<PlannerState, PlannerError> {
    let mut state = previous.unwrap_or_else(|| PlannerState::new(dims, observation.center));
    state.absorb(observation)?;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeParams {
    pub budget: usize,
    pub fov_radius: usize,
    pub max_replans: u32,
    /// Fail when a cell is visited more than this often under one guidance.
    pub revisit_limit: u32,
    /// Fail after this many steps without value progress.
    pub stall_limit: usize,
    pub rng_seed: u64,
    /// Per-visit penalty in value-greedy selection.
    pub visit_penalty: f64,
    pub grounding: GroundingParams,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        Self {
            budget: 50,
            fov_radius: DEFAULT_FOV_RADIUS,
            max_replans: 3,
            revisit_limit: 3,
            stall_limit: 10,
            rng_seed: 0,
            visit_penalty: 0.5,
            grounding: GroundingParams::default(),
        }
    }
}

impl EpisodeParams {
    /// Defaults with the budget set to `max(50, 4 x shortest path)`.
    pub fn for_map(map: &GridMap) -> Self {
        Self {
            budget: default_budget(map),
            ..Self::default()
        }
    }
}

pub fn default_budget(map: &GridMap) -> usize {
    50.max(4 * map.optimal_length())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    /// Position before the action.
    pub position: Position,
    /// `None` for a direct-actor output that was not an action.
    pub action: Option<Action>,
    pub blocked: bool,
    /// The translator was re-queried right before this step.
    pub replanned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailReason {
    Unusable { message: String },
    Blocked { direction: Action },
    Looping { position: Position, visits: u32 },
    Exhausted,
    Stalled { steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailEvent {
    pub step: usize,
    pub reason: FailReason,
    /// False once replans are used up and the listener fell back.
    pub replanned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub explanation_id: String,
    pub map_id: String,
    pub replans: u32,
    pub length: usize,
    pub success: bool,
    pub trajectory: Vec<TrajectoryStep>,
    pub seed: u64,
    #[serde(default)]
    pub failures: Vec<FailEvent>,
}

/// Guidance as the listener holds it.
#[derive(Debug, Clone)]
pub enum Guidance {
    Usable(Box<CompiledGuidance>),
    Unusable(String),
}

/// Turns a compilation outcome into guidance for `world`.
pub fn prepare_guidance(outcome: &CompileOutcome, world: &GridMap, grounding: &GroundingParams) -> Guidance {
    let program = match outcome {
        CompileOutcome::ParseFailure(msg) => return Guidance::Unusable(msg.clone()),
        CompileOutcome::Program(p) => p,
    };
    if program.is_empty() {
        return Guidance::Unusable("empty program".into());
    }
    let errors: Vec<String> = validate(program, world)
        .into_iter()
        .filter(|d| d.is_error())
        .map(|d| d.message)
        .collect();
    if !errors.is_empty() {
        return Guidance::Unusable(errors.join("; "));
    }
    Guidance::Usable(Box::new(ground(
        program,
        (world.width(), world.height()),
        world.start(),
        grounding,
    )))
}

/// Per-guidance bookkeeping for the loop and stall checks. Reset on every
/// recompilation.
#[derive(Debug, Clone)]
pub struct FailMonitor {
    visits: HashMap<Position, u32>,
    best_value: f64,
    stalled_steps: usize,
}

impl FailMonitor {
    pub fn new(position: Position, guidance: &Guidance) -> Self {
        let best_value = match guidance {
            Guidance::Usable(g) => g.value(position),
            Guidance::Unusable(_) => f64::NEG_INFINITY,
        };
        Self {
            visits: HashMap::from([(position, 1)]),
            best_value,
            stalled_steps: 0,
        }
    }

    /// Records arrival at `position` after a step.
    pub fn arrive(&mut self, position: Position, guidance: &Guidance) {
        *self.visits.entry(position).or_default() += 1;
        if let Guidance::Usable(g) = guidance {
            let v = g.value(position);
            if v > self.best_value + TIE_EPS {
                self.best_value = v;
                self.stalled_steps = 0;
            } else if g.cursor_exhausted() {
                self.stalled_steps += 1;
            }
        }
    }

    pub fn visits(&self, position: Position) -> u32 {
        self.visits.get(&position).copied().unwrap_or(0)
    }
}

/// The rule that would fire at this step, if any, with its action.
fn rule_action(g: &CompiledGuidance, state: &PlannerState) -> Option<(Action, Option<(Action, u32)>)> {
    if let Some((a, n)) = g.pending() {
        if !state.blocked(a) {
            return Some((a, Some((a, n - 1))));
        }
    }
    for rule in g.rules() {
        let holds = match rule.condition {
            Condition::SeeGoal => state.sees_goal(),
            Condition::SeeWall(d) => state.blocked(d),
            Condition::AtRegion(r) => r.contains(state.position),
        };
        if !holds {
            continue;
        }
        match rule.response {
            PolicyStep::Move { direction, count } if !state.blocked(direction) => {
                return Some((direction, Some((direction, count - 1))));
            }
            PolicyStep::Move { .. } => {}
            PolicyStep::Goto(target) => {
                if let Some(a) = step_toward(state, target) {
                    return Some((a, None));
                }
            }
        }
    }
    None
}

/// Checks the current guidance. Consumes the one-shot exhaustion flag.
pub fn fail(guidance: &mut Guidance, state: &PlannerState, monitor: &FailMonitor, params: &EpisodeParams) -> Option<FailReason> {
    let g = match guidance {
        Guidance::Unusable(message) => {
            return Some(FailReason::Unusable {
                message: message.clone(),
            })
        }
        Guidance::Usable(g) => g,
    };
    let just_exhausted = g.take_exhausted();
    let rule_fires = rule_action(g, state).is_some();
    if !rule_fires {
        if let Some(a) = g.prescribed() {
            if state.blocked(a) {
                return Some(FailReason::Blocked { direction: a });
            }
        }
    }
    let visits = monitor.visits(state.position);
    if visits > params.revisit_limit {
        return Some(FailReason::Looping {
            position: state.position,
            visits,
        });
    }
    if just_exhausted && !g.has_value() && state.known(state.position) != SeenCell::Goal {
        return Some(FailReason::Exhausted);
    }
    if g.cursor_exhausted()
        && state.known_goal().is_none()
        && monitor.stalled_steps >= params.stall_limit
    {
        return Some(FailReason::Stalled {
            steps: monitor.stalled_steps,
        });
    }
    None
}

/// BFS over cells not known to be walls; the first canonical action that
/// shortens the distance to `target`.
fn step_toward(state: &PlannerState, target: Position) -> Option<Action> {
    let (w, h) = state.dims();
    if state.index(target).is_none() || state.known(target) == SeenCell::Wall {
        return None;
    }
    let mut dist = vec![usize::MAX; w * h];
    dist[target.row * w + target.col] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(p) = queue.pop_front() {
        if p == state.position {
            break;
        }
        let d = dist[p.row * w + p.col];
        for a in Action::ALL {
            let Some(q) = p.offset(a).filter(|q| q.row < h && q.col < w) else {
                continue;
            };
            let qi = q.row * w + q.col;
            if dist[qi] == usize::MAX && state.known(q) != SeenCell::Wall {
                dist[qi] = d + 1;
                queue.push_back(q);
            }
        }
    }
    let here = dist[state.position.row * w + state.position.col];
    if here == usize::MAX || here == 0 {
        return None;
    }
    Action::ALL.into_iter().find(|&a| {
        state
            .position
            .offset(a)
            .and_then(|q| state.index(q))
            .is_some_and(|qi| dist[qi] == here - 1)
    })
}

/// Rule 3: head for a seen goal, else value-greedy with a visit penalty.
/// `guidance` supplies the value map and tie-breaking prior; `None` means
/// a flat value.
pub fn plan_value(
    guidance: Option<&CompiledGuidance>,
    state: &PlannerState,
    visit_penalty: f64,
) -> Result<Action, PlannerError> {
    if let Some(a) = state.known_goal().and_then(|g| step_toward(state, g)) {
        return Ok(a);
    }
    let here = state.position;
    let mut best: Option<(Action, f64, f64)> = None;
    for a in Action::ALL {
        if state.blocked(a) {
            continue;
        }
        let q = here.offset(a).expect("not blocked");
        let v = guidance.map_or(0.0, |g| g.value(q));
        let score = v - visit_penalty * f64::from(state.visits(q));
        let prior = guidance.map_or(0.25, |g| g.prior(here, a));
        let better = match best {
            None => true,
            Some((_, s, p)) => score > s + TIE_EPS || ((score - s).abs() <= TIE_EPS && prior > p + TIE_EPS),
        };
        if better {
            best = Some((a, score, prior));
        }
    }
    best.map(|(a, _, _)| a)
        .ok_or(PlannerError::NoLegalAction(here))
}

/// Selects the next action and updates the guidance cursor and committed
/// rule moves.
pub fn plan(
    guidance: &mut CompiledGuidance,
    state: &PlannerState,
    params: &EpisodeParams,
) -> Result<Action, PlannerError> {
    if let Some((a, pending)) = rule_action(guidance, state) {
        guidance.set_pending(pending);
        return Ok(a);
    }
    guidance.set_pending(None);
    if let Some(a) = guidance.prescribed() {
        if !state.blocked(a) {
            guidance.advance();
            return Ok(a);
        }
    }
    plan_value(Some(guidance), state, params.visit_penalty)
}

/// Called once per observation with the updated state.
pub type Observer<'a> = dyn FnMut(&PlannerState, &Observation) + 'a;

pub fn run_episode(
    world: &GridMap,
    explanation: &Explanation,
    translator: &dyn Translator,
    params: &EpisodeParams,
) -> Result<Attempt, PlannerError> {
    run_episode_observed(world, explanation, translator, params, &mut |_, _| {})
}

pub fn run_episode_observed(
    world: &GridMap,
    explanation: &Explanation,
    translator: &dyn Translator,
    params: &EpisodeParams,
    observer: &mut Observer<'_>,
) -> Result<Attempt, PlannerError> {
    let dims = (world.width(), world.height());
    let compile = |query: u32| -> Result<Guidance, PlannerError> {
        let request = CompileRequest {
            explanation,
            world,
            seed: derive_seed(params.rng_seed, u64::from(query)),
            query_index: query,
        };
        let record = compile_checked(translator, &request)?;
        Ok(prepare_guidance(&record.program, world, &params.grounding))
    };

    let mut state = PlannerState::new(dims, world.start());
    let mut guidance = compile(0)?;
    let mut monitor = FailMonitor::new(world.start(), &guidance);
    let mut replans = 0u32;
    let mut fallback = false;
    let mut last_grounded = match &guidance {
        Guidance::Usable(g) => Some((**g).clone()),
        Guidance::Unusable(_) => None,
    };
    let mut trajectory = Vec::new();
    let mut failures = Vec::new();
    let mut pos = world.start();
    let mut success = false;

    loop {
        let obs = world.observe_at(pos, params.fov_radius, trajectory.len());
        state.absorb(&obs)?;
        state.steps_taken = trajectory.len();
        observer(&state, &obs);
        if pos == world.goal() {
            success = true;
            break;
        }
        if trajectory.len() >= params.budget {
            break;
        }

        let mut replanned = false;
        while !fallback {
            let Some(reason) = fail(&mut guidance, &state, &monitor, params) else {
                break;
            };
            let will_replan = replans < params.max_replans;
            tracing::debug!(step = trajectory.len(), ?reason, will_replan, "guidance failed");
            failures.push(FailEvent {
                step: trajectory.len(),
                reason,
                replanned: will_replan,
            });
            if !will_replan {
                fallback = true;
                break;
            }
            replans += 1;
            replanned = true;
            guidance = compile(replans)?;
            if let Guidance::Usable(g) = &mut guidance {
                g.relocalize(pos);
                last_grounded = Some((**g).clone());
            }
            monitor = FailMonitor::new(pos, &guidance);
        }

        let action = match (&mut guidance, fallback) {
            (Guidance::Usable(g), false) => plan(g, &state, params)?,
            _ => plan_value(last_grounded.as_ref(), &state, params.visit_penalty)?,
        };
        let next = world.step(pos, action);
        trajectory.push(TrajectoryStep {
            step: trajectory.len(),
            position: pos,
            action: Some(action),
            blocked: next == pos,
            replanned,
        });
        pos = next;
        monitor.arrive(pos, &guidance);
    }

    Ok(Attempt {
        explanation_id: explanation.id.clone(),
        map_id: world.id.clone(),
        replans,
        length: trajectory.len(),
        success,
        trajectory,
        seed: params.rng_seed,
        failures,
    })
}

/// What a direct actor sees before each step.
#[derive(Debug, Clone, Copy)]
pub struct DirectContext<'a> {
    pub explanation: &'a Explanation,
    pub observation: &'a Observation,
    pub history: &'a [TrajectoryStep],
}

/// Emits the next action token straight from text and observation.
pub trait DirectActor {
    fn next_token(&mut self, ctx: &DirectContext<'_>) -> Result<String, TranslateError>;
}

/// Plays back fixed tokens, then emits empty tokens.
#[derive(Debug, Clone)]
pub struct ScriptedActor {
    tokens: Vec<String>,
    next: usize,
}

impl ScriptedActor {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tokens: tokens.into_iter().map(Into::into).collect(),
            next: 0,
        }
    }
}

impl DirectActor for ScriptedActor {
    fn next_token(&mut self, _ctx: &DirectContext<'_>) -> Result<String, TranslateError> {
        let t = self.tokens.get(self.next).cloned().unwrap_or_default();
        self.next += 1;
        Ok(t)
    }
}

/// Replays the shortest start-to-goal path.
pub fn oracle_actor(world: &GridMap) -> ScriptedActor {
    let path = world
        .shortest_path(world.start(), world.goal())
        .expect("valid maps have a reachable goal");
    ScriptedActor::new(path.into_iter().map(Action::token))
}

/// Plays the unit moves of the keyword program's policy, ignoring value
/// regions and rules.
pub fn keyword_actor(lexicon: &Lexicon, text: &str, world: &GridMap) -> ScriptedActor {
    let moves = keyword_translate(lexicon, text, world)
        .map(|p| {
            p.policy_steps
                .into_iter()
                .flat_map(|s| match s {
                    PolicyStep::Move { direction, count } => {
                        std::iter::repeat_n(direction.token(), count as usize)
                    }
                    PolicyStep::Goto(_) => std::iter::repeat_n("", 0),
                })
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    ScriptedActor::new(moves)
}

/// Runs one episode of the direct-action baseline: no program and no
/// replanning. Tokens that are not actions are no-op steps.
pub fn direct_episode(
    world: &GridMap,
    explanation: &Explanation,
    actor: &mut dyn DirectActor,
    params: &EpisodeParams,
) -> Result<Attempt, PlannerError> {
    let mut trajectory: Vec<TrajectoryStep> = Vec::new();
    let mut pos = world.start();
    let mut success = false;
    loop {
        if pos == world.goal() {
            success = true;
            break;
        }
        if trajectory.len() >= params.budget {
            break;
        }
        let obs = world.observe_at(pos, params.fov_radius, trajectory.len());
        let token = actor.next_token(&DirectContext {
            explanation,
            observation: &obs,
            history: &trajectory,
        })?;
        let action = token.trim().parse::<Action>().ok();
        let next = action.map_or(pos, |a| world.step(pos, a));
        trajectory.push(TrajectoryStep {
            step: trajectory.len(),
            position: pos,
            action,
            blocked: action.is_some() && next == pos,
            replanned: false,
        });
        pos = next;
    }
    Ok(Attempt {
        explanation_id: explanation.id.clone(),
        map_id: world.id.clone(),
        replans: 0,
        length: trajectory.len(),
        success,
        trajectory,
        seed: params.rng_seed,
        failures: Vec::new(),
    })
}

/// Writes one JSON record per step.
pub fn write_trajectory<W: Write>(mut out: W, steps: &[TrajectoryStep]) -> std::io::Result<()> {
    for s in steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Vec<TrajectoryStep>, ReplayError> {
    let mut steps = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ReplayError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        steps.push(serde_json::from_str(&line).map_err(|e| ReplayError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(steps)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("reading trajectory: {0}")]
    Io(String),
    #[error("trajectory line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("step {step}: recorded position {recorded} but replay is at {actual}")]
    Diverged {
        step: usize,
        recorded: Position,
        actual: Position,
    },
    #[error("step {step}: recorded blocked={recorded} but replay says {actual}")]
    BlockedMismatch {
        step: usize,
        recorded: bool,
        actual: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub final_position: Position,
    pub length: usize,
    pub success: bool,
    pub blocked_steps: usize,
}

/// Re-executes a recorded trajectory on `world` and checks every step.
pub fn replay(world: &GridMap, steps: &[TrajectoryStep]) -> Result<ReplaySummary, ReplayError> {
    let mut pos = world.start();
    let mut blocked_steps = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.position != pos {
            return Err(ReplayError::Diverged {
                step: i,
                recorded: s.position,
                actual: pos,
            });
        }
        let next = s.action.map_or(pos, |a| world.step(pos, a));
        let blocked = s.action.is_some() && next == pos;
        if blocked != s.blocked {
            return Err(ReplayError::BlockedMismatch {
                step: i,
                recorded: s.blocked,
                actual: blocked,
            });
        }
        blocked_steps += usize::from(blocked);
        pos = next;
    }
    Ok(ReplaySummary {
        final_position: pos,
        length: steps.len(),
        success: pos == world.goal(),
        blocked_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::parse_map;
    use crate::guidance::parse_program;
    use crate::translator::{OracleTranslator, ScriptOrder, ScriptedTranslator};

    const CORRIDOR: &str = "@id corridor5\n#####\n#S..#\n###.#\n#G..#\n#####\n";
    const OPEN_ROOM: &str = "@id open-room\n#####\n#S..#\n#...#\n#..G#\n#####\n";

    fn corridor() -> GridMap {
        parse_map(CORRIDOR).unwrap()
    }

    fn explanation(map: &GridMap) -> Explanation {
        Explanation::new("e", map.id.clone(), "text")
    }

    fn scripted(outputs: &[&str]) -> ScriptedTranslator {
        ScriptedTranslator::new(outputs.iter().map(|s| s.to_string()).collect(), ScriptOrder::ByQuery)
    }

    fn start_state(map: &GridMap) -> PlannerState {
        let obs = map.observe(map.start(), DEFAULT_FOV_RADIUS);
        ground_state(&obs, None, (map.width(), map.height())).unwrap()
    }

    fn grounded(map: &GridMap, text: &str) -> CompiledGuidance {
        ground(
            &parse_program(text).unwrap(),
            (map.width(), map.height()),
            map.start(),
            &GroundingParams::default(),
        )
    }

    #[test]
    fn first_observation_resolves_window() {
        let m = corridor();
        let s = start_state(&m);
        // Window rows -1..=3, cols -1..=3 clipped to the map: 4 x 4 cells.
        assert_eq!(s.resolved_cells(), 16);
        assert_eq!(s.visits(m.start()), 1);
        assert_eq!(s.known(Position::new(3, 1)), SeenCell::Goal);
        assert_eq!(s.known(Position::new(4, 4)), SeenCell::Unknown);
    }

    #[test]
    fn overlapping_observations_union() {
        let m = corridor();
        let a = m.observe(Position::new(1, 1), 1);
        let b = m.observe(Position::new(1, 3), 1);
        let s = ground_state(&a, None, (5, 5)).unwrap();
        let s = ground_state(&b, Some(s), (5, 5)).unwrap();
        assert_eq!(s.resolved_cells(), 15);
        assert_eq!(s.known(Position::new(0, 0)), SeenCell::Wall);
        assert_eq!(s.known(Position::new(2, 4)), SeenCell::Wall);
    }

    #[test]
    fn contradicting_observation_is_rejected() {
        let m = corridor();
        let mut s = start_state(&m);
        let mut obs = m.observe(m.start(), 1);
        obs.window[1][2] = SeenCell::Wall;
        assert!(matches!(
            s.absorb(&obs),
            Err(PlannerError::InconsistentObservation { .. })
        ));
    }

    #[test]
    fn oracle_guidance_starts_right() {
        let m = corridor();
        let s = start_state(&m);
        let mut g = grounded(&m, "POLICY\nMOVE RIGHT 2\nMOVE DOWN 2\nMOVE LEFT 2\n");
        assert_eq!(plan(&mut g, &s, &EpisodeParams::default()).unwrap(), Action::Right);
    }

    #[test]
    fn blocked_prescription_falls_to_value() {
        let m = corridor();
        let s = start_state(&m);
        let mut g = grounded(&m, "POLICY\nMOVE UP 1\n");
        assert_eq!(plan(&mut g, &s, &EpisodeParams::default()).unwrap(), Action::Right);
    }

    #[test]
    fn see_goal_rule_takes_precedence() {
        let m = parse_map(OPEN_ROOM).unwrap();
        let s = start_state(&m);
        assert!(s.sees_goal());
        let mut g = grounded(&m, "POLICY\nMOVE RIGHT 2\nRULES\nIF SEE GOAL THEN MOVE LEFT 1\n");
        // Left is a wall at the start, so the rule is skipped there.
        assert_eq!(plan(&mut g, &s, &EpisodeParams::default()).unwrap(), Action::Right);
        let mut s2 = s.clone();
        s2.absorb(&m.observe(Position::new(1, 2), 2)).unwrap();
        assert_eq!(plan(&mut g, &s2, &EpisodeParams::default()).unwrap(), Action::Left);
    }

    #[test]
    fn rule_count_commits_moves() {
        let m = parse_map(OPEN_ROOM).unwrap();
        let s = start_state(&m);
        let mut g = grounded(&m, "RULES\nIF AT 1 1 1 1 THEN MOVE DOWN 2\n");
        let p = EpisodeParams::default();
        assert_eq!(plan(&mut g, &s, &p).unwrap(), Action::Down);
        assert_eq!(g.pending(), Some((Action::Down, 1)));
        let mut s2 = s.clone();
        s2.absorb(&m.observe(Position::new(2, 1), 2)).unwrap();
        assert_eq!(plan(&mut g, &s2, &p).unwrap(), Action::Down);
        assert_eq!(g.pending(), None);
    }

    #[test]
    fn fail_cases() {
        let m = corridor();
        let s = start_state(&m);
        let p = EpisodeParams::default();
        let mut unusable = Guidance::Unusable("no".into());
        let mon = FailMonitor::new(m.start(), &unusable);
        assert!(matches!(fail(&mut unusable, &s, &mon, &p), Some(FailReason::Unusable { .. })));

        let mut up = Guidance::Usable(Box::new(grounded(&m, "POLICY\nMOVE UP 3\n")));
        let mon = FailMonitor::new(m.start(), &up);
        assert_eq!(
            fail(&mut up, &s, &mon, &p),
            Some(FailReason::Blocked { direction: Action::Up })
        );

        let mut oracle = Guidance::Usable(Box::new(grounded(
            &m,
            "POLICY\nMOVE RIGHT 2\nMOVE DOWN 2\nMOVE LEFT 2\n",
        )));
        let mon = FailMonitor::new(m.start(), &oracle);
        assert_eq!(fail(&mut oracle, &s, &mon, &p), None);
    }

    #[test]
    fn looping_is_detected() {
        let m = corridor();
        let s = start_state(&m);
        let mut g = Guidance::Usable(Box::new(grounded(&m, "VALUE\nREGION 1 1 1 1 10\n")));
        let mut mon = FailMonitor::new(m.start(), &g);
        let p = EpisodeParams::default();
        for _ in 0..3 {
            mon.arrive(m.start(), &g);
        }
        assert!(matches!(fail(&mut g, &s, &mon, &p), Some(FailReason::Looping { visits: 4, .. })));
    }

    #[test]
    fn oracle_episode_on_corridor() {
        let m = corridor();
        let a = run_episode(&m, &explanation(&m), &OracleTranslator, &EpisodeParams::for_map(&m)).unwrap();
        assert!(a.success);
        assert_eq!((a.length, a.replans), (6, 0));
        assert!(a.failures.is_empty());
        let actions: Vec<_> = a.trajectory.iter().map(|s| s.action.unwrap()).collect();
        use Action::*;
        assert_eq!(actions, vec![Right, Right, Down, Down, Left, Left]);
    }

    #[test]
    fn blocked_program_then_oracle() {
        let m = corridor();
        let t = scripted(&["POLICY\nMOVE UP 3\n", "POLICY\nMOVE RIGHT 2\nMOVE DOWN 2\nMOVE LEFT 2\n"]);
        let a = run_episode(&m, &explanation(&m), &t, &EpisodeParams::for_map(&m)).unwrap();
        assert!(a.success);
        assert_eq!(a.replans, 1);
        assert!(a.length <= 8);
        assert!(a.trajectory[0].replanned);
    }

    #[test]
    fn empty_programs_fall_back() {
        let m = corridor();
        let t = scripted(&[""]);
        let params = EpisodeParams {
            budget: 10,
            max_replans: 2,
            ..EpisodeParams::default()
        };
        let a = run_episode(&m, &explanation(&m), &t, &params).unwrap();
        assert_eq!(a.replans, 2);
        // Fallback walks the only open way and heads for the goal once seen.
        assert!(a.success);
        assert_eq!(a.length, 6);
        assert_eq!(a.failures.len(), 3);
        assert!(!a.failures[2].replanned);
    }

    #[test]
    fn truncated_policy_replans_once() {
        let m = corridor();
        let t = scripted(&["POLICY\nMOVE RIGHT 2\nMOVE DOWN 2\n"]);
        let a = run_episode(&m, &explanation(&m), &t, &EpisodeParams::for_map(&m)).unwrap();
        assert!(a.success);
        assert_eq!((a.replans, a.length), (1, 6));
        assert_eq!(a.failures[0].reason, FailReason::Exhausted);
    }

    #[test]
    fn direct_scripted_actor() {
        let m = corridor();
        let mut actor = ScriptedActor::new(["RIGHT", "RIGHT", "DOWN", "DOWN", "LEFT", "LEFT"]);
        let a = direct_episode(&m, &explanation(&m), &mut actor, &EpisodeParams::for_map(&m)).unwrap();
        assert!(a.success);
        assert_eq!((a.length, a.replans), (6, 0));
    }

    #[test]
    fn direct_garbage_is_noop() {
        let m = corridor();
        let mut actor = ScriptedActor::new(std::iter::repeat_n("banana", 100));
        let params = EpisodeParams { budget: 20, ..Default::default() };
        let a = direct_episode(&m, &explanation(&m), &mut actor, &params).unwrap();
        assert!(!a.success);
        assert_eq!(a.length, 20);
        assert!(a.trajectory.iter().all(|s| s.action.is_none() && s.position == m.start()));
    }

    #[test]
    fn direct_oracle_replay_on_open_room() {
        let m = parse_map(OPEN_ROOM).unwrap();
        let mut actor = oracle_actor(&m);
        let a = direct_episode(&m, &explanation(&m), &mut actor, &EpisodeParams::for_map(&m)).unwrap();
        assert!(a.success);
        assert_eq!(a.length, 4);
    }

    #[test]
    fn keyword_actor_expands_counts() {
        let m = corridor();
        let mut actor = keyword_actor(
            &Lexicon::builtin(),
            "go right 2 then down twice then left 2",
            &m,
        );
        let a = direct_episode(&m, &explanation(&m), &mut actor, &EpisodeParams::for_map(&m)).unwrap();
        assert!(a.success);
        assert_eq!(a.length, 6);
    }

    #[test]
    fn trajectory_round_trip_and_replay() {
        let m = corridor();
        let t = scripted(&["POLICY\nMOVE UP 1\nMOVE RIGHT 2\n"]);
        let a = run_episode(&m, &explanation(&m), &t, &EpisodeParams::for_map(&m)).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &a.trajectory).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back, a.trajectory);
        let summary = replay(&m, &back).unwrap();
        assert_eq!(summary.success, a.success);
        assert_eq!(summary.length, a.length);
    }

    #[test]
    fn replay_detects_divergence() {
        let m = corridor();
        let steps = vec![
            TrajectoryStep { step: 0, position: m.start(), action: Some(Action::Right), blocked: false, replanned: false },
            TrajectoryStep { step: 1, position: m.start(), action: Some(Action::Right), blocked: false, replanned: false },
        ];
        assert!(matches!(replay(&m, &steps), Err(ReplayError::Diverged { step: 1, .. })));
    }

    #[test]
    fn budget_default() {
        assert_eq!(default_budget(&corridor()), 50);
    }
}
