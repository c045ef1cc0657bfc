use serde::{Deserialize, Serialize};

use super::{ConditionalRule, GuidanceProgram, PolicyStep};
use crate::gridworld::{Action, Position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingParams {
    /// Weight of the uniform distribution mixed into the prescribed action
    /// on the intended route: the prescribed action gets `1 - eps + eps/4`,
    /// every other action `eps/4`. Must lie in `(0, 1)`.
    pub epsilon: f64,
    /// Value lost per step of Manhattan distance from an annotated region.
    pub kappa: f64,
}

impl Default for GroundingParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            kappa: 1.0,
        }
    }
}

/// Program counter over the expanded unit moves of the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cursor {
    index: usize,
    /// Set by the advance that consumed the last move; cleared by `take_exhausted`.
    just_exhausted: bool,
}

/// Grounded guidance: a per-cell action prior, a per-cell value map, the
/// intended route with its cursor, and the conditional rules kept for
/// runtime dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledGuidance {
    width: usize,
    height: usize,
    policy_prior: Vec<[f64; 4]>,
    value_map: Vec<f64>,
    has_value: bool,
    /// Unit moves `(cell, action, policy step index)` traced from the anchor.
    route: Vec<(Position, Action, usize)>,
    rules: Vec<ConditionalRule>,
    cursor: Cursor,
    /// Remaining committed moves from a fired rule.
    pending: Option<(Action, u32)>,
}

/// Grounds `program` on a `width x height` grid with the route anchored at
/// `start`. The route is traced over an obstacle-free grid: walls are the
/// listener's to discover.
pub fn ground(
    program: &GuidanceProgram,
    (width, height): (usize, usize),
    start: Position,
    params: &GroundingParams,
) -> CompiledGuidance {
    debug_assert!(params.epsilon > 0.0 && params.epsilon < 1.0);
    let cells = width * height;
    let uniform = [0.25; 4];
    let mut policy_prior = vec![uniform; cells];
    let mut route = Vec::new();

    let mut pos = start;
    'trace: for (step_idx, step) in program.policy_steps.iter().enumerate() {
        if let PolicyStep::Move { direction, count } = *step {
            for _ in 0..count {
                let Some(next) = pos.offset(direction).filter(|p| p.row < height && p.col < width)
                else {
                    break 'trace;
                };
                route.push((pos, direction, step_idx));
                pos = next;
            }
        }
    }

    let mut prescribed = vec![false; cells];
    for &(p, a, _) in &route {
        let i = p.row * width + p.col;
        if !prescribed[i] {
            prescribed[i] = true;
            let mut dist = [params.epsilon / 4.0; 4];
            dist[a.index()] += 1.0 - params.epsilon;
            policy_prior[i] = dist;
        }
    }

    let annotations = program.effective_annotations();
    let value_map = if annotations.is_empty() {
        vec![0.0; cells]
    } else {
        (0..cells)
            .map(|i| {
                let p = Position::new(i / width, i % width);
                annotations
                    .iter()
                    .map(|a| a.value - params.kappa * a.region.distance(p) as f64)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    };

    CompiledGuidance {
        width,
        height,
        policy_prior,
        value_map,
        has_value: !annotations.is_empty(),
        route,
        rules: program.rules.clone(),
        cursor: Cursor::default(),
        pending: None,
    }
}

impl CompiledGuidance {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn index(&self, p: Position) -> Option<usize> {
        (p.row < self.height && p.col < self.width).then(|| p.row * self.width + p.col)
    }

    /// Action distribution at `p`; uniform off the map.
    pub fn policy(&self, p: Position) -> [f64; 4] {
        self.index(p).map_or([0.25; 4], |i| self.policy_prior[i])
    }

    pub fn prior(&self, p: Position, a: Action) -> f64 {
        self.policy(p)[a.index()]
    }

    /// Value at `p`; `-inf` off the map.
    pub fn value(&self, p: Position) -> f64 {
        self.index(p).map_or(f64::NEG_INFINITY, |i| self.value_map[i])
    }

    /// Whether the program carried any value information.
    pub fn has_value(&self) -> bool {
        self.has_value
    }

    pub fn rules(&self) -> &[ConditionalRule] {
        &self.rules
    }

    pub fn route_len(&self) -> usize {
        self.route.len()
    }

    /// Cells the route prescribes an action for, in order.
    pub fn route(&self) -> impl Iterator<Item = (Position, Action)> + '_ {
        self.route.iter().map(|&(p, a, _)| (p, a))
    }

    pub fn prescribed(&self) -> Option<Action> {
        self.route.get(self.cursor.index).map(|&(_, a, _)| a)
    }

    pub fn cursor_exhausted(&self) -> bool {
        self.cursor.index >= self.route.len()
    }

    /// `(policy step index, moves remaining in that step)`, or `None` once
    /// the policy is used up.
    pub fn cursor_position(&self) -> Option<(usize, u32)> {
        let &(_, _, step) = self.route.get(self.cursor.index)?;
        let remaining = self.route[self.cursor.index..]
            .iter()
            .take_while(|&&(_, _, s)| s == step)
            .count();
        Some((step, remaining as u32))
    }

    pub fn advance(&mut self) {
        if self.cursor.index < self.route.len() {
            self.cursor.index += 1;
            self.cursor.just_exhausted = self.cursor.index == self.route.len();
        }
    }

    /// True exactly once after the advance that used up the policy.
    pub fn take_exhausted(&mut self) -> bool {
        std::mem::take(&mut self.cursor.just_exhausted)
    }

    /// Places the cursor at the first route entry for `p`. Off the route the
    /// policy is treated as used up. Never raises the exhaustion flag.
    pub fn relocalize(&mut self, p: Position) {
        self.cursor.index = self
            .route
            .iter()
            .position(|&(q, _, _)| q == p)
            .unwrap_or(self.route.len());
        self.cursor.just_exhausted = false;
        self.pending = None;
    }

    pub fn pending(&self) -> Option<(Action, u32)> {
        self.pending
    }

    pub(crate) fn set_pending(&mut self, pending: Option<(Action, u32)>) {
        self.pending = pending.filter(|&(_, n)| n > 0);
    }
}
