//! Utility of an explanation from repeated listener attempts, the two
//! baselines, per-map normalization, quality bins and the speaker
//! distribution.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::GridMap;
use crate::planner::{direct_episode, run_episode, Attempt, DirectActor, EpisodeParams, PlannerError};
use crate::seed::derive_seed;
use crate::translator::{Explanation, Translator};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("map `{map_id}` has {count} explanation(s); binning needs at least 3")]
    TooFewExplanations { map_id: String, count: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub explanation_id: String,
    pub map_id: String,
    pub n: usize,
    pub budget: usize,
    pub attempts: Vec<Attempt>,
    pub replan_mean: f64,
    /// Shortest successful length, or the budget when nothing succeeded.
    pub len_min: usize,
    pub succ: f64,
    /// Mean attempt length with failures charged the full budget.
    pub mean_length: f64,
}

impl EvaluationResult {
    pub fn from_attempts(
        explanation_id: impl Into<String>,
        map_id: impl Into<String>,
        attempts: Vec<Attempt>,
        budget: usize,
    ) -> Self {
        assert!(!attempts.is_empty(), "an evaluation needs at least one attempt");
        let n = attempts.len();
        let nf = n as f64;
        let replan_mean = attempts.iter().map(|a| f64::from(a.replans)).sum::<f64>() / nf;
        let successes = attempts.iter().filter(|a| a.success).count();
        let len_min = attempts
            .iter()
            .filter(|a| a.success)
            .map(|a| a.length)
            .min()
            .unwrap_or(budget);
        let mean_length = attempts
            .iter()
            .map(|a| if a.success { a.length.min(budget) } else { budget } as f64)
            .sum::<f64>()
            / nf;
        Self {
            explanation_id: explanation_id.into(),
            map_id: map_id.into(),
            n,
            budget,
            attempts,
            replan_mean,
            len_min,
            succ: successes as f64 / nf,
            mean_length,
        }
    }
}

fn attempt_params(params: &EpisodeParams, i: usize) -> EpisodeParams {
    EpisodeParams {
        rng_seed: derive_seed(params.rng_seed, i as u64),
        ..params.clone()
    }
}

/// Runs `n` listener attempts with seeds derived from `params.rng_seed`.
/// Attempts run on the current rayon pool; results keep attempt order.
pub fn evaluate(
    explanation: &Explanation,
    world: &GridMap,
    translator: &dyn Translator,
    params: &EpisodeParams,
    n: usize,
) -> Result<EvaluationResult, PlannerError> {
    assert!(n >= 1, "n must be positive");
    let attempts = (0..n)
        .into_par_iter()
        .map(|i| run_episode(world, explanation, translator, &attempt_params(params, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvaluationResult::from_attempts(
        &explanation.id,
        &world.id,
        attempts,
        params.budget,
    ))
}

/// Direct-action baseline: `make_actor` builds a fresh actor for each
/// attempt seed.
pub fn evaluate_direct<F>(
    explanation: &Explanation,
    world: &GridMap,
    make_actor: F,
    params: &EpisodeParams,
    n: usize,
) -> Result<EvaluationResult, PlannerError>
where
    F: Fn(u64) -> Box<dyn DirectActor + Send> + Sync,
{
    assert!(n >= 1, "n must be positive");
    let attempts = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = attempt_params(params, i);
            let mut actor = make_actor(p.rng_seed);
            direct_episode(world, explanation, actor.as_mut(), &p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvaluationResult::from_attempts(
        &explanation.id,
        &world.id,
        attempts,
        params.budget,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityParams {
    pub alpha: f64,
    /// Per-step length weight; `None` means `1 / budget`.
    pub beta: Option<f64>,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: None,
            gamma: 1.0,
            delta: 1.0,
        }
    }
}

impl UtilityParams {
    pub fn validate(&self) -> Result<(), ScoringError> {
        let all = [self.alpha, self.beta.unwrap_or(1.0), self.gamma, self.delta];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ScoringError::InvalidParams(
                "utility weights must be finite and non-negative".into(),
            ));
        }
        if self.alpha == 0.0 && self.beta == Some(0.0) && self.gamma == 0.0 {
            return Err(ScoringError::InvalidParams(
                "alpha, beta and gamma cannot all be zero".into(),
            ));
        }
        Ok(())
    }

    pub fn beta_for(&self, budget: usize) -> f64 {
        self.beta.unwrap_or(1.0 / budget as f64)
    }
}

/// `-alpha * replan - beta * len_min + gamma * succ`.
pub fn utility(result: &EvaluationResult, p: &UtilityParams) -> f64 {
    -p.alpha * result.replan_mean - p.beta_for(result.budget) * result.len_min as f64
        + p.gamma * result.succ
}

/// Length-only baseline: negative whitespace word count.
pub fn length_score(explanation: &Explanation) -> f64 {
    -(crate::translator::word_count(&explanation.text) as f64)
}

/// Direct baseline: `delta * succ - alpha * mean length`.
pub fn direct_score(result: &EvaluationResult, p: &UtilityParams) -> f64 {
    p.delta * result.succ - p.alpha * result.mean_length
}

/// Min-max scaling to `[0, 1]`; a constant input maps to 0.5.
pub fn normalize(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|x| (x - min) / (max - min)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub map_id: String,
    pub explanation_id: String,
    pub score: f64,
}

/// [`normalize`] applied within each map; output aligned with `items`.
pub fn normalize_per_map(items: &[ScoredItem]) -> Vec<f64> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        groups.entry(&it.map_id).or_default().push(i);
    }
    let mut out = vec![0.0; items.len()];
    for idx in groups.values() {
        let scores: Vec<f64> = idx.iter().map(|&i| items[i].score).collect();
        for (&i, v) in idx.iter().zip(normalize(&scores)) {
            out[i] = v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityLabel {
    Bad,
    Medium,
    Good,
}

impl std::fmt::Display for QualityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QualityLabel::Bad => "Bad",
            QualityLabel::Medium => "Medium",
            QualityLabel::Good => "Good",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityBin {
    pub label: QualityLabel,
    pub selected_explanation_id: String,
    /// Members in ascending (score, id) order.
    pub members: Vec<String>,
    pub bin_scores: Vec<f64>,
}

const MEDIAN_TIE: f64 = 1e-9;

/// Tercile bins over `(id, score)` pairs for one map, returned Bad,
/// Medium, Good. Items sorted by (score, id) go to bin `floor(3i / n)`.
pub fn bin_quality(map_id: &str, items: &[(String, f64)]) -> Result<Vec<QualityBin>, ScoringError> {
    let n = items.len();
    if n < 3 {
        return Err(ScoringError::TooFewExplanations {
            map_id: map_id.to_string(),
            count: n,
        });
    }
    let mut sorted: Vec<&(String, f64)> = items.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut members: [Vec<&(String, f64)>; 3] = Default::default();
    for (i, item) in sorted.into_iter().enumerate() {
        members[3 * i / n].push(item);
    }
    let labels = [QualityLabel::Bad, QualityLabel::Medium, QualityLabel::Good];
    Ok(labels
        .into_iter()
        .zip(members)
        .map(|(label, m)| {
            let selected = match label {
                QualityLabel::Good => select_by(&m, |s| -s),
                QualityLabel::Bad => select_by(&m, |s| s),
                QualityLabel::Medium => {
                    let med = median(&m.iter().map(|x| x.1).collect::<Vec<_>>());
                    select_by(&m, |s| (s - med).abs())
                }
            };
            QualityBin {
                label,
                selected_explanation_id: selected,
                members: m.iter().map(|x| x.0.clone()).collect(),
                bin_scores: m.iter().map(|x| x.1).collect(),
            }
        })
        .collect())
}

/// Id minimizing `key(score)`, ties within tolerance going to the
/// lexically smallest id.
fn select_by(items: &[&(String, f64)], key: impl Fn(f64) -> f64) -> String {
    let best = items.iter().map(|x| key(x.1)).fold(f64::INFINITY, f64::min);
    items
        .iter()
        .filter(|x| key(x.1) <= best + MEDIAN_TIE)
        .map(|x| &x.0)
        .min()
        .expect("bins are non-empty")
        .clone()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeakerParams {
    pub lambda: f64,
}

impl Default for SpeakerParams {
    fn default() -> Self {
        Self { lambda: 2.0 }
    }
}

/// Softmax of `lambda * U`, computed after subtracting the maximum.
pub fn speaker_distribution(utilities: &[f64], sp: &SpeakerParams) -> Vec<f64> {
    assert!(!utilities.is_empty(), "speaker distribution needs at least one utility");
    let scaled: Vec<f64> = utilities.iter().map(|u| sp.lambda * u).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
