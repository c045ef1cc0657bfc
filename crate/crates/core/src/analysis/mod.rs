//! Descriptive analyses over explanation corpora: keyword strategy codes,
//! failure-mode categories, rank statistics and the corpus report.

mod corpus;
mod stats;

pub use corpus::{
    corpus_stats, failure_table, read_corpus, write_corpus, AnalysisError, ConditionSummary,
    CorpusEntry, CorpusReport, Correlation, FailureRow, MapSummary, QualityCondition,
    StrategyProportions,
};
pub use stats::{average_ranks, pearson, spearman, welch_t, StatsError, WelchResult};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lexicon::{contains, words, Lexicon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StrategyCode {
    pub has_value: bool,
    pub has_low_policy: bool,
    pub has_high_policy: bool,
}

impl StrategyCode {
    /// Value content together with any policy content.
    pub fn is_mixed(&self) -> bool {
        self.has_value && (self.has_low_policy || self.has_high_policy)
    }
}

fn contains_phrase(tokens: &[String], phrase: &str) -> bool {
    let p: Vec<&str> = phrase.split_whitespace().collect();
    !p.is_empty() && tokens.windows(p.len()).any(|w| w.iter().zip(&p).all(|(a, b)| a == b))
}

/// Case-insensitive keyword coding of one explanation.
pub fn code_keywords(text: &str, lex: &Lexicon) -> StrategyCode {
    let tokens = words(text);
    let c = &lex.coding;
    let is_dir = |t: &str| lex.direction(t).is_some();
    let is_count = |t: &str| lex.count(t).is_some();

    let has_value = tokens.iter().any(|t| contains(&c.value_terms, t));
    let has_low_policy = tokens.iter().any(|t| contains(&c.low_policy_terms, t))
        || tokens.windows(2).any(|w| {
            (is_dir(&w[0]) && is_count(&w[1])) || (is_count(&w[0]) && is_dir(&w[1]))
        });
    let has_high_policy = tokens.iter().enumerate().any(|(i, t)| {
        if !contains(&c.high_policy_markers, t) {
            return false;
        }
        // "go up once" is a count, not a temporal clause.
        !(t == "once" && i > 0 && (is_dir(&tokens[i - 1]) || is_count(&tokens[i - 1])))
    });
    StrategyCode {
        has_value,
        has_low_policy,
        has_high_policy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    DirectionOverload,
    Overcomplicated,
    OverlyCompressed,
    SpatialAmbiguity,
}

impl FailureMode {
    pub const ALL: [FailureMode; 4] = [
        FailureMode::DirectionOverload,
        FailureMode::Overcomplicated,
        FailureMode::OverlyCompressed,
        FailureMode::SpatialAmbiguity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureMode::DirectionOverload => "DirectionOverload",
            FailureMode::Overcomplicated => "Overcomplicated",
            FailureMode::OverlyCompressed => "OverlyCompressed",
            FailureMode::SpatialAmbiguity => "SpatialAmbiguity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureThresholds {
    pub min_direction_words: usize,
    pub min_overcomplicated_words: usize,
    pub max_compressed_words: usize,
    /// Categories only apply below this success rate.
    pub max_success: f64,
}

impl Default for FailureThresholds {
    fn default() -> Self {
        Self {
            min_direction_words: 4,
            min_overcomplicated_words: 30,
            max_compressed_words: 8,
            max_success: 0.5,
        }
    }
}

pub fn direction_word_count(text: &str, lex: &Lexicon) -> usize {
    words(text).iter().filter(|t| lex.direction(t).is_some()).count()
}

/// Non-exclusive failure categories for an explanation with success rate
/// `succ`. Empty whenever `succ >= max_success`.
pub fn classify_failures(
    text: &str,
    succ: f64,
    thresholds: &FailureThresholds,
    lex: &Lexicon,
) -> BTreeSet<FailureMode> {
    let mut out = BTreeSet::new();
    if succ >= thresholds.max_success {
        return out;
    }
    let tokens = words(text);
    let word_count = crate::translator::word_count(text);
    let c = &lex.coding;
    if direction_word_count(text, lex) >= thresholds.min_direction_words {
        out.insert(FailureMode::DirectionOverload);
    }
    if word_count >= thresholds.min_overcomplicated_words
        && tokens.iter().any(|t| contains(&c.conditional_markers, t))
    {
        out.insert(FailureMode::Overcomplicated);
    }
    if word_count <= thresholds.max_compressed_words {
        out.insert(FailureMode::OverlyCompressed);
    }
    let vague = c.vague_cues.iter().any(|p| contains_phrase(&tokens, p));
    let concrete = tokens
        .iter()
        .any(|t| contains(&c.concrete_landmarks, t) || t.bytes().any(|b| b.is_ascii_digit()));
    if vague && !concrete {
        out.insert(FailureMode::SpatialAmbiguity);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(text: &str) -> StrategyCode {
        code_keywords(text, &Lexicon::builtin())
    }

    fn modes(text: &str, succ: f64) -> Vec<FailureMode> {
        classify_failures(text, succ, &FailureThresholds::default(), &Lexicon::builtin())
            .into_iter()
            .collect()
    }

    #[test]
    fn value_only() {
        let c = code("the treasure is in the top-left corner");
        assert!(c.has_value && !c.has_low_policy && !c.has_high_policy);
    }

    #[test]
    fn low_policy_only() {
        let c = code("go up twice");
        assert!(!c.has_value && c.has_low_policy && !c.has_high_policy);
        assert!(code("take three steps").has_low_policy);
        assert!(!code("go up once").has_high_policy);
    }

    #[test]
    fn high_policy_and_value() {
        let c = code("if you see a wall, go right until the corner");
        assert!(c.has_value && !c.has_low_policy && c.has_high_policy);
        assert!(c.is_mixed());
        assert!(code("once you see the chest stop").has_high_policy);
    }

    #[test]
    fn direction_overload() {
        let text = "go up then left then down then right and keep walking along the path past \
                    the long hallway until it ends and go up again okay then";
        assert_eq!(crate::translator::word_count(text), 27);
        assert_eq!(direction_word_count(text, &Lexicon::builtin()), 5);
        assert_eq!(modes(text, 0.4), vec![FailureMode::DirectionOverload]);
    }

    #[test]
    fn compressed() {
        assert_eq!(modes("just go left a bit then", 0.1), vec![FailureMode::OverlyCompressed]);
    }

    #[test]
    fn compressed_and_ambiguous() {
        assert_eq!(
            modes("somewhere near the middle", 0.1),
            vec![FailureMode::OverlyCompressed, FailureMode::SpatialAmbiguity]
        );
        assert_eq!(modes("somewhere near the corner", 0.1), vec![FailureMode::OverlyCompressed]);
        assert_eq!(modes("somewhere near row 3", 0.1), vec![FailureMode::OverlyCompressed]);
    }

    #[test]
    fn overcomplicated() {
        let text = "first walk forward a little and then if you notice that the corridor splits \
                    you should take the branch that looks wider unless it seems blocked in which \
                    case take the other one and keep going";
        assert!(crate::translator::word_count(text) >= 30);
        assert_eq!(modes(text, 0.2), vec![FailureMode::Overcomplicated]);
    }

    #[test]
    fn success_suppresses_everything() {
        assert!(modes("somewhere near the middle", 0.5).is_empty());
        assert!(modes("up down left right up", 0.9).is_empty());
    }
}
