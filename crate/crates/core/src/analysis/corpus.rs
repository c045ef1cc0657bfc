//! Corpus files and the descriptive corpus report.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stats::{spearman, StatsError};
use super::{classify_failures, code_keywords, direction_word_count, FailureMode, FailureThresholds};
use crate::gridworld::GridMap;
use crate::lexicon::Lexicon;
use crate::translator::{word_count, Explanation};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("corpus entry {id}: rating {rating} outside [0, 100]")]
    InvalidRating { id: String, rating: f64 },
    #[error("corpus entry {id} references unknown map `{map_id}`")]
    UnknownMapReference { id: String, map_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityCondition {
    #[serde(alias = "none")]
    None,
    #[serde(alias = "bad")]
    Bad,
    #[serde(alias = "medium")]
    Medium,
    #[serde(alias = "good")]
    Good,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub map_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<QualityCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_length: Option<usize>,
}

impl CorpusEntry {
    pub fn new(id: impl Into<String>, map_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            map_id: map_id.into(),
            text: text.into(),
            rating: None,
            condition: None,
            path_length: None,
        }
    }

    pub fn explanation(&self) -> Explanation {
        Explanation::new(self.id.clone(), self.map_id.clone(), self.text.clone())
    }
}

/// Reads line-delimited corpus records. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<CorpusEntry>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry = serde_json::from_str(&line).map_err(|e| AnalysisError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(rating) = entry.rating {
            if !(0.0..=100.0).contains(&rating) {
                return Err(AnalysisError::InvalidRating { id: entry.id, rating });
            }
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut out: W, entries: &[CorpusEntry]) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub map_id: String,
    pub explanations: usize,
    pub mean_words: f64,
    pub shortest_path: usize,
    pub brittleness: f64,
    pub openness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub name: String,
    pub n: usize,
    pub rho: Result<f64, StatsError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategyProportions {
    pub n: usize,
    pub value: f64,
    pub low_policy: f64,
    pub high_policy: f64,
    pub mixed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: QualityCondition,
    pub n: usize,
    pub mean_path_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub mode: FailureMode,
    pub n: usize,
    pub mean_success: f64,
    pub mean_words: f64,
    pub mean_direction_words: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub lexicon_version: String,
    pub lexicon_hash: String,
    pub maps: Vec<MapSummary>,
    pub correlations: Vec<Correlation>,
    pub strategies: StrategyProportions,
    pub conditions: Vec<ConditionSummary>,
    pub failures: Vec<FailureRow>,
}

/// Per-map length summaries, length-vs-structure correlations across maps,
/// strategy proportions and condition-wise path lengths.
pub fn corpus_stats(
    entries: &[CorpusEntry],
    maps: &[GridMap],
    lex: &Lexicon,
) -> Result<CorpusReport, AnalysisError> {
    let by_id: HashMap<&str, &GridMap> = maps.iter().map(|m| (m.id.as_str(), m)).collect();
    let mut per_map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for e in entries {
        if !by_id.contains_key(e.map_id.as_str()) {
            return Err(AnalysisError::UnknownMapReference {
                id: e.id.clone(),
                map_id: e.map_id.clone(),
            });
        }
        per_map.entry(&e.map_id).or_default().push(word_count(&e.text));
    }

    let summaries: Vec<MapSummary> = per_map
        .iter()
        .map(|(id, lens)| {
            let m = by_id[id].metrics();
            MapSummary {
                map_id: id.to_string(),
                explanations: lens.len(),
                mean_words: lens.iter().sum::<usize>() as f64 / lens.len() as f64,
                shortest_path: m.shortest_path,
                brittleness: m.brittleness,
                openness: m.openness,
            }
        })
        .collect();

    let lengths: Vec<f64> = summaries.iter().map(|s| s.mean_words).collect();
    let correlate = |name: &str, ys: Vec<f64>| Correlation {
        name: name.to_string(),
        n: ys.len(),
        rho: spearman(&lengths, &ys),
    };
    let correlations = vec![
        correlate(
            "length~shortest_path",
            summaries.iter().map(|s| s.shortest_path as f64).collect(),
        ),
        correlate("length~brittleness", summaries.iter().map(|s| s.brittleness).collect()),
        correlate("length~openness", summaries.iter().map(|s| s.openness).collect()),
    ];

    let codes: Vec<_> = entries.iter().map(|e| code_keywords(&e.text, lex)).collect();
    let share = |f: &dyn Fn(&super::StrategyCode) -> bool| {
        if codes.is_empty() {
            0.0
        } else {
            codes.iter().filter(|c| f(c)).count() as f64 / codes.len() as f64
        }
    };
    let strategies = StrategyProportions {
        n: codes.len(),
        value: share(&|c| c.has_value),
        low_policy: share(&|c| c.has_low_policy),
        high_policy: share(&|c| c.has_high_policy),
        mixed: share(&|c| c.is_mixed()),
    };

    let mut cond: BTreeMap<QualityCondition, Vec<usize>> = BTreeMap::new();
    for e in entries {
        if let (Some(c), Some(l)) = (e.condition, e.path_length) {
            cond.entry(c).or_default().push(l);
        }
    }
    let conditions = cond
        .into_iter()
        .map(|(condition, ls)| ConditionSummary {
            condition,
            n: ls.len(),
            mean_path_length: ls.iter().sum::<usize>() as f64 / ls.len() as f64,
        })
        .collect();

    Ok(CorpusReport {
        lexicon_version: lex.version.clone(),
        lexicon_hash: lex.hash().to_string(),
        maps: summaries,
        correlations,
        strategies,
        conditions,
        failures: Vec::new(),
    })
}

/// Failure categories over entries with a known success rate, one row per
/// category with at least one member.
pub fn failure_table(
    entries: &[CorpusEntry],
    success: &HashMap<String, f64>,
    thresholds: &FailureThresholds,
    lex: &Lexicon,
) -> Vec<FailureRow> {
    let mut acc: BTreeMap<FailureMode, Vec<(f64, usize, usize)>> = BTreeMap::new();
    for e in entries {
        let Some(&succ) = success.get(&e.id) else {
            continue;
        };
        for mode in classify_failures(&e.text, succ, thresholds, lex) {
            acc.entry(mode).or_default().push((
                succ,
                word_count(&e.text),
                direction_word_count(&e.text, lex),
            ));
        }
    }
    acc.into_iter()
        .map(|(mode, rows)| {
            let n = rows.len() as f64;
            FailureRow {
                mode,
                n: rows.len(),
                mean_success: rows.iter().map(|r| r.0).sum::<f64>() / n,
                mean_words: rows.iter().map(|r| r.1 as f64).sum::<f64>() / n,
                mean_direction_words: rows.iter().map(|r| r.2 as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

impl CorpusReport {
    /// `section,key,metric,value` rows after a `#` comment header.
    pub fn to_csv(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        out.push_str(&format!("# lexicon_version={}\n", self.lexicon_version));
        out.push_str(&format!("# lexicon_hash={}\n", self.lexicon_hash));
        for (k, v) in header {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str("section,key,metric,value\n");
        let mut row = |section: &str, key: &str, metric: &str, value: String| {
            out.push_str(&format!("{section},{key},{metric},{value}\n"));
        };
        for m in &self.maps {
            row("map", &m.map_id, "explanations", m.explanations.to_string());
            row("map", &m.map_id, "mean_words", fmt(m.mean_words));
            row("map", &m.map_id, "shortest_path", m.shortest_path.to_string());
            row("map", &m.map_id, "brittleness", fmt(m.brittleness));
            row("map", &m.map_id, "openness", fmt(m.openness));
        }
        for c in &self.correlations {
            let v = match &c.rho {
                Ok(r) => fmt(*r),
                Err(StatsError::Degenerate(_)) => "degenerate".into(),
                Err(_) => "insufficient".into(),
            };
            row("correlation", &c.name, "spearman", v);
            row("correlation", &c.name, "n", c.n.to_string());
        }
        let s = &self.strategies;
        row("strategy", "all", "n", s.n.to_string());
        row("strategy", "all", "value", fmt(s.value));
        row("strategy", "all", "low_policy", fmt(s.low_policy));
        row("strategy", "all", "high_policy", fmt(s.high_policy));
        row("strategy", "all", "mixed", fmt(s.mixed));
        for c in &self.conditions {
            let key = format!("{:?}", c.condition);
            row("condition", &key, "n", c.n.to_string());
            row("condition", &key, "mean_path_length", fmt(c.mean_path_length));
        }
        for f in &self.failures {
            let key = f.mode.name();
            row("failure", key, "n", f.n.to_string());
            row("failure", key, "mean_success", fmt(f.mean_success));
            row("failure", key, "mean_words", fmt(f.mean_words));
            row("failure", key, "mean_direction_words", fmt(f.mean_direction_words));
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}
