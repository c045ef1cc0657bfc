//! Versioned keyword lexicon shared by the keyword translator and the
//! strategy coder. The built-in copy is `data/lexicon.toml`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gridworld::Action;

const BUILTIN: &str = include_str!("../data/lexicon.toml");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("reading lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing lexicon: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("lexicon direction `{word}` maps to unknown action `{action}`")]
    BadDirection { word: String, action: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Top,
    Bottom,
    Left,
    Right,
    Center,
}

impl RegionKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "top-left" => Self::TopLeft,
            "top-right" => Self::TopRight,
            "bottom-left" => Self::BottomLeft,
            "bottom-right" => Self::BottomRight,
            "top" => Self::Top,
            "bottom" => Self::Bottom,
            "left" => Self::Left,
            "right" => Self::Right,
            "center" => Self::Center,
            _ => return None,
        })
    }
}

#[derive(Debug, Deserialize)]
struct RawLexicon {
    version: String,
    directions: BTreeMap<String, String>,
    counts: BTreeMap<String, u32>,
    translator: RawTranslator,
    coding: CodingTerms,
}

#[derive(Debug, Deserialize)]
struct RawTranslator {
    step_units: Vec<String>,
    filler: Vec<String>,
    conditional_openers: Vec<String>,
    goal_nouns: Vec<String>,
    seeing_verbs: Vec<String>,
    wall_nouns: Vec<String>,
    regions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CodingTerms {
    pub value_terms: Vec<String>,
    pub low_policy_terms: Vec<String>,
    pub high_policy_markers: Vec<String>,
    pub conditional_markers: Vec<String>,
    pub vague_cues: Vec<String>,
    pub concrete_landmarks: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub version: String,
    hash: String,
    pub directions: BTreeMap<String, Action>,
    pub counts: BTreeMap<String, u32>,
    pub step_units: Vec<String>,
    pub filler: Vec<String>,
    pub conditional_openers: Vec<String>,
    pub goal_nouns: Vec<String>,
    pub seeing_verbs: Vec<String>,
    pub wall_nouns: Vec<String>,
    /// Region phrases as token sequences, longest first.
    pub regions: Vec<(Vec<String>, RegionKind)>,
    pub coding: CodingTerms,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN).expect("built-in lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, LexiconError> {
        let raw: RawLexicon = toml::from_str(text)?;
        let directions = raw
            .directions
            .into_iter()
            .map(|(word, action)| match action.parse::<Action>() {
                Ok(a) => Ok((word, a)),
                Err(_) => Err(LexiconError::BadDirection { word, action }),
            })
            .collect::<Result<_, _>>()?;
        let mut regions: Vec<(Vec<String>, RegionKind)> = raw
            .translator
            .regions
            .into_iter()
            .filter_map(|(phrase, kind)| {
                let kind = RegionKind::parse(&kind)?;
                Some((phrase.split_whitespace().map(str::to_string).collect(), kind))
            })
            .collect();
        regions.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(Lexicon {
            version: raw.version,
            hash: hex::encode(Sha256::digest(text.as_bytes())),
            directions,
            counts: raw.counts,
            step_units: raw.translator.step_units,
            filler: raw.translator.filler,
            conditional_openers: raw.translator.conditional_openers,
            goal_nouns: raw.translator.goal_nouns,
            seeing_verbs: raw.translator.seeing_verbs,
            wall_nouns: raw.translator.wall_nouns,
            regions,
            coding: raw.coding,
        })
    }

    /// SHA-256 of the lexicon source, hex encoded.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn direction(&self, word: &str) -> Option<Action> {
        self.directions.get(word).copied()
    }

    /// Numeral or count word ("3", "twice").
    pub fn count(&self, word: &str) -> Option<u32> {
        if !word.is_empty() && word.bytes().all(|b| b.is_ascii_digit()) {
            return word.parse().ok().filter(|n| *n > 0);
        }
        self.counts.get(word).copied()
    }
}

/// Lowercased alphanumeric word tokens; everything else separates words.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub(crate) fn contains(list: &[String], word: &str) -> bool {
    list.iter().any(|w| w == word)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.direction("north"), Some(Action::Up));
        assert_eq!(lex.count("twice"), Some(2));
        assert_eq!(lex.count("12"), Some(12));
        assert_eq!(lex.count("0"), None);
        assert_eq!(lex.hash().len(), 64);
        assert_eq!(lex.regions[0].0.len(), 2);
    }

    #[test]
    fn tokenizer_splits_hyphens() {
        assert_eq!(words("Top-left corner!"), vec!["top", "left", "corner"]);
    }
}
