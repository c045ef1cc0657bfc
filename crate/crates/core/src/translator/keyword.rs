//! Deterministic keyword compiler.
//!
//! Direction words with nearby counts become `MOVE` steps, corner and side
//! phrases become value regions, and "if ..., ..." clauses with a
//! recognized condition become rules. Everything else is ignored.

use crate::gridworld::{Action, GridMap};
use crate::guidance::{
    Condition, ConditionalRule, GuidanceProgram, ParseError, PolicyStep, Region, ValueAnnotation,
    GOTO_VALUE,
};
use crate::lexicon::{contains, words, Lexicon, RegionKind};
use crate::gridworld::Position;

use super::{CompileOutcome, CompileRequest, CompilationRecord, TranslateError, Translator};

/// Fixed-fraction region on a `width x height` map. Bands are
/// `max(1, n / 3)` cells wide.
pub fn region_for(kind: RegionKind, width: usize, height: usize) -> Region {
    let bh = (height / 3).max(1);
    let bw = (width / 3).max(1);
    let (top, bottom) = ((0, bh - 1), (height - bh, height - 1));
    let (left, right) = ((0, bw - 1), (width - bw, width - 1));
    let middle = |n: usize, b: usize| {
        if n > 2 * b {
            (b, n - b - 1)
        } else {
            (n / 2, n / 2)
        }
    };
    let all_rows = (0, height - 1);
    let all_cols = (0, width - 1);
    let (rows, cols) = match kind {
        RegionKind::TopLeft => (top, left),
        RegionKind::TopRight => (top, right),
        RegionKind::BottomLeft => (bottom, left),
        RegionKind::BottomRight => (bottom, right),
        RegionKind::Top => (top, all_cols),
        RegionKind::Bottom => (bottom, all_cols),
        RegionKind::Left => (all_rows, left),
        RegionKind::Right => (all_rows, right),
        RegionKind::Center => (middle(height, bh), middle(width, bw)),
    };
    Region::new(rows.0, cols.0, rows.1, cols.1)
}

/// Token-level extraction state for one span of text.
struct Extracted {
    moves: Vec<PolicyStep>,
    regions: Vec<Region>,
}

fn match_region(lex: &Lexicon, tokens: &[String], i: usize) -> Option<(usize, RegionKind)> {
    lex.regions.iter().find_map(|(phrase, kind)| {
        let end = i + phrase.len();
        (end <= tokens.len() && tokens[i..end] == phrase[..]).then_some((phrase.len(), *kind))
    })
}

fn extract(lex: &Lexicon, tokens: &[String], width: usize, height: usize) -> Extracted {
    let mut out = Extracted {
        moves: Vec::new(),
        regions: Vec::new(),
    };
    let mut used = vec![false; tokens.len()];
    let mut i = 0;
    while i < tokens.len() {
        if let Some((len, kind)) = match_region(lex, tokens, i) {
            let region = region_for(kind, width, height);
            if !out.regions.contains(&region) {
                out.regions.push(region);
            }
            used[i..i + len].iter_mut().for_each(|u| *u = true);
            i += len;
            continue;
        }
        if let Some(direction) = lex.direction(&tokens[i]) {
            used[i] = true;
            let count = count_after(lex, tokens, &mut used, i)
                .or_else(|| count_before(lex, tokens, &mut used, i))
                .unwrap_or(1);
            out.moves.push(PolicyStep::Move { direction, count });
        }
        i += 1;
    }
    out
}

fn count_after(lex: &Lexicon, tokens: &[String], used: &mut [bool], i: usize) -> Option<u32> {
    let j = i + 1;
    let n = lex.count(tokens.get(j)?).filter(|_| !used[j])?;
    used[j] = true;
    Some(n)
}

fn count_before(lex: &Lexicon, tokens: &[String], used: &mut [bool], i: usize) -> Option<u32> {
    let mut j = i;
    while j > 0 {
        j -= 1;
        if used[j] {
            return None;
        }
        let t = tokens[j].as_str();
        if let Some(n) = lex.count(t) {
            used[j] = true;
            return Some(n);
        }
        if !(contains(&lex.filler, t) || contains(&lex.step_units, t)) {
            return None;
        }
    }
    None
}

fn split_conditional(clause: &str) -> Option<(&str, &str)> {
    let lower = clause.to_lowercase();
    if lower.len() != clause.len() {
        return clause.split_once(',');
    }
    [",", " then ", " and "]
        .iter()
        .find_map(|sep| lower.find(sep).map(|k| (&clause[..k], &clause[k + sep.len()..])))
}

fn region_center(r: Region) -> Position {
    Position::new((r.r0 + r.r1) / 2, (r.c0 + r.c1) / 2)
}

/// Compiles `text` for `world`. Returns `EmptyProgram` when nothing is
/// recognized.
pub fn keyword_translate(
    lex: &Lexicon,
    text: &str,
    world: &GridMap,
) -> Result<GuidanceProgram, ParseError> {
    let (w, h) = (world.width(), world.height());
    let mut policy_steps: Vec<PolicyStep> = Vec::new();
    let mut regions: Vec<Region> = Vec::new();
    let mut rules = Vec::new();

    let mut absorb = |ex: Extracted, policy_steps: &mut Vec<PolicyStep>| {
        policy_steps.extend(ex.moves);
        for r in ex.regions {
            if !regions.contains(&r) {
                regions.push(r);
            }
        }
    };

    for clause in text.split(['.', '!', '?', ';', '\n']) {
        let tokens = words(clause);
        if tokens.is_empty() {
            continue;
        }
        if contains(&lex.conditional_openers, &tokens[0]) {
            if let Some(rule) = conditional_rule(lex, clause, &policy_steps, w, h) {
                rules.push(rule);
                continue;
            }
        }
        absorb(extract(lex, &tokens, w, h), &mut policy_steps);
    }

    let program = GuidanceProgram {
        policy_steps,
        value_annotations: regions
            .into_iter()
            .map(|region| ValueAnnotation {
                region,
                value: GOTO_VALUE,
            })
            .collect(),
        rules,
        source_text: String::new(),
    };
    if program.is_empty() {
        return Err(ParseError::EmptyProgram);
    }
    Ok(GuidanceProgram {
        source_text: program.serialize(),
        ..program
    })
}

fn conditional_rule(
    lex: &Lexicon,
    clause: &str,
    moves_so_far: &[PolicyStep],
    w: usize,
    h: usize,
) -> Option<ConditionalRule> {
    let (cond_text, resp_text) = split_conditional(clause)?;
    let cond = words(cond_text);
    let has = |list: &[String]| cond.iter().any(|t| contains(list, t));

    let condition = if has(&lex.goal_nouns) && has(&lex.seeing_verbs) {
        Condition::SeeGoal
    } else if let Some(kind) = (0..cond.len()).find_map(|i| match_region(lex, &cond, i)) {
        Condition::AtRegion(region_for(kind.1, w, h))
    } else if has(&lex.wall_nouns) {
        let dir = cond
            .iter()
            .find_map(|t| lex.direction(t))
            .or_else(|| last_direction(moves_so_far))?;
        Condition::SeeWall(dir)
    } else {
        return None;
    };

    let resp = extract(lex, &words(resp_text), w, h);
    let response = match (resp.moves.first(), resp.regions.first()) {
        (Some(step), _) => *step,
        (None, Some(r)) => PolicyStep::Goto(region_center(*r)),
        (None, None) => return None,
    };
    Some(ConditionalRule {
        condition,
        response,
    })
}

fn last_direction(steps: &[PolicyStep]) -> Option<Action> {
    steps.iter().rev().find_map(|s| match *s {
        PolicyStep::Move { direction, .. } => Some(direction),
        PolicyStep::Goto(_) => None,
    })
}

/// Keyword compiler behind the [`Translator`] interface. Seed-independent.
#[derive(Debug, Clone)]
pub struct KeywordTranslator {
    lexicon: Lexicon,
}

impl KeywordTranslator {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Default for KeywordTranslator {
    fn default() -> Self {
        Self::new(Lexicon::builtin())
    }
}

impl Translator for KeywordTranslator {
    fn compile(&self, request: &CompileRequest<'_>) -> Result<CompilationRecord, TranslateError> {
        let (raw, outcome) =
            match keyword_translate(&self.lexicon, &request.explanation.text, request.world) {
                Ok(p) => (p.serialize(), CompileOutcome::Program(p)),
                Err(e) => (String::new(), CompileOutcome::ParseFailure(e.to_string())),
            };
        Ok(request.record(0, raw, outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Cell, GridMap};

    fn room(n: usize) -> GridMap {
        GridMap::new(
            "room",
            vec![vec![Cell::Floor; n]; n],
            Position::new(0, 0),
            Position::new(n - 1, n - 1),
        )
        .unwrap()
    }

    fn kw(text: &str, n: usize) -> Result<String, ParseError> {
        keyword_translate(&Lexicon::builtin(), text, &room(n)).map(|p| p.serialize())
    }

    #[test]
    fn directions_with_counts() {
        assert_eq!(
            kw("go up twice then right 3 steps", 10).unwrap(),
            "POLICY\nMOVE UP 2\nMOVE RIGHT 3\n"
        );
        assert_eq!(
            kw("Walk 2 steps to the right, then go north.", 10).unwrap(),
            "POLICY\nMOVE RIGHT 2\nMOVE UP 1\n"
        );
        assert_eq!(kw("head east once", 10).unwrap(), "POLICY\nMOVE RIGHT 1\n");
    }

    #[test]
    fn counts_are_not_shared() {
        assert_eq!(
            kw("up 2 right", 10).unwrap(),
            "POLICY\nMOVE UP 2\nMOVE RIGHT 1\n"
        );
    }

    #[test]
    fn corner_phrase_becomes_region() {
        assert_eq!(
            kw("the treasure is in the top-left corner", 10).unwrap(),
            "VALUE\nREGION 0 0 2 2 10\n"
        );
        assert_eq!(kw("bottom right", 10).unwrap(), "VALUE\nREGION 7 7 9 9 10\n");
        assert_eq!(kw("in the middle", 9).unwrap(), "VALUE\nREGION 3 3 5 5 10\n");
    }

    #[test]
    fn nothing_recognized_is_empty() {
        assert_eq!(kw("good luck!", 10), Err(ParseError::EmptyProgram));
        assert_eq!(kw("", 10), Err(ParseError::EmptyProgram));
    }

    #[test]
    fn conditional_rules() {
        assert_eq!(
            kw("go right 3. if you see the treasure, go down", 10).unwrap(),
            "POLICY\nMOVE RIGHT 3\nRULES\nIF SEE GOAL THEN MOVE DOWN 1\n"
        );
        assert_eq!(
            kw("go down. when you hit a wall then turn left", 10).unwrap(),
            "POLICY\nMOVE DOWN 1\nRULES\nIF SEE WALL DOWN THEN MOVE LEFT 1\n"
        );
        assert_eq!(
            kw("once you reach the bottom, go right 2", 9).unwrap(),
            "RULES\nIF AT 6 0 8 8 THEN MOVE RIGHT 2\n"
        );
    }

    #[test]
    fn unrecognized_condition_is_plain_text() {
        assert_eq!(
            kw("if you are lost, go up", 10).unwrap(),
            "POLICY\nMOVE UP 1\n"
        );
    }

    #[test]
    fn bands_on_small_maps() {
        assert_eq!(region_for(RegionKind::TopLeft, 2, 2), Region::new(0, 0, 0, 0));
        assert_eq!(region_for(RegionKind::Center, 5, 5), Region::new(1, 1, 3, 3));
        assert_eq!(region_for(RegionKind::Center, 2, 2), Region::new(1, 1, 1, 1));
        assert_eq!(region_for(RegionKind::Right, 6, 3), Region::new(0, 4, 2, 5));
    }
}
