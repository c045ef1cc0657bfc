use thiserror::Error;

use super::{Condition, ConditionalRule, GuidanceProgram, PolicyStep, Region, ValueAnnotation};
use crate::gridworld::{Action, Position};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// 1-based line and column of the offending token.
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("empty program")]
    EmptyProgram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Policy,
    Value,
    Rules,
}

impl Section {
    fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "POLICY" => Some(Section::Policy),
            "VALUE" => Some(Section::Value),
            "RULES" => Some(Section::Rules),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

/// One logical line, tokenized on whitespace.
struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
    pos: usize,
    /// Column just past the last token, for "expected more" errors.
    end_col: usize,
}

impl<'a> Line<'a> {
    fn new(number: usize, raw: &'a str) -> Self {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        let mut char_col = 0;
        let mut end_col = 1;
        for (byte, ch) in content.char_indices() {
            char_col += 1;
            if ch.is_whitespace() {
                if let Some((b, c)) = start.take() {
                    tokens.push(Token {
                        text: &content[b..byte],
                        col: c,
                    });
                }
            } else {
                if start.is_none() {
                    start = Some((byte, char_col));
                }
                end_col = char_col + 1;
            }
        }
        if let Some((b, c)) = start {
            tokens.push(Token {
                text: &content[b..],
                col: c,
            });
        }
        Line {
            number,
            tokens,
            pos: 0,
            end_col,
        }
    }

    fn is_blank(&self) -> bool {
        self.tokens.is_empty()
    }

    fn error(&self, col: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.number,
            col,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, ParseError> {
        let tok = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.error(self.end_col, format!("expected {what}, found end of line")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn keyword(&mut self, expected: &str) -> Result<(), ParseError> {
        let tok = self.next(&format!("`{expected}`"))?;
        if tok.text == expected {
            Ok(())
        } else {
            Err(self.error(tok.col, format!("expected `{expected}`, found `{}`", tok.text)))
        }
    }

    fn uint(&mut self, what: &str) -> Result<usize, ParseError> {
        let tok = self.next(what)?;
        if !tok.text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.error(tok.col, format!("expected {what}, found `{}`", tok.text)));
        }
        tok.text
            .parse()
            .map_err(|_| self.error(tok.col, format!("{what} `{}` is out of range", tok.text)))
    }

    fn count(&mut self) -> Result<u32, ParseError> {
        let tok = self.tokens.get(self.pos).copied();
        let n = self.uint("step count")?;
        let col = tok.map_or(self.end_col, |t| t.col);
        match u32::try_from(n) {
            Ok(0) => Err(self.error(col, "step count must be at least 1")),
            Ok(n) => Ok(n),
            Err(_) => Err(self.error(col, "step count is out of range")),
        }
    }

    fn real(&mut self) -> Result<f64, ParseError> {
        let tok = self.next("value")?;
        let looks_numeric = tok
            .text
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
        match tok.text.parse::<f64>() {
            Ok(v) if looks_numeric && v.is_finite() => Ok(v),
            _ => Err(self.error(tok.col, format!("expected a real value, found `{}`", tok.text))),
        }
    }

    fn direction(&mut self) -> Result<Action, ParseError> {
        let tok = self.next("direction")?;
        match tok.text {
            "UP" => Ok(Action::Up),
            "DOWN" => Ok(Action::Down),
            "LEFT" => Ok(Action::Left),
            "RIGHT" => Ok(Action::Right),
            other => Err(self.error(
                tok.col,
                format!("expected UP, DOWN, LEFT or RIGHT, found `{other}`"),
            )),
        }
    }

    fn region(&mut self) -> Result<Region, ParseError> {
        let first_col = self.tokens.get(self.pos).map_or(self.end_col, |t| t.col);
        let r0 = self.uint("row")?;
        let c0 = self.uint("column")?;
        let r1 = self.uint("row")?;
        let c1 = self.uint("column")?;
        if r0 > r1 || c0 > c1 {
            return Err(self.error(first_col, "region corners are out of order"));
        }
        Ok(Region { r0, c0, r1, c1 })
    }

    fn step(&mut self) -> Result<PolicyStep, ParseError> {
        let tok = self.next("`MOVE` or `GOTO`")?;
        match tok.text {
            "MOVE" => {
                let direction = self.direction()?;
                let count = self.count()?;
                Ok(PolicyStep::Move { direction, count })
            }
            "GOTO" => {
                let row = self.uint("row")?;
                let col = self.uint("column")?;
                Ok(PolicyStep::Goto(Position { row, col }))
            }
            other => Err(self.error(tok.col, format!("expected `MOVE` or `GOTO`, found `{other}`"))),
        }
    }

    fn annotation(&mut self) -> Result<ValueAnnotation, ParseError> {
        self.keyword("REGION")?;
        let region = self.region()?;
        let value = self.real()?;
        Ok(ValueAnnotation { region, value })
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        let tok = self.next("condition")?;
        match tok.text {
            "SEE" => {
                let what = self.next("`GOAL` or `WALL`")?;
                match what.text {
                    "GOAL" => Ok(Condition::SeeGoal),
                    "WALL" => Ok(Condition::SeeWall(self.direction()?)),
                    other => Err(self.error(
                        what.col,
                        format!("expected `GOAL` or `WALL`, found `{other}`"),
                    )),
                }
            }
            "AT" => Ok(Condition::AtRegion(self.region()?)),
            other => Err(self.error(tok.col, format!("expected `SEE` or `AT`, found `{other}`"))),
        }
    }

    fn rule(&mut self) -> Result<ConditionalRule, ParseError> {
        self.keyword("IF")?;
        let condition = self.condition()?;
        self.keyword("THEN")?;
        let response = self.step()?;
        Ok(ConditionalRule {
            condition,
            response,
        })
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.tokens.get(self.pos) {
            Some(tok) => Err(self.error(tok.col, format!("unexpected trailing `{}`", tok.text))),
            None => Ok(()),
        }
    }
}

/// Parses guidance DSL text.
///
/// Every line is parsed as whatever its first keyword announces before the
/// enclosing section is checked, so a malformed item is reported at its bad
/// token even when it also sits in the wrong place.
pub fn parse_program(text: &str) -> Result<GuidanceProgram, ParseError> {
    let mut program = GuidanceProgram {
        source_text: text.to_string(),
        ..Default::default()
    };
    let mut current: Option<(Section, usize, usize)> = None; // (section, header line, items)

    let close = |current: Option<(Section, usize, usize)>| match current {
        Some((section, line, 0)) => Err(ParseError::Syntax {
            line,
            col: 1,
            message: format!("{section:?} section has no items"),
        }),
        _ => Ok(()),
    };

    for (idx, raw) in text.lines().enumerate() {
        let mut line = Line::new(idx + 1, raw);
        if line.is_blank() {
            continue;
        }
        let head = line.tokens[0];
        if let Some(section) = Section::from_keyword(head.text) {
            line.pos = 1;
            line.finish()?;
            close(current)?;
            current = Some((section, line.number, 0));
            continue;
        }
        let (section, item) = match head.text {
            "MOVE" | "GOTO" => (Section::Policy, Item::Step(line.step()?)),
            "REGION" => (Section::Value, Item::Annotation(line.annotation()?)),
            "IF" => (Section::Rules, Item::Rule(line.rule()?)),
            other => {
                return Err(line.error(head.col, format!("unexpected `{other}`")));
            }
        };
        line.finish()?;
        match current.as_mut() {
            Some((s, _, n)) if *s == section => *n += 1,
            _ => {
                return Err(line.error(
                    head.col,
                    format!("`{}` must appear inside a {section:?} section", head.text),
                ))
            }
        }
        match item {
            Item::Step(s) => program.policy_steps.push(s),
            Item::Annotation(a) => program.value_annotations.push(a),
            Item::Rule(r) => program.rules.push(r),
        }
    }
    close(current)?;

    if program.is_empty() {
        return Err(ParseError::EmptyProgram);
    }
    Ok(program)
}

enum Item {
    Step(PolicyStep),
    Annotation(ValueAnnotation),
    Rule(ConditionalRule),
}
