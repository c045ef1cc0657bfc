//! Guidance programs: the symbolic form an explanation compiles into, and
//! the grounding pass that turns one into a policy prior and value map.
//!
//! Concrete syntax (line oriented, `#` starts a comment):
//!
//! ```text
//! POLICY
//! MOVE RIGHT 2
//! GOTO 3 1
//! VALUE
//! REGION 3 1 3 1 10
//! RULES
//! IF SEE WALL UP THEN MOVE RIGHT 1
//! ```

mod ground;
mod parse;
mod validate;

pub use ground::{ground, CompiledGuidance, Cursor, GroundingParams};
pub use parse::{parse_program, ParseError};
pub use validate::{validate, Diagnostic, DiagnosticKind, Severity};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gridworld::{Action, Position};

/// Value assigned to a `GOTO` target when it is desugared into a region.
pub const GOTO_VALUE: f64 = 10.0;

/// Inclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub r0: usize,
    pub c0: usize,
    pub r1: usize,
    pub c1: usize,
}

impl Region {
    pub fn new(r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        debug_assert!(r0 <= r1 && c0 <= c1);
        Self { r0, c0, r1, c1 }
    }

    pub fn cell(p: Position) -> Self {
        Self::new(p.row, p.col, p.row, p.col)
    }

    pub fn contains(&self, p: Position) -> bool {
        (self.r0..=self.r1).contains(&p.row) && (self.c0..=self.c1).contains(&p.col)
    }

    /// Manhattan distance from `p` to the nearest cell of the region.
    pub fn distance(&self, p: Position) -> usize {
        let dr = if p.row < self.r0 {
            self.r0 - p.row
        } else {
            p.row.saturating_sub(self.r1)
        };
        let dc = if p.col < self.c0 {
            self.c0 - p.col
        } else {
            p.col.saturating_sub(self.c1)
        };
        dr + dc
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.r1 < height && self.c1 < width
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.r0, self.c0, self.r1, self.c1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyStep {
    Move { direction: Action, count: u32 },
    /// Desugared into a value annotation at grounding time.
    Goto(Position),
}

impl fmt::Display for PolicyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyStep::Move { direction, count } => write!(f, "MOVE {direction} {count}"),
            PolicyStep::Goto(p) => write!(f, "GOTO {} {}", p.row, p.col),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueAnnotation {
    pub region: Region,
    pub value: f64,
}

impl fmt::Display for ValueAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "REGION {} {}", self.region, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    SeeGoal,
    SeeWall(Action),
    AtRegion(Region),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::SeeGoal => f.write_str("SEE GOAL"),
            Condition::SeeWall(d) => write!(f, "SEE WALL {d}"),
            Condition::AtRegion(r) => write!(f, "AT {r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionalRule {
    pub condition: Condition,
    pub response: PolicyStep,
}

impl fmt::Display for ConditionalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IF {} THEN {}", self.condition, self.response)
    }
}

/// A parsed guidance program. Equality is structural: `source_text` is
/// provenance and does not take part in comparisons.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct GuidanceProgram {
    pub policy_steps: Vec<PolicyStep>,
    pub value_annotations: Vec<ValueAnnotation>,
    pub rules: Vec<ConditionalRule>,
    pub source_text: String,
}

impl PartialEq for GuidanceProgram {
    fn eq(&self, other: &Self) -> bool {
        self.policy_steps == other.policy_steps
            && self.value_annotations == other.value_annotations
            && self.rules == other.rules
    }
}

impl GuidanceProgram {
    pub fn is_empty(&self) -> bool {
        self.policy_steps.is_empty() && self.value_annotations.is_empty() && self.rules.is_empty()
    }

    /// Value annotations including desugared `GOTO` targets.
    pub fn effective_annotations(&self) -> Vec<ValueAnnotation> {
        let mut out = self.value_annotations.clone();
        out.extend(self.policy_steps.iter().filter_map(|s| match s {
            PolicyStep::Goto(p) => Some(ValueAnnotation {
                region: Region::cell(*p),
                value: GOTO_VALUE,
            }),
            PolicyStep::Move { .. } => None,
        }));
        out
    }

    /// Canonical text. Sections appear in POLICY, VALUE, RULES order and
    /// empty sections are omitted.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, lines: Vec<String>| {
            if !lines.is_empty() {
                out.push_str(name);
                out.push('\n');
                for l in lines {
                    out.push_str(&l);
                    out.push('\n');
                }
            }
        };
        section("POLICY", self.policy_steps.iter().map(ToString::to_string).collect());
        section("VALUE", self.value_annotations.iter().map(ToString::to_string).collect());
        section("RULES", self.rules.iter().map(ToString::to_string).collect());
        out
    }
}

impl fmt::Display for GuidanceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl From<GuidanceProgram> for String {
    fn from(p: GuidanceProgram) -> String {
        p.serialize()
    }
}

impl TryFrom<String> for GuidanceProgram {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_program(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_distance() {
        let r = Region::new(2, 2, 3, 4);
        assert_eq!(r.distance(Position::new(2, 3)), 0);
        assert_eq!(r.distance(Position::new(0, 0)), 4);
        assert_eq!(r.distance(Position::new(5, 6)), 4);
        assert_eq!(r.distance(Position::new(3, 0)), 2);
    }

    #[test]
    fn serialize_is_canonical() {
        let text = "RULES\nIF SEE GOAL THEN MOVE LEFT 1\nVALUE\nREGION 3 1 3 1 10\nPOLICY\nMOVE RIGHT 2\n";
        let p = parse_program(text).unwrap();
        assert_eq!(
            p.serialize(),
            "POLICY\nMOVE RIGHT 2\nVALUE\nREGION 3 1 3 1 10\nRULES\nIF SEE GOAL THEN MOVE LEFT 1\n"
        );
        assert_eq!(parse_program(&p.serialize()).unwrap(), p);
    }

    #[test]
    fn goto_desugars_to_annotation() {
        let p = parse_program("POLICY\nGOTO 3 1\n").unwrap();
        let a = p.effective_annotations();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].region, Region::cell(Position::new(3, 1)));
        assert_eq!(a[0].value, GOTO_VALUE);
    }
}
