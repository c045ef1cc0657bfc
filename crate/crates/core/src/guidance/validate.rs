use serde::{Deserialize, Serialize};

use super::{Condition, GuidanceProgram, PolicyStep};
use crate::gridworld::{GridMap, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    /// A VALUE region does not fit in the map.
    RegionOutOfBounds,
    /// Tracing the policy from the start leaves the map.
    OutOfBoundsDisplacement,
    /// A `GOTO` target (policy or rule response) is off the map.
    GotoOutOfBounds,
    /// An `AT` condition names a region that does not fit in the map.
    RuleRegionOutOfBounds,
    /// An annotation with a non-positive value never attracts the listener.
    NonPositiveValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    fn error(kind: DiagnosticKind, message: String) -> Self {
        Self {
            severity: Severity::Error,
            kind,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Checks a program against the map's extent. An empty result means the
/// program can be grounded.
pub fn validate(program: &GuidanceProgram, map: &GridMap) -> Vec<Diagnostic> {
    let (w, h) = (map.width(), map.height());
    let inside = |p: Position| p.row < h && p.col < w;
    let mut out = Vec::new();

    for (i, a) in program.value_annotations.iter().enumerate() {
        if !a.region.fits(w, h) {
            out.push(Diagnostic::error(
                DiagnosticKind::RegionOutOfBounds,
                format!("value region #{} ({}) lies outside the {w}x{h} map", i + 1, a.region),
            ));
        }
        if a.value <= 0.0 {
            out.push(Diagnostic {
                severity: Severity::Warning,
                kind: DiagnosticKind::NonPositiveValue,
                message: format!("value region #{} has non-positive value {}", i + 1, a.value),
            });
        }
    }

    let mut pos = map.start();
    let mut left_map = false;
    for (i, step) in program.policy_steps.iter().enumerate() {
        match *step {
            PolicyStep::Move { direction, count } => {
                if left_map {
                    continue;
                }
                for _ in 0..count {
                    match pos.offset(direction).filter(|p| inside(*p)) {
                        Some(next) => pos = next,
                        None => {
                            out.push(Diagnostic::error(
                                DiagnosticKind::OutOfBoundsDisplacement,
                                format!(
                                    "policy step #{} ({step}) leaves the map from {pos}",
                                    i + 1
                                ),
                            ));
                            left_map = true;
                            break;
                        }
                    }
                }
            }
            PolicyStep::Goto(target) if !inside(target) => out.push(Diagnostic::error(
                DiagnosticKind::GotoOutOfBounds,
                format!("policy step #{} targets {target}, outside the map", i + 1),
            )),
            PolicyStep::Goto(_) => {}
        }
    }

    for (i, rule) in program.rules.iter().enumerate() {
        if let Condition::AtRegion(r) = rule.condition {
            if !r.fits(w, h) {
                out.push(Diagnostic::error(
                    DiagnosticKind::RuleRegionOutOfBounds,
                    format!("rule #{} condition region ({r}) lies outside the map", i + 1),
                ));
            }
        }
        if let PolicyStep::Goto(target) = rule.response {
            if !inside(target) {
                out.push(Diagnostic::error(
                    DiagnosticKind::GotoOutOfBounds,
                    format!("rule #{} targets {target}, outside the map", i + 1),
                ));
            }
        }
    }
    out
}
