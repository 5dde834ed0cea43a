//! Diagnostics are values: every checker returns them instead of failing.

use std::fmt;

use serde::Serialize;

use crate::model::{MachineId, StageRef, ThingId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Position in source text. `line` and `column` are 1-based and count
/// characters; `length` is in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        SourceSpan {
            line,
            column,
            length,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "at", rename_all = "snake_case")]
pub enum Location {
    Span(SourceSpan),
    Machine(MachineId),
    Thing(ThingId),
    Stage(StageRef),
    /// Index into `Model::flows`.
    Flow(usize),
    /// Index into `Model::triggers`.
    Trigger(usize),
    Event(String),
    Scenario(String),
    /// Field path inside a structured document, e.g. `$.machines[0].name`.
    Field(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Span(s) => write!(f, "{s}"),
            Location::Machine(m) => write!(f, "machine {m}"),
            Location::Thing(t) => write!(f, "thing {t}"),
            Location::Stage(s) => write!(f, "stage {s}"),
            Location::Flow(i) => write!(f, "flow #{i}"),
            Location::Trigger(i) => write!(f, "trigger #{i}"),
            Location::Event(e) => write!(f, "event {e}"),
            Location::Scenario(s) => write!(f, "scenario {s}"),
            Location::Field(p) => write!(f, "{p}"),
        }
    }
}

macro_rules! codes {
    ($($(#[$meta:meta])* $variant:ident => $text:literal,)*) => {
        /// Closed set of diagnostic codes. Ordered by their text.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Code {
            $($(#[$meta])* $variant,)*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Code::$variant => $text,)*
                }
            }
        }
    };
}

codes! {
    // text
    LexInvalidChar => "LEX_INVALID_CHAR",
    LexUnterminatedString => "LEX_UNTERMINATED_STRING",
    LexIntOverflow => "LEX_INT_OVERFLOW",
    SyntaxUnexpectedToken => "SYNTAX_UNEXPECTED_TOKEN",
    SyntaxUnexpectedEof => "SYNTAX_UNEXPECTED_EOF",
    SyntaxDuplicateAttribute => "SYNTAX_DUPLICATE_ATTRIBUTE",
    // static model
    EmptyName => "EMPTY_NAME",
    DuplicateMachineId => "DUPLICATE_MACHINE_ID",
    DuplicateMachinePath => "DUPLICATE_MACHINE_PATH",
    DuplicateThingId => "DUPLICATE_THING_ID",
    DanglingParent => "DANGLING_PARENT",
    ParentCycle => "PARENT_CYCLE",
    DuplicateStageKind => "DUPLICATE_STAGE_KIND",
    DanglingMachine => "DANGLING_MACHINE",
    MissingStage => "MISSING_STAGE",
    DanglingThing => "DANGLING_THING",
    FlowIllegalAdjacency => "FLOW_ILLEGAL_ADJACENCY",
    LeakFromTransfer => "LEAK_FROM_TRANSFER",
    TriggerSelfLoop => "TRIGGER_SELF_LOOP",
    TriggerCreatesNonCreate => "TRIGGER_CREATES_NON_CREATE",
    StageUnconnected => "STAGE_UNCONNECTED",
    /// Model cannot be written as `.tm` text without losing information.
    TextUnrepresentable => "TEXT_UNREPRESENTABLE",
    // behavior
    DuplicateEventId => "DUPLICATE_EVENT_ID",
    RegionEmpty => "REGION_EMPTY",
    RegionDanglingStage => "REGION_DANGLING_STAGE",
    RegionDanglingEdge => "REGION_DANGLING_EDGE",
    RegionEdgeOutside => "REGION_EDGE_OUTSIDE",
    RegionDisconnected => "REGION_DISCONNECTED",
    ChronDanglingEvent => "CHRON_DANGLING_EVENT",
    ChronGuardShape => "CHRON_GUARD_SHAPE",
    EventUnreachable => "EVENT_UNREACHABLE",
    DuplicateScenario => "DUPLICATE_SCENARIO",
    ScenarioDanglingStart => "SCENARIO_DANGLING_START",
    ScenarioInvalidBound => "SCENARIO_INVALID_BOUND",
    // policy
    PolicyUnknownThing => "POLICY_UNKNOWN_THING",
    PolicyUnknownMachine => "POLICY_UNKNOWN_MACHINE",
    PolicyNotSensitive => "POLICY_NOT_SENSITIVE",
    // structured documents
    SchemaSyntax => "SCHEMA_SYNTAX",
    SchemaVersionMissing => "SCHEMA_VERSION_MISSING",
    SchemaVersionUnsupported => "SCHEMA_VERSION_UNSUPPORTED",
    SchemaInvalid => "SCHEMA_INVALID",
}

impl Ord for Code {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for Code {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub location: Option<Location>,
}

impl Diagnostic {
    pub fn error(code: Code, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            location: None,
        }
    }

    pub fn warning(code: Code, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(code, message)
        }
    }

    pub fn at(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn span(&self) -> Option<SourceSpan> {
        match self.location {
            Some(Location::Span(s)) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.severity, self.code)?;
        if let Some(loc) = &self.location {
            write!(f, " at {loc}")?;
        }
        write!(f, ": {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_unique_screaming_snake() {
        let mut seen = std::collections::BTreeSet::new();
        for c in Code::ALL {
            let s = c.as_str();
            assert!(seen.insert(s), "duplicate code {s}");
            assert!(s.chars().all(|ch| ch.is_ascii_uppercase() || ch == '_'));
        }
    }

    #[test]
    fn display_includes_code_and_location() {
        let d = Diagnostic::error(Code::FlowIllegalAdjacency, "bad")
            .at(Location::Span(SourceSpan::new(3, 7, 2)));
        assert_eq!(d.to_string(), "error FLOW_ILLEGAL_ADJACENCY at 3:7: bad");
    }
}
