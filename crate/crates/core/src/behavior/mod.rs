//! Dynamic behavior: events are regions of the static model stamped with an
//! ordinal time, a chronology orders them, and scenarios pick branches.

mod simulate;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::diagnostic::Diagnostic;
use crate::model::{Model, StageRef, ThingId};

pub use simulate::{simulate, SimulationError};
pub use validate::{reachable_events, validate_behavior, UnknownEvent};

/// Reference to an edge of the static model from inside an event region.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeRef {
    /// Every flow carrying this step number.
    Step(u32),
    Flow {
        thing: ThingId,
        from: StageRef,
        to: StageRef,
    },
    Trigger { from: StageRef, to: StageRef },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub id: String,
    pub label: String,
    pub time: u32,
    pub stages: BTreeSet<StageRef>,
    pub edges: BTreeSet<EdgeRef>,
}

impl Event {
    pub fn new(id: impl Into<String>, time: u32) -> Self {
        Event {
            id: id.into(),
            label: String::new(),
            time,
            stages: BTreeSet::new(),
            edges: BTreeSet::new(),
        }
    }
}

/// A guard is a variable name, optionally negated with a leading `!`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guard<'a> {
    pub var: &'a str,
    pub negated: bool,
}

impl<'a> Guard<'a> {
    pub fn parse(text: &'a str) -> Option<Guard<'a>> {
        let (negated, var) = match text.strip_prefix('!') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let mut chars = var.chars();
        let head_ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        (head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_'))
            .then_some(Guard { var, negated })
    }

    /// `None` when the variable has no value in `choices`.
    pub fn eval(&self, choices: &BTreeMap<String, bool>) -> Option<bool> {
        choices.get(self.var).map(|v| *v != self.negated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChronEdge {
    pub from: String,
    pub to: String,
    pub guard: Option<String>,
}

impl ChronEdge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        ChronEdge {
            from: from.into(),
            to: to.into(),
            guard: None,
        }
    }

    pub fn guarded(from: impl Into<String>, to: impl Into<String>, guard: &str) -> Self {
        ChronEdge {
            guard: Some(guard.to_string()),
            ..ChronEdge::new(from, to)
        }
    }
}

/// Guarded succession graph over events. Cycles are allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chronology {
    pub edges: Vec<ChronEdge>,
}

impl Chronology {
    pub fn out_edges<'a>(&'a self, event: &'a str) -> impl Iterator<Item = &'a ChronEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == event)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scenario {
    pub name: String,
    pub start: String,
    pub guard_choices: BTreeMap<String, bool>,
    pub max_steps: u32,
}

impl Scenario {
    pub fn new(name: impl Into<String>, start: impl Into<String>, max_steps: u32) -> Self {
        Scenario {
            name: name.into(),
            start: start.into(),
            guard_choices: BTreeMap::new(),
            max_steps,
        }
    }

    pub fn with_guard(mut self, var: &str, value: bool) -> Self {
        self.guard_choices.insert(var.to_string(), value);
        self
    }
}

/// Everything declared about dynamics in one model file.
#[derive(Debug, Clone, Default)]
pub struct Behavior {
    pub events: Vec<Event>,
    pub chronology: Chronology,
    pub scenarios: Vec<Scenario>,
}

impl Behavior {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && self.chronology.edges.is_empty() && self.scenarios.is_empty()
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Region, chronology and scenario diagnostics against `model`.
    pub fn check(&self, model: &Model) -> Vec<Diagnostic> {
        let mut out = validate_behavior(model, &self.events, &self.chronology);
        out.extend(validate::validate_scenarios(&self.events, &self.scenarios));
        out
    }

    pub fn canonical(&self) -> Behavior {
        let mut b = self.clone();
        b.events.sort();
        b.chronology.edges.sort();
        b.scenarios.sort();
        b
    }
}

impl PartialEq for Behavior {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.events == b.events && a.chronology == b.chronology && a.scenarios == b.scenarios
    }
}

impl Eq for Behavior {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    NoSuccessor,
    MaxSteps,
    GuardUnresolved,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::NoSuccessor => "NoSuccessor",
            Termination::MaxSteps => "MaxSteps",
            Termination::GuardUnresolved => "GuardUnresolved",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Firing {
    pub event: String,
    pub stages: Vec<StageRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub firings: Vec<Firing>,
    pub terminated: Termination,
}

impl Trace {
    pub fn event_ids(&self) -> Vec<&str> {
        self.firings.iter().map(|f| f.event.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_parsing() {
        assert_eq!(
            Guard::parse("!fraud"),
            Some(Guard {
                var: "fraud",
                negated: true
            })
        );
        assert_eq!(Guard::parse("ok_1").map(|g| g.negated), Some(false));
        assert_eq!(Guard::parse(""), None);
        assert_eq!(Guard::parse("!"), None);
        assert_eq!(Guard::parse("!!x"), None);
        assert_eq!(Guard::parse("1x"), None);
    }

    #[test]
    fn guard_eval() {
        let choices: BTreeMap<String, bool> = [("fraud".to_string(), false)].into();
        assert_eq!(Guard::parse("fraud").unwrap().eval(&choices), Some(false));
        assert_eq!(Guard::parse("!fraud").unwrap().eval(&choices), Some(true));
        assert_eq!(Guard::parse("other").unwrap().eval(&choices), None);
    }
}
