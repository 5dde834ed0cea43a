//! Leakage analysis.
//!
//! Sensitive things are traced from where they enter the model (their
//! creation, or their arrival from an external machine) along flows of the
//! same thing and, when the policy allows it, across triggers into whatever
//! the triggered stage goes on to emit. A machine holding a sensitive thing
//! without authorization is a leakage machine.

mod policy;
mod taint;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostic::{Code, Diagnostic, Location};
use crate::model::{MachineId, Model, ModelIndex, StageKind, StageRef, ThingId};

pub use policy::{parse_policy, PolicyResult};
pub use taint::{analyze, classify, taint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    /// Things treated as sensitive in addition to those flagged in the model.
    pub sensitive: BTreeSet<ThingId>,
    /// Machines allowed to hold each thing. Authorizing a machine covers all
    /// of its descendants.
    pub authorized: BTreeMap<ThingId, BTreeSet<MachineId>>,
    pub propagate_triggers: bool,
    /// Machines reported whenever taint reaches them, authorized or not.
    pub declared_sinks: BTreeSet<MachineId>,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            sensitive: BTreeSet::new(),
            authorized: BTreeMap::new(),
            propagate_triggers: true,
            declared_sinks: BTreeSet::new(),
        }
    }
}

impl Policy {
    pub fn authorize(mut self, thing: &str, machine: &str) -> Self {
        self.authorized
            .entry(ThingId::from(thing))
            .or_default()
            .insert(MachineId::from(machine));
        self
    }

    pub fn is_sensitive(&self, model: &Model, thing: &ThingId) -> bool {
        self.sensitive.contains(thing) || model.thing(thing).is_some_and(|t| t.sensitive)
    }

    /// Whether `machine` or one of its ancestors is authorized for `thing`.
    pub fn covers(&self, index: &ModelIndex<'_>, thing: &ThingId, machine: &MachineId) -> bool {
        self.authorized
            .get(thing)
            .is_some_and(|set| index.ancestry(machine).into_iter().any(|m| set.contains(m)))
    }

    /// Authorized and not a declared sink. Crossing out of this territory is
    /// what a finding's source kind describes.
    pub(crate) fn inside(&self, index: &ModelIndex<'_>, thing: &ThingId, machine: &MachineId) -> bool {
        self.covers(index, thing, machine) && !self.declared_sinks.contains(machine)
    }
}

/// Checks that every id a policy mentions exists and that only sensitive
/// things are authorized.
pub fn check_policy(model: &Model, policy: &Policy) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let unknown_thing = |t: &ThingId| {
        Diagnostic::error(Code::PolicyUnknownThing, format!("policy names unknown thing `{t}`"))
            .at(Location::Thing(t.clone()))
    };
    let unknown_machine = |m: &MachineId| {
        Diagnostic::error(Code::PolicyUnknownMachine, format!("policy names unknown machine `{m}`"))
            .at(Location::Machine(m.clone()))
    };
    for t in &policy.sensitive {
        if model.thing(t).is_none() {
            out.push(unknown_thing(t));
        }
    }
    for (t, machines) in &policy.authorized {
        if model.thing(t).is_none() {
            out.push(unknown_thing(t));
        } else if !policy.is_sensitive(model, t) {
            out.push(
                Diagnostic::error(
                    Code::PolicyNotSensitive,
                    format!("`{t}` is authorized but not sensitive"),
                )
                .at(Location::Thing(t.clone())),
            );
        }
        out.extend(machines.iter().filter(|m| model.machine(m).is_none()).map(unknown_machine));
    }
    out.extend(
        policy
            .declared_sinks
            .iter()
            .filter(|m| model.machine(m).is_none())
            .map(unknown_machine),
    );
    out
}

/// Where a leak draws its information from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakSourceKind {
    Received,
    Processed,
    Created,
    Released,
}

impl LeakSourceKind {
    pub const ALL: [LeakSourceKind; 4] = [
        LeakSourceKind::Received,
        LeakSourceKind::Processed,
        LeakSourceKind::Created,
        LeakSourceKind::Released,
    ];

    /// `None` for Transfer, which is never a source on its own.
    pub fn of_stage(kind: StageKind) -> Option<LeakSourceKind> {
        match kind {
            StageKind::Create => Some(LeakSourceKind::Created),
            StageKind::Process => Some(LeakSourceKind::Processed),
            StageKind::Receive => Some(LeakSourceKind::Received),
            StageKind::Release => Some(LeakSourceKind::Released),
            StageKind::Transfer => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LeakSourceKind::Received => "received",
            LeakSourceKind::Processed => "processed",
            LeakSourceKind::Created => "created",
            LeakSourceKind::Released => "released",
        }
    }
}

impl fmt::Display for LeakSourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sensitive things that can reach each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaintMap {
    pub stages: BTreeMap<StageRef, BTreeSet<ThingId>>,
}

impl TaintMap {
    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn things_at(&self, stage: &StageRef) -> Option<&BTreeSet<ThingId>> {
        self.stages.get(stage)
    }

    pub fn is_tainted(&self, stage: &StageRef, thing: &ThingId) -> bool {
        self.stages.get(stage).is_some_and(|s| s.contains(thing))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub thing: ThingId,
    pub leak_machine: MachineId,
    pub leak_machine_path: String,
    /// Actor of the leak machine, or of its nearest ancestor that has one.
    pub activator: Option<String>,
    pub source_kind: LeakSourceKind,
    /// Seed first, a stage of the leak machine last.
    pub evidence: Vec<StageRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("model has {} error(s)", .0.len())]
    InvalidModel(Vec<Diagnostic>),
    #[error("policy has {} error(s)", .0.len())]
    InvalidPolicy(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("evidence never leaves authorized machines")]
    NoCrossing,
}
