//! Structural validation of a static model.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagnostic::{Code, Diagnostic, Location};
use crate::legality::legal_flow;
use crate::model::{MachineId, Model, ModelIndex, StageKind, StageRef};

/// Collects diagnostics with their ordering key (machine path, edge step,
/// code, message).
#[derive(Default)]
pub(crate) struct Collector {
    items: Vec<((String, Option<u32>, Code, String), Diagnostic)>,
}

impl Collector {
    pub(crate) fn push(&mut self, path: impl Into<String>, step: Option<u32>, d: Diagnostic) {
        self.items
            .push(((path.into(), step, d.code, d.message.clone()), d));
    }

    pub(crate) fn finish(mut self) -> Vec<Diagnostic> {
        self.items.sort_by(|a, b| a.0.cmp(&b.0));
        self.items.into_iter().map(|(_, d)| d).collect()
    }
}

/// Checks every structural rule of the static model. An empty result means
/// the model is well-formed.
pub fn validate(model: &Model) -> Vec<Diagnostic> {
    let index = ModelIndex::new(model);
    let mut out = Collector::default();

    check_machines(model, &index, &mut out);
    check_things(model, &mut out);
    check_edges(model, &index, &mut out);
    check_unconnected(model, &index, &mut out);

    out.finish()
}

fn check_machines(model: &Model, index: &ModelIndex<'_>, out: &mut Collector) {
    let mut ids: BTreeMap<&MachineId, usize> = BTreeMap::new();
    for m in &model.machines {
        *ids.entry(&m.id).or_default() += 1;
    }
    for (id, n) in &ids {
        if *n > 1 {
            out.push(
                index.display_path(id),
                None,
                Diagnostic::error(
                    Code::DuplicateMachineId,
                    format!("machine id `{id}` is declared {n} times"),
                )
                .at(Location::Machine((*id).clone())),
            );
        }
    }

    let mut paths: BTreeMap<String, usize> = BTreeMap::new();
    for m in &model.machines {
        let path = index.display_path(&m.id);
        if m.name.is_empty() {
            out.push(
                path.clone(),
                None,
                Diagnostic::error(Code::EmptyName, format!("machine `{}` has an empty name", m.id))
                    .at(Location::Machine(m.id.clone())),
            );
        }
        match &m.parent {
            Some(p) if index.machine(p).is_none() => out.push(
                path.clone(),
                None,
                Diagnostic::error(
                    Code::DanglingParent,
                    format!("machine `{}` names unknown parent `{p}`", m.id),
                )
                .at(Location::Machine(m.id.clone())),
            ),
            Some(_) if on_parent_cycle(index, &m.id) => out.push(
                path.clone(),
                None,
                Diagnostic::error(
                    Code::ParentCycle,
                    format!("machine `{}` is its own ancestor", m.id),
                )
                .at(Location::Machine(m.id.clone())),
            ),
            _ => {}
        }
        let mut kinds = BTreeSet::new();
        for k in &m.stages {
            if !kinds.insert(*k) {
                out.push(
                    path.clone(),
                    None,
                    Diagnostic::error(
                        Code::DuplicateStageKind,
                        format!("machine `{path}` declares stage `{k}` more than once"),
                    )
                    .at(Location::Stage(StageRef {
                        machine: m.id.clone(),
                        kind: *k,
                    })),
                );
            }
        }
        if let Some(p) = index.path(&m.id) {
            *paths.entry(p.to_string()).or_default() += 1;
        }
    }
    for (path, n) in paths {
        if n > 1 {
            out.push(
                path.clone(),
                None,
                Diagnostic::error(
                    Code::DuplicateMachinePath,
                    format!("machine path `{path}` is used by {n} machines"),
                ),
            );
        }
    }
}

fn on_parent_cycle(index: &ModelIndex<'_>, start: &MachineId) -> bool {
    let mut seen = BTreeSet::new();
    let mut cur = index.machine(start);
    while let Some(m) = cur {
        if !seen.insert(&m.id) {
            return &m.id == start;
        }
        cur = m.parent.as_ref().and_then(|p| index.machine(p));
    }
    false
}

fn check_things(model: &Model, out: &mut Collector) {
    let mut ids = BTreeMap::new();
    for t in &model.things {
        *ids.entry(&t.id).or_insert(0usize) += 1;
        if t.name.is_empty() {
            out.push(
                "",
                None,
                Diagnostic::error(Code::EmptyName, format!("thing `{}` has an empty name", t.id))
                    .at(Location::Thing(t.id.clone())),
            );
        }
    }
    for (id, n) in ids {
        if n > 1 {
            out.push(
                "",
                None,
                Diagnostic::error(
                    Code::DuplicateThingId,
                    format!("thing id `{id}` is declared {n} times"),
                )
                .at(Location::Thing(id.clone())),
            );
        }
    }
}

fn check_endpoint(
    index: &ModelIndex<'_>,
    r: &StageRef,
    path: &str,
    step: Option<u32>,
    loc: &Location,
    out: &mut Collector,
) -> bool {
    match index.machine(&r.machine) {
        None => {
            out.push(
                path,
                step,
                Diagnostic::error(
                    Code::DanglingMachine,
                    format!("`{r}` refers to unknown machine `{}`", r.machine),
                )
                .at(loc.clone()),
            );
            false
        }
        Some(m) if !m.has_stage(r.kind) => {
            out.push(
                path,
                step,
                Diagnostic::error(
                    Code::MissingStage,
                    format!(
                        "machine `{}` has no {} stage",
                        index.display_path(&r.machine),
                        r.kind
                    ),
                )
                .at(loc.clone()),
            );
            false
        }
        Some(_) => true,
    }
}

fn check_edges(model: &Model, index: &ModelIndex<'_>, out: &mut Collector) {
    for (i, f) in model.flows.iter().enumerate() {
        let path = index.display_path(&f.from.machine);
        let loc = Location::Flow(i);
        if model.thing(&f.thing).is_none() {
            out.push(
                path.clone(),
                f.step,
                Diagnostic::error(
                    Code::DanglingThing,
                    format!("flow refers to unknown thing `{}`", f.thing),
                )
                .at(loc.clone()),
            );
        }
        check_endpoint(index, &f.from, &path, f.step, &loc, out);
        check_endpoint(index, &f.to, &path, f.step, &loc, out);
        if !legal_flow(&f.from, &f.to) {
            out.push(
                path.clone(),
                f.step,
                Diagnostic::error(
                    Code::FlowIllegalAdjacency,
                    format!(
                        "{} cannot flow from {} to {}",
                        f.thing,
                        describe(index, &f.from),
                        describe(index, &f.to)
                    ),
                )
                .at(loc.clone()),
            );
        }
        if f.leak && f.from.kind == StageKind::Transfer {
            out.push(
                path.clone(),
                f.step,
                Diagnostic::error(
                    Code::LeakFromTransfer,
                    format!("leak flow of {} starts at a transfer stage", f.thing),
                )
                .at(loc),
            );
        }
    }

    for (i, t) in model.triggers.iter().enumerate() {
        let path = index.display_path(&t.from.machine);
        let loc = Location::Trigger(i);
        check_endpoint(index, &t.from, &path, None, &loc, out);
        check_endpoint(index, &t.to, &path, None, &loc, out);
        if t.from == t.to {
            out.push(
                path.clone(),
                None,
                Diagnostic::error(
                    Code::TriggerSelfLoop,
                    format!("trigger from {} to itself", describe(index, &t.from)),
                )
                .at(loc.clone()),
            );
        }
        if let Some(c) = &t.creates {
            if model.thing(c).is_none() {
                out.push(
                    path.clone(),
                    None,
                    Diagnostic::error(
                        Code::DanglingThing,
                        format!("trigger creates unknown thing `{c}`"),
                    )
                    .at(loc.clone()),
                );
            }
            if t.to.kind != StageKind::Create {
                out.push(
                    path.clone(),
                    None,
                    Diagnostic::error(
                        Code::TriggerCreatesNonCreate,
                        format!(
                            "trigger creates `{c}` at {}, which is not a create stage",
                            describe(index, &t.to)
                        ),
                    )
                    .at(loc),
                );
            }
        }
    }
}

fn check_unconnected(model: &Model, index: &ModelIndex<'_>, out: &mut Collector) {
    let mut touched: BTreeSet<&StageRef> = BTreeSet::new();
    for f in &model.flows {
        touched.insert(&f.from);
        touched.insert(&f.to);
    }
    for t in &model.triggers {
        touched.insert(&t.from);
        touched.insert(&t.to);
    }
    for m in &model.machines {
        let kinds: BTreeSet<StageKind> = m.stages.iter().copied().collect();
        for kind in kinds {
            let r = StageRef {
                machine: m.id.clone(),
                kind,
            };
            if !touched.contains(&r) {
                let path = index.display_path(&m.id);
                out.push(
                    path.clone(),
                    None,
                    Diagnostic::warning(
                        Code::StageUnconnected,
                        format!("stage {path}.{kind} has no incident flow or trigger"),
                    )
                    .at(Location::Stage(r)),
                );
            }
        }
    }
}

fn describe(index: &ModelIndex<'_>, r: &StageRef) -> String {
    format!("{}.{}", index.display_path(&r.machine), r.kind)
}
