//! Canonical text form of a model.
//!
//! Machines appear as nested blocks in path order with stages in kind order,
//! then things alphabetically, flows by (step, endpoints), triggers by
//! endpoints, and finally any behavior. Indentation is two spaces and the
//! output ends with a newline.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::behavior::{Behavior, EdgeRef, Guard};
use crate::diagnostic::{Code, Diagnostic};
use crate::model::{Machine, MachineId, Model, ModelIndex, StageRef};
use crate::validate::validate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model is invalid ({} error(s))", .0.len())]
pub struct InvalidModel(pub Vec<Diagnostic>);

/// Serializes a valid model. Machines are written under their names, so
/// machine ids come back as paths when the text is parsed again.
pub fn serialize(model: &Model) -> Result<String, InvalidModel> {
    serialize_document(model, None)
}

/// Serializes a model and, when given, its behavior declarations.
pub fn serialize_document(model: &Model, behavior: Option<&Behavior>) -> Result<String, InvalidModel> {
    let mut errors: Vec<_> = validate(model).into_iter().filter(|d| d.is_error()).collect();
    if errors.is_empty() {
        errors = unrepresentable(model, behavior);
    }
    if !errors.is_empty() {
        return Err(InvalidModel(errors));
    }
    let index = ModelIndex::new(model);
    let mut out = String::new();
    let mut sections: Vec<String> = Vec::new();

    let mut children: BTreeMap<Option<&MachineId>, Vec<&Machine>> = BTreeMap::new();
    for m in &model.machines {
        children.entry(m.parent.as_ref()).or_default().push(m);
    }
    for list in children.values_mut() {
        list.sort_by(|a, b| a.name.cmp(&b.name));
    }
    if let Some(roots) = children.get(&None) {
        let mut s = String::new();
        for m in roots {
            write_machine(&mut s, m, &children, 0);
        }
        sections.push(s);
    }

    if !model.things.is_empty() {
        let mut things: Vec<_> = model.things.iter().collect();
        things.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
        let mut s = String::new();
        for t in things {
            let attrs = if t.sensitive { " [sensitive]" } else { "" };
            writeln!(s, "thing {}{attrs};", t.name).unwrap();
        }
        sections.push(s);
    }

    let sref = |r: &StageRef| format!("{}.{}", index.display_path(&r.machine), r.kind);
    let skey = |r: &StageRef| index.stage_key(r);

    if !model.flows.is_empty() {
        let mut flows: Vec<_> = model.flows.iter().collect();
        flows.sort_by_key(|f| (f.step.is_none(), f.step, skey(&f.from), skey(&f.to), f.thing.clone(), f.leak));
        let mut s = String::new();
        for f in flows {
            let attrs = match (f.step, f.leak) {
                (None, false) => String::new(),
                (None, true) => " [leak]".to_string(),
                (Some(n), false) => format!(" [step={n}]"),
                (Some(n), true) => format!(" [step={n}, leak]"),
            };
            writeln!(s, "flow {}: {} -> {}{attrs};", f.thing, sref(&f.from), sref(&f.to)).unwrap();
        }
        sections.push(s);
    }

    if !model.triggers.is_empty() {
        let mut triggers: Vec<_> = model.triggers.iter().collect();
        triggers.sort_by_key(|t| (skey(&t.from), skey(&t.to), t.creates.clone()));
        let mut s = String::new();
        for t in triggers {
            let attrs = t
                .creates
                .as_ref()
                .map(|c| format!(" [creates={c}]"))
                .unwrap_or_default();
            writeln!(s, "trigger: {} => {}{attrs};", sref(&t.from), sref(&t.to)).unwrap();
        }
        sections.push(s);
    }

    if let Some(b) = behavior {
        write_behavior(&mut sections, b, &index);
    }

    for (i, s) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(s);
    }
    Ok(out)
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Text names machines by path and things by name, and every name must lex
/// as an identifier.
fn unrepresentable(model: &Model, behavior: Option<&Behavior>) -> Vec<Diagnostic> {
    let index = ModelIndex::new(model);
    let mut out = Vec::new();
    let mut flag = |what: String| {
        out.push(Diagnostic::error(Code::TextUnrepresentable, what));
    };
    for m in &model.machines {
        if !is_identifier(&m.name) {
            flag(format!("machine name `{}` is not an identifier", m.name));
        } else if index.path(&m.id) != Some(m.id.as_str()) {
            flag(format!("machine id `{}` differs from its path", m.id));
        }
    }
    for t in &model.things {
        if !is_identifier(&t.name) {
            flag(format!("thing name `{}` is not an identifier", t.name));
        } else if t.id.as_str() != t.name {
            flag(format!("thing id `{}` differs from its name", t.id));
        }
    }
    if let Some(b) = behavior {
        let refs = b.events.iter().flat_map(|e| {
            e.stages.iter().chain(e.edges.iter().flat_map(|r| match r {
                EdgeRef::Step(_) => vec![],
                EdgeRef::Flow { from, to, .. } | EdgeRef::Trigger { from, to } => vec![from, to],
            }))
        });
        for r in refs {
            if !r.machine.as_str().split('/').all(is_identifier) {
                flag(format!("stage reference `{r}` is not a machine path"));
            }
        }
        for e in &b.events {
            if !is_identifier(&e.id) {
                flag(format!("event id `{}` is not an identifier", e.id));
            }
            for r in &e.edges {
                if let EdgeRef::Flow { thing, .. } = r {
                    if !is_identifier(thing.as_str()) {
                        flag(format!("thing `{thing}` is not an identifier"));
                    }
                }
            }
        }
        for c in &b.chronology.edges {
            let guard_ok = c.guard.as_deref().is_none_or(|g| Guard::parse(g).is_some());
            if !is_identifier(&c.from) || !is_identifier(&c.to) || !guard_ok {
                flag(format!("chronology edge {} -> {} is not representable", c.from, c.to));
            }
        }
        for s in &b.scenarios {
            let names = [&s.name, &s.start].into_iter().chain(s.guard_choices.keys());
            if !names.into_iter().all(|n| is_identifier(n)) {
                flag(format!("scenario `{}` uses a name that is not an identifier", s.name));
            }
        }
    }
    out
}

fn write_machine(
    out: &mut String,
    m: &Machine,
    children: &BTreeMap<Option<&MachineId>, Vec<&Machine>>,
    depth: usize,
) {
    let pad = "  ".repeat(depth);
    let mut attrs = Vec::new();
    if let Some(a) = &m.actor {
        attrs.push(format!("actor={}", quote(a)));
    }
    if m.external {
        attrs.push("external".to_string());
    }
    let attrs = if attrs.is_empty() {
        String::new()
    } else {
        format!(" [{}]", attrs.join(", "))
    };
    writeln!(out, "{pad}machine {}{attrs} {{", m.name).unwrap();
    let mut stages = m.stages.clone();
    stages.sort();
    for k in stages {
        writeln!(out, "{pad}  stage {k};").unwrap();
    }
    for child in children.get(&Some(&m.id)).into_iter().flatten() {
        write_machine(out, child, children, depth + 1);
    }
    writeln!(out, "{pad}}}").unwrap();
}

fn write_behavior(sections: &mut Vec<String>, b: &Behavior, index: &ModelIndex<'_>) {
    let sref = |r: &StageRef| format!("{}.{}", index.display_path(&r.machine), r.kind);

    if !b.events.is_empty() {
        let mut events: Vec<_> = b.events.iter().collect();
        events.sort_by(|a, b| (a.time, &a.id).cmp(&(b.time, &b.id)));
        let mut s = String::new();
        for e in events {
            let label = if e.label.is_empty() {
                String::new()
            } else {
                format!(", label={}", quote(&e.label))
            };
            writeln!(s, "event {} [time={}{label}] {{", e.id, e.time).unwrap();
            if !e.stages.is_empty() {
                let mut stages: Vec<_> = e.stages.iter().collect();
                stages.sort_by_key(|r| index.stage_key(r));
                let list: Vec<_> = stages.into_iter().map(sref).collect();
                writeln!(s, "  region: {};", list.join(", ")).unwrap();
            }
            if !e.edges.is_empty() {
                let mut edges: Vec<_> = e.edges.iter().collect();
                edges.sort_by_key(|r| edge_key(r, index));
                let list: Vec<_> = edges
                    .into_iter()
                    .map(|r| match r {
                        EdgeRef::Step(n) => format!("step {n}"),
                        EdgeRef::Flow { thing, from, to } => format!("{thing}: {} -> {}", sref(from), sref(to)),
                        EdgeRef::Trigger { from, to } => format!("{} => {}", sref(from), sref(to)),
                    })
                    .collect();
                writeln!(s, "  edges: {};", list.join(", ")).unwrap();
            }
            s.push_str("}\n");
        }
        sections.push(s);
    }

    if !b.chronology.edges.is_empty() {
        let order: BTreeMap<&str, (u32, &str)> = b
            .events
            .iter()
            .map(|e| (e.id.as_str(), (e.time, e.id.as_str())))
            .collect();
        let rank = |id: &str| order.get(id).copied().unwrap_or((u32::MAX, ""));
        let mut edges: Vec<_> = b.chronology.edges.iter().collect();
        edges.sort_by(|x, y| {
            (rank(&x.from), &x.from, rank(&x.to), &x.to, &x.guard)
                .cmp(&(rank(&y.from), &y.from, rank(&y.to), &y.to, &y.guard))
        });
        let mut s = String::new();
        for e in edges {
            let guard = e
                .guard
                .as_ref()
                .map(|g| format!(" [guard={g}]"))
                .unwrap_or_default();
            writeln!(s, "chron: {} -> {}{guard};", e.from, e.to).unwrap();
        }
        sections.push(s);
    }

    if !b.scenarios.is_empty() {
        let mut scenarios: Vec<_> = b.scenarios.iter().collect();
        scenarios.sort();
        let mut s = String::new();
        for sc in scenarios {
            write!(s, "scenario {} [start={}, max_steps={}] {{", sc.name, sc.start, sc.max_steps).unwrap();
            if sc.guard_choices.is_empty() {
                s.push_str(" }\n");
            } else {
                s.push('\n');
                for (k, v) in &sc.guard_choices {
                    writeln!(s, "  {k} = {v};").unwrap();
                }
                s.push_str("}\n");
            }
        }
        sections.push(s);
    }
}

type EdgeKey = (u8, u32, (String, crate::model::StageKind), (String, crate::model::StageKind), String);

fn edge_key(r: &EdgeRef, index: &ModelIndex<'_>) -> EdgeKey {
    let none = || (String::new(), crate::model::StageKind::Create);
    match r {
        EdgeRef::Step(n) => (0, *n, none(), none(), String::new()),
        EdgeRef::Flow { thing, from, to } => (1, 0, index.stage_key(from), index.stage_key(to), thing.0.clone()),
        EdgeRef::Trigger { from, to } => (2, 0, index.stage_key(from), index.stage_key(to), String::new()),
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
