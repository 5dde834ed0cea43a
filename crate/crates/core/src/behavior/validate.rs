use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::{Chronology, EdgeRef, Event, Guard, Scenario};
use crate::diagnostic::{Code, Diagnostic, Location};
use crate::model::{Model, ModelIndex, StageRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown event `{0}`")]
pub struct UnknownEvent(pub String);

/// One concrete model edge named by a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum ConcreteEdge {
    Flow(usize),
    Trigger(usize),
}

/// Model edges an [`EdgeRef`] denotes. Empty when it resolves to nothing.
pub(crate) fn resolve_edge(model: &Model, r: &EdgeRef) -> Vec<ConcreteEdge> {
    match r {
        EdgeRef::Step(n) => model
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.step == Some(*n))
            .map(|(i, _)| ConcreteEdge::Flow(i))
            .collect(),
        EdgeRef::Flow { thing, from, to } => model
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| &f.thing == thing && &f.from == from && &f.to == to)
            .map(|(i, _)| ConcreteEdge::Flow(i))
            .collect(),
        EdgeRef::Trigger { from, to } => model
            .triggers
            .iter()
            .enumerate()
            .filter(|(_, t)| &t.from == from && &t.to == to)
            .map(|(i, _)| ConcreteEdge::Trigger(i))
            .collect(),
    }
}

pub(crate) fn endpoints<'m>(model: &'m Model, e: ConcreteEdge) -> (&'m StageRef, &'m StageRef) {
    match e {
        ConcreteEdge::Flow(i) => (&model.flows[i].from, &model.flows[i].to),
        ConcreteEdge::Trigger(i) => (&model.triggers[i].from, &model.triggers[i].to),
    }
}

/// The region edges of an event, resolved and de-duplicated.
pub(crate) fn region_edges(model: &Model, event: &Event) -> BTreeSet<ConcreteEdge> {
    event
        .edges
        .iter()
        .flat_map(|r| resolve_edge(model, r))
        .collect()
}

fn describe_edge(r: &EdgeRef) -> String {
    match r {
        EdgeRef::Step(n) => format!("step {n}"),
        EdgeRef::Flow { thing, from, to } => format!("{thing}: {from} -> {to}"),
        EdgeRef::Trigger { from, to } => format!("{from} => {to}"),
    }
}

struct Sorted {
    items: Vec<((u32, String, Code, String), Diagnostic)>,
}

impl Sorted {
    fn push(&mut self, time: u32, event: &str, d: Diagnostic) {
        self.items
            .push(((time, event.to_string(), d.code, d.message.clone()), d));
    }
}

/// Checks events and the chronology against a static model.
pub fn validate_behavior(model: &Model, events: &[Event], chron: &Chronology) -> Vec<Diagnostic> {
    let index = ModelIndex::new(model);
    let mut out = Sorted { items: Vec::new() };

    let mut counts: BTreeMap<&str, (usize, u32)> = BTreeMap::new();
    for e in events {
        let entry = counts.entry(&e.id).or_insert((0, e.time));
        entry.0 += 1;
    }
    for (id, (n, time)) in &counts {
        if *n > 1 {
            out.push(
                *time,
                id,
                Diagnostic::error(
                    Code::DuplicateEventId,
                    format!("event `{id}` is declared {n} times"),
                )
                .at(Location::Event(id.to_string())),
            );
        }
    }

    for e in events {
        check_region(model, &index, e, &mut out);
    }

    let declared: BTreeMap<&str, u32> = events.iter().map(|e| (e.id.as_str(), e.time)).collect();
    let time_of = |id: &str| declared.get(id).copied().unwrap_or(0);
    for edge in &chron.edges {
        for end in [&edge.from, &edge.to] {
            if !declared.contains_key(end.as_str()) {
                out.push(
                    time_of(&edge.from),
                    &edge.from,
                    Diagnostic::error(
                        Code::ChronDanglingEvent,
                        format!("chronology edge {} -> {} names unknown event `{end}`", edge.from, edge.to),
                    )
                    .at(Location::Event(edge.from.clone())),
                );
            }
        }
    }

    let mut by_source: BTreeMap<&str, Vec<&super::ChronEdge>> = BTreeMap::new();
    for edge in &chron.edges {
        by_source.entry(&edge.from).or_default().push(edge);
    }
    for (from, outs) in &by_source {
        if let Some(problem) = guard_shape_problem(outs) {
            out.push(
                time_of(from),
                from,
                Diagnostic::error(Code::ChronGuardShape, format!("event `{from}`: {problem}"))
                    .at(Location::Event(from.to_string())),
            );
        }
    }

    if has_cycle(&declared, chron) {
        for e in events {
            let reached = chron
                .edges
                .iter()
                .any(|c| c.to == e.id && c.from != e.id && declared.contains_key(c.from.as_str()));
            if !reached {
                out.push(
                    e.time,
                    &e.id,
                    Diagnostic::warning(
                        Code::EventUnreachable,
                        format!("event `{}` is not reachable from any other event", e.id),
                    )
                    .at(Location::Event(e.id.clone())),
                );
            }
        }
    }

    out.items.sort_by(|a, b| a.0.cmp(&b.0));
    out.items.dedup_by(|a, b| a.0 == b.0);
    out.items.into_iter().map(|(_, d)| d).collect()
}

fn check_region(model: &Model, index: &ModelIndex<'_>, e: &Event, out: &mut Sorted) {
    let loc = Location::Event(e.id.clone());
    if e.stages.is_empty() {
        out.push(
            e.time,
            &e.id,
            Diagnostic::error(Code::RegionEmpty, format!("event `{}` has an empty region", e.id))
                .at(loc.clone()),
        );
    }
    for s in &e.stages {
        if !index.stage_exists(s) {
            out.push(
                e.time,
                &e.id,
                Diagnostic::error(
                    Code::RegionDanglingStage,
                    format!("event `{}` names stage {s}, which is not in the model", e.id),
                )
                .at(loc.clone()),
            );
        }
    }
    let mut resolved = BTreeSet::new();
    for r in &e.edges {
        let edges = resolve_edge(model, r);
        if edges.is_empty() {
            out.push(
                e.time,
                &e.id,
                Diagnostic::error(
                    Code::RegionDanglingEdge,
                    format!("event `{}` names edge `{}`, which is not in the model", e.id, describe_edge(r)),
                )
                .at(loc.clone()),
            );
        }
        for c in edges {
            let (from, to) = endpoints(model, c);
            for end in [from, to] {
                if !e.stages.contains(end) {
                    out.push(
                        e.time,
                        &e.id,
                        Diagnostic::error(
                            Code::RegionEdgeOutside,
                            format!(
                                "event `{}`: edge `{}` touches {end}, which is outside the region",
                                e.id,
                                describe_edge(r)
                            ),
                        )
                        .at(loc.clone()),
                    );
                }
            }
            resolved.insert(c);
        }
    }
    if components(model, &e.stages, &resolved) > 1 {
        out.push(
            e.time,
            &e.id,
            Diagnostic::warning(
                Code::RegionDisconnected,
                format!("event `{}` has a disconnected region", e.id),
            )
            .at(loc),
        );
    }
}

/// Weakly connected components of the region's stages under its edges.
fn components(model: &Model, stages: &BTreeSet<StageRef>, edges: &BTreeSet<ConcreteEdge>) -> usize {
    let nodes: Vec<&StageRef> = stages.iter().collect();
    let pos: BTreeMap<&StageRef, usize> = nodes.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in edges {
        let (a, b) = endpoints(model, *c);
        if let (Some(&i), Some(&j)) = (pos.get(a), pos.get(b)) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            parent[ri] = rj;
        }
    }
    (0..nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
}

fn guard_shape_problem(outs: &[&super::ChronEdge]) -> Option<String> {
    if outs.len() == 1 && outs[0].guard.is_none() {
        return None;
    }
    let mut seen = BTreeSet::new();
    for e in outs {
        match &e.guard {
            None => {
                return Some(format!(
                    "{} successors but edge to `{}` has no guard",
                    outs.len(),
                    e.to
                ))
            }
            Some(g) if Guard::parse(g).is_none() => {
                return Some(format!("malformed guard `{g}` on edge to `{}`", e.to))
            }
            Some(g) => {
                if !seen.insert(g.as_str()) {
                    return Some(format!("guard `{g}` is used on more than one edge"));
                }
            }
        }
    }
    None
}

fn has_cycle(declared: &BTreeMap<&str, u32>, chron: &Chronology) -> bool {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &chron.edges {
        if declared.contains_key(e.from.as_str()) && declared.contains_key(e.to.as_str()) {
            succ.entry(&e.from).or_default().push(&e.to);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for &root in declared.keys() {
        if state.contains_key(root) {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        state.insert(root, 1);
        while let Some((node, i)) = stack.pop() {
            let next = succ.get(node).and_then(|v| v.get(i)).copied();
            match next {
                Some(n) => {
                    stack.push((node, i + 1));
                    match state.get(n) {
                        Some(1) => return true,
                        Some(_) => {}
                        None => {
                            state.insert(n, 1);
                            stack.push((n, 0));
                        }
                    }
                }
                None => {
                    state.insert(node, 2);
                }
            }
        }
    }
    false
}

/// Events reachable from `start` along chronology edges, including `start`.
pub fn reachable_events(
    chron: &Chronology,
    events: &[Event],
    start: &str,
) -> Result<BTreeSet<String>, UnknownEvent> {
    if !events.iter().any(|e| e.id == start) {
        return Err(UnknownEvent(start.to_string()));
    }
    let mut seen = BTreeSet::from([start.to_string()]);
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(cur) = queue.pop_front() {
        for e in chron.out_edges(&cur) {
            if seen.insert(e.to.clone()) {
                queue.push_back(e.to.clone());
            }
        }
    }
    Ok(seen)
}

/// Checks scenario declarations against the declared events.
pub(crate) fn validate_scenarios(events: &[Event], scenarios: &[Scenario]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = BTreeMap::new();
    for s in scenarios {
        *names.entry(s.name.as_str()).or_insert(0usize) += 1;
    }
    for (name, n) in names {
        if n > 1 {
            out.push(
                Diagnostic::error(
                    Code::DuplicateScenario,
                    format!("scenario `{name}` is declared {n} times"),
                )
                .at(Location::Scenario(name.to_string())),
            );
        }
    }
    for s in scenarios {
        if !events.iter().any(|e| e.id == s.start) {
            out.push(
                Diagnostic::error(
                    Code::ScenarioDanglingStart,
                    format!("scenario `{}` starts at unknown event `{}`", s.name, s.start),
                )
                .at(Location::Scenario(s.name.clone())),
            );
        }
        if s.max_steps == 0 {
            out.push(
                Diagnostic::error(
                    Code::ScenarioInvalidBound,
                    format!("scenario `{}` has max_steps 0", s.name),
                )
                .at(Location::Scenario(s.name.clone())),
            );
        }
    }
    out
}
