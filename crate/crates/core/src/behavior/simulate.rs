use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::validate::{endpoints, region_edges, ConcreteEdge};
use super::{validate_behavior, Chronology, Event, Firing, Guard, Scenario, Termination, Trace};
use crate::diagnostic::{has_errors, Diagnostic};
use crate::model::{Model, ModelIndex, StageKind, StageRef};
use crate::validate::validate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulationError {
    #[error("model or behavior has {} error(s)", .0.iter().filter(|d| d.is_error()).count())]
    InvalidInput(Vec<Diagnostic>),
    #[error("scenario starts at unknown event `{0}`")]
    UnknownStart(String),
    #[error("max_steps must be at least 1")]
    ZeroBound,
}

/// Runs a scenario over the chronology and records which stages each event
/// activates. Deterministic for identical inputs.
pub fn simulate(
    model: &Model,
    events: &[Event],
    chron: &Chronology,
    scenario: &Scenario,
) -> Result<Trace, SimulationError> {
    let mut diags = validate(model);
    diags.extend(validate_behavior(model, events, chron));
    if has_errors(&diags) {
        diags.retain(Diagnostic::is_error);
        return Err(SimulationError::InvalidInput(diags));
    }
    if scenario.max_steps == 0 {
        return Err(SimulationError::ZeroBound);
    }
    let by_id: BTreeMap<&str, &Event> = events.iter().map(|e| (e.id.as_str(), e)).collect();
    let Some(mut current) = by_id.get(scenario.start.as_str()).copied() else {
        return Err(SimulationError::UnknownStart(scenario.start.clone()));
    };

    let index = ModelIndex::new(model);
    let mut firings = Vec::new();
    let terminated = loop {
        firings.push(Firing {
            event: current.id.clone(),
            stages: activation_order(model, &index, current),
        });
        let outs: Vec<_> = chron.out_edges(&current.id).collect();
        if outs.is_empty() {
            break Termination::NoSuccessor;
        }
        if firings.len() >= scenario.max_steps as usize {
            break Termination::MaxSteps;
        }
        let next = match outs.as_slice() {
            [only] if only.guard.is_none() => &only.to,
            _ => {
                let mut enabled = Vec::new();
                let mut unresolved = false;
                for e in &outs {
                    let value = e
                        .guard
                        .as_deref()
                        .and_then(Guard::parse)
                        .and_then(|g| g.eval(&scenario.guard_choices));
                    match value {
                        Some(true) => enabled.push(&e.to),
                        Some(false) => {}
                        None => unresolved = true,
                    }
                }
                if unresolved || enabled.len() > 1 {
                    break Termination::GuardUnresolved;
                }
                match enabled.first() {
                    Some(to) => *to,
                    None => break Termination::NoSuccessor,
                }
            }
        };
        current = by_id[next.as_str()];
    };

    Ok(Trace {
        firings,
        terminated,
    })
}

/// Region stages in topological order of the region edges. Ties go to the
/// smallest (machine path, stage kind); a trigger target that becomes ready
/// is activated right after its source. Cycles are broken at the smallest
/// remaining stage.
pub(crate) fn activation_order(model: &Model, index: &ModelIndex<'_>, event: &Event) -> Vec<StageRef> {
    type Key = (String, StageKind);
    let key = |s: &StageRef| -> Key { index.stage_key(s) };

    let edges = region_edges(model, event);
    let mut indegree: BTreeMap<&StageRef, usize> = event.stages.iter().map(|s| (s, 0)).collect();
    let mut succ: BTreeMap<&StageRef, Vec<(&StageRef, bool)>> = BTreeMap::new();
    for e in &edges {
        let (from, to) = endpoints(model, *e);
        if from == to || !indegree.contains_key(from) || !indegree.contains_key(to) {
            continue;
        }
        *indegree.get_mut(to).unwrap() += 1;
        succ.entry(from)
            .or_default()
            .push((to, matches!(e, ConcreteEdge::Trigger(_))));
    }
    for list in succ.values_mut() {
        list.sort_by_key(|(s, _)| key(s));
    }

    let mut ready: BTreeSet<(Key, &StageRef)> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(s, _)| (key(s), *s))
        .collect();
    let mut urgent: VecDeque<&StageRef> = VecDeque::new();
    let mut done: BTreeSet<&StageRef> = BTreeSet::new();
    // stages with an in-edge from an activated stage
    let mut fed: BTreeSet<&StageRef> = BTreeSet::new();
    let mut order = Vec::with_capacity(event.stages.len());

    while done.len() < event.stages.len() {
        let next = loop {
            if let Some(s) = urgent.pop_front() {
                if !done.contains(s) {
                    break s;
                }
                continue;
            }
            if let Some((_, s)) = ready.pop_first() {
                if !done.contains(s) {
                    break s;
                }
                continue;
            }
            // only cycles remain: enter one where the activated part leads
            break event
                .stages
                .iter()
                .filter(|s| !done.contains(s))
                .min_by_key(|s| (!fed.contains(s), key(s)))
                .expect("unfinished stages remain");
        };
        done.insert(next);
        order.push(next.clone());
        for (to, is_trigger) in succ.get(next).into_iter().flatten() {
            fed.insert(to);
            let d = indegree.get_mut(to).unwrap();
            *d = d.saturating_sub(1);
            if *d == 0 && !done.contains(to) {
                if *is_trigger {
                    urgent.push_back(to);
                } else {
                    ready.insert((key(to), to));
                }
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::{ChronEdge, EdgeRef};
    use crate::model::{FlowEdge, Machine, StageKind::*, Thing, TriggerEdge};

    fn chain_model() -> Model {
        Model {
            machines: vec![
                Machine::new("A", "A").with_stages(&[Transfer, Release, Create]),
                Machine::new("B", "B").with_stages(&[Transfer, Receive, Process]),
                Machine::new("C", "C").with_stages(&[Create]),
            ],
            things: vec![Thing::new("T", false)],
            flows: vec![
                FlowEdge::new("T", StageRef::new("A", Create), StageRef::new("A", Release)),
                FlowEdge::new("T", StageRef::new("A", Release), StageRef::new("A", Transfer)),
                FlowEdge::new("T", StageRef::new("A", Transfer), StageRef::new("B", Transfer)),
                FlowEdge::new("T", StageRef::new("B", Transfer), StageRef::new("B", Receive)),
                FlowEdge::new("T", StageRef::new("B", Receive), StageRef::new("B", Process)),
            ],
            triggers: vec![TriggerEdge::new(
                StageRef::new("A", Release),
                StageRef::new("C", Create),
            )],
        }
    }

    fn whole_region(model: &Model) -> Event {
        let mut e = Event::new("E", 0);
        for m in &model.machines {
            for k in &m.stages {
                e.stages.insert(StageRef {
                    machine: m.id.clone(),
                    kind: *k,
                });
            }
        }
        for f in &model.flows {
            e.edges.insert(EdgeRef::Flow {
                thing: f.thing.clone(),
                from: f.from.clone(),
                to: f.to.clone(),
            });
        }
        for t in &model.triggers {
            e.edges.insert(EdgeRef::Trigger {
                from: t.from.clone(),
                to: t.to.clone(),
            });
        }
        e
    }

    #[test]
    fn trigger_target_follows_its_source() {
        let m = chain_model();
        let idx = ModelIndex::new(&m);
        let order = activation_order(&m, &idx, &whole_region(&m));
        let names: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            names,
            vec![
                "A.create",
                "A.release",
                "C.create",
                "A.transfer",
                "B.transfer",
                "B.receive",
                "B.process"
            ]
        );
    }

    #[test]
    fn unconnected_stages_sort_by_path_then_kind() {
        let m = chain_model();
        let idx = ModelIndex::new(&m);
        let mut e = Event::new("E", 0);
        e.stages.insert(StageRef::new("B", Process));
        e.stages.insert(StageRef::new("A", Transfer));
        e.stages.insert(StageRef::new("B", Receive));
        let order = activation_order(&m, &idx, &e);
        assert_eq!(
            order,
            vec![
                StageRef::new("A", Transfer),
                StageRef::new("B", Process),
                StageRef::new("B", Receive)
            ]
        );
    }

    #[test]
    fn stops_on_guards_and_bounds() {
        let m = chain_model();
        let mut a = whole_region(&m);
        a.id = "A".into();
        let mut b = a.clone();
        b.id = "B".into();
        let mut c = a.clone();
        c.id = "C".into();
        let events = vec![a, b, c];
        let chron = Chronology {
            edges: vec![
                ChronEdge::guarded("A", "B", "go"),
                ChronEdge::guarded("A", "C", "!go"),
                ChronEdge::new("B", "A"),
            ],
        };
        let run = |s: Scenario| simulate(&m, &events, &chron, &s).unwrap();

        let t = run(Scenario::new("s", "A", 10));
        assert_eq!(t.event_ids(), vec!["A"]);
        assert_eq!(t.terminated, Termination::GuardUnresolved);

        let t = run(Scenario::new("s", "A", 10).with_guard("go", false));
        assert_eq!(t.event_ids(), vec!["A", "C"]);
        assert_eq!(t.terminated, Termination::NoSuccessor);

        let t = run(Scenario::new("s", "A", 5).with_guard("go", true));
        assert_eq!(t.event_ids(), vec!["A", "B", "A", "B", "A"]);
        assert_eq!(t.terminated, Termination::MaxSteps);

        assert_eq!(
            simulate(&m, &events, &chron, &Scenario::new("s", "Z", 5)),
            Err(SimulationError::UnknownStart("Z".into()))
        );
        assert_eq!(
            simulate(&m, &events, &chron, &Scenario::new("s", "A", 0)),
            Err(SimulationError::ZeroBound)
        );
    }

    #[test]
    fn rejects_invalid_behavior() {
        let m = chain_model();
        let mut e = Event::new("E", 0);
        e.stages.insert(StageRef::new("Nope", Process));
        let r = simulate(&m, &[e], &Chronology::default(), &Scenario::new("s", "E", 1));
        assert!(matches!(r, Err(SimulationError::InvalidInput(_))));
    }
}
