use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{AnalysisError, ClassifyError, Finding, LeakSourceKind, Policy, TaintMap};
use crate::diagnostic::{has_errors, Diagnostic};
use crate::model::{FlowEdge, MachineId, Model, ModelIndex, StageRef, ThingId};
use crate::validate::validate;

/// What a tainted stage is holding: a specific thing, or anything it emits
/// after being triggered from a tainted stage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Carrier {
    Thing(ThingId),
    Any,
}

type State = (StageRef, Carrier);

struct Graph<'m> {
    index: ModelIndex<'m>,
    flows_from: BTreeMap<&'m StageRef, Vec<&'m FlowEdge>>,
    triggers_from: BTreeMap<&'m StageRef, Vec<&'m StageRef>>,
    propagate_triggers: bool,
}

impl<'m> Graph<'m> {
    fn new(model: &'m Model, policy: &Policy) -> Self {
        let mut flows_from: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for f in &model.flows {
            flows_from.entry(&f.from).or_default().push(f);
        }
        let mut triggers_from: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for t in &model.triggers {
            triggers_from.entry(&t.from).or_default().push(&t.to);
        }
        Graph {
            index: ModelIndex::new(model),
            flows_from,
            triggers_from,
            propagate_triggers: policy.propagate_triggers,
        }
    }

    fn successors(&self, (stage, carrier): &State) -> Vec<State> {
        let mut out = Vec::new();
        for f in self.flows_from.get(stage).into_iter().flatten() {
            match carrier {
                Carrier::Thing(t) if *t != f.thing => {}
                _ => out.push((f.to.clone(), Carrier::Thing(f.thing.clone()))),
            }
        }
        if self.propagate_triggers {
            for to in self.triggers_from.get(stage).into_iter().flatten() {
                out.push(((*to).clone(), Carrier::Any));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn is_external(&self, machine: &MachineId) -> bool {
        self.index
            .ancestry(machine)
            .into_iter()
            .any(|m| self.index.machine(m).is_some_and(|m| m.external))
    }

    /// Creations of `thing`, arrivals of `thing` from an external machine,
    /// and the origin of every leak-marked flow of `thing` that those two
    /// would not otherwise reach.
    fn seeds(&self, thing: &ThingId) -> BTreeSet<State> {
        use crate::model::StageKind::{Create, Transfer};
        let model = self.index.model;
        let mine = || model.flows.iter().filter(move |f| &f.thing == thing);
        let carried = |s: &StageRef| (s.clone(), Carrier::Thing(thing.clone()));
        let mut seeds: BTreeSet<State> = BTreeSet::new();
        for f in mine() {
            if f.from.kind == Create {
                seeds.insert(carried(&f.from));
            }
            let boundary = f.from.kind == Transfer
                && f.to.kind == Transfer
                && f.from.machine != f.to.machine
                && self.is_external(&f.from.machine);
            if boundary {
                seeds.insert(carried(&f.to));
            }
        }
        let reached: BTreeSet<StageRef> = self.closure(&seeds).into_iter().map(|(s, _)| s).collect();
        for f in mine().filter(|f| f.leak && !reached.contains(&f.from)) {
            seeds.insert(carried(&f.from));
        }
        seeds
    }

    fn closure(&self, seeds: &BTreeSet<State>) -> BTreeSet<State> {
        let mut seen = seeds.clone();
        let mut queue: VecDeque<State> = seeds.iter().cloned().collect();
        while let Some(s) = queue.pop_front() {
            for n in self.successors(&s) {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Shortest path from a seed to any stage of `target`, choosing the
    /// lexicographically smallest stage sequence among equals.
    fn evidence(&self, seeds: &BTreeSet<State>, reached: &BTreeSet<State>, target: &MachineId) -> Vec<StageRef> {
        let mut preds: BTreeMap<&State, Vec<&State>> = BTreeMap::new();
        for s in reached {
            for n in self.successors(s) {
                if let Some(n) = reached.get(&n) {
                    preds.entry(n).or_default().push(s);
                }
            }
        }
        let mut dist: BTreeMap<&State, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in reached.iter().filter(|(stage, _)| &stage.machine == target) {
            dist.insert(s, 0);
            queue.push_back(s);
        }
        while let Some(s) = queue.pop_front() {
            let d = dist[s];
            for p in preds.get(s).into_iter().flatten() {
                if !dist.contains_key(p) {
                    dist.insert(p, d + 1);
                    queue.push_back(p);
                }
            }
        }

        let key = |s: &State| self.index.stage_key(&s.0);
        let pick = |cands: Vec<&'_ State>| -> Vec<State> {
            let best = cands.iter().map(|s| key(s)).min();
            cands.into_iter().filter(|s| Some(key(s)) == best).cloned().collect()
        };
        let start_dist = seeds.iter().filter_map(|s| dist.get(s)).min().copied();
        let Some(mut d) = start_dist else {
            return Vec::new();
        };
        let mut frontier = pick(seeds.iter().filter(|s| dist.get(s) == Some(&d)).collect());
        let mut path = vec![frontier[0].0.clone()];
        while d > 0 {
            d -= 1;
            let next: BTreeSet<State> = frontier
                .iter()
                .flat_map(|s| self.successors(s))
                .filter(|n| reached.get(n).and_then(|n| dist.get(n)) == Some(&d))
                .collect();
            frontier = pick(next.iter().collect());
            path.push(frontier[0].0.clone());
        }
        path
    }
}

fn check_inputs(model: &Model, policy: &Policy) -> Result<(), AnalysisError> {
    let model_errors: Vec<Diagnostic> = validate(model).into_iter().filter(Diagnostic::is_error).collect();
    if !model_errors.is_empty() {
        return Err(AnalysisError::InvalidModel(model_errors));
    }
    let policy_diags = super::check_policy(model, policy);
    if has_errors(&policy_diags) {
        return Err(AnalysisError::InvalidPolicy(policy_diags));
    }
    Ok(())
}

fn sensitive_things<'m>(model: &'m Model, policy: &Policy) -> Vec<&'m ThingId> {
    let mut things: Vec<_> = model
        .things
        .iter()
        .filter(|t| policy.is_sensitive(model, &t.id))
        .collect();
    things.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
    things.into_iter().map(|t| &t.id).collect()
}

/// Stages each sensitive thing can reach.
pub fn taint(model: &Model, policy: &Policy) -> Result<TaintMap, AnalysisError> {
    check_inputs(model, policy)?;
    let graph = Graph::new(model, policy);
    let mut map = TaintMap::default();
    for thing in sensitive_things(model, policy) {
        for (stage, _) in graph.closure(&graph.seeds(thing)) {
            map.stages.entry(stage).or_default().insert(thing.clone());
        }
    }
    Ok(map)
}

/// One finding per sensitive thing and machine that holds it without
/// authorization, plus every declared sink it reaches.
pub fn analyze(model: &Model, policy: &Policy) -> Result<Vec<Finding>, AnalysisError> {
    check_inputs(model, policy)?;
    let graph = Graph::new(model, policy);
    let index = &graph.index;
    let mut findings = Vec::new();
    for thing in sensitive_things(model, policy) {
        let seeds = graph.seeds(thing);
        let reached = graph.closure(&seeds);
        let machines: BTreeSet<&MachineId> = reached.iter().map(|(s, _)| &s.machine).collect();
        for m in machines {
            if policy.covers(index, thing, m) && !policy.declared_sinks.contains(m) {
                continue;
            }
            let evidence = graph.evidence(&seeds, &reached, m);
            let source_kind = match classify_in(index, thing, &evidence, policy) {
                Ok(kind) => kind,
                // the seed itself is outside: classify from the seed
                Err(ClassifyError::NoCrossing) => source_from(&evidence, 0),
            };
            let activator = index
                .ancestry(m)
                .into_iter()
                .find_map(|a| index.machine(a).and_then(|a| a.actor.clone()));
            findings.push(Finding {
                thing: thing.clone(),
                leak_machine: m.clone(),
                leak_machine_path: index.display_path(m),
                activator,
                source_kind,
                evidence,
            });
        }
    }
    let name = |t: &ThingId| model.thing(t).map(|t| t.name.clone()).unwrap_or_default();
    findings.sort_by(|a, b| {
        (name(&a.thing), &a.leak_machine_path).cmp(&(name(&b.thing), &b.leak_machine_path))
    });
    Ok(findings)
}

/// Source kind of an evidence path: the stage kind at which it first leaves
/// authorized machines. A Transfer origin is replaced by the nearest earlier
/// non-Transfer stage.
pub fn classify(
    model: &Model,
    thing: &ThingId,
    evidence: &[StageRef],
    policy: &Policy,
) -> Result<LeakSourceKind, ClassifyError> {
    classify_in(&ModelIndex::new(model), thing, evidence, policy)
}

fn classify_in(
    index: &ModelIndex<'_>,
    thing: &ThingId,
    evidence: &[StageRef],
    policy: &Policy,
) -> Result<LeakSourceKind, ClassifyError> {
    evidence
        .windows(2)
        .position(|w| {
            policy.inside(index, thing, &w[0].machine) && !policy.inside(index, thing, &w[1].machine)
        })
        .map(|i| source_from(evidence, i))
        .ok_or(ClassifyError::NoCrossing)
}

/// A path that only ever transferred the thing received it.
fn source_from(evidence: &[StageRef], origin: usize) -> LeakSourceKind {
    evidence[..=origin.min(evidence.len().saturating_sub(1))]
        .iter()
        .rev()
        .find_map(|s| LeakSourceKind::of_stage(s.kind))
        .unwrap_or(LeakSourceKind::Received)
}
