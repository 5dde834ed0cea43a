//! Shared test support: a seeded generator of valid documents and an
//! independent leakage oracle that enumerates simple paths.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tm_core::behavior::{Behavior, ChronEdge, EdgeRef, Event, Scenario};
use tm_core::leakage::{Finding, LeakSourceKind, Policy};
use tm_core::{legal_flow, FlowEdge, Machine, MachineId, Model, StageKind, StageRef, Thing, ThingId, TriggerEdge};

pub const MAX_MACHINES: usize = 12;
pub const MAX_EDGES: usize = 30;

const NAMES: [&str; 5] = ["Desk", "Pc", "Vault", "Mail", "Server"];
const ACTORS: [&str; 3] = ["clerk", "IT employee", "visitor"];
const THINGS: [&str; 4] = ["Card", "Data", "Memo", "Tx"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A valid model with up to 12 machines and 30 edges. Machine ids are
/// their paths and thing ids their names, so the text form can carry it.
pub fn random_model(rng: &mut ChaCha8Rng) -> Model {
    let n = rng.gen_range(1..=MAX_MACHINES);
    let mut machines: Vec<Machine> = Vec::new();
    for i in 0..n {
        let parent = if i > 0 && rng.gen_bool(0.5) {
            Some(machines[rng.gen_range(0..i)].id.clone())
        } else {
            None
        };
        let taken: BTreeSet<&str> = machines
            .iter()
            .filter(|m| m.parent == parent)
            .map(|m| m.name.as_str())
            .collect();
        let pick = *NAMES.choose(rng).unwrap();
        let name = if taken.contains(pick) { format!("M{i}") } else { pick.to_string() };
        let id = match &parent {
            Some(p) => format!("{}/{name}", p.as_str()),
            None => name.clone(),
        };
        let mut stages: Vec<StageKind> = StageKind::ALL.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        if stages.is_empty() {
            stages.push(*StageKind::ALL.choose(rng).unwrap());
        }
        let mut m = Machine::new(id, name).with_stages(&stages);
        m.parent = parent;
        m.external = rng.gen_bool(0.15);
        if rng.gen_bool(0.3) {
            m.actor = Some(ACTORS.choose(rng).unwrap().to_string());
        }
        machines.push(m);
    }

    let things: Vec<Thing> = THINGS[..rng.gen_range(1..=THINGS.len())]
        .iter()
        .map(|t| Thing::new(*t, rng.gen_bool(0.5)))
        .collect();

    let stages: Vec<StageRef> = machines
        .iter()
        .flat_map(|m| m.stages.iter().map(|k| StageRef::new(m.id.as_str(), *k)))
        .collect();
    let legal: Vec<(&StageRef, &StageRef)> = stages
        .iter()
        .flat_map(|a| stages.iter().map(move |b| (a, b)))
        .filter(|(a, b)| legal_flow(a, b))
        .collect();

    let mut flows: Vec<FlowEdge> = Vec::new();
    let mut triggers: Vec<TriggerEdge> = Vec::new();
    for _ in 0..rng.gen_range(0..=MAX_EDGES) {
        if rng.gen_bool(0.75) {
            let Some((a, b)) = legal.choose(rng) else { continue };
            let thing = things.choose(rng).unwrap();
            let mut f = FlowEdge::new(thing.id.as_str(), (*a).clone(), (*b).clone());
            if rng.gen_bool(0.3) {
                f.step = Some(rng.gen_range(1..=5));
            }
            f.leak = a.kind != StageKind::Transfer && rng.gen_bool(0.15);
            if !flows.iter().any(|g| g.thing == f.thing && g.from == f.from && g.to == f.to) {
                flows.push(f);
            }
        } else {
            let a = stages.choose(rng).unwrap();
            let b = stages.choose(rng).unwrap();
            if a == b {
                continue;
            }
            let mut t = TriggerEdge::new(a.clone(), b.clone());
            if b.kind == StageKind::Create && rng.gen_bool(0.4) {
                t.creates = Some(things.choose(rng).unwrap().id.clone());
            }
            if !triggers.iter().any(|u| u.from == t.from && u.to == t.to) {
                triggers.push(t);
            }
        }
    }
    Model {
        machines,
        things,
        flows,
        triggers,
    }
}

/// Events built around single edges, with a random guarded chronology and
/// a few scenarios.
pub fn random_behavior(rng: &mut ChaCha8Rng, model: &Model) -> Behavior {
    let mut b = Behavior::default();
    for i in 0..rng.gen_range(0..=4usize) {
        let mut e = Event::new(format!("E{}", i + 1), i as u32 + 1);
        if rng.gen_bool(0.5) {
            e.label = format!("event {}", i + 1);
        }
        let pick = rng.gen_range(0..3);
        if pick == 0 && !model.flows.is_empty() {
            let f = model.flows.choose(rng).unwrap();
            match f.step {
                Some(n) => {
                    for g in model.flows.iter().filter(|g| g.step == Some(n)) {
                        e.stages.extend([g.from.clone(), g.to.clone()]);
                    }
                    e.edges.insert(EdgeRef::Step(n));
                }
                None => {
                    e.stages.extend([f.from.clone(), f.to.clone()]);
                    e.edges.insert(EdgeRef::Flow {
                        thing: f.thing.clone(),
                        from: f.from.clone(),
                        to: f.to.clone(),
                    });
                }
            }
        } else if pick == 1 && !model.triggers.is_empty() {
            let t = model.triggers.choose(rng).unwrap();
            e.stages.extend([t.from.clone(), t.to.clone()]);
            e.edges.insert(EdgeRef::Trigger {
                from: t.from.clone(),
                to: t.to.clone(),
            });
        } else {
            let m = model.machines.choose(rng).unwrap();
            e.stages.insert(StageRef::new(m.id.as_str(), *m.stages.choose(rng).unwrap()));
        }
        b.events.push(e);
    }
    let ids: Vec<String> = b.events.iter().map(|e| e.id.clone()).collect();
    if !ids.is_empty() {
        for _ in 0..rng.gen_range(0..=5) {
            let from = ids.choose(rng).unwrap();
            let to = ids.choose(rng).unwrap();
            let edge = match rng.gen_range(0..3) {
                0 => ChronEdge::new(from, to),
                1 => ChronEdge::guarded(from, to, "ok"),
                _ => ChronEdge::guarded(from, to, "!ok"),
            };
            if !b.chronology.edges.contains(&edge) {
                b.chronology.edges.push(edge);
            }
        }
        for i in 0..rng.gen_range(0..=2) {
            let mut s = Scenario::new(format!("s{}", i + 1), ids.choose(rng).unwrap(), rng.gen_range(1..=20));
            if rng.gen_bool(0.5) {
                s = s.with_guard("ok", rng.gen_bool(0.5));
            }
            b.scenarios.push(s);
        }
    }
    b
}

/// A policy that only mentions ids the model has and only authorizes
/// sensitive things.
pub fn random_policy(rng: &mut ChaCha8Rng, model: &Model) -> Policy {
    let mut p = Policy {
        propagate_triggers: rng.gen_bool(0.8),
        ..Policy::default()
    };
    for t in &model.things {
        if rng.gen_bool(0.2) {
            p.sensitive.insert(t.id.clone());
        }
        if t.sensitive || p.sensitive.contains(&t.id) {
            let chosen: BTreeSet<MachineId> = model
                .machines
                .iter()
                .filter(|_| rng.gen_bool(0.3))
                .map(|m| m.id.clone())
                .collect();
            if !chosen.is_empty() {
                p.authorized.insert(t.id.clone(), chosen);
            }
        }
    }
    for m in &model.machines {
        if rng.gen_bool(0.1) {
            p.declared_sinks.insert(m.id.clone());
        }
    }
    p
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

/// A stage together with the thing it carries; `None` after a trigger.
type State = (StageRef, Option<ThingId>);

struct Oracle<'m> {
    model: &'m Model,
    policy: &'m Policy,
}

impl<'m> Oracle<'m> {
    /// `m` and its ancestors, nearest first.
    fn lineage(&self, m: &MachineId) -> Vec<&'m MachineId> {
        let mut out = Vec::new();
        let mut cur = self.model.machine(m);
        while let Some(x) = cur {
            out.push(&x.id);
            cur = x.parent.as_ref().and_then(|p| self.model.machine(p));
        }
        out
    }

    fn path(&self, m: &MachineId) -> String {
        let mut names: Vec<&str> = self
            .lineage(m)
            .iter()
            .map(|id| self.model.machine(id).unwrap().name.as_str())
            .collect();
        names.reverse();
        names.join("/")
    }

    fn machine(&self, m: &MachineId) -> &'m Machine {
        self.model.machine(m).unwrap()
    }

    fn key(&self, s: &StageRef) -> (String, StageKind) {
        (self.path(&s.machine), s.kind)
    }

    fn next(&self, (stage, carrying): &State) -> Vec<State> {
        let mut out: Vec<State> = self
            .model
            .flows
            .iter()
            .filter(|f| &f.from == stage && carrying.as_ref().map_or(true, |t| *t == f.thing))
            .map(|f| (f.to.clone(), Some(f.thing.clone())))
            .collect();
        if self.policy.propagate_triggers {
            out.extend(
                self.model
                    .triggers
                    .iter()
                    .filter(|t| &t.from == stage)
                    .map(|t| (t.to.clone(), None)),
            );
        }
        out
    }

    fn reach(&self, from: &BTreeSet<State>) -> BTreeSet<State> {
        let mut seen = from.clone();
        let mut stack: Vec<State> = from.iter().cloned().collect();
        while let Some(s) = stack.pop() {
            for n in self.next(&s) {
                if seen.insert(n.clone()) {
                    stack.push(n);
                }
            }
        }
        seen
    }

    fn seeds(&self, t: &ThingId) -> BTreeSet<State> {
        let mut seeds = BTreeSet::new();
        for f in self.model.flows.iter().filter(|f| &f.thing == t) {
            if f.from.kind == StageKind::Create {
                seeds.insert((f.from.clone(), Some(t.clone())));
            }
            let from_outside = self
                .lineage(&f.from.machine)
                .iter()
                .any(|m| self.machine(m).external);
            if f.from.kind == StageKind::Transfer
                && f.to.kind == StageKind::Transfer
                && f.from.machine != f.to.machine
                && from_outside
            {
                seeds.insert((f.to.clone(), Some(t.clone())));
            }
        }
        let touched: BTreeSet<StageRef> = self.reach(&seeds).into_iter().map(|(s, _)| s).collect();
        for f in self.model.flows.iter().filter(|f| &f.thing == t && f.leak) {
            if !touched.contains(&f.from) {
                seeds.insert((f.from.clone(), Some(t.clone())));
            }
        }
        seeds
    }

    /// Shortest simple path from a seed to a state of `target`, smallest
    /// stage-key sequence among the shortest.
    fn best_path(&self, seeds: &BTreeSet<State>, target: &MachineId) -> Option<Vec<StageRef>> {
        let mut best: Option<(usize, Vec<(String, StageKind)>, Vec<StageRef>)> = None;
        for s in seeds {
            let mut path = vec![s.clone()];
            let mut on_path: BTreeSet<State> = [s.clone()].into();
            self.dfs(&mut path, &mut on_path, target, &mut best);
        }
        best.map(|(_, _, p)| p)
    }

    fn dfs(
        &self,
        path: &mut Vec<State>,
        on_path: &mut BTreeSet<State>,
        target: &MachineId,
        best: &mut Option<(usize, Vec<(String, StageKind)>, Vec<StageRef>)>,
    ) {
        if best.as_ref().is_some_and(|(len, _, _)| path.len() > *len) {
            return;
        }
        let last = path.last().unwrap().clone();
        if &last.0.machine == target {
            let stages: Vec<StageRef> = path.iter().map(|(s, _)| s.clone()).collect();
            let keys: Vec<_> = stages.iter().map(|s| self.key(s)).collect();
            let better = match best {
                None => true,
                Some((len, k, _)) => (stages.len(), &keys) < (*len, k),
            };
            if better {
                *best = Some((stages.len(), keys, stages));
            }
            return;
        }
        for n in self.next(&last) {
            if on_path.insert(n.clone()) {
                path.push(n.clone());
                self.dfs(path, on_path, target, best);
                path.pop();
                on_path.remove(&n);
            }
        }
    }

    fn authorized(&self, t: &ThingId, m: &MachineId) -> bool {
        let Some(set) = self.policy.authorized.get(t) else {
            return false;
        };
        self.lineage(m).iter().any(|a| set.contains(*a))
    }

    fn legit(&self, t: &ThingId, m: &MachineId) -> bool {
        self.authorized(t, m) && !self.policy.declared_sinks.contains(m)
    }

    fn source(&self, t: &ThingId, evidence: &[StageRef]) -> LeakSourceKind {
        let origin = evidence
            .windows(2)
            .position(|w| self.legit(t, &w[0].machine) && !self.legit(t, &w[1].machine))
            .unwrap_or(0);
        for s in evidence[..=origin].iter().rev() {
            match s.kind {
                StageKind::Create => return LeakSourceKind::Created,
                StageKind::Process => return LeakSourceKind::Processed,
                StageKind::Receive => return LeakSourceKind::Received,
                StageKind::Release => return LeakSourceKind::Released,
                StageKind::Transfer => {}
            }
        }
        LeakSourceKind::Received
    }
}

/// Leakage findings computed by brute force, for comparison with
/// `tm_core::leakage::analyze`. Assumes a valid model and policy.
pub fn oracle_findings(model: &Model, policy: &Policy) -> Vec<Finding> {
    let o = Oracle { model, policy };
    let mut things: Vec<&Thing> = model
        .things
        .iter()
        .filter(|t| t.sensitive || policy.sensitive.contains(&t.id))
        .collect();
    things.sort_by(|a, b| a.name.cmp(&b.name));

    let mut out = Vec::new();
    for t in things {
        let seeds = o.seeds(&t.id);
        for m in &model.machines {
            let flagged = !o.authorized(&t.id, &m.id) || policy.declared_sinks.contains(&m.id);
            if !flagged {
                continue;
            }
            let Some(evidence) = o.best_path(&seeds, &m.id) else {
                continue;
            };
            let activator = o
                .lineage(&m.id)
                .iter()
                .find_map(|a| o.machine(a).actor.clone());
            out.push(Finding {
                thing: t.id.clone(),
                leak_machine: m.id.clone(),
                leak_machine_path: o.path(&m.id),
                activator,
                source_kind: o.source(&t.id, &evidence),
                evidence,
            });
        }
    }
    let name = |t: &ThingId| model.thing(t).unwrap().name.clone();
    out.sort_by(|a, b| (name(&a.thing), &a.leak_machine_path).cmp(&(name(&b.thing), &b.leak_machine_path)));
    out
}
