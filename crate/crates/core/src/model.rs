//! Static model: machines, things, flow edges and trigger edges.
//!
//! A [`Model`] is a forest of machines. Each machine owns at most one stage of
//! each [`StageKind`]; richer behavior is expressed by nesting submachines.
//! Things move between stages along [`FlowEdge`]s, and [`TriggerEdge`]s start
//! activity in another stage without carrying the flowing thing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

/// The five stages of a machine. The declaration order is the canonical
/// stage order used for sorting and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Create,
    Process,
    Receive,
    Release,
    Transfer,
}

impl StageKind {
    pub const ALL: [StageKind; 5] = [
        StageKind::Create,
        StageKind::Process,
        StageKind::Receive,
        StageKind::Release,
        StageKind::Transfer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Create => "create",
            StageKind::Process => "process",
            StageKind::Receive => "receive",
            StageKind::Release => "release",
            StageKind::Transfer => "transfer",
        }
    }

    pub fn parse(s: &str) -> Option<StageKind> {
        StageKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(
    /// Machine identifier. Models read from text use the machine path.
    MachineId
);
string_id!(
    /// Thing identifier. Models read from text use the thing name.
    ThingId
);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Machine {
    pub id: MachineId,
    pub name: String,
    pub parent: Option<MachineId>,
    /// Kept as a list so that duplicate kinds can be reported by validation.
    pub stages: Vec<StageKind>,
    /// Human or role operating the machine, e.g. "IT employee".
    pub actor: Option<String>,
    /// Outside the grand machine's trust boundary.
    pub external: bool,
}

impl Machine {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Machine {
            id: MachineId::new(id),
            name: name.into(),
            parent: None,
            stages: Vec::new(),
            actor: None,
            external: false,
        }
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent = Some(MachineId::new(parent));
        self
    }

    pub fn with_stages(mut self, stages: &[StageKind]) -> Self {
        self.stages = stages.to_vec();
        self
    }

    pub fn has_stage(&self, kind: StageKind) -> bool {
        self.stages.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Thing {
    pub id: ThingId,
    pub name: String,
    pub sensitive: bool,
}

impl Thing {
    pub fn new(name: impl Into<String>, sensitive: bool) -> Self {
        let name = name.into();
        Thing {
            id: ThingId::new(name.clone()),
            name,
            sensitive,
        }
    }
}

/// Address of one stage node in the diagram.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StageRef {
    pub machine: MachineId,
    pub kind: StageKind,
}

impl StageRef {
    pub fn new(machine: impl Into<String>, kind: StageKind) -> Self {
        StageRef {
            machine: MachineId::new(machine),
            kind,
        }
    }
}

impl fmt::Display for StageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.machine, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowEdge {
    pub thing: ThingId,
    pub from: StageRef,
    pub to: StageRef,
    /// Optional step ordinal from the diagram numbering.
    pub step: Option<u32>,
    /// Declared leak flow.
    pub leak: bool,
}

impl FlowEdge {
    pub fn new(thing: impl Into<String>, from: StageRef, to: StageRef) -> Self {
        FlowEdge {
            thing: ThingId::new(thing),
            from,
            to,
            step: None,
            leak: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriggerEdge {
    pub from: StageRef,
    pub to: StageRef,
    /// Thing born at the target when the target is a create stage.
    pub creates: Option<ThingId>,
}

impl TriggerEdge {
    pub fn new(from: StageRef, to: StageRef) -> Self {
        TriggerEdge {
            from,
            to,
            creates: None,
        }
    }
}

/// The grand machine: every machine, thing and edge of one diagram.
///
/// Equality is structural: the order of the collections (and of the stage
/// lists) does not matter.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub machines: Vec<Machine>,
    pub things: Vec<Thing>,
    pub flows: Vec<FlowEdge>,
    pub triggers: Vec<TriggerEdge>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn machine(&self, id: &MachineId) -> Option<&Machine> {
        self.machines.iter().find(|m| &m.id == id)
    }

    pub fn thing(&self, id: &ThingId) -> Option<&Thing> {
        self.things.iter().find(|t| &t.id == id)
    }

    /// Copy with every collection sorted; two models are equal iff their
    /// canonical copies are identical.
    pub fn canonical(&self) -> Model {
        let mut m = self.clone();
        for machine in &mut m.machines {
            machine.stages.sort();
        }
        m.machines.sort();
        m.things.sort();
        m.flows.sort();
        m.triggers.sort();
        m
    }

    /// Root-to-node name path of a machine, `None` if the parent chain is
    /// broken or cyclic.
    pub fn path_of(&self, id: &MachineId) -> Option<String> {
        let by_id: BTreeMap<&MachineId, &Machine> =
            self.machines.iter().map(|m| (&m.id, m)).collect();
        path_in(&by_id, id)
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.machines == b.machines
            && a.things == b.things
            && a.flows == b.flows
            && a.triggers == b.triggers
    }
}

impl Eq for Model {}

fn path_in(by_id: &BTreeMap<&MachineId, &Machine>, id: &MachineId) -> Option<String> {
    let mut names = Vec::new();
    let mut seen = BTreeSet::new();
    let mut cur = id;
    loop {
        if !seen.insert(cur) {
            return None;
        }
        let m = by_id.get(cur)?;
        names.push(m.name.as_str());
        match &m.parent {
            Some(p) => cur = p,
            None => break,
        }
    }
    names.reverse();
    Some(names.join("/"))
}

/// Read-only lookup tables over a model. Tolerates malformed models: broken
/// parent chains simply have no path.
#[derive(Debug)]
pub struct ModelIndex<'a> {
    pub model: &'a Model,
    machines: BTreeMap<&'a MachineId, &'a Machine>,
    paths: BTreeMap<&'a MachineId, String>,
}

impl<'a> ModelIndex<'a> {
    pub fn new(model: &'a Model) -> Self {
        let mut machines = BTreeMap::new();
        for m in &model.machines {
            machines.entry(&m.id).or_insert(m);
        }
        let paths = machines
            .keys()
            .filter_map(|id| path_in(&machines, id).map(|p| (*id, p)))
            .collect();
        ModelIndex {
            model,
            machines,
            paths,
        }
    }

    pub fn machine(&self, id: &MachineId) -> Option<&'a Machine> {
        self.machines.get(id).copied()
    }

    pub fn path(&self, id: &MachineId) -> Option<&str> {
        self.paths.get(id).map(String::as_str)
    }

    /// Path when resolvable, otherwise the raw id. Used for ordering and
    /// messages.
    pub fn display_path(&self, id: &MachineId) -> String {
        self.path(id)
            .map(str::to_string)
            .unwrap_or_else(|| id.0.clone())
    }

    pub fn stage_exists(&self, r: &StageRef) -> bool {
        self.machine(&r.machine)
            .is_some_and(|m| m.has_stage(r.kind))
    }

    /// Sort key used for every deterministic tie-break on stages.
    pub fn stage_key(&self, r: &StageRef) -> (String, StageKind) {
        (self.display_path(&r.machine), r.kind)
    }

    /// `id` itself followed by its ancestors, nearest first.
    pub fn ancestry(&self, id: &MachineId) -> Vec<&'a MachineId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cur = self.machine(id);
        while let Some(m) = cur {
            if !seen.insert(&m.id) {
                break;
            }
            out.push(&m.id);
            cur = m.parent.as_ref().and_then(|p| self.machine(p));
        }
        out
    }
}

/// Finds the unique machine whose root-to-node name path equals `path`.
pub fn resolve_path<'a>(model: &'a Model, path: &str) -> Option<&'a Machine> {
    if path.is_empty() {
        return None;
    }
    let index = ModelIndex::new(model);
    let mut hits = model
        .machines
        .iter()
        .filter(|m| index.path(&m.id) == Some(path));
    let first = hits.next()?;
    match hits.next() {
        Some(_) => None,
        None => Some(first),
    }
}
