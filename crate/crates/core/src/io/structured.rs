//! JSON interchange, `schema_version` "1".
//!
//! Keys are sorted and arrays are in canonical order, so equal models give
//! byte-identical documents. Machines nest under `children`; stage
//! references are `{"machine": id, "kind": stage}`; event edges carry a
//! `kind` tag of `step`, `flow` or `trigger`.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};

use crate::behavior::{Behavior, ChronEdge, Chronology, EdgeRef, Event, Scenario};
use crate::diagnostic::{Code, Diagnostic, Location};
use crate::dsl::InvalidModel;
use crate::model::{FlowEdge, Machine, MachineId, Model, ModelIndex, StageKind, StageRef, Thing, ThingId, TriggerEdge};
use crate::validate::validate;

pub const SCHEMA_VERSION: &str = "1";

/// A decoded structured document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub model: Model,
    pub behavior: Option<Behavior>,
}

pub fn to_structured(model: &Model, behavior: Option<&Behavior>) -> Result<String, InvalidModel> {
    let errors: Vec<_> = validate(model).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        return Err(InvalidModel(errors));
    }
    let index = ModelIndex::new(model);
    let skey = |r: &StageRef| index.stage_key(r);

    let mut children: BTreeMap<Option<&MachineId>, Vec<&Machine>> = BTreeMap::new();
    for m in &model.machines {
        children.entry(m.parent.as_ref()).or_default().push(m);
    }
    for list in children.values_mut() {
        list.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
    }

    let mut things: Vec<&Thing> = model.things.iter().collect();
    things.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
    let mut flows: Vec<&FlowEdge> = model.flows.iter().collect();
    flows.sort_by_key(|f| (f.step.is_none(), f.step, skey(&f.from), skey(&f.to), f.thing.clone(), f.leak));
    let mut triggers: Vec<&TriggerEdge> = model.triggers.iter().collect();
    triggers.sort_by_key(|t| (skey(&t.from), skey(&t.to), t.creates.clone()));

    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("machines".into(), machines_value(children.get(&None), &children));
    doc.insert(
        "things".into(),
        things
            .iter()
            .map(|t| json!({"id": t.id.as_str(), "name": t.name, "sensitive": t.sensitive}))
            .collect(),
    );
    doc.insert(
        "flows".into(),
        flows
            .iter()
            .map(|f| {
                let mut o = Map::new();
                o.insert("thing".into(), json!(f.thing.as_str()));
                o.insert("from".into(), stage_value(&f.from));
                o.insert("to".into(), stage_value(&f.to));
                o.insert("leak".into(), json!(f.leak));
                if let Some(step) = f.step {
                    o.insert("step".into(), json!(step));
                }
                Value::Object(o)
            })
            .collect(),
    );
    doc.insert(
        "triggers".into(),
        triggers
            .iter()
            .map(|t| {
                let mut o = Map::new();
                o.insert("from".into(), stage_value(&t.from));
                o.insert("to".into(), stage_value(&t.to));
                if let Some(c) = &t.creates {
                    o.insert("creates".into(), json!(c.as_str()));
                }
                Value::Object(o)
            })
            .collect(),
    );
    if let Some(b) = behavior {
        doc.insert("behavior".into(), behavior_value(b));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json values serialize");
    text.push('\n');
    Ok(text)
}

fn machines_value(list: Option<&Vec<&Machine>>, children: &BTreeMap<Option<&MachineId>, Vec<&Machine>>) -> Value {
    list.into_iter()
        .flatten()
        .map(|m| {
            let mut stages = m.stages.clone();
            stages.sort();
            let mut o = Map::new();
            o.insert("id".into(), json!(m.id.as_str()));
            o.insert("name".into(), json!(m.name));
            o.insert("external".into(), json!(m.external));
            o.insert("stages".into(), stages.iter().map(|k| json!(k.as_str())).collect());
            o.insert("children".into(), machines_value(children.get(&Some(&m.id)), children));
            if let Some(a) = &m.actor {
                o.insert("actor".into(), json!(a));
            }
            Value::Object(o)
        })
        .collect()
}

fn stage_value(r: &StageRef) -> Value {
    json!({"machine": r.machine.as_str(), "kind": r.kind.as_str()})
}

fn behavior_value(b: &Behavior) -> Value {
    let b = b.canonical();
    let events: Vec<Value> = b
        .events
        .iter()
        .map(|e| {
            let edges: Vec<Value> = e
                .edges
                .iter()
                .map(|r| match r {
                    EdgeRef::Step(n) => json!({"kind": "step", "step": n}),
                    EdgeRef::Flow { thing, from, to } => json!({
                        "kind": "flow",
                        "thing": thing.as_str(),
                        "from": stage_value(from),
                        "to": stage_value(to),
                    }),
                    EdgeRef::Trigger { from, to } => json!({
                        "kind": "trigger",
                        "from": stage_value(from),
                        "to": stage_value(to),
                    }),
                })
                .collect();
            json!({
                "id": e.id,
                "label": e.label,
                "time": e.time,
                "stages": e.stages.iter().map(stage_value).collect::<Vec<_>>(),
                "edges": edges,
            })
        })
        .collect();
    let chronology: Vec<Value> = b
        .chronology
        .edges
        .iter()
        .map(|c| {
            let mut o = Map::new();
            o.insert("from".into(), json!(c.from));
            o.insert("to".into(), json!(c.to));
            if let Some(g) = &c.guard {
                o.insert("guard".into(), json!(g));
            }
            Value::Object(o)
        })
        .collect();
    let scenarios: Vec<Value> = b
        .scenarios
        .iter()
        .map(|s| {
            json!({
                "name": s.name,
                "start": s.start,
                "max_steps": s.max_steps,
                "guards": s.guard_choices,
            })
        })
        .collect();
    json!({"events": events, "chronology": chronology, "scenarios": scenarios})
}

/// Decodes a structured document. Every schema problem is reported with the
/// field path where it occurs; the model itself is not validated here.
pub fn from_structured(text: &str) -> Result<Document, Vec<Diagnostic>> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            // serde's message already carries line and column
            return Err(vec![
                Diagnostic::error(Code::SchemaSyntax, e.to_string()).at(Location::Field("$".into()))
            ]);
        }
    };
    let mut d = Decoder::default();
    let doc = d.document(&value);
    match doc {
        Some(doc) if d.diags.is_empty() => Ok(doc),
        _ => Err(d.diags),
    }
}

#[derive(Default)]
struct Decoder {
    diags: Vec<Diagnostic>,
}

impl Decoder {
    fn error(&mut self, code: Code, path: &str, message: impl Into<String>) {
        self.diags
            .push(Diagnostic::error(code, message).at(Location::Field(path.to_string())));
    }

    fn invalid<T>(&mut self, path: &str, message: impl Into<String>) -> Option<T> {
        self.error(Code::SchemaInvalid, path, message);
        None
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(o) = v.as_object() else {
            return self.invalid(path, "expected an object");
        };
        for k in o.keys().filter(|k| !allowed.contains(&k.as_str())) {
            self.error(Code::SchemaInvalid, &format!("{path}.{k}"), "unknown field");
        }
        Some(o)
    }

    fn field<'v>(&mut self, o: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Value> {
        match o.get(key) {
            Some(v) => Some(v),
            None => self.invalid(&format!("{path}.{key}"), "missing field"),
        }
    }

    fn string(&mut self, o: &Map<String, Value>, path: &str, key: &str) -> Option<String> {
        let v = self.field(o, path, key)?;
        match v.as_str() {
            Some(s) => Some(s.to_string()),
            None => self.invalid(&format!("{path}.{key}"), "expected a string"),
        }
    }

    fn opt_string(&mut self, o: &Map<String, Value>, path: &str, key: &str) -> Option<Option<String>> {
        match o.get(key) {
            None => Some(None),
            Some(_) => self.string(o, path, key).map(Some),
        }
    }

    fn boolean(&mut self, o: &Map<String, Value>, path: &str, key: &str) -> Option<bool> {
        let v = self.field(o, path, key)?;
        match v.as_bool() {
            Some(b) => Some(b),
            None => self.invalid(&format!("{path}.{key}"), "expected a boolean"),
        }
    }

    fn number(&mut self, o: &Map<String, Value>, path: &str, key: &str) -> Option<u32> {
        let v = self.field(o, path, key)?;
        match v.as_u64().and_then(|n| u32::try_from(n).ok()) {
            Some(n) => Some(n),
            None => self.invalid(&format!("{path}.{key}"), "expected a non-negative 32-bit integer"),
        }
    }

    /// Decodes each element, reporting all failures before giving up.
    fn array<T>(
        &mut self,
        o: &Map<String, Value>,
        path: &str,
        key: &str,
        mut item: impl FnMut(&mut Self, &Value, &str) -> Option<T>,
    ) -> Option<Vec<T>> {
        let v = self.field(o, path, key)?;
        let Some(items) = v.as_array() else {
            return self.invalid(&format!("{path}.{key}"), "expected an array");
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, v) in items.iter().enumerate() {
            match item(self, v, &format!("{path}.{key}[{i}]")) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn document(&mut self, v: &Value) -> Option<Document> {
        let o = self.object(
            v,
            "$",
            &["schema_version", "machines", "things", "flows", "triggers", "behavior"],
        )?;
        match o.get("schema_version") {
            None => {
                self.error(Code::SchemaVersionMissing, "$.schema_version", "schema_version is required");
                return None;
            }
            Some(Value::String(s)) if s == SCHEMA_VERSION => {}
            Some(other) => {
                self.error(
                    Code::SchemaVersionUnsupported,
                    "$.schema_version",
                    format!("unsupported schema_version {other}, expected \"{SCHEMA_VERSION}\""),
                );
                return None;
            }
        }
        let mut machines = Vec::new();
        let roots = self.array(o, "$", "machines", |d, v, p| d.machine(v, p, None, &mut machines));
        let things = self.array(o, "$", "things", Self::thing);
        let flows = self.array(o, "$", "flows", Self::flow);
        let triggers = self.array(o, "$", "triggers", Self::trigger);
        let behavior = match o.get("behavior") {
            None => Some(None),
            Some(b) => self.behavior(b, "$.behavior").map(Some),
        };
        roots?;
        Some(Document {
            model: Model {
                machines,
                things: things?,
                flows: flows?,
                triggers: triggers?,
            },
            behavior: behavior?,
        })
    }

    fn machine(&mut self, v: &Value, path: &str, parent: Option<&MachineId>, out: &mut Vec<Machine>) -> Option<()> {
        let o = self.object(v, path, &["id", "name", "actor", "external", "stages", "children"])?;
        let id = self.string(o, path, "id").map(MachineId);
        let name = self.string(o, path, "name");
        let actor = self.opt_string(o, path, "actor");
        let external = self.boolean(o, path, "external");
        let stages = self.array(o, path, "stages", |d, v, p| match v.as_str().and_then(StageKind::parse) {
            Some(k) => Some(k),
            None => d.invalid(p, "expected a stage kind"),
        });
        let (id, name, actor, external, stages) = (id?, name?, actor?, external?, stages?);
        out.push(Machine {
            id: id.clone(),
            name,
            parent: parent.cloned(),
            stages,
            actor,
            external,
        });
        self.array(o, path, "children", |d, v, p| d.machine(v, p, Some(&id), out))
            .map(|_| ())
    }

    fn thing(&mut self, v: &Value, path: &str) -> Option<Thing> {
        let o = self.object(v, path, &["id", "name", "sensitive"])?;
        let id = self.string(o, path, "id");
        let name = self.string(o, path, "name");
        let sensitive = self.boolean(o, path, "sensitive");
        Some(Thing {
            id: ThingId(id?),
            name: name?,
            sensitive: sensitive?,
        })
    }

    fn stage(&mut self, o: &Map<String, Value>, path: &str, key: &str) -> Option<StageRef> {
        let v = self.field(o, path, key)?;
        self.stage_at(v, &format!("{path}.{key}"))
    }

    fn stage_at(&mut self, v: &Value, path: &str) -> Option<StageRef> {
        let s = self.object(v, path, &["machine", "kind"])?;
        let machine = self.string(s, path, "machine");
        let kind = self.string(s, path, "kind");
        let kind = match StageKind::parse(&kind?) {
            Some(k) => k,
            None => return self.invalid(&format!("{path}.kind"), "expected a stage kind"),
        };
        Some(StageRef {
            machine: MachineId(machine?),
            kind,
        })
    }

    fn flow(&mut self, v: &Value, path: &str) -> Option<FlowEdge> {
        let o = self.object(v, path, &["thing", "from", "to", "step", "leak"])?;
        let thing = self.string(o, path, "thing");
        let from = self.stage(o, path, "from");
        let to = self.stage(o, path, "to");
        let leak = self.boolean(o, path, "leak");
        let step = match o.get("step") {
            None => Some(None),
            Some(_) => self.number(o, path, "step").map(Some),
        };
        Some(FlowEdge {
            thing: ThingId(thing?),
            from: from?,
            to: to?,
            step: step?,
            leak: leak?,
        })
    }

    fn trigger(&mut self, v: &Value, path: &str) -> Option<TriggerEdge> {
        let o = self.object(v, path, &["from", "to", "creates"])?;
        let from = self.stage(o, path, "from");
        let to = self.stage(o, path, "to");
        let creates = self.opt_string(o, path, "creates");
        Some(TriggerEdge {
            from: from?,
            to: to?,
            creates: creates?.map(ThingId),
        })
    }

    fn behavior(&mut self, v: &Value, path: &str) -> Option<Behavior> {
        let o = self.object(v, path, &["events", "chronology", "scenarios"])?;
        let events = self.array(o, path, "events", Self::event);
        let chron = self.array(o, path, "chronology", |d, v, p| {
            let o = d.object(v, p, &["from", "to", "guard"])?;
            let from = d.string(o, p, "from");
            let to = d.string(o, p, "to");
            let guard = d.opt_string(o, p, "guard");
            Some(ChronEdge {
                from: from?,
                to: to?,
                guard: guard?,
            })
        });
        let scenarios = self.array(o, path, "scenarios", Self::scenario);
        Some(Behavior {
            events: events?,
            chronology: Chronology { edges: chron? },
            scenarios: scenarios?,
        })
    }

    fn event(&mut self, v: &Value, path: &str) -> Option<Event> {
        let o = self.object(v, path, &["id", "label", "time", "stages", "edges"])?;
        let id = self.string(o, path, "id");
        let label = self.string(o, path, "label");
        let time = self.number(o, path, "time");
        let stages = self.array(o, path, "stages", Self::stage_at);
        let edges = self.array(o, path, "edges", Self::edge_ref);
        Some(Event {
            id: id?,
            label: label?,
            time: time?,
            stages: stages?.into_iter().collect::<BTreeSet<_>>(),
            edges: edges?.into_iter().collect(),
        })
    }

    fn edge_ref(&mut self, v: &Value, path: &str) -> Option<EdgeRef> {
        let kind = v.get("kind").and_then(Value::as_str);
        match kind {
            Some("step") => {
                let o = self.object(v, path, &["kind", "step"])?;
                self.number(o, path, "step").map(EdgeRef::Step)
            }
            Some("flow") => {
                let o = self.object(v, path, &["kind", "thing", "from", "to"])?;
                let thing = self.string(o, path, "thing");
                let from = self.stage(o, path, "from");
                let to = self.stage(o, path, "to");
                Some(EdgeRef::Flow {
                    thing: ThingId(thing?),
                    from: from?,
                    to: to?,
                })
            }
            Some("trigger") => {
                let o = self.object(v, path, &["kind", "from", "to"])?;
                let from = self.stage(o, path, "from");
                let to = self.stage(o, path, "to");
                Some(EdgeRef::Trigger {
                    from: from?,
                    to: to?,
                })
            }
            _ => self.invalid(&format!("{path}.kind"), "expected \"step\", \"flow\" or \"trigger\""),
        }
    }

    fn scenario(&mut self, v: &Value, path: &str) -> Option<Scenario> {
        let o = self.object(v, path, &["name", "start", "max_steps", "guards"])?;
        let name = self.string(o, path, "name");
        let start = self.string(o, path, "start");
        let max_steps = self.number(o, path, "max_steps");
        let guards = self.field(o, path, "guards").and_then(|g| {
            let gpath = format!("{path}.guards");
            let Some(g) = g.as_object() else {
                return self.invalid(&gpath, "expected an object");
            };
            let mut out = BTreeMap::new();
            for (k, v) in g {
                match v.as_bool() {
                    Some(b) => {
                        out.insert(k.clone(), b);
                    }
                    None => self.error(Code::SchemaInvalid, &format!("{gpath}.{k}"), "expected a boolean"),
                }
            }
            (out.len() == g.len()).then_some(out)
        });
        Some(Scenario {
            name: name?,
            start: start?,
            max_steps: max_steps?,
            guard_choices: guards?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const TEXT: &str = "
        machine Mug [actor=\"barista\"] {
          stage receive;
          stage process;
          machine Full { stage create; }
        }
        thing Coffee [sensitive];
        thing State;
        flow Coffee: Mug.receive -> Mug.process [step=2];
        trigger: Mug.process => Mug/Full.create [creates=State];
        event Ea [time=1, label=\"pour\"] { region: Mug.receive, Mug.process; edges: step 2; }
        event Eb [time=2] { region: Mug.process, Mug/Full.create; edges: Mug.process => Mug/Full.create; }
        chron: Ea -> Eb;
        chron: Eb -> Ea [guard=!done];
        scenario once [start=Ea, max_steps=3] { done = false; }
    ";

    #[test]
    fn round_trips_model_and_behavior() {
        let r = parse(TEXT);
        let (m, b) = (r.model.unwrap(), r.behavior.unwrap());
        let text = to_structured(&m, Some(&b)).unwrap();
        let doc = from_structured(&text).unwrap();
        assert_eq!(doc.model, m);
        assert_eq!(doc.behavior.as_ref(), Some(&b));
        assert_eq!(to_structured(&doc.model, doc.behavior.as_ref()).unwrap(), text);
    }

    #[test]
    fn empty_model_document() {
        let text = to_structured(&Model::default(), None).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(
            v,
            json!({"schema_version": "1", "machines": [], "things": [], "flows": [], "triggers": []})
        );
    }

    #[test]
    fn version_is_required() {
        let err = from_structured(r#"{"machines": [], "things": [], "flows": [], "triggers": []}"#).unwrap_err();
        assert_eq!(err[0].code, Code::SchemaVersionMissing);
        let err = from_structured(r#"{"schema_version": 2}"#).unwrap_err();
        assert_eq!(err[0].code, Code::SchemaVersionUnsupported);
    }

    #[test]
    fn schema_errors_name_their_field() {
        let text = r#"{"schema_version": "1", "machines": [{"id": "M", "name": 3, "external": false,
            "stages": ["create", "bake"], "children": []}], "things": [], "flows": [{}], "triggers": [], "extra": 1}"#;
        let err = from_structured(text).unwrap_err();
        let at: Vec<String> = err
            .iter()
            .map(|d| d.location.as_ref().unwrap().to_string())
            .collect();
        assert!(at.contains(&"$.extra".to_string()), "{at:?}");
        assert!(at.contains(&"$.machines[0].name".to_string()), "{at:?}");
        assert!(at.contains(&"$.machines[0].stages[1]".to_string()), "{at:?}");
        assert!(at.contains(&"$.flows[0].thing".to_string()), "{at:?}");
        assert!(err.iter().all(|d| d.code == Code::SchemaInvalid));
    }

    #[test]
    fn truncated_text_is_a_syntax_error() {
        let full = to_structured(&parse(TEXT).model.unwrap(), None).unwrap();
        for cut in [0, 1, full.len() / 2, full.len() - 3] {
            let err = from_structured(&full[..cut]).unwrap_err();
            assert!(!err.is_empty());
        }
    }
}
