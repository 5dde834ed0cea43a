//! Graphviz digraph export.
//!
//! Machines become nested `cluster_` subgraphs and stages become nodes named
//! `"<machine path>.<kind>"`. Flows are solid and blue, triggers dashed.
//! Declared leak flows and the edges along highlighted findings are red;
//! the red edges of each finding sit in their own `leak_<n>` subgraph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::ExportOptions;
use crate::diagnostic::Diagnostic;
use crate::dsl::{quote, InvalidModel};
use crate::leakage::Finding;
use crate::model::{Machine, MachineId, Model, ModelIndex, StageRef};
use crate::validate::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Flow(usize),
    Trigger(usize),
}

pub fn to_graph_desc(model: &Model, options: &ExportOptions) -> Result<String, InvalidModel> {
    let errors: Vec<_> = validate(model).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        return Err(InvalidModel(errors));
    }
    let index = ModelIndex::new(model);
    let node = |r: &StageRef| quote(&format!("{}.{}", index.display_path(&r.machine), r.kind));
    let skey = |r: &StageRef| index.stage_key(r);

    let mut out = String::from("digraph tm {\n  node [shape=box, style=rounded];\n");

    let mut children: BTreeMap<Option<&MachineId>, Vec<&Machine>> = BTreeMap::new();
    for m in &model.machines {
        children.entry(m.parent.as_ref()).or_default().push(m);
    }
    for list in children.values_mut() {
        list.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
    }
    for m in children.get(&None).into_iter().flatten() {
        write_cluster(&mut out, m, &children, &index, 1);
    }

    // canonical edge order: flows then triggers, each by endpoints
    let mut flows: Vec<usize> = (0..model.flows.len()).collect();
    flows.sort_by_key(|&i| {
        let f = &model.flows[i];
        (skey(&f.from), skey(&f.to), f.thing.clone(), f.step, f.leak)
    });
    let mut triggers: Vec<usize> = (0..model.triggers.len()).collect();
    triggers.sort_by_key(|&i| {
        let t = &model.triggers[i];
        (skey(&t.from), skey(&t.to), t.creates.clone())
    });
    let order: Vec<Edge> = flows
        .iter()
        .map(|&i| Edge::Flow(i))
        .chain(triggers.iter().map(|&i| Edge::Trigger(i)))
        .collect();

    let groups = leak_groups(model, &order, options.highlight_findings.as_deref().unwrap_or(&[]));
    let grouped: BTreeSet<Edge> = groups.iter().flat_map(|(_, g)| g.iter().copied()).collect();
    let leak_marked = |e: Edge| matches!(e, Edge::Flow(i) if model.flows[i].leak);

    let line = |e: Edge, red: bool| -> String {
        match e {
            Edge::Flow(i) => {
                let f = &model.flows[i];
                let name = model.thing(&f.thing).map_or(f.thing.as_str(), |t| t.name.as_str());
                let label = match f.step {
                    Some(n) => format!("{name} ({n})"),
                    None => name.to_string(),
                };
                let color = if red { "red" } else { "blue" };
                format!(
                    "{} -> {} [label={}, color={color}];",
                    node(&f.from),
                    node(&f.to),
                    quote(&label)
                )
            }
            Edge::Trigger(i) => {
                let t = &model.triggers[i];
                let color = if red { ", color=red" } else { "" };
                format!("{} -> {} [style=dashed{color}];", node(&t.from), node(&t.to))
            }
        }
    };

    for &e in &order {
        if !grouped.contains(&e) {
            writeln!(out, "  {}", line(e, leak_marked(e))).unwrap();
        }
    }
    for (n, (finding, edges)) in groups.iter().enumerate() {
        writeln!(out, "  subgraph {} {{", quote(&format!("leak_{}", n + 1))).unwrap();
        let mut what = format!("{} -> {}", finding.thing, finding.leak_machine_path);
        if let Some(a) = &finding.activator {
            write!(what, " by {a}").unwrap();
        }
        writeln!(out, "    // {}", what.replace('\n', " ")).unwrap();
        for &e in edges {
            writeln!(out, "    {}", line(e, true)).unwrap();
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    Ok(out)
}

/// Assigns each red edge to the first highlighted finding that uses it:
/// the edges along its evidence, then the leak flows inside its machine.
/// Findings left with no edge of their own get no group.
fn leak_groups<'f>(model: &Model, order: &[Edge], findings: &'f [Finding]) -> Vec<(&'f Finding, Vec<Edge>)> {
    let rank: BTreeMap<Edge, usize> = order.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut claimed: BTreeSet<Edge> = BTreeSet::new();
    let mut groups = Vec::new();
    for f in findings {
        let mut mine: Vec<Edge> = Vec::new();
        for hop in f.evidence.windows(2) {
            if let Some(e) = hop_edge(model, &rank, &f.thing, &hop[0], &hop[1]) {
                mine.push(e);
            }
        }
        mine.extend(
            order
                .iter()
                .copied()
                .filter(|e| matches!(e, Edge::Flow(i) if model.flows[*i].leak && model.flows[*i].from.machine == f.leak_machine)),
        );
        mine.retain(|e| claimed.insert(*e));
        mine.sort_by_key(|e| rank[e]);
        if !mine.is_empty() {
            groups.push((f, mine));
        }
    }
    groups
}

/// The model edge drawn for one evidence hop: a flow of the finding's thing,
/// else any flow, else a trigger, first in canonical order.
fn hop_edge(
    model: &Model,
    rank: &BTreeMap<Edge, usize>,
    thing: &crate::model::ThingId,
    a: &StageRef,
    b: &StageRef,
) -> Option<Edge> {
    let flows = || {
        model
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| &f.from == a && &f.to == b)
    };
    let first = |it: Vec<Edge>| it.into_iter().min_by_key(|e| rank[e]);
    first(flows().filter(|(_, f)| &f.thing == thing).map(|(i, _)| Edge::Flow(i)).collect())
        .or_else(|| first(flows().map(|(i, _)| Edge::Flow(i)).collect()))
        .or_else(|| {
            first(
                model
                    .triggers
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| &t.from == a && &t.to == b)
                    .map(|(i, _)| Edge::Trigger(i))
                    .collect(),
            )
        })
}

fn write_cluster(
    out: &mut String,
    m: &Machine,
    children: &BTreeMap<Option<&MachineId>, Vec<&Machine>>,
    index: &ModelIndex<'_>,
    depth: usize,
) {
    let pad = "  ".repeat(depth);
    let path = index.display_path(&m.id);
    writeln!(out, "{pad}subgraph {} {{", quote(&format!("cluster_{path}"))).unwrap();
    let label = match &m.actor {
        Some(a) => format!("{}\n({a})", m.name),
        None => m.name.clone(),
    };
    writeln!(out, "{pad}  label={};", quote(&label)).unwrap();
    if m.external {
        writeln!(out, "{pad}  style=dashed;").unwrap();
    }
    let mut stages = m.stages.clone();
    stages.sort();
    for k in stages {
        writeln!(
            out,
            "{pad}  {} [label={}];",
            quote(&format!("{path}.{k}")),
            quote(k.as_str())
        )
        .unwrap();
    }
    for c in children.get(&Some(&m.id)).into_iter().flatten() {
        write_cluster(out, c, children, index, depth + 1);
    }
    writeln!(out, "{pad}}}").unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::leakage::{analyze, Policy};

    const TEXT: &str = "
        machine Bank {
          machine Desk { stage create; stage release; stage transfer; }
          machine Pc [actor=\"clerk\"] { stage transfer; stage receive; stage process; }
        }
        machine Camera [actor=\"visitor\"] { stage create; stage process; stage release; }
        thing Card [sensitive];
        flow Card: Bank/Desk.create -> Bank/Desk.release [step=1];
        flow Card: Bank/Desk.release -> Bank/Desk.transfer [step=2];
        flow Card: Bank/Desk.transfer -> Bank/Pc.transfer;
        flow Card: Bank/Pc.transfer -> Bank/Pc.receive;
        flow Card: Bank/Pc.receive -> Bank/Pc.process;
        trigger: Bank/Pc.process => Camera.create;
        flow Card: Camera.create -> Camera.release [leak];
    ";

    fn options(findings: Option<Vec<Finding>>) -> ExportOptions {
        ExportOptions {
            highlight_findings: findings,
            ..ExportOptions::default()
        }
    }

    #[test]
    fn nested_clusters_and_quoted_nodes() {
        let m = parse(TEXT).model.unwrap();
        let g = to_graph_desc(&m, &options(None)).unwrap();
        assert!(g.starts_with("digraph tm {\n"));
        assert!(g.contains("  subgraph \"cluster_Bank\" {\n    label=\"Bank\";\n    subgraph \"cluster_Bank/Desk\" {"));
        assert!(g.contains("label=\"Pc\\n(clerk)\";"));
        assert!(g.contains("\"Bank/Desk.create\" -> \"Bank/Desk.release\" [label=\"Card (1)\", color=blue];"));
        assert!(g.contains("\"Bank/Pc.process\" -> \"Camera.create\" [style=dashed];"));
        // only the declared leak flow is red without highlights
        assert_eq!(g.matches("color=red").count(), 1);
        assert_eq!(g.matches("subgraph \"leak_").count(), 0);
    }

    #[test]
    fn highlighted_findings_get_groups() {
        let m = parse(TEXT).model.unwrap();
        let policy = Policy::default().authorize("Card", "Bank");
        let found = analyze(&m, &policy).unwrap();
        assert_eq!(found.len(), 1);
        let g = to_graph_desc(&m, &options(Some(found.clone()))).unwrap();
        assert_eq!(g.matches("subgraph \"leak_").count(), 1);
        // evidence hops plus the leak flow, each drawn once
        let distinct: BTreeSet<_> = found[0].evidence.windows(2).collect();
        assert_eq!(g.matches("color=red").count(), distinct.len() + 1);
        assert_eq!(g, to_graph_desc(&m, &options(Some(found))).unwrap());
    }

    #[test]
    fn no_leaks_no_red() {
        let m = parse("machine A { stage create; stage release; } thing T; flow T: A.create -> A.release;")
            .model
            .unwrap();
        let g = to_graph_desc(&m, &options(None)).unwrap();
        assert!(!g.contains("red"));
    }
}
