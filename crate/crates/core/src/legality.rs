//! Stage adjacency rules for flow edges.

use crate::model::{StageKind, StageRef};

use StageKind::*;

/// Legal (from, to) pairs inside one machine.
pub const INTRA_MACHINE: [(StageKind, StageKind); 7] = [
    (Transfer, Receive),
    (Receive, Process),
    (Receive, Release),
    (Process, Release),
    (Create, Process),
    (Create, Release),
    (Release, Transfer),
];

/// Legal (from, to) pairs between two different machines.
pub const INTER_MACHINE: [(StageKind, StageKind); 1] = [(Transfer, Transfer)];

/// Whether a thing may flow from one stage directly to another.
pub fn legal_flow(from: &StageRef, to: &StageRef) -> bool {
    legal_kinds(from.kind, to.kind, from.machine == to.machine)
}

pub fn legal_kinds(from: StageKind, to: StageKind, same_machine: bool) -> bool {
    let table: &[(StageKind, StageKind)] = if same_machine {
        &INTRA_MACHINE
    } else {
        &INTER_MACHINE
    };
    table.contains(&(from, to))
}
