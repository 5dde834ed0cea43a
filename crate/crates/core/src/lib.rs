//! Thinging Machine models.
//!
//! A model is a forest of machines with five stages each, connected by flow
//! and trigger edges. This crate parses `.tm` text, validates the result,
//! simulates event chronologies and finds leakage machines under a policy.

pub mod behavior;
pub mod diagnostic;
pub mod dsl;
pub mod fixtures;
pub mod io;
pub mod leakage;
pub mod legality;
pub mod model;
pub mod validate;

pub use diagnostic::{has_errors, Code, Diagnostic, Location, Severity, SourceSpan};
pub use legality::legal_flow;
pub use model::{
    resolve_path, FlowEdge, Machine, MachineId, Model, ModelIndex, StageKind, StageRef, Thing, ThingId,
    TriggerEdge,
};
pub use validate::validate;

/// Static and behavioral diagnostics for a whole `.tm` document.
pub fn check_document(model: &Model, behavior: Option<&behavior::Behavior>) -> Vec<Diagnostic> {
    let mut out = validate(model);
    if let Some(b) = behavior {
        out.extend(b.check(model));
    }
    out
}
