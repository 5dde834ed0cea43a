//! Interchange formats: lossless JSON and a Graphviz rendering.

mod graph;
mod structured;

use crate::behavior::Behavior;
use crate::dsl::InvalidModel;
use crate::leakage::Finding;
use crate::model::Model;

pub use graph::to_graph_desc;
pub use structured::{from_structured, to_structured, Document, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ExportFormat {
    #[default]
    GraphDesc,
    Structured,
}

#[derive(Debug, Clone, Default)]
pub struct ExportOptions {
    pub format: ExportFormat,
    /// Drawn in red. Only used by the graph format.
    pub highlight_findings: Option<Vec<Finding>>,
    /// Only used by the structured format.
    pub include_behavior: bool,
}

/// Renders `model` in the format `options` selects.
pub fn export(model: &Model, behavior: Option<&Behavior>, options: &ExportOptions) -> Result<String, InvalidModel> {
    match options.format {
        ExportFormat::GraphDesc => to_graph_desc(model, options),
        ExportFormat::Structured => to_structured(model, behavior.filter(|_| options.include_behavior)),
    }
}
