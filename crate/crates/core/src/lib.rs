//! Entity disambiguation from knowledge graphs: excerpts are turned into
//! typed triples, the triples into a graph, the graph into Leiden
//! communities, and each community into a context label.

pub mod corpus;
pub mod disambig;
pub mod evalkit;
pub mod extraction;
pub mod kgraph;
pub mod leiden;
pub mod pipeline;
pub mod schema;
pub mod synthetic;
