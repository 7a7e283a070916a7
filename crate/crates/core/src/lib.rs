//! Transpiles AMR graphs of natural-language questions into SPARQL.
//!
//! A question's AMR graph is annotated with SPARQL roles ([`rules`]), turned
//! into a stack of AMR paths, and consumed by a small transition machine
//! ([`machine`]) whose actions emit one triple per path. Actions come either
//! from a rule-based oracle given gold SPARQL ([`oracle`]) or from a policy
//! constrained by the knowledge graph ([`decode`]).

pub mod amr;
pub mod dataset;
pub mod decode;
pub mod eval;
pub mod kg;
pub mod machine;
pub mod oracle;
pub mod pipeline;
pub mod rules;
pub mod sparql;

pub use amr::{parse_penman, AmrGraph, Question};
pub use machine::{run, Action};
pub use sparql::{parse_sparql, SparqlQuery};
