//! JSON-lines question records and their preparation into graph + roles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amr::{parse_penman, AmrError, AmrGraph, Question, Sidecar};
use crate::decode::DecodeError;
use crate::kg::ExecError;
use crate::machine::MachineError;
use crate::rules::{annotate, RoleAnnotation, RuleError};
use crate::sparql::SparqlError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub question: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    /// Penman text.
    pub amr: String,
    /// Node id to token indices.
    #[serde(default)]
    pub alignments: BTreeMap<String, Vec<usize>>,
    /// Node id to KG IRI, in addition to any `:wiki` roles in the Penman.
    #[serde(default)]
    pub wiki: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_sparql: Option<String>,
}

/// Anything that can go wrong while processing one record.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error(transparent)]
    Amr(#[from] AmrError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Sparql(#[from] SparqlError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("record has no gold SPARQL")]
    MissingGold,
}

impl RecordError {
    /// Short stable label for reports.
    pub fn cause(&self) -> &'static str {
        match self {
            RecordError::Amr(_) => "invalid-amr",
            RecordError::Rules(_) => "role-annotation",
            RecordError::Sparql(SparqlError::UnsupportedConstruct(_)) => "unsupported-construct",
            RecordError::Sparql(_) => "invalid-sparql",
            RecordError::Machine(_) => "machine",
            RecordError::Decode(_) => "decode",
            RecordError::Exec(_) => "execution",
            RecordError::MissingGold => "missing-gold",
        }
    }
}

/// A record parsed and annotated, ready for the machine.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub question: Question,
    pub graph: AmrGraph,
    pub annotation: RoleAnnotation,
}

impl Record {
    pub fn to_question(&self) -> Result<Question, AmrError> {
        Question::new(self.id.clone(), self.question.clone(), self.tokens.clone(), self.pos.clone())
    }

    pub fn to_graph(&self) -> Result<AmrGraph, AmrError> {
        let sidecar = Sidecar {
            alignments: self.alignments.clone(),
            wiki: self.wiki.clone(),
            token_count: Some(self.tokens.len()),
        };
        parse_penman(&self.amr, &sidecar)
    }

    pub fn prepare(&self) -> Result<Prepared, RecordError> {
        let question = self.to_question()?;
        let graph = self.to_graph()?;
        let annotation = annotate(&graph, &question)?;
        Ok(Prepared { question, graph, annotation })
    }
}

#[derive(Debug, Error)]
#[error("dataset line {line}: {source}")]
pub struct DatasetError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

/// One record per non-blank line.
pub fn read_jsonl(text: &str) -> Result<Vec<Record>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| DatasetError { line: i + 1, source }))
        .collect()
}
