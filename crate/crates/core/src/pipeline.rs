//! Record-level wiring: prepare, choose a policy, decode.

use crate::dataset::{Record, RecordError};
use crate::decode::{transpile_with_prefixes, LexicalPolicy, Policy, ReplayPolicy, Transpilation};
use crate::kg::TripleStore;
use crate::oracle::oracle_actions;
use crate::sparql::{parse_sparql_with, PrefixTable, SparqlQuery};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyChoice {
    /// Replay the oracle's actions; needs gold SPARQL.
    Oracle,
    Lexical {
        tau: f64,
    },
}

/// Shared, read-only context for processing records.
#[derive(Debug, Clone, Copy)]
pub struct Pipeline<'a> {
    pub store: &'a TripleStore,
    pub prefixes: &'a PrefixTable,
    pub policy: PolicyChoice,
}

impl<'a> Pipeline<'a> {
    pub fn new(store: &'a TripleStore, prefixes: &'a PrefixTable, policy: PolicyChoice) -> Self {
        Pipeline { store, prefixes, policy }
    }

    pub fn gold(&self, record: &Record) -> Result<SparqlQuery, RecordError> {
        let text = record.gold_sparql.as_deref().ok_or(RecordError::MissingGold)?;
        Ok(parse_sparql_with(text, self.prefixes)?)
    }

    pub fn transpile(&self, record: &Record) -> Result<Transpilation, RecordError> {
        let prepared = record.prepare()?;
        let (q, g, ann) = (&prepared.question, &prepared.graph, &prepared.annotation);
        let policy: Box<dyn Policy> = match self.policy {
            PolicyChoice::Oracle => {
                let gold = self.gold(record)?;
                Box::new(ReplayPolicy { actions: oracle_actions(&gold, g, ann).actions })
            }
            PolicyChoice::Lexical { tau } => Box::new(LexicalPolicy::new(tau)),
        };
        Ok(transpile_with_prefixes(q, g, ann, self.store, policy.as_ref(), self.prefixes)?)
    }
}
