//! Answer-set F1 and dataset-level Macro F1.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::Serialize;

use crate::dataset::{Record, RecordError};
use crate::kg::{execute, AnswerSet};
use crate::pipeline::Pipeline;

/// F1 between two answer sets of the same class; 0 across classes.
/// Two empty binding sets agree perfectly.
pub fn answer_f1(predicted: &AnswerSet, gold: &AnswerSet) -> f64 {
    match (predicted, gold) {
        (AnswerSet::Bindings(p), AnswerSet::Bindings(g)) => {
            if p.is_empty() && g.is_empty() {
                return 1.0;
            }
            let hit = p.intersection(g).count() as f64;
            if hit == 0.0 {
                return 0.0;
            }
            let precision = hit / p.len() as f64;
            let recall = hit / g.len() as f64;
            2.0 * precision * recall / (precision + recall)
        }
        (AnswerSet::Boolean(p), AnswerSet::Boolean(g)) => f64::from(u8::from(p == g)),
        (AnswerSet::Count(p), AnswerSet::Count(g)) => f64::from(u8::from(p == g)),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionResult {
    pub id: String,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparql: Option<String>,
    pub predicted: Option<AnswerSet>,
    pub gold: Option<AnswerSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_question: Vec<QuestionResult>,
    pub macro_f1: f64,
}

impl EvalReport {
    /// Keeps the given order; the macro average of an empty run is 0.
    pub fn from_results(per_question: Vec<QuestionResult>) -> Self {
        let macro_f1 = if per_question.is_empty() {
            0.0
        } else {
            per_question.iter().map(|r| r.f1).sum::<f64>() / per_question.len() as f64
        };
        EvalReport { per_question, macro_f1 }
    }

    /// Human-readable summary: one row per question and the macro average.
    pub fn table(&self) -> String {
        let width = self.per_question.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>6}  failure", "id", "f1");
        for r in &self.per_question {
            let _ = writeln!(out, "{:<width$}  {:>6.3}  {}", r.id, r.f1, r.failure.as_deref().unwrap_or("-"));
        }
        let failed: BTreeSet<&str> = self.per_question.iter().filter_map(|r| r.failure.as_deref()).collect();
        let _ = writeln!(out, "macro F1 {:.4} over {} questions", self.macro_f1, self.per_question.len());
        if !failed.is_empty() {
            let _ = writeln!(out, "failure causes: {}", failed.into_iter().collect::<Vec<_>>().join(", "));
        }
        out
    }
}

fn failed(id: &str, gold: Option<AnswerSet>, sparql: Option<String>, e: RecordError) -> QuestionResult {
    QuestionResult {
        id: id.to_string(),
        f1: 0.0,
        sparql,
        predicted: None,
        gold,
        failure: Some(e.cause().to_string()),
        detail: Some(e.to_string()),
    }
}

/// Transpile, execute and score one record. Errors score 0 with a cause.
pub fn evaluate_record(pipeline: &Pipeline, record: &Record) -> QuestionResult {
    let gold = match pipeline.gold(record).and_then(|q| Ok(execute(pipeline.store, &q)?)) {
        Ok(a) => a,
        Err(e) => return failed(&record.id, None, None, e),
    };
    let t = match pipeline.transpile(record) {
        Ok(t) => t,
        Err(e) => return failed(&record.id, Some(gold), None, e),
    };
    let sparql = t.query.to_string();
    match execute(pipeline.store, &t.query) {
        Ok(predicted) => QuestionResult {
            id: record.id.clone(),
            f1: answer_f1(&predicted, &gold),
            sparql: Some(sparql),
            predicted: Some(predicted),
            gold: Some(gold),
            failure: None,
            detail: None,
        },
        Err(e) => failed(&record.id, Some(gold), Some(sparql), e.into()),
    }
}

pub fn run_eval(records: &[Record], pipeline: &Pipeline) -> EvalReport {
    EvalReport::from_results(records.iter().map(|r| evaluate_record(pipeline, r)).collect())
}
