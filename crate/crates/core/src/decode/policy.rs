use std::collections::BTreeSet;

use super::{ActionMask, Policy, StateMask};
use crate::amr::Question;
use crate::machine::{Action, MachineState, Phase, Relation};
use crate::sparql::{HeaderKind, Term};

pub const DEFAULT_TAU: f64 = 0.34;

const AUXILIARIES: &[&str] = &["is", "are", "was", "were", "did", "does", "do"];

fn trigrams(text: &str) -> BTreeSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < 3 {
        return if chars.is_empty() { BTreeSet::new() } else { BTreeSet::from([text.to_string()]) };
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Dice coefficient of the character-trigram sets of `a` and `b`.
pub fn trigram_dice(a: &str, b: &str) -> f64 {
    let (ta, tb) = (trigrams(a), trigrams(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    2.0 * ta.intersection(&tb).count() as f64 / (ta.len() + tb.len()) as f64
}

/// `birthPlace` -> `birth place`, `populationTotal` -> `population total`.
fn split_camel(local: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for ch in local.chars() {
        if ch == '_' || ch == '-' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = ch.is_lowercase() || ch.is_ascii_digit();
        out.extend(ch.to_lowercase());
    }
    out
}

/// Deterministic baseline: header from the question's opening words, then
/// trigram similarity between relation names and the supporting text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalPolicy {
    pub tau: f64,
}

impl Default for LexicalPolicy {
    fn default() -> Self {
        LexicalPolicy { tau: DEFAULT_TAU }
    }
}

impl LexicalPolicy {
    pub fn new(tau: f64) -> Self {
        LexicalPolicy { tau }
    }

    pub fn header(q: &Question) -> HeaderKind {
        let lower: Vec<String> = q.tokens.iter().take(2).map(|t| t.to_lowercase()).collect();
        match lower.as_slice() {
            [a, b] if a == "how" && b == "many" => HeaderKind::Count,
            [a, ..] if AUXILIARIES.contains(&a.as_str()) => HeaderKind::Ask,
            _ => HeaderKind::Select,
        }
    }

    pub fn score(rel: &Relation, tokens: &[&str]) -> f64 {
        let name = split_camel(&rel.local);
        tokens.iter().map(|t| trigram_dice(&name, &t.to_lowercase())).fold(0.0, f64::max)
    }

    /// Emission is forced when skipping the top path would leave the query
    /// empty, or would drop an entity or the unknown for good.
    fn forced(state: &MachineState) -> bool {
        let stack = state.stack();
        let emitted = state.emitted();
        if stack.len() == 1 && emitted.is_empty() {
            return true;
        }
        let top = &stack[0];
        let anchored = |t: &Term| emitted.iter().any(|e| e.subject == *t || e.object == *t);
        let later = |t: &Term| stack[1..].iter().any(|p| p.term_a == *t || p.term_b == *t);
        [&top.term_a, &top.term_b]
            .into_iter()
            .filter(|t| t.is_ground() || t.as_var() == Some(crate::machine::UNKNOWN_VAR))
            .any(|t| !anchored(t) && !later(t))
    }
}

impl Policy for LexicalPolicy {
    fn choose(&self, state: &MachineState, mask: &ActionMask, state_mask: Option<&StateMask>, q: &Question) -> Action {
        if state.phase() == Phase::AwaitHeader {
            return Action::Header(LexicalPolicy::header(q));
        }
        if mask.close_allowed {
            return Action::Close;
        }
        let tokens: Vec<&str> = state_mask
            .map(|m| m.token_indices.iter().filter_map(|&i| q.tokens.get(i).map(String::as_str)).collect())
            .unwrap_or_default();
        let best = mask.relation_candidates.iter().map(|r| (LexicalPolicy::score(r, &tokens), r)).min_by(
            |(sa, a), (sb, b)| sb.total_cmp(sa).then_with(|| (&a.local, a.dir, &a.ns).cmp(&(&b.local, b.dir, &b.ns))),
        );
        match best {
            Some((score, rel)) if score >= self.tau || LexicalPolicy::forced(state) => Action::Relation(rel.clone()),
            _ => Action::Reduce,
        }
    }
}

/// Replays a fixed action sequence, one action per machine step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayPolicy {
    pub actions: Vec<Action>,
}

impl Policy for ReplayPolicy {
    fn choose(&self, state: &MachineState, _: &ActionMask, _: Option<&StateMask>, _: &Question) -> Action {
        self.actions.get(state.steps()).cloned().unwrap_or(Action::Close)
    }
}
