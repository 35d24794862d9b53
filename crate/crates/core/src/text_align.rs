//! Aligning free-text generated facts to knowledge-base facts by ROUGE-1.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FactId, KnowledgeBase, QuestionId};
use crate::expl_eval::{Explanation, ExplanationFact};
use crate::text::normalize;

pub const DEFAULT_SEPARATOR: &str = "[AND]";
pub const DEFAULT_THRESHOLD: f64 = 0.70;

/// Raw generator output for one question, split on the separator token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedOutput {
    #[serde(rename = "question")]
    pub question_id: QuestionId,
    pub raw: String,
    #[serde(skip)]
    pub fact_strings: Vec<String>,
}

impl GeneratedOutput {
    /// Splits `raw` on `separator`, trims, drops empty pieces and repeats.
    pub fn new(question_id: impl Into<String>, raw: impl Into<String>, separator: &str) -> Self {
        let raw = raw.into();
        let mut fact_strings: Vec<String> = Vec::new();
        for piece in raw.split(separator) {
            let piece = piece.trim();
            if !piece.is_empty() && !fact_strings.iter().any(|s| s == piece) {
                fact_strings.push(piece.to_string());
            }
        }
        Self {
            question_id: question_id.into(),
            raw,
            fact_strings,
        }
    }

    /// Re-splits after deserialization, which leaves `fact_strings` empty.
    pub fn resplit(self, separator: &str) -> Self {
        Self::new(self.question_id, self.raw, separator)
    }
}

fn bag<S: AsRef<str>>(tokens: &[S]) -> HashMap<&str, u32> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_ref()).or_insert(0) += 1;
    }
    counts
}

fn overlap(a: &HashMap<&str, u32>, b: &HashMap<&str, u32>) -> u32 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .map(|(t, &c)| c.min(large.get(t).copied().unwrap_or(0)))
        .sum()
}

fn f1_from_counts(overlap: u32, len_a: usize, len_b: usize) -> f64 {
    if overlap == 0 || len_a == 0 || len_b == 0 {
        return 0.0;
    }
    let p = overlap as f64 / len_b as f64;
    let r = overlap as f64 / len_a as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-1 F1 over normalized unigram multisets. Zero when either side has
/// no tokens.
pub fn rouge1(a: &str, b: &str) -> f64 {
    let ta = normalize(a);
    let tb = normalize(b);
    f1_from_counts(overlap(&bag(&ta), &bag(&tb)), ta.len(), tb.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub generated: String,
    pub best_fact: Option<FactId>,
    pub score: f64,
    pub accepted: bool,
}

/// Pre-tokenized knowledge base for repeated alignment.
pub struct Aligner {
    facts: Vec<(FactId, Vec<String>)>,
}

impl Aligner {
    pub fn new(kb: &KnowledgeBase) -> Self {
        Self {
            facts: kb.facts().map(|f| (f.id.clone(), normalize(&f.text))).collect(),
        }
    }

    /// Best fact for one string; ties go to the smallest fact id.
    pub fn best(&self, generated: &str) -> (Option<FactId>, f64) {
        let tokens = normalize(generated);
        let gen_bag = bag(&tokens);
        let best = self
            .facts
            .par_iter()
            .map(|(id, ft)| {
                let score = f1_from_counts(overlap(&gen_bag, &bag(ft)), tokens.len(), ft.len());
                (id, score)
            })
            .reduce_with(|a, b| match b.1.total_cmp(&a.1) {
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Equal => {
                    if b.0 < a.0 {
                        b
                    } else {
                        a
                    }
                }
            });
        match best {
            Some((id, score)) => (Some(id.clone()), score),
            None => (None, 0.0),
        }
    }

    pub fn align(&self, gen: &GeneratedOutput, threshold: f64) -> Vec<Alignment> {
        gen.fact_strings
            .iter()
            .map(|s| {
                let (best_fact, score) = self.best(s);
                Alignment {
                    generated: s.clone(),
                    accepted: best_fact.is_some() && score >= threshold,
                    best_fact,
                    score,
                }
            })
            .collect()
    }
}

/// Aligns every generated string of `gen` against the whole knowledge base.
pub fn align(gen: &GeneratedOutput, kb: &KnowledgeBase, threshold: f64) -> Vec<Alignment> {
    Aligner::new(kb).align(gen, threshold)
}

/// Accepted alignments as an explanation, first occurrence of each fact kept.
pub fn alignments_to_explanation(question_id: &str, model: &str, alignments: &[Alignment]) -> Explanation {
    let mut expl = Explanation::new(question_id, model);
    for a in alignments.iter().filter(|a| a.accepted) {
        if let Some(fact) = &a.best_fact {
            expl.push(ExplanationFact {
                fact: fact.clone(),
                score: Some(a.score),
                source: model.to_string(),
            });
        }
    }
    expl
}

/// Audit rows: generated string, best fact, score, accepted.
pub fn alignment_audit_tsv(rows: &[(QuestionId, Alignment)]) -> String {
    let mut out = String::from("question\tgenerated\tbest_fact\tscore\taccepted\n");
    for (q, a) in rows {
        out.push_str(&format!(
            "{q}\t{}\t{}\t{:.6}\t{}\n",
            a.generated.replace(['\t', '\n'], " "),
            a.best_fact.as_deref().unwrap_or("-"),
            a.score,
            a.accepted as u8
        ));
    }
    out
}
