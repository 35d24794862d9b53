//! Per-question candidate lists for relevance rating.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FactId, KnowledgeBase, Question, QuestionId, ScoreFile};

#[derive(Debug, Error, PartialEq)]
pub enum ShortlistError {
    #[error("score file {model:?} has no entry for question {question:?}")]
    MissingQuestion { model: String, question: QuestionId },
    #[error("k must be at least 1")]
    ZeroK,
}

/// Where a shortlisted fact came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum Source {
    /// Top-k of the named ranker.
    Ranker { model: String, k: usize },
    Gold,
}

impl From<Source> for String {
    fn from(s: Source) -> String {
        match s {
            Source::Ranker { model, k } => format!("{model}-top{k}"),
            Source::Gold => "gold".into(),
        }
    }
}

impl From<String> for Source {
    fn from(s: String) -> Source {
        if s == "gold" {
            return Source::Gold;
        }
        match s.rsplit_once("-top").map(|(m, k)| (m, k.parse::<usize>())) {
            Some((model, Ok(k))) => Source::Ranker { model: model.to_string(), k },
            _ => Source::Ranker { model: s, k: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub fact: FactId,
    pub sources: BTreeSet<Source>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortlist {
    #[serde(rename = "question")]
    pub question_id: QuestionId,
    pub facts: Vec<ShortlistEntry>,
}

impl Shortlist {
    pub fn fact_ids(&self) -> impl Iterator<Item = &str> {
        self.facts.iter().map(|e| e.fact.as_str())
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

fn is_synonymy(kb: &KnowledgeBase, fact: &str) -> bool {
    kb.fact(fact).is_some_and(|f| f.is_synonymy)
}

/// Union of each ranker's top `k` non-synonymy facts plus the gold facts.
///
/// Ranked facts are ordered by their best score over all rankers (ties by
/// fact id); gold facts no ranker surfaced follow in gold order. Synonymy
/// facts are dropped before the top-k cut and are never shortlisted, gold or
/// not.
pub fn build_shortlist(
    question: &Question,
    scores: &[ScoreFile],
    k: usize,
    kb: &KnowledgeBase,
) -> Result<Shortlist, ShortlistError> {
    if k == 0 {
        return Err(ShortlistError::ZeroK);
    }
    let mut best: HashMap<&str, f64> = HashMap::new();
    let mut sources: BTreeMap<&str, BTreeSet<Source>> = BTreeMap::new();
    for sf in scores {
        let ranked = sf.question(&question.id).ok_or_else(|| ShortlistError::MissingQuestion {
            model: sf.model_name.clone(),
            question: question.id.clone(),
        })?;
        for f in ranked.iter().filter(|f| !is_synonymy(kb, &f.fact)).take(k) {
            let slot = best.entry(f.fact.as_str()).or_insert(f.score);
            if f.score > *slot {
                *slot = f.score;
            }
            sources.entry(f.fact.as_str()).or_default().insert(Source::Ranker {
                model: sf.model_name.clone(),
                k,
            });
        }
    }

    let mut ranked: Vec<(&str, f64)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut order: Vec<&str> = ranked.into_iter().map(|(f, _)| f).collect();

    for g in &question.gold_explanation {
        let fact = g.fact.as_str();
        if is_synonymy(kb, fact) {
            continue;
        }
        let entry = sources.entry(fact).or_default();
        if entry.is_empty() {
            order.push(fact);
        }
        entry.insert(Source::Gold);
    }

    let facts = order
        .into_iter()
        .map(|f| ShortlistEntry {
            fact: f.to_string(),
            sources: sources.remove(f).unwrap_or_default(),
        })
        .collect();
    Ok(Shortlist {
        question_id: question.id.clone(),
        facts,
    })
}

/// Shortlists for every question, in question order.
pub fn build_shortlists(
    questions: &[Question],
    scores: &[ScoreFile],
    k: usize,
    kb: &KnowledgeBase,
) -> Result<Vec<Shortlist>, ShortlistError> {
    use rayon::prelude::*;
    questions
        .par_iter()
        .map(|q| build_shortlist(q, scores, k, kb))
        .collect()
}
