//! Whole-explanation construction and scoring.
//!
//! An explanation is a discrete set of facts. It is scored for relevance
//! (share of its facts rated at least "extra detail"), completeness (share
//! of the gold explanation it recovers), binary completeness over the gold
//! facts rated at least "important", and the F1 combinations of these.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FactId, Question, QuestionId, ScoreFile};
use crate::ratings::{Grade, MergedRatings};

#[derive(Debug, Error, PartialEq)]
pub enum ExplEvalError {
    #[error("score file {model:?} has no entry for question {question:?}")]
    MissingQuestion { model: String, question: QuestionId },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("explanation for unknown question {0:?}")]
    UnknownQuestion(QuestionId),
    #[error("model {model:?} has two explanations for question {question:?}")]
    DuplicateExplanation { model: String, question: QuestionId },
    #[error("cannot ensemble explanations of different questions ({0:?} vs {1:?})")]
    MixedQuestions(QuestionId, QuestionId),
    #[error("ensemble of zero explanations")]
    EmptyEnsemble,
    #[error("unknown aggregation {0:?} (expected per-question or corpus)")]
    UnknownAggregation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationFact {
    pub fact: FactId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    #[serde(rename = "question")]
    pub question_id: QuestionId,
    #[serde(rename = "model")]
    pub model_name: String,
    pub facts: Vec<ExplanationFact>,
}

impl Explanation {
    pub fn new(question_id: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            model_name: model_name.into(),
            facts: Vec::new(),
        }
    }

    /// Appends a fact unless it is already present. Returns whether it was added.
    pub fn push(&mut self, fact: ExplanationFact) -> bool {
        if self.facts.iter().any(|f| f.fact == fact.fact) {
            return false;
        }
        self.facts.push(fact);
        true
    }

    pub fn fact_ids(&self) -> HashSet<&str> {
        self.facts.iter().map(|f| f.fact.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// The first `k` facts of a question's ranking.
pub fn topk_explanation(scores: &ScoreFile, question_id: &str, k: usize) -> Result<Explanation, ExplEvalError> {
    if k == 0 {
        return Err(ExplEvalError::ZeroK);
    }
    let ranked = scores.question(question_id).ok_or_else(|| ExplEvalError::MissingQuestion {
        model: scores.model_name.clone(),
        question: question_id.to_string(),
    })?;
    if ranked.len() < k {
        log::warn!(
            "{}: question {question_id} has {} scored facts, fewer than k={k}",
            scores.model_name,
            ranked.len()
        );
    }
    let mut expl = Explanation::new(question_id, &scores.model_name);
    for f in ranked.iter().take(k) {
        expl.push(ExplanationFact {
            fact: f.fact.clone(),
            score: Some(f.score),
            source: scores.model_name.clone(),
        });
    }
    Ok(expl)
}

/// Manual judgements that take precedence over automatic values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Binary relevance per `(question, fact)`.
    pub relevance: BTreeMap<(QuestionId, FactId), bool>,
    /// Binary completeness per `(model, question)`.
    pub completeness: BTreeMap<(String, QuestionId), bool>,
}

/// One line of an overrides JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverrideRecord {
    Relevance {
        question: QuestionId,
        fact: FactId,
        relevant: bool,
    },
    Completeness {
        question: QuestionId,
        model: String,
        complete: bool,
    },
}

impl Overrides {
    pub fn from_records(records: impl IntoIterator<Item = OverrideRecord>) -> Self {
        let mut out = Overrides::default();
        for r in records {
            match r {
                OverrideRecord::Relevance { question, fact, relevant } => {
                    out.relevance.insert((question, fact), relevant);
                }
                OverrideRecord::Completeness { question, model, complete } => {
                    out.completeness.insert((model, question), complete);
                }
            }
        }
        out
    }

    pub fn to_records(&self) -> Vec<OverrideRecord> {
        let rel = self.relevance.iter().map(|((q, f), &r)| OverrideRecord::Relevance {
            question: q.clone(),
            fact: f.clone(),
            relevant: r,
        });
        let comp = self.completeness.iter().map(|((m, q), &c)| OverrideRecord::Completeness {
            question: q.clone(),
            model: m.clone(),
            complete: c,
        });
        rel.chain(comp).collect()
    }

    pub fn relevance_of(&self, question: &str, fact: &str) -> Option<bool> {
        self.relevance.get(&(question.to_string(), fact.to_string())).copied()
    }

    pub fn completeness_of(&self, model: &str, question: &str) -> Option<bool> {
        self.completeness.get(&(model.to_string(), question.to_string())).copied()
    }
}

/// Share of facts with grade >= 1, manual overrides first, unrated facts
/// counting as irrelevant. An empty explanation scores 0.
pub fn relevance(expl: &Explanation, merged: &MergedRatings, overrides: &Overrides) -> f64 {
    if expl.is_empty() {
        return 0.0;
    }
    let q = &expl.question_id;
    let relevant = expl
        .facts
        .iter()
        .filter(|f| {
            overrides
                .relevance_of(q, &f.fact)
                .unwrap_or_else(|| merged.tr_or_zero(q, &f.fact) >= Grade::EXTRA_DETAIL)
        })
        .count();
    relevant as f64 / expl.len() as f64
}

/// `|gold ∩ expl| / |gold|`; `None` for empty gold.
pub fn completeness(expl: &Explanation, gold: &HashSet<&str>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let facts = expl.fact_ids();
    let found = gold.iter().filter(|g| facts.contains(*g)).count();
    Some(found as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompB {
    pub complete: bool,
    /// No gold fact reached grade 2, so `complete` holds trivially.
    pub vacuous: bool,
}

/// Whether every gold fact rated >= 2 appears in the explanation.
pub fn comp_b(expl: &Explanation, gold: &HashSet<&str>, merged: &MergedRatings) -> CompB {
    let facts = expl.fact_ids();
    let important: Vec<&str> = gold
        .iter()
        .copied()
        .filter(|g| merged.tr_or_zero(&expl.question_id, g) >= Grade::IMPORTANT)
        .collect();
    CompB {
        complete: important.iter().all(|g| facts.contains(g)),
        vacuous: important.is_empty(),
    }
}

/// Harmonic mean of relevance and completeness; 0 when both are 0.
pub fn f1_ex(rel: f64, comp: f64) -> f64 {
    if rel + comp == 0.0 {
        0.0
    } else {
        2.0 * rel * comp / (rel + comp)
    }
}

/// How F1 columns are aggregated over questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean of per-question F1.
    #[default]
    PerQuestion,
    /// F1 of mean relevance and mean completeness.
    Corpus,
}

impl FromStr for Aggregation {
    type Err = ExplEvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-question" => Ok(Aggregation::PerQuestion),
            "corpus" => Ok(Aggregation::Corpus),
            _ => Err(ExplEvalError::UnknownAggregation(s.to_string())),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::PerQuestion => "per-question",
            Aggregation::Corpus => "corpus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionScores {
    pub relevance: f64,
    pub completeness: f64,
    pub comp_b: f64,
    pub comp_b_vacuous: bool,
    pub f1: f64,
    pub f1_b: f64,
    pub length: usize,
    /// Manual binary completeness, when a judgement exists.
    pub manual_comp_b: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Aggregates {
    pub relevance: f64,
    pub completeness: f64,
    pub comp_b: f64,
    pub f1: f64,
    pub f1_b: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplReport {
    pub model_name: String,
    pub aggregation: Aggregation,
    pub per_question: BTreeMap<QuestionId, QuestionScores>,
    /// Aggregates under `aggregation`.
    pub aggregates: Aggregates,
    /// Aggregates under the other mode, kept for comparison.
    pub alternate: Aggregates,
    pub vacuous_comp_b: usize,
    /// Questions with empty gold, excluded from the means.
    pub skipped: usize,
    /// Mean manual binary completeness over judged questions.
    pub manual_comp_b: Option<f64>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn aggregate(rows: &[&QuestionScores], mode: Aggregation) -> Aggregates {
    let col = |f: fn(&QuestionScores) -> f64| -> Vec<f64> { rows.iter().map(|r| f(r)).collect() };
    let relevance = mean(&col(|r| r.relevance));
    let completeness = mean(&col(|r| r.completeness));
    let comp_b = mean(&col(|r| r.comp_b));
    let (f1, f1_b) = match mode {
        Aggregation::PerQuestion => (mean(&col(|r| r.f1)), mean(&col(|r| r.f1_b))),
        Aggregation::Corpus => (f1_ex(relevance, completeness), f1_ex(relevance, comp_b)),
    };
    Aggregates {
        relevance,
        completeness,
        comp_b,
        f1,
        f1_b,
        length: mean(&col(|r| r.length as f64)),
    }
}

/// Scores one explanation against its question.
pub fn score_explanation(
    expl: &Explanation,
    question: &Question,
    merged: &MergedRatings,
    overrides: &Overrides,
) -> Option<QuestionScores> {
    let gold: HashSet<&str> = question.gold_explanation.iter().map(|g| g.fact.as_str()).collect();
    let comp = completeness(expl, &gold)?;
    let rel = relevance(expl, merged, overrides);
    let cb = comp_b(expl, &gold, merged);
    let cbv = if cb.complete { 1.0 } else { 0.0 };
    Some(QuestionScores {
        relevance: rel,
        completeness: comp,
        comp_b: cbv,
        comp_b_vacuous: cb.vacuous,
        f1: f1_ex(rel, comp),
        f1_b: f1_ex(rel, cbv),
        length: expl.len(),
        manual_comp_b: overrides.completeness_of(&expl.model_name, &expl.question_id),
    })
}

/// Scores one model's explanations. Questions without an explanation are
/// not evaluated.
pub fn evaluate_explanations(
    expls: &[Explanation],
    questions: &[Question],
    merged: &MergedRatings,
    overrides: &Overrides,
    aggregation: Aggregation,
) -> Result<ExplReport, ExplEvalError> {
    let by_id: BTreeMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut per_question = BTreeMap::new();
    let mut skipped = 0;
    let mut model_name = String::new();
    for e in expls {
        let q = by_id
            .get(e.question_id.as_str())
            .ok_or_else(|| ExplEvalError::UnknownQuestion(e.question_id.clone()))?;
        if model_name.is_empty() {
            model_name = e.model_name.clone();
        }
        if per_question.contains_key(&e.question_id) {
            return Err(ExplEvalError::DuplicateExplanation {
                model: e.model_name.clone(),
                question: e.question_id.clone(),
            });
        }
        match score_explanation(e, q, merged, overrides) {
            Some(s) => {
                per_question.insert(e.question_id.clone(), s);
            }
            None => {
                log::warn!("question {}: empty gold explanation, skipped", e.question_id);
                skipped += 1;
            }
        }
    }
    let rows: Vec<&QuestionScores> = per_question.values().collect();
    let other = match aggregation {
        Aggregation::PerQuestion => Aggregation::Corpus,
        Aggregation::Corpus => Aggregation::PerQuestion,
    };
    let manual: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.manual_comp_b.map(|c| if c { 1.0 } else { 0.0 }))
        .collect();
    Ok(ExplReport {
        model_name,
        aggregation,
        aggregates: aggregate(&rows, aggregation),
        alternate: aggregate(&rows, other),
        vacuous_comp_b: rows.iter().filter(|r| r.comp_b_vacuous).count(),
        skipped,
        manual_comp_b: (!manual.is_empty()).then(|| mean(&manual)),
        per_question,
    })
}

impl ExplReport {
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# model={} aggregation={}\nquestion\trel\tcomp\tf1\tcomp_b\tf1_b\tlength\tvacuous\n",
            self.model_name, self.aggregation
        );
        for (q, s) in &self.per_question {
            out.push_str(&format!(
                "{q}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.6}\t{}\t{}\n",
                s.relevance, s.completeness, s.f1, s.comp_b, s.f1_b, s.length, s.comp_b_vacuous as u8
            ));
        }
        let a = &self.aggregates;
        out.push_str(&format!(
            "ALL\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{}\n",
            a.relevance, a.completeness, a.f1, a.comp_b, a.f1_b, a.length, self.vacuous_comp_b
        ));
        out
    }

    pub fn summary_row(&self) -> String {
        let a = &self.aggregates;
        format!(
            "{:<36} {:>5.2} {:>5.2} {:>5.2} {:>6.2} {:>6.2} {:>6.1}",
            self.model_name, a.relevance, a.completeness, a.f1, a.comp_b, a.f1_b, a.length
        )
    }

    pub fn summary_header() -> String {
        format!(
            "{:<36} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6}",
            "model", "Rel", "Comp", "F1ex", "CompB", "F1exB", "Len"
        )
    }
}

/// Union of explanations of one question in first-appearance order. A fact
/// found by several inputs keeps its first score and joins the source tags
/// with `+`.
pub fn ensemble(expls: &[Explanation]) -> Result<Explanation, ExplEvalError> {
    let first = expls.first().ok_or(ExplEvalError::EmptyEnsemble)?;
    if let Some(other) = expls.iter().find(|e| e.question_id != first.question_id) {
        return Err(ExplEvalError::MixedQuestions(
            first.question_id.clone(),
            other.question_id.clone(),
        ));
    }
    let model = expls.iter().map(|e| e.model_name.as_str()).collect::<Vec<_>>().join("+");
    let mut out = Explanation::new(&first.question_id, model);
    for e in expls {
        for f in &e.facts {
            match out.facts.iter_mut().find(|x| x.fact == f.fact) {
                Some(existing) => {
                    let tags: BTreeSet<&str> = existing.source.split('+').collect();
                    if !f.source.is_empty() && !tags.contains(f.source.as_str()) {
                        existing.source = format!("{}+{}", existing.source, f.source);
                    }
                }
                None => out.facts.push(f.clone()),
            }
        }
    }
    Ok(out)
}

/// Ensembles per question across several models' explanation lists.
pub fn ensemble_models(models: &[Vec<Explanation>]) -> Result<Vec<Explanation>, ExplEvalError> {
    let mut grouped: BTreeMap<&str, Vec<Explanation>> = BTreeMap::new();
    for list in models {
        for e in list {
            grouped.entry(e.question_id.as_str()).or_default().push(e.clone());
        }
    }
    grouped.values().map(|es| ensemble(es)).collect()
}
