//! Annotation state derived from the judgement event log.
//!
//! The store owns the task list and every accepted event. Everything else
//! (rating exports, agreement, manual-vs-automatic comparisons) is computed
//! from the events on demand, so replaying the same log always yields the
//! same statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{FactId, KnowledgeBase, Question, QuestionId};
use crate::expl_eval::{self, Explanation, Overrides};
use crate::ratings::{self, AgreementSummary, Grade, KappaWeighting, MergedRatings, RatingRecord};
use crate::shortlist::Shortlist;

use super::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Relevance,
    Completeness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionPayload {
    pub id: QuestionId,
    pub stem: String,
    pub choices: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskItem {
    pub fact: FactId,
    pub text: String,
    /// Completeness tasks only: the fact has no merged rating and needs a
    /// binary relevance judgement.
    pub needs_judgement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub kind: TaskKind,
    pub question: QuestionPayload,
    /// Model whose explanation is judged (completeness tasks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub items: Vec<TaskItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_rater: Option<String>,
}

fn question_payload(q: &Question) -> QuestionPayload {
    QuestionPayload {
        id: q.id.clone(),
        stem: q.stem.clone(),
        choices: q.choices.clone(),
        answer: q.correct_answer().to_string(),
    }
}

fn fact_text(kb: &KnowledgeBase, id: &str) -> String {
    kb.fact(id).map(|f| f.text.clone()).unwrap_or_default()
}

/// A relevance task presenting the shortlist in order.
pub fn relevance_task(shortlist: &Shortlist, question: &Question, kb: &KnowledgeBase) -> AnnotationTask {
    AnnotationTask {
        task_id: format!("rel:{}", question.id),
        kind: TaskKind::Relevance,
        question: question_payload(question),
        model: None,
        items: shortlist
            .fact_ids()
            .map(|f| TaskItem {
                fact: f.to_string(),
                text: fact_text(kb, f),
                needs_judgement: false,
            })
            .collect(),
        assigned_rater: None,
    }
}

/// A completeness task; facts without a merged rating are flagged.
pub fn completeness_task(
    expl: &Explanation,
    question: &Question,
    kb: &KnowledgeBase,
    merged: &MergedRatings,
) -> AnnotationTask {
    AnnotationTask {
        task_id: format!("comp:{}:{}", expl.model_name, question.id),
        kind: TaskKind::Completeness,
        question: question_payload(question),
        model: Some(expl.model_name.clone()),
        items: expl
            .facts
            .iter()
            .map(|f| TaskItem {
                fact: f.fact.clone(),
                text: fact_text(kb, &f.fact),
                needs_judgement: !merged.is_rated(&question.id, &f.fact),
            })
            .collect(),
        assigned_rater: None,
    }
}

/// A validated judgement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    Relevance {
        ratings: BTreeMap<FactId, Grade>,
    },
    Completeness {
        complete: bool,
        #[serde(default)]
        fact_relevance: BTreeMap<FactId, bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgementEvent {
    pub seq: u64,
    pub task_id: String,
    pub rater_id: String,
    pub payload: Payload,
    pub timestamp: DateTime<Utc>,
}

/// A binary value that arrives as `true`/`false` or `0`/`1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawBinary {
    Bool(bool),
    Int(i64),
}

impl RawBinary {
    fn to_bool(self, field: &str) -> Result<bool, ServiceError> {
        match self {
            RawBinary::Bool(b) => Ok(b),
            RawBinary::Int(0) => Ok(false),
            RawBinary::Int(1) => Ok(true),
            RawBinary::Int(v) => Err(ServiceError::Invalid {
                field: field.to_string(),
                message: format!("{v} is not a binary value"),
            }),
        }
    }
}

/// Payload as submitted by a client, before range checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RawPayload {
    Relevance {
        ratings: BTreeMap<FactId, i64>,
    },
    Completeness {
        complete: RawBinary,
        #[serde(default)]
        fact_relevance: BTreeMap<FactId, RawBinary>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub task_id: String,
    pub rater: String,
    pub payload: RawPayload,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Progress {
    pub tasks_total: usize,
    pub relevance_tasks: usize,
    pub completeness_tasks: usize,
    /// Tasks with at least `coverage` distinct raters.
    pub tasks_covered: usize,
    pub coverage_target: usize,
    /// Current (non-superseded) submissions.
    pub submissions: usize,
    /// Every event in the log, superseded ones included.
    pub events: usize,
    pub per_rater: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MetricTriple {
    pub relevance: f64,
    pub comp_b: f64,
    pub f1_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub model: String,
    pub questions: usize,
    pub judgements: usize,
    pub automatic: MetricTriple,
    pub automatic_completeness: f64,
    pub automatic_f1: f64,
    pub manual: MetricTriple,
    /// `manual - automatic`, per metric.
    pub delta: MetricTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryAgreement {
    pub rater_a: String,
    pub rater_b: String,
    pub items: usize,
    pub percent_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stats {
    pub progress: Progress,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementSummary>,
    pub completeness_agreement: Vec<BinaryAgreement>,
    pub fact_relevance_agreement: Vec<BinaryAgreement>,
    pub models: Vec<ModelComparison>,
}

/// Task list plus event history.
#[derive(Debug, Clone)]
pub struct AnnotationStore {
    tasks: Vec<AnnotationTask>,
    task_index: HashMap<String, usize>,
    raters: BTreeSet<String>,
    coverage: usize,
    questions: BTreeMap<QuestionId, Question>,
    base_records: Vec<RatingRecord>,
    events: Vec<JudgementEvent>,
    /// `(task, rater)` → index of the latest event.
    latest: BTreeMap<(String, String), usize>,
}

impl AnnotationStore {
    pub fn new(
        tasks: Vec<AnnotationTask>,
        raters: impl IntoIterator<Item = String>,
        coverage: usize,
        questions: &[Question],
        base_records: Vec<RatingRecord>,
    ) -> Self {
        let task_index = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        Self {
            tasks,
            task_index,
            raters: raters.into_iter().collect(),
            coverage: coverage.max(1),
            questions: questions.iter().map(|q| (q.id.clone(), q.clone())).collect(),
            base_records,
            events: Vec::new(),
            latest: BTreeMap::new(),
        }
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    pub fn events(&self) -> &[JudgementEvent] {
        &self.events
    }

    pub fn is_rater(&self, rater: &str) -> bool {
        self.raters.contains(rater)
    }

    fn raters_of(&self, task_id: &str) -> usize {
        self.latest.keys().filter(|(t, _)| t == task_id).count()
    }

    /// The least-covered task this rater has not done, earliest first;
    /// `None` once every pending task is done by the rater or fully covered.
    pub fn next_task(&self, rater: &str) -> Result<Option<AnnotationTask>, ServiceError> {
        if !self.is_rater(rater) {
            return Err(ServiceError::UnknownRater(rater.to_string()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (t, _) in self.latest.keys() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let pick = self
            .tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| !self.latest.contains_key(&(t.task_id.clone(), rater.to_string())))
            .map(|(i, t)| (counts.get(t.task_id.as_str()).copied().unwrap_or(0), i))
            .filter(|&(n, _)| n < self.coverage)
            .min();
        Ok(pick.map(|(_, i)| {
            let mut task = self.tasks[i].clone();
            task.assigned_rater = Some(rater.to_string());
            task
        }))
    }

    /// Range and shape checks against the task.
    pub fn validate(&self, sub: &Submission) -> Result<Payload, ServiceError> {
        if !self.is_rater(&sub.rater) {
            return Err(ServiceError::UnknownRater(sub.rater.clone()));
        }
        let task = self
            .task_index
            .get(&sub.task_id)
            .map(|&i| &self.tasks[i])
            .ok_or_else(|| ServiceError::UnknownTask(sub.task_id.clone()))?;
        let invalid = |field: String, message: String| ServiceError::Invalid { field, message };
        let item_ids: BTreeSet<&str> = task.items.iter().map(|i| i.fact.as_str()).collect();
        match (&sub.payload, task.kind) {
            (RawPayload::Relevance { ratings }, TaskKind::Relevance) => {
                let mut out = BTreeMap::new();
                for (fact, &value) in ratings {
                    let field = format!("ratings.{fact}");
                    if !item_ids.contains(fact.as_str()) {
                        return Err(invalid(field, "fact is not part of this task".into()));
                    }
                    let grade = Grade::new(value).map_err(|e| invalid(field, e.to_string()))?;
                    out.insert(fact.clone(), grade);
                }
                if let Some(missing) = item_ids.iter().find(|f| !out.contains_key(**f)) {
                    return Err(invalid(format!("ratings.{missing}"), "missing rating".into()));
                }
                Ok(Payload::Relevance { ratings: out })
            }
            (RawPayload::Completeness { complete, fact_relevance }, TaskKind::Completeness) => {
                let complete = complete.to_bool("complete")?;
                let mut rel = BTreeMap::new();
                for (fact, &v) in fact_relevance {
                    let field = format!("fact_relevance.{fact}");
                    if !item_ids.contains(fact.as_str()) {
                        return Err(invalid(field, "fact is not part of this task".into()));
                    }
                    rel.insert(fact.clone(), v.to_bool(&field)?);
                }
                if let Some(missing) = task
                    .items
                    .iter()
                    .find(|i| i.needs_judgement && !rel.contains_key(&i.fact))
                {
                    return Err(invalid(
                        format!("fact_relevance.{}", missing.fact),
                        "unrated fact needs a binary relevance judgement".into(),
                    ));
                }
                Ok(Payload::Completeness {
                    complete,
                    fact_relevance: rel,
                })
            }
            (_, kind) => Err(invalid("payload.kind".into(), format!("task {} expects a {kind:?} payload", task.task_id))),
        }
    }

    /// Appends an already-validated event. A later event for the same
    /// `(task, rater)` supersedes earlier ones; all stay in the history.
    pub fn apply(&mut self, event: JudgementEvent) {
        let key = (event.task_id.clone(), event.rater_id.clone());
        self.events.push(event);
        self.latest.insert(key, self.events.len() - 1);
    }

    pub fn next_seq(&self) -> u64 {
        self.events.last().map_or(1, |e| e.seq + 1)
    }

    fn current(&self) -> impl Iterator<Item = &JudgementEvent> {
        self.latest.values().map(|&i| &self.events[i])
    }

    fn task(&self, id: &str) -> Option<&AnnotationTask> {
        self.task_index.get(id).map(|&i| &self.tasks[i])
    }

    /// Ratings collected through the service (latest submission per rater).
    pub fn export_ratings(&self) -> Vec<RatingRecord> {
        let mut out = Vec::new();
        for e in self.current() {
            let (Payload::Relevance { ratings }, Some(task)) = (&e.payload, self.task(&e.task_id)) else {
                continue;
            };
            for (fact, &grade) in ratings {
                out.push(RatingRecord {
                    question_id: task.question.id.clone(),
                    fact_id: fact.clone(),
                    rater_id: e.rater_id.clone(),
                    rating: grade,
                    timestamp: e.timestamp,
                });
            }
        }
        out.sort_by(|a, b| {
            (&a.question_id, &a.fact_id, &a.rater_id).cmp(&(&b.question_id, &b.fact_id, &b.rater_id))
        });
        out
    }

    /// Current judgements in `(task, rater)` order.
    pub fn export_judgements(&self) -> Vec<JudgementEvent> {
        self.current().cloned().collect()
    }

    /// Base ratings with service ratings replacing any base record from the
    /// same rater for the same `(question, fact)`.
    pub fn all_ratings(&self) -> Vec<RatingRecord> {
        let collected = self.export_ratings();
        let keys: BTreeSet<(&str, &str, &str)> = collected
            .iter()
            .map(|r| (r.question_id.as_str(), r.fact_id.as_str(), r.rater_id.as_str()))
            .collect();
        let mut out: Vec<RatingRecord> = self
            .base_records
            .iter()
            .filter(|r| !keys.contains(&(r.question_id.as_str(), r.fact_id.as_str(), r.rater_id.as_str())))
            .cloned()
            .collect();
        out.extend(collected);
        out
    }

    pub fn merged(&self) -> MergedRatings {
        ratings::merge_ratings(&self.all_ratings()).expect("keys deduplicated in all_ratings")
    }

    /// Manual judgements as overrides for explanation scoring. When raters
    /// disagree, the most recently submitted judgement wins.
    pub fn export_overrides(&self) -> Overrides {
        let mut events: Vec<&JudgementEvent> = self.current().collect();
        events.sort_by_key(|e| e.seq);
        let mut out = Overrides::default();
        for e in events {
            let (Payload::Completeness { complete, fact_relevance }, Some(task)) = (&e.payload, self.task(&e.task_id)) else {
                continue;
            };
            let q = &task.question.id;
            for (fact, &rel) in fact_relevance {
                out.relevance.insert((q.clone(), fact.clone()), rel);
            }
            if let Some(model) = &task.model {
                out.completeness.insert((model.clone(), q.clone()), *complete);
            }
        }
        out
    }

    fn progress(&self) -> Progress {
        let mut per_rater: BTreeMap<String, usize> = self.raters.iter().map(|r| (r.clone(), 0)).collect();
        for (_, rater) in self.latest.keys() {
            *per_rater.entry(rater.clone()).or_default() += 1;
        }
        Progress {
            tasks_total: self.tasks.len(),
            relevance_tasks: self.tasks.iter().filter(|t| t.kind == TaskKind::Relevance).count(),
            completeness_tasks: self.tasks.iter().filter(|t| t.kind == TaskKind::Completeness).count(),
            tasks_covered: self.tasks.iter().filter(|t| self.raters_of(&t.task_id) >= self.coverage).count(),
            coverage_target: self.coverage,
            submissions: self.latest.len(),
            events: self.events.len(),
            per_rater,
        }
    }

    fn binary_agreement(
        &self,
        items: impl Fn(&JudgementEvent, &AnnotationTask) -> Vec<(String, bool)>,
    ) -> Vec<BinaryAgreement> {
        let mut by_rater: BTreeMap<&str, BTreeMap<String, bool>> = BTreeMap::new();
        for e in self.current() {
            if let Some(task) = self.task(&e.task_id) {
                by_rater.entry(e.rater_id.as_str()).or_default().extend(items(e, task));
            }
        }
        let raters: Vec<&str> = by_rater.keys().copied().collect();
        let mut out = Vec::new();
        for (i, a) in raters.iter().enumerate() {
            for b in &raters[i + 1..] {
                let (ma, mb) = (&by_rater[a], &by_rater[b]);
                let shared: Vec<bool> = ma.iter().filter_map(|(k, va)| mb.get(k).map(|vb| va == vb)).collect();
                if shared.is_empty() {
                    continue;
                }
                out.push(BinaryAgreement {
                    rater_a: a.to_string(),
                    rater_b: b.to_string(),
                    items: shared.len(),
                    percent_agreement: shared.iter().filter(|&&x| x).count() as f64 / shared.len() as f64,
                });
            }
        }
        out
    }

    fn model_comparisons(&self, merged: &MergedRatings) -> Vec<ModelComparison> {
        // (model, question) → explanation and per-rater judgements
        let mut groups: BTreeMap<(String, QuestionId), (Explanation, Vec<&JudgementEvent>)> = BTreeMap::new();
        for e in self.current() {
            let Some(task) = self.task(&e.task_id) else { continue };
            let (Payload::Completeness { .. }, Some(model)) = (&e.payload, &task.model) else {
                continue;
            };
            let entry = groups.entry((model.clone(), task.question.id.clone())).or_insert_with(|| {
                let mut expl = Explanation::new(&task.question.id, model);
                for item in &task.items {
                    expl.push(expl_eval::ExplanationFact {
                        fact: item.fact.clone(),
                        score: None,
                        source: model.clone(),
                    });
                }
                (expl, Vec::new())
            });
            entry.1.push(e);
        }

        let mut per_model: BTreeMap<String, Vec<(Explanation, Vec<&JudgementEvent>)>> = BTreeMap::new();
        for ((model, _), v) in groups {
            per_model.entry(model).or_default().push(v);
        }

        let none = Overrides::default();
        let mut out = Vec::new();
        for (model, items) in per_model {
            let mut auto_rows = Vec::new();
            let mut manual_rel = Vec::new();
            let mut manual_comp = Vec::new();
            for (expl, judgements) in &items {
                let Some(question) = self.questions.get(&expl.question_id) else { continue };
                if let Some(s) = expl_eval::score_explanation(expl, question, merged, &none) {
                    auto_rows.push(s);
                }
                for j in judgements {
                    let Payload::Completeness { complete, fact_relevance } = &j.payload else { continue };
                    let mut o = Overrides::default();
                    for (f, &r) in fact_relevance {
                        o.relevance.insert((expl.question_id.clone(), f.clone()), r);
                    }
                    manual_rel.push(expl_eval::relevance(expl, merged, &o));
                    manual_comp.push(if *complete { 1.0 } else { 0.0 });
                }
            }
            let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            let a_rel = mean(&auto_rows.iter().map(|r| r.relevance).collect::<Vec<_>>());
            let a_comp = mean(&auto_rows.iter().map(|r| r.completeness).collect::<Vec<_>>());
            let a_cb = mean(&auto_rows.iter().map(|r| r.comp_b).collect::<Vec<_>>());
            let automatic = MetricTriple {
                relevance: a_rel,
                comp_b: a_cb,
                f1_b: expl_eval::f1_ex(a_rel, a_cb),
            };
            let m_rel = mean(&manual_rel);
            let m_cb = mean(&manual_comp);
            let manual = MetricTriple {
                relevance: m_rel,
                comp_b: m_cb,
                f1_b: expl_eval::f1_ex(m_rel, m_cb),
            };
            out.push(ModelComparison {
                model,
                questions: auto_rows.len(),
                judgements: manual_comp.len(),
                automatic,
                automatic_completeness: a_comp,
                automatic_f1: expl_eval::f1_ex(a_rel, a_comp),
                manual,
                delta: MetricTriple {
                    relevance: manual.relevance - automatic.relevance,
                    comp_b: manual.comp_b - automatic.comp_b,
                    f1_b: manual.f1_b - automatic.f1_b,
                },
            });
        }
        out
    }

    /// Progress, agreement and manual-vs-automatic comparison. Model
    /// aggregates take F1 of the means.
    pub fn stats(&self) -> Stats {
        let collected = self.export_ratings();
        let summary = ratings::agreement_summary(&collected, KappaWeighting::Unweighted);
        let agreement = (!summary.pairs.is_empty()).then_some(summary);
        let completeness_agreement = self.binary_agreement(|e, t| match &e.payload {
            Payload::Completeness { complete, .. } => {
                vec![(format!("{}|{}", t.model.as_deref().unwrap_or(""), t.question.id), *complete)]
            }
            _ => Vec::new(),
        });
        let fact_relevance_agreement = self.binary_agreement(|e, t| match &e.payload {
            Payload::Completeness { fact_relevance, .. } => fact_relevance
                .iter()
                .map(|(f, &r)| (format!("{}|{f}", t.question.id), r))
                .collect(),
            _ => Vec::new(),
        });
        Stats {
            progress: self.progress(),
            agreement,
            completeness_agreement,
            fact_relevance_agreement,
            models: self.model_comparisons(&self.merged()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusConfig, GoldFact, KnowledgeBaseBuilder, RowLocation, Split};
    use crate::shortlist::{ShortlistEntry, Source};

    fn kb() -> KnowledgeBase {
        let mut b = KnowledgeBaseBuilder::new(CorpusConfig::default());
        b.add_table("T", vec!["A".into()]).unwrap();
        for i in 1..=8 {
            let loc = RowLocation { table: "T".into(), line: i + 1 };
            b.add_row("T", &format!("f{i}"), vec![format!("fact {i}")], loc).unwrap();
        }
        b.build()
    }

    fn question(id: &str) -> Question {
        Question {
            id: id.into(),
            stem: "why?".into(),
            choices: vec!["a".into(), "b".into()],
            correct_choice: 1,
            gold_explanation: vec![GoldFact { fact: "f1".into(), role: "CENTRAL".into() }],
            split: Split::Test,
        }
    }

    fn shortlist(q: &str, n: usize) -> Shortlist {
        Shortlist {
            question_id: q.into(),
            facts: (1..=n)
                .map(|i| ShortlistEntry { fact: format!("f{i}"), sources: [Source::Gold].into() })
                .collect(),
        }
    }

    fn store(n_tasks: usize) -> AnnotationStore {
        let kb = kb();
        let qs: Vec<Question> = (1..=n_tasks).map(|i| question(&format!("Q{i}"))).collect();
        let tasks = qs.iter().map(|q| relevance_task(&shortlist(&q.id, 8), q, &kb)).collect();
        AnnotationStore::new(tasks, ["r1".to_string(), "r2".to_string()], 2, &qs, Vec::new())
    }

    fn submit(s: &mut AnnotationStore, task: &str, rater: &str, grade: i64) -> Result<(), ServiceError> {
        let sub = Submission {
            task_id: task.into(),
            rater: rater.into(),
            payload: RawPayload::Relevance { ratings: (1..=8).map(|i| (format!("f{i}"), grade)).collect() },
        };
        let payload = s.validate(&sub)?;
        let seq = s.next_seq();
        s.apply(JudgementEvent {
            seq,
            task_id: task.into(),
            rater_id: rater.into(),
            payload,
            timestamp: Utc::now(),
        });
        Ok(())
    }

    #[test]
    fn assignment_order_and_exhaustion() {
        let mut s = store(5);
        assert_eq!(s.next_task("r1").unwrap().unwrap().task_id, "rel:Q1");
        assert!(matches!(s.next_task("zz"), Err(ServiceError::UnknownRater(_))));
        for i in 1..=5 {
            submit(&mut s, &format!("rel:Q{i}"), "r1", 1).unwrap();
        }
        assert_eq!(s.next_task("r1").unwrap(), None);
        // the other rater still gets every task
        assert_eq!(s.next_task("r2").unwrap().unwrap().task_id, "rel:Q1");
    }

    #[test]
    fn least_covered_first() {
        let mut s = store(2);
        submit(&mut s, "rel:Q1", "r1", 1).unwrap();
        // r2 has done nothing; Q2 has fewer raters than Q1
        assert_eq!(s.next_task("r2").unwrap().unwrap().task_id, "rel:Q2");
    }

    #[test]
    fn export_and_supersede() {
        let mut s = store(1);
        submit(&mut s, "rel:Q1", "r1", 1).unwrap();
        assert_eq!(s.export_ratings().len(), 8);
        submit(&mut s, "rel:Q1", "r1", 3).unwrap();
        let out = s.export_ratings();
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|r| r.rating == Grade::CORE));
        assert_eq!(s.events().len(), 2);
        assert_eq!(s.stats().progress.submissions, 1);
    }

    #[test]
    fn validation_names_the_field() {
        let mut s = store(1);
        match submit(&mut s, "rel:Q1", "r1", 5) {
            Err(ServiceError::Invalid { field, .. }) => assert_eq!(field, "ratings.f1"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(submit(&mut s, "rel:Q9", "r1", 1), Err(ServiceError::UnknownTask(_))));
        let partial = Submission {
            task_id: "rel:Q1".into(),
            rater: "r1".into(),
            payload: RawPayload::Relevance { ratings: [("f1".to_string(), 2)].into() },
        };
        assert!(matches!(s.validate(&partial), Err(ServiceError::Invalid { field, .. }) if field == "ratings.f2"));
    }

    #[test]
    fn agreement_omitted_until_co_rated() {
        let mut s = store(1);
        assert!(s.stats().agreement.is_none());
        submit(&mut s, "rel:Q1", "r1", 1).unwrap();
        assert!(s.stats().agreement.is_none());
        submit(&mut s, "rel:Q1", "r2", 1).unwrap();
        let a = s.stats().agreement.unwrap();
        assert_eq!(a.pairs[0].percent_agreement, 1.0);
    }

    #[test]
    fn completeness_flags_unrated_facts() {
        let kb = kb();
        let q = question("Q1");
        let mut expl = Explanation::new("Q1", "m");
        for f in ["f1", "f2"] {
            expl.push(expl_eval::ExplanationFact { fact: f.into(), score: None, source: "m".into() });
        }
        let merged: MergedRatings = [ratings::MergedRating {
            question_id: "Q1".into(),
            fact_id: "f1".into(),
            tr: Grade::CORE,
            rater_count: 2,
        }]
        .into_iter()
        .collect();
        let t = completeness_task(&expl, &q, &kb, &merged);
        let flags: Vec<bool> = t.items.iter().map(|i| i.needs_judgement).collect();
        assert_eq!(flags, [false, true]);
        assert_eq!(t.task_id, "comp:m:Q1");
    }
}
