//! Explanation-as-ranking evaluation: average precision and NDCG.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Question, QuestionId, ScoreFile};
use crate::ratings::{Grade, MergedRatings};

#[derive(Debug, Error, PartialEq)]
pub enum RankEvalError {
    #[error("score file {model:?} has no ranking for question {question:?}")]
    MissingQuestion { model: String, question: QuestionId },
    #[error("unknown gold setting {0:?} (expected wt2, tr1 or tr2)")]
    UnknownSetting(String),
    #[error("malformed rank report: {0}")]
    BadReport(String),
}

/// Which facts count as relevant for average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldSetting {
    /// The question's annotated gold explanation.
    Wt2,
    /// Every fact with merged grade >= 1.
    Tr1,
    /// Every fact with merged grade >= 2.
    Tr2,
}

impl GoldSetting {
    pub fn min_grade(self) -> Option<Grade> {
        match self {
            GoldSetting::Wt2 => None,
            GoldSetting::Tr1 => Some(Grade::EXTRA_DETAIL),
            GoldSetting::Tr2 => Some(Grade::IMPORTANT),
        }
    }

    /// Relevant fact ids of `question` under this setting.
    pub fn gold<'a>(self, question: &'a Question, merged: &'a MergedRatings) -> HashSet<&'a str> {
        match self.min_grade() {
            None => question.gold_explanation.iter().map(|g| g.fact.as_str()).collect(),
            Some(min) => merged
                .for_question(&question.id)
                .filter(|m| m.tr >= min)
                .map(|m| m.fact_id.as_str())
                .collect(),
        }
    }
}

impl FromStr for GoldSetting {
    type Err = RankEvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wt2" => Ok(GoldSetting::Wt2),
            "tr1" => Ok(GoldSetting::Tr1),
            "tr2" => Ok(GoldSetting::Tr2),
            _ => Err(RankEvalError::UnknownSetting(s.to_string())),
        }
    }
}

impl fmt::Display for GoldSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoldSetting::Wt2 => "wt2",
            GoldSetting::Tr1 => "tr1",
            GoldSetting::Tr2 => "tr2",
        })
    }
}

/// Average precision; `None` when `gold` is empty.
///
/// Gold facts missing from the ranking contribute zero, the denominator is
/// always `|gold|`.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], gold: &HashSet<&str>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, fact) in ranking.iter().enumerate() {
        if gold.contains(fact.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
            if hits == gold.len() {
                break;
            }
        }
    }
    Some(sum / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `2^grade - 1`
    #[default]
    Exponential,
    /// `grade`
    Linear,
}

impl Gain {
    pub fn of(self, grade: Grade) -> f64 {
        match self {
            Gain::Exponential => ((1u32 << grade.value()) - 1) as f64,
            Gain::Linear => grade.value() as f64,
        }
    }
}

impl std::str::FromStr for Gain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" => Ok(Gain::Exponential),
            "linear" => Ok(Gain::Linear),
            _ => Err(format!("unknown gain {s:?} (expected exponential or linear)")),
        }
    }
}

fn discount(rank: usize) -> f64 {
    // rank is 1-based
    ((rank + 1) as f64).log2()
}

/// NDCG of `ranking` against graded facts; `None` when no fact has a
/// positive grade. Without a cutoff the whole ranking is scored; the ideal
/// ordering is cut at the same depth.
pub fn ndcg<S: AsRef<str>>(
    ranking: &[S],
    grades: &HashMap<&str, Grade>,
    cutoff: Option<usize>,
    gain: Gain,
) -> Option<f64> {
    let mut ideal: Vec<Grade> = grades.values().copied().filter(|g| g.value() > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let depth = cutoff.unwrap_or(ranking.len().max(ideal.len()));
    let dcg: f64 = ranking
        .iter()
        .take(depth)
        .enumerate()
        .map(|(i, f)| {
            let g = grades.get(f.as_ref()).copied().unwrap_or(Grade::IRRELEVANT);
            gain.of(g) / discount(i + 1)
        })
        .sum();
    let idcg: f64 = ideal
        .iter()
        .take(depth)
        .enumerate()
        .map(|(i, &g)| gain.of(g) / discount(i + 1))
        .sum();
    if idcg == 0.0 {
        // cutoff 0
        return None;
    }
    Some(dcg / idcg)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankOptions {
    pub cutoff: Option<usize>,
    pub gain: Gain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestionRank {
    pub ap: Option<f64>,
    pub ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub model_name: String,
    pub setting: GoldSetting,
    pub per_question: BTreeMap<QuestionId, QuestionRank>,
    pub map_score: f64,
    pub ndcg_score: f64,
    /// Questions left out of MAP because the setting gave them no gold.
    pub ap_skipped: usize,
    /// Questions left out of NDCG because every grade was zero.
    pub ndcg_skipped: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate_ranking(
    scores: &ScoreFile,
    questions: &[Question],
    merged: &MergedRatings,
    setting: GoldSetting,
    options: RankOptions,
) -> Result<RankReport, RankEvalError> {
    let per_question: Vec<(QuestionId, QuestionRank)> = questions
        .par_iter()
        .map(|q| {
            let ranked = scores.question(&q.id).ok_or_else(|| RankEvalError::MissingQuestion {
                model: scores.model_name.clone(),
                question: q.id.clone(),
            })?;
            let ranking: Vec<&str> = ranked.iter().map(|f| f.fact.as_str()).collect();
            let gold = setting.gold(q, merged);
            let ap = average_precision(&ranking, &gold);
            if ap.is_none() {
                log::warn!("question {}: no gold facts under {setting}, skipped for MAP", q.id);
            }
            let grades: HashMap<&str, Grade> = merged
                .for_question(&q.id)
                .map(|m| (m.fact_id.as_str(), m.tr))
                .collect();
            let ndcg = ndcg(&ranking, &grades, options.cutoff, options.gain);
            Ok((q.id.clone(), QuestionRank { ap, ndcg }))
        })
        .collect::<Result<_, RankEvalError>>()?;
    let per_question: BTreeMap<_, _> = per_question.into_iter().collect();
    let map_score = mean(per_question.values().filter_map(|r| r.ap));
    let ndcg_score = mean(per_question.values().filter_map(|r| r.ndcg));
    let ap_skipped = per_question.values().filter(|r| r.ap.is_none()).count();
    let ndcg_skipped = per_question.values().filter(|r| r.ndcg.is_none()).count();
    Ok(RankReport {
        model_name: scores.model_name.clone(),
        setting,
        per_question,
        map_score,
        ndcg_score,
        ap_skipped,
        ndcg_skipped,
    })
}

/// Difference of a report's means against a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankDelta {
    pub map: f64,
    pub ndcg: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl RankReport {
    pub fn delta(&self, baseline: &RankSummary) -> RankDelta {
        RankDelta {
            map: self.map_score - baseline.map,
            ndcg: self.ndcg_score - baseline.ndcg,
        }
    }

    pub fn summary(&self) -> RankSummary {
        RankSummary {
            map: self.map_score,
            ndcg: self.ndcg_score,
        }
    }

    /// Per-question rows followed by an `ALL` row with the means.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# model={} setting={}\nquestion\tap\tndcg\n", self.model_name, self.setting);
        for (q, r) in &self.per_question {
            out.push_str(&format!("{q}\t{}\t{}\n", fmt_opt(r.ap), fmt_opt(r.ndcg)));
        }
        out.push_str(&format!("ALL\t{:.6}\t{:.6}\n", self.map_score, self.ndcg_score));
        out
    }

    pub fn summary_text(&self, baseline: Option<&RankSummary>) -> String {
        let mut out = format!(
            "model {}  setting {}\n  MAP  {:.4}  ({} questions, {} skipped)\n  NDCG {:.4}  ({} skipped)\n",
            self.model_name,
            self.setting,
            self.map_score,
            self.per_question.len() - self.ap_skipped,
            self.ap_skipped,
            self.ndcg_score,
            self.ndcg_skipped,
        );
        if let Some(b) = baseline {
            let d = self.delta(b);
            out.push_str(&format!("  delta vs baseline: MAP {:+.4}  NDCG {:+.4}\n", d.map, d.ndcg));
        }
        out
    }
}

/// The means of a rank report, as read back from its TSV form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSummary {
    pub map: f64,
    pub ndcg: f64,
}

impl RankSummary {
    pub fn parse_tsv(text: &str) -> Result<Self, RankEvalError> {
        let line = text
            .lines()
            .find(|l| l.starts_with("ALL\t"))
            .ok_or_else(|| RankEvalError::BadReport("no ALL row".into()))?;
        let cols: Vec<&str> = line.split('\t').collect();
        let num = |i: usize| -> Result<f64, RankEvalError> {
            cols.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| RankEvalError::BadReport(format!("bad ALL row {line:?}")))
        };
        Ok(RankSummary { map: num(1)?, ndcg: num(2)? })
    }
}
