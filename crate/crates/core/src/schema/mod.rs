//! Constraint-satisfaction schemas over knowledge-base tables.
//!
//! A schema is a list of slots. Each slot names a table and constrains some
//! of its columns, either to a literal token sequence or to a variable.
//! A solution binds every slot to one row of its table such that literal
//! constraints match and every occurrence of a variable sees the same
//! normalized cell. Variables never bind to empty cells.

mod cache;
mod dsl;
mod explain;
mod solver;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::FactId;

pub use cache::{cache_solutions, load_cache, SolutionCache};
pub use dsl::{parse_schema_file, parse_schemas};
pub use explain::{build_schema_explanation, score_solution, select_schemas, SchemaScoring, SelectedSchema};
pub use solver::{solve, solve_all};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: schema {name:?} defined twice")]
    DuplicateSchema { name: String, line: usize },
    #[error("schema {schema:?} slot {slot}: unknown table {table:?}")]
    UnknownTable {
        schema: String,
        slot: usize,
        table: String,
    },
    #[error("schema {schema:?} slot {slot}: table {table:?} has no column {column:?}")]
    UnknownColumn {
        schema: String,
        slot: usize,
        table: String,
        column: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stale solution cache: built for knowledge base {cached}, loaded one is {current}")]
    StaleCache { cached: String, current: String },
    #[error("solution cache line {line}: {message}")]
    CacheFormat { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// The cell must normalize to exactly these tokens.
    Literal(Vec<String>),
    /// The cell binds (or must equal) the named variable.
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub table: String,
    pub constraints: BTreeMap<String, Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub slots: Vec<Slot>,
}

impl Schema {
    /// Variable names in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for slot in &self.slots {
            for c in slot.constraints.values() {
                if let Constraint::Var(v) = c {
                    if !out.contains(&v.as_str()) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Variables that occur in more than one slot.
    pub fn shared_variables(&self) -> Vec<&str> {
        self.variables()
            .into_iter()
            .filter(|v| {
                self.slots
                    .iter()
                    .filter(|s| s.constraints.values().any(|c| matches!(c, Constraint::Var(x) if x == v)))
                    .count()
                    > 1
            })
            .collect()
    }

    /// Renders the schema in the `.schema` text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("schema {}\n", self.name);
        for slot in &self.slots {
            out.push_str("slot ");
            out.push_str(&slot.table);
            for (col, c) in &slot.constraints {
                match c {
                    Constraint::Literal(tokens) => out.push_str(&format!(" {col}=\"{}\"", tokens.join(" "))),
                    Constraint::Var(v) => out.push_str(&format!(" {col}=${v}")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// A consistent binding of every slot of a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSolution {
    pub schema_name: String,
    /// Fact bound to each slot, indexed by slot position.
    pub bindings: Vec<FactId>,
    pub var_assignments: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl SchemaSolution {
    /// Distinct bound facts in slot order.
    pub fn facts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::with_capacity(self.bindings.len());
        for f in &self.bindings {
            if !out.contains(&f.as_str()) {
                out.push(f);
            }
        }
        out
    }
}

/// Checks a solution directly against the schema and knowledge base.
pub fn verify_solution(schema: &Schema, kb: &crate::corpus::KnowledgeBase, sol: &SchemaSolution) -> bool {
    use crate::text::normalize;
    if sol.bindings.len() != schema.slots.len() {
        return false;
    }
    let mut seen: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (slot, fact_id) in schema.slots.iter().zip(&sol.bindings) {
        let Some(fact) = kb.fact(fact_id) else { return false };
        if fact.table != slot.table {
            return false;
        }
        for (col, c) in &slot.constraints {
            let cell = normalize(fact.cell(col).unwrap_or(""));
            match c {
                Constraint::Literal(tokens) => {
                    if &cell != tokens {
                        return false;
                    }
                }
                Constraint::Var(v) => {
                    if cell.is_empty() {
                        return false;
                    }
                    if let Some(prev) = seen.get(v.as_str()) {
                        if *prev != cell {
                            return false;
                        }
                    } else {
                        seen.insert(v, cell);
                    }
                }
            }
        }
    }
    seen.len() == sol.var_assignments.len()
        && seen.iter().all(|(v, cell)| sol.var_assignments.get(*v) == Some(cell))
}
