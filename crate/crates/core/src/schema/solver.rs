use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{Constraint, Schema, SchemaError, SchemaSolution};
use crate::corpus::{FactId, KnowledgeBase};
use crate::text::normalize;

/// A slot's rows with the cells of its constrained columns pre-normalized.
struct SlotRows<'kb> {
    table: &'kb str,
    /// Constrained columns in the slot's column order.
    columns: Vec<(&'kb str, &'kb Constraint)>,
    /// Row ids ascending.
    ids: Vec<&'kb FactId>,
    /// `cells[row][k]` is the normalized cell of `columns[k]`.
    cells: Vec<Vec<Vec<String>>>,
    position: HashMap<&'kb str, usize>,
}

fn prepare<'kb>(schema: &'kb Schema, kb: &'kb KnowledgeBase) -> Result<Vec<SlotRows<'kb>>, SchemaError> {
    schema
        .slots
        .iter()
        .enumerate()
        .map(|(i, slot)| {
            let rows = kb.table(&slot.table).ok_or_else(|| SchemaError::UnknownTable {
                schema: schema.name.clone(),
                slot: i,
                table: slot.table.clone(),
            })?;
            for column in slot.constraints.keys() {
                if !kb.has_column(&slot.table, column) {
                    return Err(SchemaError::UnknownColumn {
                        schema: schema.name.clone(),
                        slot: i,
                        table: slot.table.clone(),
                        column: column.clone(),
                    });
                }
            }
            let columns: Vec<(&str, &Constraint)> =
                slot.constraints.iter().map(|(c, k)| (c.as_str(), k)).collect();
            let mut ids: Vec<&FactId> = rows.iter().collect();
            ids.sort();
            let cells = ids
                .iter()
                .map(|id| {
                    let fact = kb.fact(id).expect("table rows resolve");
                    columns
                        .iter()
                        .map(|(c, _)| normalize(fact.cell(c).unwrap_or("")))
                        .collect()
                })
                .collect();
            let position = ids.iter().enumerate().map(|(p, id)| (id.as_str(), p)).collect();
            Ok(SlotRows {
                table: &slot.table,
                columns,
                ids,
                cells,
                position,
            })
        })
        .collect()
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

struct Search<'kb> {
    kb: &'kb KnowledgeBase,
    slots: Vec<SlotRows<'kb>>,
    bound: Vec<Option<usize>>,
    vars: HashMap<&'kb str, Vec<String>>,
    /// Follow declared slot order instead of most-constrained-first.
    static_order: bool,
    limit: Option<usize>,
    found: Vec<Vec<usize>>,
    assignments: Vec<BTreeMap<String, Vec<String>>>,
}

impl<'kb> Search<'kb> {
    /// Candidate row positions of a slot under the current bindings,
    /// ascending. `None` means every row.
    fn candidates(&self, slot: usize) -> Option<Vec<usize>> {
        let rows = &self.slots[slot];
        let mut acc: Option<Vec<usize>> = None;
        for (column, constraint) in &rows.columns {
            let tokens = match constraint {
                Constraint::Literal(t) => t,
                Constraint::Var(v) => match self.vars.get(v.as_str()) {
                    Some(t) => t,
                    None => continue,
                },
            };
            // index buckets are id-ascending, and so are slot positions
            let mut hits: Vec<usize> = self
                .kb
                .lookup(rows.table, column, tokens)
                .iter()
                .filter_map(|id| rows.position.get(id.as_str()).copied())
                .collect();
            hits.sort_unstable();
            acc = Some(match acc {
                None => hits,
                Some(prev) => intersect(&prev, &hits),
            });
            if acc.as_ref().is_some_and(Vec::is_empty) {
                break;
            }
        }
        acc
    }

    fn candidate_count(&self, slot: usize) -> usize {
        self.candidates(slot).map_or(self.slots[slot].ids.len(), |c| c.len())
    }

    fn next_slot(&self) -> Option<usize> {
        let unbound = (0..self.slots.len()).filter(|&s| self.bound[s].is_none());
        if self.static_order {
            return unbound.into_iter().next();
        }
        unbound.min_by_key(|&s| (self.candidate_count(s), s))
    }

    fn done(&self) -> bool {
        self.limit.is_some_and(|l| self.found.len() >= l)
    }

    fn run(&mut self) {
        if self.done() {
            return;
        }
        let Some(slot) = self.next_slot() else {
            self.found.push(self.bound.iter().map(|b| b.expect("all bound")).collect());
            let vars = self.vars.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            self.assignments.push(vars);
            return;
        };
        let rows: Vec<usize> = self
            .candidates(slot)
            .unwrap_or_else(|| (0..self.slots[slot].ids.len()).collect());
        for row in rows {
            if let Some(new_vars) = self.try_bind(slot, row) {
                self.bound[slot] = Some(row);
                self.run();
                self.bound[slot] = None;
                for v in new_vars {
                    self.vars.remove(v);
                }
                if self.done() {
                    return;
                }
            }
        }
    }

    /// Checks a row against the slot's constraints and binds its fresh
    /// variables. Returns the newly bound names, or `None` on conflict.
    fn try_bind(&mut self, slot: usize, row: usize) -> Option<Vec<&'kb str>> {
        let rows = &self.slots[slot];
        let mut fresh: Vec<(&'kb str, &Vec<String>)> = Vec::new();
        for (k, &(_, constraint)) in rows.columns.iter().enumerate() {
            let cell = &rows.cells[row][k];
            match constraint {
                Constraint::Literal(t) => {
                    if cell != t {
                        return None;
                    }
                }
                Constraint::Var(v) => {
                    if cell.is_empty() {
                        return None;
                    }
                    let existing = self
                        .vars
                        .get(v.as_str())
                        .or_else(|| fresh.iter().find(|(n, _)| *n == v.as_str()).map(|(_, t)| *t));
                    match existing {
                        Some(t) if t != cell => return None,
                        Some(_) => {}
                        None => fresh.push((v.as_str(), cell)),
                    }
                }
            }
        }
        let fresh: Vec<(&'kb str, Vec<String>)> = fresh.into_iter().map(|(n, t)| (n, t.clone())).collect();
        let names = fresh.iter().map(|(n, _)| *n).collect();
        self.vars.extend(fresh);
        Some(names)
    }
}

/// All solutions of `schema`, ordered as a nested loop over slots in
/// declared order with rows by ascending fact id would produce them.
///
/// Without a limit the search picks the most constrained slot first and
/// sorts at the end; with a limit it walks slots in declared order so the
/// first `limit` solutions are exactly that prefix.
pub fn solve(schema: &Schema, kb: &KnowledgeBase, limit: Option<usize>) -> Result<Vec<SchemaSolution>, SchemaError> {
    let slots = prepare(schema, kb)?;
    let n = slots.len();
    let mut search = Search {
        kb,
        slots,
        bound: vec![None; n],
        vars: HashMap::new(),
        static_order: limit.is_some(),
        limit,
        found: Vec::new(),
        assignments: Vec::new(),
    };
    if limit != Some(0) {
        search.run();
    }
    let slots = &search.slots;
    let mut solutions: Vec<SchemaSolution> = search
        .found
        .iter()
        .zip(search.assignments)
        .map(|(rows, vars)| SchemaSolution {
            schema_name: schema.name.clone(),
            bindings: rows.iter().enumerate().map(|(s, &r)| slots[s].ids[r].clone()).collect(),
            var_assignments: vars,
            score: None,
        })
        .collect();
    if limit.is_none() {
        solutions.sort_by(|a, b| a.bindings.cmp(&b.bindings));
    }
    Ok(solutions)
}

/// Solves every schema in parallel, keyed by schema name.
pub fn solve_all(
    schemas: &[Schema],
    kb: &KnowledgeBase,
) -> Result<BTreeMap<String, Vec<SchemaSolution>>, SchemaError> {
    schemas
        .par_iter()
        .map(|s| solve(s, kb, None).map(|sols| (s.name.clone(), sols)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusConfig, KnowledgeBaseBuilder, RowLocation};
    use crate::schema::{parse_schemas, verify_solution};

    fn kindof(rows: &[(&str, &str, &str)]) -> KnowledgeBase {
        let mut b = KnowledgeBaseBuilder::new(CorpusConfig::default());
        b.add_table("KINDOF", vec!["HYPONYM".into(), "REL".into(), "HYPERNYM".into()]).unwrap();
        for (i, (id, lo, hi)) in rows.iter().enumerate() {
            let loc = RowLocation { table: "KINDOF".into(), line: i as u64 + 2 };
            b.add_row("KINDOF", id, vec![(*lo).into(), "is a kind of".into(), (*hi).into()], loc).unwrap();
        }
        b.build()
    }

    #[test]
    fn kind_of_chain() {
        let kb = kindof(&[("k1", "water", "liquid"), ("k2", "liquid", "matter")]);
        let s = &parse_schemas("schema chain\nslot KINDOF HYPONYM=$a HYPERNYM=$b\nslot KINDOF HYPONYM=$b HYPERNYM=$c\n").unwrap()[0];
        let sols = solve(s, &kb, None).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].bindings, ["k1", "k2"]);
        let v = &sols[0].var_assignments;
        assert_eq!((v["a"].join(" "), v["b"].join(" "), v["c"].join(" ")), ("water".into(), "liquid".into(), "matter".into()));
        assert!(verify_solution(s, &kb, &sols[0]));
    }

    #[test]
    fn unsatisfiable_literal() {
        let kb = kindof(&[("k1", "water", "liquid")]);
        let s = &parse_schemas("schema x\nslot KINDOF HYPERNYM=\"gas\"\n").unwrap()[0];
        assert!(solve(s, &kb, None).unwrap().is_empty());
    }

    #[test]
    fn unconstrained_slot_enumerates_table() {
        let kb = kindof(&[("k3", "a", "b"), ("k1", "c", "d"), ("k2", "e", "f")]);
        let s = &parse_schemas("schema x\nslot KINDOF\n").unwrap()[0];
        let sols = solve(s, &kb, None).unwrap();
        assert_eq!(sols.iter().map(|s| s.bindings[0].as_str()).collect::<Vec<_>>(), ["k1", "k2", "k3"]);
    }

    #[test]
    fn limit_returns_ordered_prefix() {
        let kb = kindof(&[("k1", "a", "b"), ("k2", "b", "c"), ("k3", "c", "d"), ("k4", "x", "y")]);
        let s = &parse_schemas("schema x\nslot KINDOF\nslot KINDOF HYPONYM=$v\n").unwrap()[0];
        let all = solve(s, &kb, None).unwrap();
        assert_eq!(all.len(), 16);
        let some = solve(s, &kb, Some(5)).unwrap();
        assert_eq!(some, all[..5].to_vec());
        assert!(solve(s, &kb, Some(0)).unwrap().is_empty());
    }

    #[test]
    fn same_variable_twice_in_one_slot() {
        let kb = kindof(&[("k1", "a", "a"), ("k2", "a", "b")]);
        let s = &parse_schemas("schema x\nslot KINDOF HYPONYM=$v HYPERNYM=$v\n").unwrap()[0];
        let sols = solve(s, &kb, None).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].bindings, ["k1"]);
    }

    #[test]
    fn variables_skip_empty_cells() {
        let kb = kindof(&[("k1", "", "b"), ("k2", "a", "b")]);
        let s = &parse_schemas("schema x\nslot KINDOF HYPONYM=$v\n").unwrap()[0];
        assert_eq!(solve(s, &kb, None).unwrap().len(), 1);
    }

    #[test]
    fn unknown_table_and_column() {
        let kb = kindof(&[("k1", "a", "b")]);
        let s = &parse_schemas("schema x\nslot KINDOF\nslot NOPE\n").unwrap()[0];
        assert!(matches!(solve(s, &kb, None), Err(SchemaError::UnknownTable { slot: 1, .. })));
        let s = &parse_schemas("schema x\nslot KINDOF COLOR=$c\n").unwrap()[0];
        assert!(matches!(solve(s, &kb, None), Err(SchemaError::UnknownColumn { .. })));
    }
}
