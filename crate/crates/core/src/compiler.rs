//! Turns a parsed query into a single rule whose head collects answers.

use std::collections::BTreeMap;

use crate::cnl::{IrArg, QueryIr, VarId};
use crate::program::{Atom, Rule, Term};

/// Variable-name prefix for an entity type.
pub fn type_prefix(entity_type: &str) -> String {
    match entity_type {
        "drug" => "DR".into(),
        "gene" => "GN".into(),
        "disease" => "DS".into(),
        "category" => "CT".into(),
        "side effect" => "SE".into(),
        other => {
            let words: Vec<&str> = other.split_whitespace().collect();
            let letters: String = if words.len() > 1 {
                words.iter().filter_map(|w| w.chars().next()).collect()
            } else {
                other.chars().filter(char::is_ascii_alphanumeric).take(2).collect()
            };
            let prefix: String = letters
                .chars()
                .filter(char::is_ascii_alphanumeric)
                .collect::<String>()
                .to_ascii_uppercase();
            if prefix.starts_with(|c: char| c.is_ascii_uppercase()) {
                prefix
            } else {
                format!("V{prefix}")
            }
        }
    }
}

/// Name of the answer relation, e.g. `what_be_genes`.
pub fn head_predicate(plural_noun: &str) -> String {
    let name: String = plural_noun
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("what_be_{name}")
}

/// Compiles a query into `what_be_<plural>(Answer) :- atoms...`.
///
/// Variables are named by type prefix and a per-type counter, in order of
/// first occurrence (answer first, then atom by atom).
pub fn compile(ir: &QueryIr) -> Rule {
    let mut names: BTreeMap<VarId, String> = BTreeMap::new();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut taken: BTreeMap<String, String> = BTreeMap::new();
    let mut name_of = |v: VarId, names: &mut BTreeMap<VarId, String>| -> String {
        if let Some(n) = names.get(&v) {
            return n.clone();
        }
        let ty = &ir.vars[&v];
        let mut prefix = type_prefix(ty);
        // Two types deriving the same prefix get distinct ones.
        while taken.get(&prefix).is_some_and(|owner| owner != ty) {
            prefix.push('X');
        }
        taken.insert(prefix.clone(), ty.clone());
        let counter = counters.entry(prefix.clone()).or_insert(0);
        *counter += 1;
        let name = format!("{prefix}{counter}");
        names.insert(v, name.clone());
        name
    };

    let answer = name_of(ir.answer, &mut names);
    let body = ir
        .atoms
        .iter()
        .map(|atom| {
            let args = atom
                .args
                .iter()
                .map(|arg| match arg {
                    IrArg::Var(v) => Term::Var(name_of(*v, &mut names)),
                    IrArg::Const { name, .. } => Term::Const(name.clone()),
                })
                .collect();
            Atom::new(atom.predicate.clone(), args)
        })
        .collect();
    Rule::new(
        Atom::new(head_predicate(&ir.answer_noun), vec![Term::Var(answer)]),
        body,
    )
}
