//! The rule layer: integrated relations defined over per-source relations,
//! its predicate dependency graph, and goal-directed slicing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::program::{parse_program_lines, Atom, Program, Rule, SyntaxError};

/// The rule layer shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../data/default.rules");

/// Stable rule identifier: position of the rule in its source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct RuleId(pub usize);

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: unsafe rule, head variable {variable} does not occur in the body")]
    Safety { line: usize, variable: String },
    #[error("line {line}: predicate {predicate} used with arity {found}, previously {expected}")]
    ArityConflict {
        line: usize,
        predicate: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleLayer {
    rules: Vec<(RuleId, Rule)>,
    /// One past the largest id of the layer this was parsed or sliced from.
    next_id: usize,
}

impl RuleLayer {
    /// Parses and validates rule text.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let parsed = parse_program_lines(text)?;
        let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
        for src in &parsed {
            if let Some(v) = src.rule.unbound_head_vars().first() {
                return Err(RuleError::Safety {
                    line: src.line,
                    variable: v.to_string(),
                });
            }
            for atom in std::iter::once(&src.rule.head).chain(&src.rule.body) {
                let expected = *arities.entry(&atom.predicate).or_insert(atom.arity());
                if expected != atom.arity() {
                    return Err(RuleError::ArityConflict {
                        line: src.line,
                        predicate: atom.predicate.clone(),
                        expected,
                        found: atom.arity(),
                    });
                }
            }
        }
        let rules: Vec<_> = parsed
            .into_iter()
            .enumerate()
            .map(|(i, s)| (RuleId(i), s.rule))
            .collect();
        Ok(RuleLayer {
            next_id: rules.len(),
            rules,
        })
    }

    pub fn default_layer() -> Self {
        Self::parse(DEFAULT_RULES).expect("default rule layer is valid")
    }

    /// Builds a layer from already-validated rules, numbering them in order.
    pub fn from_rules(rules: Vec<Rule>) -> Self {
        let rules: Vec<_> = rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| (RuleId(i), r))
            .collect();
        RuleLayer {
            next_id: rules.len(),
            rules,
        }
    }

    pub fn rules(&self) -> &[(RuleId, Rule)] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: RuleId) -> Option<&Rule> {
        self.rules.iter().find(|(i, _)| *i == id).map(|(_, r)| r)
    }

    /// First id not used by this layer or the layer it was sliced from.
    pub fn next_id(&self) -> RuleId {
        RuleId(self.next_id)
    }

    pub fn program(&self) -> Program {
        Program::new(self.rules.iter().map(|(_, r)| r.clone()).collect())
    }

    /// Predicates defined by at least one rule head.
    pub fn head_predicates(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .map(|(_, r)| r.head.predicate.as_str())
            .collect()
    }

    pub fn dependency_graph(&self) -> PredicateGraph {
        let mut graph = PredicateGraph::default();
        for (_, rule) in &self.rules {
            graph.nodes.insert(rule.head.predicate.clone());
            for atom in &rule.body {
                graph.nodes.insert(atom.predicate.clone());
                graph
                    .edges
                    .entry(rule.head.predicate.clone())
                    .or_default()
                    .insert(atom.predicate.clone());
            }
        }
        graph
    }

    /// Rules whose head predicate is reachable from `goals`, with ids kept.
    /// Goals that no rule mentions are reported as warnings.
    pub fn slice<S: AsRef<str>>(&self, goals: &[S]) -> (RuleLayer, Vec<String>) {
        let graph = self.dependency_graph();
        let mut warnings = Vec::new();
        for g in goals {
            if !graph.nodes.contains(g.as_ref()) {
                warnings.push(format!("unknown predicate {}", g.as_ref()));
            }
        }
        let reach = graph.reachable(goals.iter().map(AsRef::as_ref));
        let rules = self
            .rules
            .iter()
            .filter(|(_, r)| reach.contains(r.head.predicate.as_str()))
            .cloned()
            .collect();
        (
            RuleLayer {
                rules,
                next_id: self.next_id,
            },
            warnings,
        )
    }

    /// Slice relevant to the body of `query`.
    pub fn slice_for(&self, query: &Rule) -> (RuleLayer, Vec<String>) {
        let goals: Vec<&str> = query.body.iter().map(|a| a.predicate.as_str()).collect();
        self.slice(&goals)
    }

    /// Arity of `predicate` as used in the layer.
    pub fn arity_of(&self, predicate: &str) -> Option<usize> {
        self.rules
            .iter()
            .flat_map(|(_, r)| std::iter::once(&r.head).chain(&r.body))
            .find(|a: &&Atom| a.predicate == predicate)
            .map(Atom::arity)
    }
}

/// Head-to-body dependencies between predicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicateGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<String, BTreeSet<String>>,
}

impl PredicateGraph {
    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.get(from).is_some_and(|s| s.contains(to))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    /// Predicates reachable from `starts`, including the starts themselves.
    pub fn reachable<'a>(&'a self, starts: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue: VecDeque<&str> = starts.into_iter().collect();
        while let Some(p) = queue.pop_front() {
            if !seen.insert(p) {
                continue;
            }
            if let Some(next) = self.edges.get(p) {
                queue.extend(next.iter().map(String::as_str));
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layer_has_ten_rules() {
        let layer = RuleLayer::default_layer();
        assert_eq!(layer.len(), 10);
        assert_eq!(layer.rules()[0].0, RuleId(0));
        assert_eq!(layer.next_id(), RuleId(10));
    }

    #[test]
    fn unsafe_rule_names_variable() {
        assert_eq!(
            RuleLayer::parse("p(X,Y) :- q(X)."),
            Err(RuleError::Safety {
                line: 1,
                variable: "Y".into()
            })
        );
    }

    #[test]
    fn arity_conflict_names_predicate() {
        let err = RuleLayer::parse("p(X) :- q(X).\n\np(X,Y) :- q(X), q(Y).").unwrap_err();
        assert!(matches!(
            err,
            RuleError::ArityConflict { line: 3, ref predicate, expected: 1, found: 2 } if predicate == "p"
        ));
    }

    #[test]
    fn empty_text_is_empty_layer() {
        assert!(RuleLayer::parse("").unwrap().is_empty());
    }

    #[test]
    fn dependency_graph_examples() {
        let g = RuleLayer::default_layer().dependency_graph();
        assert!(g.has_edge("drug_gene", "ctd_drug_gene"));
        assert!(g.has_edge("gene_gene", "biogrid_gene_gene"));
        // two symmetric rules share one deduplicated edge
        assert_eq!(g.edges["gene_gene"].len(), 1);

        let g = RuleLayer::parse("p(\"a\").\nq(\"b\").").unwrap().dependency_graph();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edge_count(), 0);

        let g = RuleLayer::parse("p(X) :- p(X).").unwrap().dependency_graph();
        assert!(g.has_edge("p", "p"));
    }

    #[test]
    fn slice_examples() {
        let layer = RuleLayer::default_layer();
        let (s, warnings) = layer.slice(&["drug_gene", "gene_gene"]);
        assert!(warnings.is_empty());
        let ids: Vec<usize> = s.rules().iter().map(|(id, _)| id.0).collect();
        assert_eq!(ids, [0, 1, 2, 3]);
        assert_eq!(s.next_id(), layer.next_id());

        let heads: Vec<String> = layer.head_predicates().into_iter().map(String::from).collect();
        assert_eq!(layer.slice(&heads).0, layer);

        let (s, warnings) = layer.slice(&["unknown_pred"]);
        assert!(s.is_empty());
        assert_eq!(warnings, ["unknown predicate unknown_pred"]);
    }

    #[test]
    fn slice_follows_recursion() {
        let layer = RuleLayer::parse(
            "path(X,Y) :- edge(X,Y).\npath(X,Y) :- edge(X,Z), path(Z,Y).\n\
             edge(X,Y) :- link(X,Y).\nother(X) :- link(X,X).",
        )
        .unwrap();
        let (s, _) = layer.slice(&["path"]);
        assert_eq!(s.len(), 3);
    }
}
