//! Minimal proof trees for derived facts, and their verbalisation.
//!
//! Cost of a proof is the number of source-fact leaves it contains, counted
//! with multiplicity. The cheapest proof is found best-first over the
//! derivation hypergraph: facts are finalised in nondecreasing cost order
//! and a derivation becomes usable only once all of its premises are
//! final, so cyclic derivations never enter a proof.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Derivation, DerivedStore, FactId};
use crate::program::quote;
use crate::rule_layer::RuleId;

/// The templates shipped with the crate.
pub const DEFAULT_TEMPLATES: &str = include_str!("../data/default.templates");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExplainError {
    #[error("fact not found: {0}")]
    FactNotFound(String),
    #[error("no template for predicate {0}")]
    MissingTemplate(String),
    #[error("template file line {line}: {message}")]
    Template { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofKind {
    Leaf { source: String },
    Step { rule: RuleId, children: Vec<Justification> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Justification {
    pub fact: FactId,
    pub predicate: String,
    pub args: Vec<String>,
    pub kind: ProofKind,
    pub cost: u64,
}

impl Justification {
    pub fn fact_text(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|a| quote(a)).collect();
        format!("{}({})", self.predicate, args.join(","))
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&Justification> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Justification>) {
        match &self.kind {
            ProofKind::Leaf { .. } => out.push(self),
            ProofKind::Step { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match &self.kind {
            ProofKind::Leaf { .. } => 1,
            ProofKind::Step { children, .. } => {
                1 + children.iter().map(Justification::depth).max().unwrap_or(0)
            }
        }
    }

    /// Checks the tree against the store: leaves are source facts carrying
    /// the stated label, every step is an instance of its rule, and costs
    /// add up.
    pub fn validate(&self, derived: &DerivedStore) -> Result<(), String> {
        let fact = derived.fact(self.fact);
        if fact.predicate != self.predicate || derived.args(self.fact) != self.args {
            return Err(format!("{} does not match stored fact", self.fact_text()));
        }
        match &self.kind {
            ProofKind::Leaf { source } => {
                if !fact.sources.iter().any(|s| derived.resolve(*s) == source) {
                    return Err(format!("{} is not asserted by {source}", self.fact_text()));
                }
                if self.cost != 1 {
                    return Err(format!("leaf {} has cost {}", self.fact_text(), self.cost));
                }
            }
            ProofKind::Step { rule, children } => {
                let d = Derivation {
                    rule: *rule,
                    premises: children.iter().map(|c| c.fact).collect(),
                };
                if !derived.replay(self.fact, &d) {
                    return Err(format!("{} is not an instance of rule {rule}", self.fact_text()));
                }
                let sum: u64 = children.iter().map(|c| c.cost).sum();
                if sum != self.cost {
                    return Err(format!("{} has cost {} but children sum to {sum}", self.fact_text(), self.cost));
                }
                for c in children {
                    c.validate(derived)?;
                }
            }
        }
        Ok(())
    }
}

/// Sort key making tie-breaks independent of fact numbering.
fn premise_key(derived: &DerivedStore, premises: &[FactId]) -> Vec<(String, Vec<String>)> {
    premises
        .iter()
        .map(|&p| {
            (
                derived.fact(p).predicate.clone(),
                derived.args(p).into_iter().map(String::from).collect(),
            )
        })
        .collect()
}

/// Cheapest proof of `fact`; ties go to a direct source, then the smaller
/// rule id, then the lexicographically smaller premise list.
pub fn min_proof(derived: &DerivedStore, fact: FactId) -> Result<Justification, ExplainError> {
    if fact.0 as usize >= derived.len() {
        return Err(ExplainError::FactNotFound(fact.to_string()));
    }

    // Facts the target may depend on.
    let mut cone: HashSet<FactId> = HashSet::new();
    let mut queue = VecDeque::from([fact]);
    while let Some(f) = queue.pop_front() {
        if cone.insert(f) {
            for d in &derived.fact(f).derivations {
                queue.extend(d.premises.iter().copied());
            }
        }
    }

    // Derivations inside the cone, with a reverse index from premises.
    let mut derivs: Vec<(FactId, &Derivation)> = Vec::new();
    let mut uses: HashMap<FactId, Vec<usize>> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<(u64, FactId)>> = BinaryHeap::new();
    let mut best: HashMap<FactId, u64> = HashMap::new();
    let mut offer = |f: FactId, cost: u64, heap: &mut BinaryHeap<Reverse<(u64, FactId)>>| {
        let slot = best.entry(f).or_insert(u64::MAX);
        if cost < *slot {
            *slot = cost;
            heap.push(Reverse((cost, f)));
        }
    };
    let mut sorted_cone: Vec<FactId> = cone.iter().copied().collect();
    sorted_cone.sort();
    for &f in &sorted_cone {
        let entry = derived.fact(f);
        if entry.is_source() {
            offer(f, 1, &mut heap);
        }
        for d in &entry.derivations {
            if d.premises.is_empty() {
                offer(f, 0, &mut heap);
            }
            for &p in &d.premises {
                uses.entry(p).or_default().push(derivs.len());
            }
            derivs.push((f, d));
        }
    }
    let mut remaining: Vec<usize> = derivs.iter().map(|(_, d)| d.premises.len()).collect();
    let mut sums: Vec<u64> = vec![0; derivs.len()];

    // Final cost and finalisation rank of each fact.
    let mut done: HashMap<FactId, (u64, usize)> = HashMap::new();
    while let Some(Reverse((cost, f))) = heap.pop() {
        if done.contains_key(&f) {
            continue;
        }
        done.insert(f, (cost, done.len()));
        if f == fact {
            break;
        }
        for &di in uses.get(&f).map_or(&[][..], Vec::as_slice) {
            remaining[di] -= 1;
            sums[di] = sums[di].saturating_add(cost);
            if remaining[di] == 0 {
                offer(derivs[di].0, sums[di], &mut heap);
            }
        }
    }
    if !done.contains_key(&fact) {
        return Err(ExplainError::FactNotFound(derived.fact_text(fact)));
    }
    Ok(build(derived, fact, &done))
}

fn build(derived: &DerivedStore, f: FactId, done: &HashMap<FactId, (u64, usize)>) -> Justification {
    let (cost, rank) = done[&f];
    let entry = derived.fact(f);
    let predicate = entry.predicate.clone();
    let args: Vec<String> = derived.args(f).into_iter().map(String::from).collect();
    if entry.is_source() && cost == 1 {
        return Justification {
            fact: f,
            predicate,
            args,
            kind: ProofKind::Leaf {
                source: derived.resolve(entry.sources[0]).to_string(),
            },
            cost,
        };
    }
    let chosen = entry
        .derivations
        .iter()
        .filter(|d| {
            let mut sum = 0u64;
            for p in &d.premises {
                match done.get(p) {
                    Some(&(c, r)) if r < rank => sum = sum.saturating_add(c),
                    _ => return false,
                }
            }
            sum == cost
        })
        .min_by(|a, b| {
            (a.rule, premise_key(derived, &a.premises))
                .cmp(&(b.rule, premise_key(derived, &b.premises)))
        })
        .expect("a finalised fact has a derivation over earlier facts");
    Justification {
        fact: f,
        predicate,
        args,
        kind: ProofKind::Step {
            rule: chosen.rule,
            children: chosen.premises.iter().map(|&p| build(derived, p, done)).collect(),
        },
        cost,
    }
}

/// Looks the fact up by name and returns its cheapest proof.
pub fn explain_fact<S: AsRef<str>>(
    derived: &DerivedStore,
    predicate: &str,
    args: &[S],
) -> Result<Justification, ExplainError> {
    let id = derived.find(predicate, args).ok_or_else(|| {
        let args: Vec<String> = args.iter().map(|a| quote(a.as_ref())).collect();
        ExplainError::FactNotFound(format!("{predicate}({})", args.join(",")))
    })?;
    min_proof(derived, id)
}

/// Sentence templates per source predicate, with `{arg1}`, `{arg2}` and
/// `{source}` placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateTable {
    templates: BTreeMap<String, String>,
}

impl TemplateTable {
    pub fn load(text: &str) -> Result<Self, ExplainError> {
        let mut templates = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let Some((pred, template)) = raw.split_once('\t') else {
                return Err(ExplainError::Template {
                    line: idx + 1,
                    message: "expected `predicate<TAB>template`".into(),
                });
            };
            templates.insert(pred.trim().to_string(), template.trim().to_string());
        }
        Ok(TemplateTable { templates })
    }

    pub fn default_templates() -> Self {
        Self::load(DEFAULT_TEMPLATES).expect("default templates are valid")
    }

    pub fn get(&self, predicate: &str) -> Option<&str> {
        self.templates.get(predicate).map(String::as_str)
    }

    pub fn insert(&mut self, predicate: &str, template: &str) {
        self.templates.insert(predicate.into(), template.into());
    }
}

/// The evidence of a proof as one sentence: each leaf through its
/// template, joined by " and ".
pub fn verbalize(j: &Justification, templates: &TemplateTable) -> Result<String, ExplainError> {
    let clauses = j
        .leaves()
        .into_iter()
        .map(|leaf| {
            let ProofKind::Leaf { source } = &leaf.kind else {
                unreachable!("leaves() only yields leaves")
            };
            let template = templates
                .get(&leaf.predicate)
                .ok_or_else(|| ExplainError::MissingTemplate(leaf.predicate.clone()))?;
            Ok(template
                .replace("{arg1}", leaf.args.first().map_or("", String::as_str))
                .replace("{arg2}", leaf.args.get(1).map_or("", String::as_str))
                .replace("{source}", source))
        })
        .collect::<Result<Vec<_>, ExplainError>>()?;
    Ok(clauses.join(" and "))
}

/// Nested document for an expandable proof view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProofDoc {
    pub fact: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub cost: u64,
    pub children: Vec<ProofDoc>,
}

impl ProofDoc {
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ProofDoc::depth).max().unwrap_or(0)
    }
}

pub fn render_tree(j: &Justification) -> ProofDoc {
    match &j.kind {
        ProofKind::Leaf { source } => ProofDoc {
            fact: j.fact_text(),
            rule: None,
            source: Some(source.clone()),
            cost: j.cost,
            children: Vec::new(),
        },
        ProofKind::Step { rule, children } => ProofDoc {
            fact: j.fact_text(),
            rule: Some(rule.0),
            source: None,
            cost: j.cost,
            children: children.iter().map(render_tree).collect(),
        },
    }
}
