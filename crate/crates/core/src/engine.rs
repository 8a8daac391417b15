//! Bottom-up semi-naive evaluation of positive Datalog with provenance.
//!
//! Every ground rule instance whose premises hold is recorded as a
//! [`Derivation`] of its head fact, so the resulting [`DerivedStore`] is
//! the full derivation hypergraph of the least model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kb::{FactStore, Interner, Symbol};
use crate::program::{quote, Atom, Rule, Term};
use crate::rule_layer::{RuleId, RuleLayer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("rule {rule} is unsafe: head variable {variable} does not occur in the body")]
    UnsafeRule { rule: RuleId, variable: String },
    #[error("predicate {predicate} used with arity {found}, expected {expected}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("query head predicate {0} is already used by the rule layer or the facts")]
    HeadConflict(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub rule: RuleId,
    /// One premise per body atom, in body order.
    pub premises: Vec<FactId>,
}

#[derive(Debug, Clone)]
pub struct FactEntry {
    pub predicate: String,
    pub args: Vec<Symbol>,
    /// Labels of the sources that assert this fact, sorted by label.
    pub sources: Vec<Symbol>,
    pub derivations: Vec<Derivation>,
}

impl FactEntry {
    pub fn is_source(&self) -> bool {
        !self.sources.is_empty()
    }
}

#[derive(Debug, Default, Clone)]
struct Relation {
    name: String,
    /// Fact ids in ascending order.
    facts: Vec<FactId>,
    lookup: HashMap<Vec<Symbol>, FactId>,
    /// Per argument position: value -> fact ids, ascending.
    index: Vec<HashMap<Symbol, Vec<FactId>>>,
}

impl Relation {
    fn new(name: &str, arity: usize) -> Self {
        Relation {
            name: name.to_string(),
            index: vec![HashMap::new(); arity],
            ..Default::default()
        }
    }

    fn push(&mut self, id: FactId, args: &[Symbol]) {
        self.facts.push(id);
        self.lookup.insert(args.to_vec(), id);
        for (pos, sym) in args.iter().enumerate() {
            self.index[pos].entry(*sym).or_default().push(id);
        }
    }
}

/// Ids in `[lo, hi)` of an ascending list.
fn id_range(ids: &[FactId], lo: u32, hi: u32) -> &[FactId] {
    let a = ids.partition_point(|f| f.0 < lo);
    let b = ids.partition_point(|f| f.0 < hi);
    &ids[a..b]
}

/// Strings known to the shared fact store plus constants introduced by
/// rules.
#[derive(Debug, Clone)]
struct Symbols {
    base: Arc<FactStore>,
    extra: Interner,
}

impl Symbols {
    fn offset(&self) -> u32 {
        self.base.interner().len() as u32
    }

    fn intern(&mut self, s: &str) -> Symbol {
        match self.base.lookup(s) {
            Some(sym) => sym,
            None => Symbol(self.offset() + self.extra.intern(s).0),
        }
    }

    fn get(&self, s: &str) -> Option<Symbol> {
        self.base
            .lookup(s)
            .or_else(|| self.extra.get(s).map(|x| Symbol(self.offset() + x.0)))
    }

    fn resolve(&self, sym: Symbol) -> &str {
        let offset = self.offset();
        if sym.0 < offset {
            self.base.resolve(sym)
        } else {
            self.extra.resolve(Symbol(sym.0 - offset))
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Var(usize),
    Const(Symbol),
}

#[derive(Debug, Clone)]
struct CompiledAtom {
    relation: usize,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    id: RuleId,
    head: CompiledAtom,
    body: Vec<CompiledAtom>,
    var_count: usize,
}

/// All facts of an evaluation, with the derivations that produced them.
#[derive(Debug, Clone)]
pub struct DerivedStore {
    symbols: Symbols,
    relation_ids: HashMap<String, usize>,
    relations: Vec<Relation>,
    facts: Vec<FactEntry>,
    rules: BTreeMap<RuleId, Rule>,
    warnings: Vec<String>,
}

/// Evaluates `layer` (plus an optional query rule, numbered after the
/// layer's rules) over `store` to the least fixpoint.
pub fn evaluate(
    layer: &RuleLayer,
    query: Option<&Rule>,
    store: &Arc<FactStore>,
) -> Result<DerivedStore, EngineError> {
    let mut rules: Vec<(RuleId, Rule)> = layer.rules().to_vec();
    if let Some(q) = query {
        let head = &q.head.predicate;
        let clash = store.contains_predicate(head)
            || rules.iter().any(|(_, r)| {
                std::iter::once(&r.head)
                    .chain(&r.body)
                    .any(|a| &a.predicate == head)
            });
        if clash {
            return Err(EngineError::HeadConflict(head.clone()));
        }
        rules.push((layer.next_id(), q.clone()));
    }
    for (id, rule) in &rules {
        if let Some(v) = rule.unbound_head_vars().first() {
            return Err(EngineError::UnsafeRule {
                rule: *id,
                variable: v.to_string(),
            });
        }
    }

    let mut ds = DerivedStore {
        symbols: Symbols {
            base: Arc::clone(store),
            extra: Interner::default(),
        },
        relation_ids: HashMap::new(),
        relations: Vec::new(),
        facts: Vec::new(),
        rules: rules.iter().cloned().collect(),
        warnings: Vec::new(),
    };

    // Arity of every predicate mentioned by the program.
    let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, rule) in &rules {
        for atom in std::iter::once(&rule.head).chain(&rule.body) {
            let expected = *arities.entry(&atom.predicate).or_insert(atom.arity());
            if expected != atom.arity() {
                return Err(EngineError::ArityMismatch {
                    predicate: atom.predicate.clone(),
                    expected,
                    found: atom.arity(),
                });
            }
        }
    }
    for (pred, arity) in &arities {
        if store.contains_predicate(pred) && *arity != 2 {
            return Err(EngineError::ArityMismatch {
                predicate: pred.to_string(),
                expected: 2,
                found: *arity,
            });
        }
        ds.relation_ids.insert(pred.to_string(), ds.relations.len());
        ds.relations.push(Relation::new(pred, *arity));
    }

    let heads: BTreeSet<&str> = rules.iter().map(|(_, r)| r.head.predicate.as_str()).collect();
    let mut unknown = BTreeSet::new();
    for (_, rule) in &rules {
        for atom in &rule.body {
            let p = atom.predicate.as_str();
            if !heads.contains(p) && !store.contains_predicate(p) {
                unknown.insert(p);
            }
        }
    }
    for p in unknown {
        let msg = format!("unknown predicate {p}: no facts or rules define it");
        log::warn!("{msg}");
        ds.warnings.push(msg);
    }

    // Source facts.
    for pred in arities.keys() {
        let rel = ds.relation_ids[*pred];
        for (a, b, source) in store.facts_of(pred) {
            let id = ds.insert(rel, vec![a, b]);
            ds.facts[id.0 as usize].sources.push(source);
        }
    }
    let base = Arc::clone(store);
    for fact in &mut ds.facts {
        fact.sources.sort_by(|x, y| base.resolve(*x).cmp(base.resolve(*y)));
        fact.sources.dedup();
    }

    let compiled: Vec<CompiledRule> = rules.iter().map(|(id, r)| ds.compile(*id, r)).collect();

    // Bodiless rules fire once, before the first round.
    for rule in compiled.iter().filter(|r| r.body.is_empty()) {
        let args = rule.head.slots.iter().map(|s| match s {
            Slot::Const(c) => *c,
            Slot::Var(_) => unreachable!("safe bodiless rules are ground"),
        });
        let args = args.collect();
        ds.record(rule.head.relation, args, rule.id, Vec::new());
    }

    let mut delta_start = 0u32;
    let mut delta_end = ds.facts.len() as u32;
    let mut round = 0;
    while delta_start < delta_end {
        let mut found: Vec<(usize, Vec<Symbol>, RuleId, Vec<FactId>)> = Vec::new();
        for rule in compiled.iter().filter(|r| !r.body.is_empty()) {
            for k in 0..rule.body.len() {
                let rel = &ds.relations[rule.body[k].relation];
                if id_range(&rel.facts, delta_start, delta_end).is_empty() {
                    continue;
                }
                let ranges: Vec<(u32, u32)> = (0..rule.body.len())
                    .map(|j| match j.cmp(&k) {
                        std::cmp::Ordering::Less => (0, delta_start),
                        std::cmp::Ordering::Equal => (delta_start, delta_end),
                        std::cmp::Ordering::Greater => (0, delta_end),
                    })
                    .collect();
                let order = ds.join_order(rule, &ranges);
                let mut bindings = vec![None; rule.var_count];
                let mut premises = vec![FactId(0); rule.body.len()];
                ds.join(rule, &order, &ranges, 0, &mut bindings, &mut premises, &mut |b, p| {
                    let head = rule
                        .head
                        .slots
                        .iter()
                        .map(|s| match s {
                            Slot::Const(c) => *c,
                            Slot::Var(v) => b[*v].expect("head variables are bound"),
                        })
                        .collect();
                    found.push((rule.head.relation, head, rule.id, p.to_vec()));
                });
            }
        }
        for (rel, args, rule, premises) in found {
            ds.record(rel, args, rule, premises);
        }
        round += 1;
        delta_start = delta_end;
        delta_end = ds.facts.len() as u32;
    }
    log::debug!("fixpoint after {round} rounds, {} facts", ds.facts.len());
    Ok(ds)
}

impl DerivedStore {
    fn compile(&mut self, id: RuleId, rule: &Rule) -> CompiledRule {
        let mut vars: Vec<String> = Vec::new();
        let mut compile_atom = |atom: &Atom, symbols: &mut Symbols| CompiledAtom {
            relation: self.relation_ids[&atom.predicate],
            slots: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Slot::Const(symbols.intern(c)),
                    Term::Var(v) => Slot::Var(match vars.iter().position(|x| x == v) {
                        Some(i) => i,
                        None => {
                            vars.push(v.clone());
                            vars.len() - 1
                        }
                    }),
                })
                .collect(),
        };
        let body: Vec<CompiledAtom> = rule
            .body
            .iter()
            .map(|a| compile_atom(a, &mut self.symbols))
            .collect();
        let head = compile_atom(&rule.head, &mut self.symbols);
        CompiledRule {
            id,
            head,
            body,
            var_count: vars.len(),
        }
    }

    fn insert(&mut self, rel: usize, args: Vec<Symbol>) -> FactId {
        if let Some(&id) = self.relations[rel].lookup.get(&args) {
            return id;
        }
        let id = FactId(self.facts.len() as u32);
        self.relations[rel].push(id, &args);
        self.facts.push(FactEntry {
            predicate: self.relations[rel].name.clone(),
            args,
            sources: Vec::new(),
            derivations: Vec::new(),
        });
        id
    }

    fn record(&mut self, rel: usize, args: Vec<Symbol>, rule: RuleId, premises: Vec<FactId>) {
        let id = self.insert(rel, args);
        let derivation = Derivation { rule, premises };
        let entry = &mut self.facts[id.0 as usize];
        if !entry.derivations.contains(&derivation) {
            entry.derivations.push(derivation);
        }
    }

    /// Greedy join order: most bound arguments first, then the smaller
    /// candidate set, then body order.
    fn join_order(&self, rule: &CompiledRule, ranges: &[(u32, u32)]) -> Vec<usize> {
        let mut bound = vec![false; rule.var_count];
        let mut remaining: Vec<usize> = (0..rule.body.len()).collect();
        let mut order = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let (pick, _) = remaining
                .iter()
                .enumerate()
                .min_by_key(|(_, &j)| {
                    let atom = &rule.body[j];
                    let bound_args = atom
                        .slots
                        .iter()
                        .filter(|s| match s {
                            Slot::Const(_) => true,
                            Slot::Var(v) => bound[*v],
                        })
                        .count();
                    let (lo, hi) = ranges[j];
                    let size = id_range(&self.relations[atom.relation].facts, lo, hi).len();
                    (std::cmp::Reverse(bound_args), size, j)
                })
                .expect("remaining is non-empty");
            let j = remaining.remove(pick);
            for s in &rule.body[j].slots {
                if let Slot::Var(v) = s {
                    bound[*v] = true;
                }
            }
            order.push(j);
        }
        order
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        rule: &CompiledRule,
        order: &[usize],
        ranges: &[(u32, u32)],
        step: usize,
        bindings: &mut Vec<Option<Symbol>>,
        premises: &mut Vec<FactId>,
        emit: &mut dyn FnMut(&[Option<Symbol>], &[FactId]),
    ) {
        let Some(&j) = order.get(step) else {
            emit(bindings, premises);
            return;
        };
        let atom = &rule.body[j];
        let rel = &self.relations[atom.relation];
        let (lo, hi) = ranges[j];
        let value = |s: &Slot, b: &[Option<Symbol>]| match s {
            Slot::Const(c) => Some(*c),
            Slot::Var(v) => b[*v],
        };
        // Narrowest index over the bound positions, else the whole relation.
        let mut candidates: &[FactId] = &rel.facts;
        for (pos, slot) in atom.slots.iter().enumerate() {
            if let Some(sym) = value(slot, bindings) {
                let list = rel.index[pos].get(&sym).map_or(&[][..], Vec::as_slice);
                if list.len() < candidates.len() {
                    candidates = list;
                }
            }
        }
        for &id in id_range(candidates, lo, hi) {
            let args = &self.facts[id.0 as usize].args;
            let mut newly = Vec::new();
            let mut ok = true;
            for (slot, &sym) in atom.slots.iter().zip(args) {
                match value(slot, bindings) {
                    Some(v) if v != sym => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        if let Slot::Var(v) = slot {
                            bindings[*v] = Some(sym);
                            newly.push(*v);
                        }
                    }
                }
            }
            if ok {
                premises[j] = id;
                self.join(rule, order, ranges, step + 1, bindings, premises, emit);
            }
            for v in newly {
                bindings[v] = None;
            }
        }
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn fact(&self, id: FactId) -> &FactEntry {
        &self.facts[id.0 as usize]
    }

    pub fn fact_ids(&self) -> impl Iterator<Item = FactId> {
        (0..self.facts.len() as u32).map(FactId)
    }

    pub fn resolve(&self, sym: Symbol) -> &str {
        self.symbols.resolve(sym)
    }

    pub fn rule(&self, id: RuleId) -> Option<&Rule> {
        self.rules.get(&id)
    }

    /// Looks a fact up by predicate and argument strings.
    pub fn find<S: AsRef<str>>(&self, predicate: &str, args: &[S]) -> Option<FactId> {
        let rel = &self.relations[*self.relation_ids.get(predicate)?];
        let syms: Option<Vec<Symbol>> =
            args.iter().map(|a| self.symbols.get(a.as_ref())).collect();
        rel.lookup.get(&syms?).copied()
    }

    pub fn args(&self, id: FactId) -> Vec<&str> {
        self.fact(id).args.iter().map(|s| self.resolve(*s)).collect()
    }

    /// `pred("a","b")` rendering of a fact.
    pub fn fact_text(&self, id: FactId) -> String {
        let f = self.fact(id);
        let args: Vec<String> = f.args.iter().map(|s| quote(self.resolve(*s))).collect();
        if args.is_empty() {
            f.predicate.clone()
        } else {
            format!("{}({})", f.predicate, args.join(","))
        }
    }

    /// Tuples of `predicate`, resolved and sorted.
    pub fn answers(&self, predicate: &str) -> Vec<Vec<String>> {
        let Some(&rel) = self.relation_ids.get(predicate) else {
            return Vec::new();
        };
        let mut out: Vec<Vec<String>> = self.relations[rel]
            .facts
            .iter()
            .map(|&id| self.args(id).into_iter().map(String::from).collect())
            .collect();
        out.sort();
        out
    }

    /// Every fact as (predicate, args), for comparisons.
    pub fn fact_set(&self) -> BTreeSet<(String, Vec<String>)> {
        self.fact_ids()
            .map(|id| {
                (
                    self.fact(id).predicate.clone(),
                    self.args(id).into_iter().map(String::from).collect(),
                )
            })
            .collect()
    }

    /// Re-applies a derivation's rule to its premises and checks that it
    /// yields exactly `fact`.
    pub fn replay(&self, fact: FactId, derivation: &Derivation) -> bool {
        let Some(rule) = self.rule(derivation.rule) else {
            return false;
        };
        if rule.body.len() != derivation.premises.len() {
            return false;
        }
        let mut subst: HashMap<&str, Symbol> = HashMap::new();
        for (atom, &premise) in rule.body.iter().zip(&derivation.premises) {
            let Some(p) = self.facts.get(premise.0 as usize) else {
                return false;
            };
            if p.predicate != atom.predicate || p.args.len() != atom.args.len() {
                return false;
            }
            for (term, &sym) in atom.args.iter().zip(&p.args) {
                let ok = match term {
                    Term::Const(c) => self.symbols.get(c) == Some(sym),
                    Term::Var(v) => *subst.entry(v).or_insert(sym) == sym,
                };
                if !ok {
                    return false;
                }
            }
        }
        let f = self.fact(fact);
        f.predicate == rule.head.predicate
            && rule.head.args.len() == f.args.len()
            && rule.head.args.iter().zip(&f.args).all(|(t, &sym)| match t {
                Term::Const(c) => self.symbols.get(c) == Some(sym),
                Term::Var(v) => subst.get(v.as_str()) == Some(&sym),
            })
    }
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
