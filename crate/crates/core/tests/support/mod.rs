//! Generators and reference implementations shared by the property tests
//! and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use bioquery_core::kb::FactStore;
use bioquery_core::lexicon::{Lexicon, VerbFrame};
use bioquery_core::program::{render, Atom, Rule, Term};
use bioquery_core::RuleLayer;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

pub type GroundFact = (String, Vec<String>);

pub const EXAMPLE_QUERY: &str =
    "What are the genes that are targeted by the drug Epinephrine and that interact with the gene DLG4?";

pub const EXAMPLE_SENTENCE: &str = "the drug \"Epinephrine\" targets the gene \"ADRB1\" according to CTD \
                                  and the gene \"ADRB1\" interacts with the gene \"DLG4\" according to BioGrid";

// ---------------------------------------------------------------- sentences

/// Random well-typed query sentences over a lexicon.
pub struct SentenceGen<'a> {
    lexicon: &'a Lexicon,
    pub max_depth: usize,
}

const NAMES: &[&str] = &["ADRB1", "DLG4", "Epinephrine", "Asthma", "Nausea", "Beta Blockers", "5HT2A", "\"beta-1 receptor\""];

impl<'a> SentenceGen<'a> {
    pub fn new(lexicon: &'a Lexicon, max_depth: usize) -> Self {
        SentenceGen { lexicon, max_depth }
    }

    fn plural(&self, ty: &str) -> &str {
        &self.lexicon.entity_type(ty).expect("known type").plural
    }

    /// Frames usable with a subject of type `ty`, with their voice:
    /// (verb words, object type).
    fn phrases(&self, ty: &str, third_person: bool) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for f in self.lexicon.frames() {
            let (subj, obj) = (&f.subject_type, &f.object_type);
            if subj == ty {
                let verb = if third_person { &f.third_person } else { &f.active };
                out.push((verb.clone(), obj.clone()));
            }
            if obj == ty {
                if let Some(p) = &f.passive {
                    let be = if third_person { "is" } else { "are" };
                    out.push((format!("{be} {p}"), subj.clone()));
                }
            }
        }
        out
    }

    fn has_phrases(&self, ty: &str) -> bool {
        !self.phrases(ty, false).is_empty()
    }

    fn viable_types(&self) -> Vec<String> {
        self.lexicon
            .types()
            .iter()
            .map(|t| t.id.clone())
            .filter(|t| self.has_phrases(t))
            .collect()
    }

    pub fn sentence(&self, rng: &mut StdRng) -> String {
        let types = self.viable_types();
        let ty = types.choose(rng).expect("lexicon has a viable type").clone();
        let mut words = Vec::new();
        if rng.random_bool(0.5) {
            words.extend(["What", "are", "the", self.plural(&ty)].map(String::from));
            self.chain(rng, &ty, 1, &mut words);
        } else {
            words.extend(["Which", self.plural(&ty)].map(String::from));
            let n = rng.random_range(1..=2);
            for i in 0..n {
                if i > 0 {
                    words.push("and".into());
                }
                self.vp(rng, &ty, false, 1, &mut words);
            }
        }
        let mut s = words.join(" ");
        s.push('?');
        s
    }

    fn chain(&self, rng: &mut StdRng, ty: &str, depth: usize, words: &mut Vec<String>) {
        // a further "and that" would attach to a nested clause, so the
        // chain only continues after a clause with a named object
        loop {
            words.push("that".into());
            let nested = self.vp(rng, ty, false, depth, words);
            if nested || depth >= self.max_depth || !rng.random_bool(0.4) {
                break;
            }
            words.push("and".into());
        }
    }

    /// Returns whether the object opened a nested chain.
    fn vp(&self, rng: &mut StdRng, ty: &str, third: bool, depth: usize, words: &mut Vec<String>) -> bool {
        let phrases = self.phrases(ty, third);
        let (verb, obj) = phrases.choose(rng).expect("viable type");
        words.extend(verb.split(' ').map(String::from));
        words.push("the".into());
        let ent = self.lexicon.entity_type(obj).expect("known type");
        if depth < self.max_depth && self.has_phrases(obj) && rng.random_bool(0.4) {
            words.extend(ent.plural.split(' ').map(String::from));
            self.chain(rng, obj, depth + 1, words);
            true
        } else {
            words.extend(ent.singular.split(' ').map(String::from));
            words.push(NAMES.choose(rng).unwrap().to_string());
            false
        }
    }
}

// ----------------------------------------------------------------- programs

#[derive(Debug, Clone)]
pub struct Instance {
    pub layer: RuleLayer,
    pub store: FactStore,
}

pub struct ProgramShape {
    pub max_predicates: usize,
    pub max_rules: usize,
    pub max_facts: usize,
    pub domain: usize,
}

/// Random positive program: binary base predicates `e*` hold the facts,
/// derived predicates `p*` (unary or binary) are defined by safe rules,
/// recursion included. Some facts are also placed on binary derived
/// predicates.
pub fn random_instance(rng: &mut StdRng, shape: &ProgramShape) -> Instance {
    let n_preds = rng.random_range(2..=shape.max_predicates);
    let n_base = rng.random_range(1..n_preds);
    let mut preds: Vec<(String, usize)> = (0..n_base).map(|i| (format!("e{i}"), 2)).collect();
    for i in 0..n_preds - n_base {
        preds.push((format!("p{i}"), rng.random_range(1..=2)));
    }
    let derived: Vec<&(String, usize)> = preds[n_base..].iter().collect();
    let consts: Vec<String> = (0..shape.domain).map(|i| format!("c{i}")).collect();

    let mut rules = Vec::new();
    let n_rules = rng.random_range(1..=shape.max_rules);
    for _ in 0..n_rules {
        let (head_pred, head_arity) = derived.choose(rng).unwrap();
        let n_body = rng.random_range(0..=3);
        let vars = ["X", "Y", "Z", "W"];
        let mut body = Vec::new();
        for _ in 0..n_body {
            let (p, a) = preds.choose(rng).unwrap();
            let args = (0..*a)
                .map(|_| {
                    if rng.random_bool(0.15) {
                        Term::constant(consts.choose(rng).unwrap().clone())
                    } else {
                        Term::var(*vars.choose(rng).unwrap())
                    }
                })
                .collect();
            body.push(Atom::new(p.clone(), args));
        }
        let body_vars: Vec<String> = body.iter().flat_map(|a: &Atom| a.vars().map(String::from)).collect();
        let head_args = (0..*head_arity)
            .map(|_| match body_vars.choose(rng) {
                Some(v) if rng.random_bool(0.9) => Term::var(v.clone()),
                _ => Term::constant(consts.choose(rng).unwrap().clone()),
            })
            .collect();
        rules.push(Rule::new(Atom::new(head_pred.clone(), head_args), body));
    }

    let mut store = FactStore::new();
    let binary: Vec<&(String, usize)> = preds.iter().filter(|(_, a)| *a == 2).collect();
    let n_facts = rng.random_range(0..=shape.max_facts);
    for _ in 0..n_facts {
        let (p, _) = if rng.random_bool(0.85) {
            &preds[rng.random_range(0..n_base)]
        } else {
            binary.choose(rng).unwrap()
        };
        let a = consts.choose(rng).unwrap();
        let b = consts.choose(rng).unwrap();
        let src = ["S1", "S2"].choose(rng).unwrap();
        store.insert(p, a, b, src);
    }
    Instance {
        layer: RuleLayer::from_rules(rules),
        store,
    }
}

// ------------------------------------------------------------------ oracles

fn unify(args: &[Term], fact: &[String], binding: &mut HashMap<String, String>) -> bool {
    let mut added = Vec::new();
    for (t, v) in args.iter().zip(fact) {
        match t {
            Term::Const(c) if c != v => {
                for a in added {
                    binding.remove(&a);
                }
                return false;
            }
            Term::Const(_) => {}
            Term::Var(x) => match binding.get(x) {
                Some(b) if b != v => {
                    for a in added {
                        binding.remove(&a);
                    }
                    return false;
                }
                Some(_) => {}
                None => {
                    binding.insert(x.clone(), v.clone());
                    added.push(x.clone());
                }
            },
        }
    }
    true
}

fn ground(atom: &Atom, binding: &HashMap<String, String>) -> GroundFact {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => c.clone(),
            Term::Var(v) => binding[v].clone(),
        })
        .collect();
    (atom.predicate.clone(), args)
}

/// Every grounding of `rule` whose body holds in `facts`: (head, premises).
pub fn groundings(rule: &Rule, facts: &BTreeSet<GroundFact>) -> Vec<(GroundFact, Vec<GroundFact>)> {
    let mut by_pred: BTreeMap<&str, Vec<&Vec<String>>> = BTreeMap::new();
    for (p, a) in facts {
        by_pred.entry(p).or_default().push(a);
    }
    let mut out = Vec::new();
    let mut binding = HashMap::new();
    let mut premises = Vec::new();
    fn go(
        rule: &Rule,
        i: usize,
        by_pred: &BTreeMap<&str, Vec<&Vec<String>>>,
        binding: &mut HashMap<String, String>,
        premises: &mut Vec<GroundFact>,
        out: &mut Vec<(GroundFact, Vec<GroundFact>)>,
    ) {
        if i == rule.body.len() {
            out.push((ground(&rule.head, binding), premises.clone()));
            return;
        }
        let atom = &rule.body[i];
        for args in by_pred.get(atom.predicate.as_str()).into_iter().flatten() {
            if args.len() != atom.args.len() {
                continue;
            }
            let saved = binding.clone();
            if unify(&atom.args, args, binding) {
                premises.push((atom.predicate.clone(), (*args).clone()));
                go(rule, i + 1, by_pred, binding, premises, out);
                premises.pop();
            }
            *binding = saved;
        }
    }
    go(rule, 0, &by_pred, &mut binding, &mut premises, &mut out);
    out
}

pub fn store_facts(store: &FactStore) -> BTreeSet<GroundFact> {
    store
        .facts()
        .map(|(p, a, b, _)| (p.to_string(), vec![a.to_string(), b.to_string()]))
        .collect()
}

/// Least fixpoint by full recomputation until nothing changes.
pub fn naive_fixpoint(rules: &[Rule], store: &FactStore) -> BTreeSet<GroundFact> {
    let mut facts = store_facts(store);
    loop {
        let mut next = facts.clone();
        for r in rules {
            for (head, _) in groundings(r, &facts) {
                next.insert(head);
            }
        }
        if next.len() == facts.len() {
            return facts;
        }
        facts = next;
    }
}

/// Minimum proof-tree cost of every fact by exhaustive search over proof
/// trees: a fact is a source leaf (cost 1) or any grounded rule instance
/// whose premises avoid the facts on the path from the root (cost = sum of
/// the premises' costs, 0 for a bodiless rule).
pub struct ProofCostOracle {
    facts: Vec<GroundFact>,
    is_source: Vec<bool>,
    index: BTreeMap<GroundFact, usize>,
    /// Per fact: premise index lists of every grounding deriving it.
    options: Vec<Vec<Vec<usize>>>,
    memo: HashMap<(usize, u128), Option<u64>>,
}

impl ProofCostOracle {
    /// `None` when there are too many facts to encode a path.
    pub fn new(rules: &[Rule], store: &FactStore) -> Option<Self> {
        let sources = store_facts(store);
        let all = naive_fixpoint(rules, store);
        if all.len() > 128 {
            return None;
        }
        let index: BTreeMap<GroundFact, usize> = all.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        let mut options = vec![Vec::new(); all.len()];
        for r in rules {
            for (head, prem) in groundings(r, &all) {
                let ids: Vec<usize> = prem.iter().map(|p| index[p]).collect();
                options[index[&head]].push(ids);
            }
        }
        Some(ProofCostOracle {
            is_source: all.iter().map(|f| sources.contains(f)).collect(),
            facts: all.into_iter().collect(),
            index,
            options,
            memo: HashMap::new(),
        })
    }

    pub fn facts(&self) -> &[GroundFact] {
        &self.facts
    }

    pub fn min_cost(&mut self, fact: &GroundFact) -> Option<u64> {
        let i = *self.index.get(fact)?;
        self.search(i, 0)
    }

    fn search(&mut self, fact: usize, path: u128) -> Option<u64> {
        let leaf = self.is_source[fact];
        if leaf {
            // a leaf costs 1 and any rule step costs at least 0; only a
            // bodiless step can beat it
            if !self.options[fact].iter().any(Vec::is_empty) {
                return Some(1);
            }
        }
        let key = (fact, path);
        if let Some(c) = self.memo.get(&key) {
            return *c;
        }
        let path = path | (1u128 << fact);
        let mut best = if leaf { Some(1) } else { None };
        for opt in self.options[fact].clone() {
            if opt.iter().any(|p| path & (1u128 << p) != 0) {
                continue;
            }
            let mut sum = 0;
            let mut ok = true;
            for p in opt {
                match self.search(p, path) {
                    Some(c) => sum += c,
                    None => {
                        ok = false;
                        break;
                    }
                }
                if best.is_some_and(|b| sum >= b) {
                    ok = false;
                    break;
                }
            }
            if ok && best.is_none_or(|b| sum < b) {
                best = Some(sum);
            }
        }
        self.memo.insert(key, best);
        best
    }
}

/// A random query rule over the instance's predicates, with a fresh head.
pub fn random_query(rng: &mut StdRng, inst: &Instance) -> Rule {
    let mut preds: BTreeMap<String, usize> = BTreeMap::new();
    for (_, r) in inst.layer.rules() {
        for a in std::iter::once(&r.head).chain(&r.body) {
            preds.insert(a.predicate.clone(), a.arity());
        }
    }
    for p in inst.store.predicates() {
        preds.entry(p.to_string()).or_insert(2);
    }
    let preds: Vec<(String, usize)> = preds.into_iter().collect();
    let n = rng.random_range(1..=2);
    let mut body = Vec::new();
    for _ in 0..n {
        let (p, a) = preds.choose(rng).unwrap();
        let args = (0..*a).map(|_| Term::var(*["X", "Y", "Z"].choose(rng).unwrap())).collect();
        body.push(Atom::new(p.clone(), args));
    }
    let v = body[0].vars().next().unwrap().to_string();
    Rule::new(Atom::new("answer_q", vec![Term::var(v)]), body)
}

/// The frames of a lexicon, for tests that need them by predicate.
pub fn frame_by_predicate<'a>(lexicon: &'a Lexicon, predicate: &str) -> Option<&'a VerbFrame> {
    lexicon.frames().iter().find(|f| f.predicate == predicate)
}

// ------------------------------------------------------------------- checks

use std::sync::Arc;

use bioquery_core::cnl::{self, Expected};
use bioquery_core::compiler::compile;
use bioquery_core::evaluate;
use bioquery_core::explain::min_proof;

pub const ENGINE_SHAPE: ProgramShape = ProgramShape {
    max_predicates: 6,
    max_rules: 8,
    max_facts: 40,
    domain: 6,
};

pub const PROOF_SHAPE: ProgramShape = ProgramShape {
    max_predicates: 5,
    max_rules: 6,
    max_facts: 12,
    domain: 4,
};

fn mentioned(layer: &RuleLayer) -> BTreeSet<String> {
    layer
        .rules()
        .iter()
        .flat_map(|(_, r)| std::iter::once(&r.head).chain(&r.body))
        .map(|a| a.predicate.clone())
        .collect()
}

fn rules_of(layer: &RuleLayer) -> Vec<Rule> {
    layer.rules().iter().map(|(_, r)| r.clone()).collect()
}

/// Semi-naive result equals the naive fixpoint, and every recorded
/// derivation replays.
pub fn check_engine(rng: &mut StdRng) -> Result<(), String> {
    let inst = random_instance(rng, &ENGINE_SHAPE);
    let store = Arc::new(inst.store.clone());
    let ds = evaluate(&inst.layer, None, &store).map_err(|e| e.to_string())?;
    let mentioned = mentioned(&inst.layer);
    // facts of predicates no rule mentions are not loaded by the engine
    let expected: BTreeSet<GroundFact> = naive_fixpoint(&rules_of(&inst.layer), &inst.store)
        .into_iter()
        .filter(|(p, _)| mentioned.contains(p))
        .collect();
    if ds.fact_set() != expected {
        return Err(format!(
            "derived sets differ for\n{}\nengine-only: {:?}\noracle-only: {:?}",
            render(&inst.layer.program()),
            ds.fact_set().difference(&expected).collect::<Vec<_>>(),
            expected.difference(&ds.fact_set()).collect::<Vec<_>>()
        ));
    }
    for id in ds.fact_ids() {
        for d in &ds.fact(id).derivations {
            if !ds.replay(id, d) {
                return Err(format!("derivation of {} does not replay", ds.fact_text(id)));
            }
        }
    }
    Ok(())
}

/// `min_proof` cost equals the exhaustive minimum for every fact, and the
/// returned tree is valid. Returns the number of facts checked.
pub fn check_optimality(rng: &mut StdRng) -> Result<usize, String> {
    let inst = random_instance(rng, &PROOF_SHAPE);
    let store = Arc::new(inst.store.clone());
    let ds = evaluate(&inst.layer, None, &store).map_err(|e| e.to_string())?;
    let Some(mut oracle) = ProofCostOracle::new(&rules_of(&inst.layer), &inst.store) else {
        return Err("instance too large for the oracle".into());
    };
    let mentioned = mentioned(&inst.layer);
    let mut checked = 0;
    for f in oracle.facts().to_vec() {
        if !mentioned.contains(&f.0) {
            continue;
        }
        let id = ds.find(&f.0, &f.1).ok_or_else(|| format!("{f:?} not derived"))?;
        let j = min_proof(&ds, id).map_err(|e| e.to_string())?;
        j.validate(&ds)?;
        let want = oracle.min_cost(&f).ok_or_else(|| format!("oracle found no proof of {f:?}"))?;
        if j.cost != want {
            return Err(format!(
                "{}: min_proof cost {} but minimum is {want}\n{}",
                ds.fact_text(id),
                j.cost,
                render(&inst.layer.program())
            ));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Answers with the sliced layer equal answers with the full layer.
pub fn check_slice(rng: &mut StdRng) -> Result<(), String> {
    let inst = random_instance(rng, &ENGINE_SHAPE);
    let query = random_query(rng, &inst);
    let store = Arc::new(inst.store.clone());
    let full = evaluate(&inst.layer, Some(&query), &store).map_err(|e| e.to_string())?;
    let (slice, _) = inst.layer.slice_for(&query);
    let sliced = evaluate(&slice, Some(&query), &store).map_err(|e| e.to_string())?;
    let (a, b) = (full.answers("answer_q"), sliced.answers("answer_q"));
    if a != b {
        return Err(format!("query {query}\nfull: {a:?}\nsliced: {b:?}\n{}", render(&inst.layer.program())));
    }
    Ok(())
}

/// The sentence parses, compiles to a safe rule, and at every proper
/// prefix the true next token (or the end) is among the expectations.
pub fn check_sentence(sentence: &str, lexicon: &Lexicon) -> Result<(), String> {
    let tokens = cnl::tokenize(sentence, lexicon).map_err(|e| format!("{sentence}: {e}"))?;
    let ir = cnl::parse(&tokens, lexicon).map_err(|e| format!("{sentence}: {e}"))?;
    ir.check().map_err(|e| format!("{sentence}: {e}"))?;
    let rule = compile(&ir);
    if !rule.is_safe() {
        return Err(format!("{sentence}: unsafe rule {rule}"));
    }
    for i in 0..tokens.len() {
        let exp = cnl::expected_next(&tokens[..i], lexicon);
        if !exp.iter().any(|e| e.admits(&tokens[i])) {
            return Err(format!("{sentence}: token {:?} not in {exp:?} at {i}", tokens[i].surface));
        }
    }
    if !cnl::expected_next(&tokens, lexicon).contains(&Expected::End) {
        return Err(format!("{sentence}: end not expected after the full query"));
    }
    Ok(())
}
