use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::lexicon::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum IrArg {
    Var(VarId),
    Const { name: String, entity_type: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IrAtom {
    pub predicate: String,
    pub args: [IrArg; 2],
}

/// Parsed form of a query: which variable is asked for, and the binary
/// relations constraining it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryIr {
    pub answer: VarId,
    /// Plural noun of the answer's type, used to name the result relation.
    pub answer_noun: String,
    pub vars: BTreeMap<VarId, String>,
    pub atoms: Vec<IrAtom>,
}

impl QueryIr {
    pub fn answer_type(&self) -> &str {
        &self.vars[&self.answer]
    }

    /// Checks the structural invariants, returning a description of the
    /// first violation.
    pub fn check(&self) -> Result<(), String> {
        if !self.vars.contains_key(&self.answer) {
            return Err(format!("answer {} has no type", self.answer));
        }
        let mut mentioned = BTreeSet::new();
        for atom in &self.atoms {
            for arg in &atom.args {
                if let IrArg::Var(v) = arg {
                    if !self.vars.contains_key(v) {
                        return Err(format!("{v} used in {} but not declared", atom.predicate));
                    }
                    mentioned.insert(*v);
                }
            }
        }
        if !mentioned.contains(&self.answer) {
            return Err(format!("answer {} occurs in no atom", self.answer));
        }
        // Connectivity over shared variables, starting from the answer.
        let mut reached = BTreeSet::from([self.answer]);
        loop {
            let before = reached.len();
            for atom in &self.atoms {
                let vars: Vec<VarId> = atom
                    .args
                    .iter()
                    .filter_map(|a| match a {
                        IrArg::Var(v) => Some(*v),
                        IrArg::Const { .. } => None,
                    })
                    .collect();
                if vars.iter().any(|v| reached.contains(v)) {
                    reached.extend(vars);
                }
            }
            if reached.len() == before {
                break;
            }
        }
        if let Some(v) = mentioned.difference(&reached).next() {
            return Err(format!("{v} is not connected to the answer"));
        }
        for atom in &self.atoms {
            let all_const = atom.args.iter().all(|a| matches!(a, IrArg::Const { .. }));
            if all_const {
                return Err(format!("{} mentions no variable", atom.predicate));
            }
        }
        Ok(())
    }

    /// Checks that every atom's argument types agree with the frame that
    /// owns its predicate.
    pub fn check_types(&self, lexicon: &Lexicon) -> Result<(), String> {
        for atom in &self.atoms {
            let frame = lexicon
                .frames()
                .iter()
                .find(|f| f.predicate == atom.predicate)
                .ok_or_else(|| format!("no frame for {}", atom.predicate))?;
            let (first, second) = if frame.object_first {
                (&frame.object_type, &frame.subject_type)
            } else {
                (&frame.subject_type, &frame.object_type)
            };
            for (arg, want) in atom.args.iter().zip([first, second]) {
                let got = match arg {
                    IrArg::Var(v) => &self.vars[v],
                    IrArg::Const { entity_type, .. } => entity_type,
                };
                if got != want {
                    return Err(format!("{} expects {want}, got {got}", atom.predicate));
                }
            }
        }
        Ok(())
    }
}
