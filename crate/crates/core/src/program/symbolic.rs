//! Classical boolean semantics, written independently of the soft executor
//! so the two can be compared.

use super::{ExecError, Program};
use crate::metaconcept::Metaconcept;

/// Ground-truth facts about one scene (or none) and the ontology.
pub trait SymbolicFacts {
    /// `None` when no scene is attached.
    fn num_objects(&self) -> Option<usize>;
    fn has_concept(&self, object: usize, concept: &str) -> Result<bool, ExecError>;
    fn relation(&self, a: &str, b: &str, m: Metaconcept) -> Result<bool, ExecError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymbolicValue {
    Set(Vec<bool>),
    Bool(bool),
    /// Every object the description picks out.
    Objects(Vec<usize>),
}

pub fn evaluate(program: &Program, facts: &impl SymbolicFacts) -> Result<SymbolicValue, ExecError> {
    Ok(match program {
        Program::Scene => {
            let n = facts.num_objects().ok_or(ExecError::SceneRequired)?;
            SymbolicValue::Set(vec![true; n])
        }
        Program::Filter(child, c) => {
            let set = selected(child, facts)?;
            let mut out = Vec::with_capacity(set.len());
            for (i, keep) in set.into_iter().enumerate() {
                out.push(keep && facts.has_concept(i, c)?);
            }
            SymbolicValue::Set(out)
        }
        Program::Exist(child) => SymbolicValue::Bool(selected(child, facts)?.contains(&true)),
        Program::Locate(child) => {
            let set = selected(child, facts)?;
            SymbolicValue::Objects((0..set.len()).filter(|&i| set[i]).collect())
        }
        Program::MetaVerify(a, b, m) => SymbolicValue::Bool(facts.relation(a, b, *m)?),
    })
}

fn selected(program: &Program, facts: &impl SymbolicFacts) -> Result<Vec<bool>, ExecError> {
    match evaluate(program, facts)? {
        SymbolicValue::Set(s) => Ok(s),
        _ => Err(ExecError::Type(program.name())),
    }
}

/// Boolean answer of a question program.
pub fn answer(program: &Program, facts: &impl SymbolicFacts) -> Result<bool, ExecError> {
    match evaluate(program, facts)? {
        SymbolicValue::Bool(b) => Ok(b),
        _ => Err(ExecError::NotBoolean),
    }
}
