//! Reasoning programs: AST, text syntax, soft-score executor and a
//! brute-force boolean evaluator.

mod exec;
mod parser;
pub mod symbolic;

pub use exec::{
    bce_loss, execute, execute_backward, object_scores, ConceptScorer, ExactScorer, ExecError, ExecutionResult, ModelScorer,
};
pub use parser::{parse_program, ProgramError};

use crate::metaconcept::Metaconcept;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Program {
    Scene,
    Filter(Box<Program>, String),
    Exist(Box<Program>),
    MetaVerify(String, String, Metaconcept),
    Locate(Box<Program>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueType {
    ObjectSet,
    Bool,
    Object,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::ObjectSet => "object set",
            ValueType::Bool => "boolean",
            ValueType::Object => "object",
        })
    }
}

impl Program {
    pub fn filter(child: Program, concept: &str) -> Program {
        Program::Filter(Box::new(child), concept.to_string())
    }

    pub fn exist(child: Program) -> Program {
        Program::Exist(Box::new(child))
    }

    pub fn locate(child: Program) -> Program {
        Program::Locate(Box::new(child))
    }

    pub fn meta_verify(a: &str, b: &str, m: Metaconcept) -> Program {
        Program::MetaVerify(a.to_string(), b.to_string(), m)
    }

    /// `Filter(...Filter(Scene(), c1)..., cn)`.
    pub fn filter_chain<S: AsRef<str>>(concepts: &[S]) -> Program {
        concepts.iter().fold(Program::Scene, |p, c| Program::filter(p, c.as_ref()))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Program::Scene => "Scene",
            Program::Filter(..) => "Filter",
            Program::Exist(_) => "Exist",
            Program::MetaVerify(..) => "MetaVerify",
            Program::Locate(_) => "Locate",
        }
    }

    pub fn output_type(&self) -> ValueType {
        match self {
            Program::Scene | Program::Filter(..) => ValueType::ObjectSet,
            Program::Exist(_) | Program::MetaVerify(..) => ValueType::Bool,
            Program::Locate(_) => ValueType::Object,
        }
    }

    /// Whether evaluation needs a scene.
    pub fn uses_scene(&self) -> bool {
        !matches!(self, Program::MetaVerify(..))
    }

    /// Concept names in order of appearance.
    pub fn concepts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_concepts(&mut out);
        out
    }

    fn collect_concepts<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Program::Scene => {}
            Program::Filter(child, c) => {
                child.collect_concepts(out);
                out.push(c);
            }
            Program::Exist(child) | Program::Locate(child) => child.collect_concepts(out),
            Program::MetaVerify(a, b, _) => {
                out.push(a);
                out.push(b);
            }
        }
    }

    pub fn metaconcept(&self) -> Option<Metaconcept> {
        match self {
            Program::MetaVerify(_, _, m) => Some(*m),
            _ => None,
        }
    }

    /// Checks operator signatures. A complete program must produce a
    /// boolean or an object, and MetaVerify may only appear at the root.
    pub fn typecheck(&self) -> Result<ValueType, ProgramError> {
        let t = self.check_node("$", true)?;
        if t == ValueType::ObjectSet {
            return Err(ProgramError::Type {
                path: "$".into(),
                message: format!("{} returns an object set; a program must return a boolean or an object", self.name()),
            });
        }
        Ok(t)
    }

    fn check_node(&self, path: &str, is_root: bool) -> Result<ValueType, ProgramError> {
        let child_path = format!("{path}.0");
        let expect_set = |child: &Program| -> Result<(), ProgramError> {
            let t = child.check_node(&child_path, false)?;
            if t == ValueType::ObjectSet {
                Ok(())
            } else {
                Err(ProgramError::Type {
                    path: child_path.clone(),
                    message: format!("{} expects an object set, found {} from {}", self.name(), t, child.name()),
                })
            }
        };
        match self {
            Program::Scene => {}
            Program::Filter(child, _) | Program::Exist(child) | Program::Locate(child) => expect_set(child)?,
            Program::MetaVerify(..) if !is_root => {
                return Err(ProgramError::Type {
                    path: path.to_string(),
                    message: "MetaVerify must be the root of a program".into(),
                })
            }
            Program::MetaVerify(..) => {}
        }
        Ok(self.output_type())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Scene => write!(f, "Scene()"),
            Program::Filter(child, c) => write!(f, "Filter({child}, {c})"),
            Program::Exist(child) => write!(f, "Exist({child})"),
            Program::MetaVerify(a, b, m) => write!(f, "MetaVerify({a}, {b}, {m})"),
            Program::Locate(child) => write!(f, "Locate({child})"),
        }
    }
}

impl std::str::FromStr for Program {
    type Err = ProgramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}
