use super::Program;
use crate::metaconcept::Metaconcept;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    /// `offset` is a 0-based byte offset into the source text.
    #[error("syntax error at byte {offset} (column {}): {message}", offset + 1)]
    Syntax { offset: usize, message: String },
    #[error("type error at {path}: {message}")]
    Type { path: String, message: String },
}

impl ProgramError {
    fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ProgramError::Syntax { offset, message: message.into() }
    }

    /// 1-based column of a syntax error.
    pub fn column(&self) -> Option<usize> {
        match self {
            ProgramError::Syntax { offset, .. } => Some(offset + 1),
            ProgramError::Type { .. } => None,
        }
    }
}

/// Parses and type-checks program text such as
/// `Exist(Filter(Scene(), red))` or `MetaVerify(sphere, ball, synonym)`.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    check_balance(text)?;
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let prog = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(ProgramError::syntax(p.pos, "unexpected trailing input"));
    }
    prog.typecheck()?;
    Ok(prog)
}

/// Reports unbalanced parentheses up front, so a missing `)` is flagged at
/// the end of the input rather than at whatever token happens to follow.
fn check_balance(text: &str) -> Result<(), ProgramError> {
    let mut open = Vec::new();
    for (i, b) in text.bytes().enumerate() {
        match b {
            b'(' => open.push(i),
            b')' if open.pop().is_none() => return Err(ProgramError::syntax(i, "unmatched `)`")),
            _ => {}
        }
    }
    match open.last() {
        Some(&at) => Err(ProgramError::syntax(text.len(), format!("unclosed `(` opened at byte {at}"))),
        None => Ok(()),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn describe_next(&self) -> String {
        match self.src.get(self.pos) {
            None => "end of input".into(),
            Some(&b) if b.is_ascii_graphic() => format!("`{}`", b as char),
            Some(&b) => format!("byte 0x{b:02x}"),
        }
    }

    fn expect(&mut self, ch: u8) -> Result<(), ProgramError> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ProgramError::syntax(self.pos, format!("expected `{}`, found {}", ch as char, self.describe_next())))
        }
    }

    fn word(&mut self) -> Result<(usize, &str), ProgramError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && is_word_byte(self.src[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ProgramError::syntax(start, format!("expected a name, found {}", self.describe_next())));
        }
        // word bytes are ASCII, so this slice is valid UTF-8
        Ok((start, std::str::from_utf8(&self.src[start..self.pos]).expect("ascii")))
    }

    fn ident(&mut self) -> Result<String, ProgramError> {
        let (start, w) = self.word()?;
        let ok = w.as_bytes()[0].is_ascii_lowercase()
            && w.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if !ok {
            return Err(ProgramError::syntax(start, format!("`{w}` is not a lowercase identifier")));
        }
        Ok(w.to_string())
    }

    fn expr(&mut self) -> Result<Program, ProgramError> {
        let (start, op) = self.word()?;
        let op = op.to_string();
        if !matches!(op.as_str(), "Scene" | "Filter" | "Exist" | "MetaVerify" | "Locate") {
            return Err(ProgramError::syntax(
                start,
                format!("unknown operator `{op}` (expected Scene, Filter, Exist, MetaVerify or Locate)"),
            ));
        }
        self.expect(b'(')?;
        let node = match op.as_str() {
            "Scene" => Program::Scene,
            "Filter" => {
                let child = self.expr()?;
                self.expect(b',')?;
                Program::Filter(Box::new(child), self.ident()?)
            }
            "Exist" => Program::Exist(Box::new(self.expr()?)),
            "Locate" => Program::Locate(Box::new(self.expr()?)),
            "MetaVerify" => {
                let a = self.ident()?;
                self.expect(b',')?;
                let b = self.ident()?;
                self.expect(b',')?;
                self.skip_ws();
                let at = self.pos;
                let m_name = self.ident()?;
                let m: Metaconcept = m_name
                    .parse()
                    .map_err(|_| ProgramError::syntax(at, format!("unknown metaconcept `{m_name}`")))?;
                Program::MetaVerify(a, b, m)
            }
            _ => unreachable!("operator names checked above"),
        };
        self.expect(b')')?;
        Ok(node)
    }
}
