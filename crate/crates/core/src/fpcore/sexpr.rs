//! Position-tracking s-expression reader.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    Str(String, Pos),
    /// `square` records whether the list used brackets.
    List { items: Vec<Sexp>, pos: Pos, square: bool },
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::Str(_, p) => *p,
            Sexp::List { pos, .. } => *pos,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s, _) => write!(f, "{s}"),
            Sexp::Str(s, _) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
            Sexp::List { items, square, .. } => {
                let (open, close) = if *square { ('[', ']') } else { ('(', ')') };
                write!(f, "{open}")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, "{close}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {msg}")]
pub struct SexpError {
    pub pos: Pos,
    pub msg: String,
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn err(&self, pos: Pos, msg: impl Into<String>) -> SexpError {
        SexpError { pos, msg: msg.into() }
    }

    fn read(&mut self) -> Result<Option<Sexp>, SexpError> {
        self.skip_ws();
        let pos = self.pos();
        let Some(&c) = self.chars.peek() else {
            return Ok(None);
        };
        match c {
            '(' | '[' => {
                self.bump();
                let close = if c == '(' { ')' } else { ']' };
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        None => return Err(self.err(pos, format!("unclosed '{c}'"))),
                        Some(&d) if d == close => {
                            self.bump();
                            break;
                        }
                        Some(&d) if d == ')' || d == ']' => {
                            return Err(self.err(self.pos(), format!("mismatched '{d}'")));
                        }
                        _ => items.push(self.read()?.expect("peeked a character")),
                    }
                }
                Ok(Some(Sexp::List { items, pos, square: c == '[' }))
            }
            ')' | ']' => Err(self.err(pos, format!("unexpected '{c}'"))),
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.err(pos, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(e) => s.push(e),
                            None => return Err(self.err(pos, "unterminated string")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                Ok(Some(Sexp::Str(s, pos)))
            }
            _ => {
                let mut s = String::new();
                while let Some(&ch) = self.chars.peek() {
                    if ch.is_whitespace() || "()[]\";".contains(ch) {
                        break;
                    }
                    s.push(ch);
                    self.bump();
                }
                Ok(Some(Sexp::Atom(s, pos)))
            }
        }
    }
}

/// Reads every top-level datum in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut r = Reader { chars: text.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(s) = r.read()? {
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_and_strings() {
        let v = read_all("; comment\n(a [b \"c d\"] 1.5)").unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "(a [b \"c d\"] 1.5)");
        assert_eq!(v[0].pos(), Pos { line: 2, col: 1 });
    }

    #[test]
    fn reports_positions() {
        let e = read_all("(a\n  (b c)").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 1 });
        let e = read_all("(a b))").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 6 });
        let e = read_all("(a (b]").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 6 });
    }
}
