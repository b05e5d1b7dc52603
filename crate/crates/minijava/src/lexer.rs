//! Tokenizer for the supported Java subset.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Long(i64),
    Float(f64),
    Double(f64),
    Char(char),
    Str(String),
    /// Operators and punctuation, longest match first.
    Op(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Int(v) => write!(f, "{v}"),
            Tok::Long(v) => write!(f, "{v}L"),
            Tok::Float(v) => write!(f, "{v}f"),
            Tok::Double(v) => write!(f, "{v}"),
            Tok::Char(c) => write!(f, "'{c}'"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Op(o) => write!(f, "{o}"),
            Tok::Eof => write!(f, "<EOF>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// 1-based line.
    pub line: u32,
    /// 1-based column.
    pub col: u32,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

const OPS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "<<", ">>", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&",
    "|", "^", "%",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0, line: 1, line_start: 0 }
    }

    fn col(&self, at: usize) -> u32 {
        (self.src[self.line_start..at].chars().count() + 1) as u32
    }

    fn err(&self, at: usize, message: &str) -> LexError {
        LexError { line: self.line, col: self.col(at), message: message.to_string() }
    }

    fn peek(&self, off: usize) -> u8 {
        *self.bytes.get(self.pos + off).unwrap_or(&0)
    }

    fn newline(&mut self, at: usize) {
        self.line += 1;
        self.line_start = at + 1;
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let start = self.pos;
            let (line, col) = (self.line, self.col(start));
            if self.pos >= self.bytes.len() {
                out.push(Token { tok: Tok::Eof, line, col, start, end: start });
                return Ok(out);
            }
            let c = self.peek(0);
            let tok = if c == b'"' {
                self.string()?
            } else if c == b'\'' {
                self.char_lit()?
            } else if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_ascii_digit()) {
                self.number()?
            } else if c == b'_' || c == b'$' || c.is_ascii_alphabetic() || c >= 0x80 {
                self.ident()
            } else {
                let rest = &self.src[self.pos..];
                match OPS.iter().find(|op| rest.starts_with(**op)) {
                    Some(op) => {
                        self.pos += op.len();
                        Tok::Op(op)
                    }
                    None => return Err(self.err(start, "illegal character")),
                }
            };
            out.push(Token { tok, line, col, start, end: self.pos });
        }
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        while self.pos < self.bytes.len() {
            let c = self.peek(0);
            if c == b'\n' {
                self.newline(self.pos);
                self.pos += 1;
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'/' && self.peek(1) == b'/' {
                while self.pos < self.bytes.len() && self.peek(0) != b'\n' {
                    self.pos += 1;
                }
            } else if c == b'/' && self.peek(1) == b'*' {
                let start = self.pos;
                self.pos += 2;
                loop {
                    if self.pos >= self.bytes.len() {
                        return Err(self.err(start, "unclosed comment"));
                    }
                    if self.peek(0) == b'*' && self.peek(1) == b'/' {
                        self.pos += 2;
                        break;
                    }
                    if self.peek(0) == b'\n' {
                        self.newline(self.pos);
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        Ok(())
    }

    fn escape(&mut self, start: usize) -> Result<char, LexError> {
        // positioned just after the backslash
        let c = self.peek(0);
        self.pos += 1;
        Ok(match c {
            b'n' => '\n',
            b't' => '\t',
            b'r' => '\r',
            b'b' => '\u{8}',
            b'f' => '\u{c}',
            b'0' => '\0',
            b'\\' => '\\',
            b'\'' => '\'',
            b'"' => '"',
            b'u' => {
                while self.peek(0) == b'u' {
                    self.pos += 1;
                }
                let hex = self.src.get(self.pos..self.pos + 4).ok_or_else(|| self.err(start, "illegal unicode escape"))?;
                let v = u32::from_str_radix(hex, 16).map_err(|_| self.err(start, "illegal unicode escape"))?;
                self.pos += 4;
                char::from_u32(v).unwrap_or('\u{fffd}')
            }
            _ => return Err(self.err(start, "illegal escape character")),
        })
    }

    fn string(&mut self) -> Result<Tok, LexError> {
        let start = self.pos;
        self.pos += 1;
        let mut s = String::new();
        loop {
            if self.pos >= self.bytes.len() || self.peek(0) == b'\n' {
                return Err(self.err(start, "unclosed string literal"));
            }
            let c = self.peek(0);
            if c == b'"' {
                self.pos += 1;
                return Ok(Tok::Str(s));
            }
            if c == b'\\' {
                self.pos += 1;
                s.push(self.escape(start)?);
                continue;
            }
            let ch = self.src[self.pos..].chars().next().unwrap();
            s.push(ch);
            self.pos += ch.len_utf8();
        }
    }

    fn char_lit(&mut self) -> Result<Tok, LexError> {
        let start = self.pos;
        self.pos += 1;
        let c = match self.peek(0) {
            b'\\' => {
                self.pos += 1;
                self.escape(start)?
            }
            b'\'' | b'\n' | 0 => return Err(self.err(start, "empty character literal")),
            _ => {
                let ch = self.src[self.pos..].chars().next().unwrap();
                self.pos += ch.len_utf8();
                ch
            }
        };
        if self.peek(0) != b'\'' {
            return Err(self.err(start, "unclosed character literal"));
        }
        self.pos += 1;
        Ok(Tok::Char(c))
    }

    fn number(&mut self) -> Result<Tok, LexError> {
        let start = self.pos;
        if self.peek(0) == b'0' && matches!(self.peek(1), b'x' | b'X') {
            self.pos += 2;
            while self.peek(0).is_ascii_hexdigit() || self.peek(0) == b'_' {
                self.pos += 1;
            }
            let digits: String = self.src[start + 2..self.pos].chars().filter(|c| *c != '_').collect();
            let v = i64::from_str_radix(&digits, 16).map_err(|_| self.err(start, "malformed number"))?;
            if matches!(self.peek(0), b'l' | b'L') {
                self.pos += 1;
                return Ok(Tok::Long(v));
            }
            return Ok(Tok::Int(v as u32 as i32 as i64));
        }
        let mut is_float = false;
        while self.peek(0).is_ascii_digit() || self.peek(0) == b'_' {
            self.pos += 1;
        }
        if self.peek(0) == b'.' && self.peek(1).is_ascii_digit() {
            is_float = true;
            self.pos += 1;
            while self.peek(0).is_ascii_digit() || self.peek(0) == b'_' {
                self.pos += 1;
            }
        } else if self.peek(0) == b'.' && !self.peek(1).is_ascii_alphabetic() {
            // `1.` is a valid double literal
            is_float = true;
            self.pos += 1;
        }
        if matches!(self.peek(0), b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(0), b'+' | b'-') {
                self.pos += 1;
            }
            if self.peek(0).is_ascii_digit() {
                is_float = true;
                while self.peek(0).is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.src[start..self.pos].chars().filter(|c| *c != '_').collect();
        let suffix = self.peek(0);
        let (line, col) = (self.line, self.col(start));
        let bad = || LexError { line, col, message: "malformed number".into() };
        match suffix {
            b'l' | b'L' if !is_float => {
                self.pos += 1;
                Ok(Tok::Long(text.parse().map_err(|_| bad())?))
            }
            b'f' | b'F' => {
                self.pos += 1;
                Ok(Tok::Float(text.parse().map_err(|_| bad())?))
            }
            b'd' | b'D' => {
                self.pos += 1;
                Ok(Tok::Double(text.parse().map_err(|_| bad())?))
            }
            _ if is_float => Ok(Tok::Double(text.parse().map_err(|_| bad())?)),
            _ => {
                let v: i64 = text.parse().map_err(|_| bad())?;
                if v > i32::MAX as i64 + 1 {
                    return Err(LexError { line: self.line, col: self.col(start), message: "integer number too large".into() });
                }
                Ok(Tok::Int(v))
            }
        }
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while let Some(ch) = self.src[self.pos..].chars().next() {
            if ch == '_' || ch == '$' || ch.is_alphanumeric() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
        Tok::Ident(self.src[start..self.pos].to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn literals_and_operators() {
        assert_eq!(
            kinds("x >>= 3L + 1.5f - 'a' // c\n\"s\\n\""),
            vec![
                Tok::Ident("x".into()),
                Tok::Op(">>="),
                Tok::Long(3),
                Tok::Op("+"),
                Tok::Float(1.5),
                Tok::Op("-"),
                Tok::Char('a'),
                Tok::Str("s\n".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn line_numbers_follow_block_comments() {
        let toks = tokenize("/* a\n b */ x\ny").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (2, 7));
        assert_eq!(toks[1].line, 3);
    }

    #[test]
    fn unclosed_string_is_an_error() {
        let e = tokenize("s = \"abc\n").unwrap_err();
        assert_eq!(e.message, "unclosed string literal");
        assert_eq!(e.line, 1);
    }
}
