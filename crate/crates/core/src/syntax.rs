//! A tolerant Java lexer and outline parser.
//!
//! The outline covers what the pipeline edits or reads: package and import
//! lines, type declarations, members with byte spans, and statement spans
//! inside method bodies. Expressions are never parsed, only bracketed.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
    /// 1-based line of the first byte.
    pub line: u32,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokKind::LineComment | TokKind::BlockComment)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct LexError {
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub message: String,
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError { line: e.line, message: e.message }
    }
}

/// Tokenizes `src`, keeping comments as tokens.
pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let count_lines = |from: usize, to: usize| bytes[from..to].iter().filter(|&&b| b == b'\n').count() as u32;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let start_line = line;
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let kind = if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            TokKind::LineComment
        } else if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(off) => i = i + 2 + off + 2,
                None => return Err(LexError { line, message: "unclosed comment".into() }),
            }
            TokKind::BlockComment
        } else if src[i..].starts_with("\"\"\"") {
            match src[i + 3..].find("\"\"\"") {
                Some(off) => {
                    let mut end = i + 3 + off;
                    // An escaped quote right before the closing delimiter is content.
                    while end < bytes.len() && bytes[end] == b'"' && src[i + 3..end].ends_with('\\') {
                        match src[end + 1..].find("\"\"\"") {
                            Some(o) => end = end + 1 + o,
                            None => return Err(LexError { line, message: "unclosed text block".into() }),
                        }
                    }
                    i = end + 3;
                }
                None => return Err(LexError { line, message: "unclosed text block".into() }),
            }
            TokKind::Str
        } else if c == b'"' || c == b'\'' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        let what = if c == b'"' { "unclosed string literal" } else { "unclosed character literal" };
                        return Err(LexError { line, message: what.into() });
                    }
                    Some(b'\\') => i += 2,
                    Some(&b) if b == c => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            if c == b'"' {
                TokKind::Str
            } else {
                TokKind::Char
            }
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i += 1;
            while i < bytes.len() {
                let b = bytes[i];
                let signed_exponent =
                    (b == b'+' || b == b'-') && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P') && !src[start..i].starts_with("0x");
                if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || signed_exponent {
                    i += 1;
                } else {
                    break;
                }
            }
            TokKind::Number
        } else if c == b'_' || c == b'$' || c.is_ascii_alphabetic() || c >= 0x80 {
            let rest = &src[i..];
            let mut len = 0;
            for ch in rest.chars() {
                if ch == '_' || ch == '$' || ch.is_alphanumeric() {
                    len += ch.len_utf8();
                } else {
                    break;
                }
            }
            if len == 0 {
                let ch = rest.chars().next().unwrap_or('?');
                return Err(LexError { line, message: format!("illegal character: '{ch}'") });
            }
            i += len;
            TokKind::Ident
        } else if b"{}()[];,.=<>!~?:+-*/&|^%@".contains(&c) {
            i += 1;
            TokKind::Punct
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(LexError { line, message: format!("illegal character: '{ch}'") });
        };
        line += count_lines(start, i);
        toks.push(Token { kind, start, end: i, line: start_line });
    }
    Ok(toks)
}

/// Tokens without comments.
pub fn code_tokens(src: &str) -> Result<Vec<Token>, LexError> {
    Ok(lex(src)?.into_iter().filter(|t| !t.is_comment()).collect())
}

/// Concatenates token texts, keeping a single space where the source had a gap.
pub fn render_tokens(src: &str, toks: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in toks.iter().enumerate() {
        if i > 0 && toks[i - 1].end != t.start {
            out.push(' ');
        }
        out.push_str(t.text(src));
    }
    out
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// 1-based line number of byte offset `pos`.
pub fn line_of(src: &str, pos: usize) -> u32 {
    src.as_bytes()[..pos.min(src.len())].iter().filter(|&&b| b == b'\n').count() as u32 + 1
}

/// Byte offset of the start of 1-based `line`.
pub fn line_start(src: &str, line: u32) -> usize {
    if line <= 1 {
        return 0;
    }
    let mut seen = 1;
    for (i, b) in src.bytes().enumerate() {
        if b == b'\n' {
            seen += 1;
            if seen == line {
                return i + 1;
            }
        }
    }
    src.len()
}

/// Offset just past the end of the line containing `pos`, excluding the newline.
pub fn line_end(src: &str, pos: usize) -> usize {
    src[pos..].find('\n').map_or(src.len(), |o| pos + o)
}

/// Leading whitespace of the line containing `pos`.
pub fn indent_at(src: &str, pos: usize) -> &str {
    let start = src[..pos].rfind('\n').map_or(0, |i| i + 1);
    let line = &src[start..];
    let len = line.len() - line.trim_start_matches([' ', '\t']).len();
    &line[..len]
}

const MODIFIERS: &[&str] = &[
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "synchronized",
    "native",
    "transient",
    "volatile",
    "strictfp",
    "default",
    "sealed",
    "non-sealed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Import {
    pub path: String,
    pub is_static: bool,
    pub line: u32,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub kind: TypeKind,
    pub name: String,
    pub modifiers: Vec<String>,
    /// Byte range of the whole declaration including annotations.
    pub start: usize,
    pub end: usize,
    /// Byte offsets of the body's `{` and `}`.
    pub body_open: usize,
    pub body_close: usize,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemberKind {
    Method(Method),
    Field { names: Vec<String> },
    Type(TypeDecl),
    Initializer,
    EnumConstants,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    /// `None` for constructors.
    pub return_type: Option<String>,
    pub param_types: Vec<String>,
    /// Byte offsets of the body's `{` and `}`; `None` for abstract or native methods.
    pub body: Option<(usize, usize)>,
    /// Start of the declaration proper, after annotations.
    pub header_start: usize,
    /// End of the header, just before the body or `;`.
    pub header_end: usize,
}

impl Method {
    /// `name(T1,T2)`, used as a stable overload key.
    pub fn key(&self) -> String {
        format!("{}({})", self.name, self.param_types.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub kind: MemberKind,
    pub annotations: Vec<String>,
    pub modifiers: Vec<String>,
    /// Byte range including leading annotations and the closing `}` or `;`.
    pub start: usize,
    pub end: usize,
}

impl Member {
    pub fn method(&self) -> Option<&Method> {
        match &self.kind {
            MemberKind::Method(m) => Some(m),
            _ => None,
        }
    }

    pub fn has_annotation(&self, name: &str) -> bool {
        self.annotations.iter().any(|a| a == name || a.rsplit('.').next() == Some(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outline {
    pub package: Option<String>,
    /// Byte offset just past the package declaration, when present.
    pub package_end: Option<usize>,
    pub imports: Vec<Import>,
    pub types: Vec<TypeDecl>,
}

impl Outline {
    pub fn primary_type(&self) -> Option<&TypeDecl> {
        self.types.iter().find(|t| t.modifiers.iter().any(|m| m == "public")).or_else(|| self.types.first())
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_text(&self) -> &'a str {
        self.toks.get(self.pos).map_or("", |t| t.text(self.src))
    }

    fn text_at(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| t.text(self.src))
    }

    fn line(&self) -> u32 {
        self.toks.get(self.pos).or(self.toks.last()).map_or(1, |t| t.line)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.line(), message: message.into() })
    }

    fn expect(&mut self, text: &str) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if t.text(self.src) == text => {
                let t = *t;
                self.pos += 1;
                Ok(t)
            }
            Some(_) => self.err(format!("'{text}' expected")),
            None => self.err("reached end of file while parsing"),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().copied() {
            Some(t) if t.kind == TokKind::Ident => {
                self.pos += 1;
                Ok(t.text(self.src).to_string())
            }
            _ => self.err("<identifier> expected"),
        }
    }

    fn dotted(&mut self) -> Result<String, ParseError> {
        let mut s = self.ident()?;
        while self.peek_text() == "." {
            self.pos += 1;
            if self.peek_text() == "*" {
                self.pos += 1;
                s.push_str(".*");
                break;
            }
            s.push('.');
            s.push_str(&self.ident()?);
        }
        Ok(s)
    }

    /// Index of the token closing the bracket opened at `open`.
    fn matching(&self, open: usize) -> Result<usize, ParseError> {
        let mut depth = 0i32;
        for i in open..self.toks.len() {
            match self.text_at(i) {
                "(" | "{" | "[" => depth += 1,
                ")" | "}" | "]" => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(i);
                    }
                    if depth < 0 {
                        break;
                    }
                }
                _ => {}
            }
        }
        Err(ParseError { line: self.toks[open].line, message: "reached end of file while parsing".into() })
    }

    fn skip_balanced(&mut self) -> Result<usize, ParseError> {
        let close = self.matching(self.pos)?;
        self.pos = close + 1;
        Ok(close)
    }

    /// Skips a `<...>` group starting at the current `<`.
    fn skip_angles(&mut self) -> Result<(), ParseError> {
        let mut depth = 0;
        while let Some(t) = self.peek() {
            match t.text(self.src) {
                "<" => depth += 1,
                ">" => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return Ok(());
                    }
                }
                "{" | "}" | ";" => break,
                _ => {}
            }
            self.pos += 1;
        }
        self.err("'>' expected")
    }

    fn annotations(&mut self) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        while self.peek_text() == "@" && self.text_at(self.pos + 1) != "interface" {
            self.pos += 1;
            out.push(self.dotted()?);
            if self.peek_text() == "(" {
                self.skip_balanced()?;
            }
        }
        Ok(out)
    }

    fn modifiers(&mut self) -> Result<(Vec<String>, Vec<String>), ParseError> {
        let mut anns = Vec::new();
        let mut mods = Vec::new();
        loop {
            anns.extend(self.annotations()?);
            let t = self.peek_text();
            if t == "non" && self.text_at(self.pos + 1) == "-" && self.text_at(self.pos + 2) == "sealed" {
                self.pos += 3;
                mods.push("non-sealed".to_string());
            } else if MODIFIERS.contains(&t) && !(t == "default" && self.text_at(self.pos + 1) == ":") {
                self.pos += 1;
                mods.push(t.to_string());
            } else {
                break;
            }
        }
        Ok((anns, mods))
    }

    fn unit(&mut self) -> Result<Outline, ParseError> {
        let mut outline = Outline { package: None, package_end: None, imports: Vec::new(), types: Vec::new() };
        let save = self.pos;
        let anns = self.annotations()?;
        if self.peek_text() == "package" {
            self.pos += 1;
            outline.package = Some(self.dotted()?);
            outline.package_end = Some(self.expect(";")?.end);
        } else {
            self.pos = save;
            let _ = anns;
        }
        while self.peek_text() == "import" {
            let start = self.toks[self.pos].start;
            let line = self.toks[self.pos].line;
            self.pos += 1;
            let is_static = self.peek_text() == "static";
            if is_static {
                self.pos += 1;
            }
            let path = self.dotted()?;
            let end = self.expect(";")?.end;
            outline.imports.push(Import { path, is_static, line, start, end });
        }
        while self.peek().is_some() {
            if self.peek_text() == ";" {
                self.pos += 1;
                continue;
            }
            let start = self.toks[self.pos].start;
            let (_, mods) = self.modifiers()?;
            match self.type_decl(start, mods)? {
                Some(t) => outline.types.push(t),
                None => return self.err("class, interface, or enum expected"),
            }
        }
        Ok(outline)
    }

    fn type_decl(&mut self, start: usize, modifiers: Vec<String>) -> Result<Option<TypeDecl>, ParseError> {
        let kind = match self.peek_text() {
            "class" => TypeKind::Class,
            "interface" => TypeKind::Interface,
            "enum" => TypeKind::Enum,
            "record" if self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokKind::Ident) => TypeKind::Record,
            "@" if self.text_at(self.pos + 1) == "interface" => {
                self.pos += 1;
                TypeKind::Annotation
            }
            _ => return Ok(None),
        };
        self.pos += 1;
        let name = self.ident()?;
        while self.peek().is_some() && self.peek_text() != "{" {
            match self.peek_text() {
                "(" => {
                    self.skip_balanced()?;
                }
                "<" => self.skip_angles()?,
                ";" | "}" => return self.err("'{' expected"),
                _ => self.pos += 1,
            }
        }
        let open_idx = self.pos;
        let open = self.expect("{")?;
        let close_idx = self.matching(open_idx)?;
        let mut members = Vec::new();
        if kind == TypeKind::Enum {
            let cstart = self.pos;
            while self.pos < close_idx && self.peek_text() != ";" {
                match self.peek_text() {
                    "(" | "{" => {
                        self.skip_balanced()?;
                    }
                    _ => self.pos += 1,
                }
            }
            if self.pos > cstart {
                let end = self.toks[self.pos - 1].end;
                members.push(Member {
                    kind: MemberKind::EnumConstants,
                    annotations: Vec::new(),
                    modifiers: Vec::new(),
                    start: self.toks[cstart].start,
                    end,
                });
            }
            if self.pos < close_idx {
                self.pos += 1;
            }
        }
        while self.pos < close_idx {
            if self.peek_text() == ";" {
                self.pos += 1;
                continue;
            }
            members.push(self.member(close_idx)?);
        }
        let close = self.toks[close_idx];
        self.pos = close_idx + 1;
        Ok(Some(TypeDecl { kind, name, modifiers, start, end: close.end, body_open: open.start, body_close: close.start, members }))
    }

    fn member(&mut self, limit: usize) -> Result<Member, ParseError> {
        let start = self.toks[self.pos].start;
        let (annotations, modifiers) = self.modifiers()?;
        if let Some(t) = self.type_decl(start, modifiers.clone())? {
            let end = t.end;
            return Ok(Member { kind: MemberKind::Type(t), annotations, modifiers, start, end });
        }
        if self.peek_text() == "{" {
            let close = self.skip_balanced()?;
            return Ok(Member { kind: MemberKind::Initializer, annotations, modifiers, start, end: self.toks[close].end });
        }
        let header_start = match self.peek() {
            Some(t) => t.start,
            None => return self.err("reached end of file while parsing"),
        };
        if self.peek_text() == "<" {
            self.skip_angles()?;
        }
        let decl_first = self.pos;
        // Find the token that decides between a method and a field.
        let mut i = self.pos;
        let mut angle = 0i32;
        while i < limit {
            match self.text_at(i) {
                "<" => angle += 1,
                ">" => angle -= 1,
                "(" | "=" | ";" | "{" | "," if angle <= 0 => break,
                "}" => break,
                _ => {}
            }
            i += 1;
        }
        match self.text_at(i) {
            "(" => {
                if i == decl_first || self.toks[i - 1].kind != TokKind::Ident {
                    return self.err("<identifier> expected");
                }
                let name = self.text_at(i - 1).to_string();
                let return_type = if i - 1 > decl_first { Some(render_tokens(self.src, &self.toks[decl_first..i - 1])) } else { None };
                self.pos = i;
                let close = self.matching(i)?;
                let param_types = self.param_types(i + 1, close)?;
                self.pos = close + 1;
                while self.pos < limit && !matches!(self.peek_text(), "{" | ";") {
                    self.pos += 1;
                }
                let header_end = self.toks[self.pos - 1].end;
                let (body, end) = match self.peek_text() {
                    "{" => {
                        let open = self.pos;
                        let close = self.skip_balanced()?;
                        (Some((self.toks[open].start, self.toks[close].start)), self.toks[close].end)
                    }
                    ";" => {
                        let end = self.toks[self.pos].end;
                        self.pos += 1;
                        (None, end)
                    }
                    _ => return self.err("';' expected"),
                };
                let method = Method { name, return_type, param_types, body, header_start, header_end };
                Ok(Member { kind: MemberKind::Method(method), annotations, modifiers, start, end })
            }
            "=" | ";" | "," => {
                let mut names = Vec::new();
                let mut depth = 0i32;
                let mut expect_name = true;
                let mut prev_ident: Option<String> = None;
                while self.pos < limit {
                    let t = self.peek_text();
                    match t {
                        "(" | "{" | "[" => depth += 1,
                        ")" | "}" | "]" => depth -= 1,
                        "=" if depth == 0 && expect_name => {
                            names.extend(prev_ident.take());
                            expect_name = false;
                        }
                        "," if depth == 0 => {
                            if expect_name {
                                names.extend(prev_ident.take());
                            }
                            expect_name = true;
                        }
                        ";" if depth == 0 => {
                            if expect_name {
                                names.extend(prev_ident.take());
                            }
                            let end = self.toks[self.pos].end;
                            self.pos += 1;
                            return Ok(Member { kind: MemberKind::Field { names }, annotations, modifiers, start, end });
                        }
                        _ => {}
                    }
                    if depth == 0 && expect_name && self.toks[self.pos].kind == TokKind::Ident {
                        prev_ident = Some(t.to_string());
                    }
                    self.pos += 1;
                }
                self.err("';' expected")
            }
            _ => self.err("<identifier> expected"),
        }
    }

    fn param_types(&self, from: usize, to: usize) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut seg_start = from;
        for i in from..=to {
            let t = if i == to { "," } else { self.text_at(i) };
            match t {
                "<" | "(" => depth += 1,
                ">" | ")" => depth -= 1,
                "," if depth == 0 => {
                    if i > seg_start {
                        out.push(self.param_type(seg_start, i)?);
                    }
                    seg_start = i + 1;
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn param_type(&self, from: usize, to: usize) -> Result<String, ParseError> {
        let mut i = from;
        loop {
            if self.text_at(i) == "@" {
                i += 1;
                while i < to && (self.toks[i].kind == TokKind::Ident || self.text_at(i) == ".") {
                    i += 1;
                }
                if self.text_at(i) == "(" {
                    i = self.matching(i)? + 1;
                }
            } else if self.text_at(i) == "final" {
                i += 1;
            } else {
                break;
            }
        }
        // Trailing `[]` after the name belong to the type.
        let mut end = to;
        let mut dims = String::new();
        while end >= i + 2 && self.text_at(end - 1) == "]" && self.text_at(end - 2) == "[" {
            dims.push_str("[]");
            end -= 2;
        }
        if end <= i + 1 || self.toks[end - 1].kind != TokKind::Ident {
            // A receiver parameter or a lambda-like oddity: keep the text as is.
            if end > i {
                return Ok(render_tokens(self.src, &self.toks[i..end]) + &dims);
            }
            return Err(ParseError { line: self.toks[from.min(self.toks.len() - 1)].line, message: "<identifier> expected".into() });
        }
        Ok(render_tokens(self.src, &self.toks[i..end - 1]) + &dims)
    }
}

/// Parses the outline of a compilation unit.
pub fn parse_outline(src: &str) -> Result<Outline, ParseError> {
    let toks = code_tokens(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    p.unit()
}

/// Visits every type declaration, nested ones included, outermost first.
pub fn walk_types<'o>(types: &'o [TypeDecl], out: &mut Vec<&'o TypeDecl>) {
    for t in types {
        out.push(t);
        for m in &t.members {
            if let MemberKind::Type(inner) = &m.kind {
                walk_types(std::slice::from_ref(inner), out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtKind {
    Block,
    Simple,
    If,
    Loop,
    Try,
    Switch,
    Labeled,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatchClause {
    pub start: usize,
    pub end: usize,
    pub types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TryParts {
    /// Byte offsets of the try block's `{` and `}`.
    pub body: (usize, usize),
    pub catches: Vec<CatchClause>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub start: usize,
    /// Exclusive end, just past the closing `;` or `}`.
    pub end: usize,
    pub start_line: u32,
    pub end_line: u32,
    pub children: Vec<Stmt>,
    pub try_parts: Option<TryParts>,
}

struct StmtParser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
}

impl<'a> StmtParser<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| t.text(self.src))
    }

    fn fail<T>(&self) -> Result<T, ParseError> {
        let line = self.toks.get(self.pos).or(self.toks.last()).map_or(1, |t| t.line);
        Err(ParseError { line, message: "statement expected".into() })
    }

    fn matching(&self, open: usize) -> Result<usize, ParseError> {
        let mut depth = 0i32;
        for i in open..self.toks.len() {
            match self.text(i) {
                "(" | "{" | "[" => depth += 1,
                ")" | "}" | "]" => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(i);
                    }
                }
                _ => {}
            }
        }
        self.fail()
    }

    fn make(&self, kind: StmtKind, first: usize, last: usize, children: Vec<Stmt>) -> Stmt {
        let (a, b) = (self.toks[first], self.toks[last]);
        Stmt {
            kind,
            start: a.start,
            end: b.end,
            start_line: a.line,
            end_line: line_of(self.src, b.end.saturating_sub(1)),
            children,
            try_parts: None,
        }
    }

    /// Statements of a block whose `{` is at `open`; leaves `pos` after the `}`.
    fn block_items(&mut self, open: usize) -> Result<Vec<Stmt>, ParseError> {
        let close = self.matching(open)?;
        self.pos = open + 1;
        let mut out = Vec::new();
        while self.pos < close {
            out.push(self.statement(close)?);
        }
        self.pos = close + 1;
        Ok(out)
    }

    fn paren_group(&mut self) -> Result<(), ParseError> {
        if self.text(self.pos) != "(" {
            return self.fail();
        }
        self.pos = self.matching(self.pos)? + 1;
        Ok(())
    }

    fn statement(&mut self, limit: usize) -> Result<Stmt, ParseError> {
        let first = self.pos;
        match self.text(first) {
            "{" => {
                let children = self.block_items(first)?;
                Ok(self.make(StmtKind::Block, first, self.pos - 1, children))
            }
            ";" => {
                self.pos += 1;
                Ok(self.make(StmtKind::Simple, first, first, Vec::new()))
            }
            "if" => {
                self.pos += 1;
                self.paren_group()?;
                let mut children = vec![self.statement(limit)?];
                if self.text(self.pos) == "else" && self.pos < limit {
                    self.pos += 1;
                    children.push(self.statement(limit)?);
                }
                Ok(self.make(StmtKind::If, first, self.pos - 1, children))
            }
            "while" | "for" | "synchronized" => {
                let kind = if self.text(first) == "synchronized" { StmtKind::Other } else { StmtKind::Loop };
                self.pos += 1;
                self.paren_group()?;
                let body = self.statement(limit)?;
                Ok(self.make(kind, first, self.pos - 1, vec![body]))
            }
            "do" => {
                self.pos += 1;
                let body = self.statement(limit)?;
                if self.text(self.pos) != "while" {
                    return self.fail();
                }
                self.pos += 1;
                self.paren_group()?;
                if self.text(self.pos) != ";" {
                    return self.fail();
                }
                self.pos += 1;
                Ok(self.make(StmtKind::Loop, first, self.pos - 1, vec![body]))
            }
            "try" => self.try_statement(limit),
            "switch" if self.text(first + 1) == "(" => {
                self.pos += 1;
                self.paren_group()?;
                if self.text(self.pos) != "{" {
                    return self.fail();
                }
                let open = self.pos;
                let close = self.matching(open)?;
                self.pos = open + 1;
                let mut children = Vec::new();
                while self.pos < close {
                    match self.text(self.pos) {
                        "case" | "default" => {
                            while self.pos < close && !matches!(self.text(self.pos), ":" | "-") {
                                if matches!(self.text(self.pos), "(" | "{" | "[") {
                                    self.pos = self.matching(self.pos)?;
                                }
                                self.pos += 1;
                            }
                            if self.text(self.pos) == "-" && self.text(self.pos + 1) == ">" {
                                self.pos += 2;
                            } else {
                                self.pos += 1;
                            }
                        }
                        _ => children.push(self.statement(close)?),
                    }
                }
                self.pos = close + 1;
                Ok(self.make(StmtKind::Switch, first, close, children))
            }
            "class" | "interface" | "enum" => {
                while self.pos < limit && self.text(self.pos) != "{" {
                    self.pos += 1;
                }
                let close = self.matching(self.pos)?;
                self.pos = close + 1;
                Ok(self.make(StmtKind::Other, first, close, Vec::new()))
            }
            _ if self.toks.get(first).is_some_and(|t| t.kind == TokKind::Ident)
                && self.text(first + 1) == ":"
                && self.text(first + 2) != ":" =>
            {
                self.pos += 2;
                let inner = self.statement(limit)?;
                Ok(self.make(StmtKind::Labeled, first, self.pos - 1, vec![inner]))
            }
            _ => {
                let mut i = first;
                while i < limit {
                    match self.text(i) {
                        "(" | "{" | "[" => i = self.matching(i)?,
                        ";" => {
                            self.pos = i + 1;
                            return Ok(self.make(StmtKind::Simple, first, i, Vec::new()));
                        }
                        _ => {}
                    }
                    i += 1;
                }
                self.fail()
            }
        }
    }

    fn try_statement(&mut self, limit: usize) -> Result<Stmt, ParseError> {
        let first = self.pos;
        self.pos += 1;
        if self.text(self.pos) == "(" {
            self.paren_group()?;
        }
        if self.text(self.pos) != "{" {
            return self.fail();
        }
        let open = self.pos;
        let mut children = vec![];
        let body_items = self.block_items(open)?;
        let body_close = self.pos - 1;
        children.push(self.make(StmtKind::Block, open, body_close, body_items));
        let mut catches = Vec::new();
        while self.pos < limit && self.text(self.pos) == "catch" {
            let cfirst = self.pos;
            self.pos += 1;
            if self.text(self.pos) != "(" {
                return self.fail();
            }
            let pclose = self.matching(self.pos)?;
            let mut types = Vec::new();
            let mut cur: Vec<Token> = Vec::new();
            for t in &self.toks[self.pos + 1..pclose] {
                let text = t.text(self.src);
                if text == "|" {
                    types.push(render_tokens(self.src, &cur));
                    cur.clear();
                } else if text != "final" {
                    cur.push(*t);
                }
            }
            // The last segment ends with the variable name.
            cur.pop();
            types.push(render_tokens(self.src, &cur));
            self.pos = pclose + 1;
            if self.text(self.pos) != "{" {
                return self.fail();
            }
            let copen = self.pos;
            let items = self.block_items(copen)?;
            children.push(self.make(StmtKind::Block, copen, self.pos - 1, items));
            catches.push(CatchClause { start: self.toks[cfirst].start, end: self.toks[self.pos - 1].end, types });
        }
        if self.pos < limit && self.text(self.pos) == "finally" {
            self.pos += 1;
            if self.text(self.pos) != "{" {
                return self.fail();
            }
            let fopen = self.pos;
            let items = self.block_items(fopen)?;
            children.push(self.make(StmtKind::Block, fopen, self.pos - 1, items));
        }
        let mut stmt = self.make(StmtKind::Try, first, self.pos - 1, children);
        stmt.try_parts = Some(TryParts { body: (self.toks[open].start, self.toks[body_close].start), catches });
        Ok(stmt)
    }
}

/// Parses the statements of a method body given the byte offsets of its braces.
pub fn parse_body(src: &str, body: (usize, usize)) -> Result<Vec<Stmt>, ParseError> {
    let toks = code_tokens(src)?;
    let Some(open) = toks.iter().position(|t| t.start == body.0) else {
        return Err(ParseError { line: line_of(src, body.0), message: "body not found".into() });
    };
    let mut p = StmtParser { src, toks: &toks, pos: open };
    p.block_items(open)
}

/// Every method with a body in the unit, nested types included.
pub fn methods_with_bodies(outline: &Outline) -> Vec<&Method> {
    let mut types = Vec::new();
    walk_types(&outline.types, &mut types);
    types.iter().flat_map(|t| t.members.iter()).filter_map(|m| m.method()).filter(|m| m.body.is_some()).collect()
}

/// The method whose body contains 1-based `line`, with its parsed statements.
pub fn body_at_line(src: &str, line: u32) -> Result<Option<(Method, Vec<Stmt>)>, ParseError> {
    let outline = parse_outline(src)?;
    let mut best: Option<&Method> = None;
    for m in methods_with_bodies(&outline) {
        let (open, close) = m.body.unwrap_or_default();
        if line_of(src, open) <= line && line <= line_of(src, close) {
            // Prefer the innermost body, which starts last.
            if best.is_none_or(|b| b.body.unwrap_or_default().0 < open) {
                best = Some(m);
            }
        }
    }
    match best {
        Some(m) => {
            let stmts = parse_body(src, m.body.unwrap_or_default())?;
            Ok(Some((m.clone(), stmts)))
        }
        None => Ok(None),
    }
}

/// Innermost statement (not a block) whose lines include `line`.
pub fn innermost_statement(stmts: &[Stmt], line: u32) -> Option<&Stmt> {
    for s in stmts {
        if s.start_line <= line && line <= s.end_line {
            if let Some(inner) = innermost_statement(&s.children, line) {
                return Some(inner);
            }
            if s.kind != StmtKind::Block {
                return Some(s);
            }
        }
    }
    None
}

/// Innermost try statement whose try block (not catch or finally) contains `line`.
pub fn enclosing_try(stmts: &[Stmt], src: &str, line: u32) -> Option<Stmt> {
    let mut found = None;
    fn visit(stmts: &[Stmt], src: &str, line: u32, found: &mut Option<Stmt>) {
        for s in stmts {
            if !(s.start_line <= line && line <= s.end_line) {
                continue;
            }
            if let Some(parts) = &s.try_parts {
                if line_of(src, parts.body.0) <= line && line <= line_of(src, parts.body.1) {
                    *found = Some(s.clone());
                }
            }
            visit(&s.children, src, line, found);
        }
    }
    visit(stmts, src, line, &mut found);
    found
}

/// Cheap structural validity check used before compiling generated code.
pub fn check_structure(src: &str) -> Result<(), ParseError> {
    let outline = parse_outline(src)?;
    if outline.types.is_empty() {
        return Err(ParseError { line: 1, message: "class, interface, or enum expected".into() });
    }
    for m in methods_with_bodies(&outline) {
        parse_body(src, m.body.unwrap_or_default())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"package a.b;

import java.util.List;
import static org.junit.Assert.*;

/** Doc. */
public class Foo<T> extends Bar implements Baz {
    private static final int LIMIT = 3, OTHER;
    private final java.util.Map<String, Integer> counts = new java.util.HashMap<>();

    public Foo(int x) { this.x = x; }

    @Override
    public static <U> List<U> wrap(final U item, String... rest) throws Exception {
        return null;
    }

    abstract int size();

    static class Inner {
        void run(int[] xs, String names[]) {
            for (int i = 0; i < xs.length; i++) { }
        }
    }
}
"#;

    #[test]
    fn lexes_literals_and_comments() {
        let src = "s = \"//not\"; // c\n/* b */ char q = '\\''; x = 1.5e-3f;";
        let toks = lex(src).unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert!(kinds.contains(&TokKind::LineComment));
        assert!(kinds.contains(&TokKind::BlockComment));
        assert_eq!(toks.iter().filter(|t| t.kind == TokKind::Str).count(), 1);
        assert!(toks.iter().any(|t| t.text(src) == "1.5e-3f"));
        assert!(lex("s = \"open").is_err());
        assert!(lex("a /* open").is_err());
        assert!(lex("int #x;").is_err());
    }

    #[test]
    fn outline_members() {
        let o = parse_outline(SAMPLE).unwrap();
        assert_eq!(o.package.as_deref(), Some("a.b"));
        assert_eq!(o.imports.len(), 2);
        assert!(o.imports[1].is_static);
        let t = &o.types[0];
        assert_eq!(t.name, "Foo");
        let methods: Vec<_> = t.members.iter().filter_map(|m| m.method()).collect();
        assert_eq!(methods.len(), 3);
        assert_eq!(methods[0].return_type, None);
        assert_eq!(methods[1].key(), "wrap(U,String...)");
        assert_eq!(methods[1].return_type.as_deref(), Some("List<U>"));
        assert!(methods[2].body.is_none());
        let MemberKind::Field { names } = &t.members[0].kind else { panic!() };
        assert_eq!(names, &vec!["LIMIT".to_string(), "OTHER".to_string()]);
        let MemberKind::Type(inner) = &t.members.last().unwrap().kind else { panic!() };
        assert_eq!(inner.members[0].method().unwrap().key(), "run(int[],String[])");
        assert!(t.members[3].has_annotation("Override"));
    }

    #[test]
    fn statement_spans() {
        let src = "class T {\n  void t() {\n    int a = 1;\n    foo.bar()\n       .baz();\n    try {\n      x();\n    } catch (IllegalStateException | java.io.IOException e) {\n      y();\n    }\n  }\n}\n";
        let (m, stmts) = body_at_line(src, 4).unwrap().unwrap();
        assert_eq!(m.name, "t");
        assert_eq!(stmts.len(), 3);
        let s = innermost_statement(&stmts, 5).unwrap();
        assert_eq!((s.start_line, s.end_line), (4, 5));
        assert_eq!(&src[s.start..s.end], "foo.bar()\n       .baz();");
        let t = enclosing_try(&stmts, src, 7).unwrap();
        let parts = t.try_parts.unwrap();
        assert_eq!(parts.catches[0].types, vec!["IllegalStateException", "java.io.IOException"]);
        assert!(enclosing_try(&stmts, src, 9).is_none());
    }

    #[test]
    fn structure_check() {
        assert!(check_structure("class T { void f() { int x = 1; } }").is_ok());
        assert!(check_structure("class T { void f() { int x = 1 } }").is_err());
        assert!(check_structure("class T { void f() { if (x) { }").is_err());
        assert!(check_structure("just prose").is_err());
    }
}
