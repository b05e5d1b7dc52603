//! Recursive-descent parser producing [`crate::ast`] nodes.
//!
//! Error messages follow javac's wording so that downstream log parsers see
//! familiar text.

use std::rc::Rc;

use crate::ast::*;
use crate::lexer::{tokenize, Tok, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

type PResult<T> = Result<T, SyntaxError>;

pub fn parse_unit(file: &str, src: &str) -> PResult<CompilationUnit> {
    let tokens = tokenize(src).map_err(|e| SyntaxError { line: e.line, col: e.col, message: e.message })?;
    let mut p = Parser { toks: tokens, pos: 0, src, file: file.to_string(), splits: Vec::new() };
    p.unit()
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    src: &'a str,
    file: String,
    /// Undo log for `>>` tokens split while closing type arguments.
    splits: Vec<(usize, Tok)>,
}

#[derive(Clone, Copy)]
struct Mark {
    pos: usize,
    splits: usize,
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "super",
    "switch",
    "this",
    "throw",
    "throws",
    "try",
    "void",
    "while",
    "synchronized",
    "true",
    "false",
    "null",
    "enum",
    "goto",
    "const",
    "native",
    "transient",
    "volatile",
    "strictfp",
    "assert",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

impl<'a> Parser<'a> {
    fn cur(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_tok(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn mark(&self) -> Mark {
        Mark { pos: self.pos, splits: self.splits.len() }
    }

    fn reset(&mut self, m: Mark) {
        while self.splits.len() > m.splits {
            let (i, t) = self.splits.pop().unwrap();
            self.toks[i].tok = t;
        }
        self.pos = m.pos;
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(&self.cur().tok, Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.cur().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: &str) -> SyntaxError {
        let t = self.cur();
        if t.tok == Tok::Eof {
            return self.eof_error();
        }
        SyntaxError { line: t.line, col: t.col, message: message.to_string() }
    }

    fn eof_error(&self) -> SyntaxError {
        let t = &self.toks[self.toks.len().saturating_sub(2).min(self.toks.len() - 1)];
        SyntaxError { line: t.line, col: t.col, message: "reached end of file while parsing".into() }
    }

    /// javac reports a missing token just past the previous one.
    fn expected(&self, what: &str) -> SyntaxError {
        if self.cur().tok == Tok::Eof {
            return self.eof_error();
        }
        if self.pos == 0 {
            return self.error_here(&format!("{what} expected"));
        }
        let prev = &self.toks[self.pos - 1];
        let width = self.src[prev.start..prev.end].chars().count() as u32;
        SyntaxError { line: prev.line, col: prev.col + width, message: format!("{what} expected") }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Token> {
        if self.is_op(op) {
            Ok(self.bump())
        } else {
            Err(self.expected(&format!("'{op}'")))
        }
    }

    fn ident(&mut self) -> PResult<Token> {
        match &self.cur().tok {
            Tok::Ident(s) if !is_keyword(s) => Ok(self.bump()),
            _ => Err(self.expected("<identifier>")),
        }
    }

    fn ident_text(t: &Token) -> String {
        match &t.tok {
            Tok::Ident(s) => s.clone(),
            other => other.to_string(),
        }
    }

    fn qualified_name(&mut self) -> PResult<String> {
        let mut name = Self::ident_text(&self.ident()?);
        while self.is_op(".") && matches!(self.peek_tok(1), Tok::Ident(s) if !is_keyword(s)) {
            self.bump();
            name.push('.');
            name.push_str(&Self::ident_text(&self.bump()));
        }
        Ok(name)
    }

    fn unit(&mut self) -> PResult<CompilationUnit> {
        let mut package = None;
        let mut imports = Vec::new();
        let mut classes = Vec::new();
        if self.eat_kw("package") {
            package = Some(self.qualified_name()?);
            self.expect_op(";")?;
        }
        while self.is_kw("import") {
            let t = self.bump();
            let is_static = self.eat_kw("static");
            let mut path = self.qualified_name()?;
            let mut wildcard = false;
            if self.is_op(".") && matches!(self.peek_tok(1), Tok::Op("*")) {
                self.bump();
                self.bump();
                wildcard = true;
            }
            if wildcard {
                path.push_str(".*");
            }
            self.expect_op(";")?;
            imports.push(Import { path, is_static, wildcard, line: t.line, col: t.col });
        }
        loop {
            if self.cur().tok == Tok::Eof {
                break;
            }
            if self.eat_op(";") {
                continue;
            }
            classes.push(Rc::new(self.class_decl(&package)?));
        }
        Ok(CompilationUnit { file: self.file.clone(), package, imports, classes })
    }

    fn annotations(&mut self) -> PResult<Vec<Annotation>> {
        let mut out = Vec::new();
        while self.is_op("@") && !matches!(self.peek_tok(1), Tok::Ident(s) if s == "interface") {
            let at = self.bump();
            let name = self.qualified_name()?;
            let mut expected = None;
            if self.eat_op("(") {
                let mut depth = 1;
                while depth > 0 {
                    match &self.cur().tok {
                        Tok::Eof => return Err(self.eof_error()),
                        Tok::Op("(") => depth += 1,
                        Tok::Op(")") => depth -= 1,
                        Tok::Ident(s) if s == "expected" && depth == 1 && matches!(self.peek_tok(1), Tok::Op("=")) => {
                            self.bump();
                            self.bump();
                            let cls = self.qualified_name()?;
                            if !(self.eat_op(".") && self.eat_kw("class")) {
                                return Err(self.expected("'.class'"));
                            }
                            expected = Some(cls);
                            continue;
                        }
                        _ => {}
                    }
                    self.bump();
                }
            }
            out.push(Annotation { name, expected, line: at.line, col: at.col });
        }
        Ok(out)
    }

    fn modifiers(&mut self) -> Modifiers {
        let mut m = Modifiers::default();
        loop {
            match &self.cur().tok {
                Tok::Ident(s) => match s.as_str() {
                    "public" => m.public = true,
                    "private" => m.private = true,
                    "protected" => m.protected = true,
                    "static" => m.is_static = true,
                    "final" => m.is_final = true,
                    "abstract" => m.is_abstract = true,
                    "synchronized" | "native" | "transient" | "volatile" | "strictfp" => {}
                    _ => return m,
                },
                _ => return m,
            }
            self.bump();
        }
    }

    fn skip_type_params(&mut self) -> PResult<()> {
        if self.is_op("<") {
            self.type_args()?;
        }
        Ok(())
    }

    fn class_decl(&mut self, package: &Option<String>) -> PResult<ClassDecl> {
        self.annotations()?;
        let mods = self.modifiers();
        self.annotations()?;
        let is_interface = if self.eat_kw("class") {
            false
        } else if self.eat_kw("interface") {
            true
        } else {
            return Err(self.error_here("class, interface, or enum expected"));
        };
        let name_tok = self.ident()?;
        let name = Self::ident_text(&name_tok);
        self.skip_type_params()?;
        let mut superclass = None;
        let mut interfaces = Vec::new();
        if self.eat_kw("extends") {
            loop {
                let t = self.cur().clone();
                let n = self.qualified_name()?;
                self.skip_type_params()?;
                if is_interface {
                    interfaces.push((n, t.line, t.col));
                } else {
                    superclass = Some((n, t.line, t.col));
                }
                if !(is_interface && self.eat_op(",")) {
                    break;
                }
            }
        }
        if self.eat_kw("implements") {
            loop {
                let t = self.cur().clone();
                let n = self.qualified_name()?;
                self.skip_type_params()?;
                interfaces.push((n, t.line, t.col));
                if !self.eat_op(",") {
                    break;
                }
            }
        }
        self.expect_op("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        loop {
            if self.cur().tok == Tok::Eof {
                return Err(self.eof_error());
            }
            if self.eat_op("}") {
                break;
            }
            if self.eat_op(";") {
                continue;
            }
            self.member(&name, is_interface, &mut fields, &mut methods)?;
        }
        Ok(ClassDecl {
            name,
            package: package.clone(),
            file: self.file.clone(),
            mods,
            is_interface,
            superclass,
            interfaces,
            fields,
            methods,
            line: name_tok.line,
            col: name_tok.col,
        })
    }

    fn member(
        &mut self,
        class_name: &str,
        is_interface: bool,
        fields: &mut Vec<FieldDecl>,
        methods: &mut Vec<Rc<MethodDecl>>,
    ) -> PResult<()> {
        let annotations = self.annotations()?;
        let mut mods = self.modifiers();
        let more = self.annotations()?;
        let annotations: Vec<_> = annotations.into_iter().chain(more).collect();
        if self.is_kw("class") || self.is_kw("interface") || self.is_kw("enum") {
            return Err(self.error_here("nested types are not supported"));
        }
        if self.is_op("{") {
            return Err(self.error_here("initializer blocks are not supported"));
        }
        self.skip_type_params()?;
        let start = self.cur().clone();
        // constructor
        if matches!(&start.tok, Tok::Ident(s) if s == class_name) && matches!(self.peek_tok(1), Tok::Op("(")) {
            self.bump();
            let params = self.params()?;
            self.throws_clause()?;
            let body = self.block()?;
            let end_line = body.end_line;
            methods.push(Rc::new(MethodDecl {
                name: "<init>".into(),
                mods,
                annotations,
                ret: None,
                params,
                body: Some(body),
                is_ctor: true,
                line: start.line,
                col: start.col,
                end_line,
            }));
            return Ok(());
        }
        let ty = self.parse_type().map_err(|_| self.error_here("<identifier> expected"))?;
        let name_tok = self.ident()?;
        if self.is_op("(") {
            let params = self.params()?;
            self.throws_clause()?;
            if is_interface && !mods.is_static {
                mods.is_abstract = true;
                mods.public = true;
            }
            let (body, end_line) = if self.eat_op(";") {
                (None, name_tok.line)
            } else {
                let b = self.block()?;
                let e = b.end_line;
                (Some(b), e)
            };
            if is_interface && body.is_some() {
                mods.is_abstract = false;
            }
            methods.push(Rc::new(MethodDecl {
                name: Self::ident_text(&name_tok),
                mods,
                annotations,
                ret: Some(ty),
                params,
                body,
                is_ctor: false,
                line: name_tok.line,
                col: name_tok.col,
                end_line,
            }));
            return Ok(());
        }
        let mut name_tok = name_tok;
        loop {
            let mut fty = ty.clone();
            while self.eat_op("[") {
                self.expect_op("]")?;
                fty = TypeRef::Array(Box::new(fty));
            }
            let init = if self.eat_op("=") { Some(self.var_init()?) } else { None };
            fields.push(FieldDecl {
                name: Self::ident_text(&name_tok),
                ty: fty,
                mods: mods.clone(),
                init,
                line: name_tok.line,
                col: name_tok.col,
            });
            if self.eat_op(",") {
                name_tok = self.ident()?;
                continue;
            }
            self.expect_op(";")?;
            return Ok(());
        }
    }

    fn throws_clause(&mut self) -> PResult<()> {
        if self.eat_kw("throws") {
            loop {
                self.qualified_name()?;
                if !self.eat_op(",") {
                    break;
                }
            }
        }
        Ok(())
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_op("(")?;
        let mut out = Vec::new();
        if self.eat_op(")") {
            return Ok(out);
        }
        loop {
            self.annotations()?;
            self.eat_kw("final");
            let mut ty = self.parse_type().map_err(|_| self.error_here("<identifier> expected"))?;
            if self.eat_op("...") {
                ty = TypeRef::Array(Box::new(ty));
            }
            let name = self.ident()?;
            while self.eat_op("[") {
                self.expect_op("]")?;
                ty = TypeRef::Array(Box::new(ty));
            }
            out.push(Param { name: Self::ident_text(&name), ty, line: name.line, col: name.col });
            if self.eat_op(")") {
                return Ok(out);
            }
            if !self.eat_op(",") {
                return Err(self.expected("',', ')', or '['"));
            }
        }
    }

    /// Parses `<...>` type arguments and discards them.
    fn type_args(&mut self) -> PResult<()> {
        self.expect_op("<")?;
        if self.eat_op(">") {
            return Ok(()); // diamond
        }
        loop {
            if self.eat_op("?") {
                if self.eat_kw("extends") || self.eat_kw("super") {
                    self.parse_type()?;
                }
            } else {
                self.parse_type()?;
                if self.eat_kw("extends") {
                    self.parse_type()?;
                    while self.eat_op("&") {
                        self.parse_type()?;
                    }
                }
            }
            if self.eat_op(",") {
                continue;
            }
            return self.close_angle();
        }
    }

    fn close_angle(&mut self) -> PResult<()> {
        let replacement = match &self.cur().tok {
            Tok::Op(">") => {
                self.bump();
                return Ok(());
            }
            Tok::Op(">>") => ">",
            Tok::Op(">>>") => ">>",
            Tok::Op(">=") => "=",
            Tok::Op(">>=") => ">=",
            _ => return Err(self.expected("'>'")),
        };
        let i = self.pos;
        self.splits.push((i, self.toks[i].tok.clone()));
        self.toks[i].tok = Tok::Op(replacement);
        self.toks[i].col += 1;
        self.toks[i].start += 1;
        Ok(())
    }

    fn parse_type(&mut self) -> PResult<TypeRef> {
        let t = self.cur().clone();
        let mut ty = match &t.tok {
            Tok::Ident(s) => {
                if let Some(p) = Prim::from_name(s) {
                    self.bump();
                    TypeRef::Prim(p)
                } else if is_keyword(s) {
                    return Err(self.expected("<identifier>"));
                } else {
                    let mut name = s.clone();
                    self.bump();
                    if self.is_op("<") {
                        self.type_args()?;
                    }
                    while self.is_op(".") && matches!(self.peek_tok(1), Tok::Ident(s) if !is_keyword(s)) {
                        self.bump();
                        name.push('.');
                        name.push_str(&Self::ident_text(&self.bump()));
                        if self.is_op("<") {
                            self.type_args()?;
                        }
                    }
                    TypeRef::Class(name)
                }
            }
            _ => return Err(self.expected("<identifier>")),
        };
        while self.is_op("[") && matches!(self.peek_tok(1), Tok::Op("]")) {
            self.bump();
            self.bump();
            ty = TypeRef::Array(Box::new(ty));
        }
        Ok(ty)
    }

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect_op("{")?;
        let mut stmts = Vec::new();
        loop {
            if self.cur().tok == Tok::Eof {
                return Err(self.eof_error());
            }
            if self.is_op("}") {
                let close = self.bump();
                return Ok(Block { stmts, line: open.line, end_line: close.line });
            }
            stmts.push(self.stmt()?);
        }
    }

    /// Speculatively recognizes `Type name` at the start of a statement.
    fn looks_like_local(&mut self) -> bool {
        let m = self.mark();
        let ok = match &self.cur().tok {
            Tok::Ident(s) if !is_keyword(s) || Prim::from_name(s).is_some() => {
                self.parse_type().is_ok()
                    && matches!(&self.cur().tok, Tok::Ident(s) if !is_keyword(s))
                    && matches!(self.peek_tok(1), Tok::Op("=") | Tok::Op(";") | Tok::Op(",") | Tok::Op("[") | Tok::Op(":"))
            }
            _ => false,
        };
        self.reset(m);
        ok
    }

    fn local_decls(&mut self) -> PResult<Vec<VarDecl>> {
        let ty = self.parse_type()?;
        let mut out = Vec::new();
        loop {
            let name = self.ident()?;
            let mut vty = ty.clone();
            while self.eat_op("[") {
                self.expect_op("]")?;
                vty = TypeRef::Array(Box::new(vty));
            }
            let init = if self.eat_op("=") { Some(self.var_init()?) } else { None };
            out.push(VarDecl { name: Self::ident_text(&name), ty: vty, init, line: name.line, col: name.col });
            if !self.eat_op(",") {
                return Ok(out);
            }
        }
    }

    fn var_init(&mut self) -> PResult<Expr> {
        if self.is_op("{") {
            let open = self.cur().clone();
            let items = self.array_items()?;
            let end = self.toks[self.pos - 1].end;
            return Ok(Expr { kind: ExprKind::ArrayLit(items), line: open.line, col: open.col, start: open.start, end });
        }
        self.expr()
    }

    fn array_items(&mut self) -> PResult<Vec<Expr>> {
        self.expect_op("{")?;
        let mut items = Vec::new();
        loop {
            if self.eat_op("}") {
                return Ok(items);
            }
            items.push(self.var_init()?);
            if !self.eat_op(",") {
                self.expect_op("}")?;
                return Ok(items);
            }
        }
    }

    fn paren_cond(&mut self) -> PResult<Expr> {
        self.expect_op("(")?;
        let e = self.expr()?;
        self.expect_op(")")?;
        Ok(e)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let t = self.cur().clone();
        let (line, col) = (t.line, t.col);
        let mk = |kind| Ok(Stmt { kind, line, col });
        if self.is_op("{") {
            return mk(StmtKind::Block(self.block()?));
        }
        if self.eat_op(";") {
            return mk(StmtKind::Empty);
        }
        let kw = match &t.tok {
            Tok::Ident(s) => s.clone(),
            _ => String::new(),
        };
        match kw.as_str() {
            "if" => {
                self.bump();
                let cond = self.paren_cond()?;
                let then = Box::new(self.stmt()?);
                let els = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
                mk(StmtKind::If { cond, then, els })
            }
            "while" => {
                self.bump();
                let cond = self.paren_cond()?;
                let body = Box::new(self.stmt()?);
                mk(StmtKind::While { cond, body })
            }
            "do" => {
                self.bump();
                let body = Box::new(self.stmt()?);
                if !self.eat_kw("while") {
                    return Err(self.expected("'while'"));
                }
                let cond = self.paren_cond()?;
                self.expect_op(";")?;
                mk(StmtKind::DoWhile { body, cond })
            }
            "for" => {
                self.bump();
                self.expect_op("(")?;
                self.eat_kw("final");
                // enhanced for
                if self.looks_like_local() {
                    let m = self.mark();
                    let ty = self.parse_type()?;
                    let name = self.ident()?;
                    if self.eat_op(":") {
                        let iter = self.expr()?;
                        self.expect_op(")")?;
                        let body = Box::new(self.stmt()?);
                        let var = VarDecl { name: Self::ident_text(&name), ty, init: None, line: name.line, col: name.col };
                        return mk(StmtKind::ForEach { var, iter, body });
                    }
                    self.reset(m);
                }
                let mut init = Vec::new();
                if !self.is_op(";") {
                    if self.looks_like_local() {
                        let s = self.cur().clone();
                        init.push(Stmt { kind: StmtKind::Local(self.local_decls()?), line: s.line, col: s.col });
                    } else {
                        loop {
                            let s = self.cur().clone();
                            init.push(Stmt { kind: StmtKind::Expr(self.expr()?), line: s.line, col: s.col });
                            if !self.eat_op(",") {
                                break;
                            }
                        }
                    }
                }
                self.expect_op(";")?;
                let cond = if self.is_op(";") { None } else { Some(self.expr()?) };
                self.expect_op(";")?;
                let mut update = Vec::new();
                if !self.is_op(")") {
                    loop {
                        update.push(self.expr()?);
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                }
                self.expect_op(")")?;
                let body = Box::new(self.stmt()?);
                mk(StmtKind::For { init, cond, update, body })
            }
            "return" => {
                self.bump();
                let e = if self.is_op(";") { None } else { Some(self.expr()?) };
                self.expect_op(";")?;
                mk(StmtKind::Return(e))
            }
            "break" => {
                self.bump();
                self.expect_op(";")?;
                mk(StmtKind::Break)
            }
            "continue" => {
                self.bump();
                self.expect_op(";")?;
                mk(StmtKind::Continue)
            }
            "throw" => {
                self.bump();
                let e = self.expr()?;
                self.expect_op(";")?;
                mk(StmtKind::Throw(e))
            }
            "try" => {
                self.bump();
                if self.is_op("(") {
                    return Err(self.error_here("try-with-resources is not supported"));
                }
                let body = self.block()?;
                let mut catches = Vec::new();
                while self.is_kw("catch") {
                    self.bump();
                    self.expect_op("(")?;
                    self.eat_kw("final");
                    let mut types = Vec::new();
                    loop {
                        let tt = self.cur().clone();
                        types.push((self.qualified_name()?, tt.line, tt.col));
                        if !self.eat_op("|") {
                            break;
                        }
                    }
                    let var = Self::ident_text(&self.ident()?);
                    self.expect_op(")")?;
                    let body = self.block()?;
                    catches.push(CatchClause { types, var, body });
                }
                let finally = if self.eat_kw("finally") { Some(self.block()?) } else { None };
                if catches.is_empty() && finally.is_none() {
                    return Err(self.error_here("'try' without 'catch' or 'finally'"));
                }
                mk(StmtKind::Try { body, catches, finally })
            }
            "switch" => {
                self.bump();
                let scrutinee = self.paren_cond()?;
                self.expect_op("{")?;
                let mut arms: Vec<SwitchArm> = Vec::new();
                loop {
                    if self.eat_op("}") {
                        break;
                    }
                    if self.cur().tok == Tok::Eof {
                        return Err(self.eof_error());
                    }
                    if self.is_kw("case") || self.is_kw("default") {
                        let head = self.cur().clone();
                        let mut labels = Vec::new();
                        let mut is_default = false;
                        let mut texts = Vec::new();
                        while self.is_kw("case") || self.is_kw("default") {
                            let h = self.bump();
                            if Self::ident_text(&h) == "default" {
                                is_default = true;
                                texts.push("default".to_string());
                            } else {
                                let e = self.ternary()?;
                                texts.push(format!("case {}", &self.src[e.start..e.end]));
                                labels.push(e);
                            }
                            self.expect_op(":")?;
                        }
                        arms.push(SwitchArm { labels, is_default, body: Vec::new(), line: head.line, text: texts.join(", ") });
                        continue;
                    }
                    let s = self.stmt()?;
                    match arms.last_mut() {
                        Some(a) => a.body.push(s),
                        None => return Err(SyntaxError { line: s.line, col: s.col, message: "orphaned statement".into() }),
                    }
                }
                mk(StmtKind::Switch { scrutinee, arms })
            }
            "this" | "super" if matches!(self.peek_tok(1), Tok::Op("(")) => {
                self.bump();
                let args = self.args()?;
                self.expect_op(";")?;
                mk(StmtKind::CtorCall { is_super: kw == "super", args })
            }
            "else" => Err(self.error_here("'else' without 'if'")),
            "catch" => Err(self.error_here("'catch' without 'try'")),
            "class" | "interface" => Err(self.error_here("local classes are not supported")),
            _ => {
                if kw == "final" {
                    self.bump();
                }
                if self.looks_like_local() {
                    let decls = self.local_decls()?;
                    self.expect_op(";")?;
                    return mk(StmtKind::Local(decls));
                }
                let e = self.expr()?;
                if !matches!(e.kind, ExprKind::Assign { .. } | ExprKind::IncDec { .. } | ExprKind::Call { .. } | ExprKind::New { .. }) {
                    return Err(SyntaxError { line: e.line, col: e.col, message: "not a statement".into() });
                }
                self.expect_op(";")?;
                mk(StmtKind::Expr(e))
            }
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_op("(")?;
        let mut out = Vec::new();
        if self.eat_op(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_op(")") {
                return Ok(out);
            }
            if !self.eat_op(",") {
                return Err(self.expected("')'"));
            }
        }
    }

    fn finish(&self, start: &Token, kind: ExprKind) -> Expr {
        let end = self.toks[self.pos.saturating_sub(1)].end.max(start.start);
        Expr { kind, line: start.line, col: start.col, start: start.start, end }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        let lhs = self.ternary()?;
        let op = match &self.cur().tok {
            Tok::Op(o @ ("=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=" | ">>>=")) => *o,
            _ => return Ok(lhs),
        };
        if !matches!(lhs.kind, ExprKind::Name(_) | ExprKind::Field { .. } | ExprKind::Index { .. }) {
            return Err(SyntaxError { line: lhs.line, col: lhs.col, message: "unexpected type".into() });
        }
        self.bump();
        let value = self.expr()?;
        Ok(self.finish(&start, ExprKind::Assign { op, target: Box::new(lhs), value: Box::new(value) }))
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        let cond = self.binary(0)?;
        if self.eat_op("?") {
            let then = self.expr()?;
            self.expect_op(":")?;
            let els = self.ternary()?;
            return Ok(self.finish(&start, ExprKind::Cond { cond: Box::new(cond), then: Box::new(then), els: Box::new(els) }));
        }
        Ok(cond)
    }

    fn binop_prec(&self) -> Option<(&'static str, u8)> {
        let op = match &self.cur().tok {
            Tok::Op(o) => *o,
            Tok::Ident(s) if s == "instanceof" => return Some(("instanceof", 7)),
            _ => return None,
        };
        let p = match op {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" => 4,
            "&" => 5,
            "==" | "!=" => 6,
            "<" | ">" | "<=" | ">=" => 7,
            "<<" | ">>" | ">>>" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => return None,
        };
        Some((op, p))
    }

    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let start = self.cur().clone();
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop_prec() {
            if prec <= min {
                break;
            }
            self.bump();
            if op == "instanceof" {
                let ty = self.parse_type()?;
                let class = match ty {
                    TypeRef::Class(c) => c,
                    other => other.display(),
                };
                lhs = self.finish(&start, ExprKind::InstanceOf { expr: Box::new(lhs), class });
                continue;
            }
            let rhs = self.binary(prec)?;
            lhs = self.finish(&start, ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) });
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        match &start.tok {
            Tok::Op(o @ ("+" | "-" | "!" | "~")) => {
                let op = *o;
                self.bump();
                // fold negative literals so that `-2147483648` is representable
                if op == "-" {
                    if let Tok::Int(v) | Tok::Long(v) = self.cur().tok.clone() {
                        let is_long = matches!(self.cur().tok, Tok::Long(_));
                        if !matches!(self.peek_tok(1), Tok::Op(".") | Tok::Op("[")) {
                            self.bump();
                            let lit = if is_long { Lit::Long(-v) } else { Lit::Int(-v) };
                            return Ok(self.finish(&start, ExprKind::Lit(lit)));
                        }
                    }
                }
                let operand = self.unary()?;
                Ok(self.finish(&start, ExprKind::Unary { op, operand: Box::new(operand) }))
            }
            Tok::Op(o @ ("++" | "--")) => {
                let op = *o;
                self.bump();
                let target = self.unary()?;
                Ok(self.finish(&start, ExprKind::IncDec { op, prefix: true, target: Box::new(target) }))
            }
            Tok::Op("(") => {
                if let Some(e) = self.try_cast(&start)? {
                    return Ok(e);
                }
                self.postfix()
            }
            _ => self.postfix(),
        }
    }

    fn try_cast(&mut self, start: &Token) -> PResult<Option<Expr>> {
        let m = self.mark();
        self.bump();
        let is_prim = matches!(&self.cur().tok, Tok::Ident(s) if Prim::from_name(s).is_some());
        let ty = match self.parse_type() {
            Ok(t) => t,
            Err(_) => {
                self.reset(m);
                return Ok(None);
            }
        };
        if !self.eat_op(")") {
            self.reset(m);
            return Ok(None);
        }
        let follows = match &self.cur().tok {
            Tok::Ident(s) => !matches!(s.as_str(), "instanceof"),
            Tok::Int(_) | Tok::Long(_) | Tok::Float(_) | Tok::Double(_) | Tok::Char(_) | Tok::Str(_) => true,
            Tok::Op("(") | Tok::Op("!") | Tok::Op("~") => true,
            Tok::Op("+") | Tok::Op("-") | Tok::Op("++") | Tok::Op("--") => is_prim,
            _ => false,
        };
        if !follows {
            self.reset(m);
            return Ok(None);
        }
        let e = self.unary()?;
        Ok(Some(self.finish(start, ExprKind::Cast { ty, expr: Box::new(e) })))
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let start = self.cur().clone();
        let mut e = self.primary()?;
        loop {
            if self.is_op(".") {
                self.bump();
                if self.eat_kw("class") {
                    let name = dotted(&e).ok_or_else(|| self.error_here("<identifier> expected"))?;
                    e = self.finish(&start, ExprKind::ClassLit(name));
                    continue;
                }
                if self.is_op("<") {
                    self.type_args()?;
                }
                let name = Self::ident_text(&self.ident()?);
                if self.is_op("(") {
                    let args = self.args()?;
                    e = self.finish(&start, ExprKind::Call { target: Some(Box::new(e)), is_super: false, name, args });
                } else {
                    e = self.finish(&start, ExprKind::Field { target: Box::new(e), name });
                }
            } else if self.is_op("[") {
                self.bump();
                let idx = self.expr()?;
                self.expect_op("]")?;
                e = self.finish(&start, ExprKind::Index { target: Box::new(e), index: Box::new(idx) });
            } else if let Tok::Op(o @ ("++" | "--")) = &self.cur().tok {
                let op = *o;
                self.bump();
                e = self.finish(&start, ExprKind::IncDec { op, prefix: false, target: Box::new(e) });
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.cur().clone();
        let lit = |p: &mut Self, l: Lit| {
            p.bump();
            Ok(p.finish(&t, ExprKind::Lit(l)))
        };
        match &t.tok {
            Tok::Int(v) => {
                if *v > i32::MAX as i64 {
                    return Err(SyntaxError { line: t.line, col: t.col, message: "integer number too large".into() });
                }
                lit(self, Lit::Int(*v))
            }
            Tok::Long(v) => lit(self, Lit::Long(*v)),
            Tok::Float(v) => lit(self, Lit::Float(*v)),
            Tok::Double(v) => lit(self, Lit::Double(*v)),
            Tok::Char(c) => lit(self, Lit::Char(*c)),
            Tok::Str(s) => lit(self, Lit::Str(s.clone())),
            Tok::Op("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_op(")")?;
                Ok(Expr { start: t.start, end: self.toks[self.pos - 1].end, line: t.line, col: t.col, kind: e.kind })
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => lit(self, Lit::Bool(true)),
                "false" => lit(self, Lit::Bool(false)),
                "null" => lit(self, Lit::Null),
                "this" => {
                    self.bump();
                    Ok(self.finish(&t, ExprKind::This))
                }
                "super" => {
                    self.bump();
                    self.expect_op(".")?;
                    let name = Self::ident_text(&self.ident()?);
                    let args = self.args()?;
                    Ok(self.finish(&t, ExprKind::Call { target: None, is_super: true, name, args }))
                }
                "new" => self.creation(&t),
                kw if Prim::from_name(kw).is_some() => {
                    // `int.class`
                    self.bump();
                    if self.eat_op(".") && self.eat_kw("class") {
                        return Ok(self.finish(&t, ExprKind::ClassLit(kw.to_string())));
                    }
                    Err(SyntaxError { line: t.line, col: t.col, message: "'.class' expected".into() })
                }
                kw if is_keyword(kw) => Err(self.error_here("illegal start of expression")),
                name => {
                    let name = name.to_string();
                    self.bump();
                    if self.is_op("(") {
                        let args = self.args()?;
                        return Ok(self.finish(&t, ExprKind::Call { target: None, is_super: false, name, args }));
                    }
                    if self.is_op("->") {
                        return Err(self.error_here("lambda expressions are not supported"));
                    }
                    Ok(self.finish(&t, ExprKind::Name(name)))
                }
            },
            Tok::Eof => Err(self.eof_error()),
            _ => Err(self.error_here("illegal start of expression")),
        }
    }

    fn creation(&mut self, t: &Token) -> PResult<Expr> {
        self.bump();
        let elem_start = self.cur().clone();
        let base = match &elem_start.tok {
            Tok::Ident(s) if Prim::from_name(s).is_some() => {
                self.bump();
                TypeRef::Prim(Prim::from_name(s).unwrap())
            }
            Tok::Ident(s) if !is_keyword(s) => {
                let mut name = s.clone();
                self.bump();
                while self.is_op(".") && matches!(self.peek_tok(1), Tok::Ident(_)) {
                    self.bump();
                    name.push('.');
                    name.push_str(&Self::ident_text(&self.bump()));
                }
                if self.is_op("<") {
                    self.type_args()?;
                }
                TypeRef::Class(name)
            }
            _ => return Err(self.expected("<identifier>")),
        };
        if self.is_op("[") {
            let mut dims = Vec::new();
            let mut extra = 0;
            while self.eat_op("[") {
                if self.eat_op("]") {
                    extra += 1;
                    continue;
                }
                if extra > 0 {
                    return Err(self.expected("']'"));
                }
                dims.push(self.expr()?);
                self.expect_op("]")?;
            }
            let init = if dims.is_empty() {
                if !self.is_op("{") {
                    return Err(self.error_here("array dimension missing"));
                }
                Some(self.array_items()?)
            } else {
                None
            };
            return Ok(self.finish(t, ExprKind::NewArray { elem: base, dims, extra_dims: extra, init }));
        }
        let class = match base {
            TypeRef::Class(c) => c,
            _ => return Err(self.expected("'['")),
        };
        let args = self.args()?;
        if self.is_op("{") {
            return Err(self.error_here("anonymous classes are not supported"));
        }
        Ok(self.finish(t, ExprKind::New { class, args }))
    }
}

/// Renders `a.b.c` name chains back to text.
pub fn dotted(e: &Expr) -> Option<String> {
    match &e.kind {
        ExprKind::Name(n) => Some(n.clone()),
        ExprKind::Field { target, name } => Some(format!("{}.{name}", dotted(target)?)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> PResult<CompilationUnit> {
        parse_unit("T.java", src)
    }

    #[test]
    fn parses_a_small_class() {
        let u = parse(
            "package a.b;\nimport java.util.*;\npublic class T<K> extends Base {\n  private int x = 1, y;\n  public T(int x) { super(); this.x = x; }\n  static <E> List<List<E>> f(int[] a, String... s) {\n    for (int i = 0; i < a.length; i++) { x += a[i] >> 1; }\n    Map<String, List<Integer>> m = new HashMap<>();\n    return (List<List<E>>) null;\n  }\n}\n",
        )
        .unwrap();
        let c = &u.classes[0];
        assert_eq!(c.fqn(), "a.b.T");
        assert_eq!(c.fields.len(), 2);
        assert_eq!(c.methods.len(), 2);
        assert!(c.methods[0].is_ctor);
        assert_eq!(c.methods[1].end_line, 10);
    }

    #[test]
    fn reports_missing_semicolon_after_previous_token() {
        let e = parse("class T {\n  void f() {\n    int x = 1\n    x++;\n  }\n}\n").unwrap_err();
        assert_eq!(e.message, "';' expected");
        assert_eq!((e.line, e.col), (3, 14));
    }

    #[test]
    fn cast_versus_parenthesized() {
        let u = parse("class T { void f() { int a = (int) 2.5; int b = (a) + 1; String s = (String) null; } }").unwrap();
        let body = u.classes[0].methods[0].body.as_ref().unwrap();
        let kinds: Vec<_> = body
            .stmts
            .iter()
            .map(|s| match &s.kind {
                StmtKind::Local(d) => matches!(d[0].init.as_ref().unwrap().kind, ExprKind::Cast { .. }),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(kinds, vec![true, false, true]);
    }

    #[test]
    fn eof_inside_class() {
        let e = parse("class T {\n void f() {\n").unwrap_err();
        assert_eq!(e.message, "reached end of file while parsing");
    }

    #[test]
    fn test_annotation_with_expected() {
        let u = parse("class T { @Test(expected = IllegalArgumentException.class) public void t() {} }").unwrap();
        let m = &u.classes[0].methods[0];
        assert_eq!(m.annotations[0].expected.as_deref(), Some("IllegalArgumentException"));
    }
}
