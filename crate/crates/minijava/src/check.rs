//! Static checks that mimic the javac errors most often seen in generated
//! tests: unresolved symbols, bad call arity or argument types, private
//! access and abstract-class misuse.

use std::collections::HashMap;
use std::rc::Rc;

use crate::ast::*;
use crate::library;
use crate::project::{ClassRef, Project};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileError {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
    pub notes: Vec<String>,
}

impl CompileError {
    /// Renders in javac's layout, including the offending source line and caret.
    pub fn render(&self, project: &Project) -> String {
        let src = project.file(&self.file).map(|f| f.line(self.line)).unwrap_or("");
        let mut out = format!("{}:{}: error: {}\n{}\n", self.file, self.line, self.message, src);
        out.push_str(&" ".repeat(self.col.saturating_sub(1) as usize));
        out.push_str("^\n");
        for n in &self.notes {
            out.push_str("  ");
            out.push_str(n);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ty {
    Prim(Prim),
    Null,
    Class(String),
    Array(Box<Ty>),
    /// A class name used as an expression qualifier (`Math.abs`).
    Static(String),
    Unknown,
}

impl Ty {
    fn string() -> Ty {
        Ty::Class("java.lang.String".into())
    }

    pub fn display(&self) -> String {
        match self {
            Ty::Prim(p) => p.name().into(),
            Ty::Null => "<null>".into(),
            Ty::Class(c) | Ty::Static(c) => c.rsplit('.').next().unwrap_or(c).into(),
            Ty::Array(e) => format!("{}[]", e.display()),
            Ty::Unknown => "Object".into(),
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self, Ty::Prim(p) if !matches!(p, Prim::Boolean | Prim::Void))
    }
}

fn unbox(c: &str) -> Option<Prim> {
    Some(match c {
        "java.lang.Integer" => Prim::Int,
        "java.lang.Long" => Prim::Long,
        "java.lang.Double" => Prim::Double,
        "java.lang.Float" => Prim::Float,
        "java.lang.Boolean" => Prim::Boolean,
        "java.lang.Character" => Prim::Char,
        "java.lang.Short" => Prim::Short,
        "java.lang.Byte" => Prim::Byte,
        _ => return None,
    })
}

fn box_name(p: Prim) -> &'static str {
    match p {
        Prim::Int => "java.lang.Integer",
        Prim::Long => "java.lang.Long",
        Prim::Double => "java.lang.Double",
        Prim::Float => "java.lang.Float",
        Prim::Boolean => "java.lang.Boolean",
        Prim::Char => "java.lang.Character",
        Prim::Short => "java.lang.Short",
        Prim::Byte => "java.lang.Byte",
        Prim::Void => "java.lang.Void",
    }
}

fn widens(from: Prim, to: Prim) -> bool {
    use Prim::*;
    if from == to {
        return true;
    }
    matches!(
        (from, to),
        (Byte, Short | Int | Long | Float | Double)
            | (Short, Int | Long | Float | Double)
            | (Char, Int | Long | Float | Double)
            | (Int, Long | Float | Double)
            | (Long, Float | Double)
            | (Float, Double)
    )
}

struct Scope {
    frames: Vec<HashMap<String, Ty>>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<Ty> {
        self.frames.iter().rev().find_map(|f| f.get(name).cloned())
    }
}

struct Checker<'p> {
    project: &'p Project,
    errors: Vec<CompileError>,
}

struct Ctx<'u> {
    unit: &'u CompilationUnit,
    class: Rc<ClassDecl>,
    method_desc: String,
    scope: Scope,
}

pub fn check_project(project: &Project) -> Vec<CompileError> {
    let mut c = Checker { project, errors: Vec::new() };
    for unit in &project.units {
        for class in &unit.classes {
            c.check_class(unit, class);
        }
    }
    c.errors
}

impl<'p> Checker<'p> {
    fn err(&mut self, file: &str, line: u32, col: u32, message: String, notes: Vec<String>) {
        let e = CompileError { file: file.to_string(), line, col, message, notes };
        if !self.errors.contains(&e) {
            self.errors.push(e);
        }
    }

    fn missing_class(&mut self, ctx_file: &str, class: &str, line: u32, col: u32, name: &str) {
        self.err(
            ctx_file,
            line,
            col,
            "cannot find symbol".into(),
            vec![format!("symbol:   class {name}"), format!("location: class {class}")],
        );
    }

    fn resolve_type(&mut self, unit: &CompilationUnit, class: &ClassDecl, t: &TypeRef, line: u32, col: u32) -> Ty {
        match t {
            TypeRef::Prim(p) => Ty::Prim(*p),
            TypeRef::Array(e) => Ty::Array(Box::new(self.resolve_type(unit, class, e, line, col))),
            TypeRef::Class(n) => {
                if n.len() == 1 && n.chars().all(|c| c.is_ascii_uppercase()) {
                    // type variable
                    return Ty::Unknown;
                }
                match self.project.resolve(unit, n) {
                    Some(c) => Ty::Class(c.fqn()),
                    None => {
                        self.missing_class(&unit.file, &class.name, line, col, n);
                        Ty::Unknown
                    }
                }
            }
        }
    }

    fn assignable(&self, from: &Ty, to: &Ty) -> bool {
        match (from, to) {
            (Ty::Unknown, _) | (_, Ty::Unknown) => true,
            (Ty::Prim(a), Ty::Prim(b)) => widens(*a, *b),
            (Ty::Null, Ty::Prim(_)) => false,
            (Ty::Null, _) => true,
            (Ty::Prim(p), Ty::Class(c)) => {
                c == box_name(*p) || c == "java.lang.Object" || (c == "java.lang.Number" && *p != Prim::Boolean && *p != Prim::Char)
            }
            (Ty::Class(c), Ty::Prim(p)) => unbox(c).map(|u| widens(u, *p)).unwrap_or(false),
            (Ty::Class(a), Ty::Class(b)) => {
                if a.len() == 1 || b.len() == 1 {
                    return true;
                }
                if self.project.resolve_qualified(a).is_none() || self.project.resolve_qualified(b).is_none() {
                    return true;
                }
                self.project.is_subtype(a, b)
            }
            (Ty::Array(_), Ty::Class(c)) => c == "java.lang.Object",
            (Ty::Array(a), Ty::Array(b)) => a == b || self.assignable(a, b) && !matches!(**a, Ty::Prim(_)),
            _ => false,
        }
    }

    fn check_class(&mut self, unit: &CompilationUnit, class: &Rc<ClassDecl>) {
        let file = unit.file.clone();
        for imp in &unit.imports {
            if imp.is_static {
                let owner = if imp.wildcard {
                    imp.path.trim_end_matches(".*").to_string()
                } else {
                    imp.path.rsplit_once('.').map(|(o, _)| o.to_string()).unwrap_or_default()
                };
                if self.project.resolve_qualified(&owner).is_none() {
                    self.err(
                        &file,
                        imp.line,
                        imp.col + 14,
                        "cannot find symbol".into(),
                        vec![format!("symbol: class {}", owner.rsplit('.').next().unwrap_or(""))],
                    );
                }
            } else if imp.wildcard {
                let pkg = imp.path.trim_end_matches(".*");
                if !self.project.package_exists(pkg) {
                    self.err(&file, imp.line, imp.col + 7, format!("package {pkg} does not exist"), vec![]);
                }
            } else if self.project.resolve_qualified(&imp.path).is_none() {
                let (pkg, name) = imp.path.rsplit_once('.').unwrap_or(("", &imp.path));
                if self.project.package_exists(pkg) {
                    self.err(
                        &file,
                        imp.line,
                        imp.col + 7,
                        "cannot find symbol".into(),
                        vec![format!("symbol:   class {name}"), format!("location: package {pkg}")],
                    );
                } else {
                    self.err(&file, imp.line, imp.col + 7, format!("package {pkg} does not exist"), vec![]);
                }
            }
        }
        if let Some((s, l, c)) = &class.superclass {
            if self.project.resolve(unit, s).is_none() {
                self.missing_class(&file, &class.name, *l, *c, s);
            }
        }
        for (s, l, c) in &class.interfaces {
            if self.project.resolve(unit, s).is_none() {
                self.missing_class(&file, &class.name, *l, *c, s);
            }
        }
        if !class.mods.is_abstract && !class.is_interface {
            self.check_abstract_impl(unit, class);
        }
        for f in &class.fields {
            let fty = self.resolve_type(unit, class, &f.ty, f.line, f.col);
            if let Some(init) = &f.init {
                let mut ctx = Ctx { unit, class: class.clone(), method_desc: String::new(), scope: Scope { frames: vec![HashMap::new()] } };
                let t = self.expr_or_array(&mut ctx, init, &fty);
                self.check_assign_compat(&file, init, &t, &fty);
            }
        }
        for m in &class.methods {
            for a in &m.annotations {
                if matches!(a.name.as_str(), "Override") {
                    continue;
                }
                if self.project.resolve(unit, &a.name).is_none() {
                    self.missing_class(&file, &class.name, a.line, a.col + 1, &a.name);
                }
                if let Some(exp) = &a.expected {
                    if self.project.resolve(unit, exp).is_none() {
                        self.missing_class(&file, &class.name, a.line, a.col, exp);
                    }
                }
            }
            let mut frame = HashMap::new();
            let mut ptys = Vec::new();
            for p in &m.params {
                let t = self.resolve_type(unit, class, &p.ty, p.line, p.col);
                ptys.push(t.display());
                frame.insert(p.name.clone(), t);
            }
            if let Some(r) = &m.ret {
                self.resolve_type(unit, class, r, m.line, m.col);
            }
            let name = if m.is_ctor { class.name.clone() } else { m.name.clone() };
            let method_desc = format!("{}({})", name, ptys.join(","));
            if let Some(body) = &m.body {
                let mut ctx = Ctx { unit, class: class.clone(), method_desc, scope: Scope { frames: vec![frame] } };
                self.block(&mut ctx, body);
            }
        }
    }

    fn check_abstract_impl(&mut self, unit: &CompilationUnit, class: &Rc<ClassDecl>) {
        // gather abstract methods from user supertypes and check each is implemented
        let me = ClassRef::User(class.clone());
        let mut concrete: Vec<(String, usize)> =
            class.methods.iter().filter(|m| m.body.is_some()).map(|m| (m.name.clone(), m.params.len())).collect();
        let mut abstracts: Vec<(String, usize, String, String)> = Vec::new();
        let mut stack = vec![me];
        let mut first = true;
        let mut guard = 0;
        while let Some(c) = stack.pop() {
            guard += 1;
            if guard > 32 {
                break;
            }
            if let ClassRef::User(decl) = &c {
                if !first {
                    for m in &decl.methods {
                        if m.body.is_some() && !decl.is_interface {
                            concrete.push((m.name.clone(), m.params.len()));
                        } else if m.body.is_none() {
                            let ptys: Vec<_> = m.params.iter().map(|p| p.ty.display()).collect();
                            abstracts.push((m.name.clone(), m.params.len(), format!("{}({})", m.name, ptys.join(",")), decl.name.clone()));
                        }
                    }
                }
            }
            first = false;
            if let Some(s) = self.project.superclass(&c) {
                stack.push(s);
            }
            stack.extend(self.project.interfaces(&c));
        }
        for (name, arity, desc, owner) in abstracts {
            if !concrete.iter().any(|(n, a)| *n == name && *a == arity) {
                self.err(
                    &unit.file,
                    class.line,
                    class.col.saturating_sub(0),
                    format!("{} is not abstract and does not override abstract method {} in {}", class.name, desc, owner),
                    vec![],
                );
                return;
            }
        }
    }

    fn check_assign_compat(&mut self, file: &str, at: &Expr, from: &Ty, to: &Ty) {
        if matches!(at.kind, ExprKind::ArrayLit(_)) {
            return;
        }
        if !self.assignable(from, to) && !self.int_literal_narrowing(at, to) {
            self.err(
                file,
                at.line,
                at.col,
                format!("incompatible types: {} cannot be converted to {}", from.display(), to.display()),
                vec![],
            );
        }
    }

    fn int_literal_narrowing(&self, at: &Expr, to: &Ty) -> bool {
        matches!((&at.kind, to), (ExprKind::Lit(Lit::Int(_)), Ty::Prim(Prim::Byte | Prim::Short | Prim::Char)))
            || matches!((&at.kind, to), (ExprKind::Lit(Lit::Int(_)), Ty::Class(c)) if c == "java.lang.Long" || c == "java.lang.Short" || c == "java.lang.Byte")
    }

    fn block(&mut self, ctx: &mut Ctx, b: &Block) {
        ctx.scope.frames.push(HashMap::new());
        for s in &b.stmts {
            self.stmt(ctx, s);
        }
        ctx.scope.frames.pop();
    }

    fn declare(&mut self, ctx: &mut Ctx, name: &str, ty: Ty, line: u32, col: u32) {
        if ctx.scope.lookup(name).is_some() {
            let method = ctx.method_desc.clone();
            self.err(&ctx.unit.file, line, col, format!("variable {name} is already defined in method {method}"), vec![]);
        }
        ctx.scope.frames.last_mut().unwrap().insert(name.to_string(), ty);
    }

    fn stmt(&mut self, ctx: &mut Ctx, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(b) => self.block(ctx, b),
            StmtKind::Local(decls) => {
                for d in decls {
                    let ty = self.resolve_type(ctx.unit, &ctx.class.clone(), &d.ty, s.line, s.col);
                    if let Some(init) = &d.init {
                        let t = self.expr_or_array(ctx, init, &ty);
                        self.check_assign_compat(&ctx.unit.file.clone(), init, &t, &ty);
                    }
                    self.declare(ctx, &d.name, ty, d.line, d.col);
                }
            }
            StmtKind::Expr(e) => {
                self.expr(ctx, e);
            }
            StmtKind::If { cond, then, els } => {
                self.expr(ctx, cond);
                self.scoped_stmt(ctx, then);
                if let Some(e) = els {
                    self.scoped_stmt(ctx, e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(ctx, cond);
                self.scoped_stmt(ctx, body);
            }
            StmtKind::DoWhile { body, cond } => {
                self.scoped_stmt(ctx, body);
                self.expr(ctx, cond);
            }
            StmtKind::For { init, cond, update, body } => {
                ctx.scope.frames.push(HashMap::new());
                for i in init {
                    self.stmt(ctx, i);
                }
                if let Some(c) = cond {
                    self.expr(ctx, c);
                }
                for u in update {
                    self.expr(ctx, u);
                }
                self.scoped_stmt(ctx, body);
                ctx.scope.frames.pop();
            }
            StmtKind::ForEach { var, iter, body } => {
                self.expr(ctx, iter);
                ctx.scope.frames.push(HashMap::new());
                let ty = self.resolve_type(ctx.unit, &ctx.class.clone(), &var.ty, var.line, var.col);
                self.declare(ctx, &var.name, ty, var.line, var.col);
                self.scoped_stmt(ctx, body);
                ctx.scope.frames.pop();
            }
            StmtKind::Return(Some(e)) => {
                self.expr(ctx, e);
            }
            StmtKind::Throw(e) => {
                self.expr(ctx, e);
            }
            StmtKind::Try { body, catches, finally } => {
                self.block(ctx, body);
                for c in catches {
                    ctx.scope.frames.push(HashMap::new());
                    let mut ty = Ty::Unknown;
                    for (n, l, col) in &c.types {
                        match self.project.resolve(ctx.unit, n) {
                            Some(r) => ty = Ty::Class(r.fqn()),
                            None => {
                                let cls = ctx.class.name.clone();
                                self.missing_class(&ctx.unit.file.clone(), &cls, *l, *col, n);
                            }
                        }
                    }
                    ctx.scope.frames.last_mut().unwrap().insert(c.var.clone(), ty);
                    self.block(ctx, &c.body);
                    ctx.scope.frames.pop();
                }
                if let Some(f) = finally {
                    self.block(ctx, f);
                }
            }
            StmtKind::Switch { scrutinee, arms } => {
                self.expr(ctx, scrutinee);
                ctx.scope.frames.push(HashMap::new());
                for a in arms {
                    for l in &a.labels {
                        self.expr(ctx, l);
                    }
                    for s in &a.body {
                        self.stmt(ctx, s);
                    }
                }
                ctx.scope.frames.pop();
            }
            StmtKind::CtorCall { is_super, args } => {
                let arg_tys: Vec<Ty> = args.iter().map(|a| self.expr(ctx, a)).collect();
                if *is_super {
                    if let Some(ClassRef::User(sup)) = self.project.superclass(&ClassRef::User(ctx.class.clone())) {
                        self.check_ctor(ctx, &sup, &arg_tys, s.line, s.col);
                    }
                }
            }
            StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue | StmtKind::Empty => {}
        }
    }

    fn scoped_stmt(&mut self, ctx: &mut Ctx, s: &Stmt) {
        ctx.scope.frames.push(HashMap::new());
        self.stmt(ctx, s);
        ctx.scope.frames.pop();
    }

    fn expr_or_array(&mut self, ctx: &mut Ctx, e: &Expr, expected: &Ty) -> Ty {
        if let ExprKind::ArrayLit(items) = &e.kind {
            let elem = match expected {
                Ty::Array(el) => (**el).clone(),
                _ => Ty::Unknown,
            };
            for i in items {
                self.expr_or_array(ctx, i, &elem);
            }
            return expected.clone();
        }
        self.expr(ctx, e)
    }

    /// Finds a field along the superclass chain.
    fn find_field(&self, class: &ClassRef, name: &str) -> Option<(Rc<ClassDecl>, usize)> {
        let mut cur = Some(class.clone());
        let mut guard = 0;
        while let Some(c) = cur {
            guard += 1;
            if guard > 32 {
                break;
            }
            if let ClassRef::User(d) = &c {
                if let Some(i) = d.fields.iter().position(|f| f.name == name) {
                    return Some((d.clone(), i));
                }
            }
            cur = self.project.superclass(&c);
        }
        None
    }

    /// All user-declared methods named `name` visible from `class`, nearest first.
    fn find_methods(&self, class: &ClassRef, name: &str) -> Vec<(Rc<ClassDecl>, Rc<MethodDecl>)> {
        let mut out = Vec::new();
        let mut stack = vec![class.clone()];
        let mut guard = 0;
        while let Some(c) = stack.pop() {
            guard += 1;
            if guard > 64 {
                break;
            }
            if let ClassRef::User(d) = &c {
                for m in d.methods.iter().filter(|m| m.name == name && !m.is_ctor) {
                    out.push((d.clone(), m.clone()));
                }
            }
            stack.extend(self.project.interfaces(&c));
            if let Some(s) = self.project.superclass(&c) {
                stack.push(s);
            }
        }
        out
    }

    fn field_type(&mut self, owner: &Rc<ClassDecl>, idx: usize) -> Ty {
        let f = &owner.fields[idx];
        let Some(unit) = self.project.unit_of(owner) else { return Ty::Unknown };
        let ty = f.ty.clone();
        let (l, c) = (f.line, f.col);
        let mut sink = Checker { project: self.project, errors: Vec::new() };
        sink.resolve_type(unit, owner, &ty, l, c)
    }

    fn method_ret(&mut self, owner: &Rc<ClassDecl>, m: &MethodDecl) -> Ty {
        let Some(r) = &m.ret else { return Ty::Unknown };
        let Some(unit) = self.project.unit_of(owner) else { return Ty::Unknown };
        let mut sink = Checker { project: self.project, errors: Vec::new() };
        sink.resolve_type(unit, owner, r, m.line, m.col)
    }

    fn param_types(&self, owner: &Rc<ClassDecl>, m: &MethodDecl) -> Vec<Ty> {
        let Some(unit) = self.project.unit_of(owner) else { return vec![Ty::Unknown; m.params.len()] };
        let mut sink = Checker { project: self.project, errors: Vec::new() };
        m.params.iter().map(|p| sink.resolve_type(unit, owner, &p.ty, p.line, p.col)).collect()
    }

    fn applicable(&self, params: &[Ty], args: &[Ty]) -> Result<(), String> {
        if params.len() != args.len() {
            return Err("actual and formal argument lists differ in length".into());
        }
        for (p, a) in params.iter().zip(args) {
            if !self.assignable(a, p) {
                return Err(format!("argument mismatch; {} cannot be converted to {}", a.display(), p.display()));
            }
        }
        Ok(())
    }

    fn arg_list(args: &[Ty]) -> String {
        if args.is_empty() {
            "no arguments".into()
        } else {
            args.iter().map(|a| a.display()).collect::<Vec<_>>().join(",")
        }
    }

    fn accessible(&self, ctx: &Ctx, owner: &ClassDecl, private: bool) -> bool {
        !private || owner.fqn() == ctx.class.fqn()
    }

    #[allow(clippy::too_many_arguments)]
    fn check_call(&mut self, ctx: &mut Ctx, owner_ref: &ClassRef, name: &str, args: &[Ty], line: u32, col: u32, location: String) -> Ty {
        let cands = self.find_methods(owner_ref, name);
        let file = ctx.unit.file.clone();
        if cands.is_empty() {
            if let ClassRef::Lib(_) = owner_ref {
                return Ty::Unknown;
            }
            // inherited from a library superclass (e.g. getMessage on an exception)
            let mut sup = self.project.superclass(owner_ref);
            while let Some(s) = sup {
                if let ClassRef::Lib(n) = s {
                    if n != "java.lang.Object" || matches!(name, "toString" | "equals" | "hashCode" | "getClass") {
                        return library::instance_return(n, name).map(|r| Ty::Class(r.into())).unwrap_or(Ty::Unknown);
                    }
                    break;
                }
                sup = self.project.superclass(&s);
            }
            self.err(
                &file,
                line,
                col,
                "cannot find symbol".into(),
                vec![
                    format!("symbol:   method {}({})", name, args.iter().map(|a| a.display()).collect::<Vec<_>>().join(",")),
                    format!("location: {location}"),
                ],
            );
            return Ty::Unknown;
        }
        let mut reasons = Vec::new();
        for (owner, m) in &cands {
            let params = self.param_types(owner, m);
            match self.applicable(&params, args) {
                Ok(()) => {
                    if !self.accessible(ctx, owner, m.mods.private) {
                        let ptys: Vec<_> = m.params.iter().map(|p| p.ty.display()).collect();
                        self.err(&file, line, col, format!("{}({}) has private access in {}", name, ptys.join(","), owner.name), vec![]);
                    }
                    return self.method_ret(&owner.clone(), &m.clone());
                }
                Err(r) => reasons.push((owner.clone(), m.clone(), params, r)),
            }
        }
        if reasons.len() == 1 {
            let (owner, _, params, r) = &reasons[0];
            self.err(
                &file,
                line,
                col,
                format!("method {} in class {} cannot be applied to given types;", name, owner.name),
                vec![
                    format!("required: {}", Self::arg_list(params)),
                    format!("found:    {}", Self::arg_list(args)),
                    format!("reason: {r}"),
                ],
            );
        } else {
            let mut notes = Vec::new();
            for (owner, _, params, r) in &reasons {
                notes.push(format!(
                    "method {}.{}({}) is not applicable",
                    owner.name,
                    name,
                    params.iter().map(|p| p.display()).collect::<Vec<_>>().join(",")
                ));
                notes.push(format!("  ({r})"));
            }
            self.err(
                &file,
                line,
                col,
                format!("no suitable method found for {}({})", name, args.iter().map(|a| a.display()).collect::<Vec<_>>().join(",")),
                notes,
            );
        }
        Ty::Unknown
    }

    fn check_ctor(&mut self, ctx: &mut Ctx, class: &Rc<ClassDecl>, args: &[Ty], line: u32, col: u32) {
        let ctors: Vec<_> = class.methods.iter().filter(|m| m.is_ctor).cloned().collect();
        let file = ctx.unit.file.clone();
        if ctors.is_empty() {
            if !args.is_empty() {
                self.err(
                    &file,
                    line,
                    col,
                    format!("constructor {} in class {} cannot be applied to given types;", class.name, class.name),
                    vec![
                        "required: no arguments".into(),
                        format!("found:    {}", Self::arg_list(args)),
                        "reason: actual and formal argument lists differ in length".into(),
                    ],
                );
            }
            return;
        }
        let mut reasons = Vec::new();
        for m in &ctors {
            let params = self.param_types(class, m);
            match self.applicable(&params, args) {
                Ok(()) => {
                    if !self.accessible(ctx, class, m.mods.private) {
                        let ptys: Vec<_> = m.params.iter().map(|p| p.ty.display()).collect();
                        self.err(
                            &file,
                            line,
                            col,
                            format!("{}({}) has private access in {}", class.name, ptys.join(","), class.name),
                            vec![],
                        );
                    }
                    return;
                }
                Err(r) => reasons.push((params, r)),
            }
        }
        if reasons.len() == 1 {
            let (params, r) = &reasons[0];
            self.err(
                &file,
                line,
                col,
                format!("constructor {} in class {} cannot be applied to given types;", class.name, class.name),
                vec![
                    format!("required: {}", Self::arg_list(params)),
                    format!("found:    {}", Self::arg_list(args)),
                    format!("reason: {r}"),
                ],
            );
        } else {
            self.err(
                &file,
                line,
                col,
                format!(
                    "no suitable constructor found for {}({})",
                    class.name,
                    args.iter().map(|a| a.display()).collect::<Vec<_>>().join(",")
                ),
                vec![],
            );
        }
    }

    fn has_static_import(&self, unit: &CompilationUnit, name: &str) -> bool {
        unit.imports.iter().any(|i| {
            i.is_static
                && ((i.wildcard && i.path == "org.junit.Assert.*" && library::ASSERT_METHODS.contains(&name))
                    || i.path.rsplit('.').next() == Some(name))
        })
    }

    fn binary_type(op: &str, l: &Ty, r: &Ty) -> Ty {
        match op {
            "&&" | "||" | "==" | "!=" | "<" | ">" | "<=" | ">=" => Ty::Prim(Prim::Boolean),
            "+" if *l == Ty::string() || *r == Ty::string() => Ty::string(),
            _ => {
                let unboxed = |t: &Ty| match t {
                    Ty::Class(c) => unbox(c).map(Ty::Prim).unwrap_or(Ty::Unknown),
                    other => other.clone(),
                };
                let (l, r) = (unboxed(l), unboxed(r));
                match (&l, &r) {
                    (Ty::Prim(Prim::Boolean), Ty::Prim(Prim::Boolean)) => Ty::Prim(Prim::Boolean),
                    (Ty::Prim(a), Ty::Prim(b)) if l.is_numeric() && r.is_numeric() => {
                        if matches!(op, "<<" | ">>" | ">>>") {
                            return Ty::Prim(if *a == Prim::Long { Prim::Long } else { Prim::Int });
                        }
                        let rank = |p: &Prim| match p {
                            Prim::Double => 4,
                            Prim::Float => 3,
                            Prim::Long => 2,
                            _ => 1,
                        };
                        Ty::Prim(match rank(a).max(rank(b)) {
                            4 => Prim::Double,
                            3 => Prim::Float,
                            2 => Prim::Long,
                            _ => Prim::Int,
                        })
                    }
                    _ => Ty::Unknown,
                }
            }
        }
    }

    fn expr(&mut self, ctx: &mut Ctx, e: &Expr) -> Ty {
        let file = ctx.unit.file.clone();
        match &e.kind {
            ExprKind::Lit(l) => match l {
                Lit::Int(_) => Ty::Prim(Prim::Int),
                Lit::Long(_) => Ty::Prim(Prim::Long),
                Lit::Float(_) => Ty::Prim(Prim::Float),
                Lit::Double(_) => Ty::Prim(Prim::Double),
                Lit::Char(_) => Ty::Prim(Prim::Char),
                Lit::Str(_) => Ty::string(),
                Lit::Bool(_) => Ty::Prim(Prim::Boolean),
                Lit::Null => Ty::Null,
            },
            ExprKind::Name(n) => {
                if let Some(t) = ctx.scope.lookup(n) {
                    return t;
                }
                if let Some((owner, i)) = self.find_field(&ClassRef::User(ctx.class.clone()), n) {
                    return self.field_type(&owner, i);
                }
                if let Some(c) = self.project.resolve(ctx.unit, n) {
                    return Ty::Static(c.fqn());
                }
                let cls = ctx.class.name.clone();
                self.err(
                    &file,
                    e.line,
                    e.col,
                    "cannot find symbol".into(),
                    vec![format!("symbol:   variable {n}"), format!("location: class {cls}")],
                );
                Ty::Unknown
            }
            ExprKind::This => Ty::Class(ctx.class.fqn()),
            ExprKind::Field { target, name } => {
                // fully qualified class names such as java.util.List
                if let Some(path) = crate::parser::dotted(e) {
                    if ctx.scope.lookup(path.split('.').next().unwrap()).is_none() {
                        if let Some(c) = self.project.resolve_qualified(&path) {
                            return Ty::Static(c.fqn());
                        }
                    }
                }
                let t = self.expr(ctx, target);
                self.field_access(ctx, &t, name, e)
            }
            ExprKind::Call { target, is_super, name, args } => {
                let arg_tys: Vec<Ty> = args.iter().map(|a| self.expr(ctx, a)).collect();
                let cls = ctx.class.clone();
                match target {
                    None if *is_super => match self.project.superclass(&ClassRef::User(cls.clone())) {
                        Some(sup) => self.check_call(ctx, &sup, name, &arg_tys, e.line, e.col, format!("class {}", cls.name)),
                        None => Ty::Unknown,
                    },
                    None => {
                        let own = self.find_methods(&ClassRef::User(cls.clone()), name);
                        if own.is_empty() && self.has_static_import(ctx.unit, name) {
                            return if matches!(name.as_str(), "fail") { Ty::Prim(Prim::Void) } else { Ty::Unknown };
                        }
                        self.check_call(ctx, &ClassRef::User(cls.clone()), name, &arg_tys, e.line, e.col, format!("class {}", cls.name))
                    }
                    Some(t) => {
                        let tt = self.expr(ctx, t);
                        let col = e.col + (t.end - t.start) as u32;
                        match &tt {
                            Ty::Static(c) | Ty::Class(c) => {
                                let Some(owner) = self.project.resolve_qualified(c) else { return Ty::Unknown };
                                match owner {
                                    ClassRef::User(_) => {
                                        let loc = match (&tt, &t.kind) {
                                            (Ty::Static(_), _) => format!("class {}", owner.simple()),
                                            (_, ExprKind::Name(v)) => format!("variable {v} of type {}", owner.simple()),
                                            _ => format!("class {}", owner.simple()),
                                        };
                                        self.check_call(ctx, &owner, name, &arg_tys, e.line, col, loc)
                                    }
                                    ClassRef::Lib(n) => {
                                        if matches!(tt, Ty::Static(_)) {
                                            if n == "org.junit.Assert" && !library::ASSERT_METHODS.contains(&name.as_str()) {
                                                self.err(
                                                    &file,
                                                    e.line,
                                                    col,
                                                    "cannot find symbol".into(),
                                                    vec![
                                                        format!(
                                                            "symbol:   method {}({})",
                                                            name,
                                                            arg_tys.iter().map(|a| a.display()).collect::<Vec<_>>().join(",")
                                                        ),
                                                        "location: class Assert".into(),
                                                    ],
                                                );
                                            }
                                            library::static_return(n, name).map(prim_or_class).unwrap_or(Ty::Unknown)
                                        } else {
                                            library::instance_return(n, name).map(prim_or_class).unwrap_or(Ty::Unknown)
                                        }
                                    }
                                }
                            }
                            _ => Ty::Unknown,
                        }
                    }
                }
            }
            ExprKind::New { class, args } => {
                let arg_tys: Vec<Ty> = args.iter().map(|a| self.expr(ctx, a)).collect();
                match self.project.resolve(ctx.unit, class) {
                    None => {
                        let cls = ctx.class.name.clone();
                        // javac points at the class name after `new `
                        self.missing_class(&file, &cls, e.line, e.col + 4, class);
                        Ty::Unknown
                    }
                    Some(ClassRef::User(c)) => {
                        if c.mods.is_abstract || c.is_interface {
                            self.err(&file, e.line, e.col, format!("{} is abstract; cannot be instantiated", c.name), vec![]);
                        } else {
                            self.check_ctor(ctx, &c, &arg_tys, e.line, e.col);
                        }
                        Ty::Class(c.fqn())
                    }
                    Some(ClassRef::Lib(n)) => {
                        if let Some((_, _, true)) = library::lookup(n) {
                            self.err(
                                &file,
                                e.line,
                                e.col,
                                format!("{} is abstract; cannot be instantiated", n.rsplit('.').next().unwrap()),
                                vec![],
                            );
                        }
                        Ty::Class(n.to_string())
                    }
                }
            }
            ExprKind::NewArray { elem, dims, extra_dims, init } => {
                for d in dims {
                    self.expr(ctx, d);
                }
                let cls = ctx.class.clone();
                let mut t = self.resolve_type(ctx.unit, &cls, elem, e.line, e.col + 4);
                for _ in 0..(dims.len() + extra_dims) {
                    t = Ty::Array(Box::new(t));
                }
                if let Some(items) = init {
                    let elem_t = match &t {
                        Ty::Array(inner) => (**inner).clone(),
                        _ => Ty::Unknown,
                    };
                    for i in items {
                        self.expr_or_array(ctx, i, &elem_t);
                    }
                }
                t
            }
            ExprKind::ArrayLit(items) => {
                for i in items {
                    self.expr(ctx, i);
                }
                Ty::Unknown
            }
            ExprKind::Index { target, index } => {
                let t = self.expr(ctx, target);
                self.expr(ctx, index);
                match t {
                    Ty::Array(el) => *el,
                    _ => Ty::Unknown,
                }
            }
            ExprKind::Unary { op, operand } => {
                let t = self.expr(ctx, operand);
                if *op == "!" {
                    Ty::Prim(Prim::Boolean)
                } else {
                    t
                }
            }
            ExprKind::IncDec { target, .. } => self.expr(ctx, target),
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.expr(ctx, lhs);
                let r = self.expr(ctx, rhs);
                Self::binary_type(op, &l, &r)
            }
            ExprKind::InstanceOf { expr, class } => {
                self.expr(ctx, expr);
                if self.project.resolve(ctx.unit, class).is_none() {
                    let cls = ctx.class.name.clone();
                    self.missing_class(&file, &cls, e.line, e.col, class);
                }
                Ty::Prim(Prim::Boolean)
            }
            ExprKind::Cond { cond, then, els } => {
                self.expr(ctx, cond);
                let t = self.expr(ctx, then);
                let f = self.expr(ctx, els);
                if t == Ty::Null {
                    f
                } else {
                    t
                }
            }
            ExprKind::Assign { op, target, value } => {
                let t = self.expr(ctx, target);
                let v = self.expr_or_array(ctx, value, &t);
                if *op == "=" {
                    self.check_assign_compat(&file, value, &v, &t);
                }
                t
            }
            ExprKind::Cast { ty, expr } => {
                self.expr(ctx, expr);
                let cls = ctx.class.clone();
                self.resolve_type(ctx.unit, &cls, ty, e.line, e.col + 1)
            }
            ExprKind::ClassLit(name) => {
                if Prim::from_name(name).is_none() && self.project.resolve(ctx.unit, name).is_none() {
                    let cls = ctx.class.name.clone();
                    self.missing_class(&file, &cls, e.line, e.col, name);
                }
                Ty::Unknown
            }
        }
    }

    fn field_access(&mut self, ctx: &mut Ctx, target: &Ty, name: &str, e: &Expr) -> Ty {
        let file = ctx.unit.file.clone();
        match target {
            Ty::Array(_) if name == "length" => Ty::Prim(Prim::Int),
            Ty::Static(c) | Ty::Class(c) => match self.project.resolve_qualified(c) {
                Some(ClassRef::User(d)) => match self.find_field(&ClassRef::User(d.clone()), name) {
                    Some((owner, i)) => {
                        if owner.fields[i].mods.private && owner.fqn() != ctx.class.fqn() {
                            self.err(&file, e.line, e.col, format!("{} has private access in {}", name, owner.name), vec![]);
                        }
                        self.field_type(&owner, i)
                    }
                    None => {
                        self.err(
                            &file,
                            e.line,
                            e.col,
                            "cannot find symbol".into(),
                            vec![format!("symbol:   variable {name}"), format!("location: class {}", d.name)],
                        );
                        Ty::Unknown
                    }
                },
                Some(ClassRef::Lib(n)) => library::static_field(n, name).map(prim_or_class).unwrap_or(Ty::Unknown),
                None => Ty::Unknown,
            },
            _ => Ty::Unknown,
        }
    }
}

fn prim_or_class(name: &str) -> Ty {
    match Prim::from_name(name) {
        Some(p) => Ty::Prim(p),
        None => Ty::Class(name.to_string()),
    }
}
