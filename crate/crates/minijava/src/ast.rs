//! Syntax tree for the supported Java subset.

use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub enum TypeRef {
    Prim(Prim),
    /// Dotted class name as written, with any type arguments dropped.
    Class(String),
    Array(Box<TypeRef>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prim {
    Int,
    Long,
    Short,
    Byte,
    Float,
    Double,
    Boolean,
    Char,
    Void,
}

impl Prim {
    pub fn from_name(s: &str) -> Option<Prim> {
        Some(match s {
            "int" => Prim::Int,
            "long" => Prim::Long,
            "short" => Prim::Short,
            "byte" => Prim::Byte,
            "float" => Prim::Float,
            "double" => Prim::Double,
            "boolean" => Prim::Boolean,
            "char" => Prim::Char,
            "void" => Prim::Void,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Prim::Int => "int",
            Prim::Long => "long",
            Prim::Short => "short",
            Prim::Byte => "byte",
            Prim::Float => "float",
            Prim::Double => "double",
            Prim::Boolean => "boolean",
            Prim::Char => "char",
            Prim::Void => "void",
        }
    }
}

impl TypeRef {
    pub fn display(&self) -> String {
        match self {
            TypeRef::Prim(p) => p.name().to_string(),
            TypeRef::Class(c) => c.rsplit('.').next().unwrap_or(c).to_string(),
            TypeRef::Array(e) => format!("{}[]", e.display()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Modifiers {
    pub public: bool,
    pub private: bool,
    pub protected: bool,
    pub is_static: bool,
    pub is_final: bool,
    pub is_abstract: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub name: String,
    /// `expected = Foo.class` is the only element value the runner understands.
    pub expected: Option<String>,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct CompilationUnit {
    pub file: String,
    pub package: Option<String>,
    pub imports: Vec<Import>,
    pub classes: Vec<Rc<ClassDecl>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Import {
    pub path: String,
    pub is_static: bool,
    pub wildcard: bool,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug)]
pub struct ClassDecl {
    pub name: String,
    pub package: Option<String>,
    pub file: String,
    pub mods: Modifiers,
    pub is_interface: bool,
    pub superclass: Option<(String, u32, u32)>,
    pub interfaces: Vec<(String, u32, u32)>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<Rc<MethodDecl>>,
    pub line: u32,
    pub col: u32,
}

impl ClassDecl {
    pub fn fqn(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.name),
            None => self.name.clone(),
        }
    }

    pub fn file_name(&self) -> &str {
        self.file.rsplit('/').next().unwrap_or(&self.file)
    }
}

#[derive(Debug)]
pub struct FieldDecl {
    pub name: String,
    pub ty: TypeRef,
    pub mods: Modifiers,
    pub init: Option<Expr>,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug)]
pub struct MethodDecl {
    pub name: String,
    pub mods: Modifiers,
    pub annotations: Vec<Annotation>,
    /// `None` for constructors.
    pub ret: Option<TypeRef>,
    pub params: Vec<Param>,
    pub body: Option<Block>,
    pub is_ctor: bool,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub ty: TypeRef,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeRef,
    pub init: Option<Expr>,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct CatchClause {
    pub types: Vec<(String, u32, u32)>,
    pub var: String,
    pub body: Block,
}

#[derive(Debug, Clone)]
pub struct SwitchArm {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub is_default: bool,
    pub body: Vec<Stmt>,
    pub line: u32,
    /// Source text of the arm head, e.g. `case 3`.
    pub text: String,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    Block(Block),
    Local(Vec<VarDecl>),
    Expr(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Vec<Stmt>,
        cond: Option<Expr>,
        update: Vec<Expr>,
        body: Box<Stmt>,
    },
    ForEach {
        var: VarDecl,
        iter: Expr,
        body: Box<Stmt>,
    },
    Return(Option<Expr>),
    Break,
    Continue,
    Throw(Expr),
    Try {
        body: Block,
        catches: Vec<CatchClause>,
        finally: Option<Block>,
    },
    Switch {
        scrutinee: Expr,
        arms: Vec<SwitchArm>,
    },
    /// `this(...)` / `super(...)` inside a constructor.
    CtorCall {
        is_super: bool,
        args: Vec<Expr>,
    },
    Empty,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub line: u32,
    pub col: u32,
    /// Byte span in the source file.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Int(i64),
    Long(i64),
    Float(f64),
    Double(f64),
    Char(char),
    Str(String),
    Bool(bool),
    Null,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Lit(Lit),
    Name(String),
    This,
    Field {
        target: Box<Expr>,
        name: String,
    },
    Call {
        target: Option<Box<Expr>>,
        is_super: bool,
        name: String,
        args: Vec<Expr>,
    },
    New {
        class: String,
        args: Vec<Expr>,
    },
    NewArray {
        elem: TypeRef,
        dims: Vec<Expr>,
        extra_dims: usize,
        init: Option<Vec<Expr>>,
    },
    ArrayLit(Vec<Expr>),
    Index {
        target: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: &'static str,
        operand: Box<Expr>,
    },
    /// `++x`, `x--` and friends.
    IncDec {
        op: &'static str,
        prefix: bool,
        target: Box<Expr>,
    },
    Binary {
        op: &'static str,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    InstanceOf {
        expr: Box<Expr>,
        class: String,
    },
    Cond {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Assign {
        op: &'static str,
        target: Box<Expr>,
        value: Box<Expr>,
    },
    Cast {
        ty: TypeRef,
        expr: Box<Expr>,
    },
    ClassLit(String),
}
