//! Tree-walking interpreter with Java-like values, exceptions and stack traces.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::ast::*;
use crate::coverage::{BranchKey, Coverage};
use crate::parser::dotted;
use crate::project::{ClassRef, Project};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub class: String,
    pub method: String,
    pub file: String,
    pub line: Option<u32>,
}

impl Frame {
    pub fn lib(class: &str, method: &str, line: u32) -> Frame {
        let file = format!("{}.java", class.rsplit('.').next().unwrap_or(class).split('$').next().unwrap_or(""));
        Frame { class: class.into(), method: method.into(), file, line: Some(line) }
    }

    pub fn native(class: &str, method: &str) -> Frame {
        Frame { class: class.into(), method: method.into(), file: String::new(), line: None }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.file.is_empty(), self.line) {
            (true, _) => write!(f, "{}.{}(Native Method)", self.class, self.method),
            (false, Some(l)) => write!(f, "{}.{}({}:{})", self.class, self.method, self.file, l),
            (false, None) => write!(f, "{}.{}({})", self.class, self.method, self.file),
        }
    }
}

#[derive(Clone)]
pub enum Value {
    Void,
    Null,
    Bool(bool),
    Char(char),
    Int(i32),
    Long(i64),
    Float(f32),
    Double(f64),
    Str(Rc<str>),
    Ref(Rc<Obj>),
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Void => write!(f, "void"),
            Value::Null => write!(f, "null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Char(c) => write!(f, "{c:?}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Long(i) => write!(f, "{i}L"),
            Value::Float(x) => write!(f, "{x}f"),
            Value::Double(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Ref(o) => write!(f, "{}@{}", o.class, o.id),
        }
    }
}

/// A storage slot remembering the declared primitive type, if any.
#[derive(Debug, Clone)]
pub struct Slot {
    pub v: Value,
    pub prim: Option<Prim>,
}

pub struct Obj {
    pub class: String,
    pub id: u32,
    pub fields: RefCell<HashMap<String, Slot>>,
    pub data: RefCell<Data>,
}

impl fmt::Debug for Obj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.class, self.id)
    }
}

#[derive(Debug, Clone)]
pub struct ThrowInfo {
    pub message: Option<String>,
    pub trace: Vec<Frame>,
    pub cause: Option<Rc<Obj>>,
}

#[derive(Debug)]
pub enum Data {
    Plain,
    Throwable(ThrowInfo),
    Array(Vec<Value>),
    List { items: Vec<Value>, fixed: bool, readonly: bool },
    Map { entries: Vec<(Value, Value)>, sorted: bool },
    Set { items: Vec<Value>, sorted: bool },
    Builder(String),
}

pub enum Flow {
    Throw(Rc<Obj>),
    Return(Value),
    Break,
    Continue,
    /// Not catchable by the program: fuel exhaustion or unsupported features.
    Abort(String),
}

pub type R<T> = Result<T, Flow>;

struct Env {
    scopes: Vec<HashMap<String, Slot>>,
    this: Option<Rc<Obj>>,
    class: Rc<ClassDecl>,
    unit: usize,
    file: Rc<str>,
    cover: bool,
}

pub struct Interp<'p> {
    pub project: &'p Project,
    frames: Vec<Frame>,
    envs: Vec<Env>,
    statics: HashMap<String, HashMap<String, Slot>>,
    static_init: HashSet<String>,
    unit_index: HashMap<String, usize>,
    test_files: HashSet<String>,
    pub fuel: u64,
    next_id: u32,
    pub stdout: String,
    pub coverage: Coverage,
    pub max_depth: usize,
}

pub const TIMEOUT: &str = "timeout";

fn prim_of(t: &TypeRef) -> Option<Prim> {
    match t {
        TypeRef::Prim(Prim::Void) => None,
        TypeRef::Prim(p) => Some(*p),
        _ => None,
    }
}

fn zero(t: &TypeRef) -> Value {
    match prim_of(t) {
        Some(Prim::Long) => Value::Long(0),
        Some(Prim::Float) => Value::Float(0.0),
        Some(Prim::Double) => Value::Double(0.0),
        Some(Prim::Boolean) => Value::Bool(false),
        Some(Prim::Char) => Value::Char('\0'),
        Some(_) => Value::Int(0),
        None => Value::Null,
    }
}

pub fn java_double(d: f64) -> String {
    if d.is_nan() {
        return "NaN".into();
    }
    if d.is_infinite() {
        return if d > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    let a = d.abs();
    if a == 0.0 || (1e-3..1e7).contains(&a) {
        let s = format!("{d}");
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        sci(format!("{d:e}"))
    }
}

pub fn java_float(x: f32) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-3..1e7).contains(&a) {
        let s = format!("{x}");
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        sci(format!("{x:e}"))
    }
}

fn sci(s: String) -> String {
    let (m, e) = s.split_once('e').unwrap_or((&s, "0"));
    let m = if m.contains('.') { m.to_string() } else { format!("{m}.0") };
    format!("{m}E{e}")
}

fn java_string_hash(s: &str) -> i32 {
    s.encode_utf16().fold(0i32, |h, c| h.wrapping_mul(31).wrapping_add(c as i32))
}

#[derive(Clone, Copy)]
enum Num {
    I(i32),
    L(i64),
    F(f32),
    D(f64),
}

impl Num {
    fn rank(self) -> u8 {
        match self {
            Num::I(_) => 0,
            Num::L(_) => 1,
            Num::F(_) => 2,
            Num::D(_) => 3,
        }
    }
    fn as_l(self) -> i64 {
        match self {
            Num::I(i) => i as i64,
            Num::L(l) => l,
            Num::F(f) => f as i64,
            Num::D(d) => d as i64,
        }
    }
    fn as_f(self) -> f32 {
        match self {
            Num::I(i) => i as f32,
            Num::L(l) => l as f32,
            Num::F(f) => f,
            Num::D(d) => d as f32,
        }
    }
    fn as_d(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::L(l) => l as f64,
            Num::F(f) => f as f64,
            Num::D(d) => d,
        }
    }
    fn as_i(self) -> i32 {
        match self {
            Num::I(i) => i,
            Num::L(l) => l as i32,
            Num::F(f) => f as i32,
            Num::D(d) => d as i32,
        }
    }
}

fn num_of(v: &Value) -> Option<Num> {
    Some(match v {
        Value::Int(i) => Num::I(*i),
        Value::Char(c) => Num::I(*c as i32),
        Value::Long(l) => Num::L(*l),
        Value::Float(f) => Num::F(*f),
        Value::Double(d) => Num::D(*d),
        _ => return None,
    })
}

fn is_numeric(v: &Value) -> bool {
    num_of(v).is_some()
}

fn convert_prim(v: &Value, p: Prim) -> Option<Value> {
    if p == Prim::Boolean {
        return match v {
            Value::Bool(b) => Some(Value::Bool(*b)),
            _ => None,
        };
    }
    let n = num_of(v)?;
    Some(match p {
        Prim::Int => Value::Int(n.as_i()),
        Prim::Short => Value::Int(n.as_i() as i16 as i32),
        Prim::Byte => Value::Int(n.as_i() as i8 as i32),
        Prim::Long => Value::Long(n.as_l()),
        Prim::Float => Value::Float(n.as_f()),
        Prim::Double => Value::Double(n.as_d()),
        Prim::Char => Value::Char(char::from_u32(n.as_i() as u16 as u32).unwrap_or('\u{fffd}')),
        Prim::Boolean | Prim::Void => return None,
    })
}

/// Coerces `new` to the representation of `old`, for array elements.
fn coerce_like(old: &Value, new: Value) -> Value {
    let p = match old {
        Value::Int(_) => Prim::Int,
        Value::Long(_) => Prim::Long,
        Value::Float(_) => Prim::Float,
        Value::Double(_) => Prim::Double,
        Value::Char(_) => Prim::Char,
        _ => return new,
    };
    convert_prim(&new, p).unwrap_or(new)
}

fn runtime_class(v: &Value) -> String {
    match v {
        Value::Int(_) => "java.lang.Integer".into(),
        Value::Long(_) => "java.lang.Long".into(),
        Value::Float(_) => "java.lang.Float".into(),
        Value::Double(_) => "java.lang.Double".into(),
        Value::Bool(_) => "java.lang.Boolean".into(),
        Value::Char(_) => "java.lang.Character".into(),
        Value::Str(_) => "java.lang.String".into(),
        Value::Ref(o) => o.class.clone(),
        Value::Null | Value::Void => String::new(),
    }
}

/// JUnit's ComparisonCompactor with a context length of 20.
pub fn compact_comparison(message: Option<&str>, expected: &str, actual: &str) -> String {
    const CTX: usize = 20;
    let prefix_msg = match message {
        Some(m) if !m.is_empty() => format!("{m} "),
        _ => String::new(),
    };
    let e: Vec<char> = expected.chars().collect();
    let a: Vec<char> = actual.chars().collect();
    if e == a {
        return format!("{prefix_msg}expected:<{expected}> but was:<{actual}>");
    }
    let end = e.len().min(a.len());
    let mut prefix = 0;
    while prefix < end && e[prefix] == a[prefix] {
        prefix += 1;
    }
    let mut es = e.len() as isize - 1;
    let mut as_ = a.len() as isize - 1;
    while as_ >= prefix as isize && es >= prefix as isize && e[es as usize] == a[as_ as usize] {
        as_ -= 1;
        es -= 1;
    }
    let suffix = (e.len() as isize - es) as usize;
    let common_prefix = {
        let start = prefix.saturating_sub(CTX);
        let s: String = e[start..prefix].iter().collect();
        if prefix > CTX {
            format!("...{s}")
        } else {
            s
        }
    };
    let common_suffix = {
        let from = e.len() - suffix + 1;
        let to = (from + CTX).min(e.len());
        let s: String = e[from..to].iter().collect();
        if from + CTX < e.len() {
            format!("{s}...")
        } else {
            s
        }
    };
    let compact = |src: &[char]| {
        let mid: String = src[prefix..src.len() - suffix + 1].iter().collect();
        let mut r = format!("[{mid}]");
        if prefix > 0 {
            r = format!("{common_prefix}{r}");
        }
        if suffix > 0 {
            r = format!("{r}{common_suffix}");
        }
        r
    };
    format!("{prefix_msg}expected:<{}> but was:<{}>", compact(&e), compact(&a))
}

impl<'p> Interp<'p> {
    pub fn new(project: &'p Project, coverage: Coverage) -> Interp<'p> {
        let unit_index = project.units.iter().enumerate().map(|(i, u)| (u.file.clone(), i)).collect();
        let test_files = project.files.iter().filter(|f| f.is_test).map(|f| f.rel_path.clone()).collect();
        Interp {
            project,
            frames: Vec::new(),
            envs: Vec::new(),
            statics: HashMap::new(),
            static_init: HashSet::new(),
            unit_index,
            test_files,
            fuel: 2_000_000,
            next_id: 0,
            stdout: String::new(),
            coverage,
            max_depth: 1000,
        }
    }

    // ----- bookkeeping -----

    fn env(&self) -> &Env {
        self.envs.last().expect("no active environment")
    }

    fn env_mut(&mut self) -> &mut Env {
        self.envs.last_mut().expect("no active environment")
    }

    fn unit(&self) -> &'p CompilationUnit {
        &self.project.units[self.env().unit]
    }

    fn set_line(&mut self, line: u32) {
        if let Some(f) = self.frames.last_mut() {
            f.line = Some(line);
        }
    }

    fn tick(&mut self) -> R<()> {
        if self.fuel == 0 {
            return Err(Flow::Abort(TIMEOUT.into()));
        }
        self.fuel -= 1;
        Ok(())
    }

    fn alloc(&mut self, class: &str, data: Data) -> Rc<Obj> {
        self.next_id += 1;
        Rc::new(Obj { class: class.to_string(), id: self.next_id, fields: RefCell::new(HashMap::new()), data: RefCell::new(data) })
    }

    fn identity_hash(o: &Obj) -> i32 {
        0x1b6d_3586_i32.wrapping_add((o.id as i32).wrapping_mul(0x9e3_779))
    }

    pub fn snapshot(&self) -> Vec<Frame> {
        self.frames.iter().rev().cloned().collect()
    }

    pub fn new_throwable(&mut self, class: &str, message: Option<String>, lib_frames: Vec<Frame>) -> Rc<Obj> {
        let mut trace = lib_frames;
        trace.extend(self.snapshot());
        self.alloc(class, Data::Throwable(ThrowInfo { message, trace, cause: None }))
    }

    fn throw<T>(&mut self, class: &str, message: Option<String>, lib_frames: Vec<Frame>) -> R<T> {
        Err(Flow::Throw(self.new_throwable(class, message, lib_frames)))
    }

    fn npe<T>(&mut self) -> R<T> {
        self.throw("java.lang.NullPointerException", None, vec![])
    }

    fn unsupported<T>(&self, what: impl Into<String>) -> R<T> {
        Err(Flow::Abort(format!("unsupported: {}", what.into())))
    }

    fn unit_idx_of(&self, c: &ClassDecl) -> usize {
        *self.unit_index.get(&c.file).unwrap_or(&0)
    }

    fn push_env(&mut self, class: &Rc<ClassDecl>, this: Option<Rc<Obj>>, method: &str, line: u32) {
        let file: Rc<str> = Rc::from(class.file.as_str());
        let cover = !self.test_files.contains(&class.file);
        self.envs.push(Env { scopes: vec![HashMap::new()], this, class: class.clone(), unit: self.unit_idx_of(class), file, cover });
        self.frames.push(Frame { class: class.fqn(), method: method.into(), file: class.file_name().into(), line: Some(line) });
    }

    fn pop_env(&mut self) {
        self.envs.pop();
        self.frames.pop();
    }

    fn declare(&mut self, name: &str, v: Value, prim: Option<Prim>) {
        self.env_mut().scopes.last_mut().unwrap().insert(name.to_string(), Slot { v, prim });
    }

    fn local(&self, name: &str) -> Option<&Slot> {
        self.env().scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn cover_line(&mut self, line: u32) {
        if self.env().cover {
            let f = self.env().file.clone();
            self.coverage.hit_line(&f, line);
        }
    }

    fn cover_branch(&mut self, key: BranchKey, taken: bool) {
        if self.env().cover {
            let f = self.env().file.clone();
            self.coverage.hit_branch(&f, key, taken);
        }
    }

    fn coerce(&mut self, v: Value, prim: Option<Prim>) -> R<Value> {
        match prim {
            None => Ok(v),
            Some(p) => match v {
                Value::Null => self.npe(),
                other => Ok(convert_prim(&other, p).unwrap_or(other)),
            },
        }
    }

    fn resolve_in(&self, unit: usize, name: &str) -> Option<ClassRef> {
        self.project.resolve(&self.project.units[unit], name)
    }

    fn resolve_name(&self, name: &str) -> Option<ClassRef> {
        self.project.resolve(self.unit(), name)
    }

    pub fn instance_of(&self, v: &Value, target: &str) -> bool {
        let rc = runtime_class(v);
        if rc.is_empty() {
            return false;
        }
        if rc.ends_with("[]") {
            return target == "java.lang.Object" || target == rc;
        }
        rc == target || self.project.is_subtype(&rc, target)
    }

    fn user_class(&self, fqn: &str) -> Option<Rc<ClassDecl>> {
        self.project.classes.get(fqn).cloned()
    }

    // ----- statics -----

    fn ensure_static(&mut self, class: &Rc<ClassDecl>) -> R<()> {
        let fqn = class.fqn();
        if !self.static_init.insert(fqn.clone()) {
            return Ok(());
        }
        if let Some(ClassRef::User(s)) = self.project.superclass(&ClassRef::User(class.clone())) {
            self.ensure_static(&s)?;
        }
        let mut map = HashMap::new();
        for f in class.fields.iter().filter(|f| f.mods.is_static) {
            map.insert(f.name.clone(), Slot { v: zero(&f.ty), prim: prim_of(&f.ty) });
        }
        self.statics.insert(fqn.clone(), map);
        let inits: Vec<_> = class.fields.iter().filter(|f| f.mods.is_static && f.init.is_some()).collect();
        if inits.is_empty() {
            return Ok(());
        }
        self.push_env(class, None, "<clinit>", class.line);
        let r = (|| {
            for f in inits {
                self.set_line(f.line);
                let v = self.eval_init(&f.ty, f.init.as_ref().unwrap())?;
                let v = self.coerce(v, prim_of(&f.ty))?;
                self.statics.get_mut(&fqn).unwrap().get_mut(&f.name).unwrap().v = v;
            }
            Ok(())
        })();
        self.pop_env();
        r
    }

    /// Finds the class along the superclass chain that declares static `name`.
    fn static_owner(&mut self, class: &Rc<ClassDecl>, name: &str) -> R<Option<String>> {
        let mut cur = Some(class.clone());
        while let Some(c) = cur {
            if c.fields.iter().any(|f| f.mods.is_static && f.name == name) {
                self.ensure_static(&c)?;
                return Ok(Some(c.fqn()));
            }
            cur = match self.project.superclass(&ClassRef::User(c)) {
                Some(ClassRef::User(s)) => Some(s),
                _ => None,
            };
        }
        Ok(None)
    }

    fn lib_static_field(&mut self, class: &str, name: &str) -> R<Value> {
        Ok(match (class, name) {
            ("java.lang.Integer", "MAX_VALUE") => Value::Int(i32::MAX),
            ("java.lang.Integer", "MIN_VALUE") => Value::Int(i32::MIN),
            ("java.lang.Long", "MAX_VALUE") => Value::Long(i64::MAX),
            ("java.lang.Long", "MIN_VALUE") => Value::Long(i64::MIN),
            ("java.lang.Double", "MAX_VALUE") => Value::Double(f64::MAX),
            ("java.lang.Double", "MIN_VALUE") => Value::Double(f64::from_bits(1)),
            ("java.lang.Double", "NaN") => Value::Double(f64::NAN),
            ("java.lang.Double", "POSITIVE_INFINITY") => Value::Double(f64::INFINITY),
            ("java.lang.Double", "NEGATIVE_INFINITY") => Value::Double(f64::NEG_INFINITY),
            ("java.lang.Math", "PI") => Value::Double(std::f64::consts::PI),
            ("java.lang.Math", "E") => Value::Double(std::f64::consts::E),
            ("java.lang.Boolean", "TRUE") => Value::Bool(true),
            ("java.lang.Boolean", "FALSE") => Value::Bool(false),
            ("java.lang.System", "out" | "err") => Value::Ref(self.alloc("java.io.PrintStream", Data::Plain)),
            _ => return self.unsupported(format!("{class}.{name}")),
        })
    }

    // ----- object creation -----

    pub fn instantiate(&mut self, class: &Rc<ClassDecl>, args: Vec<Value>) -> R<Value> {
        self.ensure_static(class)?;
        let fqn = class.fqn();
        let data = if self.project.is_subtype(&fqn, "java.lang.Throwable") {
            Data::Throwable(ThrowInfo { message: None, trace: self.snapshot(), cause: None })
        } else {
            Data::Plain
        };
        let obj = self.alloc(&fqn, data);
        let mut cur = Some(class.clone());
        while let Some(c) = cur {
            for f in c.fields.iter().filter(|f| !f.mods.is_static) {
                obj.fields.borrow_mut().entry(f.name.clone()).or_insert(Slot { v: zero(&f.ty), prim: prim_of(&f.ty) });
            }
            cur = match self.project.superclass(&ClassRef::User(c)) {
                Some(ClassRef::User(s)) => Some(s),
                _ => None,
            };
        }
        self.construct(class, &obj, args)?;
        Ok(Value::Ref(obj))
    }

    fn score(&self, unit: usize, t: &TypeRef, v: &Value) -> Option<u32> {
        match t {
            TypeRef::Prim(p) => match (p, v) {
                (Prim::Boolean, Value::Bool(_)) => Some(0),
                (Prim::Boolean, _) | (_, Value::Bool(_) | Value::Null | Value::Str(_) | Value::Ref(_) | Value::Void) => None,
                (p, v) => {
                    let exact = matches!(
                        (p, v),
                        (Prim::Int | Prim::Short | Prim::Byte, Value::Int(_))
                            | (Prim::Long, Value::Long(_))
                            | (Prim::Double, Value::Double(_))
                            | (Prim::Float, Value::Float(_))
                            | (Prim::Char, Value::Char(_))
                    );
                    let from = match v {
                        Value::Int(_) => Prim::Int,
                        Value::Long(_) => Prim::Long,
                        Value::Float(_) => Prim::Float,
                        Value::Double(_) => Prim::Double,
                        _ => Prim::Char,
                    };
                    let rank = |p: &Prim| match p {
                        Prim::Char | Prim::Byte | Prim::Short | Prim::Int => 0,
                        Prim::Long => 1,
                        Prim::Float => 2,
                        _ => 3,
                    };
                    if exact {
                        Some(0)
                    } else if rank(p) > rank(&from) || (from == Prim::Char && *p == Prim::Int) {
                        Some(1 + rank(p) - rank(&from))
                    } else {
                        None
                    }
                }
            },
            TypeRef::Array(_) => match v {
                Value::Null => Some(1),
                Value::Ref(o) if o.class.ends_with("[]") => Some(0),
                _ => None,
            },
            TypeRef::Class(n) => {
                if matches!(v, Value::Null) {
                    return Some(1);
                }
                match self.resolve_in(unit, n) {
                    None => Some(3),
                    Some(c) => {
                        let fqn = c.fqn();
                        let rc = runtime_class(v);
                        if rc == fqn {
                            Some(0)
                        } else if self.instance_of(v, &fqn) {
                            Some(2)
                        } else {
                            None
                        }
                    }
                }
            }
        }
    }

    fn pick<'m>(&self, unit: usize, methods: impl Iterator<Item = &'m Rc<MethodDecl>>, args: &[Value]) -> Option<Rc<MethodDecl>> {
        let mut best: Option<(u32, Rc<MethodDecl>)> = None;
        for m in methods {
            if m.params.len() != args.len() {
                continue;
            }
            let mut total = 0;
            let mut ok = true;
            for (p, a) in m.params.iter().zip(args) {
                match self.score(unit, &p.ty, a) {
                    Some(s) => total += s,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && best.as_ref().map(|(s, _)| total < *s).unwrap_or(true) {
                best = Some((total, m.clone()));
            }
        }
        best.map(|(_, m)| m)
    }

    fn construct(&mut self, class: &Rc<ClassDecl>, obj: &Rc<Obj>, args: Vec<Value>) -> R<()> {
        let unit = self.unit_idx_of(class);
        let has_ctors = class.methods.iter().any(|m| m.is_ctor);
        let ctor = self.pick(unit, class.methods.iter().filter(|m| m.is_ctor), &args);
        if has_ctors && ctor.is_none() {
            return self.unsupported(format!("no constructor of {} for {} arguments", class.name, args.len()));
        }
        let line = ctor.as_ref().map(|c| c.line).unwrap_or(class.line);
        self.push_env(class, Some(obj.clone()), "<init>", line);
        let r = self.construct_body(class, obj, ctor, args);
        self.pop_env();
        r
    }

    fn construct_body(&mut self, class: &Rc<ClassDecl>, obj: &Rc<Obj>, ctor: Option<Rc<MethodDecl>>, args: Vec<Value>) -> R<()> {
        let stmts: &[Stmt] = match &ctor {
            Some(c) => {
                for (p, a) in c.params.iter().zip(args) {
                    let v = self.coerce(a, prim_of(&p.ty))?;
                    self.declare(&p.name, v, prim_of(&p.ty));
                }
                c.body.as_ref().map(|b| b.stmts.as_slice()).unwrap_or(&[])
            }
            None => &[],
        };
        let mut rest = stmts;
        match stmts.first().map(|s| (&s.kind, s.line)) {
            Some((StmtKind::CtorCall { is_super: false, args }, line)) => {
                self.tick()?;
                let argv = self.eval_args(args)?;
                self.set_line(line);
                self.construct(class, obj, argv)?;
                rest = &stmts[1..];
                return self.run_ctor_rest(rest);
            }
            Some((StmtKind::CtorCall { is_super: true, args }, line)) => {
                self.tick()?;
                self.cover_line(line);
                let argv = self.eval_args(args)?;
                self.set_line(line);
                self.super_construct(class, obj, argv)?;
                rest = &stmts[1..];
            }
            _ => self.super_construct(class, obj, Vec::new())?,
        }
        for f in class.fields.iter().filter(|f| !f.mods.is_static) {
            if let Some(init) = &f.init {
                self.set_line(f.line);
                let v = self.eval_init(&f.ty, init)?;
                let v = self.coerce(v, prim_of(&f.ty))?;
                obj.fields.borrow_mut().insert(f.name.clone(), Slot { v, prim: prim_of(&f.ty) });
            }
        }
        self.run_ctor_rest(rest)
    }

    fn run_ctor_rest(&mut self, rest: &[Stmt]) -> R<()> {
        for s in rest {
            match self.exec(s) {
                Ok(()) => {}
                Err(Flow::Return(_)) => return Ok(()),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn super_construct(&mut self, class: &Rc<ClassDecl>, obj: &Rc<Obj>, args: Vec<Value>) -> R<()> {
        match self.project.superclass(&ClassRef::User(class.clone())) {
            Some(ClassRef::User(s)) => self.construct(&s, obj, args),
            Some(ClassRef::Lib(_)) => {
                let mut data = obj.data.borrow_mut();
                if let Data::Throwable(info) = &mut *data {
                    for a in args {
                        match a {
                            Value::Str(s) => info.message = Some(s.to_string()),
                            Value::Ref(c) if matches!(&*c.data.borrow(), Data::Throwable(_)) => {
                                if info.message.is_none() {
                                    info.message = Some(Self::throwable_header_plain(&c));
                                }
                                info.cause = Some(c.clone());
                            }
                            _ => {}
                        }
                    }
                }
                Ok(())
            }
            None => Ok(()),
        }
    }

    fn throwable_header_plain(o: &Obj) -> String {
        match &*o.data.borrow() {
            Data::Throwable(ThrowInfo { message: Some(m), .. }) => format!("{}: {}", o.class, m),
            _ => o.class.clone(),
        }
    }

    fn new_lib(&mut self, class: &str, args: Vec<Value>) -> R<Value> {
        if crate::library::is_exception(class) {
            let obj = self.new_throwable(class, None, vec![]);
            if let Data::Throwable(info) = &mut *obj.data.borrow_mut() {
                for a in args {
                    match a {
                        Value::Str(s) => info.message = Some(s.to_string()),
                        Value::Ref(c) => {
                            if info.message.is_none() {
                                info.message = Some(Self::throwable_header_plain(&c));
                            }
                            info.cause = Some(c);
                        }
                        _ => {}
                    }
                }
            }
            return Ok(Value::Ref(obj));
        }
        let data = match class {
            "java.util.ArrayList" | "java.util.LinkedList" => {
                let items = match args.first() {
                    Some(Value::Ref(o)) => self.iter_items(&Value::Ref(o.clone()))?,
                    _ => Vec::new(),
                };
                Data::List { items, fixed: false, readonly: false }
            }
            "java.util.HashMap" | "java.util.LinkedHashMap" | "java.util.TreeMap" => {
                let sorted = class == "java.util.TreeMap";
                let mut entries = Vec::new();
                if let Some(Value::Ref(o)) = args.first() {
                    if let Data::Map { entries: e, .. } = &*o.data.borrow() {
                        entries = e.clone();
                    }
                }
                let m = self.alloc(class, Data::Map { entries: Vec::new(), sorted });
                for (k, v) in entries {
                    self.map_put(&m, k, v)?;
                }
                return Ok(Value::Ref(m));
            }
            "java.util.HashSet" | "java.util.LinkedHashSet" | "java.util.TreeSet" => {
                let sorted = class == "java.util.TreeSet";
                let s = self.alloc(class, Data::Set { items: Vec::new(), sorted });
                if let Some(v @ Value::Ref(_)) = args.first() {
                    for it in self.iter_items(v)? {
                        self.set_add(&s, it)?;
                    }
                }
                return Ok(Value::Ref(s));
            }
            "java.lang.StringBuilder" => match args.first() {
                Some(Value::Str(s)) => Data::Builder(s.to_string()),
                _ => Data::Builder(String::new()),
            },
            "java.lang.String" => {
                return Ok(match args.first() {
                    Some(Value::Str(s)) => Value::Str(s.clone()),
                    _ => Value::Str(Rc::from("")),
                })
            }
            "java.lang.Object" => Data::Plain,
            "java.lang.Integer" | "java.lang.Long" | "java.lang.Double" | "java.lang.Boolean" | "java.lang.Character" => {
                return Ok(args.into_iter().next().unwrap_or(Value::Null));
            }
            other => return self.unsupported(format!("new {other}")),
        };
        Ok(Value::Ref(self.alloc(class, data)))
    }

    // ----- calls -----

    fn find_method(&self, start: &str, name: &str, args: &[Value]) -> Option<(Rc<ClassDecl>, Rc<MethodDecl>)> {
        let mut cur = self.user_class(start);
        while let Some(c) = cur {
            let unit = self.unit_idx_of(&c);
            if let Some(m) = self.pick(unit, c.methods.iter().filter(|m| !m.is_ctor && m.name == name && m.body.is_some()), args) {
                return Some((c, m));
            }
            cur = match self.project.superclass(&ClassRef::User(c)) {
                Some(ClassRef::User(s)) => Some(s),
                _ => None,
            };
        }
        None
    }

    pub fn call_method(&mut self, owner: &Rc<ClassDecl>, m: &Rc<MethodDecl>, this: Option<Rc<Obj>>, args: Vec<Value>) -> R<Value> {
        if self.frames.len() >= self.max_depth {
            return self.throw("java.lang.StackOverflowError", None, vec![]);
        }
        self.ensure_static(owner)?;
        self.push_env(owner, this, &m.name, m.line);
        let r = (|| {
            for (p, a) in m.params.iter().zip(args) {
                let v = self.coerce(a, prim_of(&p.ty))?;
                self.declare(&p.name, v, prim_of(&p.ty));
            }
            match &m.body {
                Some(b) => self.exec_block(b),
                None => self.unsupported(format!("abstract method {}", m.name)),
            }
        })();
        self.pop_env();
        match r {
            Ok(()) => Ok(Value::Void),
            Err(Flow::Return(v)) => {
                let prim = m.ret.as_ref().and_then(prim_of);
                self.coerce(v, prim)
            }
            Err(e) => Err(e),
        }
    }

    fn eval_args(&mut self, args: &[Expr]) -> R<Vec<Value>> {
        args.iter().map(|a| self.eval(a)).collect()
    }

    /// Returns the class a dotted name refers to, unless a variable shadows it.
    fn static_target(&mut self, e: &Expr) -> R<Option<ClassRef>> {
        let Some(path) = dotted(e) else { return Ok(None) };
        let first = path.split('.').next().unwrap();
        if self.local(first).is_some() {
            return Ok(None);
        }
        if let Some(this) = &self.env().this {
            if this.fields.borrow().contains_key(first) {
                return Ok(None);
            }
        }
        let cls = self.env().class.clone();
        if self.static_owner(&cls, first)?.is_some() {
            return Ok(None);
        }
        Ok(self.resolve_name(&path))
    }

    fn invoke_virtual(&mut self, recv: Value, name: &str, args: Vec<Value>) -> R<Value> {
        match &recv {
            Value::Null => self.npe(),
            Value::Ref(o) if self.project.classes.contains_key(&o.class) => {
                if let Some((owner, m)) = self.find_method(&o.class.clone(), name, &args) {
                    return self.call_method(&owner, &m, Some(o.clone()), args);
                }
                self.lib_instance(recv, name, args)
            }
            _ => self.lib_instance(recv, name, args),
        }
    }

    fn eval_call(&mut self, e: &Expr, target: &Option<Box<Expr>>, is_super: bool, name: &str, args: &[Expr]) -> R<Value> {
        match target {
            None if is_super => {
                let argv = self.eval_args(args)?;
                self.set_line(e.line);
                let cls = self.env().class.clone();
                let this = self.env().this.clone();
                match self.project.superclass(&ClassRef::User(cls)) {
                    Some(ClassRef::User(s)) => match self.find_method(&s.fqn(), name, &argv) {
                        Some((owner, m)) => self.call_method(&owner, &m, this, argv),
                        None => self.lib_instance(this.map(Value::Ref).unwrap_or(Value::Null), name, argv),
                    },
                    _ => self.lib_instance(this.map(Value::Ref).unwrap_or(Value::Null), name, argv),
                }
            }
            None => {
                let argv = self.eval_args(args)?;
                self.set_line(e.line);
                let this = self.env().this.clone();
                let cls = self.env().class.clone();
                let start = this.as_ref().map(|t| t.class.clone()).unwrap_or_else(|| cls.fqn());
                let found = self.find_method(&start, name, &argv).or_else(|| self.find_method(&cls.fqn(), name, &argv));
                match found {
                    Some((owner, m)) => {
                        let this = if m.mods.is_static { None } else { this };
                        self.call_method(&owner, &m, this, argv)
                    }
                    None => {
                        if crate::library::ASSERT_METHODS.contains(&name) {
                            return self.assert_call(name, argv);
                        }
                        match this {
                            Some(t) => self.lib_instance(Value::Ref(t), name, argv),
                            None => self.unsupported(format!("method {name}")),
                        }
                    }
                }
            }
            Some(t) => {
                if let Some(cls) = self.static_target(t)? {
                    let argv = self.eval_args(args)?;
                    self.set_line(e.line);
                    return match cls {
                        ClassRef::User(c) => match self.find_method(&c.fqn(), name, &argv) {
                            Some((owner, m)) => self.call_method(&owner, &m, None, argv),
                            None => self.unsupported(format!("static {}.{}", c.name, name)),
                        },
                        ClassRef::Lib("org.junit.Assert") => self.assert_call(name, argv),
                        ClassRef::Lib(n) => self.lib_static(n, name, argv),
                    };
                }
                let recv = self.eval(t)?;
                let argv = self.eval_args(args)?;
                self.set_line(e.line);
                self.invoke_virtual(recv, name, argv)
            }
        }
    }

    // ----- expressions -----

    fn eval_init(&mut self, ty: &TypeRef, init: &Expr) -> R<Value> {
        match (&init.kind, ty) {
            (ExprKind::ArrayLit(items), TypeRef::Array(elem)) => self.build_array(elem, items),
            _ => self.eval(init),
        }
    }

    fn build_array(&mut self, elem: &TypeRef, items: &[Expr]) -> R<Value> {
        let mut out = Vec::with_capacity(items.len());
        for i in items {
            let v = match (&i.kind, elem) {
                (ExprKind::ArrayLit(inner), TypeRef::Array(e2)) => self.build_array(e2, inner)?,
                _ => {
                    let v = self.eval(i)?;
                    self.coerce(v, prim_of(elem))?
                }
            };
            out.push(v);
        }
        let class = format!("{}[]", elem.display());
        Ok(Value::Ref(self.alloc(&class, Data::Array(out))))
    }

    fn new_array(&mut self, elem: &TypeRef, dims: &[i32], extra: usize) -> Value {
        let mut ty = elem.clone();
        for _ in 0..(dims.len() - 1 + extra) {
            ty = TypeRef::Array(Box::new(ty));
        }
        let items = if dims.len() > 1 {
            (0..dims[0]).map(|_| self.new_array(elem, &dims[1..], extra)).collect()
        } else {
            vec![zero(&ty); dims[0] as usize]
        };
        let class = format!("{}[]", ty.display());
        Value::Ref(self.alloc(&class, Data::Array(items)))
    }

    fn truthy(&mut self, e: &Expr) -> R<bool> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            Value::Null => self.npe(),
            other => self.unsupported(format!("non-boolean condition {other:?}")),
        }
    }

    fn cond_branch(&mut self, e: &Expr) -> R<bool> {
        let b = self.truthy(e)?;
        self.cover_branch(BranchKey::Cond(e.start), b);
        Ok(b)
    }

    pub fn eval(&mut self, e: &Expr) -> R<Value> {
        match &e.kind {
            ExprKind::Lit(l) => Ok(match l {
                Lit::Int(i) => Value::Int(*i as i32),
                Lit::Long(l) => Value::Long(*l),
                Lit::Float(f) => Value::Float(*f as f32),
                Lit::Double(d) => Value::Double(*d),
                Lit::Char(c) => Value::Char(*c),
                Lit::Str(s) => Value::Str(Rc::from(s.as_str())),
                Lit::Bool(b) => Value::Bool(*b),
                Lit::Null => Value::Null,
            }),
            ExprKind::Name(_) | ExprKind::Field { .. } | ExprKind::Index { .. } => {
                let p = self.place(e)?;
                self.load(&p)
            }
            ExprKind::This => Ok(self.env().this.clone().map(Value::Ref).unwrap_or(Value::Null)),
            ExprKind::Call { target, is_super, name, args } => self.eval_call(e, target, *is_super, name, args),
            ExprKind::New { class, args } => {
                let argv = self.eval_args(args)?;
                self.set_line(e.line);
                match self.resolve_name(class) {
                    Some(ClassRef::User(c)) => self.instantiate(&c, argv),
                    Some(ClassRef::Lib(n)) => self.new_lib(n, argv),
                    None => self.unsupported(format!("class {class}")),
                }
            }
            ExprKind::NewArray { elem, dims, extra_dims, init } => {
                if let Some(items) = init {
                    let mut ty = elem.clone();
                    for _ in 1..*extra_dims {
                        ty = TypeRef::Array(Box::new(ty));
                    }
                    return self.build_array(&ty, items);
                }
                let mut sizes = Vec::new();
                for d in dims {
                    match self.eval(d)? {
                        Value::Int(n) if n >= 0 => sizes.push(n),
                        Value::Int(n) => return self.throw("java.lang.NegativeArraySizeException", Some(n.to_string()), vec![]),
                        Value::Char(c) => sizes.push(c as i32),
                        other => return self.unsupported(format!("array size {other:?}")),
                    }
                }
                Ok(self.new_array(elem, &sizes, *extra_dims))
            }
            ExprKind::ArrayLit(items) => self.build_array(&TypeRef::Class("Object".into()), items),
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                self.unary(op, v)
            }
            ExprKind::IncDec { op, prefix, target } => {
                let p = self.place(target)?;
                let old = self.load(&p)?;
                let one = match old {
                    Value::Null => return self.npe(),
                    _ => Value::Int(1),
                };
                let raw = self.binop(if *op == "++" { "+" } else { "-" }, old.clone(), one)?;
                let new = coerce_like(&old, raw);
                self.store(&p, new.clone())?;
                Ok(if *prefix { new } else { old })
            }
            ExprKind::Binary { op, lhs, rhs } => match *op {
                "&&" => {
                    if !self.truthy(lhs)? {
                        return Ok(Value::Bool(false));
                    }
                    Ok(Value::Bool(self.truthy(rhs)?))
                }
                "||" => {
                    if self.truthy(lhs)? {
                        return Ok(Value::Bool(true));
                    }
                    Ok(Value::Bool(self.truthy(rhs)?))
                }
                _ => {
                    let l = self.eval(lhs)?;
                    let r = self.eval(rhs)?;
                    self.set_line(e.line);
                    self.binop(op, l, r)
                }
            },
            ExprKind::InstanceOf { expr, class } => {
                let v = self.eval(expr)?;
                let target = self.resolve_name(class).map(|c| c.fqn()).unwrap_or_else(|| class.clone());
                Ok(Value::Bool(self.instance_of(&v, &target)))
            }
            ExprKind::Cond { cond, then, els } => {
                if self.cond_branch(cond)? {
                    self.eval(then)
                } else {
                    self.eval(els)
                }
            }
            ExprKind::Assign { op, target, value } => {
                let p = self.place(target)?;
                if *op == "=" {
                    let v = match (&value.kind, &p) {
                        (ExprKind::ArrayLit(items), _) => self.build_array(&TypeRef::Class("Object".into()), items)?,
                        _ => self.eval(value)?,
                    };
                    self.store(&p, v.clone())?;
                    return self.load(&p);
                }
                let old = self.load(&p)?;
                let rhs = self.eval(value)?;
                self.set_line(e.line);
                let bop = &op[..op.len() - 1];
                let raw = self.binop(bop, old.clone(), rhs)?;
                let new = coerce_like(&old, raw);
                self.store(&p, new.clone())?;
                Ok(new)
            }
            ExprKind::Cast { ty, expr } => {
                let v = self.eval(expr)?;
                self.cast(ty, v)
            }
            ExprKind::ClassLit(name) => Ok(Value::Str(Rc::from(name.as_str()))),
        }
    }

    fn cast(&mut self, ty: &TypeRef, v: Value) -> R<Value> {
        match ty {
            TypeRef::Prim(p) => match v {
                Value::Null => self.npe(),
                other => Ok(convert_prim(&other, *p).unwrap_or(other)),
            },
            TypeRef::Array(_) => Ok(v),
            TypeRef::Class(n) => {
                if matches!(v, Value::Null) {
                    return Ok(v);
                }
                let Some(target) = self.resolve_name(n) else { return Ok(v) };
                let fqn = target.fqn();
                if self.instance_of(&v, &fqn) {
                    Ok(v)
                } else {
                    let msg = format!("{} cannot be cast to {}", runtime_class(&v), fqn);
                    self.throw("java.lang.ClassCastException", Some(msg), vec![])
                }
            }
        }
    }

    fn unary(&mut self, op: &str, v: Value) -> R<Value> {
        if matches!(v, Value::Null) {
            return self.npe();
        }
        match op {
            "!" => match v {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                _ => self.unsupported("! on non-boolean"),
            },
            "-" => Ok(match num_of(&v) {
                Some(Num::I(i)) => Value::Int(i.wrapping_neg()),
                Some(Num::L(l)) => Value::Long(l.wrapping_neg()),
                Some(Num::F(f)) => Value::Float(-f),
                Some(Num::D(d)) => Value::Double(-d),
                None => return self.unsupported("unary minus"),
            }),
            "+" => Ok(match num_of(&v) {
                Some(Num::I(i)) => Value::Int(i),
                _ => v,
            }),
            "~" => Ok(match num_of(&v) {
                Some(Num::I(i)) => Value::Int(!i),
                Some(Num::L(l)) => Value::Long(!l),
                _ => return self.unsupported("~ on non-integral"),
            }),
            _ => self.unsupported(format!("unary {op}")),
        }
    }

    fn ref_eq(a: &Value, b: &Value) -> bool {
        match (a, b) {
            (Value::Null, Value::Null) => true,
            (Value::Ref(x), Value::Ref(y)) => Rc::ptr_eq(x, y),
            (Value::Str(x), Value::Str(y)) => x == y,
            (Value::Bool(x), Value::Bool(y)) => x == y,
            _ => false,
        }
    }

    pub fn binop(&mut self, op: &str, l: Value, r: Value) -> R<Value> {
        if op == "+" && (matches!(l, Value::Str(_)) || matches!(r, Value::Str(_))) {
            let a = self.to_jstring(&l)?;
            let b = self.to_jstring(&r)?;
            return Ok(Value::Str(Rc::from(format!("{a}{b}"))));
        }
        if op == "==" || op == "!=" {
            let eq = match (num_of(&l), num_of(&r)) {
                (Some(a), Some(b)) => Self::num_cmp(a, b) == Some(Ordering::Equal),
                _ => Self::ref_eq(&l, &r),
            };
            return Ok(Value::Bool(if op == "==" { eq } else { !eq }));
        }
        if let (Value::Bool(a), Value::Bool(b)) = (&l, &r) {
            return Ok(Value::Bool(match op {
                "&" => *a & *b,
                "|" => *a | *b,
                "^" => *a ^ *b,
                _ => return self.unsupported(format!("boolean {op}")),
            }));
        }
        let (Some(a), Some(b)) = (num_of(&l), num_of(&r)) else {
            if matches!(l, Value::Null) || matches!(r, Value::Null) {
                return self.npe();
            }
            return self.unsupported(format!("operator {op} on {l:?} and {r:?}"));
        };
        if matches!(op, "<" | ">" | "<=" | ">=") {
            let c = Self::num_cmp(a, b);
            return Ok(Value::Bool(match (op, c) {
                (_, None) => false,
                ("<", Some(c)) => c == Ordering::Less,
                (">", Some(c)) => c == Ordering::Greater,
                ("<=", Some(c)) => c != Ordering::Greater,
                (_, Some(c)) => c != Ordering::Less,
            }));
        }
        if matches!(op, "<<" | ">>" | ">>>") {
            let n = b.as_l();
            return Ok(match a {
                Num::L(x) => {
                    let s = (n & 63) as u32;
                    Value::Long(match op {
                        "<<" => x.wrapping_shl(s),
                        ">>" => x.wrapping_shr(s),
                        _ => ((x as u64) >> s) as i64,
                    })
                }
                _ => {
                    let x = a.as_i();
                    let s = (n & 31) as u32;
                    Value::Int(match op {
                        "<<" => x.wrapping_shl(s),
                        ">>" => x.wrapping_shr(s),
                        _ => ((x as u32) >> s) as i32,
                    })
                }
            });
        }
        let rank = a.rank().max(b.rank());
        match rank {
            0 | 1 => {
                let (x, y) = (a.as_l(), b.as_l());
                if (op == "/" || op == "%") && y == 0 {
                    return self.throw("java.lang.ArithmeticException", Some("/ by zero".into()), vec![]);
                }
                if rank == 0 {
                    let (x, y) = (x as i32, y as i32);
                    Ok(Value::Int(match op {
                        "+" => x.wrapping_add(y),
                        "-" => x.wrapping_sub(y),
                        "*" => x.wrapping_mul(y),
                        "/" => x.wrapping_div(y),
                        "%" => x.wrapping_rem(y),
                        "&" => x & y,
                        "|" => x | y,
                        "^" => x ^ y,
                        _ => return self.unsupported(format!("int {op}")),
                    }))
                } else {
                    Ok(Value::Long(match op {
                        "+" => x.wrapping_add(y),
                        "-" => x.wrapping_sub(y),
                        "*" => x.wrapping_mul(y),
                        "/" => x.wrapping_div(y),
                        "%" => x.wrapping_rem(y),
                        "&" => x & y,
                        "|" => x | y,
                        "^" => x ^ y,
                        _ => return self.unsupported(format!("long {op}")),
                    }))
                }
            }
            2 => {
                let (x, y) = (a.as_f(), b.as_f());
                Ok(Value::Float(match op {
                    "+" => x + y,
                    "-" => x - y,
                    "*" => x * y,
                    "/" => x / y,
                    "%" => x % y,
                    _ => return self.unsupported(format!("float {op}")),
                }))
            }
            _ => {
                let (x, y) = (a.as_d(), b.as_d());
                Ok(Value::Double(match op {
                    "+" => x + y,
                    "-" => x - y,
                    "*" => x * y,
                    "/" => x / y,
                    "%" => x % y,
                    _ => return self.unsupported(format!("double {op}")),
                }))
            }
        }
    }

    fn num_cmp(a: Num, b: Num) -> Option<Ordering> {
        match a.rank().max(b.rank()) {
            0 | 1 => Some(a.as_l().cmp(&b.as_l())),
            _ => a.as_d().partial_cmp(&b.as_d()),
        }
    }

    // ----- places -----

    fn place(&mut self, e: &Expr) -> R<Place> {
        match &e.kind {
            ExprKind::Name(n) => {
                if self.local(n).is_some() {
                    return Ok(Place::Local(n.clone()));
                }
                if let Some(this) = self.env().this.clone() {
                    if this.fields.borrow().contains_key(n) {
                        return Ok(Place::Field(this, n.clone()));
                    }
                }
                let cls = self.env().class.clone();
                if let Some(owner) = self.static_owner(&cls, n)? {
                    return Ok(Place::Static(owner, n.clone()));
                }
                self.unsupported(format!("unresolved name {n}"))
            }
            ExprKind::Field { target, name } => {
                if let Some(cls) = self.static_target(target)? {
                    return match cls {
                        ClassRef::User(c) => match self.static_owner(&c, name)? {
                            Some(owner) => Ok(Place::Static(owner, name.clone())),
                            None => self.unsupported(format!("static field {}.{}", c.name, name)),
                        },
                        ClassRef::Lib(n) => Ok(Place::Value(self.lib_static_field(n, name)?)),
                    };
                }
                let t = self.eval(target)?;
                match t {
                    Value::Null => {
                        self.set_line(e.line);
                        self.npe()
                    }
                    Value::Ref(o) => {
                        if let Data::Array(items) = &*o.data.borrow() {
                            if name == "length" {
                                return Ok(Place::Value(Value::Int(items.len() as i32)));
                            }
                        }
                        if o.fields.borrow().contains_key(name) {
                            return Ok(Place::Field(o, name.clone()));
                        }
                        if let Some(c) = self.user_class(&o.class) {
                            if let Some(owner) = self.static_owner(&c, name)? {
                                return Ok(Place::Static(owner, name.clone()));
                            }
                        }
                        self.unsupported(format!("field {name}"))
                    }
                    other => self.unsupported(format!("field {name} of {other:?}")),
                }
            }
            ExprKind::Index { target, index } => {
                let t = self.eval(target)?;
                let i = self.eval(index)?;
                self.set_line(e.line);
                let idx = match num_of(&i) {
                    Some(n) => n.as_i(),
                    None => return self.npe(),
                };
                match t {
                    Value::Null => self.npe(),
                    Value::Ref(o) => {
                        let len = match &*o.data.borrow() {
                            Data::Array(items) => items.len(),
                            _ => return self.unsupported("indexing a non-array"),
                        };
                        if idx < 0 || idx as usize >= len {
                            return self.throw("java.lang.ArrayIndexOutOfBoundsException", Some(idx.to_string()), vec![]);
                        }
                        Ok(Place::Elem(o, idx as usize))
                    }
                    _ => self.unsupported("indexing a non-array"),
                }
            }
            _ => Ok(Place::Value(self.eval(e)?)),
        }
    }

    fn load(&mut self, p: &Place) -> R<Value> {
        Ok(match p {
            Place::Local(n) => self.local(n).map(|s| s.v.clone()).unwrap_or(Value::Null),
            Place::Field(o, n) => o.fields.borrow().get(n).map(|s| s.v.clone()).unwrap_or(Value::Null),
            Place::Static(c, n) => self.statics.get(c).and_then(|m| m.get(n)).map(|s| s.v.clone()).unwrap_or(Value::Null),
            Place::Elem(o, i) => match &*o.data.borrow() {
                Data::Array(items) => items[*i].clone(),
                _ => Value::Null,
            },
            Place::Value(v) => v.clone(),
        })
    }

    fn store(&mut self, p: &Place, v: Value) -> R<()> {
        match p {
            Place::Local(n) => {
                let prim = self.local(n).and_then(|s| s.prim);
                let v = self.coerce(v, prim)?;
                for scope in self.env_mut().scopes.iter_mut().rev() {
                    if let Some(s) = scope.get_mut(n) {
                        s.v = v;
                        return Ok(());
                    }
                }
                Ok(())
            }
            Place::Field(o, n) => {
                let prim = o.fields.borrow().get(n).and_then(|s| s.prim);
                let v = self.coerce(v, prim)?;
                if let Some(s) = o.fields.borrow_mut().get_mut(n) {
                    s.v = v;
                }
                Ok(())
            }
            Place::Static(c, n) => {
                let prim = self.statics.get(c).and_then(|m| m.get(n)).and_then(|s| s.prim);
                let v = self.coerce(v, prim)?;
                if let Some(s) = self.statics.get_mut(c).and_then(|m| m.get_mut(n)) {
                    s.v = v;
                }
                Ok(())
            }
            Place::Elem(o, i) => {
                if let Data::Array(items) = &mut *o.data.borrow_mut() {
                    let new = coerce_like(&items[*i], v);
                    items[*i] = new;
                }
                Ok(())
            }
            Place::Value(_) => self.unsupported("assignment to a non-variable"),
        }
    }

    // ----- statements -----

    pub fn exec_block(&mut self, b: &Block) -> R<()> {
        let depth = self.env().scopes.len();
        self.env_mut().scopes.push(HashMap::new());
        let mut r = Ok(());
        for s in &b.stmts {
            r = self.exec(s);
            if r.is_err() {
                break;
            }
        }
        self.env_mut().scopes.truncate(depth);
        r
    }

    fn scoped(&mut self, s: &Stmt) -> R<()> {
        let depth = self.env().scopes.len();
        self.env_mut().scopes.push(HashMap::new());
        let r = self.exec(s);
        self.env_mut().scopes.truncate(depth);
        r
    }

    fn exec(&mut self, s: &Stmt) -> R<()> {
        self.tick()?;
        if !matches!(s.kind, StmtKind::Block(_) | StmtKind::Try { .. } | StmtKind::Empty) {
            self.set_line(s.line);
            self.cover_line(s.line);
        }
        match &s.kind {
            StmtKind::Block(b) => self.exec_block(b),
            StmtKind::Local(decls) => {
                for d in decls {
                    let prim = prim_of(&d.ty);
                    let v = match &d.init {
                        Some(init) => {
                            let v = self.eval_init(&d.ty, init)?;
                            self.set_line(s.line);
                            self.coerce(v, prim)?
                        }
                        None => zero(&d.ty),
                    };
                    self.declare(&d.name, v, prim);
                }
                Ok(())
            }
            StmtKind::Expr(e) => self.eval(e).map(|_| ()),
            StmtKind::If { cond, then, els } => {
                if self.cond_branch(cond)? {
                    self.scoped(then)
                } else if let Some(e) = els {
                    self.scoped(e)
                } else {
                    Ok(())
                }
            }
            StmtKind::While { cond, body } => loop {
                self.tick()?;
                self.set_line(s.line);
                if !self.cond_branch(cond)? {
                    return Ok(());
                }
                match self.scoped(body) {
                    Ok(()) | Err(Flow::Continue) => {}
                    Err(Flow::Break) => return Ok(()),
                    Err(e) => return Err(e),
                }
            },
            StmtKind::DoWhile { body, cond } => loop {
                self.tick()?;
                match self.scoped(body) {
                    Ok(()) | Err(Flow::Continue) => {}
                    Err(Flow::Break) => return Ok(()),
                    Err(e) => return Err(e),
                }
                if !self.cond_branch(cond)? {
                    return Ok(());
                }
            },
            StmtKind::For { init, cond, update, body } => {
                let depth = self.env().scopes.len();
                self.env_mut().scopes.push(HashMap::new());
                let r = (|| {
                    for i in init {
                        self.exec(i)?;
                    }
                    loop {
                        self.tick()?;
                        if let Some(c) = cond {
                            self.set_line(s.line);
                            if !self.cond_branch(c)? {
                                return Ok(());
                            }
                        }
                        match self.scoped(body) {
                            Ok(()) | Err(Flow::Continue) => {}
                            Err(Flow::Break) => return Ok(()),
                            Err(e) => return Err(e),
                        }
                        for u in update {
                            self.eval(u)?;
                        }
                    }
                })();
                self.env_mut().scopes.truncate(depth);
                r
            }
            StmtKind::ForEach { var, iter, body } => {
                let coll = self.eval(iter)?;
                let items = self.iter_items(&coll)?;
                let prim = prim_of(&var.ty);
                for it in items {
                    self.tick()?;
                    let depth = self.env().scopes.len();
                    self.env_mut().scopes.push(HashMap::new());
                    let r = self.coerce(it, prim).and_then(|v| {
                        self.declare(&var.name, v, prim);
                        self.exec(body)
                    });
                    self.env_mut().scopes.truncate(depth);
                    match r {
                        Ok(()) | Err(Flow::Continue) => {}
                        Err(Flow::Break) => break,
                        Err(e) => return Err(e),
                    }
                }
                Ok(())
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::Void,
                };
                Err(Flow::Return(v))
            }
            StmtKind::Break => Err(Flow::Break),
            StmtKind::Continue => Err(Flow::Continue),
            StmtKind::Throw(e) => {
                let v = self.eval(e)?;
                self.set_line(s.line);
                match v {
                    Value::Ref(o) => Err(Flow::Throw(o)),
                    _ => self.npe(),
                }
            }
            StmtKind::Try { body, catches, finally } => {
                let depth = self.env().scopes.len();
                let mut r = self.exec_block(body);
                if let Err(Flow::Throw(ex)) = &r {
                    let ex = ex.clone();
                    self.env_mut().scopes.truncate(depth);
                    let v = Value::Ref(ex.clone());
                    'outer: for c in catches {
                        for (t, _, _) in &c.types {
                            let fqn = self.resolve_name(t).map(|c| c.fqn()).unwrap_or_else(|| t.clone());
                            if self.instance_of(&v, &fqn) {
                                self.env_mut().scopes.push(HashMap::new());
                                self.declare(&c.var, v.clone(), None);
                                r = self.exec_block(&c.body);
                                self.env_mut().scopes.truncate(depth);
                                break 'outer;
                            }
                        }
                    }
                }
                if matches!(r, Err(Flow::Abort(_))) {
                    return r;
                }
                if let Some(f) = finally {
                    self.env_mut().scopes.truncate(depth);
                    self.exec_block(f)?;
                }
                r
            }
            StmtKind::Switch { scrutinee, arms } => {
                let v = self.eval(scrutinee)?;
                if matches!(v, Value::Null) {
                    return self.npe();
                }
                let mut chosen = None;
                'arms: for (i, a) in arms.iter().enumerate() {
                    for l in &a.labels {
                        let lv = self.eval(l)?;
                        let eq = match (num_of(&v), num_of(&lv)) {
                            (Some(x), Some(y)) => Self::num_cmp(x, y) == Some(Ordering::Equal),
                            _ => Self::ref_eq(&v, &lv),
                        };
                        if eq {
                            chosen = Some(i);
                            break 'arms;
                        }
                    }
                }
                if chosen.is_none() {
                    chosen = arms.iter().position(|a| a.is_default);
                }
                for i in 0..arms.len() {
                    self.cover_branch(BranchKey::Arm { line: s.line, col: s.col, idx: i }, chosen == Some(i));
                }
                let Some(start) = chosen else { return Ok(()) };
                let depth = self.env().scopes.len();
                self.env_mut().scopes.push(HashMap::new());
                let mut r = Ok(());
                'run: for a in &arms[start..] {
                    for st in &a.body {
                        r = self.exec(st);
                        if r.is_err() {
                            break 'run;
                        }
                    }
                }
                self.env_mut().scopes.truncate(depth);
                match r {
                    Err(Flow::Break) => Ok(()),
                    other => other,
                }
            }
            StmtKind::CtorCall { .. } | StmtKind::Empty => Ok(()),
        }
    }

    // ----- library -----

    pub fn iter_items(&mut self, v: &Value) -> R<Vec<Value>> {
        match v {
            Value::Null => self.npe(),
            Value::Ref(o) => match &*o.data.borrow() {
                Data::Array(items) | Data::List { items, .. } | Data::Set { items, .. } => Ok(items.clone()),
                Data::Map { entries, .. } => Ok(entries.iter().map(|(k, _)| k.clone()).collect()),
                _ => Err(Flow::Abort("unsupported: iterating a non-collection".into())),
            },
            _ => self.unsupported("iterating a non-collection"),
        }
    }

    pub fn to_jstring(&mut self, v: &Value) -> R<String> {
        Ok(match v {
            Value::Void => String::new(),
            Value::Null => "null".into(),
            Value::Bool(b) => b.to_string(),
            Value::Char(c) => c.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Long(l) => l.to_string(),
            Value::Float(f) => java_float(*f),
            Value::Double(d) => java_double(*d),
            Value::Str(s) => s.to_string(),
            Value::Ref(o) => {
                if self.project.classes.contains_key(&o.class) {
                    if let Some((owner, m)) = self.find_method(&o.class, "toString", &[]) {
                        let r = self.call_method(&owner, &m, Some(o.clone()), vec![])?;
                        return self.to_jstring(&r);
                    }
                }
                let data = o.data.borrow();
                match &*data {
                    Data::Builder(s) => s.clone(),
                    Data::List { items, .. } | Data::Set { items, .. } => {
                        let items = items.clone();
                        drop(data);
                        let mut parts = Vec::new();
                        for i in &items {
                            parts.push(self.to_jstring(i)?);
                        }
                        format!("[{}]", parts.join(", "))
                    }
                    Data::Map { entries, .. } => {
                        let entries = entries.clone();
                        drop(data);
                        let mut parts = Vec::new();
                        for (k, v) in &entries {
                            parts.push(format!("{}={}", self.to_jstring(k)?, self.to_jstring(v)?));
                        }
                        format!("{{{}}}", parts.join(", "))
                    }
                    Data::Throwable(info) => match &info.message {
                        Some(m) => format!("{}: {}", o.class, m),
                        None => o.class.clone(),
                    },
                    Data::Array(_) => {
                        let code = match o.class.trim_end_matches("[]") {
                            "int" => "[I".to_string(),
                            "long" => "[J".to_string(),
                            "double" => "[D".to_string(),
                            "boolean" => "[Z".to_string(),
                            "char" => "[C".to_string(),
                            other => format!("[L{other};"),
                        };
                        format!("{}@{:x}", code, Self::identity_hash(o))
                    }
                    Data::Plain => format!("{}@{:x}", o.class, Self::identity_hash(o)),
                }
            }
        })
    }

    pub fn jequals(&mut self, a: &Value, b: &Value) -> R<bool> {
        Ok(match (a, b) {
            (Value::Null, Value::Null) => true,
            (Value::Null, _) | (_, Value::Null) => false,
            (Value::Int(x), Value::Int(y)) => x == y,
            (Value::Long(x), Value::Long(y)) => x == y,
            (Value::Double(x), Value::Double(y)) => x.to_bits() == y.to_bits() || (x == y && *x != 0.0),
            (Value::Float(x), Value::Float(y)) => x.to_bits() == y.to_bits() || (x == y && *x != 0.0),
            (Value::Char(x), Value::Char(y)) => x == y,
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (Value::Str(x), Value::Str(y)) => x == y,
            (Value::Ref(x), Value::Ref(y)) => {
                if Rc::ptr_eq(x, y) {
                    return Ok(true);
                }
                if self.project.classes.contains_key(&x.class) {
                    if let Some((owner, m)) = self.find_method(&x.class, "equals", std::slice::from_ref(b)) {
                        return match self.call_method(&owner, &m, Some(x.clone()), vec![b.clone()])? {
                            Value::Bool(r) => Ok(r),
                            _ => Ok(false),
                        };
                    }
                    return Ok(false);
                }
                let (dx, dy) = (x.data.borrow(), y.data.borrow());
                match (&*dx, &*dy) {
                    (Data::List { items: p, .. }, Data::List { items: q, .. }) => {
                        let (p, q) = (p.clone(), q.clone());
                        drop((dx, dy));
                        if p.len() != q.len() {
                            return Ok(false);
                        }
                        for (u, v) in p.iter().zip(&q) {
                            if !self.jequals(u, v)? {
                                return Ok(false);
                            }
                        }
                        true
                    }
                    (Data::Set { items: p, .. }, Data::Set { items: q, .. }) => {
                        let (p, q) = (p.clone(), q.clone());
                        drop((dx, dy));
                        if p.len() != q.len() {
                            return Ok(false);
                        }
                        for u in &p {
                            if !self.contains(&q, u)? {
                                return Ok(false);
                            }
                        }
                        true
                    }
                    (Data::Map { entries: p, .. }, Data::Map { entries: q, .. }) => {
                        let (p, q) = (p.clone(), q.clone());
                        drop((dx, dy));
                        if p.len() != q.len() {
                            return Ok(false);
                        }
                        for (k, v) in &p {
                            let mut found = false;
                            for (k2, v2) in &q {
                                if self.jequals(k, k2)? {
                                    found = self.jequals(v, v2)?;
                                    break;
                                }
                            }
                            if !found {
                                return Ok(false);
                            }
                        }
                        true
                    }
                    _ => false,
                }
            }
            _ => false,
        })
    }

    pub fn jhash(&mut self, v: &Value) -> R<i32> {
        Ok(match v {
            Value::Null | Value::Void => 0,
            Value::Int(i) => *i,
            Value::Long(l) => (*l ^ ((*l as u64) >> 32) as i64) as i32,
            Value::Double(d) => {
                let b = d.to_bits();
                (b ^ (b >> 32)) as i32
            }
            Value::Float(f) => f.to_bits() as i32,
            Value::Bool(b) => {
                if *b {
                    1231
                } else {
                    1237
                }
            }
            Value::Char(c) => *c as i32,
            Value::Str(s) => java_string_hash(s),
            Value::Ref(o) => {
                if self.project.classes.contains_key(&o.class) {
                    if let Some((owner, m)) = self.find_method(&o.class, "hashCode", &[]) {
                        return match self.call_method(&owner, &m, Some(o.clone()), vec![])? {
                            Value::Int(h) => Ok(h),
                            _ => Ok(0),
                        };
                    }
                }
                let items = match &*o.data.borrow() {
                    Data::List { items, .. } => Some(items.clone()),
                    _ => None,
                };
                match items {
                    Some(items) => {
                        let mut h = 1i32;
                        for i in &items {
                            h = h.wrapping_mul(31).wrapping_add(self.jhash(i)?);
                        }
                        h
                    }
                    None => Self::identity_hash(o),
                }
            }
        })
    }

    pub fn jcompare(&mut self, a: &Value, b: &Value) -> R<Ordering> {
        match (a, b) {
            (Value::Null, _) | (_, Value::Null) => self.npe(),
            (Value::Str(x), Value::Str(y)) => Ok(x.encode_utf16().cmp(y.encode_utf16())),
            (Value::Bool(x), Value::Bool(y)) => Ok(x.cmp(y)),
            (Value::Ref(o), _) if self.project.classes.contains_key(&o.class) => {
                match self.find_method(&o.class, "compareTo", std::slice::from_ref(b)) {
                    Some((owner, m)) => match self.call_method(&owner, &m, Some(o.clone()), vec![b.clone()])? {
                        Value::Int(c) => Ok(c.cmp(&0)),
                        _ => Ok(Ordering::Equal),
                    },
                    None => {
                        let msg = format!("{} cannot be cast to java.lang.Comparable", o.class);
                        self.throw("java.lang.ClassCastException", Some(msg), vec![])
                    }
                }
            }
            _ => match (num_of(a), num_of(b)) {
                (Some(x), Some(y)) => Ok(Self::num_cmp(x, y).unwrap_or(Ordering::Equal)),
                _ => self.unsupported("comparing incomparable values"),
            },
        }
    }

    fn sort_values(&mut self, items: &mut [Value]) -> R<()> {
        for i in 1..items.len() {
            let mut j = i;
            while j > 0 && self.jcompare(&items[j - 1], &items[j])? == Ordering::Greater {
                items.swap(j - 1, j);
                j -= 1;
            }
        }
        Ok(())
    }

    fn contains(&mut self, items: &[Value], v: &Value) -> R<bool> {
        for i in items {
            if self.jequals(i, v)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn index_of(&mut self, items: &[Value], v: &Value) -> R<i32> {
        for (n, i) in items.iter().enumerate() {
            if self.jequals(i, v)? {
                return Ok(n as i32);
            }
        }
        Ok(-1)
    }

    fn map_put(&mut self, m: &Rc<Obj>, k: Value, v: Value) -> R<Value> {
        let (entries, sorted) = match &*m.data.borrow() {
            Data::Map { entries, sorted } => (entries.clone(), *sorted),
            _ => return Ok(Value::Null),
        };
        if sorted && matches!(k, Value::Null) {
            return self.throw("java.lang.NullPointerException", None, vec![Frame::lib("java.util.TreeMap", "put", 563)]);
        }
        for (i, (k2, _)) in entries.iter().enumerate() {
            if self.jequals(k2, &k)? {
                if let Data::Map { entries, .. } = &mut *m.data.borrow_mut() {
                    return Ok(std::mem::replace(&mut entries[i].1, v));
                }
            }
        }
        let mut pos = entries.len();
        if sorted {
            for (i, (k2, _)) in entries.iter().enumerate() {
                if self.jcompare(&k, k2)? == Ordering::Less {
                    pos = i;
                    break;
                }
            }
        }
        if let Data::Map { entries, .. } = &mut *m.data.borrow_mut() {
            entries.insert(pos, (k, v));
        }
        Ok(Value::Null)
    }

    fn map_find(&mut self, m: &Rc<Obj>, k: &Value) -> R<Option<usize>> {
        let entries = match &*m.data.borrow() {
            Data::Map { entries, .. } => entries.clone(),
            _ => return Ok(None),
        };
        for (i, (k2, _)) in entries.iter().enumerate() {
            if self.jequals(k2, k)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    fn set_add(&mut self, s: &Rc<Obj>, v: Value) -> R<bool> {
        let (items, sorted) = match &*s.data.borrow() {
            Data::Set { items, sorted } => (items.clone(), *sorted),
            _ => return Ok(false),
        };
        if self.contains(&items, &v)? {
            return Ok(false);
        }
        let mut pos = items.len();
        if sorted {
            for (i, x) in items.iter().enumerate() {
                if self.jcompare(&v, x)? == Ordering::Less {
                    pos = i;
                    break;
                }
            }
        }
        if let Data::Set { items, .. } = &mut *s.data.borrow_mut() {
            items.insert(pos, v);
        }
        Ok(true)
    }

    fn arg_int(&mut self, args: &[Value], i: usize) -> R<i32> {
        match args.get(i).and_then(num_of) {
            Some(n) => Ok(n.as_i()),
            None => self.npe(),
        }
    }

    fn arg_str(&mut self, args: &[Value], i: usize) -> R<String> {
        match args.get(i) {
            Some(Value::Str(s)) => Ok(s.to_string()),
            Some(Value::Null) | None => self.npe(),
            Some(v) => self.to_jstring(&v.clone()),
        }
    }

    fn new_list(&mut self, items: Vec<Value>, fixed: bool, readonly: bool) -> Value {
        let class = if readonly {
            "java.util.Collections$UnmodifiableRandomAccessList"
        } else if fixed {
            "java.util.Arrays$ArrayList"
        } else {
            "java.util.ArrayList"
        };
        Value::Ref(self.alloc(class, Data::List { items, fixed, readonly }))
    }

    fn str_index_err<T>(&mut self, idx: i32, method: &str, line: u32) -> R<T> {
        self.throw(
            "java.lang.StringIndexOutOfBoundsException",
            Some(format!("String index out of range: {idx}")),
            vec![Frame::lib("java.lang.String", method, line)],
        )
    }

    fn lib_instance(&mut self, recv: Value, name: &str, args: Vec<Value>) -> R<Value> {
        match name {
            "equals" if args.len() == 1 => return Ok(Value::Bool(self.jequals(&recv, &args[0])?)),
            "hashCode" if args.is_empty() => return Ok(Value::Int(self.jhash(&recv)?)),
            "toString" if args.is_empty() => return Ok(Value::Str(Rc::from(self.to_jstring(&recv)?))),
            "compareTo" if args.len() == 1 && !matches!(recv, Value::Ref(_)) => {
                if let (Value::Str(a), Value::Str(b)) = (&recv, &args[0]) {
                    let (a, b): (Vec<u16>, Vec<u16>) = (a.encode_utf16().collect(), b.encode_utf16().collect());
                    for (x, y) in a.iter().zip(&b) {
                        if x != y {
                            return Ok(Value::Int(*x as i32 - *y as i32));
                        }
                    }
                    return Ok(Value::Int(a.len() as i32 - b.len() as i32));
                }
                let c = self.jcompare(&recv, &args[0])?;
                return Ok(Value::Int(c as i32));
            }
            _ => {}
        }
        match recv {
            Value::Null => self.npe(),
            Value::Str(s) => self.string_method(&s, name, args),
            Value::Int(_) | Value::Long(_) | Value::Double(_) | Value::Float(_) | Value::Char(_) | Value::Bool(_) => {
                let p = match name {
                    "intValue" => Prim::Int,
                    "longValue" => Prim::Long,
                    "doubleValue" => Prim::Double,
                    "floatValue" => Prim::Float,
                    "charValue" => Prim::Char,
                    "booleanValue" => Prim::Boolean,
                    "isNaN" => {
                        return Ok(Value::Bool(matches!(recv, Value::Double(d) if d.is_nan())));
                    }
                    _ => return self.unsupported(format!("boxed method {name}")),
                };
                Ok(convert_prim(&recv, p).unwrap_or(recv))
            }
            Value::Ref(o) => self.object_method(o, name, args),
            Value::Void => self.unsupported("method on void"),
        }
    }

    fn string_method(&mut self, s: &Rc<str>, name: &str, args: Vec<Value>) -> R<Value> {
        let chars: Vec<char> = s.chars().collect();
        let len = chars.len() as i32;
        let str_v = |x: String| Value::Str(Rc::from(x));
        Ok(match name {
            "length" => Value::Int(len),
            "isEmpty" => Value::Bool(len == 0),
            "charAt" => {
                let i = self.arg_int(&args, 0)?;
                if i < 0 || i >= len {
                    return self.str_index_err(i, "charAt", 658);
                }
                Value::Char(chars[i as usize])
            }
            "substring" => {
                let b = self.arg_int(&args, 0)?;
                let e = if args.len() > 1 { self.arg_int(&args, 1)? } else { len };
                if b < 0 {
                    return self.str_index_err(b, "substring", 1927);
                }
                if e > len {
                    return self.str_index_err(e, "substring", 1931);
                }
                if b > e {
                    return self.str_index_err(e - b, "substring", 1935);
                }
                str_v(chars[b as usize..e as usize].iter().collect())
            }
            "indexOf" | "lastIndexOf" => {
                let needle: Vec<char> = match args.first() {
                    Some(Value::Char(c)) => vec![*c],
                    Some(Value::Int(i)) => vec![char::from_u32(*i as u32).unwrap_or('\0')],
                    Some(Value::Str(t)) => t.chars().collect(),
                    _ => return self.npe(),
                };
                let from = if args.len() > 1 {
                    self.arg_int(&args, 1)?
                } else if name == "indexOf" {
                    0
                } else {
                    len
                };
                let n = needle.len();
                let mut found = -1;
                if n <= chars.len() {
                    let positions: Vec<usize> = (0..=chars.len() - n).collect();
                    if name == "indexOf" {
                        found = positions
                            .into_iter()
                            .find(|&p| p as i32 >= from && chars[p..p + n] == needle[..])
                            .map(|p| p as i32)
                            .unwrap_or(-1);
                    } else {
                        found = positions
                            .into_iter()
                            .rev()
                            .find(|&p| p as i32 <= from && chars[p..p + n] == needle[..])
                            .map(|p| p as i32)
                            .unwrap_or(-1);
                    }
                }
                Value::Int(found)
            }
            "contains" => {
                let t = self.arg_str(&args, 0)?;
                Value::Bool(s.contains(t.as_str()))
            }
            "startsWith" => {
                let t = self.arg_str(&args, 0)?;
                Value::Bool(s.starts_with(t.as_str()))
            }
            "endsWith" => {
                let t = self.arg_str(&args, 0)?;
                Value::Bool(s.ends_with(t.as_str()))
            }
            "equalsIgnoreCase" => match args.first() {
                Some(Value::Str(t)) => Value::Bool(s.to_lowercase() == t.to_lowercase()),
                _ => Value::Bool(false),
            },
            "toUpperCase" => str_v(s.to_uppercase()),
            "toLowerCase" => str_v(s.to_lowercase()),
            "trim" => str_v(s.trim_matches(|c: char| c <= ' ').to_string()),
            "strip" => str_v(s.trim().to_string()),
            "intern" => Value::Str(s.clone()),
            "concat" => {
                let t = self.arg_str(&args, 0)?;
                str_v(format!("{s}{t}"))
            }
            "repeat" => {
                let n = self.arg_int(&args, 0)?;
                if n < 0 {
                    return self.throw("java.lang.IllegalArgumentException", Some(format!("count is negative: {n}")), vec![]);
                }
                str_v(s.repeat(n as usize))
            }
            "replace" => match (args.first(), args.get(1)) {
                (Some(Value::Char(a)), Some(Value::Char(b))) => str_v(s.replace(*a, &b.to_string())),
                (Some(a), Some(b)) => {
                    let a = self.to_jstring(&a.clone())?;
                    let b = self.to_jstring(&b.clone())?;
                    str_v(s.replace(&a, &b))
                }
                _ => return self.npe(),
            },
            "split" => {
                let sep = self.arg_str(&args, 0)?;
                let mut parts: Vec<String> = match sep.as_str() {
                    "\\s+" => s.split_whitespace().map(String::from).collect(),
                    "\\s*,\\s*" => s.split(',').map(|p| p.trim().to_string()).collect(),
                    lit if !lit.chars().any(|c| "\\[]()*+?^$|{}".contains(c)) || lit == "\\." || lit == "\\|" => {
                        let lit = lit.trim_start_matches('\\');
                        if s.is_empty() {
                            vec![String::new()]
                        } else {
                            s.split(lit).map(String::from).collect()
                        }
                    }
                    other => return self.unsupported(format!("split pattern {other}")),
                };
                while parts.len() > 1 && parts.last().map(|p| p.is_empty()).unwrap_or(false) {
                    parts.pop();
                }
                let items = parts.into_iter().map(|p| Value::Str(Rc::from(p))).collect();
                Value::Ref(self.alloc("String[]", Data::Array(items)))
            }
            "toCharArray" => {
                let items = chars.iter().map(|c| Value::Char(*c)).collect();
                Value::Ref(self.alloc("char[]", Data::Array(items)))
            }
            "chars" | "matches" | "replaceAll" | "format" => return self.unsupported(format!("String.{name}")),
            _ => return self.unsupported(format!("String.{name}")),
        })
    }

    fn list_index_err<T>(&mut self, idx: i32, size: usize, method: &str) -> R<T> {
        if idx < 0 {
            return self.throw(
                "java.lang.ArrayIndexOutOfBoundsException",
                Some(idx.to_string()),
                vec![Frame::lib("java.util.ArrayList", "elementData", 422), Frame::lib("java.util.ArrayList", method, 435)],
            );
        }
        self.throw(
            "java.lang.IndexOutOfBoundsException",
            Some(format!("Index: {idx}, Size: {size}")),
            vec![Frame::lib("java.util.ArrayList", "rangeCheck", 657), Frame::lib("java.util.ArrayList", method, 433)],
        )
    }

    fn readonly_err<T>(&mut self, method: &str) -> R<T> {
        self.throw("java.lang.UnsupportedOperationException", None, vec![Frame::lib("java.util.AbstractList", method, 148)])
    }

    fn object_method(&mut self, o: Rc<Obj>, name: &str, args: Vec<Value>) -> R<Value> {
        enum Kind {
            Plain,
            Throwable,
            Array,
            List(bool, bool),
            Map,
            Set,
            Builder,
        }
        let kind = match &*o.data.borrow() {
            Data::Plain => Kind::Plain,
            Data::Throwable(_) => Kind::Throwable,
            Data::Array(_) => Kind::Array,
            Data::List { fixed, readonly, .. } => Kind::List(*fixed, *readonly),
            Data::Map { .. } => Kind::Map,
            Data::Set { .. } => Kind::Set,
            Data::Builder(_) => Kind::Builder,
        };
        match kind {
            Kind::Plain if o.class == "java.io.PrintStream" => {
                let text = match args.first() {
                    Some(v) => self.to_jstring(&v.clone())?,
                    None => String::new(),
                };
                self.stdout.push_str(&text);
                if name == "println" {
                    self.stdout.push('\n');
                }
                Ok(Value::Void)
            }
            Kind::Plain | Kind::Array => match name {
                "clone" => {
                    let d = match &*o.data.borrow() {
                        Data::Array(items) => Data::Array(items.clone()),
                        _ => Data::Plain,
                    };
                    Ok(Value::Ref(self.alloc(&o.class, d)))
                }
                _ => self.unsupported(format!("{}.{}", o.class, name)),
            },
            Kind::Throwable => {
                let info = match &*o.data.borrow() {
                    Data::Throwable(i) => i.clone(),
                    _ => unreachable!(),
                };
                match name {
                    "getMessage" | "getLocalizedMessage" => Ok(info.message.map(|m| Value::Str(Rc::from(m))).unwrap_or(Value::Null)),
                    "getCause" => Ok(info.cause.map(Value::Ref).unwrap_or(Value::Null)),
                    "printStackTrace" => Ok(Value::Void),
                    _ => self.unsupported(format!("Throwable.{name}")),
                }
            }
            Kind::Builder => {
                let cur = match &*o.data.borrow() {
                    Data::Builder(s) => s.clone(),
                    _ => unreachable!(),
                };
                let set = |o: &Rc<Obj>, s: String| *o.data.borrow_mut() = Data::Builder(s);
                match name {
                    "append" => {
                        let t = match args.first() {
                            Some(v) => self.to_jstring(&v.clone())?,
                            None => String::new(),
                        };
                        set(&o, cur + &t);
                        Ok(Value::Ref(o))
                    }
                    "insert" => {
                        let i = self.arg_int(&args, 0)? as usize;
                        let t = self.to_jstring(&args.get(1).cloned().unwrap_or(Value::Null))?;
                        let mut cs: Vec<char> = cur.chars().collect();
                        if i > cs.len() {
                            return self.str_index_err(i as i32, "insert", 1087);
                        }
                        cs.splice(i..i, t.chars());
                        set(&o, cs.into_iter().collect());
                        Ok(Value::Ref(o))
                    }
                    "reverse" => {
                        set(&o, cur.chars().rev().collect());
                        Ok(Value::Ref(o))
                    }
                    "deleteCharAt" => {
                        let i = self.arg_int(&args, 0)?;
                        let mut cs: Vec<char> = cur.chars().collect();
                        if i < 0 || i as usize >= cs.len() {
                            return self.str_index_err(i, "deleteCharAt", 824);
                        }
                        cs.remove(i as usize);
                        set(&o, cs.into_iter().collect());
                        Ok(Value::Ref(o))
                    }
                    "setLength" => {
                        let n = self.arg_int(&args, 0)?.max(0) as usize;
                        let mut cs: Vec<char> = cur.chars().collect();
                        cs.resize(n, '\0');
                        set(&o, cs.into_iter().collect());
                        Ok(Value::Void)
                    }
                    "length" | "charAt" | "indexOf" | "isEmpty" | "substring" | "contains" => {
                        self.string_method(&Rc::from(cur.as_str()), name, args)
                    }
                    _ => self.unsupported(format!("StringBuilder.{name}")),
                }
            }
            Kind::List(fixed, readonly) => {
                let items = match &*o.data.borrow() {
                    Data::List { items, .. } => items.clone(),
                    _ => unreachable!(),
                };
                let put = |o: &Rc<Obj>, new: Vec<Value>| {
                    if let Data::List { items, .. } = &mut *o.data.borrow_mut() {
                        *items = new;
                    }
                };
                let mutating = matches!(name, "add" | "remove" | "clear" | "addAll" | "removeIf" | "set" | "sort");
                if mutating && (readonly || (fixed && name != "set" && name != "sort")) {
                    return self.readonly_err(name);
                }
                match name {
                    "size" => Ok(Value::Int(items.len() as i32)),
                    "isEmpty" => Ok(Value::Bool(items.is_empty())),
                    "get" => {
                        let i = self.arg_int(&args, 0)?;
                        if i < 0 || i as usize >= items.len() {
                            return self.list_index_err(i, items.len(), "get");
                        }
                        Ok(items[i as usize].clone())
                    }
                    "set" => {
                        let i = self.arg_int(&args, 0)?;
                        if i < 0 || i as usize >= items.len() {
                            return self.list_index_err(i, items.len(), "set");
                        }
                        let mut new = items;
                        let old = std::mem::replace(&mut new[i as usize], args[1].clone());
                        put(&o, new);
                        Ok(old)
                    }
                    "add" => {
                        let mut new = items;
                        if args.len() == 2 {
                            let i = self.arg_int(&args, 0)?;
                            if i < 0 || i as usize > new.len() {
                                return self.throw(
                                    "java.lang.IndexOutOfBoundsException",
                                    Some(format!("Index: {i}, Size: {}", new.len())),
                                    vec![
                                        Frame::lib("java.util.ArrayList", "rangeCheckForAdd", 665),
                                        Frame::lib("java.util.ArrayList", "add", 477),
                                    ],
                                );
                            }
                            new.insert(i as usize, args[1].clone());
                            put(&o, new);
                            return Ok(Value::Void);
                        }
                        new.push(args.into_iter().next().unwrap_or(Value::Null));
                        put(&o, new);
                        Ok(Value::Bool(true))
                    }
                    "addAll" => {
                        let extra = self.iter_items(&args[0])?;
                        let mut new = items;
                        let changed = !extra.is_empty();
                        new.extend(extra);
                        put(&o, new);
                        Ok(Value::Bool(changed))
                    }
                    "remove" => {
                        let mut new = items;
                        match &args[0] {
                            Value::Int(i) => {
                                let i = *i;
                                if i < 0 || i as usize >= new.len() {
                                    return self.list_index_err(i, new.len(), "remove");
                                }
                                let old = new.remove(i as usize);
                                put(&o, new);
                                Ok(old)
                            }
                            v => {
                                let idx = self.index_of(&new, &v.clone())?;
                                if idx >= 0 {
                                    new.remove(idx as usize);
                                    put(&o, new);
                                }
                                Ok(Value::Bool(idx >= 0))
                            }
                        }
                    }
                    "clear" => {
                        put(&o, Vec::new());
                        Ok(Value::Void)
                    }
                    "contains" => Ok(Value::Bool(self.contains(&items, &args[0])?)),
                    "containsAll" => {
                        let other = self.iter_items(&args[0])?;
                        for x in &other {
                            if !self.contains(&items, x)? {
                                return Ok(Value::Bool(false));
                            }
                        }
                        Ok(Value::Bool(true))
                    }
                    "indexOf" => Ok(Value::Int(self.index_of(&items, &args[0])?)),
                    "subList" => {
                        let a = self.arg_int(&args, 0)?;
                        let b = self.arg_int(&args, 1)?;
                        if a < 0 || b as usize > items.len() || a > b {
                            return self.throw("java.lang.IndexOutOfBoundsException", Some(format!("fromIndex = {a}")), vec![]);
                        }
                        Ok(self.new_list(items[a as usize..b as usize].to_vec(), false, false))
                    }
                    "toArray" => Ok(Value::Ref(self.alloc("Object[]", Data::Array(items)))),
                    "sort" => {
                        let mut new = items;
                        self.sort_values(&mut new)?;
                        put(&o, new);
                        Ok(Value::Void)
                    }
                    _ => self.unsupported(format!("List.{name}")),
                }
            }
            Kind::Set => {
                let items = match &*o.data.borrow() {
                    Data::Set { items, .. } => items.clone(),
                    _ => unreachable!(),
                };
                match name {
                    "size" => Ok(Value::Int(items.len() as i32)),
                    "isEmpty" => Ok(Value::Bool(items.is_empty())),
                    "contains" => Ok(Value::Bool(self.contains(&items, &args[0])?)),
                    "add" => Ok(Value::Bool(self.set_add(&o, args[0].clone())?)),
                    "addAll" => {
                        let mut changed = false;
                        for v in self.iter_items(&args[0])? {
                            changed |= self.set_add(&o, v)?;
                        }
                        Ok(Value::Bool(changed))
                    }
                    "remove" => {
                        let idx = self.index_of(&items, &args[0])?;
                        if idx >= 0 {
                            if let Data::Set { items, .. } = &mut *o.data.borrow_mut() {
                                items.remove(idx as usize);
                            }
                        }
                        Ok(Value::Bool(idx >= 0))
                    }
                    "clear" => {
                        if let Data::Set { items, .. } = &mut *o.data.borrow_mut() {
                            items.clear();
                        }
                        Ok(Value::Void)
                    }
                    _ => self.unsupported(format!("Set.{name}")),
                }
            }
            Kind::Map => {
                let (entries, sorted) = match &*o.data.borrow() {
                    Data::Map { entries, sorted } => (entries.clone(), *sorted),
                    _ => unreachable!(),
                };
                match name {
                    "size" => Ok(Value::Int(entries.len() as i32)),
                    "isEmpty" => Ok(Value::Bool(entries.is_empty())),
                    "put" => self.map_put(&o, args[0].clone(), args[1].clone()),
                    "putIfAbsent" => match self.map_find(&o, &args[0])? {
                        Some(i) if !matches!(entries[i].1, Value::Null) => Ok(entries[i].1.clone()),
                        _ => self.map_put(&o, args[0].clone(), args[1].clone()),
                    },
                    "get" | "getOrDefault" => {
                        if sorted && matches!(args[0], Value::Null) {
                            return self.npe();
                        }
                        Ok(match self.map_find(&o, &args[0])? {
                            Some(i) => entries[i].1.clone(),
                            None => args.get(1).cloned().unwrap_or(Value::Null),
                        })
                    }
                    "containsKey" => Ok(Value::Bool(self.map_find(&o, &args[0])?.is_some())),
                    "containsValue" => {
                        let vals: Vec<Value> = entries.iter().map(|(_, v)| v.clone()).collect();
                        Ok(Value::Bool(self.contains(&vals, &args[0])?))
                    }
                    "remove" => match self.map_find(&o, &args[0])? {
                        Some(i) => {
                            if let Data::Map { entries, .. } = &mut *o.data.borrow_mut() {
                                return Ok(entries.remove(i).1);
                            }
                            Ok(Value::Null)
                        }
                        None => Ok(Value::Null),
                    },
                    "clear" => {
                        if let Data::Map { entries, .. } = &mut *o.data.borrow_mut() {
                            entries.clear();
                        }
                        Ok(Value::Void)
                    }
                    "keySet" => {
                        let items = entries.iter().map(|(k, _)| k.clone()).collect();
                        Ok(Value::Ref(self.alloc("java.util.HashSet", Data::Set { items, sorted })))
                    }
                    "values" => {
                        let items = entries.iter().map(|(_, v)| v.clone()).collect();
                        Ok(self.new_list(items, false, false))
                    }
                    _ => self.unsupported(format!("Map.{name}")),
                }
            }
        }
    }

    fn parse_failure<T>(&mut self, input: &Value, class: &str, method: &str) -> R<T> {
        let msg = match input {
            Value::Null => "null".to_string(),
            Value::Str(s) if class == "java.lang.Double" && s.trim().is_empty() => "empty String".to_string(),
            v => format!("For input string: \"{}\"", self.to_jstring(&v.clone())?),
        };
        let frames = if class == "java.lang.Double" {
            vec![Frame::lib("sun.misc.FloatingDecimal", "readJavaFormatString", 2043), Frame::lib(class, method, 538)]
        } else {
            vec![Frame::lib("java.lang.NumberFormatException", "forInputString", 65), Frame::lib(class, method, 580)]
        };
        self.throw("java.lang.NumberFormatException", Some(msg), frames)
    }

    fn lib_static(&mut self, class: &str, name: &str, args: Vec<Value>) -> R<Value> {
        let a0 = args.first().cloned().unwrap_or(Value::Null);
        let num = |v: &Value| num_of(v);
        Ok(match (class, name) {
            ("java.lang.Integer", "parseInt") | ("java.lang.Integer", "valueOf") if matches!(a0, Value::Str(_) | Value::Null) => {
                let s = match &a0 {
                    Value::Str(s) => s.to_string(),
                    _ => return self.parse_failure(&a0, "java.lang.Integer", "parseInt"),
                };
                match s.parse::<i32>() {
                    Ok(v) if !s.starts_with('+') || s.len() > 1 => Value::Int(v),
                    _ => return self.parse_failure(&a0, "java.lang.Integer", "parseInt"),
                }
            }
            ("java.lang.Long", "parseLong") | ("java.lang.Long", "valueOf") if matches!(a0, Value::Str(_) | Value::Null) => match &a0 {
                Value::Str(s) => match s.parse::<i64>() {
                    Ok(v) => Value::Long(v),
                    Err(_) => return self.parse_failure(&a0, "java.lang.Long", "parseLong"),
                },
                _ => return self.parse_failure(&a0, "java.lang.Long", "parseLong"),
            },
            ("java.lang.Double", "parseDouble") | ("java.lang.Double", "valueOf") if matches!(a0, Value::Str(_) | Value::Null) => match &a0
            {
                Value::Str(s) => match s.trim().parse::<f64>() {
                    Ok(v) if !s.trim().is_empty() && !s.trim().eq_ignore_ascii_case("inf") => Value::Double(v),
                    _ => return self.parse_failure(&a0, "java.lang.Double", "parseDouble"),
                },
                _ => return self.npe(),
            },
            ("java.lang.Boolean", "parseBoolean") | ("java.lang.Boolean", "valueOf") => match &a0 {
                Value::Str(s) => Value::Bool(s.eq_ignore_ascii_case("true")),
                Value::Bool(b) => Value::Bool(*b),
                _ => Value::Bool(false),
            },
            ("java.lang.Integer", "valueOf") => convert_prim(&a0, Prim::Int).unwrap_or(a0),
            ("java.lang.Long", "valueOf") => convert_prim(&a0, Prim::Long).unwrap_or(a0),
            ("java.lang.Double", "valueOf") => convert_prim(&a0, Prim::Double).unwrap_or(a0),
            ("java.lang.Character", "valueOf") => a0,
            (
                "java.lang.Integer"
                | "java.lang.Long"
                | "java.lang.Double"
                | "java.lang.String"
                | "java.lang.Boolean"
                | "java.lang.Character",
                "toString" | "valueOf",
            ) => {
                if let (Some(Value::Ref(o)), "valueOf") = (args.first(), name) {
                    if o.class == "char[]" {
                        let s: String = self.iter_items(&a0)?.iter().map(|c| if let Value::Char(c) = c { *c } else { '?' }).collect();
                        return Ok(Value::Str(Rc::from(s)));
                    }
                }
                Value::Str(Rc::from(self.to_jstring(&a0)?))
            }
            ("java.lang.Integer" | "java.lang.Long" | "java.lang.Double" | "java.lang.Character" | "java.lang.Boolean", "compare") => {
                let c = self.jcompare(&a0, &args[1])?;
                Value::Int(c as i32)
            }
            ("java.lang.Integer" | "java.lang.Long" | "java.lang.Double", "max" | "min" | "sum") | ("java.lang.Math", "max" | "min") => {
                let (a, b) = (args[0].clone(), args[1].clone());
                match name {
                    "sum" => self.binop("+", a, b)?,
                    _ => {
                        let (Some(x), Some(y)) = (num(&a), num(&b)) else { return self.npe() };
                        let rank = x.rank().max(y.rank());
                        let take_a = match Self::num_cmp(x, y) {
                            Some(Ordering::Greater) => name == "max",
                            Some(Ordering::Less) => name == "min",
                            Some(Ordering::Equal) => true,
                            None => return Ok(Value::Double(f64::NAN)),
                        };
                        let pick = if take_a { x } else { y };
                        match rank {
                            0 => Value::Int(pick.as_i()),
                            1 => Value::Long(pick.as_l()),
                            2 => Value::Float(pick.as_f()),
                            _ => Value::Double(pick.as_d()),
                        }
                    }
                }
            }
            ("java.lang.Double", "isNaN") => Value::Bool(num(&a0).map(|n| n.as_d().is_nan()).unwrap_or(false)),
            ("java.lang.Double", "isInfinite") => Value::Bool(num(&a0).map(|n| n.as_d().is_infinite()).unwrap_or(false)),
            ("java.lang.Character", _) => {
                let c = match a0 {
                    Value::Char(c) => c,
                    Value::Int(i) => char::from_u32(i as u32).unwrap_or('\0'),
                    _ => return self.npe(),
                };
                match name {
                    "isDigit" => Value::Bool(c.is_ascii_digit()),
                    "isLetter" => Value::Bool(c.is_alphabetic()),
                    "isLetterOrDigit" => Value::Bool(c.is_alphanumeric()),
                    "isUpperCase" => Value::Bool(c.is_uppercase()),
                    "isLowerCase" => Value::Bool(c.is_lowercase()),
                    "isWhitespace" => Value::Bool(c.is_whitespace()),
                    "isAlphabetic" => Value::Bool(c.is_alphabetic()),
                    "toUpperCase" => Value::Char(c.to_uppercase().next().unwrap_or(c)),
                    "toLowerCase" => Value::Char(c.to_lowercase().next().unwrap_or(c)),
                    "getNumericValue" => Value::Int(c.to_digit(36).map(|d| d as i32).unwrap_or(-1)),
                    _ => return self.unsupported(format!("Character.{name}")),
                }
            }
            ("java.lang.String", "join") => {
                let sep = self.arg_str(&args, 0)?;
                let parts: Vec<Value> =
                    if args.len() == 2 && matches!(args[1], Value::Ref(_)) { self.iter_items(&args[1])? } else { args[1..].to_vec() };
                let mut out = Vec::new();
                for p in &parts {
                    out.push(self.to_jstring(p)?);
                }
                Value::Str(Rc::from(out.join(&sep)))
            }
            ("java.lang.String", "format") => {
                let fmt = self.arg_str(&args, 0)?;
                Value::Str(Rc::from(self.format(&fmt, &args[1..])?))
            }
            ("java.lang.Math", "abs") => match num(&a0) {
                Some(Num::I(i)) => Value::Int(i.wrapping_abs()),
                Some(Num::L(l)) => Value::Long(l.wrapping_abs()),
                Some(Num::F(f)) => Value::Float(f.abs()),
                Some(Num::D(d)) => Value::Double(d.abs()),
                None => return self.npe(),
            },
            ("java.lang.Math", "round") => match num(&a0) {
                Some(Num::F(f)) => Value::Int((f + 0.5).floor() as i32),
                Some(n) => Value::Long((n.as_d() + 0.5).floor() as i64),
                None => return self.npe(),
            },
            ("java.lang.Math", "signum") => match num(&a0) {
                Some(n) => Value::Double(if n.as_d() == 0.0 { 0.0 } else { n.as_d().signum() }),
                None => return self.npe(),
            },
            ("java.lang.Math", "floorDiv" | "floorMod") => {
                let (Some(x), Some(y)) = (num(&args[0]), num(&args[1])) else { return self.npe() };
                let (a, b) = (x.as_l(), y.as_l());
                if b == 0 {
                    return self.throw("java.lang.ArithmeticException", Some("/ by zero".into()), vec![]);
                }
                let r = if name == "floorDiv" {
                    a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 }
                } else {
                    ((a % b) + b) % b
                };
                if x.rank().max(y.rank()) == 0 {
                    Value::Int(r as i32)
                } else {
                    Value::Long(r)
                }
            }
            ("java.lang.Math", f) => {
                let x = num(&a0).map(|n| n.as_d()).unwrap_or(0.0);
                let y = args.get(1).and_then(num).map(|n| n.as_d()).unwrap_or(0.0);
                Value::Double(match f {
                    "sqrt" => x.sqrt(),
                    "pow" => x.powf(y),
                    "floor" => x.floor(),
                    "ceil" => x.ceil(),
                    "exp" => x.exp(),
                    "log" => x.ln(),
                    "log10" => x.log10(),
                    "sin" => x.sin(),
                    "cos" => x.cos(),
                    "hypot" => x.hypot(y),
                    "cbrt" => x.cbrt(),
                    _ => return self.unsupported(format!("Math.{f}")),
                })
            }
            ("java.util.Objects", "equals") => Value::Bool(self.jequals(&a0, &args[1])?),
            ("java.util.Objects", "isNull") => Value::Bool(matches!(a0, Value::Null)),
            ("java.util.Objects", "nonNull") => Value::Bool(!matches!(a0, Value::Null)),
            ("java.util.Objects", "hashCode") => Value::Int(self.jhash(&a0)?),
            ("java.util.Objects", "hash") => {
                let mut h = 1i32;
                for a in &args {
                    h = h.wrapping_mul(31).wrapping_add(self.jhash(a)?);
                }
                Value::Int(h)
            }
            ("java.util.Objects", "toString") => Value::Str(Rc::from(self.to_jstring(&a0)?)),
            ("java.util.Objects", "requireNonNull") => {
                if matches!(a0, Value::Null) {
                    let msg = match args.get(1) {
                        Some(Value::Str(s)) => Some(s.to_string()),
                        _ => None,
                    };
                    return self.throw("java.lang.NullPointerException", msg, vec![Frame::lib("java.util.Objects", "requireNonNull", 203)]);
                }
                a0
            }
            ("java.util.Arrays", "toString") => match &a0 {
                Value::Null => Value::Str(Rc::from("null")),
                v => {
                    let items = self.iter_items(v)?;
                    let mut parts = Vec::new();
                    for i in &items {
                        parts.push(self.to_jstring(i)?);
                    }
                    Value::Str(Rc::from(format!("[{}]", parts.join(", "))))
                }
            },
            ("java.util.Arrays", "asList") | ("java.util.List", "of") => {
                let items = if args.len() == 1
                    && matches!(&a0, Value::Ref(o) if o.class.ends_with("[]") && !matches!(o.class.as_str(), "int[]" | "long[]" | "double[]" | "char[]"))
                {
                    self.iter_items(&a0)?
                } else {
                    args
                };
                self.new_list(items, true, class == "java.util.List")
            }
            ("java.util.Arrays", "sort") => {
                let mut items = self.iter_items(&a0)?;
                self.sort_values(&mut items)?;
                if let Value::Ref(o) = &a0 {
                    *o.data.borrow_mut() = Data::Array(items);
                }
                Value::Void
            }
            ("java.util.Arrays", "fill") => {
                if let Value::Ref(o) = &a0 {
                    if let Data::Array(items) = &mut *o.data.borrow_mut() {
                        for it in items.iter_mut() {
                            *it = coerce_like(it, args[1].clone());
                        }
                    }
                }
                Value::Void
            }
            ("java.util.Arrays", "equals") => {
                let (a, b) = (a0.clone(), args[1].clone());
                if matches!(a, Value::Null) || matches!(b, Value::Null) {
                    return Ok(Value::Bool(matches!((a, b), (Value::Null, Value::Null))));
                }
                let (x, y) = (self.iter_items(&a)?, self.iter_items(&b)?);
                let mut eq = x.len() == y.len();
                if eq {
                    for (p, q) in x.iter().zip(&y) {
                        if !self.jequals(p, q)? {
                            eq = false;
                            break;
                        }
                    }
                }
                Value::Bool(eq)
            }
            ("java.util.Arrays", "copyOf" | "copyOfRange") => {
                let Value::Ref(o) = &a0 else { return self.npe() };
                let items = self.iter_items(&a0)?;
                let (from, to) =
                    if name == "copyOf" { (0, self.arg_int(&args, 1)?) } else { (self.arg_int(&args, 1)?, self.arg_int(&args, 2)?) };
                let filler = items.first().map(|v| coerce_like(v, Value::Int(0))).unwrap_or(Value::Null);
                let filler = if matches!(filler, Value::Int(0) | Value::Long(0) | Value::Double(_) | Value::Float(_) | Value::Char(_)) {
                    filler
                } else {
                    Value::Null
                };
                let out: Vec<Value> = (from..to).map(|i| items.get(i as usize).cloned().unwrap_or_else(|| filler.clone())).collect();
                Value::Ref(self.alloc(&o.class, Data::Array(out)))
            }
            ("java.util.Collections", "sort") => {
                let Value::Ref(o) = &a0 else { return self.npe() };
                let mut items = self.iter_items(&a0)?;
                self.sort_values(&mut items)?;
                if let Data::List { items: it, .. } = &mut *o.data.borrow_mut() {
                    *it = items;
                }
                Value::Void
            }
            ("java.util.Collections", "reverse") => {
                if let Value::Ref(o) = &a0 {
                    if let Data::List { items, .. } = &mut *o.data.borrow_mut() {
                        items.reverse();
                    }
                }
                Value::Void
            }
            ("java.util.Collections", "emptyList") => self.new_list(Vec::new(), true, true),
            ("java.util.Collections", "singletonList") => self.new_list(vec![a0], true, true),
            ("java.util.Collections", "unmodifiableList") => {
                let items = self.iter_items(&a0)?;
                self.new_list(items, true, true)
            }
            ("java.util.Collections", "max" | "min") => {
                let items = self.iter_items(&a0)?;
                if items.is_empty() {
                    return self.throw("java.util.NoSuchElementException", None, vec![]);
                }
                let mut best = items[0].clone();
                for it in &items[1..] {
                    let c = self.jcompare(it, &best)?;
                    if (name == "max" && c == Ordering::Greater) || (name == "min" && c == Ordering::Less) {
                        best = it.clone();
                    }
                }
                best
            }
            ("java.lang.System", "currentTimeMillis" | "nanoTime") => Value::Long(0),
            ("java.lang.System", "arraycopy") => {
                let (Value::Ref(src), Value::Ref(dst)) = (&args[0], &args[2]) else { return self.npe() };
                let sp = self.arg_int(&args, 1)? as usize;
                let dp = self.arg_int(&args, 3)? as usize;
                let n = self.arg_int(&args, 4)? as usize;
                let from = self.iter_items(&Value::Ref(src.clone()))?;
                if sp + n > from.len() {
                    return self.throw(
                        "java.lang.ArrayIndexOutOfBoundsException",
                        Some("arraycopy: last source index out of bounds".into()),
                        vec![],
                    );
                }
                if let Data::Array(items) = &mut *dst.data.borrow_mut() {
                    if dp + n > items.len() {
                        return Err(Flow::Abort("unsupported: arraycopy overflow".into()));
                    }
                    items[dp..dp + n].clone_from_slice(&from[sp..sp + n]);
                }
                Value::Void
            }
            _ => return self.unsupported(format!("{class}.{name}")),
        })
    }

    fn format(&mut self, fmt: &str, args: &[Value]) -> R<String> {
        let mut out = String::new();
        let mut it = fmt.chars().peekable();
        let mut next = 0;
        while let Some(c) = it.next() {
            if c != '%' {
                out.push(c);
                continue;
            }
            let mut spec = String::new();
            while let Some(&d) = it.peek() {
                if d.is_ascii_digit() || d == '.' || d == '-' || d == '0' {
                    spec.push(d);
                    it.next();
                } else {
                    break;
                }
            }
            let conv = it.next().unwrap_or('%');
            match conv {
                '%' => out.push('%'),
                'n' => out.push('\n'),
                'd' | 's' | 'f' | 'x' | 'c' | 'b' => {
                    let v = args.get(next).cloned().unwrap_or(Value::Null);
                    next += 1;
                    let text = match conv {
                        'f' => {
                            let prec = spec.split('.').nth(1).and_then(|p| p.parse().ok()).unwrap_or(6);
                            format!("{:.*}", prec, num_of(&v).map(|n| n.as_d()).unwrap_or(0.0))
                        }
                        'x' => format!("{:x}", num_of(&v).map(|n| n.as_l()).unwrap_or(0)),
                        _ => self.to_jstring(&v)?,
                    };
                    let width: usize = spec.split('.').next().and_then(|w| w.trim_start_matches('-').parse().ok()).unwrap_or(0);
                    if spec.starts_with('-') {
                        out.push_str(&format!("{text:<width$}"));
                    } else if spec.starts_with('0') && width > 0 {
                        out.push_str(&format!("{text:0>width$}"));
                    } else {
                        out.push_str(&format!("{text:>width$}"));
                    }
                }
                other => return self.unsupported(format!("format conversion %{other}")),
            }
        }
        Ok(out)
    }

    // ----- JUnit assertions -----

    fn assert_fail<T>(&mut self, class: &str, message: Option<String>, frames: &[(&str, u32)]) -> R<T> {
        let lib = frames.iter().map(|(m, l)| Frame::lib("org.junit.Assert", m, *l)).collect();
        self.throw(class, message, lib)
    }

    fn fmt_values(&mut self, message: &Option<String>, e: &Value, a: &Value) -> R<String> {
        let prefix = match message {
            Some(m) if !m.is_empty() => format!("{m} "),
            _ => String::new(),
        };
        let es = self.to_jstring(e)?;
        let as_ = self.to_jstring(a)?;
        if es == as_ {
            let ec = runtime_class(e);
            let ac = runtime_class(a);
            return Ok(format!("{prefix}expected: {ec}<{es}> but was: {ac}<{as_}>"));
        }
        Ok(format!("{prefix}expected:<{es}> but was:<{as_}>"))
    }

    fn assert_call(&mut self, name: &str, args: Vec<Value>) -> R<Value> {
        let msg_of = |v: &Value| match v {
            Value::Str(s) => Some(s.to_string()),
            _ => None,
        };
        let with_msg = |n: usize| args.len() > n;
        match name {
            "assertTrue" | "assertFalse" => {
                let (message, cond) = if with_msg(1) { (msg_of(&args[0]), &args[1]) } else { (None, &args[0]) };
                let want = name == "assertTrue";
                let b = match cond {
                    Value::Bool(b) => *b,
                    Value::Null => return self.npe(),
                    _ => false,
                };
                if b == want {
                    return Ok(Value::Void);
                }
                let has = message.is_some();
                let frames: Vec<(&str, u32)> = match (want, has) {
                    (true, false) => vec![("fail", 86), ("assertTrue", 41), ("assertTrue", 52)],
                    (true, true) => vec![("fail", 88), ("assertTrue", 41)],
                    (false, false) => vec![("fail", 86), ("assertTrue", 41), ("assertFalse", 64), ("assertFalse", 74)],
                    (false, true) => vec![("fail", 88), ("assertTrue", 41), ("assertFalse", 64)],
                };
                self.assert_fail("java.lang.AssertionError", message, &frames)
            }
            "assertNull" | "assertNotNull" => {
                let (message, v) = if with_msg(1) { (msg_of(&args[0]), args[1].clone()) } else { (None, args[0].clone()) };
                let is_null = matches!(v, Value::Null);
                let has = message.is_some();
                if name == "assertNull" {
                    if is_null {
                        return Ok(Value::Void);
                    }
                    let prefix = message.map(|m| format!("{m} ")).unwrap_or_default();
                    let text = format!("{prefix}expected null, but was:<{}>", self.to_jstring(&v)?);
                    let frames: &[(&str, u32)] = if has {
                        &[("fail", 88), ("failNotNull", 755), ("assertNull", 737)]
                    } else {
                        &[("fail", 88), ("failNotNull", 755), ("assertNull", 737), ("assertNull", 722)]
                    };
                    self.assert_fail("java.lang.AssertionError", Some(text), frames)
                } else {
                    if !is_null {
                        return Ok(Value::Void);
                    }
                    let frames: &[(&str, u32)] = if has {
                        &[("fail", 88), ("assertTrue", 41), ("assertNotNull", 712)]
                    } else {
                        &[("fail", 86), ("assertTrue", 41), ("assertNotNull", 712), ("assertNotNull", 722)]
                    };
                    self.assert_fail("java.lang.AssertionError", message, frames)
                }
            }
            "fail" => {
                let message = args.first().and_then(msg_of);
                let frames: &[(&str, u32)] = if message.is_some() { &[("fail", 88)] } else { &[("fail", 86), ("fail", 95)] };
                self.assert_fail("java.lang.AssertionError", message, frames)
            }
            "assertEquals" | "assertNotEquals" => {
                let all_num = args.iter().all(is_numeric);
                let (message, e, a, delta) = match args.len() {
                    2 => (None, args[0].clone(), args[1].clone(), None),
                    3 if all_num => (None, args[0].clone(), args[1].clone(), Some(args[2].clone())),
                    3 => (msg_of(&args[0]), args[1].clone(), args[2].clone(), None),
                    4 => (msg_of(&args[0]), args[1].clone(), args[2].clone(), Some(args[3].clone())),
                    _ => return self.unsupported("assertEquals arity"),
                };
                let has = message.is_some();
                let floating = matches!(e, Value::Double(_) | Value::Float(_)) || matches!(a, Value::Double(_) | Value::Float(_));
                let integral = |v: &Value| matches!(v, Value::Int(_) | Value::Long(_) | Value::Char(_));
                if name == "assertNotEquals" {
                    let equal = if floating && is_numeric(&e) && is_numeric(&a) {
                        let d = delta.as_ref().and_then(num_of).map(|n| n.as_d()).unwrap_or(0.0);
                        let (x, y) = (num_of(&e).unwrap().as_d(), num_of(&a).unwrap().as_d());
                        x == y || (x - y).abs() <= d
                    } else if integral(&e) && integral(&a) {
                        num_of(&e).unwrap().as_l() == num_of(&a).unwrap().as_l()
                    } else {
                        self.jequals(&e, &a)?
                    };
                    if !equal {
                        return Ok(Value::Void);
                    }
                    let prefix = message.map(|m| format!("{m}. ")).unwrap_or_default();
                    let text = format!("{prefix}Values should be different. Actual: {}", self.to_jstring(&a)?);
                    return self.assert_fail(
                        "java.lang.AssertionError",
                        Some(text),
                        &[("fail", 88), ("failEquals", 185), ("assertNotEquals", 161), ("assertNotEquals", 175)],
                    );
                }
                if floating && is_numeric(&e) && is_numeric(&a) {
                    let x = num_of(&e).unwrap().as_d();
                    let y = num_of(&a).unwrap().as_d();
                    let d = delta.as_ref().and_then(num_of).map(|n| n.as_d()).unwrap_or(0.0);
                    let same = x.to_bits() == y.to_bits() || x == y || (x - y).abs() <= d;
                    if same {
                        return Ok(Value::Void);
                    }
                    let text = self.fmt_values(&message, &Value::Double(x), &Value::Double(y))?;
                    let frames: &[(&str, u32)] = if has {
                        &[("fail", 88), ("failNotEquals", 834), ("assertEquals", 553)]
                    } else {
                        &[("fail", 88), ("failNotEquals", 834), ("assertEquals", 553), ("assertEquals", 683)]
                    };
                    return self.assert_fail("java.lang.AssertionError", Some(text), frames);
                }
                if integral(&e) && integral(&a) {
                    let (x, y) = (num_of(&e).unwrap().as_l(), num_of(&a).unwrap().as_l());
                    if x == y {
                        return Ok(Value::Void);
                    }
                    let text = self.fmt_values(&message, &Value::Long(x), &Value::Long(y))?;
                    let frames: &[(&str, u32)] = if has {
                        &[("fail", 88), ("failNotEquals", 834), ("assertEquals", 645)]
                    } else {
                        &[("fail", 88), ("failNotEquals", 834), ("assertEquals", 645), ("assertEquals", 631)]
                    };
                    return self.assert_fail("java.lang.AssertionError", Some(text), frames);
                }
                let equal = match (&e, &a) {
                    (Value::Null, Value::Null) => true,
                    (Value::Null, _) => false,
                    _ => self.jequals(&e, &a)?,
                };
                if equal {
                    return Ok(Value::Void);
                }
                if let (Value::Str(x), Value::Str(y)) = (&e, &a) {
                    let text = compact_comparison(message.as_deref(), x, y);
                    let frames: &[(&str, u32)] =
                        if has { &[("assertEquals", 115)] } else { &[("assertEquals", 115), ("assertEquals", 144)] };
                    return self.assert_fail("org.junit.ComparisonFailure", Some(text), frames);
                }
                let text = self.fmt_values(&message, &e, &a)?;
                let frames: &[(&str, u32)] = if has {
                    &[("fail", 88), ("failNotEquals", 834), ("assertEquals", 118)]
                } else {
                    &[("fail", 88), ("failNotEquals", 834), ("assertEquals", 118), ("assertEquals", 144)]
                };
                self.assert_fail("java.lang.AssertionError", Some(text), frames)
            }
            "assertSame" | "assertNotSame" => {
                let (message, e, a) = if with_msg(2) {
                    (msg_of(&args[0]), args[1].clone(), args[2].clone())
                } else {
                    (None, args[0].clone(), args[1].clone())
                };
                let same = Self::ref_eq(&e, &a)
                    || matches!((num_of(&e), num_of(&a)), (Some(x), Some(y)) if Self::num_cmp(x, y) == Some(Ordering::Equal));
                let prefix = message.map(|m| format!("{m} ")).unwrap_or_default();
                if name == "assertSame" {
                    if same {
                        return Ok(Value::Void);
                    }
                    let text = format!("{prefix}expected same:<{}> was not:<{}>", self.to_jstring(&e)?, self.to_jstring(&a)?);
                    self.assert_fail(
                        "java.lang.AssertionError",
                        Some(text),
                        &[("fail", 88), ("failNotSame", 743), ("assertSame", 580), ("assertSame", 591)],
                    )
                } else {
                    if !same {
                        return Ok(Value::Void);
                    }
                    let text = format!("{prefix}expected not same");
                    self.assert_fail(
                        "java.lang.AssertionError",
                        Some(text),
                        &[("fail", 88), ("failSame", 733), ("assertNotSame", 600), ("assertNotSame", 611)],
                    )
                }
            }
            "assertArrayEquals" => {
                let (message, e, a) = if args.len() >= 3 && matches!(args[0], Value::Str(_)) {
                    (msg_of(&args[0]), args[1].clone(), args[2].clone())
                } else {
                    (None, args[0].clone(), args[1].clone())
                };
                let delta = args.last().filter(|_| args.len() >= 3 && !matches!(args[0], Value::Str(_))).and_then(num_of).map(|n| n.as_d());
                let prefix = message.map(|m| format!("{m}: ")).unwrap_or_default();
                let frames = vec![
                    Frame::lib("org.junit.internal.ComparisonCriteria", "arrayEquals", 50),
                    Frame::lib("org.junit.Assert", "internalArrayEquals", 473),
                    Frame::lib("org.junit.Assert", "assertArrayEquals", 294),
                ];
                if matches!(e, Value::Null) || matches!(a, Value::Null) {
                    if matches!((&e, &a), (Value::Null, Value::Null)) {
                        return Ok(Value::Void);
                    }
                    let which = if matches!(e, Value::Null) { "expected" } else { "actual" };
                    return self.throw("java.lang.AssertionError", Some(format!("{prefix}{which} array was null")), frames);
                }
                let (x, y) = (self.iter_items(&e)?, self.iter_items(&a)?);
                if x.len() != y.len() {
                    let text = format!("{prefix}array lengths differed, expected.length={} actual.length={}", x.len(), y.len());
                    return self.throw("org.junit.internal.ArrayComparisonFailure", Some(text), frames);
                }
                for (i, (p, q)) in x.iter().zip(&y).enumerate() {
                    let eq = match (delta, num_of(p), num_of(q)) {
                        (Some(d), Some(m), Some(n)) => (m.as_d() - n.as_d()).abs() <= d,
                        _ => self.jequals(p, q)?,
                    };
                    if !eq {
                        let inner = self.fmt_values(&None, p, q)?;
                        let text = format!("{prefix}arrays first differed at element [{i}]; {inner}");
                        return self.throw("org.junit.internal.ArrayComparisonFailure", Some(text), frames);
                    }
                }
                Ok(Value::Void)
            }
            _ => self.unsupported(format!("Assert.{name}")),
        }
    }
}

enum Place {
    Local(String),
    Field(Rc<Obj>, String),
    Static(String, String),
    Elem(Rc<Obj>, usize),
    Value(Value),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_formatting_matches_java() {
        assert_eq!(java_double(1.0), "1.0");
        assert_eq!(java_double(0.1), "0.1");
        assert_eq!(java_double(-0.0), "-0.0");
        assert_eq!(java_double(1e10), "1.0E10");
        assert_eq!(java_double(1.5e-5), "1.5E-5");
        assert_eq!(java_double(1234567.5), "1234567.5");
        assert_eq!(java_float(2.5), "2.5");
    }

    #[test]
    fn comparison_compactor() {
        assert_eq!(compact_comparison(None, "hello", "hallo"), "expected:<h[e]llo> but was:<h[a]llo>");
        assert_eq!(compact_comparison(None, "abc", "abcd"), "expected:<abc[]> but was:<abc[d]>");
        assert_eq!(compact_comparison(Some("msg"), "a", "b"), "msg expected:<[a]> but was:<[b]>");
        let long = "x".repeat(30);
        assert_eq!(
            compact_comparison(None, &format!("{long}A"), &format!("{long}B")),
            format!("expected:<...{}[A]> but was:<...{}[B]>", "x".repeat(20), "x".repeat(20))
        );
    }

    #[test]
    fn string_hash() {
        assert_eq!(java_string_hash("hello"), 99162322);
    }
}
