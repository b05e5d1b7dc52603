//! Source discovery and name resolution over a project directory.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use crate::ast::{ClassDecl, CompilationUnit};
use crate::library;
use crate::parser::{parse_unit, SyntaxError};

#[derive(Debug, Clone)]
pub struct SourceFile {
    /// Path relative to the project root, with `/` separators.
    pub rel_path: String,
    pub text: String,
    pub is_test: bool,
}

impl SourceFile {
    pub fn line(&self, n: u32) -> &str {
        self.text.lines().nth(n.saturating_sub(1) as usize).unwrap_or("")
    }
}

/// Either a user-declared class or a library class.
#[derive(Debug, Clone)]
pub enum ClassRef {
    User(Rc<ClassDecl>),
    Lib(&'static str),
}

impl ClassRef {
    pub fn fqn(&self) -> String {
        match self {
            ClassRef::User(c) => c.fqn(),
            ClassRef::Lib(n) => n.to_string(),
        }
    }

    pub fn simple(&self) -> String {
        let f = self.fqn();
        f.rsplit('.').next().unwrap_or(&f).to_string()
    }
}

#[derive(Debug)]
pub struct Project {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    pub units: Vec<CompilationUnit>,
    pub syntax_errors: Vec<(usize, SyntaxError)>,
    pub classes: BTreeMap<String, Rc<ClassDecl>>,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name().to_string_lossy().to_string();
        if name.starts_with('.') || name == "target" {
            continue;
        }
        let p = e.path();
        if p.is_dir() {
            collect(&p, out)?;
        } else if name.ends_with(".java") {
            out.push(p);
        }
    }
    Ok(())
}

impl Project {
    pub fn load(root: &Path) -> io::Result<Project> {
        let mut paths = Vec::new();
        collect(root, &mut paths)?;
        let mut files = Vec::new();
        for p in paths {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            let text = fs::read_to_string(&p)?;
            let is_test = rel.contains("src/test/");
            files.push(SourceFile { rel_path: rel, text, is_test });
        }
        Ok(Project::from_files(root.to_path_buf(), files))
    }

    pub fn from_files(root: PathBuf, files: Vec<SourceFile>) -> Project {
        let mut units = Vec::new();
        let mut syntax_errors = Vec::new();
        let mut classes = BTreeMap::new();
        for (i, f) in files.iter().enumerate() {
            match parse_unit(&f.rel_path, &f.text) {
                Ok(u) => {
                    for c in &u.classes {
                        classes.insert(c.fqn(), c.clone());
                    }
                    units.push(u);
                }
                Err(e) => syntax_errors.push((i, e)),
            }
        }
        Project { root, files, units, syntax_errors, classes }
    }

    pub fn file(&self, rel_path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.rel_path == rel_path)
    }

    pub fn unit_of(&self, class: &ClassDecl) -> Option<&CompilationUnit> {
        self.units.iter().find(|u| u.file == class.file)
    }

    pub fn find_class(&self, fqn_or_simple: &str) -> Option<Rc<ClassDecl>> {
        if let Some(c) = self.classes.get(fqn_or_simple) {
            return Some(c.clone());
        }
        self.classes.values().find(|c| c.name == fqn_or_simple).cloned()
    }

    pub fn package_exists(&self, pkg: &str) -> bool {
        library::package_exists(pkg) || self.classes.values().any(|c| c.package.as_deref() == Some(pkg))
    }

    /// Resolves a type name as written in `unit`.
    pub fn resolve(&self, unit: &CompilationUnit, name: &str) -> Option<ClassRef> {
        if name.contains('.') {
            if let Some(c) = self.classes.get(name) {
                return Some(ClassRef::User(c.clone()));
            }
            return library::lookup(name).map(|c| ClassRef::Lib(c.0));
        }
        for c in &unit.classes {
            if c.name == name {
                return Some(ClassRef::User(c.clone()));
            }
        }
        for imp in unit.imports.iter().filter(|i| !i.is_static && !i.wildcard) {
            if imp.path.rsplit('.').next() == Some(name) {
                return self.resolve_qualified(&imp.path);
            }
        }
        let same_pkg = match &unit.package {
            Some(p) => format!("{p}.{name}"),
            None => name.to_string(),
        };
        if let Some(c) = self.classes.get(&same_pkg) {
            return Some(ClassRef::User(c.clone()));
        }
        for imp in unit.imports.iter().filter(|i| !i.is_static && i.wildcard) {
            let pkg = imp.path.trim_end_matches(".*");
            if let Some(c) = self.classes.get(&format!("{pkg}.{name}")) {
                return Some(ClassRef::User(c.clone()));
            }
            if let Some(n) = library::in_package(pkg, name) {
                return Some(ClassRef::Lib(n));
            }
        }
        library::in_package("java.lang", name).map(ClassRef::Lib)
    }

    pub fn resolve_qualified(&self, fqn: &str) -> Option<ClassRef> {
        if let Some(c) = self.classes.get(fqn) {
            return Some(ClassRef::User(c.clone()));
        }
        library::lookup(fqn).map(|c| ClassRef::Lib(c.0))
    }

    pub fn superclass(&self, class: &ClassRef) -> Option<ClassRef> {
        match class {
            ClassRef::User(c) => match &c.superclass {
                Some((name, _, _)) => {
                    let unit = self.unit_of(c)?;
                    self.resolve(unit, name)
                }
                None if c.is_interface => None,
                None => Some(ClassRef::Lib("java.lang.Object")),
            },
            ClassRef::Lib(n) => library::superclass_of(n).map(ClassRef::Lib),
        }
    }

    pub fn interfaces(&self, class: &ClassRef) -> Vec<ClassRef> {
        match class {
            ClassRef::User(c) => {
                let Some(unit) = self.unit_of(c) else { return Vec::new() };
                c.interfaces.iter().filter_map(|(n, _, _)| self.resolve(unit, n)).collect()
            }
            ClassRef::Lib(n) => match *n {
                "java.util.ArrayList" | "java.util.LinkedList" => {
                    vec![ClassRef::Lib("java.util.List"), ClassRef::Lib("java.util.Collection")]
                }
                "java.util.List" | "java.util.Set" => vec![ClassRef::Lib("java.util.Collection")],
                "java.util.HashSet" | "java.util.LinkedHashSet" => {
                    vec![ClassRef::Lib("java.util.Set"), ClassRef::Lib("java.util.Collection")]
                }
                "java.util.HashMap" | "java.util.TreeMap" | "java.util.LinkedHashMap" => vec![ClassRef::Lib("java.util.Map")],
                "java.lang.String" => vec![ClassRef::Lib("java.lang.CharSequence"), ClassRef::Lib("java.lang.Comparable")],
                "java.util.Collection" => vec![ClassRef::Lib("java.lang.Iterable")],
                _ => Vec::new(),
            },
        }
    }

    /// Reflexive, transitive subtype test over classes and interfaces.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sub == sup || sup == "java.lang.Object" {
            return true;
        }
        let Some(start) = self.resolve_qualified(sub) else { return false };
        let mut stack = vec![start];
        let mut seen = 0;
        while let Some(c) = stack.pop() {
            seen += 1;
            if seen > 64 {
                break;
            }
            if c.fqn() == sup {
                return true;
            }
            if let Some(s) = self.superclass(&c) {
                stack.push(s);
            }
            stack.extend(self.interfaces(&c));
        }
        false
    }
}
