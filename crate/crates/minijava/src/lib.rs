//! A small toolchain for a Java subset: a javac-style checker, a tree-walking
//! interpreter with a JUnit 4 runner, and line and branch coverage.

pub mod ast;
pub mod check;
pub mod cli;
pub mod coverage;
pub mod interp;
pub mod lexer;
pub mod library;
pub mod parser;
pub mod project;
pub mod runner;

use std::io;
use std::path::{Path, PathBuf};

use project::{Project, SourceFile};
pub use runner::{RunResult, TestFailure};

/// Stack size for interpreter threads; deep recursion in programs under test
/// must surface as `StackOverflowError` rather than crash the host.
const STACK_BYTES: usize = 512 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOutcome {
    /// Diagnostics in javac's console layout; empty on success.
    pub log: String,
    pub errors: usize,
}

impl CompileOutcome {
    pub fn success(&self) -> bool {
        self.errors == 0
    }
}

#[derive(Debug, Clone)]
pub struct TestReport {
    pub compile: CompileOutcome,
    /// Absent when compilation failed.
    pub run: Option<RunResult>,
}

/// Checks a loaded project. Syntax errors suppress semantic checking, as in javac.
pub fn compile(project: &Project) -> CompileOutcome {
    let mut log = String::new();
    let errors = if !project.syntax_errors.is_empty() {
        for (i, e) in &project.syntax_errors {
            let f = &project.files[*i];
            log.push_str(&format!("{}:{}: error: {}\n{}\n", f.rel_path, e.line, e.message, f.line(e.line)));
            log.push_str(&" ".repeat(e.col.saturating_sub(1) as usize));
            log.push_str("^\n");
        }
        project.syntax_errors.len()
    } else {
        let errs = check::check_project(project);
        for e in &errs {
            log.push_str(&e.render(project));
        }
        errs.len()
    };
    match errors {
        0 => {}
        1 => log.push_str("1 error\n"),
        n => log.push_str(&format!("{n} errors\n")),
    }
    CompileOutcome { log, errors }
}

fn in_big_thread<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .name("minijava".into())
        .stack_size(STACK_BYTES)
        .spawn(f)
        .expect("spawn interpreter thread")
        .join()
        .expect("interpreter thread panicked")
}

/// Compiles the given sources and, if they compile, runs the JUnit class `class`.
pub fn test_sources(root: PathBuf, files: Vec<SourceFile>, class: &str) -> TestReport {
    let class = class.to_string();
    in_big_thread(move || {
        let project = Project::from_files(root, files);
        let compile = compile(&project);
        let run = compile.success().then(|| runner::run_class(&project, &class));
        TestReport { compile, run }
    })
}

fn read_sources(root: &Path) -> io::Result<Vec<SourceFile>> {
    Ok(Project::load(root)?.files)
}

pub fn compile_workspace(root: &Path) -> io::Result<CompileOutcome> {
    let files = read_sources(root)?;
    let root = root.to_path_buf();
    Ok(in_big_thread(move || compile(&Project::from_files(root, files))))
}

pub fn test_workspace(root: &Path, class: &str) -> io::Result<TestReport> {
    let files = read_sources(root)?;
    Ok(test_sources(root.to_path_buf(), files, class))
}
