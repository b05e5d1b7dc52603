//! JUnit 4.12 style test runner producing `JUnitCore` console output.

use std::fmt::Write as _;
use std::rc::Rc;

use crate::ast::{ClassDecl, MethodDecl};
use crate::coverage::Coverage;
use crate::interp::{Data, Flow, Frame, Interp, Obj, Value, TIMEOUT};
use crate::project::{ClassRef, Project};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestFailure {
    /// Test method name, or `initializationError`.
    pub test: String,
    pub class: String,
    /// Rendered exception with stack trace, as JUnit prints it.
    pub trace: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: String,
    pub run: usize,
    pub failures: Vec<TestFailure>,
    pub stdout: String,
    pub coverage: Coverage,
}

/// Frames JUnit and reflection add below every test method.
fn runner_frames() -> Vec<Frame> {
    vec![
        Frame::native("sun.reflect.NativeMethodAccessorImpl", "invoke0"),
        Frame::lib("sun.reflect.NativeMethodAccessorImpl", "invoke", 62),
        Frame::lib("sun.reflect.DelegatingMethodAccessorImpl", "invoke", 43),
        Frame::lib("java.lang.reflect.Method", "invoke", 498),
        Frame::lib("org.junit.runners.model.FrameworkMethod$1", "runReflectiveCall", 50),
        Frame::lib("org.junit.internal.runners.model.ReflectiveCallable", "run", 12),
        Frame::lib("org.junit.runners.model.FrameworkMethod", "invokeExplosively", 47),
        Frame::lib("org.junit.internal.runners.statements.InvokeMethod", "evaluate", 17),
        Frame::lib("org.junit.runners.ParentRunner", "runLeaf", 325),
        Frame::lib("org.junit.runners.BlockJUnit4ClassRunner", "runChild", 78),
        Frame::lib("org.junit.runners.BlockJUnit4ClassRunner", "runChild", 57),
        Frame::lib("org.junit.runners.ParentRunner$3", "run", 290),
        Frame::lib("org.junit.runners.ParentRunner", "runChildren", 288),
        Frame::lib("org.junit.runners.ParentRunner", "run", 363),
        Frame::lib("org.junit.runner.JUnitCore", "run", 137),
        Frame::lib("org.junit.runner.JUnitCore", "main", 40),
    ]
}

fn header(class: &str, message: &Option<String>) -> String {
    match message {
        Some(m) => format!("{class}: {m}"),
        None => class.to_string(),
    }
}

fn render_frames(out: &mut String, frames: &[Frame], enclosing: Option<&[Frame]>) {
    let mut shown = frames.len();
    if let Some(enc) = enclosing {
        let common = frames.iter().rev().zip(enc.iter().rev()).take_while(|(a, b)| a == b).count();
        shown = frames.len() - common;
        for f in &frames[..shown] {
            let _ = writeln!(out, "\tat {f}");
        }
        if common > 0 {
            let _ = writeln!(out, "\t... {common} more");
        }
        return;
    }
    for f in &frames[..shown] {
        let _ = writeln!(out, "\tat {f}");
    }
}

/// Renders a throwable whose interpreter trace ends at the test method.
fn render_throwable(o: &Rc<Obj>, head_frames: &[Frame]) -> String {
    let mut out = String::new();
    let mut enclosing: Option<Vec<Frame>> = None;
    let mut cur = Some(o.clone());
    let mut depth = 0;
    while let Some(ex) = cur {
        let (message, trace, cause) = match &*ex.data.borrow() {
            Data::Throwable(i) => (i.message.clone(), i.trace.clone(), i.cause.clone()),
            _ => (None, Vec::new(), None),
        };
        let mut frames = trace;
        frames.extend(runner_frames());
        if depth > 0 {
            out.push_str("Caused by: ");
        }
        let _ = writeln!(out, "{}", header(&ex.class, &message));
        if depth == 0 {
            let mut all = head_frames.to_vec();
            all.extend(frames.iter().cloned());
            frames = all;
        }
        render_frames(&mut out, &frames, enclosing.as_deref());
        enclosing = Some(frames);
        cur = cause;
        depth += 1;
        if depth > 8 {
            break;
        }
    }
    out
}

fn has_annotation(m: &MethodDecl, name: &str) -> bool {
    m.annotations.iter().any(|a| a.name == name || a.name.ends_with(&format!(".{name}")))
}

/// Methods of the class and its user superclasses, superclass first.
fn lifecycle(project: &Project, class: &Rc<ClassDecl>, name: &str) -> Vec<(Rc<ClassDecl>, Rc<MethodDecl>)> {
    let mut chain = vec![class.clone()];
    let mut cur = class.clone();
    while let Some(ClassRef::User(s)) = project.superclass(&ClassRef::User(cur.clone())) {
        chain.push(s.clone());
        cur = s;
        if chain.len() > 32 {
            break;
        }
    }
    chain.reverse();
    let mut out = Vec::new();
    for c in chain {
        for m in c.methods.iter().filter(|m| has_annotation(m, name)) {
            out.push((c.clone(), m.clone()));
        }
    }
    out
}

enum Outcome {
    Pass,
    Fail(String),
}

fn abort_trace(interp: &Interp, reason: &str, test_frame: &Frame) -> String {
    let (class, msg) = if reason == TIMEOUT {
        ("org.junit.runners.model.TestTimedOutException", "test timed out after 10000 milliseconds".to_string())
    } else {
        ("java.lang.UnsupportedOperationException", format!("minijava: {reason}"))
    };
    let _ = interp;
    let mut out = format!("{class}: {msg}\n");
    let mut frames = vec![test_frame.clone()];
    frames.extend(runner_frames());
    render_frames(&mut out, &frames, None);
    out
}

fn run_one(interp: &mut Interp, class: &Rc<ClassDecl>, m: &Rc<MethodDecl>, project: &Project) -> Outcome {
    interp.fuel = 2_000_000;
    let test_frame = Frame { class: class.fqn(), method: m.name.clone(), file: class.file_name().into(), line: Some(m.line) };
    let expected =
        m.annotations.iter().find(|a| a.name == "Test" || a.name == "org.junit.Test").and_then(|a| a.expected.clone()).map(|e| {
            let e = e.trim_end_matches(".class");
            project.unit_of(class).and_then(|u| project.resolve(u, e)).map(|c| c.fqn()).unwrap_or_else(|| e.to_string())
        });
    let instance = match interp.instantiate(class, Vec::new()) {
        Ok(Value::Ref(o)) => o,
        Ok(_) => return Outcome::Fail("java.lang.InstantiationException\n".into()),
        Err(Flow::Throw(ex)) => return Outcome::Fail(render_throwable(&ex, &[])),
        Err(Flow::Abort(r)) => return Outcome::Fail(abort_trace(interp, &r, &test_frame)),
        Err(_) => return Outcome::Fail("java.lang.Error: abrupt completion in constructor\n".into()),
    };
    let mut failure: Option<Flow> = None;
    for (owner, before) in lifecycle(project, class, "Before") {
        if let Err(e) = interp.call_method(&owner, &before, Some(instance.clone()), Vec::new()) {
            failure = Some(e);
            break;
        }
    }
    let mut body_result = None;
    if failure.is_none() {
        body_result = Some(interp.call_method(class, m, Some(instance.clone()), Vec::new()));
    }
    let mut outcome = match body_result {
        None => match failure.take() {
            Some(Flow::Throw(ex)) => Outcome::Fail(render_throwable(&ex, &[])),
            Some(Flow::Abort(r)) => Outcome::Fail(abort_trace(interp, &r, &test_frame)),
            _ => Outcome::Fail("java.lang.Error: abrupt completion\n".into()),
        },
        Some(Ok(_)) | Some(Err(Flow::Return(_))) => match &expected {
            Some(x) => {
                let mut out = format!("java.lang.AssertionError: Expected exception: {x}\n");
                let mut frames = vec![Frame::lib("org.junit.internal.runners.statements.ExpectException", "evaluate", 32)];
                frames.extend(runner_frames().into_iter().skip(8));
                render_frames(&mut out, &frames, None);
                Outcome::Fail(out)
            }
            None => Outcome::Pass,
        },
        Some(Err(Flow::Throw(ex))) => {
            let val = Value::Ref(ex.clone());
            match &expected {
                Some(x) if interp.instance_of(&val, x) => Outcome::Pass,
                Some(x) => {
                    let mut out = format!("java.lang.Exception: Unexpected exception, expected<{x}> but was<{}>\n", ex.class);
                    let mut frames = vec![Frame::lib("org.junit.internal.runners.statements.ExpectException", "evaluate", 28)];
                    frames.extend(runner_frames().into_iter().skip(8));
                    render_frames(&mut out, &frames, None);
                    let cause = render_throwable(&ex, &[]);
                    let mut cause_frames = match &*ex.data.borrow() {
                        Data::Throwable(i) => i.trace.clone(),
                        _ => Vec::new(),
                    };
                    cause_frames.extend(runner_frames());
                    let head = cause.lines().next().unwrap_or("").to_string();
                    let _ = writeln!(out, "Caused by: {head}");
                    render_frames(&mut out, &cause_frames, Some(&frames));
                    Outcome::Fail(out)
                }
                None => Outcome::Fail(render_throwable(&ex, &[])),
            }
        }
        Some(Err(Flow::Abort(r))) => Outcome::Fail(abort_trace(interp, &r, &test_frame)),
        Some(Err(_)) => Outcome::Fail("java.lang.Error: abrupt completion\n".into()),
    };
    for (owner, after) in lifecycle(project, class, "After") {
        interp.fuel = interp.fuel.max(100_000);
        if let Err(e) = interp.call_method(&owner, &after, Some(instance.clone()), Vec::new()) {
            if matches!(outcome, Outcome::Pass) {
                outcome = match e {
                    Flow::Throw(ex) => Outcome::Fail(render_throwable(&ex, &[])),
                    Flow::Abort(r) => Outcome::Fail(abort_trace(interp, &r, &test_frame)),
                    _ => Outcome::Pass,
                };
            }
        }
    }
    outcome
}

/// Runs every `@Test` method of `class_fqn` in declaration order.
pub fn run_class(project: &Project, class_fqn: &str) -> RunResult {
    let coverage = Coverage::instrument(project);
    let mut interp = Interp::new(project, coverage);
    let mut failures = Vec::new();
    let mut progress = String::new();
    let mut run = 0;
    let class = project.find_class(class_fqn);
    match &class {
        None => {
            run = 1;
            progress.push_str(".E");
            failures.push(TestFailure {
                test: "initializationError".into(),
                class: "org.junit.runner.manipulation.Filter".into(),
                trace: format!("java.lang.Exception: No tests found matching class {class_fqn}\n"),
            });
        }
        Some(class) => {
            let tests: Vec<_> =
                class.methods.iter().filter(|m| has_annotation(m, "Test") && !has_annotation(m, "Ignore")).cloned().collect();
            if tests.is_empty() {
                run = 1;
                progress.push_str(".E");
                failures.push(TestFailure {
                    test: "initializationError".into(),
                    class: class.fqn(),
                    trace: "java.lang.Exception: No runnable methods\n\tat org.junit.runners.BlockJUnit4ClassRunner.validateInstanceMethods(BlockJUnit4ClassRunner.java:191)\n".to_string(),
                });
            } else {
                let mut class_failed = None;
                for (owner, bc) in lifecycle(project, class, "BeforeClass") {
                    match interp.call_method(&owner, &bc, None, Vec::new()) {
                        Ok(_) => {}
                        Err(Flow::Throw(ex)) => {
                            class_failed = Some(render_throwable(&ex, &[]));
                            break;
                        }
                        Err(Flow::Abort(r)) => {
                            class_failed = Some(format!("java.lang.UnsupportedOperationException: minijava: {r}\n"));
                            break;
                        }
                        Err(_) => {}
                    }
                }
                if let Some(trace) = class_failed {
                    run = 1;
                    progress.push_str(".E");
                    failures.push(TestFailure { test: "classMethod".into(), class: class.fqn(), trace });
                } else {
                    for m in &tests {
                        run += 1;
                        progress.push('.');
                        if let Outcome::Fail(trace) = run_one(&mut interp, class, m, project) {
                            progress.push('E');
                            failures.push(TestFailure { test: m.name.clone(), class: class.fqn(), trace });
                        }
                    }
                }
            }
        }
    }
    let mut log = format!("JUnit version 4.12\n{progress}\nTime: 0\n");
    if !failures.is_empty() {
        if failures.len() == 1 {
            log.push_str("There was 1 failure:\n");
        } else {
            let _ = writeln!(log, "There were {} failures:", failures.len());
        }
        for (i, f) in failures.iter().enumerate() {
            let _ = writeln!(log, "{}) {}({})", i + 1, f.test, f.class);
            log.push_str(&f.trace);
        }
        let _ = write!(log, "\nFAILURES!!!\nTests run: {run},  Failures: {}\n\n", failures.len());
    } else {
        let noun = if run == 1 { "test" } else { "tests" };
        let _ = write!(log, "\nOK ({run} {noun})\n\n");
    }
    RunResult { log, run, failures, stdout: std::mem::take(&mut interp.stdout), coverage: std::mem::take(&mut interp.coverage) }
}
