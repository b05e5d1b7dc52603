//! Classification of compile logs and runtime stack traces.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{keys, Diagnostic, ErrorCategory, Location, Phase};
use crate::profile::FrameworkProfile;
use crate::syntax;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LocateError {
    #[error("the trace never enters the test file")]
    NoTestFrame,
}

/// One `at ...` line of a stack trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    /// `package.Class.method`.
    pub qualified: String,
    pub file: String,
    pub line: Option<u32>,
}

impl Frame {
    pub fn method(&self) -> &str {
        self.qualified.rsplit('.').next().unwrap_or("")
    }

    pub fn class(&self) -> &str {
        self.qualified.rsplit_once('.').map_or("", |(c, _)| c)
    }
}

pub fn parse_frames(trace: &str, profile: &FrameworkProfile) -> Vec<Frame> {
    profile
        .compiled
        .frame
        .captures_iter(trace)
        .map(|c| Frame {
            qualified: c["qualified"].to_string(),
            file: c["file"].to_string(),
            line: c.name("line").and_then(|m| m.as_str().parse().ok()),
        })
        .collect()
}

/// Splits a runner report into one trace per failed test.
pub fn split_traces(log: &str, profile: &FrameworkProfile) -> Vec<String> {
    let c = &profile.compiled;
    let mut traces = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    let mut flush = |cur: &mut Option<Vec<&str>>| {
        if let Some(lines) = cur.take() {
            let text = lines.join("\n").trim_end().to_string();
            traces.push(text);
        }
    };
    for line in log.lines() {
        if c.trace_header.is_match(line) {
            flush(&mut current);
            current = Some(Vec::new());
        } else if c.report_footer.is_match(line) || line.starts_with("Tests run:") {
            flush(&mut current);
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    flush(&mut current);
    traces
}

/// Name of the file a test class lives in, taken from its primary type.
pub fn test_file_name(test_code: &str) -> Option<String> {
    if let Ok(outline) = syntax::parse_outline(test_code) {
        if let Some(t) = outline.primary_type() {
            return Some(format!("{}.java", t.name));
        }
    }
    let re = regex::Regex::new(r"\bclass\s+([A-Za-z_$][\w$]*)").ok()?;
    re.captures(test_code).map(|c| format!("{}.java", &c[1]))
}

fn basename(path: &str) -> &str {
    path.rsplit(['/', '\\']).next().unwrap_or(path)
}

/// One diagnostic per distinct error location, in log order.
pub fn classify_compile(raw_log: &str, profile: &FrameworkProfile) -> Vec<Diagnostic> {
    let c = &profile.compiled;
    let lines: Vec<&str> = raw_log.lines().collect();
    let starts: Vec<usize> = (0..lines.len()).filter(|&i| c.compile_error.is_match(lines[i])).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, &start) in starts.iter().enumerate() {
        let end = starts.get(n + 1).copied().unwrap_or(lines.len());
        let mut block: Vec<&str> = lines[start..end].to_vec();
        while block.last().is_some_and(|l| l.trim().is_empty() || is_error_count(l)) {
            block.pop();
        }
        let caps = c.compile_error.captures(lines[start]).expect("matched above");
        let file = caps["file"].to_string();
        let line: u32 = caps["line"].parse().unwrap_or(0);
        if !seen.insert((file.clone(), line)) {
            continue;
        }
        let message = &caps["message"];
        let notes = block[1..].join("\n");
        let mut diag = Diagnostic::new(ErrorCategory::OtherCompile, block.join("\n"));
        for rule in &c.rules {
            if !rule.message.is_match(message) {
                continue;
            }
            match &rule.note {
                None => {
                    diag.category = rule.category;
                    break;
                }
                Some(note) => {
                    if let Some(m) = note.captures(&notes) {
                        diag.category = rule.category;
                        if let Some(sym) = m.name("symbol") {
                            diag.extracted.insert(keys::MISSING_SYMBOL.into(), sym.as_str().to_string());
                        }
                        break;
                    }
                }
            }
        }
        if diag.category == ErrorCategory::MissingSymbol && !diag.extracted.contains_key(keys::MISSING_SYMBOL) {
            diag.category = ErrorCategory::OtherCompile;
        }
        diag.location = Some(Location { file, line });
        out.push(diag);
    }
    if out.is_empty() {
        let message = if raw_log.trim().is_empty() { "compilation failed without output".to_string() } else { raw_log.to_string() };
        out.push(Diagnostic::new(ErrorCategory::OtherCompile, message));
    }
    out
}

fn is_error_count(line: &str) -> bool {
    let t = line.trim();
    t.ends_with(" error") || t.ends_with(" errors")
}

/// Splits the opening exception line of a trace into type and message.
fn trace_head(trace: &str, profile: &FrameworkProfile) -> (String, String) {
    let body: Vec<&str> = trace.lines().skip_while(|l| l.trim().is_empty()).collect();
    let stop = body.iter().position(|l| profile.compiled.frame.is_match(l)).unwrap_or(body.len());
    let head = body[..stop].join("\n");
    match profile.compiled.exception.captures(&head) {
        Some(c) => (c["type"].to_string(), c.name("message").map_or(String::new(), |m| m.as_str().to_string())),
        None => (String::new(), head),
    }
}

/// Reconstructs both sides of a compacted comparison message, `None` when context was elided.
pub fn decompact(expected: &str, actual: &str, elision: &str) -> Option<(String, String)> {
    let e: Vec<char> = expected.chars().collect();
    let a: Vec<char> = actual.chars().collect();
    let mut common = 0;
    while common < e.len() && common < a.len() && e[common] == a[common] {
        common += 1;
    }
    let open = (0..common).rev().find(|&i| e[i] == '[')?;
    let mut common_suffix = 0;
    while common_suffix < e.len() - open - 1
        && common_suffix < a.len() - open - 1
        && e[e.len() - 1 - common_suffix] == a[a.len() - 1 - common_suffix]
    {
        common_suffix += 1;
    }
    let close_from_end = (0..common_suffix).rev().find(|&k| e[e.len() - 1 - k] == ']')?;
    let prefix: String = e[..open].iter().collect();
    let suffix: String = e[e.len() - close_from_end..].iter().collect();
    if prefix.starts_with(elision) || suffix.ends_with(elision) {
        return None;
    }
    let e_mid: String = e[open + 1..e.len() - 1 - close_from_end].iter().collect();
    let a_mid: String = a[open + 1..a.len() - 1 - close_from_end].iter().collect();
    Some((format!("{prefix}{e_mid}{suffix}"), format!("{prefix}{a_mid}{suffix}")))
}

/// Assertion names called on a line of test code, in order.
fn calls_on_line(test_code: &str, line: u32, names: &[&str]) -> Vec<String> {
    let Ok(toks) = syntax::code_tokens(test_code) else { return Vec::new() };
    toks.windows(2)
        .filter(|w| w[0].line == line && w[1].text(test_code) == "(" && names.contains(&w[0].text(test_code)))
        .map(|w| w[0].text(test_code).to_string())
        .collect()
}

/// Classifies each failed-test trace; unmatchable traces become `OtherRuntime`.
pub fn classify_runtime(stack_traces: &[String], profile: &FrameworkProfile, test_code: Option<&str>) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = stack_traces.iter().map(|t| classify_trace(t, profile, test_code)).collect();
    if out.is_empty() {
        out.push(Diagnostic::new(ErrorCategory::OtherRuntime, "run failed without a stack trace"));
    }
    out
}

fn classify_trace(trace: &str, profile: &FrameworkProfile, test_code: Option<&str>) -> Diagnostic {
    let spec = &profile.spec;
    let vocab = profile.vocabulary();
    let frames = parse_frames(trace, profile);
    let test_file = test_code.and_then(test_file_name);
    let test_frame = test_file.as_deref().and_then(|f| frames.iter().position(|fr| basename(&fr.file) == f && fr.line.is_some()));
    let fault_line = test_frame.and_then(|i| frames[i].line);
    let (exc_type, exc_message) = trace_head(trace, profile);
    let mut diag = Diagnostic::new(ErrorCategory::OtherRuntime, trace);
    if let (Some(file), Some(line)) = (&test_file, fault_line) {
        diag.location = Some(Location { file: file.clone(), line });
    }

    if profile.has_failure_marker(trace) {
        let assert_prefix = format!("{}.", spec.assert_class);
        let mut name = test_frame
            .filter(|&i| i > 0)
            .map(|i| &frames[i - 1])
            .filter(|f| f.qualified.starts_with(&assert_prefix))
            .map(|f| f.method().to_string());
        if name.is_none() {
            if let (Some(code), Some(line)) = (test_code, fault_line) {
                let mut names: Vec<&str> = vocab.names().to_vec();
                names.push(&spec.fail_name);
                let calls = calls_on_line(code, line, &names);
                if calls.len() == 1 {
                    name = calls.into_iter().next();
                }
            }
        }
        let Some(name) = name else { return diag };
        diag.extracted.insert(keys::ASSERTION_KIND.into(), name.clone());
        if name == spec.fail_name {
            diag.category = ErrorCategory::TestFail;
            return diag;
        }
        match vocab.failure_category(&name) {
            Some(ErrorCategory::AssertEqualsMismatch) => {
                let found = profile
                    .compiled
                    .equals
                    .iter()
                    .find_map(|re| re.captures(&exc_message).map(|c| (c["expected"].to_string(), c["actual"].to_string())));
                if let Some((expected, actual)) = found {
                    let (expected, actual) = if exc_type == spec.patterns.comparison_failure {
                        match decompact(&expected, &actual, &spec.patterns.elision) {
                            Some(pair) => pair,
                            None => {
                                diag.extracted.insert("elided".into(), "true".into());
                                (expected, actual)
                            }
                        }
                    } else {
                        (expected, actual)
                    };
                    diag.category = ErrorCategory::AssertEqualsMismatch;
                    diag.extracted.insert(keys::EXPECTED_VALUE.into(), expected);
                    diag.extracted.insert(keys::ACTUAL_VALUE.into(), actual);
                }
            }
            Some(cat) => diag.category = cat,
            None => {}
        }
        return diag;
    }

    if exc_type.is_empty() || is_framework_failure(&exc_type, &exc_message) {
        return diag;
    }
    let simple = exc_type.rsplit('.').next().unwrap_or(&exc_type).to_string();
    diag.extracted.insert(keys::EXCEPTION_TYPE.into(), exc_type.clone());
    diag.extracted.insert("exception_simple".into(), simple);
    diag.category = ErrorCategory::UncaughtException;
    if let (Some(code), Some(line)) = (test_code, fault_line) {
        if let Ok(Some((_, stmts))) = syntax::body_at_line(code, line) {
            if syntax::enclosing_try(&stmts, code, line).is_some() {
                diag.category = ErrorCategory::MismatchedCatch;
            }
        }
    }
    diag
}

/// Failures raised by the runner itself rather than by test code.
fn is_framework_failure(exc_type: &str, message: &str) -> bool {
    exc_type.ends_with("TestTimedOutException")
        || message.starts_with("Unexpected exception, expected<")
        || message.starts_with("No runnable methods")
}

/// The 1-based test-file line a diagnostic points at.
pub fn locate_fault(diagnostic: &Diagnostic, test_code: &str, profile: &FrameworkProfile) -> Result<u32, LocateError> {
    let test_file = test_file_name(test_code);
    match diagnostic.phase {
        Phase::Compile => match &diagnostic.location {
            Some(loc) if loc.line > 0 && test_file.as_deref().is_none_or(|f| basename(&loc.file) == f) => Ok(loc.line),
            _ => Err(LocateError::NoTestFrame),
        },
        Phase::Runtime => {
            let Some(file) = test_file else { return Err(LocateError::NoTestFrame) };
            parse_frames(&diagnostic.message, profile)
                .iter()
                .find(|f| basename(&f.file) == file)
                .and_then(|f| f.line)
                .ok_or(LocateError::NoTestFrame)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> FrameworkProfile {
        FrameworkProfile::junit4()
    }

    const TEST: &str = "package shop;\n\nimport org.junit.Test;\nimport static org.junit.Assert.*;\n\npublic class CartGenTest {\n    @Test\n    public void a() {\n        Cart c = new Cart();\n        assertEquals(5, c.size());\n        try {\n            c.remove(3);\n        } catch (IllegalStateException e) {\n        }\n        c.get(9);\n    }\n}\n";

    fn trace(head: &str, frames: &[&str]) -> String {
        let mut s = head.to_string();
        for f in frames {
            s.push_str("\n\tat ");
            s.push_str(f);
        }
        s
    }

    #[test]
    fn compile_missing_symbol() {
        let log = "src/test/java/shop/CartGenTest.java:9: error: cannot find symbol\n        HashMap<String, Integer> m = new HashMap<>();\n        ^\n  symbol:   class HashMap\n  location: class CartGenTest\n1 error\n";
        let d = classify_compile(log, &p());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, ErrorCategory::MissingSymbol);
        assert_eq!(d[0].get(keys::MISSING_SYMBOL), Some("HashMap"));
        assert_eq!(d[0].location.as_ref().unwrap().line, 9);
        assert!(!d[0].message.contains("1 error"));
    }

    #[test]
    fn compile_categories_in_log_order() {
        let log = "A.java:3: error: ';' expected\n  x\n   ^\nA.java:5: error: f(int) has private access in Cart\nA.java:7: error: method add in class Calc cannot be applied to given types;\n  required: int\n  found:    no arguments\n  reason: actual and formal argument lists differ in length\nA.java:9: error: Shape is abstract; cannot be instantiated\nA.java:9: error: cannot find symbol\n  symbol:   class Foo\n4 errors\n";
        let cats: Vec<_> = classify_compile(log, &p()).iter().map(|d| d.category).collect();
        assert_eq!(
            cats,
            vec![
                ErrorCategory::SyntaxError,
                ErrorCategory::AccessDenied,
                ErrorCategory::MethodCallError,
                ErrorCategory::AbstractInstantiation
            ]
        );
    }

    #[test]
    fn compile_fallbacks() {
        let d = classify_compile("", &p());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, ErrorCategory::OtherCompile);
        let d = classify_compile("A.java:2: error: cannot find symbol\n  symbol:   method frob(int)\n", &p());
        assert_eq!(d[0].category, ErrorCategory::MethodCallError);
        let d = classify_compile("A.java:2: error: cannot find symbol\n  symbol:   method assertTrue(boolean)\n", &p());
        assert_eq!(d[0].get(keys::MISSING_SYMBOL), Some("assertTrue"));
    }

    #[test]
    fn equals_mismatch_values() {
        let t = trace(
            "java.lang.AssertionError: expected:<5> but was:<7>",
            &[
                "org.junit.Assert.fail(Assert.java:88)",
                "org.junit.Assert.failNotEquals(Assert.java:834)",
                "org.junit.Assert.assertEquals(Assert.java:645)",
                "shop.CartGenTest.a(CartGenTest.java:10)",
            ],
        );
        let d = classify_runtime(&[t], &p(), Some(TEST));
        assert_eq!(d[0].category, ErrorCategory::AssertEqualsMismatch);
        assert_eq!(d[0].get(keys::EXPECTED_VALUE), Some("5"));
        assert_eq!(d[0].get(keys::ACTUAL_VALUE), Some("7"));
        assert_eq!(locate_fault(&d[0], TEST, &p()), Ok(10));
    }

    #[test]
    fn comparison_failure_is_decompacted() {
        let t = trace(
            "org.junit.ComparisonFailure: expected:<negativ[]> but was:<negativ[e]>",
            &["org.junit.Assert.assertEquals(Assert.java:115)", "shop.CartGenTest.a(CartGenTest.java:10)"],
        );
        let d = classify_runtime(&[t], &p(), Some(TEST));
        assert_eq!(d[0].get(keys::EXPECTED_VALUE), Some("negativ"));
        assert_eq!(d[0].get(keys::ACTUAL_VALUE), Some("negative"));
        assert_eq!(decompact("a[[b]", "a[[c]", "..."), Some(("a[b".into(), "a[c".into())));
        assert_eq!(decompact("[b]]", "[c]]", "..."), Some(("b]".into(), "c]".into())));
        assert_eq!(decompact("...abc[d]", "...abc[e]", "..."), None);
    }

    #[test]
    fn uncaught_and_mismatched() {
        let npe = trace("java.lang.NullPointerException", &["shop.Cart.get(Cart.java:20)", "shop.CartGenTest.a(CartGenTest.java:15)"]);
        let ise = trace(
            "java.lang.IllegalArgumentException: bad",
            &["shop.Cart.remove(Cart.java:30)", "shop.CartGenTest.a(CartGenTest.java:12)"],
        );
        let d = classify_runtime(&[npe, ise], &p(), Some(TEST));
        assert_eq!(d[0].category, ErrorCategory::UncaughtException);
        assert_eq!(d[0].get(keys::EXCEPTION_TYPE), Some("java.lang.NullPointerException"));
        assert_eq!(d[1].category, ErrorCategory::MismatchedCatch);
        assert!(d.iter().all(Diagnostic::is_coherent));
    }

    #[test]
    fn boolean_and_fail_kinds() {
        let nul = trace(
            "java.lang.AssertionError",
            &[
                "org.junit.Assert.fail(Assert.java:86)",
                "org.junit.Assert.assertNull(Assert.java:702)",
                "shop.CartGenTest.a(CartGenTest.java:10)",
            ],
        );
        let f =
            trace("java.lang.AssertionError: nope", &["org.junit.Assert.fail(Assert.java:88)", "shop.CartGenTest.a(CartGenTest.java:10)"]);
        let d = classify_runtime(&[nul, f], &p(), Some(TEST));
        assert_eq!(d[0].category, ErrorCategory::AssertNullFail);
        assert_eq!(d[1].category, ErrorCategory::TestFail);
    }

    #[test]
    fn locate_without_test_frame() {
        let t = trace("java.lang.NullPointerException", &["shop.Cart.get(Cart.java:20)"]);
        let d = classify_runtime(&[t], &p(), Some(TEST));
        assert_eq!(locate_fault(&d[0], TEST, &p()), Err(LocateError::NoTestFrame));
        let c = Diagnostic {
            location: Some(Location { file: "src/test/java/shop/CartGenTest.java".into(), line: 12 }),
            ..Diagnostic::new(ErrorCategory::SyntaxError, "x")
        };
        assert_eq!(locate_fault(&c, TEST, &p()), Ok(12));
    }

    #[test]
    fn splits_runner_report() {
        let log = "JUnit version 4.12\n.E.E\nTime: 0.01\nThere were 2 failures:\n1) a(shop.CartGenTest)\njava.lang.AssertionError\n\tat shop.CartGenTest.a(CartGenTest.java:10)\n2) b(shop.CartGenTest)\njava.lang.NullPointerException\n\tat shop.CartGenTest.b(CartGenTest.java:20)\n\nFAILURES!!!\nTests run: 2,  Failures: 2\n";
        let traces = split_traces(log, &p());
        assert_eq!(traces.len(), 2);
        assert!(traces[1].starts_with("java.lang.NullPointerException"));
        assert!(!traces[1].contains("FAILURES"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn classification_is_total(log in "(?s).{0,300}", trace in "(?s).{0,300}") {
                let p = FrameworkProfile::junit4();
                let c = classify_compile(&log, &p);
                prop_assert!(!c.is_empty());
                prop_assert!(c.iter().all(|d| d.phase == Phase::Compile && d.is_coherent()));
                let r = classify_runtime(&[trace], &p, Some(TEST));
                prop_assert_eq!(r.len(), 1);
                prop_assert!(r.iter().all(|d| d.phase == Phase::Runtime && d.is_coherent()));
            }
        }
    }
}
