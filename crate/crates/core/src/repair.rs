//! Template repair T1 to T5, the one-time model fallback, and the inner validation loop.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{classify_compile, classify_runtime, locate_fault};
use crate::gateway::{extract_test_code, Completion, CompletionParams, GatewayError, GatewaySession};
use crate::harness::{Harness, HarnessError, PhaseStatus};
use crate::model::{
    keys, transition, ArtifactState, Diagnostic, ErrorCategory, FocalUnit, Location, RepairStep, RunConfig, Template, TestArtifact,
    TransitionRecord,
};
use crate::profile::FrameworkProfile;
use crate::prompt::{PromptBundle, PromptStudio};
use crate::suite::normalize_test_class;
use crate::syntax::{self, StmtKind, TokKind, Token};

/// Lines kept in each before/after excerpt of a repair step.
pub const EXCERPT_LINES: usize = 10;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("symbol {0} is not in the symbol index")]
    SymbolUnresolvable(String),
    #[error("no matching assertion at line {0}")]
    SiteMismatch(u32),
    #[error("actual value {0:?} has no literal form")]
    UnrenderableActual(String),
    #[error("no complete statement spans line {0}")]
    StatementSpanUndetectable(u32),
    #[error("no try block encloses line {0}")]
    TryNotFound(u32),
    #[error("diagnostic lacks {0}")]
    MissingCapture(&'static str),
    #[error("fault line cannot be located in the test code")]
    Unlocatable,
    #[error("assertion at line {0} was already flipped once")]
    AlreadyFlipped(u32),
}

/// The template for a diagnostic category, or `None` when only the model can help.
pub fn dispatch(diagnostic: &Diagnostic) -> Option<Template> {
    use ErrorCategory::*;
    match diagnostic.category {
        MissingSymbol => Some(Template::T1),
        AssertNullFail | AssertNotNullFail | AssertTrueFail | AssertFalseFail => Some(Template::T2),
        AssertEqualsMismatch => Some(Template::T3),
        UncaughtException => Some(Template::T4),
        MismatchedCatch => Some(Template::T5),
        _ => None,
    }
}

fn tokens(code: &str) -> Vec<Token> {
    syntax::code_tokens(code).unwrap_or_default()
}

/// T1: imports the qualified name of the missing symbol.
pub fn apply_t1(
    code: &str,
    diagnostic: &Diagnostic,
    index: &BTreeMap<String, Vec<String>>,
    profile: &FrameworkProfile,
) -> Result<String, TemplateError> {
    Ok(apply_t1_at(code, diagnostic, index, profile)?.0)
}

/// T1 returning the 1-based line of the insertion and the number of lines added.
fn apply_t1_at(
    code: &str,
    diagnostic: &Diagnostic,
    index: &BTreeMap<String, Vec<String>>,
    profile: &FrameworkProfile,
) -> Result<(String, u32, u32), TemplateError> {
    let symbol = diagnostic.get(keys::MISSING_SYMBOL).ok_or(TemplateError::MissingCapture(keys::MISSING_SYMBOL))?;
    let simple = symbol.split('.').next().unwrap_or(symbol);
    let spec = &profile.spec;
    let outline = syntax::parse_outline(code).ok();
    let imports = outline.as_ref().map(|o| o.imports.clone()).unwrap_or_default();
    let is_assert_method = simple.starts_with("assert") || simple == spec.fail_name;
    let line = if is_assert_method {
        let qualified = format!("{}.{simple}", spec.assert_class);
        let wildcard = format!("{}.*", spec.assert_class);
        if imports.iter().any(|i| i.is_static && (i.path == qualified || i.path == wildcard)) {
            return Ok((code.to_string(), 0, 0));
        }
        profile.render_static_import(&qualified)
    } else {
        let qualified =
            index.get(simple).and_then(|v| v.first()).ok_or_else(|| TemplateError::SymbolUnresolvable(simple.to_string()))?.clone();
        let package = qualified.rsplit_once('.').map(|(p, _)| format!("{p}.*"));
        if imports.iter().any(|i| !i.is_static && (i.path == qualified || Some(&i.path) == package.as_ref())) {
            return Ok((code.to_string(), 0, 0));
        }
        profile.render_import(&qualified)
    };
    let mut out = code.to_string();
    let (at, text) = match (imports.last(), outline.as_ref().and_then(|o| o.package_end)) {
        (Some(last), _) => (last.end, format!("\n{line}")),
        (None, Some(end)) => (end, format!("\n\n{line}")),
        (None, None) => (0, format!("{line}\n")),
    };
    out.insert_str(at, &text);
    let added = text.matches('\n').count() as u32;
    let insert_line = if at == 0 { 1 } else { syntax::line_of(code, at) + 1 };
    Ok((out, insert_line, added))
}

/// Identifier tokens named one of `names` and followed by `(`, whose statement covers `line`.
fn call_sites(code: &str, line: u32, names: &[&str]) -> Vec<usize> {
    let toks = tokens(code);
    let on_line = |i: usize| toks[i].line == line;
    let is_call = |i: usize| {
        toks[i].kind == TokKind::Ident && names.contains(&toks[i].text(code)) && toks.get(i + 1).is_some_and(|t| t.text(code) == "(")
    };
    let direct: Vec<usize> = (0..toks.len()).filter(|&i| on_line(i) && is_call(i)).collect();
    if !direct.is_empty() {
        return direct;
    }
    // The reported line may sit inside a call spread over several lines.
    let Ok(Some((_, stmts))) = syntax::body_at_line(code, line) else { return Vec::new() };
    let Some(stmt) = syntax::innermost_statement(&stmts, line) else { return Vec::new() };
    (0..toks.len()).filter(|&i| toks[i].start >= stmt.start && toks[i].end <= stmt.end && is_call(i)).collect()
}

/// T2: flips the failing boolean assertion at `line` to its opposite.
pub fn apply_t2(code: &str, diagnostic: &Diagnostic, line: u32, profile: &FrameworkProfile) -> Result<String, TemplateError> {
    let vocab = profile.vocabulary();
    let name = diagnostic
        .get(keys::ASSERTION_KIND)
        .or_else(|| vocab.name_for(diagnostic.category))
        .ok_or(TemplateError::MissingCapture(keys::ASSERTION_KIND))?;
    let opposite = vocab.opposite(name).ok_or(TemplateError::SiteMismatch(line))?;
    let toks = tokens(code);
    let site = *call_sites(code, line, &[name]).first().ok_or(TemplateError::SiteMismatch(line))?;
    let t = toks[site];
    Ok(format!("{}{opposite}{}", &code[..t.start], &code[t.end..]))
}

/// Byte ranges of the top-level arguments of the call whose `(` is token `open`.
fn call_arguments(code: &str, toks: &[Token], open: usize) -> Option<Vec<(usize, usize)>> {
    let mut depth = 0i32;
    let mut args = Vec::new();
    let mut first: Option<usize> = None;
    let mut last = open;
    for (i, t) in toks.iter().enumerate().skip(open) {
        match t.text(code) {
            "(" | "[" | "{" => {
                depth += 1;
                if depth == 1 {
                    continue;
                }
            }
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    if let Some(f) = first {
                        args.push((toks[f].start, toks[last].end));
                    }
                    return Some(args);
                }
            }
            "," if depth == 1 => {
                args.push((toks[first?].start, toks[last].end));
                first = None;
                continue;
            }
            _ => {}
        }
        if depth >= 1 {
            first.get_or_insert(i);
            last = i;
        }
    }
    None
}

fn java_string(value: &str) -> String {
    let mut s = String::from("\"");
    for c in value.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\t' => s.push_str("\\t"),
            '\r' => s.push_str("\\r"),
            c => s.push(c),
        }
    }
    s.push('"');
    s
}

fn java_char(c: char) -> String {
    match c {
        '\'' => "'\\''".into(),
        '\\' => "'\\\\'".into(),
        '\n' => "'\\n'".into(),
        '\t' => "'\\t'".into(),
        c => format!("'{c}'"),
    }
}

fn is_integer(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_decimal(s: &str) -> bool {
    let t = s.strip_prefix('-').unwrap_or(s);
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], Some(&t[i + 1..])),
        None => (t, None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = |x: &str| x.bytes().all(|b| b.is_ascii_digit());
    !(int.is_empty() && frac.is_empty()) && digits(int) && digits(frac) && exp.is_none_or(|e| is_integer(e.strip_prefix('+').unwrap_or(e)))
}

/// Renders `actual` as a literal shaped like the original expected argument.
fn render_literal(original: &str, actual: &str, string_compare: bool) -> Result<String, TemplateError> {
    let unrenderable = || TemplateError::UnrenderableActual(actual.to_string());
    let original = original.trim();
    let unsigned = original.strip_prefix('-').unwrap_or(original).trim_start();
    if original.starts_with('"') {
        if actual == "null" && !string_compare {
            return Ok("null".into());
        }
        return Ok(java_string(actual));
    }
    if original.starts_with('\'') {
        let mut chars = actual.chars();
        return match (chars.next(), chars.next()) {
            (Some(c), None) => Ok(java_char(c)),
            _ => Err(unrenderable()),
        };
    }
    if unsigned.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        let hex = unsigned.starts_with("0x") || unsigned.starts_with("0X");
        let suffix = unsigned.chars().last().filter(|c| !hex && "lLfFdD".contains(*c));
        return match suffix {
            Some(s @ ('l' | 'L')) if is_integer(actual) => Ok(format!("{actual}{s}")),
            Some(s @ ('f' | 'F' | 'd' | 'D')) if is_decimal(actual) => Ok(format!("{actual}{s}")),
            None if is_decimal(actual) => Ok(actual.to_string()),
            _ => Err(unrenderable()),
        };
    }
    if original == "true" || original == "false" {
        return if actual == "true" || actual == "false" { Ok(actual.to_string()) } else { Err(unrenderable()) };
    }
    // The expected side is an expression: infer the literal from the value alone.
    if string_compare {
        return Ok(java_string(actual));
    }
    if is_integer(actual) {
        let fits = actual.parse::<i32>().is_ok();
        return Ok(if fits { actual.to_string() } else { format!("{actual}L") });
    }
    if is_decimal(actual) || actual == "true" || actual == "false" || actual == "null" {
        return Ok(actual.to_string());
    }
    Err(unrenderable())
}

/// T3: replaces the expected argument of the failing equality assertion with the actual value.
pub fn apply_t3(code: &str, diagnostic: &Diagnostic, line: u32, profile: &FrameworkProfile) -> Result<String, TemplateError> {
    let actual = diagnostic.get(keys::ACTUAL_VALUE).ok_or(TemplateError::MissingCapture(keys::ACTUAL_VALUE))?;
    if diagnostic.get("elided").is_some() {
        return Err(TemplateError::UnrenderableActual(actual.to_string()));
    }
    let name = profile.vocabulary().equals_assert.as_str();
    let toks = tokens(code);
    let site = *call_sites(code, line, &[name]).first().ok_or(TemplateError::SiteMismatch(line))?;
    let args = call_arguments(code, &toks, site + 1).ok_or(TemplateError::SiteMismatch(line))?;
    let expected_index = match args.len() {
        2 => 0,
        3 if code[args[0].0..args[0].1].starts_with('"') && !code[args[2].0..args[2].1].starts_with('"') => 1,
        3 => 0,
        4 => 1,
        _ => return Err(TemplateError::SiteMismatch(line)),
    };
    let (start, end) = args[expected_index];
    let string_compare = diagnostic.message.trim_start().starts_with(&profile.spec.patterns.comparison_failure);
    let literal = render_literal(&code[start..end], actual, string_compare)?;
    Ok(format!("{}{literal}{}", &code[..start], &code[end..]))
}

/// A name starting with `base` that no identifier in `scope` uses.
fn fresh_name(scope: &str, base: &str) -> String {
    let used: BTreeSet<&str> = tokens(scope).iter().filter(|t| t.kind == TokKind::Ident).map(|t| t.text(scope)).collect();
    if !used.contains(base) {
        return base.to_string();
    }
    (1..).map(|n| format!("{base}{n}")).find(|n| !used.contains(n.as_str())).expect("unbounded")
}

fn default_value(ty: &str) -> &'static str {
    match ty {
        "int" | "short" | "byte" => "0",
        "long" => "0L",
        "float" => "0f",
        "double" => "0.0",
        "boolean" => "false",
        "char" => "'\\0'",
        _ => "null",
    }
}

/// `(type, name, init)` when `stmt` declares one local variable with an initializer.
fn split_declaration(code: &str, stmt: (usize, usize)) -> Result<Option<(String, String, String)>, ()> {
    let toks: Vec<Token> = tokens(code).into_iter().filter(|t| t.start >= stmt.0 && t.end <= stmt.1).collect();
    let text = |i: usize| toks[i].text(code);
    let mut first = 0;
    while first < toks.len() && (text(first) == "final" || text(first) == "@") {
        first += if text(first) == "@" { 2 } else { 1 };
    }
    let mut depth = 0i32;
    let mut eq = None;
    for i in first..toks.len() {
        match text(i) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "=" if depth == 0 => {
                let glued_before = i > 0 && toks[i - 1].end == toks[i].start && "+-*/%&|^<>!=".contains(text(i - 1));
                let glued_after = toks.get(i + 1).is_some_and(|n| n.start == toks[i].end && n.text(code) == "=");
                if !glued_before && !glued_after {
                    eq = Some(i);
                }
                break;
            }
            _ => {}
        }
    }
    let Some(eq) = eq else { return Ok(None) };
    if eq < first + 2 || toks[eq - 1].kind != TokKind::Ident {
        return Ok(None);
    }
    let before_name = text(eq - 2);
    if !(toks[eq - 2].kind == TokKind::Ident || before_name == ">" || before_name == "]") {
        return Ok(None);
    }
    let type_toks = &toks[first..eq - 1];
    if type_toks.iter().any(|t| !matches!(t.kind, TokKind::Ident | TokKind::Punct) || matches!(t.text(code), "(" | ")" | "=" | ";")) {
        return Ok(None);
    }
    let ty = syntax::render_tokens(code, type_toks);
    if ty == "return" || ty == "throw" {
        return Ok(None);
    }
    // Declarations this template cannot split safely.
    let semi = toks.len() - 1;
    let init_first = eq + 1;
    if ty == "var" || init_first >= semi || text(init_first) == "{" {
        return Err(());
    }
    let mut d = 0i32;
    for i in init_first..semi {
        match text(i) {
            "(" | "[" | "{" => d += 1,
            ")" | "]" | "}" => d -= 1,
            "," if d == 0 => return Err(()),
            _ => {}
        }
    }
    let init = code[toks[init_first].start..toks[semi - 1].end].to_string();
    Ok(Some((ty, text(eq - 1).to_string(), init)))
}

/// T4: wraps the statement at `line` in a try block catching the thrown type.
pub fn apply_t4(code: &str, diagnostic: &Diagnostic, line: u32) -> Result<String, TemplateError> {
    let exception = diagnostic.get(keys::EXCEPTION_TYPE).ok_or(TemplateError::MissingCapture(keys::EXCEPTION_TYPE))?.replace('$', ".");
    let undetectable = || TemplateError::StatementSpanUndetectable(line);
    let (method, stmts) = syntax::body_at_line(code, line).ok().flatten().ok_or_else(undetectable)?;
    let stmt = syntax::innermost_statement(&stmts, line).ok_or_else(undetectable)?;
    if stmt.kind == StmtKind::Block {
        return Err(undetectable());
    }
    let body = method.body.ok_or_else(undetectable)?;
    let var = fresh_name(&code[body.0..body.1], "e");
    let catch = format!("catch ({exception} {var}) {{ /* Expected */ }}");
    let replacement = match (stmt.kind, split_declaration(code, (stmt.start, stmt.end))) {
        (StmtKind::Simple, Ok(Some((ty, name, init)))) => {
            format!("{ty} {name} = {}; try {{ {name} = {init}; }} {catch}", default_value(&ty))
        }
        (StmtKind::Simple, Err(())) => return Err(undetectable()),
        _ => format!("try {{ {} }} {catch}", &code[stmt.start..stmt.end]),
    };
    Ok(format!("{}{replacement}{}", &code[..stmt.start], &code[stmt.end..]))
}

/// T5: appends a catch clause for the thrown type to the try enclosing `line`.
pub fn apply_t5(code: &str, diagnostic: &Diagnostic, line: u32) -> Result<String, TemplateError> {
    let exception = diagnostic.get(keys::EXCEPTION_TYPE).ok_or(TemplateError::MissingCapture(keys::EXCEPTION_TYPE))?.replace('$', ".");
    let (method, stmts) = syntax::body_at_line(code, line).ok().flatten().ok_or(TemplateError::TryNotFound(line))?;
    let try_stmt = syntax::enclosing_try(&stmts, code, line).ok_or(TemplateError::TryNotFound(line))?;
    let parts = try_stmt.try_parts.as_ref().ok_or(TemplateError::TryNotFound(line))?;
    let at = parts.catches.last().map_or(parts.body.1 + 1, |c| c.end);
    let body = method.body.ok_or(TemplateError::TryNotFound(line))?;
    let var = fresh_name(&code[body.0..body.1], "e");
    Ok(format!("{} catch ({exception} {var}) {{ /* Expected */ }}{}", &code[..at], &code[at..]))
}

/// The differing line region of `before` and `after`, each capped at [`EXCERPT_LINES`].
pub fn excerpts(before: &str, after: &str) -> (String, String) {
    let b: Vec<&str> = before.lines().collect();
    let a: Vec<&str> = after.lines().collect();
    let prefix = b.iter().zip(&a).take_while(|(x, y)| x == y).count();
    let max_suffix = b.len().min(a.len()) - prefix;
    let suffix = b.iter().rev().zip(a.iter().rev()).take(max_suffix).take_while(|(x, y)| x == y).count();
    let cut = |v: &[&str]| v[prefix..v.len() - suffix].iter().take(EXCERPT_LINES).copied().collect::<Vec<_>>().join("\n");
    (cut(&b), cut(&a))
}

fn line_excerpt(code: &str, line: Option<u32>) -> String {
    line.and_then(|l| code.lines().nth(l.saturating_sub(1) as usize)).unwrap_or("").trim_end().to_string()
}

/// The model used for the one-time fallback repair.
pub trait LanguageModel {
    fn complete(&mut self, bundle: &PromptBundle, params: &CompletionParams) -> Result<Completion, GatewayError>;
}

impl LanguageModel for GatewaySession<'_> {
    fn complete(&mut self, bundle: &PromptBundle, params: &CompletionParams) -> Result<Completion, GatewayError> {
        GatewaySession::complete(self, bundle, params)
    }
}

/// Stage at which a candidate stopped: syntax check, compilation, or test execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureStage {
    Syntax,
    Compile,
    Runtime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    /// `None` when the suite compiled and every test passed.
    pub stage: Option<FailureStage>,
    pub diagnostics: Vec<Diagnostic>,
    pub workspace: Option<PathBuf>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.stage.is_none()
    }

    fn rank(&self) -> u8 {
        match self.stage {
            Some(FailureStage::Syntax) => 0,
            Some(FailureStage::Compile) => 1,
            Some(FailureStage::Runtime) => 2,
            None => 3,
        }
    }
}

/// Syntax check, then compile, then run; later phases are skipped once one fails.
pub fn validate(
    harness: &dyn Harness,
    profile: &FrameworkProfile,
    focal: &FocalUnit,
    artifact: &TestArtifact,
) -> Result<Validation, HarnessError> {
    if let Err(e) = syntax::check_structure(&artifact.code) {
        let mut d = Diagnostic::new(ErrorCategory::SyntaxError, e.to_string());
        d.location = Some(Location { file: format!("{}.java", focal.test_class_name()), line: e.line });
        return Ok(Validation { stage: Some(FailureStage::Syntax), diagnostics: vec![d], workspace: None });
    }
    let ws = harness.prepare_workspace(focal, artifact)?;
    let compiled = harness.compile(&ws, focal)?;
    if !compiled.success {
        let diagnostics = if compiled.status == PhaseStatus::TimedOut {
            vec![Diagnostic::new(ErrorCategory::OtherCompile, compiled.raw_log)]
        } else {
            classify_compile(&compiled.raw_log, profile)
        };
        return Ok(Validation { stage: Some(FailureStage::Compile), diagnostics, workspace: Some(ws) });
    }
    let run = harness.execute(&ws, focal)?;
    if !run.success {
        let diagnostics = if run.stack_traces.is_empty() {
            let tail: Vec<&str> = run.raw_log.lines().rev().take(40).collect();
            let tail: Vec<&str> = tail.into_iter().rev().collect();
            vec![Diagnostic::new(ErrorCategory::OtherRuntime, tail.join("\n"))]
        } else {
            classify_runtime(&run.stack_traces, profile, Some(&artifact.code))
        };
        return Ok(Validation { stage: Some(FailureStage::Runtime), diagnostics, workspace: Some(ws) });
    }
    Ok(Validation { stage: None, diagnostics: Vec::new(), workspace: Some(ws) })
}

/// Everything the repair loop needs besides the candidate itself.
pub struct RepairEnv<'a> {
    pub harness: &'a dyn Harness,
    pub profile: &'a FrameworkProfile,
    pub studio: &'a PromptStudio,
    pub config: &'a RunConfig,
    pub params: &'a CompletionParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    /// `Success` or `Discarded`.
    pub artifact: TestArtifact,
    pub transitions: Vec<TransitionRecord>,
    /// Where the final validation stopped, for a discarded artifact.
    pub failure: Option<FailureStage>,
    pub cause: Option<String>,
    /// Fallback completions, for the cost ledger.
    pub completions: Vec<Completion>,
    /// Number of syntax/compile/run validations performed.
    pub validations: usize,
    pub workspace: Option<PathBuf>,
}

fn same_problem(a: &Diagnostic, b: &Diagnostic, template: Template) -> bool {
    if a.category != b.category {
        return false;
    }
    match template {
        Template::T1 => a.get(keys::MISSING_SYMBOL) == b.get(keys::MISSING_SYMBOL),
        _ => a.location.as_ref().map(|l| l.line) == b.location.as_ref().map(|l| l.line),
    }
}

struct Loop<'a, 'm> {
    env: &'a RepairEnv<'a>,
    focal: &'a FocalUnit,
    model: &'m mut dyn LanguageModel,
    artifact: TestArtifact,
    transitions: Vec<TransitionRecord>,
    completions: Vec<Completion>,
    validations: usize,
    /// Lines whose boolean assertion has been flipped since the code last came from the model.
    flipped: BTreeSet<u32>,
}

impl Loop<'_, '_> {
    fn validate(&mut self, code: &str) -> Result<Validation, HarnessError> {
        self.validations += 1;
        let mut probe = self.artifact.clone();
        probe.code = code.to_string();
        validate(self.env.harness, self.env.profile, self.focal, &probe)
    }

    fn record(&mut self, template: Template, diagnostic: &Diagnostic, before: (String, String), resolved: bool, error: Option<String>) {
        self.artifact.repair_trace.push(RepairStep {
            template,
            diagnostic: diagnostic.clone(),
            before_excerpt: before.0,
            after_excerpt: before.1,
            resolved,
            error,
        });
    }

    fn apply(&self, template: Template, diag: &Diagnostic) -> Result<(String, Option<(u32, u32)>), TemplateError> {
        let code = &self.artifact.code;
        let profile = self.env.profile;
        if template == Template::T1 {
            let (out, at, added) = apply_t1_at(code, diag, &self.focal.symbol_index, profile)?;
            return Ok((out, (added > 0).then_some((at, added))));
        }
        let line = locate_fault(diag, code, profile).map_err(|_| TemplateError::Unlocatable)?;
        let out = match template {
            Template::T2 if self.flipped.contains(&line) => return Err(TemplateError::AlreadyFlipped(line)),
            Template::T2 => apply_t2(code, diag, line, profile)?,
            Template::T3 => apply_t3(code, diag, line, profile)?,
            Template::T4 => apply_t4(code, diag, line)?,
            _ => apply_t5(code, diag, line)?,
        };
        Ok((out, None))
    }

    /// Tries one template step; returns the reason to escalate when none applies.
    fn template_step(&mut self, v: &mut Validation) -> Result<Option<String>, HarnessError> {
        let Some((diag, template)) = v.diagnostics.iter().find_map(|d| dispatch(d).map(|t| (d.clone(), t))) else {
            let category = v.diagnostics.first().map_or("unknown".to_string(), |d| d.category.to_string());
            return Ok(Some(format!("no template for {category}")));
        };
        let fault_line = locate_fault(&diag, &self.artifact.code, self.env.profile).ok();
        let before = self.artifact.code.clone();
        let (after, inserted) = match self.apply(template, &diag) {
            Ok(r) => r,
            Err(e) => {
                let ex = line_excerpt(&before, fault_line);
                self.record(template, &diag, (ex.clone(), ex), false, Some(e.to_string()));
                return Ok(Some(e.to_string()));
            }
        };
        if after == before {
            let ex = line_excerpt(&before, fault_line);
            self.record(template, &diag, (ex.clone(), ex), false, Some("edit changed nothing".into()));
            return Ok(Some("edit changed nothing".into()));
        }
        let next = self.validate(&after)?;
        if v.stage == Some(FailureStage::Runtime) && next.rank() < v.rank() {
            let reason = "edit broke compilation and was reverted".to_string();
            self.record(template, &diag, excerpts(&before, &after), false, Some(reason.clone()));
            return Ok(Some(reason));
        }
        let resolved = !next.diagnostics.iter().any(|d| same_problem(d, &diag, template));
        self.record(template, &diag, excerpts(&before, &after), resolved, None);
        if let Some((at, added)) = inserted {
            self.flipped = self.flipped.iter().map(|&l| if l >= at { l + added } else { l }).collect();
        }
        if template == Template::T2 {
            if let Some(l) = fault_line {
                self.flipped.insert(l);
            }
        }
        self.artifact.set_code(after, self.env.profile);
        *v = next;
        Ok(None)
    }

    /// The one-time model repair. `Err` carries the reason the fallback itself failed.
    fn fallback(&mut self, v: &mut Validation) -> Result<Result<(), String>, HarnessError> {
        let first = v.diagnostics.first().cloned().unwrap_or_else(|| Diagnostic::new(ErrorCategory::OtherRuntime, ""));
        let before = self.artifact.code.clone();
        let failed = |this: &mut Self, reason: String| {
            let ex = line_excerpt(&before, None);
            this.record(Template::LLMFallback, &first, (ex.clone(), ex), false, Some(reason.clone()));
            Err(reason)
        };
        let bundle = match self.env.studio.build_fallback_repair(&self.artifact, &v.diagnostics, self.focal) {
            Ok(b) => b,
            Err(e) => return Ok(failed(self, e.to_string())),
        };
        let completion = match self.model.complete(&bundle, self.env.params) {
            Ok(c) => c,
            Err(e) => return Ok(failed(self, e.to_string())),
        };
        self.completions.push(completion.clone());
        let code = match extract_test_code(&completion) {
            Ok(c) => normalize_test_class(&c, self.focal),
            Err(e) => return Ok(failed(self, e.to_string())),
        };
        let next = self.validate(&code)?;
        let resolved = next.rank() > v.rank();
        self.record(Template::LLMFallback, &first, excerpts(&before, &code), resolved, None);
        self.artifact.set_code(code, self.env.profile);
        self.flipped.clear();
        *v = next;
        Ok(Ok(()))
    }

    fn finish(mut self, target: ArtifactState, v: Validation, cause: Option<String>) -> RepairOutcome {
        let (artifact, record) = transition(self.artifact, target).expect("candidate can reach Success and Discarded");
        self.transitions.push(record);
        RepairOutcome {
            artifact,
            transitions: self.transitions,
            failure: if target == ArtifactState::Discarded { v.stage } else { None },
            cause,
            completions: self.completions,
            validations: self.validations,
            workspace: v.workspace,
        }
    }
}

/// Validates `artifact`, applying templates and at most one fallback, until it passes or is discarded.
/// Only a missing toolchain is returned as an error; every other failure discards the candidate.
pub fn repair_loop(
    artifact: TestArtifact,
    focal: &FocalUnit,
    env: &RepairEnv<'_>,
    model: &mut dyn LanguageModel,
) -> Result<RepairOutcome, HarnessError> {
    assert_eq!(artifact.state, ArtifactState::Candidate, "repair_loop needs a candidate");
    let mut lp =
        Loop { env, focal, model, artifact, transitions: Vec::new(), completions: Vec::new(), validations: 0, flipped: BTreeSet::new() };
    let absorb = |lp: Loop<'_, '_>, e: HarnessError, v: Option<Validation>| -> Result<RepairOutcome, HarnessError> {
        match e {
            HarnessError::ToolchainMissing(_) => Err(e),
            other => {
                let v = v.unwrap_or(Validation { stage: Some(FailureStage::Compile), diagnostics: Vec::new(), workspace: None });
                Ok(lp.finish(ArtifactState::Discarded, v, Some(other.to_string())))
            }
        }
    };
    let code = lp.artifact.code.clone();
    let mut v = match lp.validate(&code) {
        Ok(v) => v,
        Err(e) => return absorb(lp, e, None),
    };
    let budget = env.config.template_budget();
    let mut attempts = 0;
    let mut fallback_used = false;
    loop {
        if v.passed() {
            return Ok(lp.finish(ArtifactState::Success, v, None));
        }
        let reason = if attempts < budget {
            attempts += 1;
            match lp.template_step(&mut v) {
                Ok(None) => continue,
                Ok(Some(reason)) => reason,
                Err(e) => return absorb(lp, e, Some(v)),
            }
        } else {
            "template budget exhausted".to_string()
        };
        if fallback_used {
            return Ok(lp.finish(ArtifactState::Discarded, v, Some(reason)));
        }
        fallback_used = true;
        match lp.fallback(&mut v) {
            Ok(Ok(())) => {}
            Ok(Err(cause)) => return Ok(lp.finish(ArtifactState::Discarded, v, Some(cause))),
            Err(e) => return absorb(lp, e, Some(v)),
        }
    }
}
