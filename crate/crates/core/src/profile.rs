//! Framework profiles: assertion vocabulary, failure markers, import syntax
//! and the pattern tables the diagnostics module runs on.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ErrorCategory;
use crate::syntax::{self, TokKind};

const JUNIT4: &str = include_str!("../profiles/junit4.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionVocabulary {
    pub null_assert: String,
    pub not_null_assert: String,
    pub true_assert: String,
    pub false_assert: String,
    pub equals_assert: String,
}

impl AssertionVocabulary {
    pub fn names(&self) -> [&str; 5] {
        [&self.null_assert, &self.not_null_assert, &self.true_assert, &self.false_assert, &self.equals_assert]
    }

    /// The paired opposite used by the boolean-assertion flip.
    pub fn opposite(&self, name: &str) -> Option<&str> {
        if name == self.null_assert {
            Some(&self.not_null_assert)
        } else if name == self.not_null_assert {
            Some(&self.null_assert)
        } else if name == self.true_assert {
            Some(&self.false_assert)
        } else if name == self.false_assert {
            Some(&self.true_assert)
        } else {
            None
        }
    }

    /// Category of a failing call to `name`, when it is in the vocabulary.
    pub fn failure_category(&self, name: &str) -> Option<ErrorCategory> {
        if name == self.null_assert {
            Some(ErrorCategory::AssertNullFail)
        } else if name == self.not_null_assert {
            Some(ErrorCategory::AssertNotNullFail)
        } else if name == self.true_assert {
            Some(ErrorCategory::AssertTrueFail)
        } else if name == self.false_assert {
            Some(ErrorCategory::AssertFalseFail)
        } else if name == self.equals_assert {
            Some(ErrorCategory::AssertEqualsMismatch)
        } else {
            None
        }
    }

    /// Assertion name whose failure produces `category`.
    pub fn name_for(&self, category: ErrorCategory) -> Option<&str> {
        match category {
            ErrorCategory::AssertNullFail => Some(&self.null_assert),
            ErrorCategory::AssertNotNullFail => Some(&self.not_null_assert),
            ErrorCategory::AssertTrueFail => Some(&self.true_assert),
            ErrorCategory::AssertFalseFail => Some(&self.false_assert),
            ErrorCategory::AssertEqualsMismatch => Some(&self.equals_assert),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternTable {
    pub compile_error: String,
    pub compile_error_marker: String,
    pub trace_header: String,
    pub report_footer: String,
    pub frame: String,
    pub exception: String,
    pub equals: Vec<String>,
    pub comparison_failure: String,
    pub elision: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileRule {
    pub category: ErrorCategory,
    pub message: String,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTables {
    #[serde(default)]
    pub standard: Vec<String>,
    #[serde(default)]
    pub third_party: Vec<String>,
}

/// The profile as written in its data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    pub framework: String,
    pub language: String,
    pub test_annotation: String,
    pub import_syntax: String,
    pub static_import_syntax: String,
    pub assert_class: String,
    pub fail_name: String,
    pub failure_markers: Vec<String>,
    #[serde(default)]
    pub test_imports: Vec<String>,
    pub assertion_vocabulary: AssertionVocabulary,
    pub patterns: PatternTable,
    pub compile_categories: Vec<CompileRule>,
    #[serde(default)]
    pub symbols: SymbolTables,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed profile: {0}")]
    Malformed(String),
    #[error("profile pattern `{pattern}` is invalid: {source}")]
    BadPattern { pattern: String, source: Box<regex::Error> },
    #[error("unknown built-in profile `{0}`")]
    Unknown(String),
}

#[derive(Debug)]
pub(crate) struct CompiledRule {
    pub category: ErrorCategory,
    pub message: Regex,
    pub note: Option<Regex>,
}

#[derive(Debug)]
pub(crate) struct Compiled {
    pub compile_error: Regex,
    pub compile_error_marker: Regex,
    pub trace_header: Regex,
    pub report_footer: Regex,
    pub frame: Regex,
    pub exception: Regex,
    pub equals: Vec<Regex>,
    pub rules: Vec<CompiledRule>,
}

/// A validated profile with its patterns compiled.
#[derive(Debug, Clone)]
pub struct FrameworkProfile {
    pub spec: ProfileSpec,
    pub(crate) compiled: Arc<Compiled>,
}

impl PartialEq for FrameworkProfile {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

fn compile_pattern(p: &str, multiline: bool) -> Result<Regex, ProfileError> {
    let full = if multiline { format!("(?m){p}") } else { format!("(?s){p}") };
    Regex::new(&full).map_err(|e| ProfileError::BadPattern { pattern: p.to_string(), source: Box::new(e) })
}

impl FrameworkProfile {
    pub fn junit4() -> FrameworkProfile {
        FrameworkProfile::from_toml(JUNIT4).expect("built-in junit4 profile is valid")
    }

    pub fn builtin(name: &str) -> Result<FrameworkProfile, ProfileError> {
        match name {
            "junit4" => Ok(FrameworkProfile::junit4()),
            other => Err(ProfileError::Unknown(other.to_string())),
        }
    }

    pub fn load(path: &Path) -> Result<FrameworkProfile, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io { path: path.display().to_string(), source })?;
        FrameworkProfile::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<FrameworkProfile, ProfileError> {
        let spec: ProfileSpec = toml::from_str(text).map_err(|e| ProfileError::Malformed(e.to_string()))?;
        FrameworkProfile::from_spec(spec)
    }

    pub fn from_spec(spec: ProfileSpec) -> Result<FrameworkProfile, ProfileError> {
        let names = spec.assertion_vocabulary.names();
        let distinct: BTreeSet<&str> = names.iter().copied().collect();
        if names.iter().any(|n| n.is_empty()) || distinct.len() != names.len() {
            return Err(ProfileError::Malformed("assertion names must be distinct and non-empty".into()));
        }
        if !spec.import_syntax.contains("{{qualified}}") || !spec.static_import_syntax.contains("{{qualified}}") {
            return Err(ProfileError::Malformed("import syntax must contain {{qualified}}".into()));
        }
        if spec.failure_markers.is_empty() {
            return Err(ProfileError::Malformed("at least one failure marker is required".into()));
        }
        for rule in &spec.compile_categories {
            if rule.category.phase() != crate::model::Phase::Compile {
                return Err(ProfileError::Malformed(format!("{} is not a compile category", rule.category)));
            }
        }
        let p = &spec.patterns;
        let compiled = Compiled {
            compile_error: compile_pattern(&p.compile_error, true)?,
            compile_error_marker: compile_pattern(&p.compile_error_marker, true)?,
            trace_header: compile_pattern(&p.trace_header, true)?,
            report_footer: compile_pattern(&p.report_footer, true)?,
            frame: compile_pattern(&p.frame, true)?,
            exception: compile_pattern(&p.exception, false)?,
            equals: p.equals.iter().map(|e| compile_pattern(e, false)).collect::<Result<_, _>>()?,
            rules: spec
                .compile_categories
                .iter()
                .map(|r| {
                    Ok(CompiledRule {
                        category: r.category,
                        message: compile_pattern(&r.message, true)?,
                        note: r.note.as_deref().map(|n| compile_pattern(n, true)).transpose()?,
                    })
                })
                .collect::<Result<_, ProfileError>>()?,
        };
        Ok(FrameworkProfile { spec, compiled: Arc::new(compiled) })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn vocabulary(&self) -> &AssertionVocabulary {
        &self.spec.assertion_vocabulary
    }

    pub fn render_import(&self, qualified: &str) -> String {
        self.spec.import_syntax.replace("{{qualified}}", qualified)
    }

    pub fn render_static_import(&self, qualified: &str) -> String {
        self.spec.static_import_syntax.replace("{{qualified}}", qualified)
    }

    /// True when the text of a compile log carries an error marker line.
    pub fn has_compile_error_marker(&self, log: &str) -> bool {
        self.compiled.compile_error_marker.is_match(log)
    }

    pub fn has_failure_marker(&self, trace: &str) -> bool {
        let first = trace.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        self.spec.failure_markers.iter().any(|m| first.starts_with(m.as_str()))
    }

    /// Number of call sites of the five vocabulary assertions in `code`.
    pub fn count_assertions(&self, code: &str) -> usize {
        let names = self.vocabulary().names();
        let Ok(toks) = syntax::code_tokens(code) else {
            return 0;
        };
        toks.windows(2)
            .enumerate()
            .filter(|(i, w)| {
                w[0].kind == TokKind::Ident
                    && names.contains(&w[0].text(code))
                    && w[1].text(code) == "("
                    && (*i == 0 || !matches!(toks[i - 1].text(code), "void"))
            })
            .count()
    }

    /// Number of methods carrying the test annotation in `code`.
    pub fn count_tests(&self, code: &str) -> usize {
        let Ok(outline) = syntax::parse_outline(code) else {
            return 0;
        };
        let mut types = Vec::new();
        syntax::walk_types(&outline.types, &mut types);
        types.iter().flat_map(|t| t.members.iter()).filter(|m| m.method().is_some() && m.has_annotation(&self.spec.test_annotation)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profile_loads() {
        let p = FrameworkProfile::junit4();
        assert_eq!(p.vocabulary().opposite("assertNull"), Some("assertNotNull"));
        assert_eq!(p.vocabulary().opposite("assertFalse"), Some("assertTrue"));
        assert_eq!(p.vocabulary().opposite("assertEquals"), None);
        assert_eq!(p.render_import("java.util.HashMap"), "import java.util.HashMap;");
        assert!(p.has_failure_marker("java.lang.AssertionError\n\tat x"));
        assert!(!p.has_failure_marker("java.lang.NullPointerException"));
    }

    #[test]
    fn duplicate_assertion_names_rejected() {
        let mut spec = FrameworkProfile::junit4().spec;
        spec.assertion_vocabulary.true_assert = "assertNull".into();
        assert!(FrameworkProfile::from_spec(spec).is_err());
    }

    #[test]
    fn counts_call_sites_not_mentions() {
        let p = FrameworkProfile::junit4();
        let code = r#"class T {
            @Test public void a() { assertEquals(1, f()); Assert.assertTrue(x); String s = "assertNull(y)"; }
            // assertFalse(z)
            @Test public void b() { assertNotNull(o); fail("no"); }
        }"#;
        assert_eq!(p.count_assertions(code), 3);
        assert_eq!(p.count_tests(code), 2);
    }
}
