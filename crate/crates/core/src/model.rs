//! Shared domain types and the test-artifact lifecycle.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One method under test together with the context sent to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocalUnit {
    /// Stable identifier: `{package.Class}#{method}({param types})`.
    pub id: String,
    /// File-system friendly form of `id`, unique within one project.
    pub slug: String,
    /// Path of the declaring file relative to the project root, `/`-separated.
    pub source_path: String,
    pub package: Option<String>,
    pub class_name: String,
    pub method_name: String,
    /// Declaration header as written, whitespace-normalised, without the body.
    pub signature: String,
    /// 1-based inclusive line range from the header to the closing brace.
    pub body_span: (u32, u32),
    pub compressed_context: String,
    /// Simple type name to fully qualified names, each list sorted by preference.
    pub symbol_index: BTreeMap<String, Vec<String>>,
    /// Name of the framework profile the focal is tested with.
    pub framework_profile: String,
}

impl FocalUnit {
    pub fn qualified_class(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.class_name),
            None => self.class_name.clone(),
        }
    }

    /// Simple name of the generated test class for this focal's class.
    pub fn test_class_name(&self) -> String {
        format!("{}GenTest", self.class_name)
    }

    pub fn qualified_test_class(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.test_class_name()),
            None => self.test_class_name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArtifactState {
    Candidate,
    Success,
    Final,
    Discarded,
}

impl ArtifactState {
    pub const ALL: [ArtifactState; 4] = [ArtifactState::Candidate, ArtifactState::Success, ArtifactState::Final, ArtifactState::Discarded];

    /// The lifecycle edges; anything else is a logic error in the caller.
    pub fn can_reach(self, target: ArtifactState) -> bool {
        use ArtifactState::*;
        matches!((self, target), (Candidate, Success) | (Candidate, Discarded) | (Success, Candidate) | (Success, Final))
    }
}

impl fmt::Display for ArtifactState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A generated test suite and its history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestArtifact {
    pub id: String,
    pub code: String,
    pub state: ArtifactState,
    pub round: u32,
    pub parent_id: Option<String>,
    pub repair_trace: Vec<RepairStep>,
    pub assertion_count: usize,
}

impl TestArtifact {
    pub fn candidate(id: String, code: String, round: u32, parent_id: Option<String>, profile: &FrameworkProfile) -> Self {
        let assertion_count = profile.count_assertions(&code);
        TestArtifact { id, code, state: ArtifactState::Candidate, round, parent_id, repair_trace: Vec::new(), assertion_count }
    }

    /// Replaces the code, keeping `assertion_count` in step with it.
    pub fn set_code(&mut self, code: String, profile: &FrameworkProfile) {
        self.assertion_count = profile.count_assertions(&code);
        self.code = code;
    }

    pub fn fallback_steps(&self) -> usize {
        self.repair_trace.iter().filter(|s| s.template == Template::LLMFallback).count()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("illegal transition {from} -> {to} for artifact {id}")]
pub struct IllegalTransition {
    pub id: String,
    pub from: ArtifactState,
    pub to: ArtifactState,
}

/// A recorded lifecycle edge, kept in the session ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub artifact_id: String,
    pub from: ArtifactState,
    pub to: ArtifactState,
}

/// Moves `artifact` along one lifecycle edge, returning the successor and the edge taken.
pub fn transition(mut artifact: TestArtifact, target: ArtifactState) -> Result<(TestArtifact, TransitionRecord), IllegalTransition> {
    if !artifact.state.can_reach(target) {
        return Err(IllegalTransition { id: artifact.id, from: artifact.state, to: target });
    }
    let record = TransitionRecord { artifact_id: artifact.id.clone(), from: artifact.state, to: target };
    artifact.state = target;
    Ok((artifact, record))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Compile,
    Runtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    MissingSymbol,
    MethodCallError,
    AccessDenied,
    AbstractNotImplemented,
    AbstractInstantiation,
    SyntaxError,
    OtherCompile,
    AssertNullFail,
    AssertNotNullFail,
    AssertTrueFail,
    AssertFalseFail,
    AssertEqualsMismatch,
    UncaughtException,
    MismatchedCatch,
    TestFail,
    OtherRuntime,
}

impl ErrorCategory {
    pub const COMPILE: [ErrorCategory; 7] = [
        ErrorCategory::MissingSymbol,
        ErrorCategory::MethodCallError,
        ErrorCategory::AccessDenied,
        ErrorCategory::AbstractNotImplemented,
        ErrorCategory::AbstractInstantiation,
        ErrorCategory::SyntaxError,
        ErrorCategory::OtherCompile,
    ];

    pub const RUNTIME: [ErrorCategory; 9] = [
        ErrorCategory::AssertNullFail,
        ErrorCategory::AssertNotNullFail,
        ErrorCategory::AssertTrueFail,
        ErrorCategory::AssertFalseFail,
        ErrorCategory::AssertEqualsMismatch,
        ErrorCategory::UncaughtException,
        ErrorCategory::MismatchedCatch,
        ErrorCategory::TestFail,
        ErrorCategory::OtherRuntime,
    ];

    pub fn phase(self) -> Phase {
        if ErrorCategory::COMPILE.contains(&self) {
            Phase::Compile
        } else {
            Phase::Runtime
        }
    }

    pub fn is_boolean_assertion(self) -> bool {
        matches!(
            self,
            ErrorCategory::AssertNullFail
                | ErrorCategory::AssertNotNullFail
                | ErrorCategory::AssertTrueFail
                | ErrorCategory::AssertFalseFail
        )
    }

    /// Extraction keys every diagnostic of this category must carry.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            ErrorCategory::MissingSymbol => &[keys::MISSING_SYMBOL],
            ErrorCategory::AssertEqualsMismatch => &[keys::EXPECTED_VALUE, keys::ACTUAL_VALUE],
            ErrorCategory::UncaughtException | ErrorCategory::MismatchedCatch => &[keys::EXCEPTION_TYPE],
            _ => &[],
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Names of the captures stored in [`Diagnostic::extracted`].
pub mod keys {
    pub const MISSING_SYMBOL: &str = "missing_symbol";
    pub const EXPECTED_VALUE: &str = "expected_value";
    pub const ACTUAL_VALUE: &str = "actual_value";
    pub const EXCEPTION_TYPE: &str = "exception_type";
    pub const ASSERTION_KIND: &str = "assertion_kind";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub phase: Phase,
    pub category: ErrorCategory,
    /// The error block from the compile log, or the full stack trace.
    pub message: String,
    pub location: Option<Location>,
    pub extracted: BTreeMap<String, String>,
}

impl Diagnostic {
    pub fn new(category: ErrorCategory, message: impl Into<String>) -> Self {
        Diagnostic { phase: category.phase(), category, message: message.into(), location: None, extracted: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.extracted.insert(key.to_string(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extracted.get(key).map(String::as_str)
    }

    /// Phase matches the category and every required capture is present.
    pub fn is_coherent(&self) -> bool {
        self.phase == self.category.phase() && self.category.required_keys().iter().all(|k| self.extracted.contains_key(*k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Template {
    T1,
    T2,
    T3,
    T4,
    T5,
    LLMFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairStep {
    pub template: Template,
    pub diagnostic: Diagnostic,
    pub before_excerpt: String,
    pub after_excerpt: String,
    pub resolved: bool,
    /// Why the step could not be applied, when it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCoverage {
    pub branch_id: String,
    pub line: u32,
    pub code_text: String,
    pub true_covered: bool,
    pub false_covered: bool,
}

impl BranchCoverage {
    pub fn covered_directions(&self) -> u64 {
        self.true_covered as u64 + self.false_covered as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCoverage {
    pub line_no: u32,
    pub covered: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSnapshot {
    pub branches: Vec<BranchCoverage>,
    pub lines: Vec<LineCoverage>,
    pub branch_total: u64,
    pub branch_covered: u64,
    pub line_total: u64,
    pub line_covered: u64,
}

impl CoverageSnapshot {
    /// Builds a snapshot whose totals are derived from the entries.
    pub fn from_entries(branches: Vec<BranchCoverage>, lines: Vec<LineCoverage>) -> Self {
        let branch_total = 2 * branches.len() as u64;
        let branch_covered = branches.iter().map(BranchCoverage::covered_directions).sum();
        let line_total = lines.len() as u64;
        let line_covered = lines.iter().filter(|l| l.covered).count() as u64;
        CoverageSnapshot { branches, lines, branch_total, branch_covered, line_total, line_covered }
    }

    /// Covered fraction of branch directions; a focal without branches counts as fully covered.
    pub fn branch_rate(&self) -> f64 {
        if self.branch_total == 0 {
            1.0
        } else {
            self.branch_covered as f64 / self.branch_total as f64
        }
    }

    pub fn line_rate(&self) -> f64 {
        if self.line_total == 0 {
            1.0
        } else {
            self.line_covered as f64 / self.line_total as f64
        }
    }

    /// The same universe of branches and lines with nothing covered.
    pub fn zeroed(&self) -> Self {
        let branches = self.branches.iter().map(|b| BranchCoverage { true_covered: false, false_covered: false, ..b.clone() }).collect();
        let lines = self.lines.iter().map(|l| LineCoverage { covered: false, ..l.clone() }).collect();
        CoverageSnapshot::from_entries(branches, lines)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub max_iterations: i64,
    pub coverage_standard: f64,
    pub max_template_attempts: i64,
    pub temperature: f64,
    pub token_budget: i64,
    /// Currency per million prompt tokens.
    pub prompt_price: f64,
    /// Currency per million completion tokens.
    pub completion_price: f64,
    pub workers: i64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_iterations: 4,
            coverage_standard: 0.95,
            max_template_attempts: 5,
            temperature: 0.5,
            token_budget: 16_385,
            prompt_price: 0.5,
            completion_price: 1.5,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn max_rounds(&self) -> u32 {
        self.max_iterations.clamp(1, u32::MAX as i64) as u32
    }

    pub fn template_budget(&self) -> usize {
        self.max_template_attempts.max(1) as usize
    }

    pub fn worker_count(&self) -> usize {
        self.workers.max(1) as usize
    }
}

/// Returns every violated constraint; an empty list means the config is usable.
pub fn validate_config(config: &RunConfig) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    if !(config.coverage_standard > 0.0 && config.coverage_standard <= 1.0) {
        errors.push("coverage_standard must be in (0,1]".to_string());
    }
    if config.max_iterations < 1 {
        errors.push("max_iterations must be >= 1".to_string());
    }
    if config.max_template_attempts < 1 {
        errors.push("max_template_attempts must be >= 1".to_string());
    }
    if !(config.temperature >= 0.0 && config.temperature <= 1.0) {
        errors.push("temperature must be in [0,1]".to_string());
    }
    if config.token_budget < 1 {
        errors.push("token_budget must be >= 1".to_string());
    }
    if !(config.prompt_price >= 0.0 && config.prompt_price.is_finite()) {
        errors.push("prompt_price must be a non-negative number".to_string());
    }
    if !(config.completion_price >= 0.0 && config.completion_price.is_finite()) {
        errors.push("completion_price must be a non-negative number".to_string());
    }
    if config.workers < 1 {
        errors.push("workers must be >= 1".to_string());
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

pub use crate::profile::FrameworkProfile;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn artifact(state: ArtifactState) -> TestArtifact {
        TestArtifact {
            id: "a-r1".into(),
            code: "class T {}".into(),
            state,
            round: 1,
            parent_id: None,
            repair_trace: Vec::new(),
            assertion_count: 0,
        }
    }

    #[test]
    fn lifecycle_edges() {
        let (a, rec) = transition(artifact(ArtifactState::Candidate), ArtifactState::Success).unwrap();
        assert_eq!(a.state, ArtifactState::Success);
        assert_eq!(rec.from, ArtifactState::Candidate);
        let err = transition(artifact(ArtifactState::Candidate), ArtifactState::Candidate).unwrap_err();
        assert_eq!(err.to, ArtifactState::Candidate);
        let (a, _) = transition(artifact(ArtifactState::Success), ArtifactState::Final).unwrap();
        assert_eq!(a.state, ArtifactState::Final);
        assert!(transition(artifact(ArtifactState::Final), ArtifactState::Candidate).is_err());
        assert!(transition(artifact(ArtifactState::Discarded), ArtifactState::Success).is_err());
    }

    #[test]
    fn transition_preserves_other_fields() {
        let before = artifact(ArtifactState::Candidate);
        let (after, _) = transition(before.clone(), ArtifactState::Discarded).unwrap();
        assert_eq!(TestArtifact { state: ArtifactState::Candidate, ..after }, before);
    }

    #[test]
    fn config_validation() {
        assert_eq!(validate_config(&RunConfig::default()), Ok(()));
        let bad = RunConfig { coverage_standard: 0.0, ..RunConfig::default() };
        assert_eq!(validate_config(&bad), Err(vec!["coverage_standard must be in (0,1]".to_string()]));
        let bad = RunConfig { max_iterations: -1, ..RunConfig::default() };
        assert_eq!(validate_config(&bad).unwrap_err().len(), 1);
        let bad = RunConfig { max_iterations: 0, max_template_attempts: 0, coverage_standard: 1.5, ..RunConfig::default() };
        assert_eq!(validate_config(&bad).unwrap_err().len(), 3);
    }

    #[test]
    fn snapshot_totals_and_vacuous_rate() {
        let s = CoverageSnapshot::from_entries(Vec::new(), Vec::new());
        assert_eq!(s.branch_rate(), 1.0);
        let b = BranchCoverage { branch_id: "3:0".into(), line: 3, code_text: "x > 0".into(), true_covered: true, false_covered: false };
        let s = CoverageSnapshot::from_entries(vec![b], Vec::new());
        assert_eq!((s.branch_covered, s.branch_total), (1, 2));
        assert_eq!(s.zeroed().branch_covered, 0);
    }

    proptest! {
        #[test]
        fn random_walks_stay_on_graph(targets in proptest::collection::vec(0usize..4, 0..40)) {
            let mut current = artifact(ArtifactState::Candidate);
            for t in targets {
                let target = ArtifactState::ALL[t];
                let from = current.state;
                match transition(current.clone(), target) {
                    Ok((next, rec)) => {
                        prop_assert!(from.can_reach(next.state));
                        prop_assert_eq!(rec.to, next.state);
                        current = next;
                    }
                    Err(e) => {
                        prop_assert!(!from.can_reach(target));
                        prop_assert_eq!(e.from, from);
                    }
                }
            }
        }
    }
}
