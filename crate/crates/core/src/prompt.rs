//! Message sequences sent to the model.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::UncoveredReport;
use crate::model::{ArtifactState, Diagnostic, FocalUnit, RunConfig, TestArtifact};
use crate::preprocess::estimate_tokens;
use crate::profile::FrameworkProfile;

/// Lines kept from each diagnostic message in a repair prompt.
pub const DIAGNOSTIC_LINE_CAP: usize = 40;

/// Every placeholder a template may use.
pub const PLACEHOLDERS: &[&str] = &[
    "focal_context",
    "signature",
    "diagnostics",
    "uncovered_branches",
    "test_code",
    "class_name",
    "method_name",
    "line_span",
    "test_class",
    "package",
    "framework",
    "language",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    pub estimated_tokens: usize,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        ChatMessage { role, estimated_tokens: estimate_tokens(&content), content }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Purpose {
    InitialGeneration,
    FallbackRepair,
    CoverageFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub messages: Vec<ChatMessage>,
    pub purpose: Purpose,
    pub injection_applied: bool,
}

impl PromptBundle {
    pub fn estimated_tokens(&self) -> usize {
        self.messages.iter().map(|m| m.estimated_tokens).sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt needs {needed} tokens but the budget is {budget}")]
    TokenBudgetExceeded { needed: usize, budget: usize },
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("template {template} uses unknown placeholder {{{{{placeholder}}}}}")]
    UnknownPlaceholder { template: &'static str, placeholder: String },
    #[error("template {template} lacks required placeholder {{{{{placeholder}}}}}")]
    MissingPlaceholder { template: &'static str, placeholder: &'static str },
}

/// The four prompt templates, validated against the placeholder set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub initial: String,
    pub fallback: String,
    pub feedback: String,
}

const REQUIRED: [(&str, &[&str]); 4] = [
    ("system", &[]),
    ("initial", &["focal_context", "signature"]),
    ("fallback", &["test_code", "diagnostics"]),
    ("feedback", &["uncovered_branches"]),
];

impl PromptTemplates {
    pub fn builtin() -> PromptTemplates {
        PromptTemplates {
            system: include_str!("../templates/system.txt").to_string(),
            initial: include_str!("../templates/initial.txt").to_string(),
            fallback: include_str!("../templates/fallback.txt").to_string(),
            feedback: include_str!("../templates/feedback.txt").to_string(),
        }
        .validated()
        .expect("built-in templates are valid")
    }

    /// Loads `system.txt`, `initial.txt`, `fallback.txt` and `feedback.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<PromptTemplates, TemplateError> {
        let read = |name: &str| {
            let path = dir.join(format!("{name}.txt"));
            std::fs::read_to_string(&path).map_err(|source| TemplateError::Io { path: path.display().to_string(), source })
        };
        PromptTemplates { system: read("system")?, initial: read("initial")?, fallback: read("fallback")?, feedback: read("feedback")? }
            .validated()
    }

    pub fn validated(self) -> Result<PromptTemplates, TemplateError> {
        let re = Regex::new(r"\{\{\s*([^}]*?)\s*\}\}").expect("valid");
        for (name, required) in REQUIRED {
            let text = self.by_name(name);
            for cap in re.captures_iter(text) {
                if !PLACEHOLDERS.contains(&&cap[1]) {
                    return Err(TemplateError::UnknownPlaceholder { template: name, placeholder: cap[1].to_string() });
                }
            }
            for p in required {
                if !text.contains(&format!("{{{{{p}}}}}")) {
                    return Err(TemplateError::MissingPlaceholder { template: name, placeholder: p });
                }
            }
        }
        Ok(self)
    }

    fn by_name(&self, name: &str) -> &str {
        match name {
            "system" => &self.system,
            "initial" => &self.initial,
            "fallback" => &self.fallback,
            _ => &self.feedback,
        }
    }
}

/// Fills `{{name}}` placeholders in one pass so substituted text is never rescanned.
fn render(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        let Some(close) = rest[open..].find("}}") else { break };
        let name = rest[open + 2..open + close].trim();
        out.push_str(&rest[..open]);
        match values.get(name) {
            Some(v) => out.push_str(v),
            None => out.push_str(&rest[open..open + close + 2]),
        }
        rest = &rest[open + close + 2..];
    }
    out.push_str(rest);
    out.trim_end().to_string()
}

/// Builds prompts for one framework profile and run configuration.
#[derive(Debug, Clone)]
pub struct PromptStudio {
    pub templates: PromptTemplates,
    pub profile: FrameworkProfile,
    pub config: RunConfig,
}

impl PromptStudio {
    pub fn new(templates: PromptTemplates, profile: FrameworkProfile, config: RunConfig) -> Self {
        PromptStudio { templates, profile, config }
    }

    fn values(&self, focal: &FocalUnit) -> BTreeMap<&'static str, String> {
        let mut v = BTreeMap::new();
        v.insert("focal_context", focal.compressed_context.trim_end().to_string());
        v.insert("signature", focal.signature.clone());
        v.insert("class_name", focal.class_name.clone());
        v.insert("method_name", focal.method_name.clone());
        v.insert("line_span", format!("{}-{}", focal.body_span.0, focal.body_span.1));
        v.insert("test_class", focal.test_class_name());
        v.insert("package", focal.package.clone().unwrap_or_else(|| "(default)".into()));
        v.insert("framework", self.profile.spec.framework.clone());
        v.insert("language", self.profile.spec.language.clone());
        v
    }

    fn system_message(&self, focal: &FocalUnit) -> ChatMessage {
        ChatMessage::new(Role::System, render(&self.templates.system, &self.values(focal)))
    }

    fn initial_user(&self, focal: &FocalUnit) -> ChatMessage {
        ChatMessage::new(Role::User, render(&self.templates.initial, &self.values(focal)))
    }

    fn check_budget(&self, bundle: PromptBundle) -> Result<PromptBundle, PromptError> {
        let needed = bundle.estimated_tokens();
        let budget = self.config.token_budget.max(0) as usize;
        if needed > budget {
            return Err(PromptError::TokenBudgetExceeded { needed, budget });
        }
        Ok(bundle)
    }

    pub fn build_initial(&self, focal: &FocalUnit) -> Result<PromptBundle, PromptError> {
        if focal.compressed_context.trim().is_empty() {
            return Err(PromptError::Precondition("focal context is empty"));
        }
        self.check_budget(PromptBundle {
            messages: vec![self.system_message(focal), self.initial_user(focal)],
            purpose: Purpose::InitialGeneration,
            injection_applied: false,
        })
    }

    pub fn build_fallback_repair(
        &self,
        artifact: &TestArtifact,
        diagnostics: &[Diagnostic],
        focal: &FocalUnit,
    ) -> Result<PromptBundle, PromptError> {
        if diagnostics.is_empty() {
            return Err(PromptError::Precondition("no diagnostics to repair"));
        }
        if artifact.state != ArtifactState::Candidate {
            return Err(PromptError::Precondition("only candidates are repaired"));
        }
        let mut values = self.values(focal);
        values.insert("test_code", artifact.code.trim_end().to_string());
        values.insert("diagnostics", render_diagnostics(diagnostics));
        self.check_budget(PromptBundle {
            messages: vec![self.system_message(focal), ChatMessage::new(Role::User, render(&self.templates.fallback, &values))],
            purpose: Purpose::FallbackRepair,
            injection_applied: false,
        })
    }

    /// Replays the initial exchange with the repaired suite standing in for the model's answer.
    pub fn build_feedback_with_injection(
        &self,
        success: &TestArtifact,
        uncovered: &UncoveredReport,
        focal: &FocalUnit,
    ) -> Result<PromptBundle, PromptError> {
        if success.state != ArtifactState::Success {
            return Err(PromptError::Precondition("injection needs a Success artifact"));
        }
        if uncovered.entries.is_empty() {
            return Err(PromptError::Precondition("nothing left to cover"));
        }
        let mut values = self.values(focal);
        values.insert("uncovered_branches", render_uncovered(uncovered));
        values.insert("class_name", uncovered.class_name.clone());
        values.insert("method_name", uncovered.method_name.clone());
        self.check_budget(PromptBundle {
            messages: vec![
                self.system_message(focal),
                self.initial_user(focal),
                ChatMessage::new(Role::Assistant, success.code.clone()),
                ChatMessage::new(Role::User, render(&self.templates.feedback, &values)),
            ],
            purpose: Purpose::CoverageFeedback,
            injection_applied: true,
        })
    }
}

fn truncate_lines(text: &str, cap: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() <= cap {
        return text.trim_end().to_string();
    }
    let mut kept = lines[..cap].join("\n");
    kept.push_str(&format!("\n... ({} more lines)", lines.len() - cap));
    kept
}

fn render_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let at = match &d.location {
                Some(l) => format!("{}:{}", l.file, l.line),
                None => "unknown location".to_string(),
            };
            format!("{}. {:?} error ({}) at {}:\n{}", i + 1, d.phase, d.category, at, truncate_lines(&d.message, DIAGNOSTIC_LINE_CAP))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn render_uncovered(report: &UncoveredReport) -> String {
    report
        .entries
        .iter()
        .map(|e| format!("- line {}: `{}` ({})", e.line, e.branch_code, e.missing_side.marker()))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{MissingSide, UncoveredEntry};
    use crate::model::{ErrorCategory, Location};

    fn focal() -> FocalUnit {
        FocalUnit {
            id: "shop.Cart#add(int)".into(),
            slug: "Cart-add".into(),
            source_path: "src/main/java/shop/Cart.java".into(),
            package: Some("shop".into()),
            class_name: "Cart".into(),
            method_name: "add".into(),
            signature: "public int add(int n)".into(),
            body_span: (4, 9),
            compressed_context: "public class Cart {\n    public int add(int n) { return n; }\n}".into(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        }
    }

    fn studio(budget: i64) -> PromptStudio {
        let config = RunConfig { token_budget: budget, ..RunConfig::default() };
        PromptStudio::new(PromptTemplates::builtin(), FrameworkProfile::junit4(), config)
    }

    fn artifact(state: ArtifactState, code: &str) -> TestArtifact {
        TestArtifact {
            id: "Cart-add-r1".into(),
            code: code.into(),
            state,
            round: 1,
            parent_id: None,
            repair_trace: Vec::new(),
            assertion_count: 0,
        }
    }

    #[test]
    fn initial_bundle_shape() {
        let b = studio(16_385).build_initial(&focal()).unwrap();
        assert_eq!(b.messages.iter().map(|m| m.role).collect::<Vec<_>>(), vec![Role::System, Role::User]);
        assert!(b.messages[1].content.contains("public int add(int n)"));
        assert!(b.messages[1].content.contains("CartGenTest"));
        assert!(b.messages[0].content.contains("JUnit 4"));
        assert!(!b.injection_applied);
        assert_eq!(b, studio(16_385).build_initial(&focal()).unwrap());
    }

    #[test]
    fn initial_over_budget() {
        let mut f = focal();
        f.compressed_context = "x".repeat(1000);
        assert!(matches!(studio(100).build_initial(&f), Err(PromptError::TokenBudgetExceeded { .. })));
    }

    #[test]
    fn fallback_embeds_and_truncates() {
        let d = Diagnostic {
            location: Some(Location { file: "CartGenTest.java".into(), line: 7 }),
            ..Diagnostic::new(ErrorCategory::SyntaxError, "CartGenTest.java:7: error: ';' expected")
        };
        let a = artifact(ArtifactState::Candidate, "class CartGenTest {}");
        let b = studio(16_385).build_fallback_repair(&a, &[d], &focal()).unwrap();
        assert!(b.messages[1].content.contains("CartGenTest.java:7: error: ';' expected"));
        assert!(b.messages[1].content.contains("class CartGenTest {}"));

        let long: String = (0..100).map(|i| format!("line {i}\n")).collect();
        let many: Vec<_> = (0..12).map(|_| Diagnostic::new(ErrorCategory::OtherCompile, long.clone())).collect();
        let b = studio(1_000_000).build_fallback_repair(&a, &many, &focal()).unwrap();
        let text = &b.messages[1].content;
        assert_eq!(text.matches("line 39\n").count(), 12);
        assert_eq!(text.matches("line 40\n").count(), 0);
        assert_eq!(studio(16_385).build_fallback_repair(&a, &[], &focal()), Err(PromptError::Precondition("no diagnostics to repair")));
    }

    #[test]
    fn feedback_injects_repaired_suite() {
        let s = artifact(ArtifactState::Success, "class CartGenTest { /* repaired */ }");
        let report = UncoveredReport {
            class_name: "Cart".into(),
            method_name: "add".into(),
            entries: vec![UncoveredEntry { branch_code: "n > 0".into(), line: 5, missing_side: MissingSide::TrueSide }],
        };
        let b = studio(16_385).build_feedback_with_injection(&s, &report, &focal()).unwrap();
        assert_eq!(b.messages.len(), 4);
        assert_eq!(b.messages[2].role, Role::Assistant);
        assert_eq!(b.messages[2].content, s.code);
        assert!(b.messages[3].content.contains("`n > 0` (true branch not covered)"));
        assert!(b.injection_applied);
        let empty = UncoveredReport { entries: Vec::new(), ..report };
        assert!(studio(16_385).build_feedback_with_injection(&s, &empty, &focal()).is_err());
    }

    #[test]
    fn template_validation() {
        let mut t = PromptTemplates::builtin();
        t.feedback = "{{uncovered_branches}} {{nonsense}}".into();
        assert!(matches!(t.validated(), Err(TemplateError::UnknownPlaceholder { .. })));
        let mut t = PromptTemplates::builtin();
        t.initial = "no context".into();
        assert!(matches!(t.validated(), Err(TemplateError::MissingPlaceholder { .. })));
    }

    #[test]
    fn rendering_is_single_pass() {
        let mut v = BTreeMap::new();
        v.insert("test_code", "{{diagnostics}}".to_string());
        v.insert("diagnostics", "D".to_string());
        assert_eq!(render("{{test_code}}|{{diagnostics}}", &v), "{{diagnostics}}|D");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn injected_turn_is_repaired_code(raw in "[a-zA-Z0-9 ;{}()]{1,80}", repaired in "[a-zA-Z0-9 ;{}()]{1,80}") {
                prop_assume!(raw != repaired && !repaired.contains(&raw));
                let s = artifact(ArtifactState::Success, &repaired);
                let report = UncoveredReport {
                    class_name: "Cart".into(),
                    method_name: "add".into(),
                    entries: vec![UncoveredEntry { branch_code: "n > 0".into(), line: 5, missing_side: MissingSide::BothSides }],
                };
                let st = studio(1_000_000);
                let b = st.build_feedback_with_injection(&s, &report, &focal()).unwrap();
                prop_assert_eq!(&b.messages[2].content, &repaired);
                let initial_texts: String = st.build_initial(&focal()).unwrap().messages.iter().map(|m| m.content.clone()).collect();
                let fresh = b.messages.iter().filter(|m| m.role != Role::Assistant).any(|m| m.content.contains(&raw));
                prop_assert!(!fresh || initial_texts.contains(&raw) || b.messages[3].content.contains(&raw));
            }
        }
    }
}
