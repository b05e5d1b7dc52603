use super::*;
use crate::coverage::{CoverageDocument, ReportFormat};
use crate::gateway::{CompletionParams, GatewayError, Transport};
use crate::harness::{Harness, PhaseOutcome, PhaseStatus};
use crate::model::{BranchCoverage, LineCoverage, Phase, RunConfig};
use crate::profile::FrameworkProfile;
use crate::prompt::{PromptStudio, PromptTemplates, Purpose, Role};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Branch directions are hit when the suite contains the matching test name.
struct CoverageByName {
    code: Mutex<String>,
    dir: tempfile::TempDir,
}

impl CoverageByName {
    fn new() -> Self {
        CoverageByName { code: Mutex::new(String::new()), dir: tempfile::tempdir().unwrap() }
    }
}

fn phase(phase: Phase, success: bool, traces: Vec<String>) -> PhaseOutcome {
    PhaseOutcome { phase, success, status: PhaseStatus::Completed, raw_log: traces.join("\n"), stack_traces: traces, duration: 0.0 }
}

impl Harness for CoverageByName {
    fn prepare_workspace(&self, _: &FocalUnit, artifact: &TestArtifact) -> Result<PathBuf, HarnessError> {
        *self.code.lock().unwrap() = artifact.code.clone();
        Ok(self.dir.path().to_path_buf())
    }
    fn compile(&self, _: &Path, _: &FocalUnit) -> Result<PhaseOutcome, HarnessError> {
        Ok(phase(Phase::Compile, true, Vec::new()))
    }
    fn execute(&self, _: &Path, _: &FocalUnit) -> Result<PhaseOutcome, HarnessError> {
        let code = self.code.lock().unwrap().clone();
        let traces = code
            .lines()
            .enumerate()
            .filter(|(_, l)| l.contains("assertNull("))
            .map(|(i, _)| {
                format!(
                    "java.lang.AssertionError\n\tat org.junit.Assert.fail(Assert.java:88)\n\tat org.junit.Assert.assertNull(Assert.java:1)\n\tat shop.CartGenTest.t(CartGenTest.java:{})",
                    i + 1
                )
            })
            .take(1)
            .collect::<Vec<_>>();
        Ok(phase(Phase::Runtime, traces.is_empty(), traces))
    }
    fn coverage(&self, _: &Path, _: &FocalUnit) -> Result<CoverageDocument, HarnessError> {
        let code = self.code.lock().unwrap().clone();
        let hit = |name: &str| u64::from(code.contains(name));
        let doc = serde_json::json!({
            "file": "src/main/java/shop/Cart.java",
            "lines": [{"line": 2, "hits": 1}, {"line": 3, "hits": hit("posTest")}, {"line": 4, "hits": hit("bigTest")}],
            "branches": [
                {"line": 2, "condition": "if (n > 0)", "true_hits": hit("posTest"), "false_hits": hit("negTest")},
                {"line": 3, "condition": "if (n > 9)", "true_hits": hit("bigTest"), "false_hits": hit("smallTest")}
            ]
        });
        Ok(CoverageDocument { format: ReportFormat::Json, text: doc.to_string() })
    }
}

/// Replies from a script and remembers every prompt.
#[derive(Default)]
struct Recorder {
    replies: Vec<String>,
    prompts: Vec<PromptBundle>,
}

impl LanguageModel for Recorder {
    fn complete(&mut self, bundle: &PromptBundle, _: &CompletionParams) -> Result<Completion, GatewayError> {
        let step = self.prompts.len();
        self.prompts.push(bundle.clone());
        let content = self.replies.get(step).cloned().ok_or(GatewayError::StubExhausted { focal: "f".into(), step })?;
        Ok(Completion { content, prompt_tokens: 100, completion_tokens: 10, transport: Transport::Stub })
    }
}

fn focal() -> FocalUnit {
    FocalUnit {
        id: "shop.Cart#add(int)".into(),
        slug: "shop.Cart-add".into(),
        source_path: "src/main/java/shop/Cart.java".into(),
        package: Some("shop".into()),
        class_name: "Cart".into(),
        method_name: "add".into(),
        signature: "public int add(int n)".into(),
        body_span: (1, 6),
        compressed_context: "public class Cart { public int add(int n) { if (n > 0) { if (n > 9) return 2; } return n; } }".into(),
        symbol_index: BTreeMap::new(),
        framework_profile: "junit4".into(),
    }
}

fn reply(tests: &[&str]) -> String {
    let methods: String =
        tests.iter().map(|t| format!("    @Test\n    public void {t}() {{\n        assertNotNull(new Cart());\n    }}\n")).collect();
    format!("```java\npackage shop;\n\nimport org.junit.Test;\n\npublic class CartTest {{\n{methods}}}\n```")
}

struct Env {
    profile: FrameworkProfile,
    config: RunConfig,
    studio: PromptStudio,
    params: CompletionParams,
}

impl Env {
    fn new() -> Self {
        let profile = FrameworkProfile::junit4();
        let config = RunConfig::default();
        let studio = PromptStudio::new(PromptTemplates::builtin(), profile.clone(), config.clone());
        Env { profile, config, studio, params: CompletionParams { temperature: 0.5, model_id: "m".into() } }
    }

    fn repair<'a>(&'a self, harness: &'a dyn Harness) -> RepairEnv<'a> {
        RepairEnv { harness, profile: &self.profile, studio: &self.studio, config: &self.config, params: &self.params }
    }
}

#[test]
fn second_round_completes_coverage() {
    let env = Env::new();
    let h = CoverageByName::new();
    let mut model =
        Recorder { replies: vec![reply(&["posTest", "negTest"]), reply(&["posTest", "bigTest", "smallTest"])], ..Default::default() };
    let result = run_focal(&focal(), &env.repair(&h), &mut model).unwrap();

    assert_eq!(result.rounds.len(), 2);
    assert_eq!(result.rounds[0].snapshot.as_ref().unwrap().branch_covered, 2);
    assert_eq!(result.final_round, Some(2));
    let final_artifact = result.final_artifact.as_ref().unwrap();
    assert_eq!(final_artifact.state, ArtifactState::Final);
    assert_eq!(final_artifact.id, "shop.Cart-add-r2");
    assert_eq!(final_artifact.parent_id.as_deref(), Some("shop.Cart-add-r1"));
    for name in ["posTest()", "negTest()", "bigTest()", "smallTest()"] {
        assert_eq!(final_artifact.code.matches(name).count(), 1, "{name}");
    }
    assert!(final_artifact.code.contains("public class CartGenTest"));
    assert!(result.coverage().unwrap().branch_rate() >= 0.95);

    // The second prompt replays the first Success suite as the model's own turn.
    let second = &model.prompts[1];
    assert_eq!(second.purpose, Purpose::CoverageFeedback);
    assert!(second.injection_applied && result.rounds[1].injected);
    let assistant = second.messages.iter().find(|m| m.role == Role::Assistant).unwrap();
    assert_eq!(assistant.content, result.rounds[0].candidate.as_ref().unwrap().code);

    let phases: Vec<CostPhase> = result.usage.iter().map(|u| u.phase).collect();
    assert_eq!(phases, vec![CostPhase::Initial, CostPhase::Iteration]);
    let edges: Vec<(ArtifactState, ArtifactState)> = result.transitions.iter().map(|t| (t.from, t.to)).collect();
    use ArtifactState::*;
    assert_eq!(edges, vec![(Candidate, Success), (Success, Candidate), (Candidate, Success), (Success, Final)]);
}

#[test]
fn full_coverage_in_round_one_stops_early() {
    let env = Env::new();
    let h = CoverageByName::new();
    let mut model = Recorder { replies: vec![reply(&["posTest", "negTest", "bigTest", "smallTest"])], ..Default::default() };
    let result = run_focal(&focal(), &env.repair(&h), &mut model).unwrap();
    assert_eq!(result.rounds.len(), 1);
    assert_eq!(result.final_round, Some(1));
    assert_eq!(model.prompts.len(), 1);
}

#[test]
fn no_usable_output_fails_with_baseline() {
    let env = Env::new();
    let h = CoverageByName::new();
    let mut model = Recorder { replies: vec!["I cannot help.".into(); 4], ..Default::default() };
    let result = run_focal(&focal(), &env.repair(&h), &mut model).unwrap();
    assert_eq!(result.rounds.len(), 4);
    assert!(result.rounds.iter().all(|r| r.outcome == RoundOutcome::GenerationFailed && !r.injected));
    assert!(result.final_artifact.is_none());
    let baseline = result.baseline.as_ref().unwrap();
    assert_eq!((baseline.branch_total, baseline.branch_covered, baseline.line_total, baseline.line_covered), (4, 0, 3, 0));
    assert!(model.prompts.iter().all(|p| p.purpose == Purpose::InitialGeneration));
}

#[test]
fn discarded_round_reprompts_from_last_success() {
    let env = Env::new();
    let h = CoverageByName::new();
    // Round 2 keeps failing after every repair; round 3 builds on round 1 again.
    let broken = "```java\npublic class CartTest {\n    @Test\n    public void bigTest() {\n        assertNull(new Cart());\n        assertNull(new Cart());\n        assertNull(new Cart());\n        assertNull(new Cart());\n        assertNull(new Cart());\n        assertNull(new Cart());\n    }\n}\n```";
    let mut model = Recorder {
        replies: vec![reply(&["posTest", "negTest"]), broken.into(), broken.into(), reply(&["bigTest", "smallTest"])],
        ..Default::default()
    };
    let result = run_focal(&focal(), &env.repair(&h), &mut model).unwrap();
    let outcomes: Vec<RoundOutcome> = result.rounds.iter().map(|r| r.outcome).collect();
    assert_eq!(outcomes, vec![RoundOutcome::Succeeded, RoundOutcome::Discarded, RoundOutcome::Succeeded]);
    assert_eq!(result.final_round, Some(3));
    let first = &result.rounds[0].candidate.as_ref().unwrap().code;
    let third_prompt = &model.prompts[3];
    assert_eq!(&third_prompt.messages.iter().find(|m| m.role == Role::Assistant).unwrap().content, first);
    let phases: Vec<CostPhase> = result.usage.iter().map(|u| u.phase).collect();
    assert_eq!(phases, vec![CostPhase::Initial, CostPhase::Iteration, CostPhase::Repair, CostPhase::Iteration]);
    assert!(result.rounds.len() as u32 <= env.config.max_rounds());
}

fn round(n: u32, covered: u64, tests: usize) -> RoundResult {
    let methods: String = (0..tests).map(|i| format!("@Test public void t{i}() {{ }}\n")).collect();
    let profile = FrameworkProfile::junit4();
    let mut artifact = TestArtifact::candidate(format!("r{n}"), format!("class A {{\n{methods}}}"), n, None, &profile);
    artifact.state = ArtifactState::Success;
    let branches = (0..10)
        .map(|i| BranchCoverage {
            branch_id: i.to_string(),
            line: i,
            code_text: String::new(),
            true_covered: (i as u64) < covered,
            false_covered: (i as u64) + 10 < covered,
        })
        .collect();
    let snapshot = CoverageSnapshot::from_entries(branches, vec![LineCoverage { line_no: 1, covered: true }]);
    RoundResult {
        round: n,
        candidate: Some(artifact),
        outcome: RoundOutcome::Succeeded,
        snapshot: Some(snapshot),
        uncovered: None,
        injected: n > 1,
        failure: None,
        cause: None,
    }
}

#[test]
fn selection_rules() {
    let count = |code: &str| FrameworkProfile::junit4().count_tests(code);
    assert_eq!(select_final(&[round(1, 14, 3), round(2, 19, 5)], count), Some(1));
    assert_eq!(select_final(&[round(1, 19, 6), round(2, 19, 4)], count), Some(1));
    assert_eq!(select_final(&[round(1, 19, 4), round(2, 19, 4)], count), Some(0));
    let mut discarded = round(1, 20, 1);
    discarded.outcome = RoundOutcome::Discarded;
    assert_eq!(select_final(&[discarded], count), None);
    assert_eq!(select_final(&[], count), None);
}

#[test]
fn merge_on_reentry() {
    let env = Env::new();
    let h = CoverageByName::new();
    let mut prev = TestArtifact::candidate("shop.Cart-add-r1".into(), extract(&reply(&["test_a"])), 1, None, &env.profile);
    prev.state = ArtifactState::Success;
    let renv = env.repair(&h);
    let (next, record) = next_round_candidate(&prev, &extract(&reply(&["test_a", "test_b"])), 2, &focal(), &renv).unwrap();
    assert_eq!((record.from, record.to), (ArtifactState::Success, ArtifactState::Candidate));
    assert_eq!(next.state, ArtifactState::Candidate);
    assert_eq!(env.profile.count_tests(&next.code), 2);
    assert!(next.code.starts_with(&prev.code[..prev.code.rfind('}').unwrap()]));

    let changed = extract(&reply(&["test_a"])).replace("assertNotNull(new Cart())", "assertNotNull(\"x\")");
    let (next, _) = next_round_candidate(&prev, &changed, 2, &focal(), &renv).unwrap();
    assert!(next.code.contains("test_a_r2()"));
    assert!(next_round_candidate(&prev, "not java {", 2, &focal(), &renv).is_err());
}

fn extract(reply: &str) -> String {
    let c = Completion { content: reply.into(), prompt_tokens: 0, completion_tokens: 0, transport: Transport::Stub };
    normalize_test_class(&extract_test_code(&c).unwrap(), &focal())
}

#[test]
fn project_run_keeps_order_and_isolates_failures() {
    let env = Env::new();
    let h = CoverageByName::new();
    let mut script = BTreeMap::new();
    script.insert("shop.Cart-add".to_string(), vec![reply(&["posTest", "negTest", "bigTest", "smallTest"])]);
    let gateway = Gateway::with_stub(crate::gateway::StubScript(script), None);
    let mut other = focal();
    other.id = "shop.Cart#sub(int)".into();
    other.slug = "shop.Cart-sub".into();
    let focals = vec![other.clone(), focal(), other];
    let mut config = env.config.clone();
    config.workers = 3;
    let renv = RepairEnv { config: &config, ..env.repair(&h) };
    let results = run_project(&focals, &renv, &gateway).unwrap();
    assert_eq!(results.len(), 3);
    assert_eq!(results[1].focal.id, "shop.Cart#add(int)");
    assert!(results[1].final_artifact.is_some());
    assert_eq!(results[1].transcript.len(), 1);
    assert!(results[0].final_artifact.is_none() && results[2].final_artifact.is_none());
    assert!(run_project(&[], &renv, &gateway).unwrap().is_empty());
}
