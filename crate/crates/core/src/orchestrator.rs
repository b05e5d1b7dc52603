//! The per-focal generate, repair, measure and feed back loop, and the whole-project driver.

use std::fs;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{ingest_report, meets_standard, uncovered_branches, UncoveredReport};
use crate::gateway::{extract_test_code, Completion, Gateway, TranscriptEntry};
use crate::harness::HarnessError;
use crate::model::{transition, ArtifactState, CoverageSnapshot, FocalUnit, TestArtifact, TransitionRecord};
use crate::prompt::PromptBundle;
use crate::repair::{repair_loop, FailureStage, LanguageModel, RepairEnv};
use crate::suite::{merge_suites, normalize_test_class};
use crate::syntax;

/// Which part of the loop a model call belongs to, for the cost split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostPhase {
    Initial,
    Repair,
    Iteration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub round: u32,
    pub phase: CostPhase,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl UsageRecord {
    fn of(round: u32, phase: CostPhase, c: &Completion) -> Self {
        UsageRecord { round, phase, prompt_tokens: c.prompt_tokens, completion_tokens: c.completion_tokens }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundOutcome {
    Succeeded,
    Discarded,
    GenerationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: u32,
    /// Absent when the model produced nothing usable.
    pub candidate: Option<TestArtifact>,
    pub outcome: RoundOutcome,
    pub snapshot: Option<CoverageSnapshot>,
    pub uncovered: Option<UncoveredReport>,
    /// Whether the prompt replayed an earlier Success suite as the model's own turn.
    pub injected: bool,
    pub failure: Option<FailureStage>,
    pub cause: Option<String>,
}

/// Everything recorded for one focal method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub focal: FocalUnit,
    pub rounds: Vec<RoundResult>,
    /// The selected suite in state `Final`, or `None` for a failed focal.
    pub final_artifact: Option<TestArtifact>,
    pub final_round: Option<u32>,
    /// The focal's branches and lines with nothing covered, measured when no round succeeded.
    pub baseline: Option<CoverageSnapshot>,
    pub transitions: Vec<TransitionRecord>,
    pub usage: Vec<UsageRecord>,
    pub transcript: Vec<TranscriptEntry>,
    /// Why the focal could not run at all.
    pub error: Option<String>,
}

impl FinalResult {
    fn empty(focal: &FocalUnit) -> Self {
        FinalResult {
            focal: focal.clone(),
            rounds: Vec::new(),
            final_artifact: None,
            final_round: None,
            baseline: None,
            transitions: Vec::new(),
            usage: Vec::new(),
            transcript: Vec::new(),
            error: None,
        }
    }

    /// Coverage of the selected suite, else the zero-coverage baseline.
    pub fn coverage(&self) -> Option<&CoverageSnapshot> {
        match self.final_round {
            Some(r) => self.rounds.iter().find(|x| x.round == r).and_then(|x| x.snapshot.as_ref()),
            None => self.baseline.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("generated output is not a parseable class: {0}")]
pub struct MergeFailure(pub String);

/// Re-enters the lifecycle from `previous` with the new model output merged into its suite.
pub fn next_round_candidate(
    previous: &TestArtifact,
    llm_output: &str,
    round: u32,
    focal: &FocalUnit,
    env: &RepairEnv<'_>,
) -> Result<(TestArtifact, TransitionRecord), MergeFailure> {
    let outline = syntax::parse_outline(llm_output).map_err(|e| MergeFailure(e.to_string()))?;
    if outline.primary_type().is_none() {
        return Err(MergeFailure("no type declaration".into()));
    }
    let merged = merge_suites(&previous.code, llm_output, round);
    let (mut next, record) = transition(previous.clone(), ArtifactState::Candidate).map_err(|e| MergeFailure(e.to_string()))?;
    next.id = round_id(focal, round);
    next.round = round;
    next.parent_id = Some(previous.id.clone());
    next.repair_trace.clear();
    next.set_code(merged, env.profile);
    Ok((next, record))
}

pub fn round_id(focal: &FocalUnit, round: u32) -> String {
    format!("{}-r{round}", focal.slug)
}

/// Index of the round to promote: highest branch rate, then fewer tests, then earliest.
pub fn select_final(rounds: &[RoundResult], count_tests: impl Fn(&str) -> usize) -> Option<usize> {
    let mut best: Option<(usize, &CoverageSnapshot, usize)> = None;
    for (i, r) in rounds.iter().enumerate() {
        let (RoundOutcome::Succeeded, Some(snap), Some(artifact)) = (r.outcome, &r.snapshot, &r.candidate) else { continue };
        let tests = count_tests(&artifact.code);
        let better = match best {
            None => true,
            Some((_, b, bt)) => match compare_rates(snap, b) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => tests < bt,
            },
        };
        if better {
            best = Some((i, snap, tests));
        }
    }
    best.map(|(i, _, _)| i)
}

/// Exact comparison of branch rates by cross-multiplication.
fn compare_rates(a: &CoverageSnapshot, b: &CoverageSnapshot) -> std::cmp::Ordering {
    let frac = |s: &CoverageSnapshot| if s.branch_total == 0 { (1u128, 1u128) } else { (s.branch_covered as u128, s.branch_total as u128) };
    let ((an, ad), (bn, bd)) = (frac(a), frac(b));
    (an * bd).cmp(&(bn * ad))
}

struct Generated {
    code: Option<String>,
    cause: Option<String>,
}

fn generate(
    model: &mut dyn LanguageModel,
    bundle: &PromptBundle,
    env: &RepairEnv<'_>,
    round: u32,
    phase: CostPhase,
    usage: &mut Vec<UsageRecord>,
) -> Generated {
    match model.complete(bundle, env.params) {
        Ok(c) => {
            usage.push(UsageRecord::of(round, phase, &c));
            match extract_test_code(&c) {
                Ok(code) if declares_type(&code) => Generated { code: Some(code), cause: None },
                Ok(_) => Generated { code: None, cause: Some("completion declares no class".into()) },
                Err(e) => Generated { code: None, cause: Some(e.to_string()) },
            }
        }
        Err(e) => Generated { code: None, cause: Some(e.to_string()) },
    }
}

/// Prose without any type declaration is a generation failure rather than a syntax error.
fn declares_type(code: &str) -> bool {
    code.split(|c: char| !c.is_alphanumeric() && c != '_').any(|w| matches!(w, "class" | "interface" | "enum"))
}

fn failed_round(round: u32, injected: bool, cause: String) -> RoundResult {
    RoundResult {
        round,
        candidate: None,
        outcome: RoundOutcome::GenerationFailed,
        snapshot: None,
        uncovered: None,
        injected,
        failure: None,
        cause: Some(cause),
    }
}

/// Runs up to `max_iterations` rounds for one focal method and promotes the best suite.
/// Only a missing toolchain is an error; every other problem is recorded in the rounds.
pub fn run_focal(focal: &FocalUnit, env: &RepairEnv<'_>, model: &mut dyn LanguageModel) -> Result<FinalResult, HarnessError> {
    let mut result = FinalResult::empty(focal);
    let mut last_success: Option<(TestArtifact, UncoveredReport)> = None;
    for round in 1..=env.config.max_rounds() {
        let phase = if round == 1 { CostPhase::Initial } else { CostPhase::Iteration };
        let injected = last_success.is_some();
        let bundle = match &last_success {
            Some((success, uncovered)) => env.studio.build_feedback_with_injection(success, uncovered, focal),
            None => env.studio.build_initial(focal),
        };
        let bundle = match bundle {
            Ok(b) => b,
            Err(e) => {
                result.rounds.push(failed_round(round, injected, e.to_string()));
                continue;
            }
        };
        let generated = generate(model, &bundle, env, round, phase, &mut result.usage);
        let Some(code) = generated.code else {
            result.rounds.push(failed_round(round, injected, generated.cause.unwrap_or_default()));
            continue;
        };
        let code = normalize_test_class(&code, focal);
        let candidate = match &last_success {
            Some((previous, _)) => match next_round_candidate(previous, &code, round, focal, env) {
                Ok((candidate, record)) => {
                    result.transitions.push(record);
                    candidate
                }
                Err(e) => {
                    result.rounds.push(failed_round(round, injected, e.to_string()));
                    continue;
                }
            },
            None => TestArtifact::candidate(round_id(focal, round), code, round, None, env.profile),
        };

        let outcome = repair_loop(candidate, focal, env, model)?;
        result.usage.extend(outcome.completions.iter().map(|c| UsageRecord::of(round, CostPhase::Repair, c)));
        result.transitions.extend(outcome.transitions);
        let artifact = outcome.artifact;
        if artifact.state != ArtifactState::Success {
            result.rounds.push(RoundResult {
                round,
                candidate: Some(artifact),
                outcome: RoundOutcome::Discarded,
                snapshot: None,
                uncovered: None,
                injected,
                failure: outcome.failure,
                cause: outcome.cause,
            });
            continue;
        }

        let measured = match &outcome.workspace {
            Some(ws) => measure(env, focal, ws),
            None => Err(HarnessOr::Other("validation left no workspace".into())),
        };
        let snapshot = match measured {
            Ok(s) => s,
            Err(HarnessOr::Harness(e)) => return Err(e),
            Err(HarnessOr::Other(cause)) => {
                result.rounds.push(RoundResult {
                    round,
                    candidate: Some(artifact),
                    outcome: RoundOutcome::Discarded,
                    snapshot: None,
                    uncovered: None,
                    injected,
                    failure: None,
                    cause: Some(format!("coverage: {cause}")),
                });
                continue;
            }
        };
        let uncovered = uncovered_branches(&snapshot, focal);
        let done = meets_standard(&snapshot, env.config);
        result.rounds.push(RoundResult {
            round,
            candidate: Some(artifact.clone()),
            outcome: RoundOutcome::Succeeded,
            snapshot: Some(snapshot),
            uncovered: Some(uncovered.clone()),
            injected,
            failure: None,
            cause: None,
        });
        if done {
            break;
        }
        last_success = Some((artifact, uncovered));
    }

    match select_final(&result.rounds, |code| env.profile.count_tests(code)) {
        Some(i) => {
            let chosen = result.rounds[i].candidate.clone().expect("succeeded rounds carry their artifact");
            let (artifact, record) = transition(chosen, ArtifactState::Final).expect("Success reaches Final");
            result.transitions.push(record);
            result.final_round = Some(result.rounds[i].round);
            result.final_artifact = Some(artifact);
        }
        None => result.baseline = baseline(focal, env)?,
    }
    Ok(result)
}

enum HarnessOr {
    Harness(HarnessError),
    Other(String),
}

impl From<String> for HarnessOr {
    fn from(s: String) -> Self {
        HarnessOr::Other(s)
    }
}

fn measure(env: &RepairEnv<'_>, focal: &FocalUnit, ws: &std::path::Path) -> Result<CoverageSnapshot, HarnessOr> {
    let doc = env.harness.coverage(ws, focal).map_err(|e| match e {
        HarnessError::ToolchainMissing(_) => HarnessOr::Harness(e),
        other => HarnessOr::Other(other.to_string()),
    })?;
    let source = fs::read_to_string(ws.join(&focal.source_path)).ok();
    Ok(ingest_report(&doc, focal, source.as_deref()).map_err(|e| e.to_string())?)
}

/// Source of a test class with a single empty test.
pub fn baseline_suite(focal: &FocalUnit, env: &RepairEnv<'_>) -> String {
    let mut code = String::new();
    if let Some(p) = &focal.package {
        code.push_str(&format!("package {p};\n\n"));
    }
    for import in &env.profile.spec.test_imports {
        code.push_str(&env.profile.render_import(import));
        code.push('\n');
    }
    let annotation = env.profile.spec.test_annotation.rsplit('.').next().unwrap_or("Test");
    code.push_str(&format!(
        "\npublic class {} {{\n    @{annotation}\n    public void baseline() {{\n    }}\n}}\n",
        focal.test_class_name()
    ));
    code
}

/// Measures the focal under an empty test so a failed focal still contributes its branch and line totals.
fn baseline(focal: &FocalUnit, env: &RepairEnv<'_>) -> Result<Option<CoverageSnapshot>, HarnessError> {
    let artifact = TestArtifact::candidate(format!("{}-baseline", focal.slug), baseline_suite(focal, env), 0, None, env.profile);
    let attempt = || -> Result<Option<CoverageSnapshot>, HarnessOr> {
        let ws = env.harness.prepare_workspace(focal, &artifact).map_err(|e| HarnessOr::Other(e.to_string()))?;
        let compiled = env.harness.compile(&ws, focal).map_err(|e| match e {
            HarnessError::ToolchainMissing(_) => HarnessOr::Harness(e),
            other => HarnessOr::Other(other.to_string()),
        })?;
        if !compiled.success {
            return Ok(None);
        }
        Ok(Some(measure(env, focal, &ws)?.zeroed()))
    };
    match attempt() {
        Ok(s) => Ok(s),
        Err(HarnessOr::Harness(e)) => Err(e),
        Err(HarnessOr::Other(_)) => Ok(None),
    }
}

/// Runs every focal with up to `config.workers` threads; results keep the input order.
pub fn run_project(focals: &[FocalUnit], env: &RepairEnv<'_>, gateway: &Gateway) -> Result<Vec<FinalResult>, HarnessError> {
    let slots: Vec<Mutex<Option<FinalResult>>> = focals.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let fatal: Mutex<Option<HarnessError>> = Mutex::new(None);
    let workers = env.config.worker_count().min(focals.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(focal) = focals.get(i) else { return };
                match run_one(focal, env, gateway) {
                    Ok(r) => *slots[i].lock().expect("slot lock") = Some(r),
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        fatal.lock().expect("error lock").get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = fatal.into_inner().expect("error lock") {
        return Err(e);
    }
    Ok(slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every focal ran")).collect())
}

fn run_one(focal: &FocalUnit, env: &RepairEnv<'_>, gateway: &Gateway) -> Result<FinalResult, HarnessError> {
    let mut session = match gateway.session(focal) {
        Ok(s) => s,
        Err(e) => {
            let mut r = FinalResult::empty(focal);
            r.error = Some(e.to_string());
            r.baseline = baseline(focal, env)?;
            return Ok(r);
        }
    };
    let mut result = run_focal(focal, env, &mut session)?;
    result.transcript = session.entries().to_vec();
    Ok(result)
}

#[cfg(test)]
mod tests;
