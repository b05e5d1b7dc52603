use super::*;
use crate::gateway::Transport;
use crate::ledger::SessionHeader;
use crate::model::{BranchCoverage, CoverageSnapshot, FocalUnit, LineCoverage, TestArtifact};
use crate::orchestrator::RoundResult;
use proptest::prelude::*;

fn focal(id: &str) -> FocalUnit {
    FocalUnit {
        id: id.into(),
        slug: id.replace('#', "-").replace("()", ""),
        source_path: "src/main/java/p/A.java".into(),
        package: Some("p".into()),
        class_name: "A".into(),
        method_name: "f".into(),
        signature: "public int f()".into(),
        body_span: (1, 9),
        compressed_context: String::new(),
        symbol_index: Default::default(),
        framework_profile: "junit4".into(),
    }
}

fn snapshot(branches: usize, covered_dirs: usize, lines: usize, covered_lines: usize) -> CoverageSnapshot {
    let b = (0..branches)
        .map(|i| BranchCoverage {
            branch_id: i.to_string(),
            line: i as u32 + 1,
            code_text: String::new(),
            true_covered: i < covered_dirs,
            false_covered: i + branches < covered_dirs,
        })
        .collect();
    let l = (0..lines).map(|i| LineCoverage { line_no: i as u32 + 1, covered: i < covered_lines }).collect();
    CoverageSnapshot::from_entries(b, l)
}

const SUITE: &str = "class AGenTest {\n    @Test public void a() { assertTrue(true); assertEquals(1, 1); }\n    @Test public void b() { assertNull(null); }\n}\n";

/// One focal of the given class with the given coverage.
fn result(id: &str, class: FocalClass, snap: CoverageSnapshot) -> FinalResult {
    let profile = FrameworkProfile::junit4();
    let mut artifact = TestArtifact::candidate(format!("{id}-r1"), SUITE.into(), 1, None, &profile);
    let (outcome, failure) = match class {
        FocalClass::Pass => (RoundOutcome::Succeeded, None),
        FocalClass::SE => (RoundOutcome::Discarded, Some(FailureStage::Syntax)),
        FocalClass::CE => (RoundOutcome::Discarded, Some(FailureStage::Compile)),
        FocalClass::RE => (RoundOutcome::Discarded, Some(FailureStage::Runtime)),
        FocalClass::Fail => (RoundOutcome::GenerationFailed, None),
    };
    artifact.state = if class == FocalClass::Pass { ArtifactState::Success } else { ArtifactState::Discarded };
    let round = RoundResult {
        round: 1,
        candidate: (class != FocalClass::Fail).then(|| artifact.clone()),
        outcome,
        snapshot: (class == FocalClass::Pass).then(|| snap.clone()),
        uncovered: None,
        injected: false,
        failure,
        cause: None,
    };
    let final_artifact = (class == FocalClass::Pass).then_some(TestArtifact { state: ArtifactState::Final, ..artifact });
    FinalResult {
        focal: focal(id),
        rounds: vec![round],
        final_round: final_artifact.as_ref().map(|_| 1),
        final_artifact,
        baseline: (class != FocalClass::Pass).then(|| snap.zeroed()),
        transitions: Vec::new(),
        usage: vec![
            UsageRecord { round: 1, phase: CostPhase::Initial, prompt_tokens: 700, completion_tokens: 300 },
            UsageRecord { round: 1, phase: CostPhase::Repair, prompt_tokens: 333, completion_tokens: 111 },
        ],
        transcript: Vec::new(),
        error: None,
    }
}

fn ledger(focals: Vec<FinalResult>) -> SessionLedger {
    let header = SessionHeader { model_id: "m".into(), transport: Transport::Stub, profile: "junit4".into(), config: RunConfig::default() };
    SessionLedger::new(header, focals)
}

#[test]
fn classification() {
    for class in [FocalClass::Fail, FocalClass::SE, FocalClass::CE, FocalClass::RE, FocalClass::Pass] {
        assert_eq!(classify_focal_outcome(&result("p.A#f()", class, snapshot(1, 1, 1, 1))), class);
    }
    let mut later_fail = result("p.A#f()", FocalClass::CE, snapshot(1, 1, 1, 1));
    later_fail.rounds.push(RoundResult {
        round: 2,
        candidate: None,
        outcome: RoundOutcome::GenerationFailed,
        snapshot: None,
        uncovered: None,
        injected: false,
        failure: None,
        cause: None,
    });
    assert_eq!(classify_focal_outcome(&later_fail), FocalClass::CE);
}

#[test]
fn two_focal_fixture() {
    let m = compute_metrics(
        &ledger(vec![result("p.A#f()", FocalClass::Pass, snapshot(2, 4, 5, 5)), result("p.A#g()", FocalClass::Fail, snapshot(3, 0, 4, 0))]),
        &FrameworkProfile::junit4(),
    );
    assert_eq!((m.branch_covered, m.branch_total), (4, 10));
    assert_eq!(m.tbc, 0.4);
    assert_eq!(m.bcct, 1.0);
    assert_eq!(m.tlc, 5.0 / 9.0);
    assert_eq!(m.lcct, 1.0);
    assert_eq!((m.pass_rate, m.fail_rate), (0.5, 0.5));
    assert_eq!((m.tcc, m.ac), (2, 3));
    let table = render_table(&m);
    assert!(table.contains("TBC") && table.contains("40.00%") && table.contains("100.00%"));
}

#[test]
fn empty_ledger_is_all_zero() {
    let m = compute_metrics(&ledger(Vec::new()), &FrameworkProfile::junit4());
    assert_eq!(m.focal_count, 0);
    for r in [m.fail_rate, m.se_rate, m.ce_rate, m.re_rate, m.pass_rate, m.tbc, m.tlc, m.bcct, m.lcct, m.cost.currency_total] {
        assert_eq!(r, 0.0);
    }
    assert_eq!((m.tcc, m.ac, m.cost.total_pico), (0, 0, 0));
}

#[test]
fn cost_at_reference_prices() {
    let config = RunConfig::default();
    let million = [UsageRecord { round: 1, phase: CostPhase::Initial, prompt_tokens: 1_000_000, completion_tokens: 0 }];
    assert_eq!(compute_cost(&million, &config).currency_total, 0.5);
    let completion = [UsageRecord { round: 1, phase: CostPhase::Iteration, prompt_tokens: 0, completion_tokens: 1_000_000 }];
    assert_eq!(compute_cost(&completion, &config).currency_total, 1.5);
    let zero = compute_cost(&[], &config);
    assert_eq!((zero.total_pico, zero.currency_total, zero.phases.len()), (0, 0.0, 3));
}

#[test]
fn export_writes_suite_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let pass = result("p.A#f()", FocalClass::Pass, snapshot(2, 4, 5, 5));
    let files = export_suite(&pass, dir.path()).unwrap();
    assert_eq!(files, vec![dir.path().join("p.A-f/p/AGenTest.java"), dir.path().join("p.A-f/provenance.json")]);
    assert_eq!(fs::read_to_string(&files[0]).unwrap(), SUITE);
    let first = fs::read(&files[1]).unwrap();
    export_suite(&pass, dir.path()).unwrap();
    assert_eq!(fs::read(&files[1]).unwrap(), first);
    let fail = result("p.A#g()", FocalClass::RE, snapshot(2, 0, 5, 0));
    assert!(export_suite(&fail, dir.path()).unwrap().is_empty());
}

fn arb_result() -> impl Strategy<Value = (FocalClass, usize, usize, usize, usize, u64, u64)> {
    (
        prop_oneof![Just(FocalClass::Fail), Just(FocalClass::SE), Just(FocalClass::CE), Just(FocalClass::RE), Just(FocalClass::Pass)],
        0usize..6,
        0usize..13,
        0usize..10,
        0usize..11,
        0u64..2_000_000,
        0u64..2_000_000,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identities_hold(rows in proptest::collection::vec(arb_result(), 0..12)) {
        let focals: Vec<FinalResult> = rows
            .iter()
            .enumerate()
            .map(|(i, (class, b, cb, l, cl, pt, ct))| {
                let mut r = result(&format!("p.A#f{i}()"), *class, snapshot(*b, (*cb).min(2 * b), *l, (*cl).min(*l)));
                r.usage[0].prompt_tokens = *pt;
                r.usage[1].completion_tokens = *ct;
                r
            })
            .collect();
        let m = compute_metrics(&ledger(focals.clone()), &FrameworkProfile::junit4());
        if !focals.is_empty() {
            prop_assert!((m.fail_rate + m.se_rate + m.ce_rate + m.re_rate + m.pass_rate - 1.0).abs() < 1e-12);
        }
        if m.counts[&FocalClass::Pass] < focals.len() {
            prop_assert!(m.tbc <= m.bcct);
        }
        // Brute-force recount over the raw entries.
        let mut covered = 0u64;
        let mut total = 0u64;
        for f in &focals {
            let s = f.coverage().unwrap();
            total += s.branches.len() as u64 * 2;
            if f.final_artifact.is_some() {
                covered += s.branches.iter().map(|b| b.true_covered as u64 + b.false_covered as u64).sum::<u64>();
            }
        }
        prop_assert_eq!((m.branch_covered, m.branch_total), (covered, total));
        let phases: u64 = m.cost.phases.values().map(|p| p.pico).sum();
        prop_assert_eq!(phases, m.cost.total_pico);
        let tokens: u64 = focals.iter().flat_map(|f| &f.usage).map(|u| u.prompt_tokens).sum();
        prop_assert_eq!(m.cost.prompt_tokens, tokens);
    }
}
