//! Evaluation metrics, the cost ledger and suite export over a finished session.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ledger::SessionLedger;
use crate::model::{ArtifactState, RunConfig};
use crate::orchestrator::{CostPhase, FinalResult, RoundOutcome, UsageRecord};
use crate::profile::FrameworkProfile;
use crate::repair::FailureStage;

/// Terminal classification of one focal method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FocalClass {
    Fail,
    SE,
    CE,
    RE,
    Pass,
}

/// Pass with a selected suite; otherwise the stage where the last produced suite stopped; Fail when none was produced.
pub fn classify_focal_outcome(result: &FinalResult) -> FocalClass {
    if result.final_artifact.is_some() {
        return FocalClass::Pass;
    }
    let last = result.rounds.iter().rev().find(|r| r.candidate.is_some() && r.outcome != RoundOutcome::GenerationFailed);
    match last.map(|r| r.failure) {
        None => FocalClass::Fail,
        Some(Some(FailureStage::Syntax)) => FocalClass::SE,
        Some(Some(FailureStage::Compile)) => FocalClass::CE,
        Some(Some(FailureStage::Runtime)) | Some(None) => FocalClass::RE,
    }
}

/// Currency is kept in pico-units so the phase split adds up exactly.
pub const PICO: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCost {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub pico: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_pico: u64,
    pub currency_total: f64,
    pub phases: BTreeMap<CostPhase, PhaseCost>,
}

/// Price per token in pico-units for a price per million tokens.
fn pico_per_token(price_per_million: f64) -> u64 {
    (price_per_million * 1e6).round().max(0.0) as u64
}

/// Tokens times price, split by the phase tag of each call.
pub fn compute_cost<'a>(usage: impl IntoIterator<Item = &'a UsageRecord>, config: &RunConfig) -> CostBreakdown {
    let (pp, cp) = (pico_per_token(config.prompt_price), pico_per_token(config.completion_price));
    let mut phases: BTreeMap<CostPhase, PhaseCost> =
        [CostPhase::Initial, CostPhase::Repair, CostPhase::Iteration].into_iter().map(|p| (p, PhaseCost::default())).collect();
    for u in usage {
        let slot = phases.entry(u.phase).or_default();
        slot.prompt_tokens += u.prompt_tokens;
        slot.completion_tokens += u.completion_tokens;
        slot.pico += u.prompt_tokens * pp + u.completion_tokens * cp;
    }
    let prompt_tokens = phases.values().map(|p| p.prompt_tokens).sum();
    let completion_tokens = phases.values().map(|p| p.completion_tokens).sum();
    let total_pico: u64 = phases.values().map(|p| p.pico).sum();
    CostBreakdown { prompt_tokens, completion_tokens, total_pico, currency_total: to_currency(total_pico), phases }
}

pub fn to_currency(pico: u64) -> f64 {
    (pico / PICO) as f64 + (pico % PICO) as f64 / PICO as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub focal_count: usize,
    pub counts: BTreeMap<FocalClass, usize>,
    pub fail_rate: f64,
    pub se_rate: f64,
    pub ce_rate: f64,
    pub re_rate: f64,
    pub pass_rate: f64,
    pub branch_covered: u64,
    pub branch_total: u64,
    pub line_covered: u64,
    pub line_total: u64,
    pub pass_branch_covered: u64,
    pub pass_branch_total: u64,
    pub pass_line_covered: u64,
    pub pass_line_total: u64,
    pub tbc: f64,
    pub tlc: f64,
    pub bcct: f64,
    pub lcct: f64,
    /// Test methods across all selected suites.
    pub tcc: usize,
    /// Assertion call sites across all selected suites.
    pub ac: usize,
    pub cost: CostBreakdown,
    pub per_focal: Vec<FocalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalRow {
    pub focal_id: String,
    pub class: FocalClass,
    pub rounds: usize,
    pub branch_covered: u64,
    pub branch_total: u64,
    pub tests: usize,
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn rate(n: usize, d: usize) -> f64 {
    ratio(n as u64, d as u64)
}

/// Aggregates over all focals; focals without a selected suite contribute their baseline totals and nothing covered.
pub fn compute_metrics(ledger: &SessionLedger, profile: &FrameworkProfile) -> MetricsSummary {
    let mut counts: BTreeMap<FocalClass, usize> =
        [FocalClass::Fail, FocalClass::SE, FocalClass::CE, FocalClass::RE, FocalClass::Pass].into_iter().map(|c| (c, 0)).collect();
    let (mut bc, mut bt, mut lc, mut lt) = (0, 0, 0, 0);
    let (mut pbc, mut pbt, mut plc, mut plt) = (0, 0, 0, 0);
    let (mut tcc, mut ac) = (0, 0);
    let mut per_focal = Vec::new();
    for r in &ledger.focals {
        let class = classify_focal_outcome(r);
        *counts.entry(class).or_default() += 1;
        let snap = r.coverage();
        let (tb, tl) = snap.map_or((0, 0), |s| (s.branch_total, s.line_total));
        bt += tb;
        lt += tl;
        let mut tests = 0;
        if let (FocalClass::Pass, Some(s), Some(artifact)) = (class, snap, &r.final_artifact) {
            bc += s.branch_covered;
            lc += s.line_covered;
            pbc += s.branch_covered;
            pbt += s.branch_total;
            plc += s.line_covered;
            plt += s.line_total;
            tests = profile.count_tests(&artifact.code);
            tcc += tests;
            ac += artifact.assertion_count;
        }
        per_focal.push(FocalRow {
            focal_id: r.focal.id.clone(),
            class,
            rounds: r.rounds.len(),
            branch_covered: if class == FocalClass::Pass { snap.map_or(0, |s| s.branch_covered) } else { 0 },
            branch_total: tb,
            tests,
        });
    }
    let n = ledger.focals.len();
    let c = |k: FocalClass| counts[&k];
    MetricsSummary {
        focal_count: n,
        fail_rate: rate(c(FocalClass::Fail), n),
        se_rate: rate(c(FocalClass::SE), n),
        ce_rate: rate(c(FocalClass::CE), n),
        re_rate: rate(c(FocalClass::RE), n),
        pass_rate: rate(c(FocalClass::Pass), n),
        counts,
        branch_covered: bc,
        branch_total: bt,
        line_covered: lc,
        line_total: lt,
        pass_branch_covered: pbc,
        pass_branch_total: pbt,
        pass_line_covered: plc,
        pass_line_total: plt,
        tbc: ratio(bc, bt),
        tlc: ratio(lc, lt),
        bcct: ratio(pbc, pbt),
        lcct: ratio(plc, plt),
        tcc,
        ac,
        cost: compute_cost(ledger.focals.iter().flat_map(|r| &r.usage), &ledger.header.config),
        per_focal,
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

/// Human-readable report: the headline table, the cost split and one row per focal.
pub fn render_table(m: &MetricsSummary) -> String {
    let mut out = String::new();
    let head = ["Fail", "SE", "CE", "RE", "Pass", "TBC", "TLC", "BCCT", "LCCT", "TCC", "AC"];
    let row = [
        pct(m.fail_rate),
        pct(m.se_rate),
        pct(m.ce_rate),
        pct(m.re_rate),
        pct(m.pass_rate),
        pct(m.tbc),
        pct(m.tlc),
        pct(m.bcct),
        pct(m.lcct),
        m.tcc.to_string(),
        m.ac.to_string(),
    ];
    let widths: Vec<usize> = head.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
    let line = |cells: &mut dyn Iterator<Item = String>| -> String {
        cells.zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
    };
    let _ = writeln!(out, "focal methods: {}", m.focal_count);
    let _ = writeln!(out, "{}", line(&mut head.iter().map(|h| h.to_string())));
    let _ = writeln!(out, "{}", line(&mut row.iter().cloned()));
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "tokens: {} prompt, {} completion; cost {:.6}",
        m.cost.prompt_tokens, m.cost.completion_tokens, m.cost.currency_total
    );
    for (phase, c) in &m.cost.phases {
        let _ = writeln!(
            out,
            "  {:<9} {:>10} prompt {:>10} completion {:>12.6}",
            format!("{phase:?}").to_lowercase(),
            c.prompt_tokens,
            c.completion_tokens,
            to_currency(c.pico)
        );
    }
    let _ = writeln!(out);
    for f in &m.per_focal {
        let _ = writeln!(
            out,
            "{:<5} {:>3}/{:<3} branches  {} rounds  {} tests  {}",
            format!("{:?}", f.class),
            f.branch_covered,
            f.branch_total,
            f.rounds,
            f.tests,
            f.focal_id
        );
    }
    out
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    focal_id: &'a str,
    signature: &'a str,
    final_round: Option<u32>,
    artifact_id: &'a str,
    rounds: Vec<ProvenanceRound>,
    repair_steps: Vec<&'a crate::model::RepairStep>,
    coverage: Option<&'a crate::model::CoverageSnapshot>,
}

#[derive(Debug, Serialize)]
struct ProvenanceRound {
    round: u32,
    outcome: RoundOutcome,
    injected: bool,
    branch_covered: Option<u64>,
    branch_total: Option<u64>,
}

/// Writes `{out}/{slug}/{package dirs}/{Test}.java` and `{out}/{slug}/provenance.json`; nothing for a failed focal.
pub fn export_suite(result: &FinalResult, out_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let Some(artifact) = result.final_artifact.as_ref().filter(|a| a.state == ArtifactState::Final) else {
        return Ok(Vec::new());
    };
    let focal = &result.focal;
    let mut dir = out_dir.join(&focal.slug);
    if let Some(p) = &focal.package {
        dir.extend(p.split('.'));
    }
    fs::create_dir_all(&dir)?;
    let test_file = dir.join(format!("{}.java", focal.test_class_name()));
    let mut code = artifact.code.clone();
    if !code.ends_with('\n') {
        code.push('\n');
    }
    fs::write(&test_file, code)?;
    let provenance = Provenance {
        focal_id: &focal.id,
        signature: &focal.signature,
        final_round: result.final_round,
        artifact_id: &artifact.id,
        rounds: result
            .rounds
            .iter()
            .map(|r| ProvenanceRound {
                round: r.round,
                outcome: r.outcome,
                injected: r.injected,
                branch_covered: r.snapshot.as_ref().map(|s| s.branch_covered),
                branch_total: r.snapshot.as_ref().map(|s| s.branch_total),
            })
            .collect(),
        repair_steps: result.rounds.iter().filter_map(|r| r.candidate.as_ref()).flat_map(|c| &c.repair_trace).collect(),
        coverage: result.coverage(),
    };
    let sidecar = out_dir.join(&focal.slug).join("provenance.json");
    fs::write(&sidecar, serde_json::to_string_pretty(&provenance).expect("provenance serializes") + "\n")?;
    Ok(vec![test_file, sidecar])
}

#[cfg(test)]
mod tests;
