//! The session ledger: one JSON record per event, without wall-clock data, so identical runs write identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{TranscriptEntry, Transport};
use crate::model::{CoverageSnapshot, FocalUnit, RunConfig, TestArtifact, TransitionRecord};
use crate::orchestrator::{FinalResult, RoundResult, UsageRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub model_id: String,
    pub transport: Transport,
    pub profile: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLedger {
    pub header: SessionHeader,
    pub focals: Vec<FinalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Session(SessionHeader),
    Focal {
        focal: FocalUnit,
    },
    Round {
        focal_id: String,
        round: RoundResult,
    },
    Usage {
        focal_id: String,
        usage: UsageRecord,
    },
    Transcript {
        focal_id: String,
        entry: TranscriptEntry,
    },
    Transition {
        focal_id: String,
        record: TransitionRecord,
    },
    Final {
        focal_id: String,
        final_round: Option<u32>,
        final_artifact: Option<TestArtifact>,
        baseline: Option<CoverageSnapshot>,
        error: Option<String>,
    },
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("cannot access ledger {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("ledger line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl SessionLedger {
    pub fn new(header: SessionHeader, focals: Vec<FinalResult>) -> Self {
        SessionLedger { header, focals }
    }

    fn events(&self) -> Vec<Event> {
        let mut out = vec![Event::Session(self.header.clone())];
        for r in &self.focals {
            let id = || r.focal.id.clone();
            out.push(Event::Focal { focal: r.focal.clone() });
            out.extend(r.rounds.iter().map(|round| Event::Round { focal_id: id(), round: round.clone() }));
            out.extend(r.usage.iter().map(|usage| Event::Usage { focal_id: id(), usage: usage.clone() }));
            out.extend(r.transcript.iter().map(|entry| Event::Transcript { focal_id: id(), entry: entry.clone() }));
            out.extend(r.transitions.iter().map(|record| Event::Transition { focal_id: id(), record: record.clone() }));
            out.push(Event::Final {
                focal_id: id(),
                final_round: r.final_round,
                final_artifact: r.final_artifact.clone(),
                baseline: r.baseline.clone(),
                error: r.error.clone(),
            });
        }
        out
    }

    /// Line-delimited JSON, one event per line.
    pub fn to_jsonl(&self) -> String {
        self.events().iter().map(|e| serde_json::to_string(e).expect("ledger events serialize") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<SessionLedger, LedgerError> {
        let mut header = None;
        let mut focals: Vec<FinalResult> = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line_no = i + 1;
            let malformed = |message: String| LedgerError::Malformed { line: line_no, message };
            let event: Event = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            if let Event::Session(h) = event {
                header = Some(h);
                continue;
            }
            if let Event::Focal { focal } = event {
                focals.push(FinalResult {
                    focal,
                    rounds: Vec::new(),
                    final_artifact: None,
                    final_round: None,
                    baseline: None,
                    transitions: Vec::new(),
                    usage: Vec::new(),
                    transcript: Vec::new(),
                    error: None,
                });
                continue;
            }
            let (Event::Round { focal_id, .. }
            | Event::Usage { focal_id, .. }
            | Event::Transcript { focal_id, .. }
            | Event::Transition { focal_id, .. }
            | Event::Final { focal_id, .. }) = &event
            else {
                unreachable!("session and focal events handled above")
            };
            let Some(current) = focals.last_mut().filter(|f| &f.focal.id == focal_id) else {
                return Err(malformed(format!("event for {focal_id} outside its focal section")));
            };
            match event {
                Event::Round { round, .. } => current.rounds.push(round),
                Event::Usage { usage, .. } => current.usage.push(usage),
                Event::Transcript { entry, .. } => current.transcript.push(entry),
                Event::Transition { record, .. } => current.transitions.push(record),
                Event::Final { final_round, final_artifact, baseline, error, .. } => {
                    current.final_round = final_round;
                    current.final_artifact = final_artifact;
                    current.baseline = baseline;
                    current.error = error;
                }
                Event::Session(_) | Event::Focal { .. } => unreachable!(),
            }
        }
        let header = header.ok_or(LedgerError::Malformed { line: 0, message: "no session record".into() })?;
        Ok(SessionLedger { header, focals })
    }

    pub fn write(&self, path: &Path) -> Result<(), LedgerError> {
        let io = |source| LedgerError::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        fs::write(path, self.to_jsonl()).map_err(io)
    }

    pub fn read(path: &Path) -> Result<SessionLedger, LedgerError> {
        let text = fs::read_to_string(path).map_err(|source| LedgerError::Io { path: path.display().to_string(), source })?;
        SessionLedger::from_jsonl(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArtifactState;
    use crate::orchestrator::{CostPhase, RoundOutcome};
    use std::collections::BTreeMap;

    pub(crate) fn sample() -> SessionLedger {
        let focal = FocalUnit {
            id: "p.A#f()".into(),
            slug: "p.A-f".into(),
            source_path: "src/main/java/p/A.java".into(),
            package: Some("p".into()),
            class_name: "A".into(),
            method_name: "f".into(),
            signature: "public int f()".into(),
            body_span: (3, 5),
            compressed_context: "class A {}".into(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        };
        let artifact = TestArtifact {
            id: "p.A-f-r1".into(),
            code: "class AGenTest {}".into(),
            state: ArtifactState::Final,
            round: 1,
            parent_id: None,
            repair_trace: Vec::new(),
            assertion_count: 0,
        };
        let result = FinalResult {
            focal: focal.clone(),
            rounds: vec![RoundResult {
                round: 1,
                candidate: Some(artifact.clone()),
                outcome: RoundOutcome::Succeeded,
                snapshot: Some(CoverageSnapshot::default()),
                uncovered: None,
                injected: false,
                failure: None,
                cause: None,
            }],
            final_artifact: Some(artifact),
            final_round: Some(1),
            baseline: None,
            transitions: vec![TransitionRecord { artifact_id: "p.A-f-r1".into(), from: ArtifactState::Success, to: ArtifactState::Final }],
            usage: vec![UsageRecord { round: 1, phase: CostPhase::Initial, prompt_tokens: 10, completion_tokens: 2 }],
            transcript: Vec::new(),
            error: None,
        };
        let mut failed = FinalResult { focal: FocalUnit { id: "p.A#g()".into(), ..focal }, ..result.clone() };
        failed.final_artifact = None;
        failed.final_round = None;
        failed.rounds.clear();
        failed.error = Some("no transcript".into());
        let header =
            SessionHeader { model_id: "m".into(), transport: Transport::Stub, profile: "junit4".into(), config: RunConfig::default() };
        SessionLedger::new(header, vec![result, failed])
    }

    #[test]
    fn round_trips_through_jsonl() {
        let ledger = sample();
        let text = ledger.to_jsonl();
        assert_eq!(text.lines().count(), 1 + 5 + 4);
        assert!(text.lines().all(|l| l.starts_with("{\"event\":")));
        let back = SessionLedger::from_jsonl(&text).unwrap();
        assert_eq!(back, ledger);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn rejects_orphan_events() {
        let text = sample().to_jsonl();
        let without_focal: String = text.lines().filter(|l| !l.starts_with("{\"event\":\"focal\"")).map(|l| format!("{l}\n")).collect();
        assert!(matches!(SessionLedger::from_jsonl(&without_focal), Err(LedgerError::Malformed { .. })));
        assert!(SessionLedger::from_jsonl("").is_err());
    }
}
