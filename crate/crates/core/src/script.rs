//! Scenario scripts and deterministic replay.

use serde::{Deserialize, Serialize};

use crate::hash::ContentHash;
use crate::mock::FixtureSource;
use crate::workflow::{CommandSpec, Engine, HistoryEntry, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub steps: Vec<ScenarioStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    #[serde(flatten)]
    pub command: CommandSpec,
    /// The step is expected to fail with this error code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    /// Failed with the expected error code.
    ExpectedError,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// 1-based.
    pub step: usize,
    pub op: String,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub canvas_hash_before: Option<ContentHash>,
    pub canvas_hash_after: Option<ContentHash>,
    pub masks_after: Vec<String>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub steps: Vec<StepReport>,
    pub final_canvas_hash: Option<ContentHash>,
    pub history: Vec<HistoryEntry>,
    pub transcript_len: usize,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.steps
            .iter()
            .all(|s| matches!(s.status, StepStatus::Ok | StepStatus::ExpectedError))
    }

    pub fn first_failure(&self) -> Option<&StepReport> {
        self.steps.iter().find(|s| s.status == StepStatus::Failed)
    }

    /// The report with all timings zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.steps {
            s.duration_ms = 0;
        }
        r.history = r.history.iter().map(HistoryEntry::without_timing).collect();
        r
    }

    /// Byte-stable JSON with timings removed.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.without_timing()).expect("reports serialize")
    }

    pub fn golden(&self) -> Golden {
        Golden {
            scenario: self.scenario.clone(),
            final_canvas_hash: self.final_canvas_hash,
            step_hashes: self.steps.iter().map(|s| s.canvas_hash_after).collect(),
        }
    }
}

/// Pinned outcome of a replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Golden {
    pub scenario: String,
    pub final_canvas_hash: Option<ContentHash>,
    pub step_hashes: Vec<Option<ContentHash>>,
}

impl Golden {
    /// Differences against a report, one line each. Empty means a match.
    pub fn diff(&self, report: &ReplayReport) -> Vec<String> {
        let got = report.golden();
        let mut out = Vec::new();
        if self.scenario != got.scenario {
            out.push(format!("scenario: expected {:?}, got {:?}", self.scenario, got.scenario));
        }
        if self.step_hashes.len() != got.step_hashes.len() {
            out.push(format!(
                "step count: expected {}, got {}",
                self.step_hashes.len(),
                got.step_hashes.len()
            ));
        }
        for (i, (a, b)) in self.step_hashes.iter().zip(&got.step_hashes).enumerate() {
            if a != b {
                out.push(format!("step {}: expected {}, got {}", i + 1, show(a), show(b)));
            }
        }
        if self.final_canvas_hash != got.final_canvas_hash {
            out.push(format!(
                "final canvas: expected {}, got {}",
                show(&self.final_canvas_hash),
                show(&got.final_canvas_hash)
            ));
        }
        out
    }
}

fn show(h: &Option<ContentHash>) -> String {
    h.map_or_else(|| "none".to_owned(), |h| h.to_string())
}

/// Run every step on a fresh session. Stops at the first unexpected outcome;
/// remaining steps are reported as skipped.
pub fn replay(scenario: &Scenario, fixtures: Option<&dyn FixtureSource>, engine: &Engine) -> ReplayReport {
    let mut session = Session::with_id("replay");
    replay_into(scenario, fixtures, engine, &mut session)
}

pub fn replay_into(
    scenario: &Scenario,
    fixtures: Option<&dyn FixtureSource>,
    engine: &Engine,
    session: &mut Session,
) -> ReplayReport {
    let mut steps = Vec::with_capacity(scenario.steps.len());
    let mut stopped = false;
    for (i, step) in scenario.steps.iter().enumerate() {
        let op = op_name(&step.command);
        let before = session.canvas_hash();
        if stopped {
            steps.push(StepReport {
                step: i + 1,
                op,
                status: StepStatus::Skipped,
                error_code: None,
                error: None,
                canvas_hash_before: before,
                canvas_hash_after: before,
                masks_after: Vec::new(),
                duration_ms: 0,
            });
            continue;
        }
        let started = std::time::Instant::now();
        let outcome = match step.command.clone().resolve(fixtures) {
            Ok(cmd) => engine.execute(session, cmd).map(|_| ()).map_err(|e| (e.code().to_owned(), e.to_string())),
            Err(e) => Err(("invalid_command".to_owned(), e.to_string())),
        };
        let duration_ms = started.elapsed().as_millis() as u64;
        let (status, error_code, error) = match (outcome, &step.expect_error) {
            (Ok(()), None) => (StepStatus::Ok, None, None),
            (Ok(()), Some(want)) => (
                StepStatus::Failed,
                None,
                Some(format!("expected error {want:?} but the step succeeded")),
            ),
            (Err((code, msg)), Some(want)) if &code == want => (StepStatus::ExpectedError, Some(code), Some(msg)),
            (Err((code, msg)), _) => (StepStatus::Failed, Some(code), Some(msg)),
        };
        stopped = status == StepStatus::Failed;
        steps.push(StepReport {
            step: i + 1,
            op,
            status,
            error_code,
            error,
            canvas_hash_before: before,
            canvas_hash_after: session.canvas_hash(),
            masks_after: session.pending_masks().map(|m| m.id.clone()).collect(),
            duration_ms,
        });
    }
    ReplayReport {
        scenario: scenario.name.clone(),
        steps,
        final_canvas_hash: session.canvas_hash(),
        history: session.history().to_vec(),
        transcript_len: session.transcript().len(),
    }
}

fn op_name(spec: &CommandSpec) -> String {
    serde_json::to_value(spec)
        .ok()
        .and_then(|v| v.get("op").and_then(|o| o.as_str()).map(str::to_owned))
        .unwrap_or_default()
}
