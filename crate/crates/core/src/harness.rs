//! Isolated workspaces and the two toolchain phases.

use std::fs;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;
use walkdir::WalkDir;

use crate::coverage::{CoverageDocument, ReportFormat};
use crate::diagnostics::split_traces;
use crate::model::{FocalUnit, Phase, TestArtifact};
use crate::profile::FrameworkProfile;

/// Directory inside each workspace holding logs and the coverage report.
pub const STATE_DIR: &str = ".coevo";

/// How to drive the subject's toolchain. Commands run through `sh -c` after placeholder substitution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolchainAdapter {
    pub compile_command: String,
    pub run_command: String,
    pub coverage_command: Option<String>,
    pub coverage_format: ReportFormat,
    pub classpath_roots: Vec<PathBuf>,
    pub timeout_compile: u64,
    pub timeout_run: u64,
    /// Source root for test classes, relative to the workspace.
    pub test_root: String,
}

impl Default for ToolchainAdapter {
    fn default() -> Self {
        ToolchainAdapter {
            compile_command: "minijava compile {{workspace}}".into(),
            run_command: "minijava test {{workspace}} --class {{test_class}} --coverage-out {{report}} --format json".into(),
            coverage_command: None,
            coverage_format: ReportFormat::Json,
            classpath_roots: Vec::new(),
            timeout_compile: 60,
            timeout_run: 120,
            test_root: "src/test/java".into(),
        }
    }
}

impl ToolchainAdapter {
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let commands = [Some(&self.compile_command), Some(&self.run_command), self.coverage_command.as_ref()];
        for c in commands.into_iter().flatten() {
            if !c.contains("{{workspace}}") {
                errors.push(format!("command `{c}` lacks the {{{{workspace}}}} placeholder"));
            }
        }
        if self.timeout_compile == 0 || self.timeout_run == 0 {
            errors.push("timeouts must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn report_path(&self, workspace: &Path) -> PathBuf {
        let ext = match self.coverage_format {
            ReportFormat::Json => "json",
            ReportFormat::Clover => "xml",
        };
        workspace.join(STATE_DIR).join(format!("coverage.{ext}"))
    }

    pub fn test_file(&self, workspace: &Path, focal: &FocalUnit) -> PathBuf {
        let mut p = workspace.join(&self.test_root);
        if let Some(pkg) = &focal.package {
            p.extend(pkg.split('.'));
        }
        p.join(format!("{}.java", focal.test_class_name()))
    }

    fn render(&self, template: &str, workspace: &Path, focal: &FocalUnit) -> String {
        let classpath: Vec<String> = self.classpath_roots.iter().map(|p| p.display().to_string()).collect();
        template
            .replace("{{workspace}}", &shell_quote(&workspace.display().to_string()))
            .replace("{{test_class}}", &focal.qualified_test_class())
            .replace("{{test_file}}", &shell_quote(&self.test_file(workspace, focal).display().to_string()))
            .replace("{{report}}", &shell_quote(&self.report_path(workspace).display().to_string()))
            .replace("{{classpath}}", &shell_quote(&classpath.join(":")))
    }
}

fn shell_quote(s: &str) -> String {
    if s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-+:=,".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseStatus {
    Completed,
    TimedOut,
    /// The runner exited abnormally without reporting any test failure.
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOutcome {
    pub phase: Phase,
    pub success: bool,
    pub status: PhaseStatus,
    pub raw_log: String,
    pub stack_traces: Vec<String>,
    pub duration: f64,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("I/O failure at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("toolchain command not found: {0}")]
    ToolchainMissing(String),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("coverage report missing at {0}")]
    ReportMissing(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// The operations the orchestrator needs from a toolchain.
pub trait Harness: Sync {
    fn prepare_workspace(&self, focal: &FocalUnit, artifact: &TestArtifact) -> Result<PathBuf, HarnessError>;
    fn compile(&self, workspace: &Path, focal: &FocalUnit) -> Result<PhaseOutcome, HarnessError>;
    fn execute(&self, workspace: &Path, focal: &FocalUnit) -> Result<PhaseOutcome, HarnessError>;
    fn coverage(&self, workspace: &Path, focal: &FocalUnit) -> Result<CoverageDocument, HarnessError>;
}

/// Runs adapter commands in per-focal copies of the subject project.
#[derive(Debug, Clone)]
pub struct ShellHarness {
    pub project_root: PathBuf,
    pub work_root: PathBuf,
    pub adapter: ToolchainAdapter,
    pub profile: FrameworkProfile,
}

impl ShellHarness {
    /// Both roots are made absolute so commands and the workspace copy never depend on the current directory.
    pub fn new(project_root: PathBuf, work_root: PathBuf, adapter: ToolchainAdapter, profile: FrameworkProfile) -> Self {
        let absolute = |p: PathBuf| std::path::absolute(&p).unwrap_or(p);
        ShellHarness { project_root: absolute(project_root), work_root: absolute(work_root), adapter, profile }
    }

    pub fn workspace_for(&self, focal: &FocalUnit) -> PathBuf {
        self.work_root.join(&focal.slug)
    }

    /// Copies the project without its existing tests, so human-written tests are never touched or run.
    fn materialize(&self, workspace: &Path) -> Result<(), HarnessError> {
        let test_root = self.project_root.join(&self.adapter.test_root);
        let walker = WalkDir::new(&self.project_root).into_iter().filter_entry(|e| {
            let p = e.path();
            p != test_root && p != self.work_root && e.file_name() != STATE_DIR && e.file_name() != ".git"
        });
        for entry in walker {
            let entry = entry.map_err(|e| HarnessError::Io {
                path: self.project_root.display().to_string(),
                source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk failed")),
            })?;
            let rel = entry.path().strip_prefix(&self.project_root).expect("walk stays under root");
            let dest = workspace.join(rel);
            if entry.file_type().is_dir() {
                fs::create_dir_all(&dest).map_err(io_err(&dest))?;
            } else if entry.file_type().is_file() {
                fs::copy(entry.path(), &dest).map_err(io_err(&dest))?;
            }
        }
        Ok(())
    }

    fn run(&self, phase: Phase, command: &str, timeout: u64, workspace: &Path) -> Result<(Option<i32>, String, f64), HarnessError> {
        let started = Instant::now();
        let mut child = match Command::new("sh")
            .arg("-c")
            .arg(format!("exec 2>&1\n{command}"))
            .current_dir(workspace)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .process_group(0)
            .spawn()
        {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(HarnessError::ToolchainMissing("sh".into())),
            Err(e) => return Err(io_err(workspace)(e)),
        };
        let mut stdout = child.stdout.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let status = child.wait_timeout(Duration::from_secs(timeout)).map_err(io_err(workspace))?;
        let code = match status {
            Some(s) => s.code(),
            None => {
                // SAFETY: the child leads its own process group, so this signals only its descendants.
                unsafe { libc::kill(-(child.id() as i32), libc::SIGKILL) };
                let _ = child.kill();
                let _ = child.wait();
                None
            }
        };
        let mut log = String::from_utf8_lossy(&reader.join().unwrap_or_default()).into_owned();
        if code.is_none() {
            log.push_str(&format!("\n{phase:?} phase timed out after {timeout}s\n"));
        }
        if code == Some(127) {
            let first = command.split_whitespace().next().unwrap_or(command).to_string();
            return Err(HarnessError::ToolchainMissing(first));
        }
        let name = match phase {
            Phase::Compile => "compile.log",
            Phase::Runtime => "run.log",
        };
        let log_path = workspace.join(STATE_DIR).join(name);
        fs::create_dir_all(workspace.join(STATE_DIR)).map_err(io_err(&log_path))?;
        fs::write(&log_path, &log).map_err(io_err(&log_path))?;
        Ok((code, log, started.elapsed().as_secs_f64()))
    }
}

impl Harness for ShellHarness {
    fn prepare_workspace(&self, focal: &FocalUnit, artifact: &TestArtifact) -> Result<PathBuf, HarnessError> {
        if artifact.code.trim().is_empty() {
            return Err(HarnessError::Precondition("test code is empty"));
        }
        let ws = self.workspace_for(focal);
        if !ws.exists() {
            self.materialize(&ws)?;
        }
        let tests = ws.join(&self.adapter.test_root);
        if tests.exists() {
            fs::remove_dir_all(&tests).map_err(io_err(&tests))?;
        }
        let state = ws.join(STATE_DIR);
        if state.exists() {
            fs::remove_dir_all(&state).map_err(io_err(&state))?;
        }
        let file = self.adapter.test_file(&ws, focal);
        fs::create_dir_all(file.parent().expect("test file has a parent")).map_err(io_err(&file))?;
        fs::write(&file, &artifact.code).map_err(io_err(&file))?;
        Ok(ws)
    }

    fn compile(&self, workspace: &Path, focal: &FocalUnit) -> Result<PhaseOutcome, HarnessError> {
        let command = self.adapter.render(&self.adapter.compile_command, workspace, focal);
        let (code, raw_log, duration) = self.run(Phase::Compile, &command, self.adapter.timeout_compile, workspace)?;
        let status = if code.is_some() { PhaseStatus::Completed } else { PhaseStatus::TimedOut };
        let success = code == Some(0) && !self.profile.has_compile_error_marker(&raw_log);
        Ok(PhaseOutcome { phase: Phase::Compile, success, status, raw_log, stack_traces: Vec::new(), duration })
    }

    fn execute(&self, workspace: &Path, focal: &FocalUnit) -> Result<PhaseOutcome, HarnessError> {
        let command = self.adapter.render(&self.adapter.run_command, workspace, focal);
        let (code, raw_log, duration) = self.run(Phase::Runtime, &command, self.adapter.timeout_run, workspace)?;
        let stack_traces = split_traces(&raw_log, &self.profile);
        let success = code == Some(0) && stack_traces.is_empty();
        let status = match code {
            None => PhaseStatus::TimedOut,
            Some(c) if c != 0 && stack_traces.is_empty() => PhaseStatus::Crashed,
            Some(_) => PhaseStatus::Completed,
        };
        Ok(PhaseOutcome { phase: Phase::Runtime, success, status, raw_log, stack_traces, duration })
    }

    fn coverage(&self, workspace: &Path, focal: &FocalUnit) -> Result<CoverageDocument, HarnessError> {
        if let Some(template) = &self.adapter.coverage_command {
            let command = self.adapter.render(template, workspace, focal);
            self.run(Phase::Runtime, &command, self.adapter.timeout_run, workspace)?;
        }
        let path = self.adapter.report_path(workspace);
        let text = fs::read_to_string(&path).map_err(|_| HarnessError::ReportMissing(path.display().to_string()))?;
        Ok(CoverageDocument { format: self.adapter.coverage_format, text })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArtifactState;
    use std::collections::BTreeMap;

    fn focal() -> FocalUnit {
        FocalUnit {
            id: "shop.Cart#add(int)".into(),
            slug: "shop.Cart-add".into(),
            source_path: "src/main/java/shop/Cart.java".into(),
            package: Some("shop".into()),
            class_name: "Cart".into(),
            method_name: "add".into(),
            signature: "int add(int)".into(),
            body_span: (1, 1),
            compressed_context: String::new(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        }
    }

    fn artifact(code: &str) -> TestArtifact {
        TestArtifact {
            id: "a".into(),
            code: code.into(),
            state: ArtifactState::Candidate,
            round: 1,
            parent_id: None,
            repair_trace: Vec::new(),
            assertion_count: 0,
        }
    }

    fn harness(adapter: ToolchainAdapter) -> (tempfile::TempDir, ShellHarness) {
        let dir = tempfile::tempdir().unwrap();
        let project = dir.path().join("project");
        fs::create_dir_all(project.join("src/main/java/shop")).unwrap();
        fs::create_dir_all(project.join("src/test/java/shop")).unwrap();
        fs::write(project.join("src/main/java/shop/Cart.java"), "class Cart {}").unwrap();
        fs::write(project.join("src/test/java/shop/CartTest.java"), "human").unwrap();
        let h = ShellHarness::new(project, dir.path().join("work"), adapter, FrameworkProfile::junit4());
        (dir, h)
    }

    fn adapter(compile: &str, run: &str) -> ToolchainAdapter {
        ToolchainAdapter { compile_command: compile.into(), run_command: run.into(), ..ToolchainAdapter::default() }
    }

    fn files_under(p: &Path) -> Vec<String> {
        let mut v: Vec<String> = WalkDir::new(p)
            .into_iter()
            .flatten()
            .filter(|e| e.file_type().is_file())
            .map(|e| e.path().strip_prefix(p).unwrap().display().to_string())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn workspace_holds_exactly_one_generated_test() {
        let (_d, h) = harness(ToolchainAdapter::default());
        let ws = h.prepare_workspace(&focal(), &artifact("class CartGenTest { int v = 1; }")).unwrap();
        let ws2 = h.prepare_workspace(&focal(), &artifact("class CartGenTest { int v = 2; }")).unwrap();
        assert_eq!(ws, ws2);
        assert_eq!(files_under(&ws), vec!["src/main/java/shop/Cart.java", "src/test/java/shop/CartGenTest.java"]);
        assert!(fs::read_to_string(ws.join("src/test/java/shop/CartGenTest.java")).unwrap().contains("v = 2"));
        assert_eq!(fs::read_to_string(h.project_root.join("src/test/java/shop/CartTest.java")).unwrap(), "human");
        assert!(matches!(h.prepare_workspace(&focal(), &artifact("  ")), Err(HarnessError::Precondition(_))));
    }

    #[test]
    fn compile_success_requires_clean_log() {
        let (_d, h) = harness(adapter("echo ok {{workspace}}", "true {{workspace}}"));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        assert!(h.compile(&ws, &focal()).unwrap().success);

        let (_d, h) = harness(adapter("echo 'T.java:3: error: cannot find symbol' {{workspace}}", "true"));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        let out = h.compile(&ws, &focal()).unwrap();
        assert!(!out.success);
        assert!(out.raw_log.contains("cannot find symbol"));
        assert!(ws.join(".coevo/compile.log").exists());
    }

    #[test]
    fn missing_toolchain() {
        let (_d, h) = harness(adapter("no-such-toolchain-xyz {{workspace}}", "true"));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        assert!(matches!(h.compile(&ws, &focal()), Err(HarnessError::ToolchainMissing(c)) if c == "no-such-toolchain-xyz"));
    }

    #[test]
    fn execute_splits_failures() {
        let script = "printf 'JUnit version 4.12\\n.E\\nTime: 0.01\\nThere was 1 failure:\\n1) testAdd(shop.CartGenTest)\\njava.lang.AssertionError\\n\\tat org.junit.Assert.fail(Assert.java:86)\\n\\tat shop.CartGenTest.testAdd(CartGenTest.java:9)\\n\\nFAILURES!!!\\nTests run: 1,  Failures: 1\\n'; exit 1 # {{workspace}}";
        let (_d, h) = harness(adapter("true {{workspace}}", script));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        let out = h.execute(&ws, &focal()).unwrap();
        assert!(!out.success);
        assert_eq!(out.status, PhaseStatus::Completed);
        assert_eq!(out.stack_traces.len(), 1);
        assert!(out.stack_traces[0].starts_with("java.lang.AssertionError"));

        let (_d, h) = harness(adapter("true {{workspace}}", "echo 'OK (2 tests)' {{workspace}}"));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        let out = h.execute(&ws, &focal()).unwrap();
        assert!(out.success && out.stack_traces.is_empty());

        let (_d, h) = harness(adapter("true {{workspace}}", "echo boom; exit 3 # {{workspace}}"));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        assert_eq!(h.execute(&ws, &focal()).unwrap().status, PhaseStatus::Crashed);
    }

    #[test]
    fn execute_times_out() {
        let mut a = adapter("true {{workspace}}", "while :; do :; done # {{workspace}}");
        a.timeout_run = 1;
        let (_d, h) = harness(a);
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        let started = Instant::now();
        let out = h.execute(&ws, &focal()).unwrap();
        assert_eq!(out.status, PhaseStatus::TimedOut);
        assert!(!out.success);
        assert!(started.elapsed() < Duration::from_secs(10));
    }

    #[test]
    fn placeholders_and_report() {
        let (_d, h) = harness(adapter("true {{workspace}}", "echo '[]' > {{report}} # {{test_class}} {{test_file}} {{workspace}}"));
        let ws = h.prepare_workspace(&focal(), &artifact("x")).unwrap();
        assert!(matches!(h.coverage(&ws, &focal()), Err(HarnessError::ReportMissing(_))));
        fs::create_dir_all(ws.join(STATE_DIR)).unwrap();
        assert!(h.execute(&ws, &focal()).unwrap().success);
        assert_eq!(h.coverage(&ws, &focal()).unwrap().text.trim(), "[]");
        let rendered = h.adapter.render("{{test_class}} {{test_file}}", &ws, &focal());
        assert!(rendered.starts_with("shop.CartGenTest "));
        assert!(rendered.ends_with("src/test/java/shop/CartGenTest.java"));
    }

    #[test]
    fn adapter_validation() {
        assert!(ToolchainAdapter::default().validate().is_ok());
        let bad = ToolchainAdapter { compile_command: "javac".into(), timeout_run: 0, ..ToolchainAdapter::default() };
        assert_eq!(bad.validate().unwrap_err().len(), 2);
    }
}
