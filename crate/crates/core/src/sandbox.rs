//! Runs candidate programs in child processes and scores what they write.
//!
//! Each evaluation gets its own scratch directory. The candidate source is
//! wrapped with the problem's prelude and the schema's footer, which calls
//! the entry point and writes the JSON payload to `EVO_SOLUTION_PATH`. The
//! child runs in its own process group, without network access by default,
//! under an address-space limit. Every process it spawns inherits a
//! per-evaluation token in its environment, so stragglers that escape the
//! process group are still found and killed.

use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::load_text;
use crate::model::{CandidateRecord, EvaluationOutcome, EvaluationStatus, ProblemSpec};
use crate::verifiers::{VerifierError, VerifierRegistry};

pub const SOLUTION_PATH_ENV: &str = "EVO_SOLUTION_PATH";
const TOKEN_ENV: &str = "EVO_SANDBOX_TOKEN";
const SOURCE_PLACEHOLDER: &str = "{source_path}";
const STDERR_EXCERPT_BYTES: u64 = 4096;
pub const DEFAULT_MEMORY_LIMIT: u64 = 4 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    /// argv; `{source_path}` is replaced by the assembled program's path.
    pub interpreter_command: Vec<String>,
    /// Overrides the problem's time limit when set.
    pub time_limit: Option<f64>,
    /// Address-space cap in bytes; `None` disables it.
    pub memory_limit: Option<u64>,
    pub worker_count: usize,
    pub network_allowed: bool,
    pub scratch_dir: PathBuf,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            interpreter_command: vec!["python3".into(), SOURCE_PLACEHOLDER.into()],
            time_limit: None,
            memory_limit: Some(DEFAULT_MEMORY_LIMIT),
            worker_count: 1,
            network_allowed: false,
            scratch_dir: std::env::temp_dir(),
        }
    }
}

/// Failures of the harness itself. These are never recorded as candidate
/// outcomes.
#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("sandbox I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("invalid sandbox configuration: {0}")]
    Config(String),
    #[error("problem `{problem}` cannot be evaluated: {reason}")]
    Problem { problem: String, reason: String },
}

pub struct Sandbox {
    cfg: SandboxConfig,
    registry: Arc<VerifierRegistry>,
}

struct Assembled {
    program: String,
    time_limit: f64,
}

impl Sandbox {
    pub fn new(cfg: SandboxConfig, registry: Arc<VerifierRegistry>) -> Result<Self, SandboxError> {
        if cfg.worker_count == 0 {
            return Err(SandboxError::Config("worker_count must be at least 1".into()));
        }
        if cfg.interpreter_command.is_empty() {
            return Err(SandboxError::Config("interpreter_command is empty".into()));
        }
        if let Some(t) = cfg.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SandboxError::Config(format!("time_limit must be positive, got {t}")));
            }
        }
        Ok(Self { cfg, registry })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.cfg
    }

    pub fn registry(&self) -> &VerifierRegistry {
        &self.registry
    }

    fn assemble(&self, source: &str, problem: &ProblemSpec) -> Result<Assembled, SandboxError> {
        let problem_err = |reason: String| SandboxError::Problem {
            problem: problem.name.clone(),
            reason,
        };
        let schema = self
            .registry
            .schema(&problem.solution_schema_id)
            .ok_or_else(|| problem_err(format!("unknown solution schema `{}`", problem.solution_schema_id)))?;
        let prelude = match &problem.prelude_path {
            Some(p) => load_text(p).map_err(|e| problem_err(format!("prelude {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut program = String::with_capacity(prelude.len() + source.len() + schema.footer.len() + 2);
        program.push_str(&prelude);
        program.push_str(source);
        if !source.ends_with('\n') {
            program.push('\n');
        }
        program.push_str(&schema.footer);
        Ok(Assembled {
            program,
            time_limit: self.cfg.time_limit.unwrap_or(problem.time_limit),
        })
    }

    pub fn evaluate(&self, candidate: &CandidateRecord, problem: &ProblemSpec) -> Result<EvaluationOutcome, SandboxError> {
        self.evaluate_source(&candidate.source_text, problem)
    }

    /// Runs one program and scores its payload. Infrastructure failures are
    /// retried once before being reported.
    pub fn evaluate_source(&self, source: &str, problem: &ProblemSpec) -> Result<EvaluationOutcome, SandboxError> {
        if source.trim().is_empty() {
            return Ok(EvaluationOutcome::failure(EvaluationStatus::ParseFailure, "empty program", 0.0));
        }
        let assembled = self.assemble(source, problem)?;
        match self.run_once(&assembled, problem) {
            Err(SandboxError::Io(e)) => {
                warn!("sandbox infrastructure error, retrying once: {e}");
                self.run_once(&assembled, problem)
            }
            other => other,
        }
    }

    fn run_once(&self, assembled: &Assembled, problem: &ProblemSpec) -> Result<EvaluationOutcome, SandboxError> {
        let dir = tempfile::Builder::new().prefix("evo-eval-").tempdir_in(&self.cfg.scratch_dir)?;
        let source_path = dir.path().join("candidate.py");
        let solution_path = dir.path().join("solution.json");
        let stderr_path = dir.path().join("stderr.txt");
        std::fs::write(&source_path, &assembled.program)?;
        let stderr_file = File::create(&stderr_path)?;

        let token = {
            let mut bytes = [0u8; 16];
            rand::rng().fill_bytes(&mut bytes);
            hex::encode(bytes)
        };
        let argv: Vec<String> = self
            .cfg
            .interpreter_command
            .iter()
            .map(|a| a.replace(SOURCE_PLACEHOLDER, &source_path.to_string_lossy()))
            .collect();
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(dir.path())
            .env(SOLUTION_PATH_ENV, &solution_path)
            .env(TOKEN_ENV, &token)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::from(stderr_file))
            .process_group(0);
        let memory_limit = self.cfg.memory_limit;
        let isolate_network = !self.cfg.network_allowed;
        // SAFETY: the closure only makes async-signal-safe libc calls.
        unsafe {
            cmd.pre_exec(move || child_setup(memory_limit, isolate_network));
        }

        let start = Instant::now();
        let mut child = cmd.spawn()?;
        let deadline = Duration::from_secs_f64(assembled.time_limit);
        let exit = wait_with_deadline(&mut child, start, deadline, &token)?;
        let wall_time = start.elapsed().as_secs_f64();

        // The scratch path is random; hide it so tracebacks are reproducible.
        let stderr = read_tail(&stderr_path, STDERR_EXCERPT_BYTES)
            .unwrap_or_default()
            .replace(&*dir.path().to_string_lossy(), "<sandbox>");
        let status = match exit {
            None => {
                return Ok(EvaluationOutcome::failure(
                    EvaluationStatus::Timeout,
                    format!("killed after {:.1} s time limit\n{stderr}", assembled.time_limit),
                    wall_time,
                ))
            }
            Some(status) => status,
        };
        if !status.success() {
            let how = match (status.code(), status.signal()) {
                (Some(c), _) => format!("exit code {c}"),
                (None, Some(s)) => format!("killed by signal {s}"),
                _ => "abnormal exit".into(),
            };
            return Ok(EvaluationOutcome::failure(
                EvaluationStatus::RuntimeError,
                format!("{how}\n{stderr}"),
                wall_time,
            ));
        }

        let payload = match std::fs::read(&solution_path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Ok(EvaluationOutcome::failure(
                    EvaluationStatus::ParseFailure,
                    format!("no solution payload written\n{stderr}"),
                    wall_time,
                ))
            }
            Err(e) => return Err(e.into()),
        };
        let value: serde_json::Value = match serde_json::from_slice(&payload) {
            Ok(v) => v,
            Err(e) => {
                return Ok(EvaluationOutcome::failure(
                    EvaluationStatus::ParseFailure,
                    format!("unparseable payload: {e}\n{stderr}"),
                    wall_time,
                ))
            }
        };
        Ok(match self.registry.score(&problem.verifier_id, &value) {
            Ok(score) if score.is_finite() => EvaluationOutcome::success(score, value, wall_time),
            Ok(score) => EvaluationOutcome::failure(
                EvaluationStatus::InvalidSolution,
                format!("verifier produced non-finite score {score}"),
                wall_time,
            ),
            Err(VerifierError::Schema(m)) => {
                EvaluationOutcome::failure(EvaluationStatus::ParseFailure, format!("schema mismatch: {m}"), wall_time)
            }
            Err(VerifierError::Invalid(m)) => {
                EvaluationOutcome::failure(EvaluationStatus::InvalidSolution, format!("invalid: {m}"), wall_time)
            }
            Err(e) => {
                return Err(SandboxError::Problem {
                    problem: problem.name.clone(),
                    reason: e.to_string(),
                })
            }
        })
    }

    /// Evaluates independent programs on up to `worker_count` workers.
    /// Results are positionally aligned with the input. An infrastructure
    /// error stops the batch.
    pub fn evaluate_batch(&self, sources: &[&str], problem: &ProblemSpec) -> Result<Vec<EvaluationOutcome>, SandboxError> {
        let slots: Vec<Mutex<Option<EvaluationOutcome>>> = sources.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let failure: Mutex<Option<SandboxError>> = Mutex::new(None);
        let workers = self.cfg.worker_count.min(sources.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| {
                    while !abort.load(Ordering::SeqCst) {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= sources.len() {
                            break;
                        }
                        match self.evaluate_source(sources[i], problem) {
                            Ok(o) => *slots[i].lock().expect("slot") = Some(o),
                            Err(e) => {
                                abort.store(true, Ordering::SeqCst);
                                failure.lock().expect("failure").get_or_insert(e);
                            }
                        }
                    }
                });
            }
        });
        if let Some(e) = failure.into_inner().expect("failure") {
            return Err(e);
        }
        Ok(slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot").expect("every slot filled"))
            .collect())
    }
}

fn child_setup(memory_limit: Option<u64>, isolate_network: bool) -> io::Result<()> {
    if let Some(bytes) = memory_limit {
        let lim = libc::rlimit {
            rlim_cur: bytes as libc::rlim_t,
            rlim_max: bytes as libc::rlim_t,
        };
        // SAFETY: plain syscall on a valid struct.
        if unsafe { libc::setrlimit(libc::RLIMIT_AS, &lim) } != 0 {
            return Err(io::Error::last_os_error());
        }
    }
    if isolate_network {
        // SAFETY: plain syscalls; an unprivileged caller needs a user namespace first.
        let ok = unsafe {
            libc::unshare(libc::CLONE_NEWNET) == 0 || libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) == 0
        };
        if !ok {
            return Err(io::Error::last_os_error());
        }
    }
    Ok(())
}

/// Waits for the child without reaping it until its process group has been
/// killed, so the group id cannot be reused in between. `None` means the
/// deadline passed.
fn wait_with_deadline(
    child: &mut Child,
    start: Instant,
    deadline: Duration,
    token: &str,
) -> io::Result<Option<ExitStatus>> {
    let pid = child.id() as libc::pid_t;
    let mut pause = Duration::from_millis(1);
    let timed_out = loop {
        // SAFETY: zeroed siginfo is a valid out-parameter for waitid.
        let mut info: libc::siginfo_t = unsafe { std::mem::zeroed() };
        let rc = unsafe {
            libc::waitid(
                libc::P_PID,
                pid as libc::id_t,
                &mut info,
                libc::WEXITED | libc::WNOHANG | libc::WNOWAIT,
            )
        };
        if rc != 0 {
            let e = io::Error::last_os_error();
            if e.kind() == io::ErrorKind::Interrupted {
                continue;
            }
            return Err(e);
        }
        // SAFETY: si_pid is valid to read after a successful waitid.
        if unsafe { info.si_pid() } == pid {
            break false;
        }
        if start.elapsed() >= deadline {
            break true;
        }
        std::thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(25));
    };
    if timed_out {
        debug!("candidate {pid} exceeded its time limit");
        kill_descendants(pid);
    }
    // SAFETY: pid is our own child's group, still held by the unreaped leader.
    unsafe {
        libc::killpg(pid, libc::SIGKILL);
    }
    reap_token_holders(token);
    let status = child.wait()?;
    Ok(if timed_out { None } else { Some(status) })
}

fn proc_pids() -> Vec<libc::pid_t> {
    let Ok(entries) = std::fs::read_dir("/proc") else {
        return Vec::new();
    };
    entries
        .filter_map(|e| e.ok()?.file_name().to_str()?.parse().ok())
        .collect()
}

fn parent_of(pid: libc::pid_t) -> Option<libc::pid_t> {
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // the command name may contain spaces; fields resume after the last ')'
    let rest = &stat[stat.rfind(')')? + 2..];
    rest.split(' ').nth(1)?.parse().ok()
}

/// SIGKILLs every live descendant of `root`, including ones that left its
/// process group.
fn kill_descendants(root: libc::pid_t) {
    let pids = proc_pids();
    let parents: Vec<(libc::pid_t, libc::pid_t)> = pids.iter().filter_map(|&p| Some((p, parent_of(p)?))).collect();
    let mut tree = vec![root];
    let mut i = 0;
    while i < tree.len() {
        let p = tree[i];
        tree.extend(parents.iter().filter(|&&(_, pp)| pp == p).map(|&(c, _)| c));
        i += 1;
    }
    for &p in &tree[1..] {
        // SAFETY: sending a signal has no memory-safety implications.
        unsafe {
            libc::kill(p, libc::SIGKILL);
        }
    }
}

fn holds_token(pid: libc::pid_t, needle: &[u8]) -> bool {
    match std::fs::read(format!("/proc/{pid}/environ")) {
        Ok(env) => env.split(|&b| b == 0).any(|kv| kv == needle),
        Err(_) => false,
    }
}

fn is_zombie(pid: libc::pid_t) -> bool {
    std::fs::read_to_string(format!("/proc/{pid}/stat"))
        .ok()
        .and_then(|s| s.rfind(')').map(|i| s[i + 2..].starts_with('Z')))
        .unwrap_or(true)
}

/// Kills any remaining process carrying this evaluation's token.
fn reap_token_holders(token: &str) {
    let needle = format!("{TOKEN_ENV}={token}").into_bytes();
    let me = std::process::id() as libc::pid_t;
    for _ in 0..10 {
        let live: Vec<libc::pid_t> = proc_pids()
            .into_iter()
            .filter(|&p| p != me && holds_token(p, &needle) && !is_zombie(p))
            .collect();
        if live.is_empty() {
            return;
        }
        for p in live {
            // SAFETY: sending a signal has no memory-safety implications.
            unsafe {
                libc::kill(p, libc::SIGKILL);
            }
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    warn!("processes with sandbox token {token} survived repeated SIGKILL");
}

/// Pids of live processes started by any sandbox evaluation.
pub fn live_sandbox_processes() -> Vec<u32> {
    let prefix = format!("{TOKEN_ENV}=").into_bytes();
    let me = std::process::id() as libc::pid_t;
    proc_pids()
        .into_iter()
        .filter(|&p| p != me && !is_zombie(p))
        .filter(|&p| match std::fs::read(format!("/proc/{p}/environ")) {
            Ok(env) => env.split(|&b| b == 0).any(|kv| kv.starts_with(&prefix)),
            Err(_) => false,
        })
        .map(|p| p as u32)
        .collect()
}

fn read_tail(path: &Path, max: u64) -> io::Result<String> {
    let mut f = File::open(path)?;
    let len = f.metadata()?.len();
    f.seek(SeekFrom::Start(len.saturating_sub(max)))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}
