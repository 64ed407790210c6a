//! Resource-limited execution of untrusted binaries.
//!
//! Every child runs in its own process group and private working directory.
//! Wall-clock overruns are handled with SIGTERM to the group, a 500 ms grace
//! period, then SIGKILL. Memory is enforced by sampling the child's resident
//! set while it runs and by checking `ru_maxrss` once it has been reaped; an
//! address-space rlimit set before `exec` bounds what a single allocation
//! can reserve.

use std::ffi::OsStr;
use std::fs;
use std::io::{self, Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProcessExit, TestCase};

/// Grace period between SIGTERM and SIGKILL.
pub const KILL_GRACE: Duration = Duration::from_millis(500);

/// The address-space rlimit is this multiple of `memory_mb`. Allocations are
/// allowed to succeed past the resident limit so a breach is observable as a
/// kill rather than as an ordinary crash.
const ADDRESS_SPACE_FACTOR: u64 = 4;

const POLL_INTERVAL: Duration = Duration::from_millis(5);

const SANDBOX_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    pub wall_clock_s: u64,
    pub memory_mb: u64,
    pub max_stdout_bytes: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            wall_clock_s: 10,
            memory_mb: 256,
            max_stdout_bytes: 1 << 20,
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<()> {
        if self.wall_clock_s == 0 || self.memory_mb == 0 || self.max_stdout_bytes == 0 {
            return Err(Error::Config("execution limits must be positive".into()));
        }
        Ok(())
    }

    pub fn wall_clock(&self) -> Duration {
        Duration::from_secs(self.wall_clock_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    Timeout,
    MemoryKilled,
    LaunchError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    #[serde(with = "crate::model::b64")]
    pub stdout: Vec<u8>,
    pub stdout_truncated: bool,
    /// `None` only for `LaunchError`.
    pub exit: Option<ProcessExit>,
    pub wall_ms: u64,
    pub peak_rss_kb: u64,
    pub verdict: Verdict,
    /// Launch failure detail; empty otherwise.
    pub detail: String,
}

impl ExecutionRecord {
    fn launch_error(detail: String) -> Self {
        ExecutionRecord {
            stdout: Vec::new(),
            stdout_truncated: false,
            exit: None,
            wall_ms: 0,
            peak_rss_kb: 0,
            verdict: Verdict::LaunchError,
            detail,
        }
    }

    /// Exit status as reported in diagnostics; a launch failure reads as
    /// `exit 127`, the shell convention for "could not execute".
    pub fn reported_exit(&self) -> ProcessExit {
        self.exit.unwrap_or(ProcessExit::Code(127))
    }
}

/// Runs binaries under a common scratch root.
#[derive(Debug, Clone, Default)]
pub struct Sandbox {
    scratch_root: Option<PathBuf>,
}

impl Sandbox {
    pub fn new(scratch_root: Option<PathBuf>) -> Self {
        Sandbox { scratch_root }
    }

    pub(crate) fn tempdir(&self, prefix: &str) -> Result<tempfile::TempDir> {
        let mut builder = tempfile::Builder::new();
        builder.prefix(prefix);
        match &self.scratch_root {
            Some(root) => {
                fs::create_dir_all(root).map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
                builder.tempdir_in(root)
            }
            None => builder.tempdir(),
        }
        .map_err(|e| Error::io("creating scratch directory", e))
    }

    /// Runs `exe_path` on one test case. Program misbehavior is reported in
    /// the record's verdict, never as an `Err`.
    pub fn execute(&self, exe_path: &Path, case: &TestCase, limits: &ExecLimits) -> ExecutionRecord {
        let workdir = match self.tempdir("a4d-exec-") {
            Ok(dir) => dir,
            Err(e) => return ExecutionRecord::launch_error(e.to_string()),
        };
        let exe = match exe_path.canonicalize() {
            Ok(p) => p,
            Err(e) => return ExecutionRecord::launch_error(format!("{}: {e}", exe_path.display())),
        };
        let mut cmd = Command::new(&exe);
        cmd.args(&case.args)
            .current_dir(workdir.path())
            .env_clear()
            .env("PATH", SANDBOX_PATH)
            .env("LC_ALL", "C")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        let address_space = limits.memory_mb.saturating_mul(ADDRESS_SPACE_FACTOR) << 20;
        isolate(&mut cmd, Some(address_space));

        let started = Instant::now();
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => return ExecutionRecord::launch_error(format!("{}: {e}", exe.display())),
        };
        let stdin_writer = feed_stdin(&mut child, case.stdin.clone());
        let stdout_reader = capture(child.stdout.take(), limits.max_stdout_bytes);

        let outcome = supervise(&child, limits.wall_clock(), Some(limits.memory_mb << 10));
        let wall_ms = started.elapsed().as_millis() as u64;
        let (stdout, stdout_truncated) = stdout_reader.join().unwrap_or_default();
        if let Some(writer) = stdin_writer {
            let _ = writer.join();
        }

        let verdict = if outcome.timed_out {
            Verdict::Timeout
        } else if outcome.memory_exceeded || outcome.peak_rss_kb > limits.memory_mb << 10 {
            Verdict::MemoryKilled
        } else {
            Verdict::Completed
        };
        ExecutionRecord {
            stdout,
            stdout_truncated,
            exit: Some(outcome.exit),
            wall_ms,
            peak_rss_kb: outcome.peak_rss_kb,
            verdict,
            detail: String::new(),
        }
    }
}

/// Convenience wrapper using the system temp directory.
pub fn execute(exe_path: &Path, case: &TestCase, limits: &ExecLimits) -> ExecutionRecord {
    Sandbox::default().execute(exe_path, case, limits)
}

/// Output of an external tool (compiler, decompiler).
#[derive(Debug, Clone)]
pub(crate) struct ToolOutput {
    pub exit: ProcessExit,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl ToolOutput {
    pub fn success(&self) -> bool {
        self.exit == ProcessExit::Code(0)
    }
}

/// Runs a trusted tool with a timeout, capturing stdout and stderr.
pub(crate) fn run_tool<S: AsRef<OsStr>>(
    program: &str,
    args: &[S],
    cwd: &Path,
    timeout: Duration,
) -> Result<ToolOutput> {
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .env("LC_ALL", "C")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    isolate(&mut cmd, None);
    let child = cmd.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::ToolMissing {
            tool: program.to_owned(),
        },
        _ => Error::ToolFailure {
            tool: program.to_owned(),
            detail: e.to_string(),
        },
    })?;
    let mut child = child;
    let out = capture(child.stdout.take(), usize::MAX);
    let err = capture(child.stderr.take(), usize::MAX);
    let outcome = supervise(&child, timeout, None);
    let (stdout, _) = out.join().unwrap_or_default();
    let (stderr, _) = err.join().unwrap_or_default();
    if outcome.timed_out {
        return Err(Error::ToolTimeout {
            tool: program.to_owned(),
            timeout_s: timeout.as_secs(),
        });
    }
    Ok(ToolOutput {
        exit: outcome.exit,
        stdout,
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    })
}

fn isolate(cmd: &mut Command, address_space_bytes: Option<u64>) {
    // SAFETY: only async-signal-safe libc calls run between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            let no_core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            libc::setrlimit(libc::RLIMIT_CORE, &no_core);
            if let Some(bytes) = address_space_bytes {
                let lim = libc::rlimit {
                    rlim_cur: bytes as libc::rlim_t,
                    rlim_max: bytes as libc::rlim_t,
                };
                if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                    return Err(io::Error::last_os_error());
                }
            }
            Ok(())
        });
    }
}

fn feed_stdin(child: &mut Child, data: Vec<u8>) -> Option<thread::JoinHandle<()>> {
    let mut stdin = child.stdin.take()?;
    Some(thread::spawn(move || {
        // EPIPE just means the program stopped reading
        let _ = stdin.write_all(&data);
    }))
}

fn capture<R: Read + Send + 'static>(pipe: Option<R>, cap: usize) -> thread::JoinHandle<(Vec<u8>, bool)> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut truncated = false;
        let Some(mut pipe) = pipe else {
            return (kept, truncated);
        };
        let mut buf = [0u8; 8192];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
        (kept, truncated)
    })
}

struct Supervised {
    exit: ProcessExit,
    timed_out: bool,
    memory_exceeded: bool,
    peak_rss_kb: u64,
}

/// Waits for `child`, enforcing the wall clock and (optionally) a resident
/// memory cap in KiB. Always leaves the child's process group dead.
fn supervise(child: &Child, timeout: Duration, rss_cap_kb: Option<u64>) -> Supervised {
    let pid = child.id() as libc::pid_t;
    let started = Instant::now();
    let mut timed_out = false;
    let mut memory_exceeded = false;
    let mut terminated_at: Option<Instant> = None;
    let mut killed = false;

    let (status, rusage) = loop {
        if let Some(done) = try_reap(pid) {
            break done;
        }
        if let Some(cap) = rss_cap_kb {
            if !memory_exceeded && resident_kb(pid).is_some_and(|kb| kb > cap) {
                memory_exceeded = true;
                signal_group(pid, libc::SIGKILL);
                killed = true;
            }
        }
        match terminated_at {
            None if started.elapsed() >= timeout => {
                timed_out = true;
                signal_group(pid, libc::SIGTERM);
                terminated_at = Some(Instant::now());
            }
            Some(at) if !killed && at.elapsed() >= KILL_GRACE => {
                signal_group(pid, libc::SIGKILL);
                killed = true;
            }
            _ => {}
        }
        thread::sleep(POLL_INTERVAL);
    };
    // reap stragglers that stayed in the group (and keep our pipes from
    // being held open)
    signal_group(pid, libc::SIGKILL);

    let exit = if libc::WIFSIGNALED(status) {
        ProcessExit::Signal(libc::WTERMSIG(status))
    } else {
        ProcessExit::Code(libc::WEXITSTATUS(status))
    };
    Supervised {
        exit,
        timed_out,
        memory_exceeded,
        peak_rss_kb: rusage.ru_maxrss.max(0) as u64,
    }
}

fn try_reap(pid: libc::pid_t) -> Option<(libc::c_int, libc::rusage)> {
    let mut status: libc::c_int = 0;
    // SAFETY: rusage is plain old data; wait4 fills it on success.
    let mut rusage: libc::rusage = unsafe { std::mem::zeroed() };
    loop {
        // SAFETY: pid is our own unreaped child.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut rusage) };
        if r == pid {
            return Some((status, rusage));
        }
        if r == -1 && io::Error::last_os_error().kind() == io::ErrorKind::Interrupted {
            continue;
        }
        return None;
    }
}

fn signal_group(pid: libc::pid_t, sig: libc::c_int) {
    // SAFETY: the child made itself leader of group `pid` before exec.
    unsafe {
        libc::killpg(pid, sig);
    }
}

fn resident_kb(pid: libc::pid_t) -> Option<u64> {
    let statm = fs::read_to_string(format!("/proc/{pid}/statm")).ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    // SAFETY: sysconf has no preconditions.
    let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) }.max(4096) as u64;
    Some(pages * page / 1024)
}
