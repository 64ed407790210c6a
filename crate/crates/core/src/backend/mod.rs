//! Decompiler backends and output post-processing.
//!
//! Every backend is an external command described by a template; the
//! passthrough `file` backend reads pre-recorded output instead, which keeps
//! the downstream pipeline testable without any decompiler installed.

mod normalize;
pub mod scan;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryTarget, Origin, SourceUnit, UnitKind};
use crate::sandbox::{run_tool, Sandbox};

pub use normalize::{normalize, Normalizer, DEFAULT_PRELUDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    RuleBased,
    Lifting,
    MlBased,
    Passthrough,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::RuleBased => "rule-based",
            BackendKind::Lifting => "lifting",
            BackendKind::MlBased => "ml-based",
            BackendKind::Passthrough => "passthrough",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    /// Shell-quoted argv with `{binary}`, `{out}` and `{workdir}`
    /// placeholders. Output is read from `{out}` when present, stdout
    /// otherwise.
    #[serde(default)]
    pub command: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    pub kind: BackendKind,
}

fn default_timeout_s() -> u64 {
    600
}

impl BackendDescriptor {
    pub fn new(name: &str, command: &str, timeout_s: u64, kind: BackendKind) -> Result<Self> {
        let desc = BackendDescriptor {
            name: name.to_owned(),
            command: command.to_owned(),
            timeout_s,
            kind,
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn passthrough() -> Self {
        BackendDescriptor {
            name: "file".into(),
            command: String::new(),
            timeout_s: 1,
            kind: BackendKind::Passthrough,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidBackend {
            name: self.name.clone(),
            reason: reason.to_owned(),
        };
        if self.name.is_empty() {
            return Err(invalid("empty name"));
        }
        if self.timeout_s == 0 {
            return Err(invalid("timeout must be positive"));
        }
        if self.kind != BackendKind::Passthrough {
            if !self.command.contains("{binary}") {
                return Err(invalid("command template lacks {binary}"));
            }
            if shlex::split(&self.command).is_none_or(|argv| argv.is_empty()) {
                return Err(invalid("command template is not valid shell quoting"));
            }
        }
        Ok(())
    }

    fn argv(&self, binary: &Path, out: &Path, workdir: &Path) -> Vec<String> {
        shlex::split(&self.command)
            .unwrap_or_default()
            .into_iter()
            .map(|arg| {
                arg.replace("{binary}", &binary.to_string_lossy())
                    .replace("{out}", &out.to_string_lossy())
                    .replace("{workdir}", &workdir.to_string_lossy())
            })
            .collect()
    }
}

/// Named backends; names are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendRegistry {
    backends: BTreeMap<String, BackendDescriptor>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let builtin = [
            BackendDescriptor {
                name: "ghidra".into(),
                command: "analyzeHeadless {workdir} a4d -import {binary} -scriptPath scripts/ghidra \
                          -postScript ExportDecompiled.java {out} -deleteProject"
                    .into(),
                timeout_s: 600,
                kind: BackendKind::RuleBased,
            },
            BackendDescriptor {
                name: "retdec".into(),
                command: "retdec-decompiler {binary} -o {out}".into(),
                timeout_s: 600,
                kind: BackendKind::MlBased,
            },
            BackendDescriptor {
                name: "angr-bridge".into(),
                command: "python3 scripts/angr_adapter.py {binary}".into(),
                timeout_s: 600,
                kind: BackendKind::Lifting,
            },
            BackendDescriptor::passthrough(),
        ];
        BackendRegistry {
            backends: builtin.into_iter().map(|b| (b.name.clone(), b)).collect(),
        }
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            backends: BTreeMap::new(),
        }
    }

    /// Adds a backend; fails if the name is taken.
    pub fn register(&mut self, desc: BackendDescriptor) -> Result<()> {
        desc.validate()?;
        if self.backends.contains_key(&desc.name) {
            return Err(Error::InvalidBackend {
                name: desc.name,
                reason: "name already registered".into(),
            });
        }
        self.backends.insert(desc.name.clone(), desc);
        Ok(())
    }

    /// Adds or replaces a backend (config files override built-ins).
    pub fn upsert(&mut self, desc: BackendDescriptor) -> Result<()> {
        desc.validate()?;
        self.backends.insert(desc.name.clone(), desc);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&BackendDescriptor> {
        self.backends
            .get(name)
            .ok_or_else(|| Error::UnknownBackend(name.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &BackendDescriptor> {
        self.backends.values()
    }
}

/// Exit codes of the angr bridge script.
fn bridge_exit_meaning(code: i32) -> Option<&'static str> {
    match code {
        10 => Some("binary could not be loaded"),
        11 => Some("every function failed to decompile"),
        12 => Some("no functions recovered"),
        _ => None,
    }
}

/// Runs `backend` on `target` and returns its raw (unnormalized) output.
pub fn decompile(backend: &BackendDescriptor, target: &BinaryTarget, sandbox: &Sandbox) -> Result<SourceUnit> {
    let fail = |detail: String| Error::ToolFailure {
        tool: backend.name.clone(),
        detail,
    };
    if !target.path.is_file() {
        return Err(fail(format!("{}: no such binary", target.path.display())));
    }
    let text = match backend.kind {
        BackendKind::Passthrough => {
            let sidecar = target.sidecar_path();
            fs::read_to_string(&sidecar).map_err(|e| fail(format!("{}: {e}", sidecar.display())))?
        }
        _ => {
            let workdir = sandbox.tempdir("a4d-decompile-")?;
            let out = workdir.path().join("out.c");
            let binary = target
                .path
                .canonicalize()
                .map_err(|e| fail(format!("{}: {e}", target.path.display())))?;
            let argv = backend.argv(&binary, &out, workdir.path());
            let (program, args) = argv
                .split_first()
                .ok_or_else(|| fail("empty command template".into()))?;
            let cwd = std::env::current_dir().map_err(|e| Error::io("resolving working directory", e))?;
            let output = run_tool(program, args, &cwd, Duration::from_secs(backend.timeout_s))
                .map_err(|e| match e {
                    Error::ToolTimeout { timeout_s, .. } => Error::ToolTimeout {
                        tool: backend.name.clone(),
                        timeout_s,
                    },
                    Error::ToolMissing { tool } => Error::ToolMissing { tool },
                    other => other,
                })?;
            if !output.success() {
                let mut detail = format!("{}", output.exit);
                if let crate::model::ProcessExit::Code(code) = output.exit {
                    if let Some(meaning) = bridge_exit_meaning(code) {
                        detail.push_str(&format!(" ({meaning})"));
                    }
                }
                if !output.stderr.trim().is_empty() {
                    detail.push_str(": ");
                    detail.push_str(output.stderr.trim());
                }
                return Err(fail(detail));
            }
            if backend.command.contains("{out}") {
                fs::read_to_string(&out).map_err(|e| fail(format!("reading {}: {e}", out.display())))?
            } else {
                String::from_utf8_lossy(&output.stdout).into_owned()
            }
        }
    };
    tracing::debug!(backend = %backend.name, binary = %target.id.short(), bytes = text.len(), "raw decompiler output");
    if text.trim().is_empty() {
        return Err(Error::EmptyOutput {
            backend: backend.name.clone(),
        });
    }
    let text = text.replace('\0', "");
    SourceUnit::new(text, Origin::Decompiler(backend.name.clone()), UnitKind::Standalone)
}

/// True when no non-`main` function with a real body survives, or, given
/// `target_symbol`, when that symbol has no real body.
pub fn detect_empty_body(source: &SourceUnit, target_symbol: Option<&str>) -> bool {
    let defs = scan::function_definitions(source.code());
    match target_symbol {
        Some(symbol) => !defs.iter().any(|d| d.name == symbol && !d.is_trivial()),
        None => !defs.iter().any(|d| d.name != "main" && !d.is_trivial()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::os::unix::fs::PermissionsExt;

    fn unit(code: &str) -> SourceUnit {
        SourceUnit::new(code, Origin::Decompiler("file".into()), UnitKind::Standalone).unwrap()
    }

    fn target_with(dir: &Path, sidecar: Option<&str>) -> BinaryTarget {
        let bin = dir.join("foo.bin");
        fs::write(&bin, b"\x7fELF").unwrap();
        if let Some(text) = sidecar {
            fs::write(dir.join("foo.c"), text).unwrap();
        }
        BinaryTarget::open(&bin).unwrap()
    }

    #[test]
    fn passthrough_reads_sidecar_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let text = "// Generated by Ghidra\nint main(){return 0;}\n";
        let target = target_with(dir.path(), Some(text));
        let su = decompile(&BackendDescriptor::passthrough(), &target, &Sandbox::default()).unwrap();
        assert_eq!(su.code(), text);
        assert_eq!(su.origin, Origin::Decompiler("file".into()));
    }

    #[test]
    fn missing_binary_is_tool_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut target = target_with(dir.path(), Some("int x;"));
        target.path = dir.path().join("gone.bin");
        for backend in BackendRegistry::default().iter() {
            let err = decompile(backend, &target, &Sandbox::default()).unwrap_err();
            assert!(matches!(err, Error::ToolFailure { .. }), "{}: {err}", backend.name);
        }
    }

    #[test]
    fn missing_sidecar_is_tool_failure() {
        let dir = tempfile::tempdir().unwrap();
        let target = target_with(dir.path(), None);
        let err = decompile(&BackendDescriptor::passthrough(), &target, &Sandbox::default()).unwrap_err();
        assert!(matches!(err, Error::ToolFailure { .. }));
    }

    #[test]
    fn empty_sidecar_is_empty_output() {
        let dir = tempfile::tempdir().unwrap();
        let target = target_with(dir.path(), Some("  \n"));
        let err = decompile(&BackendDescriptor::passthrough(), &target, &Sandbox::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyOutput { .. }));
    }

    #[test]
    fn command_backend_stdout_and_out_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = target_with(dir.path(), None);
        let stdout_backend =
            BackendDescriptor::new("echoer", "sh -c 'echo \"int main(){return 0;}\"' {binary}", 5, BackendKind::Lifting)
                .unwrap();
        let su = decompile(&stdout_backend, &target, &Sandbox::default()).unwrap();
        assert_eq!(su.code(), "int main(){return 0;}\n");

        let file_backend = BackendDescriptor::new(
            "writer",
            "sh -c 'printf \"int f(void){return 1;}\" > \"$1\"' sh {out} {binary}",
            5,
            BackendKind::RuleBased,
        )
        .unwrap();
        let su = decompile(&file_backend, &target, &Sandbox::default()).unwrap();
        assert_eq!(su.code(), "int f(void){return 1;}");
    }

    #[test]
    fn command_backend_errors() {
        let dir = tempfile::tempdir().unwrap();
        let target = target_with(dir.path(), None);
        let sb = Sandbox::default();

        let missing = BackendDescriptor::new("m", "a4d-missing-decompiler {binary}", 5, BackendKind::RuleBased).unwrap();
        assert!(matches!(decompile(&missing, &target, &sb), Err(Error::ToolMissing { .. })));

        let slow = BackendDescriptor::new("s", "sh -c 'sleep 30' {binary}", 1, BackendKind::RuleBased).unwrap();
        assert!(matches!(decompile(&slow, &target, &sb), Err(Error::ToolTimeout { .. })));

        let failing =
            BackendDescriptor::new("f", "sh -c 'echo boom >&2; exit 3' {binary}", 5, BackendKind::RuleBased).unwrap();
        match decompile(&failing, &target, &sb) {
            Err(Error::ToolFailure { detail, .. }) => assert!(detail.contains("boom"), "{detail}"),
            other => panic!("{other:?}"),
        }

        let silent = BackendDescriptor::new("e", "true {binary}", 5, BackendKind::RuleBased).unwrap();
        assert!(matches!(decompile(&silent, &target, &sb), Err(Error::EmptyOutput { .. })));
    }

    #[test]
    fn bridge_protocol_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let target = target_with(dir.path(), None);
        let script = dir.path().join("bridge.sh");
        fs::write(&script, "#!/bin/sh\necho 'loading' >&2\nexit 12\n").unwrap();
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
        let backend = BackendDescriptor::new(
            "angr-bridge",
            &format!("{} {{binary}}", script.display()),
            5,
            BackendKind::Lifting,
        )
        .unwrap();
        match decompile(&backend, &target, &Sandbox::default()) {
            Err(Error::ToolFailure { detail, .. }) => assert!(detail.contains("no functions recovered"), "{detail}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn descriptor_validation() {
        assert!(BackendDescriptor::new("x", "tool --in foo", 5, BackendKind::RuleBased).is_err());
        assert!(BackendDescriptor::new("x", "tool {binary}", 0, BackendKind::RuleBased).is_err());
        assert!(BackendDescriptor::new("x", "tool 'unclosed {binary}", 5, BackendKind::RuleBased).is_err());
        let mut reg = BackendRegistry::default();
        assert!(reg.register(BackendDescriptor::passthrough()).is_err());
        assert!(reg.get("ghidra").is_ok());
        assert!(matches!(reg.get("ida"), Err(Error::UnknownBackend(_))));
    }

    #[test]
    fn empty_body_detection() {
        assert!(detect_empty_body(&unit("int main(){return 0;}"), Some("iorder")));
        assert!(detect_empty_body(&unit("int main(){return 0;}"), None));
        let with_body = "int iorder(int *a, int *b) {\n  int t = *a;\n  *a = *b;\n  *b = t;\n  return 0;\n}\nint main(){return 0;}";
        assert!(!detect_empty_body(&unit(with_body), Some("iorder")));
        assert!(!detect_empty_body(&unit(with_body), None));
        // declaration only
        assert!(detect_empty_body(&unit("int iorder(int *a);\nint main(){return iorder(0);}"), Some("iorder")));
    }

    #[test]
    fn empty_body_on_inlined_o3_sample() {
        // hand-written in the shape of an O3 export where the helper was
        // folded into main and only main survived
        let code = include_str!("../../tests/fixtures/ghidra_o3_inlined.c");
        assert!(detect_empty_body(&unit(code), Some("iorder")));
        assert!(!detect_empty_body(&unit(code), Some("main")));
    }
}
