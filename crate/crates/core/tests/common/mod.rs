//! Builds a corpus directory from the seeded fixtures.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use a4d_core::agent::{Step, Transcript};
use a4d_core::ConstraintLevel;
use serde::Deserialize;
use serde_json::Value;

pub fn seeded_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/seeded")
}

#[derive(Debug, Deserialize)]
pub struct CaseMeta {
    pub opt_level: String,
    pub category: String,
    #[serde(default)]
    pub function: Option<String>,
    pub inputs: Vec<Value>,
    pub levels: Vec<ConstraintLevel>,
}

#[derive(Debug)]
pub struct SeededCase {
    pub name: String,
    pub dir: PathBuf,
    pub meta: CaseMeta,
    pub replies: Vec<String>,
}

impl SeededCase {
    pub fn harness(&self) -> Option<String> {
        fs::read_to_string(self.dir.join("harness.c")).ok()
    }

    pub fn decompiled(&self) -> String {
        fs::read_to_string(self.dir.join("decompiled.c")).unwrap()
    }

    pub fn repairs_expected(&self) -> u32 {
        self.meta.levels.len() as u32 - 1
    }
}

pub fn seeded_cases() -> Vec<SeededCase> {
    let mut names: Vec<String> = fs::read_dir(seeded_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let dir = seeded_dir().join(&name);
            let meta: CaseMeta = serde_json::from_str(&fs::read_to_string(dir.join("case.json")).unwrap()).unwrap();
            let mut replies = Vec::new();
            for i in 1.. {
                match fs::read_to_string(dir.join(format!("reply_{i}.txt"))) {
                    Ok(text) => replies.push(text),
                    Err(_) => break,
                }
            }
            SeededCase { name, dir, meta, replies }
        })
        .collect()
}

/// Compiles `sources` into `out` with the system compiler.
pub fn build_binary(sources: &[PathBuf], out: &Path) {
    let status = Command::new("cc")
        .arg("-O1")
        .args(sources)
        .arg("-o")
        .arg(out)
        .arg("-lm")
        .status()
        .expect("cc is available");
    assert!(status.success(), "building {}", out.display());
}

/// Lays out every seeded case under `root` (bin/, src/, inputs/, meta/,
/// harness/) and returns the transcript replaying each case's replies.
pub fn build_corpus(root: &Path, cases: &[SeededCase]) -> Transcript {
    for sub in ["bin", "src", "inputs", "meta", "harness"] {
        fs::create_dir_all(root.join(sub)).unwrap();
    }
    let mut transcript = Transcript::default();
    for case in cases {
        let mut sources = vec![case.dir.join("reference.c")];
        if case.harness().is_some() {
            sources.push(case.dir.join("harness.c"));
            fs::copy(case.dir.join("harness.c"), root.join("harness").join(format!("{}.c", case.name))).unwrap();
        }
        build_binary(&sources, &root.join("bin").join(&case.name));
        fs::copy(case.dir.join("decompiled.c"), root.join("src").join(format!("{}.c", case.name))).unwrap();
        fs::write(
            root.join("inputs").join(format!("{}.json", case.name)),
            serde_json::to_string(&case.meta.inputs).unwrap(),
        )
        .unwrap();
        let mut meta = serde_json::json!({
            "opt_level": case.meta.opt_level,
            "category": case.meta.category,
        });
        if let Some(f) = &case.meta.function {
            meta["function"] = Value::String(f.clone());
        }
        fs::write(root.join("meta").join(format!("{}.json", case.name)), meta.to_string()).unwrap();
        transcript
            .binaries
            .insert(case.name.clone(), case.replies.iter().cloned().map(Step::Reply).collect());
    }
    transcript
}

/// Location of the angr bridge script and the interpreter to run it with,
/// when both are usable here. `A4D_ANGR_ADAPTER` overrides the script path,
/// `A4D_PYTHON` the interpreter.
pub fn bridge_runtime() -> Option<(String, PathBuf)> {
    let python = std::env::var("A4D_PYTHON").unwrap_or_else(|_| "python3".into());
    let script = std::env::var_os("A4D_ANGR_ADAPTER")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/angr_adapter.py"));
    if !script.is_file() {
        return None;
    }
    let probe = Command::new(&python).args(["-c", "import angr"]).output().ok()?;
    probe.status.success().then_some((python, script))
}

pub struct BridgeRun {
    pub code: Option<i32>,
    pub stdout: String,
}

pub fn run_bridge(python: &str, script: &Path, binary: &Path) -> BridgeRun {
    let out = Command::new(python).arg(script).arg(binary).output().expect("bridge launches");
    BridgeRun {
        code: out.status.code(),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
    }
}

pub fn bridge_elf() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bridge/hello.elf")
}
