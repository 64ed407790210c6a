use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::Deserialize;

use super::Pipeline;
use crate::cache::Stage;
use crate::error::{Error, Result};
use crate::model::{binary_id, BinaryTarget, OptLevel, TestSuite};
use crate::report::{CorpusRecord, RecordContext};
use crate::validate::{boundary_inputs, HarnessSpec, OracleInput};

/// Paths of one corpus entry.
///
/// ```text
/// corpus/bin/<name>            original executable
/// corpus/tests/<name>.json     oracle test suite (optional if inputs exist)
/// corpus/inputs/<name>.json    inputs for oracle generation (optional)
/// corpus/harness/<name>.c      driver for function-level units (optional)
/// corpus/src/<name>.c          stored decompiler output for the file backend
/// corpus/meta/<name>.json      {"opt_level", "category", "function"} (optional)
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLayout {
    pub name: String,
    pub binary: PathBuf,
    pub tests: PathBuf,
    pub inputs: PathBuf,
    pub harness: PathBuf,
    pub source: PathBuf,
    pub meta: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: &Path, name: &str) -> Self {
        CorpusLayout {
            name: name.to_owned(),
            binary: root.join("bin").join(name),
            tests: root.join("tests").join(format!("{name}.json")),
            inputs: root.join("inputs").join(format!("{name}.json")),
            harness: root.join("harness").join(format!("{name}.c")),
            source: root.join("src").join(format!("{name}.c")),
            meta: root.join("meta").join(format!("{name}.json")),
        }
    }

    /// Every entry of `root/bin`, sorted by name.
    pub fn scan(root: &Path) -> Result<Vec<CorpusLayout>> {
        let bin = root.join("bin");
        let entries = fs::read_dir(&bin)
            .map_err(|e| Error::CorpusMalformed(format!("{}: {e}", bin.display())))?;
        let mut names = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::CorpusMalformed(format!("{}: {e}", bin.display())))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') {
                continue;
            }
            names.push(name);
        }
        names.sort();
        if names.is_empty() {
            return Err(Error::CorpusMalformed(format!("{} contains no binaries", bin.display())));
        }
        Ok(names.iter().map(|n| CorpusLayout::new(root, n)).collect())
    }
}

#[derive(Debug, Default, Deserialize)]
struct Meta {
    #[serde(default)]
    opt_level: Option<String>,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    function: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusOptions {
    pub workers: usize,
    /// JSON-lines results file, appended to as records complete.
    pub results_path: Option<PathBuf>,
}

/// Refines every binary in `root`, `opts.workers` at a time. Records come
/// back in corpus order regardless of completion order.
pub fn run_corpus(root: &Path, pipeline: &Pipeline, opts: &CorpusOptions) -> Result<Vec<CorpusRecord>> {
    let entries = CorpusLayout::scan(root)?;
    let mut results_file = match &opts.results_path {
        Some(path) => Some(open_results(path)?),
        None => None,
    };
    let workers = opts.workers.clamp(1, entries.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, CorpusRecord)>();
    let mut slots: Vec<Option<CorpusRecord>> = vec![None; entries.len()];

    thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let entries = &entries;
            scope.spawn(move || loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = entries.get(idx) else { break };
                let record = catch_unwind(AssertUnwindSafe(|| process_entry(entry, pipeline)))
                    .unwrap_or_else(|panic| {
                        let msg = panic
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| panic.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "worker panicked".into());
                        tracing::error!(binary = %entry.name, panic = %msg, "worker panicked");
                        CorpusRecord::infra_error(&fallback_context(entry, pipeline), placeholder_id(entry), msg)
                    });
                if tx.send((idx, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (idx, record) in rx {
            if let Some(file) = results_file.as_mut() {
                let mut line = serde_json::to_vec(&record).map_err(|e| Error::json("serializing record", e))?;
                line.push(b'\n');
                file.write_all(&line)
                    .and_then(|_| file.flush())
                    .map_err(|e| Error::io("writing results", e))?;
            }
            tracing::info!(binary = %record.name, status = ?record.status, "finished");
            slots[idx] = Some(record);
        }
        Ok(())
    })?;

    Ok(slots.into_iter().flatten().collect())
}

fn open_results(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

/// Stable id for entries whose binary cannot be read.
fn placeholder_id(entry: &CorpusLayout) -> crate::model::BinaryId {
    binary_id(entry.binary.to_string_lossy().as_bytes())
}

fn read_meta(entry: &CorpusLayout) -> Result<Meta> {
    match fs::read_to_string(&entry.meta) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::CorpusMalformed(format!("{}: {e}", entry.meta.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Meta::default()),
        Err(e) => Err(Error::io(format!("reading {}", entry.meta.display()), e)),
    }
}

fn fallback_context(entry: &CorpusLayout, pipeline: &Pipeline) -> RecordContext {
    RecordContext {
        binary: None,
        name: entry.name.clone(),
        backend: pipeline.config().backend.name.clone(),
        opt_level: OptLevel::Unknown,
        category: None,
        target_symbol: None,
    }
}

fn process_entry(entry: &CorpusLayout, pipeline: &Pipeline) -> CorpusRecord {
    let mut ctx = fallback_context(entry, pipeline);
    let meta = match read_meta(entry) {
        Ok(meta) => meta,
        Err(e) => return CorpusRecord::infra_error(&ctx, placeholder_id(entry), e.to_string()),
    };
    ctx.opt_level = meta
        .opt_level
        .as_deref()
        .and_then(|s| s.parse().ok())
        .unwrap_or(OptLevel::Unknown);
    ctx.category = meta.category;
    ctx.target_symbol = meta.function;

    let target = match BinaryTarget::open(&entry.binary) {
        Ok(t) => t.with_opt_level(ctx.opt_level).with_sidecar(&entry.source),
        Err(e) => return CorpusRecord::infra_error(&ctx, placeholder_id(entry), e.to_string()),
    };
    ctx.binary = Some(target.id.clone());

    let digest = pipeline.config_digest();
    let refined = Stage::Refined {
        config_digest: digest.clone(),
    };
    if let Some(cache) = pipeline.cache() {
        if let Some(record) = cache.lookup_json::<CorpusRecord>(&target.id, &refined) {
            tracing::debug!(binary = %entry.name, "refined result served from cache");
            return record;
        }
    }

    let suite = match load_suite(entry, &target, pipeline) {
        Ok(s) => s,
        Err(e) => return CorpusRecord::infra_error(&ctx, target.id.clone(), e.to_string()),
    };
    let harness = match fs::read_to_string(&entry.harness) {
        Ok(text) => Some(HarnessSpec::from_source(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return CorpusRecord::infra_error(&ctx, target.id.clone(), e.to_string()),
    };

    let outcome = pipeline.refine(&target, &suite, harness.as_ref());
    let record = CorpusRecord::from_outcome(&ctx, target.id.clone(), &outcome);
    if record.status != crate::report::RecordStatus::Error {
        if let Some(cache) = pipeline.cache() {
            if let Err(e) = cache.store_json(&target.id, &refined, &record) {
                tracing::warn!(binary = %entry.name, error = %e, "could not cache result");
            }
        }
    }
    record
}

/// Checked-in tests first, then a cached oracle, then a freshly generated
/// one (from the entry's inputs file, or boundary inputs).
fn load_suite(entry: &CorpusLayout, target: &BinaryTarget, pipeline: &Pipeline) -> Result<TestSuite> {
    if entry.tests.is_file() {
        return TestSuite::load(&entry.tests);
    }
    if let Some(cache) = pipeline.cache() {
        if let Some(suite) = cache.lookup_json::<TestSuite>(&target.id, &Stage::Oracle) {
            return Ok(suite);
        }
    }
    let inputs = if entry.inputs.is_file() {
        OracleInput::load_list(&entry.inputs)?
    } else {
        boundary_inputs()
    };
    let suite = pipeline.validator().generate_oracle(target, &inputs)?;
    if let Some(cache) = pipeline.cache() {
        cache.store_json(&target.id, &Stage::Oracle, &suite)?;
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_paths() {
        let l = CorpusLayout::new(Path::new("/c"), "fact");
        assert_eq!(l.binary, Path::new("/c/bin/fact"));
        assert_eq!(l.tests, Path::new("/c/tests/fact.json"));
        assert_eq!(l.source, Path::new("/c/src/fact.c"));
        assert_eq!(l.meta, Path::new("/c/meta/fact.json"));
    }

    #[test]
    fn missing_bin_dir_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(CorpusLayout::scan(dir.path()), Err(Error::CorpusMalformed(_))));
        fs::create_dir(dir.path().join("bin")).unwrap();
        assert!(matches!(CorpusLayout::scan(dir.path()), Err(Error::CorpusMalformed(_))));
    }
}
