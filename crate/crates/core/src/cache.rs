//! Content-addressed cache for decompiler output, oracles and finished
//! refinements. Keys are derived from the binary hash plus whatever else
//! determines the stored value; writes go through a temp file and rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BinaryId;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Raw decompiler output. `backend` should identify both the backend
    /// name and its command template.
    Decompiled { backend: String },
    Oracle,
    /// Finished refinement under a given result-affecting configuration.
    Refined { config_digest: String },
}

impl Stage {
    fn relative(&self, id: &BinaryId) -> PathBuf {
        match self {
            Stage::Decompiled { backend } => PathBuf::from("decompiled")
                .join(sanitize(backend))
                .join(format!("{id}.c")),
            Stage::Oracle => PathBuf::from("oracle").join(format!("{id}.json")),
            Stage::Refined { config_digest } => PathBuf::from("refined")
                .join(sanitize(config_digest))
                .join(format!("{id}.json")),
        }
    }
}

fn sanitize(component: &str) -> String {
    let s: String = component
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "_".into()
    } else {
        s
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, id: &BinaryId, stage: &Stage) -> PathBuf {
        self.root.join(stage.relative(id))
    }

    pub fn lookup(&self, id: &BinaryId, stage: &Stage) -> Option<Vec<u8>> {
        let path = self.entry_path(id, stage);
        match fs::read(&path) {
            Ok(bytes) => Some(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "unreadable cache entry, treating as miss");
                None
            }
        }
    }

    pub fn lookup_text(&self, id: &BinaryId, stage: &Stage) -> Option<String> {
        let bytes = self.lookup(id, stage)?;
        match String::from_utf8(bytes) {
            Ok(text) => Some(text),
            Err(_) => {
                tracing::warn!(stage = ?stage, binary = %id.short(), "corrupt cache entry, treating as miss");
                None
            }
        }
    }

    pub fn lookup_json<T: DeserializeOwned>(&self, id: &BinaryId, stage: &Stage) -> Option<T> {
        let bytes = self.lookup(id, stage)?;
        match serde_json::from_slice(&bytes) {
            Ok(value) => Some(value),
            Err(e) => {
                tracing::warn!(stage = ?stage, binary = %id.short(), error = %e, "corrupt cache entry, treating as miss");
                None
            }
        }
    }

    pub fn store(&self, id: &BinaryId, stage: &Stage, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.entry_path(id, stage), bytes)
    }

    pub fn store_json<T: Serialize>(&self, id: &BinaryId, stage: &Stage, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json("serializing cache entry", e))?;
        self.store(id, stage, &bytes)
    }
}

/// Writes `bytes` to `path` via a sibling temp file and rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)
        .map_err(|e| Error::io(format!("creating temp file in {}", parent.display()), e))?;
    tmp.write_all(bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::binary_id;

    #[test]
    fn store_then_lookup_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let id = binary_id(b"bin");
        let stage = Stage::Decompiled { backend: "ghidra".into() };
        assert!(cache.lookup(&id, &stage).is_none());
        cache.store(&id, &stage, b"int main(){}").unwrap();
        assert_eq!(cache.lookup(&id, &stage).unwrap(), b"int main(){}");
    }

    #[test]
    fn key_includes_backend_and_config_digest() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let id = binary_id(b"bin");
        cache
            .store(&id, &Stage::Decompiled { backend: "ghidra".into() }, b"x")
            .unwrap();
        assert!(cache.lookup(&id, &Stage::Decompiled { backend: "retdec".into() }).is_none());

        cache
            .store_json(&id, &Stage::Refined { config_digest: "aaaa".into() }, &1u32)
            .unwrap();
        assert_eq!(cache.lookup_json::<u32>(&id, &Stage::Refined { config_digest: "aaaa".into() }), Some(1));
        assert!(cache
            .lookup_json::<u32>(&id, &Stage::Refined { config_digest: "bbbb".into() })
            .is_none());
        assert!(cache.lookup(&binary_id(b"other"), &Stage::Oracle).is_none());
    }

    #[test]
    fn corrupt_entries_are_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let id = binary_id(b"bin");
        cache.store(&id, &Stage::Oracle, b"{not json").unwrap();
        assert!(cache.lookup_json::<serde_json::Value>(&id, &Stage::Oracle).is_none());
        let stage = Stage::Decompiled { backend: "g".into() };
        cache.store(&id, &stage, &[0xff, 0xfe]).unwrap();
        assert!(cache.lookup_text(&id, &stage).is_none());
    }

    #[test]
    fn hostile_stage_names_stay_inside_root() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let id = binary_id(b"bin");
        let path = cache.entry_path(&id, &Stage::Decompiled { backend: "../../etc".into() });
        assert!(path.starts_with(dir.path()));
        let path = cache.entry_path(&id, &Stage::Decompiled { backend: "..".into() });
        assert!(path.starts_with(dir.path()) && !path.components().any(|c| c.as_os_str() == ".."));
    }

    #[test]
    fn atomic_write_replaces_existing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/c.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
