//! Shared domain types: binaries, candidate sources, test suites, constraint
//! levels and diagnostics, plus the two pure helpers every stage relies on
//! (content hashing and output comparison).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex-encoded SHA-256 of a binary's bytes. Opaque everywhere else.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinaryId(String);

impl BinaryId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts an already computed id, e.g. one read back from a suite file.
    pub fn from_hex(hex_id: impl Into<String>) -> Result<Self> {
        let hex_id = hex_id.into();
        if hex_id.len() != 64 || !hex_id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::InvalidSuite(format!("`{hex_id}` is not a 64-digit hex id")));
        }
        Ok(BinaryId(hex_id.to_ascii_lowercase()))
    }

    /// First 12 hex digits, for file names and log lines.
    pub fn short(&self) -> &str {
        &self.0[..12.min(self.0.len())]
    }
}

impl fmt::Display for BinaryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn binary_id(bytes: &[u8]) -> BinaryId {
    BinaryId(hex::encode(Sha256::digest(bytes)))
}

/// Hex SHA-256 of arbitrary text; used for config digests and source digests.
pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum OptLevel {
    O0,
    O1,
    O2,
    O3,
    #[default]
    Unknown,
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OptLevel::O0 => "O0",
            OptLevel::O1 => "O1",
            OptLevel::O2 => "O2",
            OptLevel::O3 => "O3",
            OptLevel::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

impl FromStr for OptLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches('-').to_ascii_uppercase().as_str() {
            "O0" => Ok(OptLevel::O0),
            "O1" => Ok(OptLevel::O1),
            "O2" => Ok(OptLevel::O2),
            "O3" => Ok(OptLevel::O3),
            "UNKNOWN" | "" => Ok(OptLevel::Unknown),
            other => Err(Error::Config(format!("unknown optimization level `{other}`"))),
        }
    }
}

/// An ELF executable to decompile. Construction hashes the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryTarget {
    pub path: PathBuf,
    pub id: BinaryId,
    pub opt_level: OptLevel,
    pub decompiler_hint: Option<String>,
    /// Pre-recorded decompiler output used by the passthrough backend.
    /// Defaults to the binary path with a `.c` extension.
    pub sidecar: Option<PathBuf>,
}

impl BinaryTarget {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let meta = fs::metadata(&path).map_err(|e| Error::InvalidTarget {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if !meta.is_file() {
            return Err(Error::InvalidTarget {
                path,
                reason: "not a regular file".into(),
            });
        }
        let bytes = fs::read(&path).map_err(|e| Error::InvalidTarget {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        Ok(BinaryTarget {
            id: binary_id(&bytes),
            path,
            opt_level: OptLevel::Unknown,
            decompiler_hint: None,
            sidecar: None,
        })
    }

    pub fn with_opt_level(mut self, opt_level: OptLevel) -> Self {
        self.opt_level = opt_level;
        self
    }

    pub fn with_sidecar(mut self, sidecar: impl Into<PathBuf>) -> Self {
        self.sidecar = Some(sidecar.into());
        self
    }

    /// File stem, used to name per-binary artifacts.
    pub fn name(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.id.short().to_owned())
    }

    pub fn sidecar_path(&self) -> PathBuf {
        self.sidecar
            .clone()
            .unwrap_or_else(|| self.path.with_extension("c"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintLevel {
    L1,
    L2,
    L3,
    Pass,
}

impl ConstraintLevel {
    pub const CHECKS: [ConstraintLevel; 3] = [ConstraintLevel::L1, ConstraintLevel::L2, ConstraintLevel::L3];

    /// The levels a validation result at `self` has already cleared.
    pub fn passed(self) -> &'static [ConstraintLevel] {
        match self {
            ConstraintLevel::L1 => &[],
            ConstraintLevel::L2 => &Self::CHECKS[..1],
            ConstraintLevel::L3 => &Self::CHECKS[..2],
            ConstraintLevel::Pass => &Self::CHECKS,
        }
    }

    /// Whether a result at `self` cleared `check`.
    pub fn has_passed(self, check: ConstraintLevel) -> bool {
        self > check
    }

    pub fn describe(self) -> &'static str {
        match self {
            ConstraintLevel::L1 => "syntax",
            ConstraintLevel::L2 => "compilation",
            ConstraintLevel::L3 => "execution",
            ConstraintLevel::Pass => "all constraints",
        }
    }
}

impl fmt::Display for ConstraintLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintLevel::L1 => "L1",
            ConstraintLevel::L2 => "L2",
            ConstraintLevel::L3 => "L3",
            ConstraintLevel::Pass => "PASS",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Decompiler(String),
    Repair { level: ConstraintLevel, iteration: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    #[default]
    Standalone,
    FunctionWithHarness,
}

/// A candidate C translation and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    code: String,
    pub origin: Origin,
    pub unit_kind: UnitKind,
}

impl SourceUnit {
    pub fn new(code: impl Into<String>, origin: Origin, unit_kind: UnitKind) -> Result<Self> {
        let code = code.into();
        if code.trim().is_empty() {
            return Err(Error::InvalidSource("code is empty".into()));
        }
        if code.contains('\0') {
            return Err(Error::InvalidSource("code contains NUL bytes".into()));
        }
        if let Origin::Repair { iteration: 0, .. } = origin {
            return Err(Error::InvalidSource("repair iterations start at 1".into()));
        }
        Ok(SourceUnit {
            code,
            origin,
            unit_kind,
        })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn digest(&self) -> String {
        text_digest(&self.code)
    }

    /// Same provenance, different text.
    pub fn with_code(&self, code: impl Into<String>) -> Result<Self> {
        SourceUnit::new(code, self.origin.clone(), self.unit_kind)
    }
}

/// One oracle IO pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default, with = "b64")]
    pub stdin: Vec<u8>,
    #[serde(with = "b64")]
    pub expected_stdout: Vec<u8>,
    pub expected_exit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub source_binary: BinaryId,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let suite: TestSuite =
            serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))?;
        // revalidate the id shape; serde(transparent) skips it
        BinaryId::from_hex(suite.source_binary.as_str().to_owned())?;
        Ok(suite)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::cache::write_atomic(path, self.to_json().as_bytes())
    }
}

/// How a process ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessExit {
    Code(i32),
    Signal(i32),
}

impl ProcessExit {
    pub fn matches(self, expected: u8) -> bool {
        self == ProcessExit::Code(i32::from(expected))
    }
}

impl fmt::Display for ProcessExit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessExit::Code(c) => write!(f, "exit {c}"),
            ProcessExit::Signal(s) => write!(f, "signal {s}"),
        }
    }
}

/// A suite case the candidate failed, with what it actually did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedTest {
    pub case: TestCase,
    #[serde(with = "b64")]
    pub actual_stdout: Vec<u8>,
    pub actual_exit: ProcessExit,
}

/// Feedback from the first failing constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub level: ConstraintLevel,
    pub raw_text: String,
    #[serde(default)]
    pub failed_tests: Vec<FailedTest>,
    /// Set when the unit compiled on its own but did not link against the
    /// harness.
    #[serde(default)]
    pub signature_mismatch: bool,
}

impl Diagnostics {
    pub fn tool(level: ConstraintLevel, raw_text: impl Into<String>) -> Self {
        debug_assert!(matches!(level, ConstraintLevel::L1 | ConstraintLevel::L2));
        Diagnostics {
            level,
            raw_text: raw_text.into(),
            failed_tests: Vec::new(),
            signature_mismatch: false,
        }
    }

    pub fn tests(failed_tests: Vec<FailedTest>) -> Self {
        Diagnostics {
            level: ConstraintLevel::L3,
            raw_text: String::new(),
            failed_tests,
            signature_mismatch: false,
        }
    }
}

/// Strips a single trailing `\n` or `\r\n`.
fn strip_one_newline(bytes: &[u8]) -> &[u8] {
    bytes
        .strip_suffix(b"\r\n")
        .or_else(|| bytes.strip_suffix(b"\n"))
        .unwrap_or(bytes)
}

/// Byte-exact comparison where each side may drop at most one trailing
/// newline. Either side may keep its newline, so `a ~ a\n ~ a\n\n` while
/// `a` and `a\n\n` differ.
pub fn output_equal(expected: &[u8], actual: &[u8]) -> bool {
    let (e, a) = (strip_one_newline(expected), strip_one_newline(actual));
    e == a || e == actual || expected == a
}

pub(crate) mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input_hashes_to_sha256_empty_digest() {
        assert_eq!(
            binary_id(b"").as_str(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn one_byte_difference_changes_id() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        fs::write(&a, b"\x7fELF\x02\x01\x01\x00").unwrap();
        fs::write(&b, b"\x7fELF\x02\x01\x01\x01").unwrap();
        let ta = BinaryTarget::open(&a).unwrap();
        let tb = BinaryTarget::open(&b).unwrap();
        assert_ne!(ta.id, tb.id);
        assert_eq!(ta.id, BinaryTarget::open(&a).unwrap().id);
        assert_eq!(ta.id.as_str().len(), 64);
    }

    #[test]
    fn target_must_be_regular_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(BinaryTarget::open(dir.path()).is_err());
        assert!(BinaryTarget::open(dir.path().join("missing")).is_err());
    }

    #[test]
    fn output_equal_examples() {
        assert!(output_equal(b"42\n", b"42\n"));
        assert!(output_equal(b"42\n", b"42"));
        assert!(!output_equal(b"42\n", b"43\n"));
        assert!(!output_equal(b"42\n\n", b"42"));
        assert!(output_equal(b"42\r\n", b"42"));
    }

    #[test]
    fn output_equal_is_not_transitive() {
        // "a" ~ "a\n" and "a\n" ~ "a\n\n", but "a" !~ "a\n\n"
        assert!(output_equal(b"a", b"a\n"));
        assert!(output_equal(b"a\n", b"a\n\n"));
        assert!(!output_equal(b"a", b"a\n\n"));
    }

    #[test]
    fn level_order_is_total() {
        use ConstraintLevel::*;
        assert!(L1 < L2 && L2 < L3 && L3 < Pass);
        assert_eq!(L3.passed(), &[L1, L2]);
        assert!(Pass.has_passed(L3));
        assert!(!L3.has_passed(L3));
    }

    #[test]
    fn source_unit_invariants() {
        let origin = Origin::Decompiler("file".into());
        assert!(SourceUnit::new("", origin.clone(), UnitKind::Standalone).is_err());
        assert!(SourceUnit::new("int x;\0", origin, UnitKind::Standalone).is_err());
        let repair = Origin::Repair {
            level: ConstraintLevel::L1,
            iteration: 0,
        };
        assert!(SourceUnit::new("int x;", repair, UnitKind::Standalone).is_err());
    }

    #[test]
    fn suite_json_uses_base64() {
        let suite = TestSuite {
            source_binary: binary_id(b"x"),
            cases: vec![TestCase {
                args: vec!["5".into()],
                stdin: vec![0xff, 0x00],
                expected_stdout: b"120\n".to_vec(),
                expected_exit: 0,
            }],
        };
        let json = suite.to_json();
        assert!(json.contains("\"expected_stdout\": \"MTIwCg==\""));
        assert!(json.contains("\"stdin\": \"/wA=\""));
        let back: TestSuite = serde_json::from_str(&json).unwrap();
        assert_eq!(back, suite);
    }

    proptest! {
        #[test]
        fn output_equal_reflexive_and_symmetric(a in proptest::collection::vec(any::<u8>(), 0..32),
                                                b in proptest::collection::vec(any::<u8>(), 0..32)) {
            prop_assert!(output_equal(&a, &a));
            prop_assert_eq!(output_equal(&a, &b), output_equal(&b, &a));
        }

        #[test]
        fn binary_id_is_pure(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            prop_assert_eq!(binary_id(&bytes), binary_id(&bytes.clone()));
        }
    }
}
