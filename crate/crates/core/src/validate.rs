//! The constraint hierarchy: parseable (L1), compiles and links (L2),
//! behaves like the original binary on its test suite (L3). Also records
//! the suite itself by running the original binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    output_equal, BinaryTarget, ConstraintLevel, Diagnostics, FailedTest, SourceUnit, TestCase, TestSuite, UnitKind,
};
use crate::sandbox::{run_tool, ExecLimits, ExecutionRecord, Sandbox, ToolOutput, Verdict};

const UNIT_FILE: &str = "unit.c";
const HARNESS_FILE: &str = "harness.c";
const EXE_FILE: &str = "prog";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toolchain {
    pub compiler_cmd: String,
    pub syntax_flags: Vec<String>,
    pub compile_flags: Vec<String>,
    /// Appended after all inputs when linking.
    pub link_flags: Vec<String>,
    /// Adds `-Werror` to the compile step.
    pub strict: bool,
    pub timeout_s: u64,
}

impl Default for Toolchain {
    fn default() -> Self {
        Toolchain {
            compiler_cmd: "cc".into(),
            syntax_flags: vec!["-fsyntax-only".into(), "-w".into()],
            compile_flags: vec!["-Wall".into(), "-Wextra".into()],
            link_flags: vec!["-lm".into()],
            strict: false,
            timeout_s: 60,
        }
    }
}

impl Toolchain {
    pub fn validate(&self) -> Result<()> {
        if !self.syntax_flags.iter().any(|f| f == "-fsyntax-only") {
            return Err(Error::Config("syntax_flags must include -fsyntax-only".into()));
        }
        if self.compiler_cmd.trim().is_empty() {
            return Err(Error::Config("compiler_cmd is empty".into()));
        }
        Ok(())
    }

    fn compile_flags(&self) -> Vec<String> {
        let mut flags = self.compile_flags.clone();
        if self.strict && !flags.iter().any(|f| f == "-Werror") {
            flags.push("-Werror".into());
        }
        flags
    }

    fn run(&self, args: &[String], cwd: &Path) -> Result<ToolOutput> {
        run_tool(&self.compiler_cmd, args, cwd, Duration::from_secs(self.timeout_s))
    }
}

/// Driver for function-level units that have no `main` of their own.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessSpec {
    pub harness_source: Option<String>,
    #[serde(default)]
    pub extra_link_flags: Vec<String>,
}

impl HarnessSpec {
    pub fn from_source(source: impl Into<String>) -> Self {
        HarnessSpec {
            harness_source: Some(source.into()),
            extra_link_flags: Vec::new(),
        }
    }
}

/// A linked candidate executable; the scratch directory lives as long as any
/// clone of the artifact.
#[derive(Debug, Clone)]
pub struct BuildArtifact {
    dir: Arc<tempfile::TempDir>,
    path: PathBuf,
}

impl BuildArtifact {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn workdir(&self) -> &Path {
        self.dir.path()
    }
}

/// Result of a single gate.
#[derive(Debug, Clone)]
pub enum Gate<T> {
    Pass(T),
    Fail(Diagnostics),
}

impl<T> Gate<T> {
    pub fn is_pass(&self) -> bool {
        matches!(self, Gate::Pass(_))
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        match self {
            Gate::Fail(d) => Some(d),
            Gate::Pass(_) => None,
        }
    }
}

/// The `(level, diagnostics)` pair from [`Validator::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub level: ConstraintLevel,
    pub diagnostics: Option<Diagnostics>,
    /// Present when the source reached L3 or passed.
    pub executable: Option<BuildArtifact>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.level == ConstraintLevel::Pass
    }
}

/// One oracle input: argv and stdin. In JSON, stdin is base64 (`stdin`)
/// or plain text (`stdin_text`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawOracleInput")]
pub struct OracleInput {
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default, with = "crate::model::b64")]
    pub stdin: Vec<u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracleInput {
    #[serde(default)]
    args: Vec<String>,
    #[serde(default, with = "crate::model::b64")]
    stdin: Vec<u8>,
    #[serde(default)]
    stdin_text: Option<String>,
}

impl TryFrom<RawOracleInput> for OracleInput {
    type Error = String;

    fn try_from(raw: RawOracleInput) -> std::result::Result<Self, String> {
        let stdin = match raw.stdin_text {
            Some(_) if !raw.stdin.is_empty() => return Err("give either stdin or stdin_text, not both".into()),
            Some(text) => text.into_bytes(),
            None => raw.stdin,
        };
        Ok(OracleInput { args: raw.args, stdin })
    }
}

impl OracleInput {
    pub fn args<I: IntoIterator<Item = S>, S: Into<String>>(args: I) -> Self {
        OracleInput {
            args: args.into_iter().map(Into::into).collect(),
            stdin: Vec::new(),
        }
    }

    pub fn stdin(stdin: impl Into<Vec<u8>>) -> Self {
        OracleInput {
            args: Vec::new(),
            stdin: stdin.into(),
        }
    }

    pub fn load_list(path: &Path) -> Result<Vec<OracleInput>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
    }
}

/// Small integers, integer boundaries and short strings, each offered both
/// as a single argument and on stdin.
pub fn boundary_inputs() -> Vec<OracleInput> {
    let values = ["0", "1", "-1", "2", "7", "10", "255", "-2147483648", "2147483647", "", "a", "hello"];
    let mut inputs = vec![OracleInput::args(Vec::<String>::new())];
    inputs.extend(values.iter().map(|v| OracleInput::args([*v])));
    inputs.extend(values.iter().map(|v| OracleInput::stdin(format!("{v}\n"))));
    inputs
}

/// Runs the gates with one toolchain and one set of execution limits.
#[derive(Debug, Clone)]
pub struct Validator {
    pub toolchain: Toolchain,
    pub limits: ExecLimits,
    /// Whether exit codes participate in behavioral equivalence.
    pub compare_exit: bool,
    sandbox: Sandbox,
}

impl Validator {
    pub fn new(toolchain: Toolchain, limits: ExecLimits) -> Self {
        Validator {
            toolchain,
            limits,
            compare_exit: true,
            sandbox: Sandbox::default(),
        }
    }

    pub fn with_sandbox(mut self, sandbox: Sandbox) -> Self {
        self.sandbox = sandbox;
        self
    }

    pub fn with_exit_codes(mut self, compare_exit: bool) -> Self {
        self.compare_exit = compare_exit;
        self
    }

    pub fn sandbox(&self) -> &Sandbox {
        &self.sandbox
    }

    fn stage(&self, source: &SourceUnit) -> Result<tempfile::TempDir> {
        let dir = self.sandbox.tempdir("a4d-build-")?;
        fs::write(dir.path().join(UNIT_FILE), source.code())
            .map_err(|e| Error::io("writing candidate source", e))?;
        Ok(dir)
    }

    /// φ1: does the front-end accept the unit?
    pub fn check_syntax(&self, source: &SourceUnit) -> Result<Gate<()>> {
        let dir = self.stage(source)?;
        let mut args = self.toolchain.syntax_flags.clone();
        args.push(UNIT_FILE.into());
        let out = self.toolchain.run(&args, dir.path())?;
        Ok(if out.success() {
            Gate::Pass(())
        } else {
            Gate::Fail(Diagnostics::tool(ConstraintLevel::L1, tool_text(&out)))
        })
    }

    /// φ2: does the unit (plus harness) compile and link?
    pub fn check_compile(&self, source: &SourceUnit, harness: Option<&HarnessSpec>) -> Result<Gate<BuildArtifact>> {
        let dir = self.stage(source)?;
        let flags = self.toolchain.compile_flags();
        let harness_text = match (source.unit_kind, harness.and_then(|h| h.harness_source.as_deref())) {
            (UnitKind::FunctionWithHarness, Some(text)) => Some(text),
            (UnitKind::FunctionWithHarness, None) => {
                return Err(Error::Config("function unit requires a harness".into()));
            }
            (UnitKind::Standalone, _) => None,
        };

        // compile separately from linking so link diagnostics name stable
        // object files, and failures can be attributed to the harness
        let mut unit_args = vec!["-c".to_owned(), UNIT_FILE.into(), "-o".into(), "unit.o".into()];
        unit_args.extend(flags.iter().cloned());
        let out = self.toolchain.run(&unit_args, dir.path())?;
        if !out.success() {
            return Ok(Gate::Fail(Diagnostics::tool(ConstraintLevel::L2, tool_text(&out))));
        }
        let Some(harness_text) = harness_text else {
            let mut link_args = vec!["unit.o".to_owned(), "-o".into(), EXE_FILE.into()];
            link_args.extend(self.toolchain.link_flags.iter().cloned());
            let out = self.toolchain.run(&link_args, dir.path())?;
            if !out.success() {
                return Ok(Gate::Fail(Diagnostics::tool(ConstraintLevel::L2, tool_text(&out))));
            }
            return Ok(Gate::Pass(self.artifact(dir)));
        };
        fs::write(dir.path().join(HARNESS_FILE), harness_text).map_err(|e| Error::io("writing harness", e))?;
        let harness_args = [
            "-c".to_owned(),
            HARNESS_FILE.into(),
            "-o".into(),
            "harness.o".into(),
            "-w".into(),
        ];
        let out = self.toolchain.run(&harness_args, dir.path())?;
        if !out.success() {
            return Err(Error::ToolFailure {
                tool: self.toolchain.compiler_cmd.clone(),
                detail: format!("harness does not compile: {}", tool_text(&out)),
            });
        }
        let mut link_args = vec!["unit.o".to_owned(), "harness.o".into(), "-o".into(), EXE_FILE.into()];
        link_args.extend(self.toolchain.link_flags.iter().cloned());
        link_args.extend(harness.map(|h| h.extra_link_flags.clone()).unwrap_or_default());
        let out = self.toolchain.run(&link_args, dir.path())?;
        if !out.success() {
            let text = tool_text(&out);
            let mut diag = Diagnostics::tool(ConstraintLevel::L2, text.clone());
            diag.signature_mismatch = text.contains("harness.o") || text.contains("harness.c:");
            return Ok(Gate::Fail(diag));
        }
        Ok(Gate::Pass(self.artifact(dir)))
    }

    fn artifact(&self, dir: tempfile::TempDir) -> BuildArtifact {
        let path = dir.path().join(EXE_FILE);
        BuildArtifact {
            dir: Arc::new(dir),
            path,
        }
    }

    /// Whether one execution satisfies one case.
    pub fn case_passes(&self, case: &TestCase, record: &ExecutionRecord) -> bool {
        if record.verdict != Verdict::Completed {
            return false;
        }
        let cap = self.limits.max_stdout_bytes;
        let stdout_ok = if record.stdout_truncated {
            case.expected_stdout.len() >= cap && case.expected_stdout[..cap] == record.stdout[..]
        } else {
            output_equal(&case.expected_stdout, &record.stdout)
        };
        stdout_ok && (!self.compare_exit || record.reported_exit().matches(case.expected_exit))
    }

    /// φ3 on an already-built executable. Runs every case.
    pub fn run_tests(&self, exe: &Path, suite: &TestSuite) -> Result<Gate<()>> {
        if suite.is_empty() {
            return Err(Error::InvalidSuite("L3 validation needs at least one case".into()));
        }
        let failed: Vec<FailedTest> = suite
            .cases
            .iter()
            .filter_map(|case| {
                let record = self.sandbox.execute(exe, case, &self.limits);
                (!self.case_passes(case, &record)).then(|| FailedTest {
                    case: case.clone(),
                    actual_exit: record.reported_exit(),
                    actual_stdout: record.stdout,
                })
            })
            .collect();
        Ok(if failed.is_empty() {
            Gate::Pass(())
        } else {
            Gate::Fail(Diagnostics::tests(failed))
        })
    }

    /// φ1, then φ2, then φ3; the first failing level wins.
    pub fn validate(
        &self,
        source: &SourceUnit,
        suite: &TestSuite,
        harness: Option<&HarnessSpec>,
    ) -> Result<ValidationReport> {
        if let Gate::Fail(diag) = self.check_syntax(source)? {
            return Ok(ValidationReport {
                level: ConstraintLevel::L1,
                diagnostics: Some(diag),
                executable: None,
            });
        }
        let artifact = match self.check_compile(source, harness)? {
            Gate::Pass(artifact) => artifact,
            Gate::Fail(diag) => {
                return Ok(ValidationReport {
                    level: ConstraintLevel::L2,
                    diagnostics: Some(diag),
                    executable: None,
                })
            }
        };
        let gate = self.run_tests(artifact.path(), suite)?;
        Ok(match gate {
            Gate::Pass(()) => ValidationReport {
                level: ConstraintLevel::Pass,
                diagnostics: None,
                executable: Some(artifact),
            },
            Gate::Fail(diag) => ValidationReport {
                level: ConstraintLevel::L3,
                diagnostics: Some(diag),
                executable: Some(artifact),
            },
        })
    }

    /// Records expected behavior by running the original binary. Inputs
    /// on which the original itself misbehaves are dropped.
    pub fn generate_oracle(&self, target: &BinaryTarget, inputs: &[OracleInput]) -> Result<TestSuite> {
        if inputs.is_empty() {
            return Err(Error::InvalidSuite("oracle generation needs at least one input".into()));
        }
        let mut cases = Vec::with_capacity(inputs.len());
        for (idx, input) in inputs.iter().enumerate() {
            let probe = TestCase {
                args: input.args.clone(),
                stdin: input.stdin.clone(),
                expected_stdout: Vec::new(),
                expected_exit: 0,
            };
            let record = self.sandbox.execute(&target.path, &probe, &self.limits);
            let exit = match (record.verdict, record.exit) {
                (Verdict::Completed, Some(crate::model::ProcessExit::Code(code))) if !record.stdout_truncated => {
                    code as u8
                }
                _ => {
                    tracing::warn!(
                        binary = %target.name(),
                        input = idx,
                        verdict = ?record.verdict,
                        exit = ?record.exit,
                        "original binary misbehaved; dropping input"
                    );
                    continue;
                }
            };
            cases.push(TestCase {
                expected_stdout: record.stdout,
                expected_exit: exit,
                ..probe
            });
        }
        if cases.is_empty() {
            return Err(Error::AllInputsFailed);
        }
        Ok(TestSuite {
            source_binary: target.id.clone(),
            cases,
        })
    }
}

fn tool_text(out: &ToolOutput) -> String {
    if out.stderr.trim().is_empty() {
        format!("{} {}", String::from_utf8_lossy(&out.stdout).trim_end(), out.exit)
            .trim()
            .to_owned()
    } else {
        out.stderr.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_input_stdin_forms() {
        let list: Vec<OracleInput> =
            serde_json::from_str(r#"[{"args":["3"]},{"stdin_text":"4 5\n"},{"stdin":"aGk="}]"#).unwrap();
        assert_eq!(list[0], OracleInput::args(["3"]));
        assert_eq!(list[1].stdin, b"4 5\n");
        assert_eq!(list[2].stdin, b"hi");
        assert!(serde_json::from_str::<OracleInput>(r#"{"stdin":"aGk=","stdin_text":"x"}"#).is_err());
        let round: OracleInput = serde_json::from_str(&serde_json::to_string(&list[1]).unwrap()).unwrap();
        assert_eq!(round, list[1]);
    }
    use crate::model::{binary_id, Origin, ProcessExit};

    fn unit(code: &str) -> SourceUnit {
        SourceUnit::new(code, Origin::Decompiler("file".into()), UnitKind::Standalone).unwrap()
    }

    fn function_unit(code: &str) -> SourceUnit {
        SourceUnit::new(code, Origin::Decompiler("file".into()), UnitKind::FunctionWithHarness).unwrap()
    }

    fn validator() -> Validator {
        Validator::new(
            Toolchain::default(),
            ExecLimits {
                wall_clock_s: 2,
                ..ExecLimits::default()
            },
        )
    }

    fn suite(cases: Vec<TestCase>) -> TestSuite {
        TestSuite {
            source_binary: binary_id(b"original"),
            cases,
        }
    }

    fn case(args: &[&str], stdout: &str) -> TestCase {
        TestCase {
            args: args.iter().map(|s| s.to_string()).collect(),
            stdin: Vec::new(),
            expected_stdout: stdout.as_bytes().to_vec(),
            expected_exit: 0,
        }
    }

    const FACT: &str = "#include <stdio.h>\n#include <stdlib.h>\nint factorial(int n) {\n  if (n <= 1) return 1;\n  return n * factorial(n - 1);\n}\nint main(int argc, char **argv) {\n  int n = argc > 1 ? atoi(argv[1]) : 0;\n  printf(\"%d\\n\", factorial(n));\n  return 0;\n}\n";

    #[test]
    fn syntax_pass_and_fail() {
        let v = validator();
        assert!(v.check_syntax(&unit("int main(){return 0;}")).unwrap().is_pass());
        let gate = v.check_syntax(&unit("int main(){return 0}")).unwrap();
        let diag = gate.diagnostics().unwrap();
        assert_eq!(diag.level, ConstraintLevel::L1);
        assert!(diag.raw_text.contains("expected ';'"), "{}", diag.raw_text);
        assert!(diag.failed_tests.is_empty());
    }

    #[test]
    fn ghidra_undefined8_is_rejected_by_front_end() {
        // recorded with gcc 11.4: unknown type names are front-end errors
        let code = "undefined8 main() {\n  local_c = FUN_11e9();\n  printf(\"%d\", local_c);\n}\n";
        let gate = validator().check_syntax(&unit(code)).unwrap();
        let diag = gate.diagnostics().expect("front-end rejects undefined8");
        assert!(diag.raw_text.contains("undefined8"), "{}", diag.raw_text);
    }

    #[test]
    fn undefined_reference_fails_at_link() {
        let code = "#include <stdio.h>\nint FUN_11e9(void);\nint main(void) {\n  int local_c = FUN_11e9();\n  printf(\"%d\", local_c);\n  return 0;\n}\n";
        let v = validator();
        assert!(v.check_syntax(&unit(code)).unwrap().is_pass());
        let gate = v.check_compile(&unit(code), None).unwrap();
        let diag = gate.diagnostics().unwrap();
        assert_eq!(diag.level, ConstraintLevel::L2);
        assert!(diag.raw_text.contains("undefined reference to `FUN_11e9'"), "{}", diag.raw_text);
        assert!(!diag.signature_mismatch);
    }

    #[test]
    fn compile_produces_executable() {
        match validator().check_compile(&unit(FACT), None).unwrap() {
            Gate::Pass(artifact) => assert!(artifact.path().is_file()),
            Gate::Fail(d) => panic!("{}", d.raw_text),
        }
    }

    #[test]
    fn strict_mode_promotes_warnings() {
        let code = "int main(void) { int unused; return 0; }";
        let lax = validator();
        assert!(lax.check_compile(&unit(code), None).unwrap().is_pass());
        let mut strict = validator();
        strict.toolchain.strict = true;
        assert!(!strict.check_compile(&unit(code), None).unwrap().is_pass());
    }

    #[test]
    fn harness_prototype_mismatch_is_flagged() {
        let harness = HarnessSpec::from_source(
            "#include <stdio.h>\nvoid iorder(int *a, int *b, int *c, int *d);\nint main(void) {\n  int a = 4, b = 3, c = 2, d = 1;\n  iorder(&a, &b, &c, &d);\n  printf(\"%d %d %d %d\\n\", a, b, c, d);\n  return 0;\n}\n",
        );
        // recovered under its stripped name, so the harness's symbol is
        // never defined
        let mismatched = function_unit("void FUN_00101139(int *a, int *b, int *c, int *d) { (void)a; (void)b; (void)c; (void)d; }\n");
        let v = validator();
        let gate = v.check_compile(&mismatched, Some(&harness)).unwrap();
        let diag = gate.diagnostics().unwrap();
        assert!(diag.signature_mismatch, "{}", diag.raw_text);
        assert!(diag.raw_text.contains("undefined reference to `iorder'"));

        // a unit that brings its own main collides with the harness
        let with_main = function_unit("void iorder(int *a, int *b, int *c, int *d) { (void)a; (void)b; (void)c; (void)d; }\nint main(void) { return 0; }\n");
        let gate = v.check_compile(&with_main, Some(&harness)).unwrap();
        assert!(gate.diagnostics().unwrap().signature_mismatch);

        // unit-internal undefined references are not the harness's fault
        let broken = function_unit("int FUN_1(void);\nvoid iorder(int *a, int *b, int *c, int *d) { *a = FUN_1(); (void)b; (void)c; (void)d; }\n");
        let gate = v.check_compile(&broken, Some(&harness)).unwrap();
        assert!(!gate.diagnostics().unwrap().signature_mismatch);

        let good = function_unit("void iorder(int *a, int *b, int *c, int *d) { int t = *a; *a = *d; *d = t; t = *b; *b = *c; *c = t; }\n");
        assert!(v.check_compile(&good, Some(&harness)).unwrap().is_pass());
    }

    #[test]
    fn function_unit_without_harness_is_config_error() {
        let err = validator().check_compile(&function_unit("int f(void){return 1;}"), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn validate_reports_first_failing_level() {
        let v = validator();
        let s = suite(vec![case(&["5"], "120\n"), case(&["1"], "1\n")]);
        let report = v.validate(&unit("int main(){return 0}"), &s, None).unwrap();
        assert_eq!(report.level, ConstraintLevel::L1);
        assert!(report.executable.is_none());

        let report = v.validate(&unit(FACT), &s, None).unwrap();
        assert!(report.is_pass());
        assert!(report.diagnostics.is_none());
        assert!(report.executable.is_some());

        let wrong = FACT.replace("return 1;", "return 0;");
        let report = v.validate(&unit(&wrong), &s, None).unwrap();
        assert_eq!(report.level, ConstraintLevel::L3);
        let failed = &report.diagnostics.unwrap().failed_tests;
        assert_eq!(failed.len(), 2);
        assert_eq!(failed[0].actual_stdout, b"0\n");
        assert_eq!(failed[0].case.expected_stdout, b"120\n");
    }

    #[test]
    fn run_tests_reports_every_failure_in_order() {
        let v = validator();
        let exe = match v
            .check_compile(
                &unit("#include <stdio.h>\n#include <unistd.h>\n#include <stdlib.h>\nint main(int c, char **v) { int n = atoi(v[1]); if (n == 2) sleep(30); printf(\"%d\\n\", n); return 0; }"),
                None,
            )
            .unwrap()
        {
            Gate::Pass(a) => a,
            Gate::Fail(d) => panic!("{}", d.raw_text),
        };
        let s = suite(vec![case(&["1"], "1\n"), case(&["2"], "2\n"), case(&["3"], "4\n")]);
        let diag = match v.run_tests(exe.path(), &s).unwrap() {
            Gate::Fail(d) => d,
            Gate::Pass(()) => panic!("expected failures"),
        };
        assert_eq!(diag.failed_tests.len(), 2);
        assert_eq!(diag.failed_tests[0].case.args, ["2"]);
        assert!(diag.failed_tests[0].actual_stdout.is_empty());
        assert_eq!(diag.failed_tests[1].case.args, ["3"]);
        assert_eq!(diag.failed_tests[1].actual_exit, ProcessExit::Code(0));
    }

    #[test]
    fn exit_code_comparison_is_configurable() {
        let v = validator();
        let exe = match v.check_compile(&unit("#include <stdio.h>\nint main(void){puts(\"x\"); return 3;}"), None).unwrap() {
            Gate::Pass(a) => a,
            Gate::Fail(d) => panic!("{}", d.raw_text),
        };
        let s = suite(vec![case(&[], "x\n")]);
        assert!(!v.run_tests(exe.path(), &s).unwrap().is_pass());
        assert!(v.clone().with_exit_codes(false).run_tests(exe.path(), &s).unwrap().is_pass());
    }

    #[test]
    fn empty_suite_is_rejected_for_l3() {
        let v = validator();
        let err = v.validate(&unit(FACT), &suite(vec![]), None).unwrap_err();
        assert!(matches!(err, Error::InvalidSuite(_)));
    }

    #[test]
    fn oracle_round_trip_on_factorial() {
        let v = validator();
        let exe = match v.check_compile(&unit(FACT), None).unwrap() {
            Gate::Pass(a) => a,
            Gate::Fail(d) => panic!("{}", d.raw_text),
        };
        let bin = exe.workdir().join("fact.bin");
        fs::copy(exe.path(), &bin).unwrap();
        let target = BinaryTarget::open(&bin).unwrap();
        let inputs = vec![OracleInput::args(["5"]), OracleInput::args(["0"]), OracleInput::args(["7"])];
        let s = v.generate_oracle(&target, &inputs).unwrap();
        assert_eq!(s.cases[0].expected_stdout, b"120\n");
        assert_eq!(s.source_binary, target.id);
        assert_eq!(s, v.generate_oracle(&target, &inputs).unwrap());
        assert!(v.validate(&unit(FACT), &s, None).unwrap().is_pass());
    }

    #[test]
    fn oracle_drops_inputs_where_original_hangs() {
        let v = Validator::new(
            Toolchain::default(),
            ExecLimits {
                wall_clock_s: 1,
                ..ExecLimits::default()
            },
        );
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("echo.sh");
        fs::write(&bin, "#!/bin/sh\n[ \"$1\" = hang ] && sleep 30\ncat\n").unwrap();
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&bin, fs::Permissions::from_mode(0o755)).unwrap();
        let target = BinaryTarget::open(&bin).unwrap();
        let s = v
            .generate_oracle(&target, &[OracleInput::stdin("abc"), OracleInput::args(["hang"])])
            .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.cases[0].expected_stdout, b"abc");

        let err = v.generate_oracle(&target, &[OracleInput::args(["hang"])]).unwrap_err();
        assert!(matches!(err, Error::AllInputsFailed));
    }

    #[test]
    fn toolchain_requires_syntax_only_flag() {
        let mut tc = Toolchain::default();
        assert!(tc.validate().is_ok());
        tc.syntax_flags = vec!["-w".into()];
        assert!(tc.validate().is_err());
    }

    #[test]
    fn boundary_inputs_cover_args_and_stdin() {
        let inputs = boundary_inputs();
        assert!(inputs.iter().any(|i| i.args == ["2147483647"]));
        assert!(inputs.iter().any(|i| i.stdin == b"hello\n"));
    }
}
